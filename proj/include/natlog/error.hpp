#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace natlog {

/// Position inside a source text, 1-based. `file` is empty for in-memory text.
struct SourcePos {
  std::string file;
  std::size_t line = 1;
  std::size_t column = 1;

  std::string to_string() const {
    std::string s = file.empty() ? std::string("<text>") : file;
    return s + ":" + std::to_string(line) + ":" + std::to_string(column);
  }
};

/// Root of every exception thrown by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class positioned_error : public error {
 public:
  positioned_error(const std::string& what, SourcePos pos)
      : error(pos.to_string() + ": " + what), pos_(std::move(pos)) {}
  const SourcePos& pos() const noexcept { return pos_; }

 private:
  SourcePos pos_;
};

class LexError : public positioned_error {
 public:
  using positioned_error::positioned_error;
};

class ParseError : public positioned_error {
 public:
  using positioned_error::positioned_error;
};

/// The term is not the image of a classic term under hl.
class NotInImage : public error {
 public:
  using error::error;
};

class NonGroundFact : public error {
 public:
  using error::error;
};

/// Malformed dataset file; the message carries the row or byte position.
class FormatError : public error {
 public:
  using error::error;
};

class EmptyDb : public error {
 public:
  using error::error;
};

class DivergedLoss : public error {
 public:
  using error::error;
};

class ModelNotTrained : public error {
 public:
  using error::error;
};

class ModelFormatError : public error {
 public:
  using error::error;
};

/// Errors surfacing from a running answer stream. They end the stream.
class runtime_error : public error {
 public:
  using error::error;
};

class UnknownHostName : public runtime_error {
 public:
  using runtime_error::runtime_error;
};

class NoDatabase : public runtime_error {
 public:
  using runtime_error::runtime_error;
};

class NonGroundArgument : public runtime_error {
 public:
  using runtime_error::runtime_error;
};

class HostCallError : public runtime_error {
 public:
  using runtime_error::runtime_error;
};

}  // namespace natlog
