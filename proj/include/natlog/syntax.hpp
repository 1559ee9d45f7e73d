#pragma once

// Natlog surface syntax.
//
//   sentence := goal [':' goal (',' goal)*] '.'
//   query    := goal (',' goal)* '?'
//   goal     := [prefix] item+
//   item     := word | Var | number | "string" | '(' item* ')'
//   prefix   := '#' | '`' | '``' | '^' | '~'
//
// A goal is the tuple of its items. Capitalized or `_`-initial words are
// variables unless quoted. `%` starts a comment running to the end of line.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "natlog/error.hpp"
#include "natlog/term.hpp"

namespace natlog {

enum class TokenKind { Word, Var, Num, Str, LParen, RParen, Colon, Comma, Dot, QMark, Prefix };

struct Token {
  TokenKind kind;
  std::string lexeme;  // quotes stripped and escapes resolved for quoted tokens
  SourcePos pos;
};

enum class Annotation {
  Plain,
  Action,  // #f A..Z        host action, side effects only
  Fun,     // `f A..Z R      host function, result unified with R
  Gen,     // ``f A..Z R     host generator, R unified with each yield
  Yield,   // ^t             emit t as an answer mid-derivation
  Db,      // ~t             match t against the ground fact database
};

struct Goal {
  Annotation annotation = Annotation::Plain;
  Term term;

  friend bool operator==(const Goal&, const Goal&) = default;
};

struct Clause {
  Term head;
  std::vector<Goal> body;
  std::uint32_t nvars = 0;

  bool is_fact() const noexcept { return body.empty(); }
  friend bool operator==(const Clause&, const Clause&) = default;
};

struct Query {
  std::vector<Goal> goals;
  std::vector<std::string> var_names;  // var_names[i] names Var i; "_" if anonymous

  std::uint32_t nvars() const noexcept { return static_cast<std::uint32_t>(var_names.size()); }
};

namespace detail {

inline bool is_special(char c) {
  switch (c) {
    case '(': case ')': case ':': case ',': case '.': case '?':
    case '#': case '`': case '^': case '~': case '%': case '\'': case '"':
      return true;
    default:
      return false;
  }
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

inline bool is_illegal(char c) {
  auto u = static_cast<unsigned char>(c);
  return (u < 0x20 && !is_space(c)) || u == 0x7f;
}

inline bool is_word_char(char c) { return !is_space(c) && !is_special(c) && !is_illegal(c); }

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// -?[0-9]+
inline bool looks_integer(std::string_view s) {
  std::size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (!is_digit(s[i])) return false;
  return true;
}

// -?[0-9]+\.[0-9]+([eE][+-]?[0-9]+)?
inline bool looks_real(std::string_view s) {
  std::size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
  auto digits = [&] {
    std::size_t start = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    return i > start;
  };
  if (!digits()) return false;
  if (i == s.size() || s[i] != '.') return false;
  ++i;
  if (!digits()) return false;
  if (i == s.size()) return true;
  if (s[i] != 'e' && s[i] != 'E') return false;
  ++i;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  if (!digits()) return false;
  return i == s.size();
}

inline TokenKind classify_word(std::string_view w) {
  if (looks_integer(w) || looks_real(w)) return TokenKind::Num;
  if ((w[0] >= 'A' && w[0] <= 'Z') || w[0] == '_') return TokenKind::Var;
  return TokenKind::Word;
}

}  // namespace detail

/// Splits Natlog source into tokens. Throws LexError on an unterminated quote
/// or an illegal (control) character.
inline std::vector<Token> tokenize(std::string_view src, const std::string& file = {}) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto here = [&] { return SourcePos{file, line, col}; };
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };

  while (i < src.size()) {
    char c = src[i];
    if (detail::is_space(c)) {
      advance(1);
      continue;
    }
    if (c == '%') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    SourcePos pos = here();
    if (detail::is_illegal(c)) {
      throw LexError("illegal character (code " + std::to_string(static_cast<unsigned char>(c)) + ")", pos);
    }
    switch (c) {
      case '(': out.push_back({TokenKind::LParen, "(", pos}); advance(1); continue;
      case ')': out.push_back({TokenKind::RParen, ")", pos}); advance(1); continue;
      case ':': out.push_back({TokenKind::Colon, ":", pos}); advance(1); continue;
      case ',': out.push_back({TokenKind::Comma, ",", pos}); advance(1); continue;
      case '.': out.push_back({TokenKind::Dot, ".", pos}); advance(1); continue;
      case '?': out.push_back({TokenKind::QMark, "?", pos}); advance(1); continue;
      case '#': case '^': case '~':
        out.push_back({TokenKind::Prefix, std::string(1, c), pos});
        advance(1);
        continue;
      case '`':
        if (i + 1 < src.size() && src[i + 1] == '`') {
          out.push_back({TokenKind::Prefix, "``", pos});
          advance(2);
        } else {
          out.push_back({TokenKind::Prefix, "`", pos});
          advance(1);
        }
        continue;
      case '\'': case '"': {
        char quote = c;
        advance(1);
        std::string text;
        bool closed = false;
        while (i < src.size()) {
          char d = src[i];
          if (d == '\\' && i + 1 < src.size()) {
            char e = src[i + 1];
            switch (e) {
              case 'n': text.push_back('\n'); break;
              case 't': text.push_back('\t'); break;
              case 'r': text.push_back('\r'); break;
              default: text.push_back(e);
            }
            advance(2);
            continue;
          }
          if (d == quote) {
            advance(1);
            closed = true;
            break;
          }
          text.push_back(d);
          advance(1);
        }
        if (!closed) throw LexError("unterminated quoted token", pos);
        out.push_back({quote == '\'' ? TokenKind::Word : TokenKind::Str, std::move(text), pos});
        continue;
      }
      default: break;
    }
    std::size_t start = i;
    while (i < src.size() && detail::is_word_char(src[i])) advance(1);
    // 3.14 and 1.5e-3 keep their dot.
    if (detail::looks_integer(src.substr(start, i - start)) && i + 1 < src.size() && src[i] == '.' &&
        detail::is_digit(src[i + 1])) {
      advance(1);
      while (i < src.size() && detail::is_word_char(src[i])) advance(1);
    }
    std::string word(src.substr(start, i - start));
    out.push_back({detail::classify_word(word), std::move(word), pos});
  }
  return out;
}

namespace detail {

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::string file)
      : tokens_(std::move(tokens)), file_(std::move(file)) {}

  bool at_end() const { return pos_ >= tokens_.size(); }

  std::vector<Clause> program() {
    std::vector<Clause> clauses;
    while (!at_end()) clauses.push_back(clause());
    return clauses;
  }

  Clause clause() {
    begin_scope();
    SourcePos start = peek_pos();
    if (!at_end() && (peek().kind == TokenKind::Dot || peek().kind == TokenKind::QMark))
      throw ParseError("empty sentence", start);
    if (!at_end() && peek().kind == TokenKind::Prefix)
      throw ParseError("a clause head cannot carry a prefix", start);
    Clause c;
    c.head = items_until_goal_end("clause head");
    if (!at_end() && peek().kind == TokenKind::Colon) {
      ++pos_;
      c.body = goals();
    }
    expect_end(TokenKind::Dot, "'.'");
    c.nvars = static_cast<std::uint32_t>(names_.size());
    return c;
  }

  Query query() {
    begin_scope();
    if (!at_end() && (peek().kind == TokenKind::QMark || peek().kind == TokenKind::Dot))
      throw ParseError("empty query", peek_pos());
    Query q;
    q.goals = goals();
    if (!at_end() && peek().kind == TokenKind::Colon)
      throw ParseError("rule syntax ':' is not allowed in a query", peek_pos());
    expect_end(TokenKind::QMark, "'?'");
    if (!at_end()) throw ParseError("unexpected text after query", peek_pos());
    q.var_names = names_;
    return q;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }

  SourcePos peek_pos() const {
    if (!at_end()) return peek().pos;
    if (tokens_.empty()) return SourcePos{file_, 1, 1};
    return tokens_.back().pos;
  }

  void begin_scope() {
    names_.clear();
    index_.clear();
  }

  void expect_end(TokenKind kind, const char* what) {
    if (at_end()) throw ParseError(std::string("missing terminator ") + what, peek_pos());
    if (peek().kind != kind) throw ParseError(std::string("expected ") + what + ", found '" + peek().lexeme + "'", peek_pos());
    ++pos_;
  }

  std::vector<Goal> goals() {
    std::vector<Goal> out;
    for (;;) {
      out.push_back(goal());
      if (!at_end() && peek().kind == TokenKind::Comma) {
        ++pos_;
        continue;
      }
      return out;
    }
  }

  Goal goal() {
    Goal g;
    SourcePos start = peek_pos();
    if (!at_end() && peek().kind == TokenKind::Prefix) {
      const std::string& p = peek().lexeme;
      g.annotation = p == "#"   ? Annotation::Action
                     : p == "`"  ? Annotation::Fun
                     : p == "``" ? Annotation::Gen
                     : p == "^"  ? Annotation::Yield
                                 : Annotation::Db;
      ++pos_;
    }
    g.term = items_until_goal_end("goal");
    if ((g.annotation == Annotation::Fun || g.annotation == Annotation::Gen) && g.term.size() < 2)
      throw ParseError("host function and generator calls need a name and a result slot", start);
    return g;
  }

  // Reads items up to (not including) ',', ':', '.', '?'.
  Term items_until_goal_end(const char* what) {
    std::vector<Term> items;
    while (!at_end()) {
      TokenKind k = peek().kind;
      if (k == TokenKind::Comma || k == TokenKind::Colon || k == TokenKind::Dot || k == TokenKind::QMark) break;
      items.push_back(item());
    }
    if (items.empty()) throw ParseError(std::string("empty ") + what, peek_pos());
    return Term::tuple(std::move(items));
  }

  Term item() {
    if (at_end()) throw ParseError("unexpected end of input", peek_pos());
    const Token& t = tokens_[pos_];
    switch (t.kind) {
      case TokenKind::Word: ++pos_; return Term::sym(t.lexeme);
      case TokenKind::Str: ++pos_; return Term::str(t.lexeme);
      case TokenKind::Var: ++pos_; return variable(t.lexeme);
      case TokenKind::Num: ++pos_; return number(t);
      case TokenKind::LParen: {
        ++pos_;
        std::vector<Term> items;
        while (!at_end() && peek().kind != TokenKind::RParen) {
          TokenKind k = peek().kind;
          if (k == TokenKind::Comma || k == TokenKind::Colon || k == TokenKind::Dot || k == TokenKind::QMark ||
              k == TokenKind::Prefix)
            throw ParseError("unexpected '" + peek().lexeme + "' inside parentheses", peek_pos());
          items.push_back(item());
        }
        if (at_end()) throw ParseError("unbalanced parentheses", t.pos);
        ++pos_;
        return Term::tuple(std::move(items));
      }
      case TokenKind::RParen: throw ParseError("unbalanced parentheses", t.pos);
      default: throw ParseError("unexpected '" + t.lexeme + "'", t.pos);
    }
  }

  Term variable(const std::string& name) {
    if (name == "_") {
      names_.push_back("_");
      return Term::var(static_cast<std::uint32_t>(names_.size() - 1));
    }
    auto [it, inserted] = index_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted) names_.push_back(name);
    return Term::var(it->second);
  }

  Term number(const Token& t) const {
    const std::string& s = t.lexeme;
    if (detail::looks_integer(s)) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("integer literal out of range: " + s, t.pos);
      return Term::integer(v);
    }
    double d = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("bad real literal: " + s, t.pos);
    return Term::real(d);
  }

  std::vector<Token> tokens_;
  std::string file_;
  std::size_t pos_ = 0;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

}  // namespace detail

inline std::vector<Clause> parse_program(std::string_view src, const std::string& file = {}) {
  detail::Parser p(tokenize(src, file), file);
  return p.program();
}

inline Query parse_query(std::string_view src, const std::string& file = {}) {
  detail::Parser p(tokenize(src, file), file);
  return p.query();
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<Clause> parse_program_file(const std::string& path) {
  return parse_program(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// Surface rendering: parse_program(render(c)) reproduces c.

namespace detail {

inline bool bare_word(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!is_word_char(c)) return false;
  return classify_word(s) == TokenKind::Word;
}

inline void write_surface(std::string& out, const Term& t) {
  switch (t.kind()) {
    case Kind::Var: out += "_" + std::to_string(t.var_index()); return;
    case Kind::Sym:
      if (bare_word(t.sym_name())) out += t.sym_name();
      else write_quoted(out, t.sym_name(), '\'');
      return;
    case Kind::Int: out += std::to_string(t.int_value()); return;
    case Kind::Real: {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof buf, t.real_value());
      std::string s(buf, res.ptr);
      if (s.find('.') == std::string::npos) {
        auto e = s.find_first_of("eE");
        s.insert(e == std::string::npos ? s.size() : e, ".0");
      }
      out += s;
      return;
    }
    case Kind::Str: write_quoted(out, t.str_value(), '"'); return;
    case Kind::Tup:
      out.push_back('(');
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (i) out.push_back(' ');
        write_surface(out, t[i]);
      }
      out.push_back(')');
      return;
  }
}

}  // namespace detail

inline const char* prefix_of(Annotation a) {
  switch (a) {
    case Annotation::Action: return "#";
    case Annotation::Fun: return "`";
    case Annotation::Gen: return "``";
    case Annotation::Yield: return "^";
    case Annotation::Db: return "~";
    default: return "";
  }
}

/// Goal items separated by spaces, with its prefix sigil.
inline std::string render_goal(const Goal& g) {
  std::string out = prefix_of(g.annotation);
  for (std::size_t i = 0; i < g.term.size(); ++i) {
    if (i) out.push_back(' ');
    detail::write_surface(out, g.term[i]);
  }
  return out;
}

inline std::string render_clause(const Clause& c) {
  std::string out = render_goal(Goal{Annotation::Plain, c.head});
  for (std::size_t i = 0; i < c.body.size(); ++i) {
    out += i ? ", " : " : ";
    out += render_goal(c.body[i]);
  }
  return out + ".";
}

/// `(('tc', 0, 'is', 'animal'),)`: the goals as a tuple, variables as indices.
inline std::string render_parsed_goals(const std::vector<Goal>& goals) {
  std::string out = "(";
  for (std::size_t i = 0; i < goals.size(); ++i) {
    if (i) out += ", ";
    out += prefix_of(goals[i].annotation);
    detail::write_term(out, goals[i].term, VarStyle::Index);
  }
  if (goals.size() == 1) out.push_back(',');
  return out + ")";
}

}  // namespace natlog
