#pragma once

// Lifting of classic function-symbol terms f(x1,...,xn) into nested tuples
// (f x1 ... xn), where the tuple itself plays the role of the single implicit
// functor. The lifting is injective; hl_inv is its left inverse.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "natlog/error.hpp"
#include "natlog/term.hpp"

namespace natlog {

struct ClassicTerm {
  enum class Kind { Atom, Var, Compound };

  Kind kind = Kind::Atom;
  std::string name;               // atom name, variable name or functor
  std::vector<ClassicTerm> args;  // nonempty iff Compound

  static ClassicTerm atom(std::string name) { return {Kind::Atom, std::move(name), {}}; }
  static ClassicTerm var(std::string name) { return {Kind::Var, std::move(name), {}}; }
  static ClassicTerm compound(std::string functor, std::vector<ClassicTerm> args) {
    return {Kind::Compound, std::move(functor), std::move(args)};
  }

  friend bool operator==(const ClassicTerm&, const ClassicTerm&) = default;
};

/// Bidirectional variable naming: names[i] is the name of Var i.
class VarNames {
 public:
  std::uint32_t index_of(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
  }
  std::string name_of(std::uint32_t i) const {
    return i < names_.size() ? names_[i] : "_" + std::to_string(i);
  }
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

inline Term hl(const ClassicTerm& c, VarNames& names) {
  switch (c.kind) {
    case ClassicTerm::Kind::Atom: return Term::sym(c.name);
    case ClassicTerm::Kind::Var: return Term::var(names.index_of(c.name));
    case ClassicTerm::Kind::Compound: {
      std::vector<Term> items;
      items.reserve(c.args.size() + 1);
      items.push_back(Term::sym(c.name));
      for (const auto& a : c.args) items.push_back(hl(a, names));
      return Term::tuple(std::move(items));
    }
  }
  return Term();
}

inline Term hl(const ClassicTerm& c) {
  VarNames names;
  return hl(c, names);
}

/// Throws NotInImage for numbers, strings, `()`, 1-tuples, and tuples not
/// headed by a symbol.
inline ClassicTerm hl_inv(const Term& t, const VarNames& names = {}) {
  switch (t.kind()) {
    case Kind::Sym: return ClassicTerm::atom(t.sym_name());
    case Kind::Var: return ClassicTerm::var(names.name_of(t.var_index()));
    case Kind::Tup: {
      if (t.size() < 2) throw NotInImage("tuple " + to_string(t) + " has no classic preimage");
      if (!t[0].is_sym()) throw NotInImage("tuple " + to_string(t) + " is not headed by a symbol");
      std::vector<ClassicTerm> args;
      args.reserve(t.size() - 1);
      for (std::size_t i = 1; i < t.size(); ++i) args.push_back(hl_inv(t[i], names));
      return ClassicTerm::compound(t[0].sym_name(), std::move(args));
    }
    default: throw NotInImage("constant " + to_string(t) + " has no classic preimage");
  }
}

/// Prolog-style text, e.g. f(A,g(a,B),B).
inline std::string to_string(const ClassicTerm& c) {
  if (c.kind != ClassicTerm::Kind::Compound) return c.name;
  std::string s = c.name + "(";
  for (std::size_t i = 0; i < c.args.size(); ++i) {
    if (i) s += ",";
    s += to_string(c.args[i]);
  }
  return s + ")";
}

}  // namespace natlog
