#pragma once

// Random term generators shared by the property tests.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "natlog/term.hpp"

namespace natlog::gen {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  std::mt19937_64& rng() { return rng_; }

  /// A leaf constant drawn from a small alphabet so that collisions are common.
  Term constant() {
    switch (below(6)) {
      case 0:
      case 1:
      case 2: return Term::sym(std::string(1, static_cast<char>('a' + below(4))));
      case 3: return Term::integer(static_cast<std::int64_t>(below(3)));
      case 4: return Term::str(below(2) ? "s" : "t");
      default: return Term();
    }
  }

  /// Random term over variables 0..nvars-1 (none when nvars == 0).
  Term term(std::size_t depth, std::uint32_t nvars) {
    if (depth == 0 || chance(0.35)) {
      if (nvars > 0 && chance(0.4)) return Term::var(static_cast<std::uint32_t>(below(nvars)));
      return constant();
    }
    std::size_t n = 1 + below(3);
    std::vector<Term> items;
    for (std::size_t i = 0; i < n; ++i) items.push_back(term(depth - 1, nvars));
    return Term::tuple(std::move(items));
  }

  Term ground(std::size_t depth) { return term(depth, 0); }

  /// Variant of `t` with some subterms replaced by fresh variables numbered
  /// from `next`, so it is likely to unify with `t`.
  Term generalize(const Term& t, std::uint32_t& next, double p = 0.3) {
    if (chance(p)) return Term::var(next++);
    if (!t.is_tuple() || t.size() == 0) return t;
    std::vector<Term> items;
    for (const Term& item : t.items()) items.push_back(generalize(item, next, p));
    return Term::tuple(std::move(items));
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace natlog::gen
