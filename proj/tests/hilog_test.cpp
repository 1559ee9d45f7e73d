#include "natlog/hilog.hpp"

#include <gtest/gtest.h>

#include <optional>

#include "natlog/engine.hpp"
#include "natlog/unify.hpp"
#include "oracles.hpp"

using namespace natlog;

TEST(Hilog, LiftsCompoundTerms) {
  using C = ClassicTerm;
  // f(A, g(a, B), B)
  C t = C::compound("f", {C::var("A"), C::compound("g", {C::atom("a"), C::var("B")}), C::var("B")});
  EXPECT_EQ(to_string(t), "f(A,g(a,B),B)");
  Term h = hl(t);
  EXPECT_EQ(to_string(h, VarStyle::Index), "('f', 0, ('g', 'a', 1), 1)");
}

TEST(Hilog, ConstantsAndVariablesAreFixed) {
  EXPECT_EQ(hl(ClassicTerm::atom("a")), sym("a"));
  EXPECT_EQ(hl(ClassicTerm::var("X")), var(0));
}

TEST(Hilog, InverseRestoresNames) {
  using C = ClassicTerm;
  C t = C::compound("p", {C::var("X"), C::compound("q", {C::var("Y"), C::var("X")})});
  VarNames names;
  Term h = hl(t, names);
  EXPECT_EQ(hl_inv(h, names), t);
}

TEST(Hilog, InverseRejectsTermsOutsideTheImage) {
  EXPECT_THROW(hl_inv(num(1)), NotInImage);
  EXPECT_THROW(hl_inv(Term::str("s")), NotInImage);
  EXPECT_THROW(hl_inv(Term()), NotInImage);
  EXPECT_THROW(hl_inv(tup({sym("f")})), NotInImage);
  EXPECT_THROW(hl_inv(tup({var(0), sym("a")})), NotInImage);
  EXPECT_THROW(hl_inv(tup({tup({sym("f"), sym("a")}), sym("b")})), NotInImage);
}

// ---------------------------------------------------------------------------
// Unfolding on both sides of the lifting.

namespace {

using C = ClassicTerm;
using oracle::ClassicClause;

/// hl applied to a clause, variables numbered by first occurrence.
std::vector<Term> hl_clause(const ClassicClause& c) {
  VarNames names;
  std::vector<Term> out{hl(c.head, names)};
  for (const C& g : c.body) out.push_back(hl(g, names));
  return out;
}

std::uint32_t count_vars(const std::vector<Term>& c) {
  std::unordered_map<std::uint32_t, std::uint32_t> m;
  for (const Term& t : c) renumber_vars(t, m);
  return static_cast<std::uint32_t>(m.size());
}

/// Unfolding on lifted clauses with the structure-sharing unifier; result
/// variables renumbered by first occurrence.
std::optional<std::vector<Term>> tuple_unfold(const std::vector<Term>& c1, const std::vector<Term>& c2) {
  std::uint32_t n1 = count_vars(c1), n2 = count_vars(c2);
  Env env(n1 + n2);
  Trail trail;
  if (!unify(c1[1], relocate(c2[0], n1), env, trail, true)) return std::nullopt;
  std::vector<Term> raw{resolve(c1[0], env)};
  for (std::size_t i = 1; i < c2.size(); ++i) raw.push_back(resolve(relocate(c2[i], n1), env));
  for (std::size_t i = 2; i < c1.size(); ++i) raw.push_back(resolve(c1[i], env));
  std::unordered_map<std::uint32_t, std::uint32_t> m;
  std::vector<Term> out;
  for (const Term& t : raw) out.push_back(renumber_vars(t, m));
  return out;
}

}  // namespace

TEST(HilogProperty, UnfoldingCommutesWithLifting) {
  oracle::ClassicGen gen(2024);
  int agree = 0, unified = 0;
  for (int i = 0; i < 2000; ++i) {
    auto [c1, c2] = gen.clause_pair();
    auto classic = oracle::unfold(c1, c2);
    auto lifted = tuple_unfold(hl_clause(c1), hl_clause(c2));
    ASSERT_EQ(classic.has_value(), lifted.has_value()) << "case " << i;
    if (classic) {
      ++unified;
      EXPECT_EQ(hl_clause(*classic), *lifted) << "case " << i;
    }
    ++agree;
  }
  EXPECT_EQ(agree, 2000);
  EXPECT_GT(unified, 200);  // the property must not be vacuous
}

TEST(HilogProperty, InverseRoundTrips) {
  oracle::ClassicGen gen(7);
  for (int i = 0; i < 2000; ++i) {
    C t = gen.term(4);
    VarNames names;
    Term h = hl(t, names);
    EXPECT_EQ(hl_inv(h, names), t);
    EXPECT_EQ(hl(hl_inv(h, names)), hl(t));
  }
}
