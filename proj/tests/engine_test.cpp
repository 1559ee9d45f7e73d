#include "natlog/engine.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "natlog/neural_index.hpp"
#include "oracles.hpp"

using namespace natlog;

namespace {

std::string programs(const std::string& f) { return std::string(NATLOG_PROGRAMS_DIR) + "/" + f; }

std::vector<std::string> answers(const Solver& s, const std::string& q, std::size_t limit = SIZE_MAX) {
  std::vector<std::string> out;
  auto st = s.solve(q);
  while (out.size() < limit) {
    auto a = st.next();
    if (!a) break;
    out.push_back(a->to_string());
  }
  return out;
}

std::string nat_list(int n) {
  std::string s = "()";
  for (int i = n; i-- > 0;) s = "(e" + std::to_string(i) + " " + s + ")";
  return s;
}

}  // namespace

TEST(Engine, TransitiveClosure) {
  Solver s(Program::load(programs("tc.nat")));
  auto got = answers(s, "tc Who is animal ?");
  EXPECT_EQ(got, (std::vector<std::string>{
                     "('tc', 'cat', 'is', 'animal')", "('tc', 'tiger', 'is', 'animal')",
                     "('tc', 'mouse', 'is', 'animal')", "('tc', 'feline', 'is', 'animal')",
                     "('tc', 'rodent', 'is', 'animal')", "('tc', 'snake', 'is', 'animal')",
                     "('tc', 'mammal', 'is', 'animal')", "('tc', 'reptile', 'is', 'animal')"}));
}

TEST(Engine, PermutationOrder) {
  Solver s(Program::load(programs("perm.nat")));
  auto st = s.solve("perm (a (b (c ()))) P?");
  std::vector<std::string> third;
  while (auto a = st.next()) third.push_back(to_string((*a)[2]));
  EXPECT_EQ(third, (std::vector<std::string>{
                       "('a', ('b', ('c', ())))", "('b', ('a', ('c', ())))", "('b', ('c', ('a', ())))",
                       "('a', ('c', ('b', ())))", "('c', ('a', ('b', ())))", "('c', ('b', ('a', ())))"}));
}

TEST(Engine, PermutationCountsAreFactorials) {
  Solver s(Program::load(programs("perm.nat")));
  std::size_t fact = 1;
  for (int n = 1; n <= 6; ++n) {
    fact *= static_cast<std::size_t>(n);
    EXPECT_EQ(answers(s, "perm " + nat_list(n) + " P ?").size(), fact) << n;
  }
}

TEST(Engine, WormIsInfiniteAndAbandonable) {
  Solver s(Program::load(programs("worm.nat")));
  for (int rerun = 0; rerun < 2; ++rerun) {
    auto st = s.solve("worm ?");
    for (int i = 0; i < 43; ++i) {
      auto a = st.next();
      ASSERT_TRUE(a);
      EXPECT_EQ(a->to_string(), "('o',)");
      EXPECT_TRUE(a->yielded());
    }
    EXPECT_FALSE(st.done());
    st.close();
    EXPECT_TRUE(st.done());
    EXPECT_EQ(st.trail().size(), 0u);
    EXPECT_EQ(st.choice_points(), 0u);
    EXPECT_FALSE(st.next());
  }
}

TEST(Engine, LazinessStepsGrowLinearly) {
  Solver s(Program::load(programs("worm.nat")));
  auto steps_for = [&](int k) {
    auto st = s.solve("worm ?");
    for (int i = 0; i < k; ++i) st.next();
    return st.steps();
  };
  auto s100 = steps_for(100), s200 = steps_for(200), s400 = steps_for(400);
  EXPECT_LE(s100, 2u * 100 + 2);
  EXPECT_EQ(s400 - s200, 2 * (s200 - s100));
}

TEST(Engine, DeepRightRecursion) {
  Solver s(Program::load(programs("down.nat")));
  auto got = answers(s, "down 100000 ?");
  EXPECT_EQ(got, (std::vector<std::string>{"('down', 100000)"}));
}

TEST(Engine, LongListsDoNotOverflow) {
  Solver s(Program::parse("len () 0.\nlen (X Xs) N : len Xs M, `add M 1 N.\nmk 0 ().\nmk N (x Xs) : `gt N 0 true, `sub N 1 M, mk M Xs.\n"));
  auto got = answers(s, "mk 20000 L, len L N ?");
  ASSERT_EQ(got.size(), 1u);
  EXPECT_NE(got[0].find("('len', "), std::string::npos);
  EXPECT_NE(got[0].find(", 20000))"), std::string::npos);
}

TEST(Engine, Generators) {
  Solver s(Program::load(programs("gen.nat")));
  EXPECT_EQ(answers(s, "goal X ?"),
            (std::vector<std::string>{"('goal', 'l')", "('goal', 'l')", "('goal', 'o')", "('goal', 1000)",
                                      "('goal', 1001)", "('goal', 1002)", "('goal', 1003)", "('goal', 1004)"}));
}

TEST(Engine, ActionsRunOncePerBranch) {
  std::ostringstream out;
  Solver s(Program::load(programs("gen.nat")));
  s.set_registry(std::make_shared<HostRegistry>(standard_registry(out)));
  EXPECT_EQ(answers(s, "show X ?"), (std::vector<std::string>{"('show', 2)"}));
  EXPECT_EQ(out.str(), "printing b = 1\nprinting b = 2\n");
}

TEST(Engine, ActionsRenderUnboundVariables) {
  std::ostringstream out;
  Solver s(Program::parse("p X : #print hello X."));
  s.set_registry(std::make_shared<HostRegistry>(standard_registry(out)));
  EXPECT_EQ(answers(s, "p Y ?").size(), 1u);
  EXPECT_EQ(out.str(), "hello _0\n");
}

TEST(Engine, FunctionsUnifyTheirResult) {
  Solver s(Program::parse("sq X Y : `mul X X Y."));
  EXPECT_EQ(answers(s, "sq 7 Y ?"), (std::vector<std::string>{"('sq', 7, 49)"}));
  EXPECT_TRUE(answers(s, "sq 7 50 ?").empty());
  EXPECT_EQ(answers(s, "sq 7 49 ?").size(), 1u);
}

TEST(Engine, YieldThenContinue) {
  Solver s(Program::parse("p X : ^(saw X), q X.\nq 1.\nq 2."));
  auto st = s.solve("p 2 ?");
  std::vector<std::pair<std::string, bool>> got;
  while (auto a = st.next()) got.emplace_back(a->to_string(), a->yielded());
  EXPECT_EQ(got, (std::vector<std::pair<std::string, bool>>{{"(('saw', 2),)", true}, {"('p', 2)", false}}));
}

TEST(Engine, MultiGoalQueriesAnswerWithTuples) {
  Solver s(Program::load(programs("tc.nat")));
  auto got = answers(s, "cat is X, X is Y ?");
  EXPECT_EQ(got, (std::vector<std::string>{"(('cat', 'is', 'feline'), ('feline', 'is', 'mammal'))"}));
}

TEST(Engine, ResidualVariablesAreRenamed) {
  Solver s(Program::load(programs("perm.nat")));
  auto got = answers(s, "ins x L R ?", 2);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0], "('ins', 'x', _0, ('x', _0))");
  EXPECT_EQ(got[1], "('ins', 'x', (_0, _1), (_0, ('x', _1)))");
}

TEST(Engine, OccursCheckOption) {
  Solver s(Program::parse("same X X."));
  EXPECT_THROW(answers(s, "same Y (f Y) ?"), runtime_error);  // cyclic answer cannot be rendered
  s.set_options(SolverOptions{true});
  EXPECT_TRUE(answers(s, "same Y (f Y) ?").empty());
}

TEST(Engine, ErrorsEndTheStream) {
  Solver s(Program::parse("p X : `nosuch X Y.\nq X : `add X 1 Y.\nr : ~fact a.\nd X : `div X 0 Y."));
  {
    auto st = s.solve("p 1 ?");
    EXPECT_THROW(st.next(), UnknownHostName);
    EXPECT_TRUE(st.done());
    EXPECT_FALSE(st.next());
  }
  EXPECT_THROW(answers(s, "q X ?"), NonGroundArgument);
  EXPECT_THROW(answers(s, "r ?"), NoDatabase);
  EXPECT_THROW(answers(s, "d 3 ?"), HostCallError);
  EXPECT_THROW(answers(s, "#nosuch ?"), UnknownHostName);
  EXPECT_THROW(answers(s, "``nosuch X ?"), UnknownHostName);
}

TEST(Engine, ExhaustionRestoresInitialState) {
  Solver s(Program::load(programs("perm.nat")));
  auto st = s.solve("perm (a (b (c ()))) P ?");
  std::size_t n = 0;
  while (st.next()) {
    ++n;
    EXPECT_GT(st.trail().size(), 0u);
  }
  EXPECT_EQ(n, 6u);
  EXPECT_EQ(st.trail().size(), 0u);
  EXPECT_EQ(st.env().size(), st.query().nvars());
  for (std::uint32_t i = 0; i < st.env().size(); ++i) EXPECT_FALSE(st.env().is_bound(i));
}

TEST(Engine, AbandonMidwayRestoresInitialState) {
  Solver s(Program::load(programs("perm.nat")));
  auto st = s.solve("perm (a (b (c ()))) P ?");
  st.next();
  st.next();
  st.close();
  EXPECT_EQ(st.trail().size(), 0u);
  EXPECT_EQ(st.env().size(), st.query().nvars());
}

TEST(Engine, IndependentStreamsDoNotInterfere) {
  Solver s(Program::load(programs("perm.nat")));
  auto a = s.solve("perm (a (b (c ()))) P ?");
  auto b = s.solve("perm (a (b (c ()))) P ?");
  std::vector<std::string> xs, ys;
  for (;;) {
    auto x = a.next();
    auto y = b.next();
    if (!x || !y) {
      EXPECT_EQ(x.has_value(), y.has_value());
      break;
    }
    xs.push_back(x->to_string());
    ys.push_back(y->to_string());
  }
  EXPECT_EQ(xs, ys);
}

TEST(Engine, RangeForLoop) {
  Solver s(Program::load(programs("tc.nat")));
  std::size_t n = 0;
  for (const Answer& a : s.solve("tc X is mammal ?")) {
    EXPECT_EQ(a.size(), 4u);
    ++n;
  }
  EXPECT_EQ(n, 5u);  // cat tiger mouse feline rodent
}

// ---------------------------------------------------------------------------
// unfold_step

TEST(UnfoldStep, EmptyListMatchesOnlyFirstPermClause) {
  Program p = Program::load(programs("perm.nat"));
  Env env(1);
  Trail trail;
  Goal rest_goal{Annotation::Plain, tup({sym("done")})};
  GoalList rest = GoalList::cons(rest_goal, GoalList());
  auto u = unfold_step(p, env, trail, tup({sym("perm"), Term(), var(0)}), rest);
  auto first = u.next();
  ASSERT_TRUE(first);
  EXPECT_TRUE(first->same(rest));  // fact: successor is rest unchanged
  EXPECT_EQ(resolve(var(0), env), Term());
  EXPECT_FALSE(u.next());
  EXPECT_EQ(trail.size(), 0u);
  EXPECT_EQ(env.size(), 1u);
}

TEST(UnfoldStep, NoMatchingClauseYieldsNothing) {
  Program p = Program::load(programs("perm.nat"));
  Env env;
  Trail trail;
  auto u = unfold_step(p, env, trail, tup({sym("nothing"), sym("here")}), GoalList());
  EXPECT_FALSE(u.next());
}

TEST(UnfoldStep, BodyGoalsArePushedInOrder) {
  Program p = Program::load(programs("perm.nat"));
  Env env(1);
  Trail trail;
  auto u = unfold_step(p, env, trail, tup({sym("perm"), tup({sym("a"), Term()}), var(0)}), GoalList());
  auto s = u.next();
  ASSERT_TRUE(s);
  auto goals = s->to_vector();
  ASSERT_EQ(goals.size(), 2u);
  EXPECT_EQ(resolve(goals[0].term, env).size(), 3u);
  EXPECT_EQ(resolve(goals[0].term, env)[0], sym("perm"));
  EXPECT_EQ(resolve(goals[1].term, env)[0], sym("ins"));
}

// ---------------------------------------------------------------------------
// Meta-oracle: answers agree with a naive recursive resolver.

TEST(EngineOracle, AgreesWithNaiveResolver) {
  const std::string app = R"(
app () Ys Ys.
app (X Xs) Ys (X Zs) : app Xs Ys Zs.
mem X (X _).
mem X (_ Xs) : mem X Xs.
rev () ().
rev (X Xs) R : rev Xs Rs, app Rs (X ()) R.
pair X Y : mem X (a (b (c ()))), mem Y (c (b ())).
)";
  const std::string tc = read_text_file(programs("tc.nat"));
  const std::string perm = read_text_file(programs("perm.nat"));
  struct Case {
    const std::string* prog;
    std::string query;
  };
  std::vector<Case> cases{
      {&tc, "tc Who is animal ?"},
      {&tc, "tc cat is What ?"},
      {&tc, "tc A R B ?"},
      {&perm, "perm (a (b (c (d ())))) P ?"},
      {&perm, "ins x L R ?"},
      {&app, "app X Y (a (b (c ()))) ?"},
      {&app, "app (a ()) (b ()) Z ?"},
      {&app, "mem X (a (b (a ()))) ?"},
      {&app, "rev (a (b (c ()))) R ?"},
      {&app, "pair X Y ?"},
      {&app, "pair X X, mem X (b ()) ?"},
      {&app, "app X (b ()) Y ?"},
  };
  for (const Case& c : cases) {
    Solver s(Program::parse(*c.prog));
    auto expected = oracle::Resolver(parse_program(*c.prog), 30).solve(parse_query(c.query));
    auto got = answers(s, c.query, 30);
    EXPECT_EQ(got, expected) << c.query;
    EXPECT_FALSE(got.empty()) << c.query;
  }
}

// ---------------------------------------------------------------------------
// Db transparency: `~` goals over a fact database answer like the same facts
// compiled as clauses.

namespace {

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(DbTransparency, ElementsWithEveryIndexer) {
  const std::string rules = read_text_file(programs("elements.nat"));
  auto db = std::make_shared<FactDb>(FactDb::Options{true, true});
  load_facts(*db, programs("elements.tsv"));

  // Fact-as-clause compilation: every fact becomes a bodiless clause `row ...`
  // and `~` goals become plain calls to it.
  std::string compiled = "data Num Sym Neut Prot Elec Period Group Phase Type Isos Shells :\n"
                         "  row Num Sym Neut Prot Elec Period Group Phase Type Isos Shells.\n"
                         "an_el Num El : data Num El '45' '35' '35' '4' '17' liq 'Halogen' '19' '4'.\n"
                         "gases Num El : data Num El _1 _2 _3 _4 _5 gas _6 _7 _8.\n";
  for (const Term& f : db->facts()) {
    std::vector<Term> items{sym("row")};
    for (const Term& x : f.items()) items.push_back(x);
    compiled += render_clause(Clause{Term::tuple(std::move(items)), {}, 0}) + "\n";
  }
  Solver symbolic(Program::parse(compiled));

  std::vector<std::shared_ptr<const Indexer>> indexers;
  auto cix = std::make_shared<ConstIndexer>(db);
  auto pix = std::make_shared<PathIndexer>(db);
  indexers.push_back(cix);
  indexers.push_back(pix);
  indexers.push_back(std::make_shared<SkeletonFilter>(cix));
  indexers.push_back(std::make_shared<SkeletonFilter>(pix));

  auto untrained = std::make_shared<NeuralIndexer>(db);
  auto* learner = dynamic_cast<MlpLearner*>(&untrained->learner());
  learner->set_model(Mlp(untrained->vocab().size(), 86, db->size(), 42));

  const std::vector<std::string> queries{
      "gases Num Element ?", "an_el Num Element ?",
      "data N 'Fe' _ _ _ _ _ Phase _ _ _ ?", "data N S _ _ _ '2' _ _ _ _ _ ?",
      "data N S _ _ _ P G gas T _ _ ?",       "data '1' S _ _ _ _ _ _ _ _ _ ?",
      "data N S _ _ _ _ _ _ 'Noble Gas' _ _ ?", "data N S _ _ _ _ _ plasma _ _ _ ?",
  };
  for (const auto& q : queries) {
    auto expected = as_set(answers(symbolic, q));
    for (const auto& ix : indexers) {
      Solver s(Program::parse(rules));
      s.set_indexer(ix);
      EXPECT_EQ(as_set(answers(s, q)), expected) << q;
    }
    Solver s(Program::parse(rules));
    s.set_indexer(untrained);
    auto got = as_set(answers(s, q));
    EXPECT_TRUE(std::includes(expected.begin(), expected.end(), got.begin(), got.end())) << q;
  }
}
