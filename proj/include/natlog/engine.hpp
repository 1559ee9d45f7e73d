#pragma once

// LD-resolution over a goal stack.
//
// The search state is entirely explicit: a persistent list of pending goals,
// one Env/Trail pair, and a stack of choice points, each a resumable cursor
// (remaining clauses, a host generator, or remaining fact candidates). No
// host recursion is used, so derivation depth is bounded only by memory.
// Answers are produced lazily, one per next() call.

#include <cstdint>
#include <iterator>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "natlog/error.hpp"
#include "natlog/ground_db.hpp"
#include "natlog/host.hpp"
#include "natlog/syntax.hpp"
#include "natlog/term.hpp"
#include "natlog/unify.hpp"

namespace natlog {

/// Immutable singly linked goal list. Tails are shared between choice points.
class GoalList {
  struct Node {
    std::uint32_t refs;
    Goal goal;
    Node* next;
  };

 public:
  GoalList() noexcept = default;
  GoalList(const GoalList& o) noexcept : node_(o.node_) {
    if (node_) ++node_->refs;
  }
  GoalList(GoalList&& o) noexcept : node_(std::exchange(o.node_, nullptr)) {}
  GoalList& operator=(GoalList o) noexcept {
    std::swap(node_, o.node_);
    return *this;
  }
  ~GoalList() { release(node_); }

  static GoalList cons(Goal g, const GoalList& tail) {
    if (tail.node_) ++tail.node_->refs;
    GoalList l;
    l.node_ = new Node{1, std::move(g), tail.node_};
    return l;
  }

  bool empty() const noexcept { return node_ == nullptr; }
  const Goal& head() const noexcept { return node_->goal; }
  GoalList tail() const noexcept {
    GoalList l;
    l.node_ = node_->next;
    if (l.node_) ++l.node_->refs;
    return l;
  }
  std::size_t size() const noexcept {
    std::size_t n = 0;
    for (Node* p = node_; p; p = p->next) ++n;
    return n;
  }
  std::vector<Goal> to_vector() const {
    std::vector<Goal> out;
    for (Node* p = node_; p; p = p->next) out.push_back(p->goal);
    return out;
  }
  /// Same underlying list (not just equal goals).
  bool same(const GoalList& o) const noexcept { return node_ == o.node_; }

 private:
  // Iterative, so dropping a long list does not recurse.
  static void release(Node* n) noexcept {
    while (n && --n->refs == 0) {
      Node* next = n->next;
      delete n;
      n = next;
    }
  }

  Node* node_ = nullptr;
};

/// Clauses in source order, with a per-clause head key for cheap rejection.
class Program {
 public:
  Program() = default;
  explicit Program(std::vector<Clause> clauses) : clauses_(std::move(clauses)) {
    keys_.reserve(clauses_.size());
    for (const Clause& c : clauses_) {
      HeadKey k{static_cast<std::uint32_t>(c.head.size()), {}};
      for (std::uint32_t i = 0; i < c.head.size(); ++i)
        if (c.head[i].is_constant()) k.constants.emplace_back(i, c.head[i]);
      keys_.push_back(std::move(k));
    }
  }

  static Program parse(std::string_view src, const std::string& file = {}) {
    return Program(parse_program(src, file));
  }
  static Program load(const std::string& path) { return Program(parse_program_file(path)); }

  const std::vector<Clause>& clauses() const noexcept { return clauses_; }
  std::size_t size() const noexcept { return clauses_.size(); }

  /// First clause at index >= from whose head could unify with the
  /// dereferenced goal tuple, or size() if none.
  std::size_t next_candidate(const Term& goal, const Env& env, std::size_t from) const {
    for (std::size_t j = from; j < clauses_.size(); ++j)
      if (may_match(keys_[j], goal, env)) return j;
    return clauses_.size();
  }

 private:
  struct HeadKey {
    std::uint32_t size;
    std::vector<std::pair<std::uint32_t, Term>> constants;
  };

  static bool may_match(const HeadKey& k, const Term& goal, const Env& env) {
    if (!goal.is_tuple()) return true;
    if (goal.size() != k.size) return false;
    for (const auto& [i, c] : k.constants) {
      const Term& g = deref(goal[i], env);
      if (g.is_var()) continue;
      if (!g.is_constant() || !(g == c)) return false;
    }
    return true;
  }

  std::vector<Clause> clauses_;
  std::vector<HeadKey> keys_;
};

/// Resumable enumeration of the successor goal stacks of a plain goal: for
/// each clause in order, a fresh variant's head is unified with the goal and
/// its body is pushed in front of `rest`. Each next() first undoes the
/// previous successor's bindings and variables.
class Unfolder {
 public:
  Unfolder(const Program& program, Env& env, Trail& trail, Term goal, GoalList rest, bool occurs_check = false)
      : program_(&program),
        env_(&env),
        trail_(&trail),
        goal_(std::move(goal)),
        rest_(std::move(rest)),
        occurs_check_(occurs_check),
        mark_(trail.mark()),
        base_(env.size()) {
    next_ = program.next_candidate(deref(goal_, env), env, 0);
  }

  std::optional<GoalList> next() {
    undo_to(mark_, *trail_, *env_);
    env_->truncate(base_);
    const Term& goal = deref(goal_, *env_);
    while (next_ < program_->size()) {
      const Clause& c = program_->clauses()[next_];
      next_ = program_->next_candidate(goal, *env_, next_ + 1);
      env_->grow(c.nvars);
      Term head = relocate(c.head, base_);
      if (unify(head, goal, *env_, *trail_, occurs_check_)) {
        GoalList out = rest_;
        for (auto it = c.body.rbegin(); it != c.body.rend(); ++it)
          out = GoalList::cons(Goal{it->annotation, relocate(it->term, base_)}, out);
        return out;
      }
      env_->truncate(base_);
    }
    return std::nullopt;
  }

  bool has_more() const noexcept { return next_ < program_->size(); }

 private:
  const Program* program_;
  Env* env_;
  Trail* trail_;
  Term goal_;
  GoalList rest_;
  bool occurs_check_;
  Trail::Mark mark_;
  std::uint32_t base_;
  std::size_t next_;
};

/// Stream of successor goal stacks for `goal`, one per matching clause.
inline Unfolder unfold_step(const Program& program, Env& env, Trail& trail, const Term& goal,
                            const GoalList& rest, bool occurs_check = false) {
  return Unfolder(program, env, trail, goal, rest, occurs_check);
}

/// Replaces residual variables by Var 0, 1, ... in order of first occurrence.
inline Term renumber_vars(const Term& t, std::unordered_map<std::uint32_t, std::uint32_t>& map) {
  if (t.is_ground()) return t;
  if (t.is_var()) {
    auto [it, inserted] = map.try_emplace(t.var_index(), static_cast<std::uint32_t>(map.size()));
    return Term::var(it->second);
  }
  std::vector<Term> items;
  items.reserve(t.size());
  for (const Term& item : t.items()) items.push_back(renumber_vars(item, map));
  return Term::tuple(std::move(items));
}

/// A computed answer: the instantiated query (or a yielded term) with no
/// environment references left. Residual variables render as _0, _1, ...
class Answer {
 public:
  Answer(Term term, bool yielded) : term_(std::move(term)), yielded_(yielded) {}

  const Term& term() const noexcept { return term_; }
  /// True if produced by a `^` goal rather than by reaching the empty goal list.
  bool yielded() const noexcept { return yielded_; }
  std::size_t size() const noexcept { return term_.size(); }
  const Term& operator[](std::size_t i) const { return term_[i]; }
  std::string to_string() const { return natlog::to_string(term_); }

  friend bool operator==(const Answer& a, const Answer& b) { return a.term_ == b.term_; }

 private:
  Term term_;
  bool yielded_;
};

struct SolverOptions {
  bool occurs_check = false;
};

class AnswerStream;

/// Configuration for running queries: a program, host registry and optional
/// fact database indexer. Cheap to copy; all parts are shared and immutable.
class Solver {
 public:
  explicit Solver(std::shared_ptr<const Program> program, SolverOptions opts = {})
      : program_(std::move(program)),
        registry_(std::make_shared<const HostRegistry>(standard_registry())),
        opts_(opts) {}
  explicit Solver(Program program, SolverOptions opts = {})
      : Solver(std::make_shared<const Program>(std::move(program)), opts) {}

  Solver& set_registry(std::shared_ptr<const HostRegistry> registry) {
    registry_ = std::move(registry);
    return *this;
  }
  Solver& set_indexer(std::shared_ptr<const Indexer> indexer) {
    indexer_ = std::move(indexer);
    return *this;
  }
  Solver& set_options(SolverOptions opts) {
    opts_ = opts;
    return *this;
  }

  const Program& program() const noexcept { return *program_; }
  const HostRegistry& registry() const noexcept { return *registry_; }
  const Indexer* indexer() const noexcept { return indexer_.get(); }
  const SolverOptions& options() const noexcept { return opts_; }

  AnswerStream solve(const Query& query) const;
  AnswerStream solve(std::string_view query_text) const;

 private:
  friend class AnswerStream;
  std::shared_ptr<const Program> program_;
  std::shared_ptr<const HostRegistry> registry_;
  std::shared_ptr<const Indexer> indexer_;
  SolverOptions opts_;
};

namespace detail {

// Host generator cursor: unifies the result slot with each yield in turn.
class GeneratorCursor {
 public:
  GeneratorCursor(HostRegistry::Stream stream, Term slot, GoalList rest, std::string goal_text)
      : stream_(std::move(stream)), slot_(std::move(slot)), rest_(std::move(rest)), goal_text_(std::move(goal_text)) {}

  bool next(Env& env, Trail& trail) {
    for (;;) {
      std::optional<HostValue> v;
      try {
        v = stream_();
      } catch (const natlog::error&) {
        throw;
      } catch (const std::exception& e) {
        throw HostCallError(goal_text_ + ": " + e.what());
      }
      if (!v) return false;
      if (unify(slot_, from_host(*v), env, trail)) return true;
    }
  }
  const GoalList& rest() const noexcept { return rest_; }

 private:
  HostRegistry::Stream stream_;
  Term slot_;
  GoalList rest_;
  std::string goal_text_;
};

struct FactCursor {
  FactMatcher matcher;
  GoalList rest;
};

struct ChoicePoint {
  Trail::Mark mark;
  std::uint32_t env_size;
  std::variant<Unfolder, GeneratorCursor, FactCursor> cursor;
};

}  // namespace detail

/// Lazy answer stream for one query. Owns the derivation state; nothing is
/// computed beyond the last answer pulled. Dropping the stream abandons the
/// remaining search.
class AnswerStream {
  struct Machine {
    Solver solver;
    Query query;
    Env env;
    Trail trail;
    GoalList goals;
    std::vector<detail::ChoicePoint> choices;
    bool backtrack_next = false;
    bool done = false;
    std::uint64_t steps = 0;
  };

 public:
  AnswerStream(const Solver& solver, Query query) : m_(std::make_unique<Machine>(Machine{solver, std::move(query), {}, {}, {}, {}})) {
    m_->env.grow(m_->query.nvars());
    for (auto it = m_->query.goals.rbegin(); it != m_->query.goals.rend(); ++it)
      m_->goals = GoalList::cons(*it, m_->goals);
  }

  /// The next answer, or nullopt once the search space is exhausted. Runtime
  /// errors (unknown host names, non-ground host arguments, failing host
  /// calls, a `~` goal without a database) end the stream and are rethrown.
  std::optional<Answer> next() {
    if (m_->done) return std::nullopt;
    try {
      if (m_->backtrack_next && !backtrack()) return finish();
      return run();
    } catch (...) {
      finish();
      throw;
    }
  }

  bool done() const noexcept { return m_->done; }

  /// Goals reduced so far (unfoldings plus prefixed-goal dispatches).
  std::uint64_t steps() const noexcept { return m_->steps; }
  std::size_t choice_points() const noexcept { return m_->choices.size(); }
  const Env& env() const noexcept { return m_->env; }
  const Trail& trail() const noexcept { return m_->trail; }
  const Query& query() const noexcept { return m_->query; }

  /// Abandons the search and undoes every binding.
  void close() { finish(); }

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Answer;
    using difference_type = std::ptrdiff_t;
    using pointer = const Answer*;
    using reference = const Answer&;

    iterator() = default;
    explicit iterator(AnswerStream* s) : s_(s) { ++*this; }
    reference operator*() const { return *current_; }
    pointer operator->() const { return &*current_; }
    iterator& operator++() {
      current_ = s_->next();
      if (!current_) s_ = nullptr;
      return *this;
    }
    void operator++(int) { ++*this; }
    friend bool operator==(const iterator& a, const iterator& b) { return a.s_ == b.s_; }

   private:
    AnswerStream* s_ = nullptr;
    std::optional<Answer> current_;
  };

  iterator begin() { return iterator(this); }
  iterator end() { return iterator(); }

 private:
  std::optional<Answer> finish() {
    m_->choices.clear();
    m_->goals = GoalList();
    undo_to(0, m_->trail, m_->env);
    m_->env.truncate(m_->query.nvars());
    m_->done = true;
    return std::nullopt;
  }

  Answer make_answer(const Term& t, bool yielded) {
    std::unordered_map<std::uint32_t, std::uint32_t> names;
    return Answer(renumber_vars(resolve(t, m_->env), names), yielded);
  }

  Answer query_answer() {
    const auto& goals = m_->query.goals;
    if (goals.size() == 1) return make_answer(goals[0].term, false);
    std::vector<Term> items;
    for (const Goal& g : goals) items.push_back(g.term);
    return make_answer(Term::tuple(std::move(items)), false);
  }

  std::string goal_text(const Goal& g) const {
    return std::string(prefix_of(g.annotation)) + to_string(resolve(g.term, m_->env));
  }

  std::string host_name(const Goal& g) const {
    const Term& name = deref(g.term[0], m_->env);
    if (!name.is_sym()) throw UnknownHostName("host call needs a symbol name: " + goal_text(g));
    return name.sym_name();
  }

  std::vector<HostValue> host_args(const Goal& g, std::size_t end, bool allow_vars) const {
    std::vector<HostValue> args;
    args.reserve(end);
    for (std::size_t i = 1; i < end; ++i) {
      try {
        args.push_back(to_host(g.term[i], m_->env, allow_vars));
      } catch (const NonGroundArgument& e) {
        throw NonGroundArgument(std::string(e.what()) + " in " + goal_text(g));
      }
    }
    return args;
  }

  template <class F>
  auto call_host(const Goal& g, F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const natlog::error&) {
      throw;
    } catch (const std::exception& e) {
      throw HostCallError(goal_text(g) + ": " + e.what());
    }
  }

  // Pushes a choice point and takes its first alternative.
  template <class Cursor>
  bool push_and_resume(Trail::Mark mark, std::uint32_t env_size, Cursor cursor) {
    m_->choices.push_back(detail::ChoicePoint{mark, env_size, std::move(cursor)});
    return resume_top();
  }

  // Advances the top choice point; pops it when it has no alternatives left.
  bool resume_top() {
    detail::ChoicePoint& cp = m_->choices.back();
    Env& env = m_->env;
    Trail& trail = m_->trail;
    undo_to(cp.mark, trail, env);
    env.truncate(cp.env_size);

    if (auto* u = std::get_if<Unfolder>(&cp.cursor)) {
      auto next = u->next();
      bool more = u->has_more();
      if (next) m_->goals = std::move(*next);
      if (!next || !more) m_->choices.pop_back();
      return next.has_value();
    }
    if (auto* g = std::get_if<detail::GeneratorCursor>(&cp.cursor)) {
      if (g->next(env, trail)) {
        m_->goals = g->rest();
        return true;
      }
      m_->choices.pop_back();
      return false;
    }
    auto& f = std::get<detail::FactCursor>(cp.cursor);
    if (f.matcher.next()) {
      m_->goals = f.rest;
      if (!f.matcher.has_more()) m_->choices.pop_back();
      return true;
    }
    m_->choices.pop_back();
    return false;
  }

  bool backtrack() {
    while (!m_->choices.empty())
      if (resume_top()) return true;
    return false;
  }

  // Reduces the first goal. Returns false on failure of this branch.
  bool step(const Goal& g, const GoalList& rest) {
    ++m_->steps;
    Env& env = m_->env;
    Trail& trail = m_->trail;
    const Solver& s = m_->solver;

    switch (g.annotation) {
      case Annotation::Plain:
        return push_and_resume(trail.mark(), env.size(),
                               Unfolder(s.program(), env, trail, g.term, rest, s.options().occurs_check));

      case Annotation::Action: {
        std::string name = host_name(g);
        const auto* f = s.registry().action(name);
        if (!f) throw UnknownHostName("unknown host action '" + name + "' in " + goal_text(g));
        auto args = host_args(g, g.term.size(), true);
        call_host(g, [&] { (*f)(args); });
        m_->goals = rest;
        return true;
      }

      case Annotation::Fun: {
        std::string name = host_name(g);
        const auto* f = s.registry().function(name);
        if (!f) throw UnknownHostName("unknown host function '" + name + "' in " + goal_text(g));
        auto args = host_args(g, g.term.size() - 1, false);
        HostValue r = call_host(g, [&] { return (*f)(args); });
        if (!unify(g.term[g.term.size() - 1], from_host(r), env, trail, s.options().occurs_check)) return false;
        m_->goals = rest;
        return true;
      }

      case Annotation::Gen: {
        std::string name = host_name(g);
        const auto* f = s.registry().generator(name);
        if (!f) throw UnknownHostName("unknown host generator '" + name + "' in " + goal_text(g));
        auto args = host_args(g, g.term.size() - 1, false);
        auto stream = call_host(g, [&] { return (*f)(args); });
        return push_and_resume(
            trail.mark(), env.size(),
            detail::GeneratorCursor(std::move(stream), g.term[g.term.size() - 1], rest, goal_text(g)));
      }

      case Annotation::Db: {
        const Indexer* ix = s.indexer();
        if (!ix) throw NoDatabase("no fact database attached for " + goal_text(g));
        auto mark = trail.mark();
        auto size = env.size();
        return push_and_resume(mark, size, detail::FactCursor{FactMatcher(*ix, g.term, env, trail), rest});
      }

      case Annotation::Yield: break;  // handled in run()
    }
    return false;
  }

  std::optional<Answer> run() {
    for (;;) {
      if (m_->goals.empty()) {
        m_->backtrack_next = true;
        return query_answer();
      }
      Goal g = m_->goals.head();
      GoalList rest = m_->goals.tail();
      if (g.annotation == Annotation::Yield) {
        ++m_->steps;
        m_->goals = std::move(rest);
        m_->backtrack_next = false;
        return make_answer(g.term, true);
      }
      if (!step(g, rest) && !backtrack()) return finish();
    }
  }

  std::unique_ptr<Machine> m_;
};

inline AnswerStream Solver::solve(const Query& query) const { return AnswerStream(*this, query); }
inline AnswerStream Solver::solve(std::string_view query_text) const { return solve(parse_query(query_text)); }

}  // namespace natlog
