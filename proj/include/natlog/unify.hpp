#pragma once

// Structure-sharing unification.
//
// Variables are indices into a single growable Env. An unbound slot holds a
// variable pointing at itself; binding a slot records its index on the Trail
// so backtracking can reset it. Clause variants are made by relocating the
// clause's variable indices past the current top of the Env.

#include <cstdint>
#include <unordered_set>
#include <utility>
#include <vector>

#include "natlog/error.hpp"
#include "natlog/term.hpp"

namespace natlog {

class Trail {
 public:
  using Mark = std::size_t;

  Mark mark() const noexcept { return stack_.size(); }
  std::size_t size() const noexcept { return stack_.size(); }
  void push(std::uint32_t var) { stack_.push_back(var); }
  std::uint32_t pop() {
    auto v = stack_.back();
    stack_.pop_back();
    return v;
  }
  std::span<const std::uint32_t> entries() const noexcept { return stack_; }

  friend bool operator==(const Trail&, const Trail&) = default;

 private:
  std::vector<std::uint32_t> stack_;
};

class Env {
 public:
  Env() = default;
  explicit Env(std::uint32_t n) { grow(n); }

  std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(slots_.size()); }

  /// Appends `n` fresh unbound variables and returns the index of the first.
  std::uint32_t grow(std::uint32_t n) {
    auto base = size();
    for (std::uint32_t i = 0; i < n; ++i) slots_.push_back(Term::var(base + i));
    return base;
  }

  /// Drops every variable at index >= n. Those variables must be unbound or
  /// already undone.
  void truncate(std::uint32_t n) { slots_.resize(n); }

  bool is_bound(std::uint32_t i) const noexcept {
    const Term& s = slots_[i];
    return !(s.is_var() && s.var_index() == i);
  }
  const Term& slot(std::uint32_t i) const noexcept { return slots_[i]; }

  void bind(std::uint32_t i, Term value, Trail& trail) {
    slots_[i] = std::move(value);
    trail.push(i);
  }
  void reset(std::uint32_t i) { slots_[i] = Term::var(i); }

  friend bool operator==(const Env&, const Env&) = default;

 private:
  std::vector<Term> slots_;
};

/// Follows variable bindings until an unbound variable or a non-variable.
inline const Term& deref(const Term& t, const Env& env) noexcept {
  const Term* at = &t;
  while (at->is_var()) {
    const Term& s = env.slot(at->var_index());
    if (s.is_var() && s.var_index() == at->var_index()) return *at;
    at = &s;
  }
  return *at;
}

/// Resets every binding made after `mark`, newest first.
inline void undo_to(Trail::Mark mark, Trail& trail, Env& env) {
  while (trail.size() > mark) env.reset(trail.pop());
}

namespace detail {

// Does unbound variable `v` occur in `t` under the current bindings?
inline bool occurs_in(std::uint32_t v, const Term& t, const Env& env) {
  std::vector<const Term*> work{&t};
  while (!work.empty()) {
    const Term& d = deref(*work.back(), env);
    work.pop_back();
    if (d.is_var()) {
      if (d.var_index() == v) return true;
    } else if (d.is_tuple() && !d.is_ground()) {
      for (const Term& item : d.items()) work.push_back(&item);
    }
  }
  return false;
}

}  // namespace detail

/// Most general unifier of `a` and `b`, extending `env`. On failure `env` and
/// `trail` are left exactly as they were on entry.
inline bool unify(const Term& a, const Term& b, Env& env, Trail& trail, bool occurs_check = false) {
  const Trail::Mark mark = trail.mark();
  std::vector<std::pair<const Term*, const Term*>> work;
  work.emplace_back(&a, &b);
  while (!work.empty()) {
    auto [pa, pb] = work.back();
    work.pop_back();
    const Term& x = deref(*pa, env);
    const Term& y = deref(*pb, env);
    if (x.is_var()) {
      if (y.is_var() && y.var_index() == x.var_index()) continue;
      if (occurs_check && !y.is_var() && detail::occurs_in(x.var_index(), y, env)) {
        undo_to(mark, trail, env);
        return false;
      }
      env.bind(x.var_index(), y, trail);
      continue;
    }
    if (y.is_var()) {
      if (occurs_check && detail::occurs_in(y.var_index(), x, env)) {
        undo_to(mark, trail, env);
        return false;
      }
      env.bind(y.var_index(), x, trail);
      continue;
    }
    if (x.kind() != y.kind()) {
      undo_to(mark, trail, env);
      return false;
    }
    if (x.is_tuple()) {
      if (x.identity() == y.identity()) continue;
      if (x.size() != y.size()) {
        undo_to(mark, trail, env);
        return false;
      }
      for (std::size_t i = x.size(); i-- > 0;) work.emplace_back(&x[i], &y[i]);
      continue;
    }
    if (!(x == y)) {
      undo_to(mark, trail, env);
      return false;
    }
  }
  return true;
}

/// Unification against a ground `fact`: only variables of `query` can bind,
/// and no occurs check is needed. Same outcome and bindings as unify().
inline bool ground_unify(const Term& query, const Term& fact, Env& env, Trail& trail) {
  const Trail::Mark mark = trail.mark();
  std::vector<std::pair<const Term*, const Term*>> work;
  work.emplace_back(&query, &fact);
  while (!work.empty()) {
    auto [pq, pf] = work.back();
    work.pop_back();
    const Term& q = deref(*pq, env);
    const Term& f = *pf;
    if (q.is_var()) {
      env.bind(q.var_index(), f, trail);
      continue;
    }
    if (q.kind() != f.kind()) {
      undo_to(mark, trail, env);
      return false;
    }
    if (q.is_tuple()) {
      if (q.identity() == f.identity()) continue;
      if (q.size() != f.size()) {
        undo_to(mark, trail, env);
        return false;
      }
      for (std::size_t i = q.size(); i-- > 0;) work.emplace_back(&q[i], &f[i]);
      continue;
    }
    if (!(q == f)) {
      undo_to(mark, trail, env);
      return false;
    }
  }
  return true;
}

/// Shifts every variable index of `t` by `offset`. Ground subterms are shared.
inline Term relocate(const Term& t, std::uint32_t offset) {
  if (offset == 0 || t.is_ground()) return t;
  if (t.is_var()) return Term::var(t.var_index() + offset);
  std::vector<Term> items;
  items.reserve(t.size());
  for (const Term& item : t.items()) items.push_back(relocate(item, offset));
  return Term::tuple(std::move(items));
}

/// Copy of `t` with all bindings substituted; unbound variables keep their
/// Env indices. Throws runtime_error on a cyclic binding (possible only
/// without occurs check).
inline Term resolve(const Term& t, const Env& env) {
  const Term& root = deref(t, env);
  if (!root.is_tuple() || root.is_ground()) return root;

  struct Frame {
    const Term* tuple;
    std::int64_t via_var;  // variable whose binding led here, or -1
    std::vector<Term> items;
  };
  std::vector<Frame> stack;
  std::unordered_set<std::uint32_t> open;
  stack.push_back({&root, t.is_var() ? static_cast<std::int64_t>(t.var_index()) : -1, {}});
  if (t.is_var()) open.insert(t.var_index());
  stack.back().items.reserve(root.size());

  for (;;) {
    Frame& f = stack.back();
    if (f.items.size() == f.tuple->size()) {
      Term built = Term::tuple(std::move(f.items));
      if (f.via_var >= 0) open.erase(static_cast<std::uint32_t>(f.via_var));
      stack.pop_back();
      if (stack.empty()) return built;
      stack.back().items.push_back(std::move(built));
      continue;
    }
    const Term& raw = (*f.tuple)[f.items.size()];
    const Term& child = deref(raw, env);
    if (child.is_tuple() && !child.is_ground()) {
      std::int64_t via = -1;
      if (raw.is_var()) {
        via = raw.var_index();
        if (!open.insert(raw.var_index()).second) throw runtime_error("cyclic term (unification without occurs check)");
      }
      stack.push_back({&child, via, {}});
      stack.back().items.reserve(child.size());
    } else {
      f.items.push_back(child);
    }
  }
}

}  // namespace natlog
