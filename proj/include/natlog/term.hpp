#pragma once

// Immutable nested-tuple terms.
//
// A Term is a 16-byte tagged value: a variable index, an interned symbol, an
// integer, a real, a shared string, or a shared tuple of terms. Tuples are
// reference counted with an atomic counter, so terms can be copied and shared
// across threads freely. The empty tuple `()` needs no allocation.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <compare>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <new>
#include <ostream>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace natlog {

enum class Kind : std::uint8_t { Var, Sym, Int, Real, Str, Tup };

/// Process-wide symbol interning. Ids are dense and never recycled.
class SymbolTable {
 public:
  std::uint32_t intern(std::string_view name) {
    {
      std::shared_lock lock(mutex_);
      if (auto it = ids_.find(name); it != ids_.end()) return it->second;
    }
    std::unique_lock lock(mutex_);
    if (auto it = ids_.find(name); it != ids_.end()) return it->second;
    names_.emplace_back(name);
    auto id = static_cast<std::uint32_t>(names_.size() - 1);
    ids_.emplace(std::string_view(names_.back()), id);
    return id;
  }

  const std::string& name(std::uint32_t id) const {
    std::shared_lock lock(mutex_);
    return names_[id];
  }

 private:
  mutable std::shared_mutex mutex_;
  std::deque<std::string> names_;
  std::unordered_map<std::string_view, std::uint32_t> ids_;
};

inline SymbolTable& symbols() {
  static SymbolTable table;
  return table;
}

class Term;

namespace detail {

struct alignas(8) TupNode {
  std::atomic<std::uint32_t> refs;
  std::uint32_t size;
  bool ground;
  Term* items() noexcept { return reinterpret_cast<Term*>(this + 1); }
};

struct StrNode {
  std::atomic<std::uint32_t> refs;
  std::string text;
};

static_assert(sizeof(TupNode) % 8 == 0);

void release_tuple(TupNode* node) noexcept;

}  // namespace detail

class Term {
 public:
  /// The empty tuple `()`.
  Term() noexcept : kind_(Kind::Tup) { tup_ = nullptr; }

  Term(const Term& other) noexcept : kind_(other.kind_) {
    bits_ = other.bits_;
    retain();
  }
  Term(Term&& other) noexcept : kind_(other.kind_) {
    bits_ = other.bits_;
    other.kind_ = Kind::Tup;
    other.tup_ = nullptr;
  }
  Term& operator=(const Term& other) noexcept {
    if (this != &other) {
      Term copy(other);
      swap(copy);
    }
    return *this;
  }
  Term& operator=(Term&& other) noexcept {
    if (this != &other) {
      Term moved(std::move(other));
      swap(moved);
    }
    return *this;
  }
  ~Term() { release(); }

  void swap(Term& other) noexcept {
    std::swap(kind_, other.kind_);
    std::swap(bits_, other.bits_);
  }

  static Term var(std::uint32_t index) noexcept {
    Term t;
    t.kind_ = Kind::Var;
    t.bits_ = 0;
    t.var_ = index;
    return t;
  }
  static Term sym(std::string_view name) { return sym_id(symbols().intern(name)); }
  static Term sym_id(std::uint32_t id) noexcept {
    Term t;
    t.kind_ = Kind::Sym;
    t.bits_ = 0;
    t.sym_ = id;
    return t;
  }
  static Term integer(std::int64_t v) noexcept {
    Term t;
    t.kind_ = Kind::Int;
    t.int_ = v;
    return t;
  }
  static Term real(double v) noexcept {
    Term t;
    t.kind_ = Kind::Real;
    t.real_ = v;
    return t;
  }
  static Term str(std::string text) {
    Term t;
    t.kind_ = Kind::Str;
    t.str_ = new detail::StrNode{{1}, std::move(text)};
    return t;
  }
  static Term tuple(std::span<const Term> items) {
    if (items.empty()) return Term();
    auto* node = allocate(items.size());
    bool ground = true;
    for (std::size_t i = 0; i < items.size(); ++i) {
      new (node->items() + i) Term(items[i]);
      ground = ground && items[i].is_ground();
    }
    node->ground = ground;
    return adopt(node);
  }
  static Term tuple(std::vector<Term>&& items) {
    if (items.empty()) return Term();
    auto* node = allocate(items.size());
    bool ground = true;
    for (std::size_t i = 0; i < items.size(); ++i) {
      ground = ground && items[i].is_ground();
      new (node->items() + i) Term(std::move(items[i]));
    }
    node->ground = ground;
    return adopt(node);
  }
  static Term tuple(std::initializer_list<Term> items) {
    return tuple(std::span<const Term>(items.begin(), items.size()));
  }

  Kind kind() const noexcept { return kind_; }
  bool is_var() const noexcept { return kind_ == Kind::Var; }
  bool is_sym() const noexcept { return kind_ == Kind::Sym; }
  bool is_int() const noexcept { return kind_ == Kind::Int; }
  bool is_real() const noexcept { return kind_ == Kind::Real; }
  bool is_num() const noexcept { return kind_ == Kind::Int || kind_ == Kind::Real; }
  bool is_str() const noexcept { return kind_ == Kind::Str; }
  bool is_tuple() const noexcept { return kind_ == Kind::Tup; }
  bool is_empty_tuple() const noexcept { return kind_ == Kind::Tup && tup_ == nullptr; }
  /// True for constant leaves: symbols, numbers, strings and `()`.
  bool is_constant() const noexcept {
    return kind_ != Kind::Var && (kind_ != Kind::Tup || tup_ == nullptr);
  }
  bool is_ground() const noexcept {
    if (kind_ == Kind::Var) return false;
    if (kind_ == Kind::Tup) return tup_ == nullptr || tup_->ground;
    return true;
  }

  std::uint32_t var_index() const noexcept { return var_; }
  std::uint32_t sym_id() const noexcept { return sym_; }
  const std::string& sym_name() const { return symbols().name(sym_); }
  std::int64_t int_value() const noexcept { return int_; }
  double real_value() const noexcept { return real_; }
  const std::string& str_value() const noexcept { return str_->text; }

  std::size_t size() const noexcept { return kind_ == Kind::Tup && tup_ ? tup_->size : 0; }
  const Term& operator[](std::size_t i) const noexcept { return tup_->items()[i]; }
  std::span<const Term> items() const noexcept {
    if (kind_ != Kind::Tup || tup_ == nullptr) return {};
    return {tup_->items(), tup_->size};
  }
  /// Identity of the shared tuple storage; equal identities imply equal terms.
  const void* identity() const noexcept { return kind_ == Kind::Tup ? tup_ : nullptr; }

  friend bool operator==(const Term& a, const Term& b) noexcept;

 private:
  static detail::TupNode* allocate(std::size_t n) {
    void* raw = ::operator new(sizeof(detail::TupNode) + n * sizeof(Term));
    auto* node = new (raw) detail::TupNode{{1}, static_cast<std::uint32_t>(n), true};
    return node;
  }
  static Term adopt(detail::TupNode* node) noexcept {
    Term t;
    t.tup_ = node;
    return t;
  }

  void retain() const noexcept {
    if (kind_ == Kind::Tup && tup_) {
      tup_->refs.fetch_add(1, std::memory_order_relaxed);
    } else if (kind_ == Kind::Str) {
      str_->refs.fetch_add(1, std::memory_order_relaxed);
    }
  }
  void release() noexcept {
    if (kind_ == Kind::Tup && tup_) {
      if (tup_->refs.fetch_sub(1, std::memory_order_acq_rel) == 1) detail::release_tuple(tup_);
    } else if (kind_ == Kind::Str) {
      if (str_->refs.fetch_sub(1, std::memory_order_acq_rel) == 1) delete str_;
    }
  }

  friend void detail::release_tuple(detail::TupNode*) noexcept;

  Kind kind_;
  union {
    std::uint64_t bits_;
    std::uint32_t var_;
    std::uint32_t sym_;
    std::int64_t int_;
    double real_;
    detail::StrNode* str_;
    detail::TupNode* tup_;
  };
};

static_assert(sizeof(Term) == 16);

namespace detail {

// Frees a tuple whose count dropped to zero. Nested tuples released by it are
// queued rather than recursed into, so destroying a long list cannot exhaust
// the stack.
inline void release_tuple(TupNode* node) noexcept {
  thread_local std::vector<TupNode*> pending;
  thread_local bool draining = false;
  pending.push_back(node);
  if (draining) return;
  draining = true;
  while (!pending.empty()) {
    TupNode* n = pending.back();
    pending.pop_back();
    Term* items = n->items();
    for (std::uint32_t i = 0; i < n->size; ++i) {
      Term& item = items[i];
      if (item.kind_ == Kind::Tup && item.tup_) {
        if (item.tup_->refs.fetch_sub(1, std::memory_order_acq_rel) == 1) pending.push_back(item.tup_);
        item.tup_ = nullptr;
      }
      item.~Term();
    }
    n->~TupNode();
    ::operator delete(n);
  }
  draining = false;
}

}  // namespace detail

inline bool operator==(const Term& a, const Term& b) noexcept {
  std::vector<std::pair<const Term*, const Term*>> work;
  work.emplace_back(&a, &b);
  while (!work.empty()) {
    auto [x, y] = work.back();
    work.pop_back();
    if (x->kind_ != y->kind_) return false;
    switch (x->kind_) {
      case Kind::Var:
        if (x->var_ != y->var_) return false;
        break;
      case Kind::Sym:
        if (x->sym_ != y->sym_) return false;
        break;
      case Kind::Int:
        if (x->int_ != y->int_) return false;
        break;
      case Kind::Real:
        // Bitwise, so that equality stays an equivalence relation.
        if (std::memcmp(&x->real_, &y->real_, sizeof(double)) != 0) return false;
        break;
      case Kind::Str:
        if (x->str_ != y->str_ && x->str_->text != y->str_->text) return false;
        break;
      case Kind::Tup:
        if (x->tup_ == y->tup_) break;
        if (!x->tup_ || !y->tup_ || x->tup_->size != y->tup_->size) return false;
        for (std::uint32_t i = 0; i < x->tup_->size; ++i) work.emplace_back(&(*x)[i], &(*y)[i]);
        break;
    }
  }
  return true;
}

inline std::size_t hash_combine(std::size_t seed, std::size_t v) noexcept {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

inline std::size_t hash_value(const Term& t) noexcept {
  std::size_t h = static_cast<std::size_t>(t.kind());
  switch (t.kind()) {
    case Kind::Var: return hash_combine(h, t.var_index());
    case Kind::Sym: return hash_combine(h, t.sym_id());
    case Kind::Int: return hash_combine(h, std::hash<std::int64_t>{}(t.int_value()));
    case Kind::Real: {
      double d = t.real_value();
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      return hash_combine(h, std::hash<std::uint64_t>{}(bits));
    }
    case Kind::Str: return hash_combine(h, std::hash<std::string>{}(t.str_value()));
    case Kind::Tup:
      h = hash_combine(h, t.size());
      for (const Term& item : t.items()) h = hash_combine(h, hash_value(item));
      return h;
  }
  return h;
}

inline Term sym(std::string_view name) { return Term::sym(name); }
inline Term var(std::uint32_t i) { return Term::var(i); }
inline Term num(std::int64_t v) { return Term::integer(v); }
inline Term tup(std::initializer_list<Term> items) { return Term::tuple(items); }

/// Builds a `()`-terminated list of 2-tuples: (a (b (c ()))).
inline Term list_of(std::span<const Term> items, Term tail = Term()) {
  for (auto it = items.rbegin(); it != items.rend(); ++it) tail = Term::tuple({*it, std::move(tail)});
  return tail;
}

// ---------------------------------------------------------------------------
// Constants

/// An atomic leaf usable as an index key: a symbol, number, string or `()`.
class Constant {
 public:
  explicit Constant(Term leaf) : leaf_(std::move(leaf)) {}

  const Term& term() const noexcept { return leaf_; }

  /// Sym < Int < Real < Str < ().
  static int rank(const Term& t) noexcept {
    switch (t.kind()) {
      case Kind::Sym: return 0;
      case Kind::Int: return 1;
      case Kind::Real: return 2;
      case Kind::Str: return 3;
      default: return 4;
    }
  }

  friend bool operator==(const Constant& a, const Constant& b) noexcept { return a.leaf_ == b.leaf_; }

  friend std::strong_ordering operator<=>(const Constant& a, const Constant& b) {
    const Term& x = a.leaf_;
    const Term& y = b.leaf_;
    if (auto c = rank(x) <=> rank(y); c != 0) return c;
    switch (x.kind()) {
      case Kind::Sym:
        if (x.sym_id() == y.sym_id()) return std::strong_ordering::equal;
        return x.sym_name().compare(y.sym_name()) <=> 0;
      case Kind::Int: return x.int_value() <=> y.int_value();
      case Kind::Real: {
        double p = x.real_value(), q = y.real_value();
        if (p < q) return std::strong_ordering::less;
        if (q < p) return std::strong_ordering::greater;
        std::uint64_t bp, bq;
        std::memcpy(&bp, &p, sizeof bp);
        std::memcpy(&bq, &q, sizeof bq);
        return bp <=> bq;
      }
      case Kind::Str: return x.str_value().compare(y.str_value()) <=> 0;
      default: return std::strong_ordering::equal;
    }
  }

 private:
  Term leaf_;
};

struct ConstantHash {
  std::size_t operator()(const Constant& c) const noexcept { return hash_value(c.term()); }
};

/// A constant together with the child-index route leading to it from the root.
struct Path {
  std::vector<std::uint32_t> steps;
  Constant leaf;

  friend bool operator==(const Path&, const Path&) = default;
  friend std::strong_ordering operator<=>(const Path& a, const Path& b) {
    if (auto c = std::lexicographical_compare_three_way(a.steps.begin(), a.steps.end(), b.steps.begin(),
                                                        b.steps.end());
        c != 0)
      return c;
    return a.leaf <=> b.leaf;
  }
};

struct PathHash {
  std::size_t operator()(const Path& p) const noexcept {
    std::size_t h = ConstantHash{}(p.leaf);
    for (auto s : p.steps) h = hash_combine(h, s);
    return h;
  }
};

namespace detail {

inline void collect_constants(const Term& t, std::vector<Constant>& out) {
  if (t.is_var()) return;
  if (t.is_constant()) {
    out.emplace_back(t);
    return;
  }
  for (const Term& item : t.items()) collect_constants(item, out);
}

inline void collect_paths(const Term& t, std::vector<std::uint32_t>& prefix, std::vector<Path>& out) {
  if (t.is_var()) return;
  if (t.is_constant()) {
    out.push_back(Path{prefix, Constant(t)});
    return;
  }
  for (std::uint32_t i = 0; i < t.size(); ++i) {
    prefix.push_back(i);
    collect_paths(t[i], prefix, out);
    prefix.pop_back();
  }
}

}  // namespace detail

/// The distinct constant leaves of `t`, sorted by Constant ordering.
inline std::vector<Constant> const_of(const Term& t) {
  std::vector<Constant> out;
  detail::collect_constants(t, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// One Path per constant occurrence, in left-to-right order.
inline std::vector<Path> paths_of(const Term& t) {
  std::vector<Path> out;
  std::vector<std::uint32_t> prefix;
  detail::collect_paths(t, prefix, out);
  return out;
}

/// Follows `steps` from the root. Returns nullptr if the route leaves the term.
inline const Term* navigate(const Term& t, std::span<const std::uint32_t> steps) {
  const Term* at = &t;
  for (auto s : steps) {
    if (!at->is_tuple() || s >= at->size()) return nullptr;
    at = &(*at)[s];
  }
  return at;
}

// ---------------------------------------------------------------------------
// Skeletons

/// Tuple shape of a term with constants as `o` and variables as `*`, stored in
/// its parenthesized text form, e.g. `(oo(o*o))`.
class Skeleton {
 public:
  Skeleton() = default;
  explicit Skeleton(std::string code) : code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }
  bool has_wildcard() const noexcept { return code_.find('*') != std::string::npos; }

  friend bool operator==(const Skeleton&, const Skeleton&) = default;

 private:
  std::string code_;
};

inline std::ostream& operator<<(std::ostream& os, const Skeleton& s) { return os << s.code(); }

namespace detail {

inline void write_skeleton(const Term& t, std::string& out) {
  if (t.is_var()) {
    out.push_back('*');
  } else if (t.is_constant()) {
    out.push_back('o');
  } else {
    out.push_back('(');
    for (const Term& item : t.items()) write_skeleton(item, out);
    out.push_back(')');
  }
}

}  // namespace detail

inline Skeleton skeleton_of(const Term& t) {
  std::string code;
  detail::write_skeleton(t, code);
  return Skeleton(std::move(code));
}

/// True iff `query` equals `fact` once every `*` in `query` absorbs exactly
/// one complete subtree of `fact`. `fact` must be wildcard-free.
inline bool skeleton_matches(const Skeleton& query, const Skeleton& fact) {
  const std::string& q = query.code();
  const std::string& f = fact.code();
  std::size_t i = 0, j = 0;
  while (i < q.size() && j < f.size()) {
    if (q[i] == '*') {
      if (f[j] == '(') {
        std::size_t depth = 0;
        do {
          if (f[j] == '(') ++depth;
          else if (f[j] == ')') --depth;
          ++j;
        } while (depth != 0 && j < f.size());
      } else if (f[j] == 'o') {
        ++j;
      } else {
        return false;
      }
      ++i;
    } else {
      if (q[i] != f[j]) return false;
      ++i;
      ++j;
    }
  }
  return i == q.size() && j == f.size();
}

// ---------------------------------------------------------------------------
// Rendering

enum class VarStyle {
  Index,       ///< bare index: 0
  Underscore,  ///< _0
};

namespace detail {

inline void write_quoted(std::string& out, const std::string& text, char quote) {
  out.push_back(quote);
  for (char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c == quote) out.push_back('\\');
        out.push_back(c);
    }
  }
  out.push_back(quote);
}

inline void write_real(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string_view s(buf, static_cast<std::size_t>(res.ptr - buf));
  out += s;
  if (s.find_first_of(".eEn") == std::string_view::npos) out += ".0";
}

inline void write_term(std::string& out, const Term& t, VarStyle style) {
  switch (t.kind()) {
    case Kind::Var:
      if (style == VarStyle::Underscore) out.push_back('_');
      out += std::to_string(t.var_index());
      return;
    case Kind::Sym: write_quoted(out, t.sym_name(), '\''); return;
    case Kind::Int: out += std::to_string(t.int_value()); return;
    case Kind::Real: write_real(out, t.real_value()); return;
    case Kind::Str: write_quoted(out, t.str_value(), '"'); return;
    case Kind::Tup:
      out.push_back('(');
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (i) out += ", ";
        write_term(out, t[i], style);
      }
      if (t.size() == 1) out.push_back(',');
      out.push_back(')');
      return;
  }
}

}  // namespace detail

/// Nested-tuple text form, e.g. `('a', ('b', ('c', ())))`.
inline std::string to_string(const Term& t, VarStyle style = VarStyle::Underscore) {
  std::string out;
  detail::write_term(out, t, style);
  return out;
}

inline std::ostream& operator<<(std::ostream& os, const Term& t) { return os << to_string(t); }
inline std::ostream& operator<<(std::ostream& os, const Constant& c) { return os << to_string(c.term()); }

}  // namespace natlog

template <>
struct std::hash<natlog::Term> {
  std::size_t operator()(const natlog::Term& t) const noexcept { return natlog::hash_value(t); }
};
