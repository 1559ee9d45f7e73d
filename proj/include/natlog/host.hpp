#pragma once

// Host interop: plain C++ values exchanged with registered actions,
// functions and generators. The registry is closed; a goal can only reach
// names registered here.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "natlog/error.hpp"
#include "natlog/term.hpp"
#include "natlog/unify.hpp"

namespace natlog {

/// A symbolic constant crossing into host code (distinct from a string).
struct Symbol {
  std::string name;
  friend bool operator==(const Symbol&, const Symbol&) = default;
};

struct HostValue {
  using List = std::vector<HostValue>;
  std::variant<Symbol, std::int64_t, double, std::string, List> value;

  HostValue() : value(List{}) {}
  HostValue(Symbol s) : value(std::move(s)) {}
  HostValue(std::int64_t i) : value(i) {}
  HostValue(int i) : value(static_cast<std::int64_t>(i)) {}
  HostValue(double d) : value(d) {}
  HostValue(std::string s) : value(std::move(s)) {}
  HostValue(List l) : value(std::move(l)) {}

  bool is_symbol() const noexcept { return std::holds_alternative<Symbol>(value); }
  bool is_int() const noexcept { return std::holds_alternative<std::int64_t>(value); }
  bool is_real() const noexcept { return std::holds_alternative<double>(value); }
  bool is_number() const noexcept { return is_int() || is_real(); }
  bool is_string() const noexcept { return std::holds_alternative<std::string>(value); }
  bool is_text() const noexcept { return is_symbol() || is_string(); }
  bool is_list() const noexcept { return std::holds_alternative<List>(value); }

  std::int64_t as_int() const { return std::get<std::int64_t>(value); }
  double as_double() const { return is_int() ? static_cast<double>(as_int()) : std::get<double>(value); }
  const std::string& text() const { return is_symbol() ? std::get<Symbol>(value).name : std::get<std::string>(value); }
  const List& list() const { return std::get<List>(value); }

  friend bool operator==(const HostValue&, const HostValue&) = default;
};

inline HostValue host_bool(bool b) { return Symbol{b ? "true" : "false"}; }

/// Fully dereferenced host value of `t`. A residual variable throws
/// NonGroundArgument unless `allow_vars`, in which case it becomes the symbol
/// `_N`.
inline HostValue to_host(const Term& t, const Env& env, bool allow_vars = false) {
  const Term& d = deref(t, env);
  switch (d.kind()) {
    case Kind::Var:
      if (!allow_vars) throw NonGroundArgument("unbound variable _" + std::to_string(d.var_index()));
      return Symbol{"_" + std::to_string(d.var_index())};
    case Kind::Sym: return Symbol{d.sym_name()};
    case Kind::Int: return d.int_value();
    case Kind::Real: return d.real_value();
    case Kind::Str: return d.str_value();
    case Kind::Tup: {
      HostValue::List items;
      items.reserve(d.size());
      for (const Term& item : d.items()) items.push_back(to_host(item, env, allow_vars));
      return items;
    }
  }
  return {};
}

inline Term from_host(const HostValue& v) {
  return std::visit(
      [](const auto& x) -> Term {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Symbol>) return Term::sym(x.name);
        else if constexpr (std::is_same_v<T, std::int64_t>) return Term::integer(x);
        else if constexpr (std::is_same_v<T, double>) return Term::real(x);
        else if constexpr (std::is_same_v<T, std::string>) return Term::str(x);
        else {
          std::vector<Term> items;
          items.reserve(x.size());
          for (const auto& e : x) items.push_back(from_host(e));
          return Term::tuple(std::move(items));
        }
      },
      v.value);
}

/// Text for printing: symbols and strings raw, everything else in tuple form.
inline std::string display(const HostValue& v) {
  if (v.is_text()) return v.text();
  return to_string(from_host(v));
}

class HostRegistry {
 public:
  using Args = std::span<const HostValue>;
  using Action = std::function<void(Args)>;
  using Function = std::function<HostValue(Args)>;
  /// A pulled stream: returns nullopt when exhausted. May be infinite.
  using Stream = std::function<std::optional<HostValue>()>;
  using Generator = std::function<Stream(Args)>;

  HostRegistry& add_action(const std::string& name, Action f) { return add(actions_, name, std::move(f)); }
  HostRegistry& add_function(const std::string& name, Function f) { return add(functions_, name, std::move(f)); }
  HostRegistry& add_generator(const std::string& name, Generator f) { return add(generators_, name, std::move(f)); }

  const Action* action(const std::string& name) const { return find(actions_, name); }
  const Function* function(const std::string& name) const { return find(functions_, name); }
  const Generator* generator(const std::string& name) const { return find(generators_, name); }

 private:
  template <class Map, class F>
  HostRegistry& add(Map& m, const std::string& name, F f) {
    if (!m.emplace(name, std::move(f)).second) throw error("host name registered twice: " + name);
    return *this;
  }
  template <class Map>
  static const typename Map::mapped_type* find(const Map& m, const std::string& name) {
    auto it = m.find(name);
    return it == m.end() ? nullptr : &it->second;
  }

  std::unordered_map<std::string, Action> actions_;
  std::unordered_map<std::string, Function> functions_;
  std::unordered_map<std::string, Generator> generators_;
};

namespace detail {

inline void expect_arity(const char* name, HostRegistry::Args args, std::size_t n) {
  if (args.size() != n)
    throw HostCallError(std::string(name) + " expects " + std::to_string(n) + " argument(s), got " +
                        std::to_string(args.size()));
}

inline void expect_numbers(const char* name, HostRegistry::Args args) {
  for (const auto& a : args)
    if (!a.is_number()) throw HostCallError(std::string(name) + ": not a number: " + display(a));
}

template <class IntOp, class RealOp>
HostRegistry::Function arith(const char* name, IntOp int_op, RealOp real_op) {
  return [=](HostRegistry::Args args) -> HostValue {
    expect_arity(name, args, 2);
    expect_numbers(name, args);
    if (args[0].is_int() && args[1].is_int()) return int_op(args[0].as_int(), args[1].as_int());
    return real_op(args[0].as_double(), args[1].as_double());
  };
}

inline std::int64_t checked(bool overflow, std::int64_t r, const char* name) {
  if (overflow) throw HostCallError(std::string(name) + ": integer overflow");
  return r;
}

inline bool host_equal(const HostValue& a, const HostValue& b) {
  if (a.is_number() && b.is_number()) {
    if (a.is_int() && b.is_int()) return a.as_int() == b.as_int();
    return a.as_double() == b.as_double();
  }
  return a == b;
}

inline int host_compare(const char* name, const HostValue& a, const HostValue& b) {
  if (a.is_number() && b.is_number()) {
    if (a.is_int() && b.is_int()) return a.as_int() < b.as_int() ? -1 : (b.as_int() < a.as_int() ? 1 : 0);
    double x = a.as_double(), y = b.as_double();
    return x < y ? -1 : (y < x ? 1 : 0);
  }
  if (a.is_text() && b.is_text()) return a.text().compare(b.text()) < 0 ? -1 : (b.text().compare(a.text()) < 0 ? 1 : 0);
  throw HostCallError(std::string(name) + ": cannot compare " + display(a) + " with " + display(b));
}

// Splits UTF-8 text into code points.
inline std::vector<std::string> utf8_chars(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 1;
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace detail

/// The builtin host names:
///   actions     print
///   functions   add sub mul div mod abs eq lt gt
///   generators  range iter
/// Integer div and mod floor toward negative infinity. eq/lt/gt return the
/// symbols true/false instead of failing.
inline HostRegistry standard_registry(std::ostream& out = std::cout) {
  using Args = HostRegistry::Args;
  HostRegistry r;
  std::ostream* os = &out;

  r.add_action("print", [os](Args args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i) *os << ' ';
      *os << display(args[i]);
    }
    *os << '\n';
  });

  r.add_function("add", detail::arith(
                            "add",
                            [](std::int64_t a, std::int64_t b) -> HostValue {
                              std::int64_t r = 0;
                              bool overflow = __builtin_add_overflow(a, b, &r);
                              return detail::checked(overflow, r, "add");
                            },
                            [](double a, double b) -> HostValue { return a + b; }));
  r.add_function("sub", detail::arith(
                            "sub",
                            [](std::int64_t a, std::int64_t b) -> HostValue {
                              std::int64_t r = 0;
                              bool overflow = __builtin_sub_overflow(a, b, &r);
                              return detail::checked(overflow, r, "sub");
                            },
                            [](double a, double b) -> HostValue { return a - b; }));
  r.add_function("mul", detail::arith(
                            "mul",
                            [](std::int64_t a, std::int64_t b) -> HostValue {
                              std::int64_t r = 0;
                              bool overflow = __builtin_mul_overflow(a, b, &r);
                              return detail::checked(overflow, r, "mul");
                            },
                            [](double a, double b) -> HostValue { return a * b; }));
  r.add_function("div", detail::arith(
                            "div",
                            [](std::int64_t a, std::int64_t b) -> HostValue {
                              if (b == 0) throw HostCallError("div: division by zero");
                              std::int64_t q = a / b;
                              if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
                              return q;
                            },
                            [](double a, double b) -> HostValue {
                              if (b == 0) throw HostCallError("div: division by zero");
                              return a / b;
                            }));
  r.add_function("mod", detail::arith(
                            "mod",
                            [](std::int64_t a, std::int64_t b) -> HostValue {
                              if (b == 0) throw HostCallError("mod: division by zero");
                              std::int64_t m = a % b;
                              if (m != 0 && ((m < 0) != (b < 0))) m += b;
                              return m;
                            },
                            [](double a, double b) -> HostValue {
                              if (b == 0) throw HostCallError("mod: division by zero");
                              double m = std::fmod(a, b);
                              if (m != 0 && ((m < 0) != (b < 0))) m += b;
                              return m;
                            }));
  r.add_function("abs", [](Args args) -> HostValue {
    detail::expect_arity("abs", args, 1);
    detail::expect_numbers("abs", args);
    if (args[0].is_int()) {
      if (args[0].as_int() == INT64_MIN) throw HostCallError("abs: integer overflow");
      return args[0].as_int() < 0 ? -args[0].as_int() : args[0].as_int();
    }
    return std::fabs(args[0].as_double());
  });
  r.add_function("eq", [](Args args) -> HostValue {
    detail::expect_arity("eq", args, 2);
    return host_bool(detail::host_equal(args[0], args[1]));
  });
  r.add_function("lt", [](Args args) -> HostValue {
    detail::expect_arity("lt", args, 2);
    return host_bool(detail::host_compare("lt", args[0], args[1]) < 0);
  });
  r.add_function("gt", [](Args args) -> HostValue {
    detail::expect_arity("gt", args, 2);
    return host_bool(detail::host_compare("gt", args[0], args[1]) > 0);
  });

  r.add_generator("range", [](Args args) -> HostRegistry::Stream {
    detail::expect_arity("range", args, 2);
    if (!args[0].is_int() || !args[1].is_int()) throw HostCallError("range: bounds must be integers");
    std::int64_t next = args[0].as_int(), hi = args[1].as_int();
    return [next, hi]() mutable -> std::optional<HostValue> {
      if (next >= hi) return std::nullopt;
      return HostValue(next++);
    };
  });
  r.add_generator("iter", [](Args args) -> HostRegistry::Stream {
    detail::expect_arity("iter", args, 1);
    HostValue::List items;
    const HostValue& x = args[0];
    if (x.is_list()) {
      items = x.list();
    } else if (x.is_text()) {
      for (auto& ch : detail::utf8_chars(x.text()))
        items.push_back(x.is_symbol() ? HostValue(Symbol{ch}) : HostValue(ch));
    } else {
      throw HostCallError("iter: cannot iterate over " + display(x));
    }
    return [items = std::move(items), i = std::size_t{0}]() mutable -> std::optional<HostValue> {
      if (i >= items.size()) return std::nullopt;
      return items[i++];
    };
  });
  return r;
}

}  // namespace natlog
