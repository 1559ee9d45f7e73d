#pragma once

// Ground fact database with content-driven indexing.
//
// Every fact is a ground term identified by its insertion position. The
// constant index maps each constant to the ascending ids of the facts that
// contain it; a query's candidates are the intersection of the sets of its
// constants. If a constant occurs in a query it must occur in every ground
// fact unifying with it, so the intersection never loses a match. It can hold
// false positives, which ground_unify() removes.
//
// Two optional refinements: a path index keyed on (route to leaf, constant),
// and per-fact skeletons used as a shape prefilter.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "natlog/error.hpp"
#include "natlog/syntax.hpp"
#include "natlog/term.hpp"
#include "natlog/unify.hpp"

namespace natlog {

using FactId = std::uint32_t;

/// Ascending fact ids.
using IdSet = std::vector<FactId>;

inline IdSet intersect(const IdSet& a, const IdSet& b) {
  IdSet out;
  out.reserve(std::min(a.size(), b.size()));
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline IdSet all_ids(std::size_t n) {
  IdSet out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<FactId>(i);
  return out;
}

class FactDb {
 public:
  /// Constants deeper than this are keyed only in the constant index.
  static constexpr std::size_t max_path_depth = 16;

  struct Options {
    bool path_index = false;
    bool skeletons = false;
  };

  FactDb() = default;
  explicit FactDb(Options opts) : opts_(opts) {}

  /// Appends a ground fact. Throws NonGroundFact if it contains a variable.
  FactId add_fact(Term fact) {
    if (!fact.is_ground()) throw NonGroundFact("fact is not ground: " + to_string(fact));
    auto id = static_cast<FactId>(facts_.size());
    facts_.push_back(std::move(fact));
    index_fact(id);
    return id;
  }

  std::size_t size() const noexcept { return facts_.size(); }
  bool empty() const noexcept { return facts_.empty(); }
  const std::vector<Term>& facts() const noexcept { return facts_; }
  const Term& fact(FactId id) const { return facts_.at(id); }
  const Options& options() const noexcept { return opts_; }

  const std::unordered_map<Constant, IdSet, ConstantHash>& const_index() const noexcept { return const_index_; }
  const std::unordered_map<Path, IdSet, PathHash>& path_index() const noexcept { return path_index_; }

  /// Ids of facts containing `c`, or nullptr if no fact does.
  const IdSet* const_ids(const Constant& c) const {
    auto it = const_index_.find(c);
    return it == const_index_.end() ? nullptr : &it->second;
  }
  const IdSet* path_ids(const Path& p) const {
    auto it = path_index_.find(p);
    return it == path_index_.end() ? nullptr : &it->second;
  }

  bool has_path_index() const noexcept { return opts_.path_index; }
  bool has_skeletons() const noexcept { return opts_.skeletons; }
  const Skeleton& skeleton(FactId id) const { return skeletons_.at(id); }

  /// All distinct constants, in Constant order.
  std::vector<Constant> constants() const {
    std::vector<Constant> out;
    out.reserve(const_index_.size());
    for (const auto& [c, ids] : const_index_) out.push_back(c);
    std::sort(out.begin(), out.end());
    return out;
  }

  void enable_path_index() {
    if (opts_.path_index) return;
    opts_.path_index = true;
    rebuild_indexes();
  }
  void enable_skeletons() {
    if (opts_.skeletons) return;
    opts_.skeletons = true;
    rebuild_indexes();
  }

  /// Recomputes every enabled index from the facts alone.
  void rebuild_indexes() {
    const_index_.clear();
    path_index_.clear();
    skeletons_.clear();
    for (FactId id = 0; id < facts_.size(); ++id) index_fact(id);
  }

 private:
  void index_fact(FactId id) {
    const Term& f = facts_[id];
    // Ids arrive in ascending order, so push_back keeps every set sorted.
    for (const Constant& c : const_of(f)) const_index_[c].push_back(id);
    if (opts_.path_index) {
      for (Path& p : paths_of(f)) {
        if (p.steps.size() > max_path_depth) continue;
        auto& ids = path_index_[std::move(p)];
        if (ids.empty() || ids.back() != id) ids.push_back(id);
      }
    }
    if (opts_.skeletons) skeletons_.push_back(skeleton_of(f));
  }

  Options opts_;
  std::vector<Term> facts_;
  std::unordered_map<Constant, IdSet, ConstantHash> const_index_;
  std::unordered_map<Path, IdSet, PathHash> path_index_;
  std::vector<Skeleton> skeletons_;
};

namespace detail {

// Intersects the given sets smallest first; a null entry means "absent".
inline IdSet intersect_all(std::vector<const IdSet*> sets) {
  for (const IdSet* s : sets)
    if (s == nullptr) return {};
  std::sort(sets.begin(), sets.end(), [](const IdSet* a, const IdSet* b) { return a->size() < b->size(); });
  IdSet acc = *sets.front();
  for (std::size_t i = 1; i < sets.size() && !acc.empty(); ++i) acc = intersect(acc, *sets[i]);
  return acc;
}

}  // namespace detail

/// Candidate facts for `query` by constant-set intersection.
inline IdSet ground_match_of(const FactDb& db, const Term& query) {
  auto constants = const_of(query);
  if (constants.empty()) return all_ids(db.size());
  std::vector<const IdSet*> sets;
  sets.reserve(constants.size());
  for (const Constant& c : constants) sets.push_back(db.const_ids(c));
  return detail::intersect_all(std::move(sets));
}

/// Candidate facts keyed on the exact position of each query constant.
/// Requires the path index.
inline IdSet ground_match_of_paths(const FactDb& db, const Term& query) {
  if (!db.has_path_index()) throw error("path index not built");
  auto paths = paths_of(query);
  if (paths.empty()) return all_ids(db.size());
  std::vector<const IdSet*> sets;
  sets.reserve(paths.size());
  for (const Path& p : paths)
    sets.push_back(p.steps.size() > FactDb::max_path_depth ? db.const_ids(p.leaf) : db.path_ids(p));
  return detail::intersect_all(std::move(sets));
}

/// Keeps the candidates whose skeleton the query's skeleton matches.
inline IdSet skeleton_prefilter(const FactDb& db, const Term& query, const IdSet& candidates) {
  if (!db.has_skeletons()) throw error("skeletons not built");
  if (query.is_var()) return candidates;
  Skeleton qs = skeleton_of(query);
  IdSet out;
  out.reserve(candidates.size());
  for (FactId id : candidates)
    if (skeleton_matches(qs, db.skeleton(id))) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------
// Indexers

/// Maps a query to candidate fact ids, ascending. May over-approximate; the
/// caller filters candidates by ground unification.
class Indexer {
 public:
  virtual ~Indexer() = default;
  virtual IdSet ground_match_of(const Term& query) const = 0;
  virtual const FactDb& db() const = 0;
};

class ConstIndexer : public Indexer {
 public:
  explicit ConstIndexer(std::shared_ptr<const FactDb> db) : db_(std::move(db)) {}
  IdSet ground_match_of(const Term& query) const override { return natlog::ground_match_of(*db_, query); }
  const FactDb& db() const override { return *db_; }

 private:
  std::shared_ptr<const FactDb> db_;
};

class PathIndexer : public Indexer {
 public:
  explicit PathIndexer(std::shared_ptr<const FactDb> db) : db_(std::move(db)) {
    if (!db_->has_path_index()) throw error("PathIndexer needs a FactDb built with the path index");
  }
  IdSet ground_match_of(const Term& query) const override { return ground_match_of_paths(*db_, query); }
  const FactDb& db() const override { return *db_; }

 private:
  std::shared_ptr<const FactDb> db_;
};

/// Runs another indexer, then drops candidates failing the skeleton test.
class SkeletonFilter : public Indexer {
 public:
  explicit SkeletonFilter(std::shared_ptr<const Indexer> inner) : inner_(std::move(inner)) {
    if (!inner_->db().has_skeletons()) throw error("SkeletonFilter needs a FactDb built with skeletons");
  }
  IdSet ground_match_of(const Term& query) const override {
    return skeleton_prefilter(inner_->db(), query, inner_->ground_match_of(query));
  }
  const FactDb& db() const override { return inner_->db(); }

 private:
  std::shared_ptr<const Indexer> inner_;
};

/// Enumerates the facts unifying with a query, one at a time. Each successful
/// next() leaves that fact's bindings in `env`; the following call (or
/// reset()) undoes them first. After exhaustion the bindings are undone.
class FactMatcher {
 public:
  FactMatcher(const Indexer& indexer, const Term& query, Env& env, Trail& trail)
      : db_(&indexer.db()), env_(&env), trail_(&trail), mark_(trail.mark()) {
    query_ = resolve(query, env);
    candidates_ = indexer.ground_match_of(query_);
  }

  bool next() {
    undo_to(mark_, *trail_, *env_);
    while (pos_ < candidates_.size()) {
      FactId id = candidates_[pos_++];
      if (ground_unify(query_, db_->fact(id), *env_, *trail_)) {
        current_ = id;
        return true;
      }
    }
    return false;
  }

  /// Whether more candidates remain to be tried.
  bool has_more() const noexcept { return pos_ < candidates_.size(); }
  FactId current() const noexcept { return current_; }
  const IdSet& candidates() const noexcept { return candidates_; }
  Trail::Mark mark() const noexcept { return mark_; }

 private:
  const FactDb* db_;
  Env* env_;
  Trail* trail_;
  Trail::Mark mark_;
  Term query_;
  IdSet candidates_;
  std::size_t pos_ = 0;
  FactId current_ = 0;
};

/// Calls `on_match(id)` once per fact unifying with `query`, with that
/// match's bindings in place. Bindings are undone afterwards.
template <class F>
std::size_t match_facts(const Indexer& indexer, const Term& query, Env& env, Trail& trail, F&& on_match) {
  FactMatcher m(indexer, query, env, trail);
  std::size_t n = 0;
  while (m.next()) {
    ++n;
    on_match(m.current());
  }
  return n;
}

// ---------------------------------------------------------------------------
// Loaders

enum class DataFormat { Auto, Nat, Csv, Tsv, Json };

inline DataFormat format_from_extension(const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".nat" || ext == ".pro" || ext == ".pl") return DataFormat::Nat;
  if (ext == ".csv") return DataFormat::Csv;
  if (ext == ".tsv" || ext == ".tab") return DataFormat::Tsv;
  if (ext == ".json") return DataFormat::Json;
  throw FormatError("cannot infer data format from extension of " + path);
}

inline DataFormat parse_data_format(std::string_view name) {
  if (name == "auto") return DataFormat::Auto;
  if (name == "nat") return DataFormat::Nat;
  if (name == "csv") return DataFormat::Csv;
  if (name == "tsv") return DataFormat::Tsv;
  if (name == "json") return DataFormat::Json;
  throw FormatError("unknown data format: " + std::string(name));
}

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

inline Term row_to_fact(const std::vector<std::string>& cells) {
  std::vector<Term> items;
  items.reserve(cells.size());
  for (const auto& c : cells) items.push_back(Term::sym(c));
  return Term::tuple(std::move(items));
}

inline std::size_t load_tsv(FactDb& db, std::string_view text) {
  std::size_t n = 0;
  for (const auto& line : split_lines(text)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    db.add_fact(row_to_fact(cells));
    ++n;
  }
  return n;
}

// RFC 4180: comma separated, optional double quotes, "" escapes a quote,
// quoted fields may span lines.
inline std::size_t load_csv(FactDb& db, std::string_view text, const std::string& name) {
  std::size_t n = 0, row = 1, i = 0;
  while (i < text.size()) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted_cell = false;
    std::size_t row_start = row;
    for (;;) {
      if (i >= text.size()) {
        cells.push_back(std::move(cell));
        break;
      }
      char c = text[i];
      if (c == '"' && cell.empty() && !quoted_cell) {
        quoted_cell = true;
        ++i;
        for (;;) {
          if (i >= text.size())
            throw FormatError(name + ": row " + std::to_string(row_start) + ": unterminated quoted field");
          if (text[i] == '"') {
            if (i + 1 < text.size() && text[i + 1] == '"') {
              cell.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (text[i] == '\n') ++row;
          cell.push_back(text[i++]);
        }
        if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r')
          throw FormatError(name + ": row " + std::to_string(row) + ": text after closing quote");
        continue;
      }
      if (c == ',') {
        cells.push_back(std::move(cell));
        cell.clear();
        quoted_cell = false;
        ++i;
        continue;
      }
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (c == '\n' || c == '\r') {
        ++i;
        ++row;
        cells.push_back(std::move(cell));
        break;
      }
      if (c == '"') throw FormatError(name + ": row " + std::to_string(row) + ": stray quote in unquoted field");
      cell.push_back(c);
      ++i;
    }
    if (cells.size() == 1 && cells[0].empty() && !quoted_cell) continue;  // blank line
    db.add_fact(row_to_fact(cells));
    ++n;
  }
  return n;
}

inline Term json_to_term(const nlohmann::ordered_json& j) {
  switch (j.type()) {
    case nlohmann::ordered_json::value_t::array: {
      std::vector<Term> items;
      items.reserve(j.size());
      for (const auto& e : j) items.push_back(json_to_term(e));
      return Term::tuple(std::move(items));
    }
    case nlohmann::ordered_json::value_t::object: {
      std::vector<Term> items;
      items.reserve(j.size());
      for (const auto& [k, v] : j.items()) items.push_back(Term::tuple({Term::sym(k), json_to_term(v)}));
      return Term::tuple(std::move(items));
    }
    case nlohmann::ordered_json::value_t::string: return Term::sym(j.get<std::string>());
    default: return Term::sym(j.dump());  // numbers, booleans, null keep their JSON text
  }
}

inline std::size_t load_json(FactDb& db, std::string_view text, const std::string& name) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return 0;
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw FormatError(name + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
  // A top-level array of arrays/objects is a collection of facts; anything
  // else is a single fact.
  bool collection = doc.is_array() && !doc.empty() &&
                    std::all_of(doc.begin(), doc.end(), [](const auto& e) { return e.is_array() || e.is_object(); });
  if (!collection) {
    db.add_fact(json_to_term(doc));
    return 1;
  }
  for (const auto& e : doc) db.add_fact(json_to_term(e));
  return doc.size();
}

inline std::size_t load_nat(FactDb& db, std::string_view text, const std::string& name) {
  std::size_t n = 0;
  for (Clause& c : parse_program(text, name)) {
    if (!c.is_fact()) throw NonGroundFact(name + ": rules are not allowed in a fact file: " + render_clause(c));
    db.add_fact(std::move(c.head));
    ++n;
  }
  return n;
}

}  // namespace detail

/// Loads facts from in-memory text. `name` labels error messages.
inline std::size_t load_facts_text(FactDb& db, std::string_view text, DataFormat format,
                                   const std::string& name = "<text>") {
  switch (format) {
    case DataFormat::Nat: return detail::load_nat(db, text, name);
    case DataFormat::Csv: return detail::load_csv(db, text, name);
    case DataFormat::Tsv: return detail::load_tsv(db, text);
    case DataFormat::Json: return detail::load_json(db, text, name);
    case DataFormat::Auto: break;
  }
  throw FormatError("load_facts_text needs an explicit format");
}

/// Loads a dataset file; DataFormat::Auto picks the format by extension.
inline std::size_t load_facts(FactDb& db, const std::string& path, DataFormat format = DataFormat::Auto) {
  if (format == DataFormat::Auto) format = format_from_extension(path);
  return load_facts_text(db, read_text_file(path), format, path);
}

}  // namespace natlog
