// natlog: run, explore and time Natlog programs.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "natlog/natlog.hpp"

#ifndef NATLOG_PROGRAMS_DIR
#define NATLOG_PROGRAMS_DIR "programs"
#endif

namespace {

enum ExitCode { kOk = 0, kLoadError = 1, kRuntimeError = 2 };

struct CliConfig {
  std::string program_path;
  std::string db_path;
  std::string db_format = "auto";
  std::string indexer = "const";
  bool skeleton = false;
  bool occurs_check = false;
  std::size_t max_answers = 0;  // 0 = unlimited
  bool timing = false;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<double> threshold;
  std::optional<std::uint64_t> seed;
  std::string save_model;
  std::string load_model;
};

// Thrown for bad flag combinations found after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

std::string seconds_since(Clock::time_point t0) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << std::chrono::duration<double>(Clock::now() - t0).count();
  return os.str();
}

void add_common_options(CLI::App* cmd, CliConfig& cfg) {
  cmd->add_option("--db", cfg.db_path, "Ground fact database (.nat, .csv, .tsv, .json)");
  cmd->add_option("--db-format", cfg.db_format, "Database format")
      ->check(CLI::IsMember({"auto", "nat", "csv", "tsv", "json"}));
  cmd->add_option("--indexer", cfg.indexer, "Fact indexer")->check(CLI::IsMember({"const", "path", "neural"}));
  cmd->add_flag("--skeleton", cfg.skeleton, "Filter candidates by term shape before unifying");
  cmd->add_flag("--occurs-check", cfg.occurs_check, "Unify with occurs check");
  cmd->add_option("--max-answers", cfg.max_answers, "Stop after this many answers")->check(CLI::PositiveNumber);
  cmd->add_flag("--timing", cfg.timing, "Print elapsed wall time");
  cmd->add_option("--hidden", cfg.hidden, "Neural indexer: hidden layer size")->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", cfg.epochs, "Neural indexer: training epochs");
  cmd->add_option("--lr", cfg.lr, "Neural indexer: learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--threshold", cfg.threshold, "Neural indexer: decision threshold")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--seed", cfg.seed, "Neural indexer: weight initialization seed");
  cmd->add_option("--save-model", cfg.save_model, "Neural indexer: write trained weights here");
  cmd->add_option("--load-model", cfg.load_model, "Neural indexer: read weights instead of training");
}

void validate(const CliConfig& cfg) {
  bool neural_flags = cfg.hidden || cfg.epochs || cfg.lr || cfg.threshold || cfg.seed || !cfg.save_model.empty() ||
                      !cfg.load_model.empty();
  if (neural_flags && cfg.indexer != "neural")
    throw UsageError("--hidden, --epochs, --lr, --threshold, --seed, --save-model and --load-model need --indexer neural");
  if (cfg.indexer != "const" && cfg.db_path.empty()) throw UsageError("--indexer needs --db");
  if (cfg.skeleton && cfg.db_path.empty()) throw UsageError("--skeleton needs --db");
}

natlog::Solver make_solver(const CliConfig& cfg) {
  natlog::Program program;
  if (!cfg.program_path.empty()) program = natlog::Program::load(cfg.program_path);
  natlog::Solver solver(std::move(program), natlog::SolverOptions{cfg.occurs_check});
  if (cfg.db_path.empty()) return solver;

  auto db = std::make_shared<natlog::FactDb>(
      natlog::FactDb::Options{cfg.indexer == "path", cfg.skeleton});
  auto t0 = Clock::now();
  std::size_t n = natlog::load_facts(*db, cfg.db_path, natlog::parse_data_format(cfg.db_format));
  if (cfg.timing) std::cerr << "loaded " << n << " facts in " << seconds_since(t0) << " seconds\n";

  std::shared_ptr<const natlog::Indexer> indexer;
  if (cfg.indexer == "path") {
    indexer = std::make_shared<natlog::PathIndexer>(db);
  } else if (cfg.indexer == "neural") {
    natlog::TrainConfig tc;
    if (cfg.hidden) tc.hidden_size = *cfg.hidden;
    if (cfg.epochs) tc.epochs = *cfg.epochs;
    if (cfg.lr) tc.learning_rate = *cfg.lr;
    if (cfg.threshold) tc.threshold = *cfg.threshold;
    if (cfg.seed) tc.seed = *cfg.seed;
    auto neural = std::make_shared<natlog::NeuralIndexer>(db, tc);
    if (!cfg.load_model.empty()) {
      neural->load(cfg.load_model);
    } else {
      auto t1 = Clock::now();
      double loss = neural->train();
      std::cerr << "trained neural indexer: loss " << loss;
      if (cfg.timing) std::cerr << " in " << seconds_since(t1) << " seconds";
      std::cerr << '\n';
    }
    if (!cfg.save_model.empty()) neural->save(cfg.save_model);
    indexer = neural;
  } else {
    indexer = std::make_shared<natlog::ConstIndexer>(db);
  }
  if (cfg.skeleton) indexer = std::make_shared<natlog::SkeletonFilter>(indexer);
  solver.set_indexer(std::move(indexer));
  return solver;
}

/// Prints the banner and answers for one query. Returns the exit code.
int run_query(const natlog::Solver& solver, const std::string& text, const CliConfig& cfg, std::size_t* count = nullptr) {
  natlog::Query query;
  try {
    query = natlog::parse_query(text);
  } catch (const natlog::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kLoadError;
  }
  std::cout << "GOAL PARSED: " << natlog::render_parsed_goals(query.goals) << '\n';
  auto t0 = Clock::now();
  std::size_t n = 0;
  int code = kOk;
  try {
    auto stream = solver.solve(query);
    while (cfg.max_answers == 0 || n < cfg.max_answers) {
      auto a = stream.next();
      if (!a) break;
      ++n;
      std::cout << "ANSWER: " << a->to_string() << '\n' << std::flush;
    }
  } catch (const std::exception& e) {
    std::cout << std::flush;
    std::cerr << "error: " << e.what() << '\n';
    code = kRuntimeError;
  }
  if (cfg.timing) std::cout << "TIME: " << seconds_since(t0) << " seconds\n";
  if (count) *count = n;
  return code;
}

int cmd_run(const CliConfig& cfg, const std::string& query) {
  std::optional<natlog::Solver> solver;
  try {
    solver.emplace(make_solver(cfg));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kLoadError;
  }
  return run_query(*solver, query, cfg);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int cmd_repl(const CliConfig& cfg) {
  std::optional<natlog::Solver> solver;
  try {
    solver.emplace(make_solver(cfg));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kLoadError;
  }
  const bool interactive = isatty(fileno(stdin));
  std::string line;
  for (;;) {
    if (interactive) std::cout << "?- " << std::flush;
    if (!std::getline(std::cin, line)) break;
    std::string q = trim(line);
    if (q.empty() || q[0] == '%') continue;
    if (q == "halt." || q == "halt") break;
    if (q.back() != '?') {
      std::cerr << "error: queries end with '?'; type halt. to quit\n";
      continue;
    }
    run_query(*solver, q, cfg);
  }
  return kOk;
}

struct Bench {
  const char* name;
  const char* file;
  const char* query;
};

constexpr Bench kBenches[] = {
    {"queens10", "queens.nat", "queens 10 Qs ?"},
    {"perm", "perm.nat", "nums 6 Xs, perm Xs Ps ?"},
    {"tc", "tc.nat", "tc Who is animal ?"},
};

int cmd_bench(const std::string& name, const std::string& dir, bool occurs_check) {
  for (const Bench& b : kBenches) {
    if (name != b.name) continue;
    try {
      natlog::Solver solver(natlog::Program::load(dir + "/" + b.file), natlog::SolverOptions{occurs_check});
      auto t0 = Clock::now();
      std::size_t n = 0;
      for (auto stream = solver.solve(b.query); stream.next();) ++n;
      std::cout << b.name << ": " << n << " answers in " << seconds_since(t0) << " seconds\n";
      return kOk;
    } catch (const natlog::runtime_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kRuntimeError;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kLoadError;
    }
  }
  std::cerr << "error: unknown benchmark " << name << '\n';
  return kLoadError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Natlog interpreter"};
  app.require_subcommand(1);

  CliConfig cfg;
  std::string query;
  std::string bench_name;
  std::string programs_dir = NATLOG_PROGRAMS_DIR;

  auto* run = app.add_subcommand("run", "Run one query against a program");
  run->add_option("program", cfg.program_path, "Program file")->required();
  run->add_option("query", query, "Query, ending in '?'")->required();
  add_common_options(run, cfg);

  auto* repl = app.add_subcommand("repl", "Interactive top level");
  repl->add_option("program", cfg.program_path, "Program file");
  add_common_options(repl, cfg);

  auto* bench = app.add_subcommand("bench", "Time a bundled benchmark");
  bench->add_option("name", bench_name, "Benchmark")->required()->check(CLI::IsMember({"queens10", "perm", "tc"}));
  bench->add_option("--programs-dir", programs_dir, "Directory holding the bundled programs");
  bench->add_flag("--occurs-check", cfg.occurs_check, "Unify with occurs check");

  try {
    app.parse(argc, argv);
    validate(cfg);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kLoadError;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kLoadError;
  }

  if (*run) return cmd_run(cfg, query);
  if (*repl) return cmd_repl(cfg);
  return cmd_bench(bench_name, programs_dir, cfg.occurs_check);
}
