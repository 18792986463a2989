// finmorse command line: one subcommand per operation plus `batch`.
// Exit status: 0 when every verdict is true, 1 when a verdict is false or an
// operation failed, 2 on usage, configuration or I/O errors.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "finmorse/finmorse.hpp"

namespace fs = std::filesystem;
using finmorse::json;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::string csv_dir;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tols;
  bool normalize = false;
};

void add_common(CLI::App* sub, Common& c, bool batch) {
  sub->add_option("--config", c.config, batch ? "Batch JSON ({\"scenarios\": [...]})" : "Scenario JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "Write the report here instead of stdout");
  sub->add_option("--csv", c.csv_dir, "Directory for CSV sidecars");
  sub->add_option("--jobs", c.jobs, "Worker threads for batch runs")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "Override the scenario seed");
  sub->add_option("--tol", c.tols, "Tolerance override NAME=VALUE (repeatable)");
  sub->add_flag("--normalize", c.normalize, "Drop timing fields so reports compare byte for byte");
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw finmorse::ConfigError(path, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw finmorse::ConfigError(path, std::string("malformed JSON: ") + e.what());
  }
}

void apply_overrides(finmorse::ScenarioConfig& sc, const Common& c) {
  if (c.seed) {
    sc.seed = *c.seed;
    sc.has_seed = true;
  }
  for (const auto& t : c.tols) finmorse::set_tolerance(sc, t);
}

void emit(const json& doc, const std::string& out) {
  std::string text = doc.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw finmorse::ConfigError(out, "cannot write report");
  f << text;
}

void write_csv(const std::vector<finmorse::RunReport>& rs, const std::string& dir) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  for (const auto& r : rs)
    for (const auto& [name, content] : r.csv) {
      std::ofstream f(fs::path(dir) / name);
      if (!f) throw finmorse::ConfigError(dir, "cannot write " + name);
      f << content;
    }
}

int run_single(const std::string& op, const Common& c) {
  json doc = read_json(c.config);
  doc["operations"] = json::array({op});
  auto dir = fs::path(c.config).parent_path().string();
  auto sc = finmorse::parse_config(doc, dir.empty() ? "." : dir);
  apply_overrides(sc, c);
  finmorse::build_scenario(sc);  // surface id and shape errors before running
  auto r = finmorse::run(sc, {c.normalize, !c.csv_dir.empty()});
  emit(r.doc, c.out);
  write_csv({r}, c.csv_dir);
  return r.all_true ? 0 : 1;
}

int run_batch(const Common& c) {
  auto cs = finmorse::load_batch(c.config);
  for (auto& sc : cs) apply_overrides(sc, c);
  auto rs = finmorse::run_batch(cs, c.jobs, {c.normalize, !c.csv_dir.empty()});
  auto doc = finmorse::batch_json(rs);
  emit(doc, c.out);
  write_csv(rs, c.csv_dir);
  return doc["all_verdicts_true"].get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Morse index and Birman-Schwinger checks for Schrodinger operators on weighted graphs"};
  app.set_version_flag("--version", finmorse::tool_version);
  app.require_subcommand(1);

  std::map<std::string, std::pair<CLI::App*, Common>> subs;
  const std::map<std::string, std::string> help{
      {"morse", "Count negative eigenvalues"},
      {"bs", "Birman-Schwinger bound check"},
      {"doob", "Ground state (Doob) transform"},
      {"green", "Dirichlet Green kernels along the exhaustion"},
      {"parabolicity", "Heuristic parabolicity test"},
      {"bracket", "Neumann bracketing check"},
      {"pipeline", "End-to-end finite Morse index pipeline"},
      {"kernel", "Kernel inclusion check"},
      {"clr", "Coupling-constant scaling probe"}};
  for (const auto& op : finmorse::known_operations()) {
    auto& [sub, c] = subs[op];
    sub = app.add_subcommand(op, help.at(op));
    add_common(sub, c, false);
  }
  Common batch_opts;
  auto* batch = app.add_subcommand("batch", "Run every scenario in a batch file");
  add_common(batch, batch_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;  // --help and --version exit 0
  }
  try {
    if (batch->parsed()) return run_batch(batch_opts);
    for (auto& [op, entry] : subs)
      if (entry.first->parsed()) return run_single(op, entry.second);
  } catch (const finmorse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
