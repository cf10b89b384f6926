// Command-line front end over the C API.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "acm/acm.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Failure carrying the exit code and error name for the stderr JSON.
struct CliError {
  int exit_code;
  std::string name;
  std::string message;
};

void check(acm_status st) {
  if (st != ACM_OK) throw CliError{acm_exit_code(st), acm_status_name(st), acm_last_error()};
}

[[noreturn]] void user_error(const std::string& message) {
  throw CliError{2, "InvalidArgument", message};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  acm_string_free(s);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{2, "IoError", "cannot open '" + path + "'"};
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{2, "IoError", "cannot write '" + path.string() + "'"};
  out << text;
  if (!out) throw CliError{2, "IoError", "failed writing '" + path.string() + "'"};
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError{2, "IoError", "cannot create directory '" + dir.string() + "': " + ec.message()};
}

unsigned default_workers() {
  if (const char* env = std::getenv("ACM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) user_error("ACM_WORKERS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

using SetPtr = std::unique_ptr<acm_epochset, decltype(&acm_epochset_free)>;

std::vector<SetPtr> read_sets(const std::vector<std::string>& paths) {
  std::vector<SetPtr> sets;
  for (const auto& p : paths) {
    acm_epochset* h = nullptr;
    check(acm_epochset_read(p.c_str(), &h));
    sets.emplace_back(h, &acm_epochset_free);
  }
  return sets;
}

std::vector<const acm_epochset*> raw(const std::vector<SetPtr>& sets) {
  std::vector<const acm_epochset*> out;
  for (const auto& s : sets) out.push_back(s.get());
  return out;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs, const std::vector<std::string>& argv) {
  json m;
  m["command"] = command;
  m["argv"] = argv;
  m["config"] = config;
  m["versions"] = {{"acm", acm_version()}, {"report_format", 1}, {"container_format", 1}};
  m["outputs"] = outputs;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// SVG heatmap of a grid score map (best classifier parameter per cell).

std::string heatmap_svg(const std::string& csv, const std::string& title) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  std::map<std::pair<int, int>, double> best;
  int max_order = 0, max_lag = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f[5];
    for (auto& x : f) std::getline(row, x, ',');
    const int order = std::stoi(f[0]), lag = std::stoi(f[1]);
    max_order = std::max(max_order, order);
    max_lag = std::max(max_lag, lag);
    const double v = f[3] == "nan" ? NAN : std::stod(f[3]);
    auto it = best.find({order, lag});
    if (it == best.end() || (!std::isnan(v) && (std::isnan(it->second) || v > it->second)))
      best[{order, lag}] = v;
  }
  double lo = 1.0, hi = 0.0;
  for (const auto& [k, v] : best)
    if (!std::isnan(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  const int cell = 36, left = 60, top = 40;
  const int width = left + max_lag * cell + 20, height = top + max_order * cell + 50;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << title << "</text>\n";
  for (const auto& [k, v] : best) {
    const int x = left + (k.second - 1) * cell, y = top + (k.first - 1) * cell;
    std::string fill = "#dddddd";
    if (!std::isnan(v)) {
      const double t = hi > lo ? (v - lo) / (hi - lo) : 1.0;
      const int r = static_cast<int>(255 * (1 - t) + 20 * t);
      const int g = static_cast<int>(255 * (1 - t) + 90 * t);
      const int b = static_cast<int>(255 * (1 - t) + 160 * t);
      char buf[16];
      std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
      fill = buf;
    }
    os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
       << "\" fill=\"" << fill << "\" stroke=\"#ffffff\"/>\n";
    if (!std::isnan(v)) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.2f", v);
      os << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
         << "\" text-anchor=\"middle\">" << buf << "</text>\n";
    }
  }
  for (int l = 1; l <= max_lag; ++l)
    os << "<text x=\"" << left + (l - 1) * cell + cell / 2 << "\" y=\"" << top + max_order * cell + 16
       << "\" text-anchor=\"middle\">" << l << "</text>\n";
  for (int o = 1; o <= max_order; ++o)
    os << "<text x=\"" << left - 8 << "\" y=\"" << top + (o - 1) * cell + cell / 2 + 4
       << "\" text-anchor=\"end\">" << o << "</text>\n";
  os << "<text x=\"" << left + max_lag * cell / 2 << "\" y=\"" << height - 10
     << "\" text-anchor=\"middle\">lag</text>\n";
  os << "<text x=\"14\" y=\"" << top + max_order * cell / 2 << "\" transform=\"rotate(-90 14 "
     << top + max_order * cell / 2 << ")\" text-anchor=\"middle\">order</text>\n";
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Commands

struct Options {
  std::vector<std::string> inputs;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned workers = 0;

  std::string spec_path;
  std::string spec_json;

  std::string method = "ami_cao";
  std::string estimate_options;

  std::string pipeline = "ACM+MDM";
  std::string param_source = "grid";
  int order = 1;
  int lag = 1;
  std::string eval = "ws";
  int folds = 5;
  int inner_folds = 5;
  int grid_max_order = 10;
  int grid_max_lag = 10;
  std::string dataset;
  std::vector<double> band;
  bool svg = false;

  long n_perm = 10000;
};

int cmd_simulate(const Options& o, const std::vector<std::string>& argv) {
  if (o.spec_path.empty() == o.spec_json.empty()) user_error("give exactly one of --spec or --spec-json");
  json spec;
  try {
    spec = json::parse(o.spec_path.empty() ? o.spec_json : slurp(o.spec_path));
  } catch (const json::parse_error& e) {
    user_error(std::string("simulation spec is not valid JSON: ") + e.what());
  }
  if (!spec.is_object()) user_error("simulation spec must be a JSON object");
  if (o.seed_given) spec["seed"] = o.seed;
  if (!spec.contains("seed")) user_error("a seed is required (--seed or \"seed\" in the spec)");

  acm_epochset* h = nullptr;
  check(acm_simulate(spec.dump().c_str(), o.workers, &h));
  SetPtr set(h, &acm_epochset_free);
  const fs::path dir(o.out);
  make_dir(dir);
  check(acm_epochset_write(set.get(), (dir / "epochs.acm").string().c_str()));
  char* summary = nullptr;
  check(acm_epochset_summary(set.get(), &summary));
  const std::string text = take(summary);
  write_text(dir / "summary.json", text);
  write_manifest(dir, "simulate", {{"spec", spec}}, {"epochs.acm", "summary.json"}, argv);
  std::cout << text;
  return 0;
}

int cmd_estimate(const Options& o, const std::vector<std::string>& argv) {
  auto sets = read_sets(o.inputs);
  const auto ptrs = raw(sets);
  acm_estimate* h = nullptr;
  check(acm_estimate_params(ptrs.data(), ptrs.size(), o.method.c_str(),
                            o.estimate_options.empty() ? nullptr : o.estimate_options.c_str(), &h));
  std::unique_ptr<acm_estimate, decltype(&acm_estimate_free)> est(h, &acm_estimate_free);
  const fs::path dir(o.out);
  make_dir(dir);
  char* js = nullptr;
  check(acm_estimate_json(est.get(), &js));
  json result = json::parse(take(js));
  std::vector<std::string> outputs;
  json diagnostics = json::object();
  for (std::size_t i = 0; i < acm_estimate_curve_count(est.get()); ++i) {
    char *name = nullptr, *csv = nullptr;
    check(acm_estimate_curve(est.get(), i, &name, &csv));
    const std::string n = take(name), file = n + ".csv";
    write_text(dir / file, take(csv));
    diagnostics[n] = (dir / file).string();
    outputs.push_back(file);
  }
  result["diagnostics"] = diagnostics;
  write_text(dir / "estimate.json", result.dump(2) + "\n");
  outputs.push_back("estimate.json");
  json config = {{"inputs", o.inputs}, {"method", o.method}};
  if (!o.estimate_options.empty()) config["options"] = json::parse(o.estimate_options);
  write_manifest(dir, "estimate-params", config, outputs, argv);
  std::cout << result.dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const Options& o, const std::vector<std::string>& argv) {
  if (!o.seed_given) user_error("--seed is required for evaluate");
  auto sets = read_sets(o.inputs);
  if (!o.band.empty()) {
    if (o.band.size() != 2) user_error("--band takes two values: LOW HIGH");
    for (auto& s : sets) check(acm_epochset_bandpass(s.get(), o.band[0], o.band[1]));
  }
  json config;
  config["pipeline"] = o.pipeline;
  config["param_source"] = o.param_source;
  config["order"] = o.order;
  config["lag"] = o.lag;
  config["eval"] = o.eval;
  config["folds"] = o.folds;
  config["inner_folds"] = o.inner_folds;
  config["seed"] = o.seed;
  config["grid_max_order"] = o.grid_max_order;
  config["grid_max_lag"] = o.grid_max_lag;
  if (!o.dataset.empty()) config["dataset"] = o.dataset;

  const auto ptrs = raw(sets);
  acm_eval_result* h = nullptr;
  check(acm_evaluate(ptrs.data(), ptrs.size(), config.dump().c_str(), o.workers, &h));
  std::unique_ptr<acm_eval_result, decltype(&acm_eval_result_free)> result(h, &acm_eval_result_free);

  const fs::path dir(o.out);
  make_dir(dir);
  std::vector<std::string> outputs{"report.json", "scores.csv", "timing.csv"};
  char* text = nullptr;
  check(acm_eval_report_json(result.get(), &text));
  write_text(dir / "report.json", take(text));
  check(acm_eval_scores_csv(result.get(), &text));
  write_text(dir / "scores.csv", take(text));
  check(acm_eval_timing_csv(result.get(), &text));
  write_text(dir / "timing.csv", take(text));
  const std::size_t n_grids = acm_eval_grid_count(result.get());
  if (n_grids > 0) make_dir(dir / "grids");
  for (std::size_t i = 0; i < n_grids; ++i) {
    char *name = nullptr, *csv = nullptr;
    check(acm_eval_grid(result.get(), i, &name, &csv));
    const std::string n = take(name), c = take(csv);
    write_text(dir / "grids" / (n + ".csv"), c);
    outputs.push_back("grids/" + n + ".csv");
    if (o.svg) {
      write_text(dir / "grids" / (n + ".svg"), heatmap_svg(c, o.pipeline + " " + n));
      outputs.push_back("grids/" + n + ".svg");
    }
  }
  json manifest_config = config;
  manifest_config["inputs"] = o.inputs;
  manifest_config["workers"] = o.workers;
  if (!o.band.empty()) manifest_config["band"] = o.band;
  write_manifest(dir, "evaluate", manifest_config, outputs, argv);

  double mean = 0, sd = 0;
  check(acm_eval_summary(result.get(), &mean, &sd));
  std::printf("%s %s %s: %.4f +- %.4f (%s)\n", o.pipeline.c_str(), o.param_source.c_str(),
              o.eval.c_str(), mean, sd, (dir / "report.json").string().c_str());
  return 0;
}

int cmd_stats(const Options& o, const std::vector<std::string>& argv) {
  std::vector<std::string> texts;
  for (const auto& p : o.inputs) texts.push_back(slurp(p));
  std::vector<const char*> ptrs;
  for (const auto& t : texts) ptrs.push_back(t.c_str());
  char* out = nullptr;
  check(acm_stats(ptrs.data(), ptrs.size(), o.n_perm, o.seed, &out));
  const std::string text = take(out);
  const fs::path dir(o.out);
  make_dir(dir);
  write_text(dir / "meta_analysis.json", text);
  write_manifest(dir, "stats", {{"reports", o.inputs}, {"n_perm", o.n_perm}, {"seed", o.seed}},
                 {"meta_analysis.json"}, argv);
  std::cout << text;
  return 0;
}

void print_error(const CliError& e) {
  json j;
  j["error"] = e.name;
  j["message"] = e.message;
  j["exit_code"] = e.exit_code;
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  Options o;
  CLI::App app{"Augmented covariance classification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(acm_version()));

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory")->required();
    sub->add_option("--workers", o.workers, "Worker threads (default: ACM_WORKERS or all cores)")
        ->check(CLI::PositiveNumber);
  };
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { o.seed = s, o.seed_given = true; }, "Random seed");
  };

  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic epoch container");
  sim->add_option("--spec", o.spec_path, "Simulation spec JSON file")->check(CLI::ExistingFile);
  sim->add_option("--spec-json", o.spec_json, "Inline simulation spec JSON");
  add_seed(sim);
  add_common(sim);

  CLI::App* est = app.add_subcommand("estimate-params", "Estimate embedding lag and dimension");
  est->add_option("--input", o.inputs, "Epoch container(s)")->required()->check(CLI::ExistingFile);
  est->add_option("--method", o.method, "ami_cao or mdop")
      ->check(CLI::IsMember({"ami_cao", "mdop"}));
  est->add_option("--options", o.estimate_options, "Estimator options as JSON");
  add_common(est);

  CLI::App* ev = app.add_subcommand("evaluate", "Within- or cross-session evaluation");
  ev->add_option("--input", o.inputs, "Epoch container(s), one per subject")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--pipeline", o.pipeline, "MDM, ACM+MDM, TANG+SVM or ACM+TANG+SVM");
  ev->add_option("--param-source", o.param_source, "fixed, grid, ami_cao or mdop");
  ev->add_option("--order", o.order, "Order for --param-source fixed")->check(CLI::PositiveNumber);
  ev->add_option("--lag", o.lag, "Lag for --param-source fixed")->check(CLI::PositiveNumber);
  ev->add_option("--eval", o.eval, "ws or cs")->check(CLI::IsMember({"ws", "cs"}));
  ev->add_option("--folds", o.folds, "Outer folds for ws")->check(CLI::Range(2, 1000));
  ev->add_option("--inner-folds", o.inner_folds, "Folds of the inner grid-search CV")
      ->check(CLI::Range(2, 1000));
  ev->add_option("--grid-max-order", o.grid_max_order, "Largest order in the grid")
      ->check(CLI::PositiveNumber);
  ev->add_option("--grid-max-lag", o.grid_max_lag, "Largest lag in the grid")
      ->check(CLI::PositiveNumber);
  ev->add_option("--dataset", o.dataset, "Dataset label used to pair reports");
  ev->add_option("--band", o.band, "Band-pass LOW HIGH in Hz before evaluation")->expected(2);
  ev->add_flag("--svg", o.svg, "Also render grid score maps as SVG heatmaps");
  add_seed(ev);
  add_common(ev);

  CLI::App* st = app.add_subcommand("stats", "Meta-analysis over evaluation reports");
  st->add_option("reports", o.inputs, "Report JSON files")->required()->check(CLI::ExistingFile);
  st->add_option("--n-perm", o.n_perm, "Permutations for the paired t test")
      ->check(CLI::PositiveNumber);
  add_seed(st);
  st->add_option("--out", o.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error({2, "UsageError", e.what()});
    return 2;
  }

  try {
    if (o.workers == 0) o.workers = default_workers();
    if (sim->parsed()) return cmd_simulate(o, args);
    if (est->parsed()) return cmd_estimate(o, args);
    if (ev->parsed()) return cmd_evaluate(o, args);
    if (st->parsed()) return cmd_stats(o, args);
  } catch (const CliError& e) {
    print_error(e);
    return e.exit_code;
  } catch (const std::exception& e) {
    print_error({3, "Internal", e.what()});
    return 3;
  }
  return 2;
}
