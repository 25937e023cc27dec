#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "scansnap/errors.hpp"
#include "scansnap/experiments.hpp"
#include "scansnap/io.hpp"
#include "scansnap/limit_dynamics.hpp"
#include "scansnap/rng.hpp"
#include "scansnap/seqgen.hpp"
#include "scansnap/theory.hpp"

namespace scansnap::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One config key. The flag is the key with '_' replaced by '-'. A null default
// marks a required key; its value is parsed as a string.
struct Param {
  std::string key;
  json def;
  std::string help;
};

using Outputs = std::vector<std::string>;
using Runner = std::function<void(const json& cfg, Outputs& outputs)>;

struct Subcommand {
  std::string name;
  std::string description;
  std::vector<Param> params;
  Runner run;
  // Where the manifest goes, given the resolved config.
  std::function<fs::path(const json&)> manifest_path;
};

std::string flag_of(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json parse_scalar(const std::string& text, const json& like, const std::string& key) {
  try {
    std::size_t used = 0;
    if (like.is_number_unsigned() || like.is_number_integer()) {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      const double d = std::stod(text, &used);
      if (used != text.size() || d != std::floor(d)) throw std::invalid_argument("not an integer");
      return static_cast<std::uint64_t>(d);
    }
    if (like.is_number_float()) {
      const double d = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing characters");
      return d;
    }
    if (like.is_boolean()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw std::invalid_argument("not a boolean");
    }
  } catch (const std::logic_error&) {
    throw ConfigError("bad value '" + text + "' for " + flag_of(key));
  }
  return text;
}

json parse_flag_value(const std::string& text, const Param& p) {
  if (p.def.is_array()) {
    const json like = p.def.empty() ? json(0.0) : p.def.front();
    json arr = json::array();
    for (const auto& item : split_list(text)) arr.push_back(parse_scalar(item, like, p.key));
    return arr;
  }
  return parse_scalar(text, p.def, p.key);
}

// Checks that a value from a config file has the type of the default.
void check_type(const json& v, const Param& p) {
  const auto num = [](const json& x) { return x.is_number(); };
  bool ok = true;
  if (p.def.is_null() || p.def.is_string()) ok = v.is_string();
  else if (p.def.is_boolean()) ok = v.is_boolean();
  else if (p.def.is_number_unsigned() || p.def.is_number_integer()) ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  else if (p.def.is_number()) ok = num(v);
  else if (p.def.is_array()) ok = v.is_array() && std::all_of(v.begin(), v.end(), num);
  if (!ok) throw ConfigError("config key '" + p.key + "' has the wrong type");
}

json read_config_file(const std::string& path, const std::string& sub) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path + " must hold an object");
  // A manifest carries its resolved config under "config".
  if (j.contains("config") && j.contains("subcommand")) {
    if (j["subcommand"] != sub) throw ConfigError("manifest " + path + " belongs to subcommand " + j["subcommand"].get<std::string>());
    j = j["config"];
  }
  return j;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::ofstream open_out(const fs::path& path, Outputs& outputs) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + path.string());
  outputs.push_back(path.string());
  return os;
}

void write_text(const fs::path& path, const std::string& text, Outputs& outputs) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
  outputs.push_back(path.string());
}

OptimizerKind optimizer_of(const std::string& s) {
  if (s == "sgd") return OptimizerKind::SgdMomentum;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("--optimizer must be sgd or adam");
}

DatasetSpec dataset_of(const json& cfg) {
  try {
    return resolve_dataset(cfg.at("dataset").get<std::string>(), cfg.value("K", std::size_t{2}),
                           cfg.value("dataset_seed", std::uint64_t{0}));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

template <typename T>
std::vector<T> list_of(const json& cfg, const char* key) {
  return cfg.at(key).get<std::vector<T>>();
}

std::string env_workers() {
  if (const char* w = std::getenv("SCANSNAP_WORKERS")) return w;
  return "1";
}

// --- subcommands ------------------------------------------------------------

void run_gen(const json& cfg, Outputs& outputs) {
  const DatasetSpec spec = dataset_of(cfg);
  write_text(cfg["out"].get<std::string>(), dataset_to_json_text(spec), outputs);
  const auto samples = cfg["samples"].get<std::size_t>();
  if (samples == 0) return;
  const auto T = cfg["seq_len"].get<std::size_t>();
  auto os = open_out(cfg["samples_out"].get<std::string>(), outputs);
  os << "sample,class,last,next,context\n";
  Rng rng(cfg["seed"].get<std::uint64_t>());
  const Eigen::VectorXd prior = spec.prior();
  CategoricalSampler pick_class(std::span<const double>(prior.data(), static_cast<std::size_t>(prior.size())));
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t n = pick_class(rng);
    const SequenceSample s = sample_sequence(spec, n, T, rng);
    os << i << ',' << n << ',' << s.last << ',' << s.next << ',';
    for (std::size_t k = 0; k < s.context.size(); ++k) os << (k ? " " : "") << s.context[k];
    os << '\n';
  }
}

void run_train(const json& cfg, Outputs& outputs) {
  const DatasetSpec spec = dataset_of(cfg);
  TrainConfig tc;
  tc.eta_y = cfg["eta_y"];
  tc.eta_z = cfg["eta_z"];
  tc.momentum = cfg["momentum"];
  tc.batch = cfg["batch"];
  tc.seq_len = cfg["seq_len"];
  tc.steps = cfg["steps"];
  tc.seed = cfg["seed"];
  tc.optimizer = optimizer_of(cfg["optimizer"]);
  tc.adam_lr = cfg["adam_lr"];
  tc.grad_norm_threshold = cfg["grad_norm_threshold"];
  tc.loss_threshold = cfg["loss_threshold"];

  auto metrics = open_out(cfg["out"].get<std::string>(), outputs);
  write_metrics_header(metrics);
  std::ofstream snaps;
  const auto snap_path = cfg["snapshots_out"].get<std::string>();
  if (!snap_path.empty()) {
    snaps = open_out(snap_path, outputs);
    write_snapshots_header(snaps);
  }
  TrainObserver obs;
  obs.on_metric = [&](const MetricRow& r) { write_metric_row(metrics, r); };
  if (snaps.is_open()) obs.on_snapshot = [&](const AttentionSnapshot& s) { write_snapshot(snaps, s); };

  TrainResult res;
  try {
    res = train(spec, tc, cfg["run_id"].get<std::string>(), obs);
  } catch (const DivergenceError&) {
    metrics.flush();
    if (snaps.is_open()) snaps.flush();
    throw;
  }
  const auto ckpt = cfg["ckpt"].get<std::string>();
  if (!ckpt.empty()) {
    save_checkpoint(ckpt, res.state, res.rng_state);
    outputs.push_back(ckpt);
  }
  std::cerr << "train: " << res.steps_run << " steps";
  if (res.steps_to_loss_threshold) std::cerr << ", loss threshold reached at step " << *res.steps_to_loss_threshold;
  std::cerr << '\n';
}

void run_limit_sim(const json& cfg, Outputs& outputs) {
  const DatasetSpec spec = dataset_of(cfg);
  LimitConfig lc;
  lc.eta_y = cfg["eta_y"];
  lc.eta_z = cfg["eta_z"];
  lc.steps = cfg["steps"];
  const auto mode = cfg["mode"].get<std::string>();
  if (mode == "analytic") lc.mode = LimitSourceMode::Analytic;
  else if (mode == "coupled") lc.mode = LimitSourceMode::CoupledDecoder;
  else throw ConfigError("--mode must be analytic or coupled");
  const auto scheme = cfg["scheme"].get<std::string>();
  if (scheme == "gain-preserving") lc.scheme = LimitScheme::GainPreserving;
  else if (scheme == "euler") lc.scheme = LimitScheme::Euler;
  else throw ConfigError("--scheme must be gain-preserving or euler");
  lc.record_every = 0;
  const auto every = std::max<std::size_t>(1, cfg["record_every"].get<std::size_t>());

  auto os = open_out(cfg["out"].get<std::string>(), outputs);
  write_limit_header(os);
  const std::vector<Token> rows = spec.last_tokens();
  std::optional<LimitRecord> first;
  const LimitObserver obs = [&](const LimitRecord& r) {
    if (!first) first = r;
    if (r.t % every == 0 || r.t == lc.steps) write_limit_record(os, spec, rows, *first, r);
  };
  try {
    integrate_limit(spec, lc, nullptr, obs);
  } catch (const DivergenceError&) {
    os.flush();
    throw;
  }
}

void run_theory(const json& cfg, Outputs& outputs) {
  TheoryParams p;
  p.M = cfg["M"];
  p.K = cfg["K"];
  p.eta_y = cfg["eta_y"];
  p.eta_z = cfg["eta_z"];
  p.rho0 = cfg["rho0"];
  p.f0_sq = cfg["f0_sq"];
  p.c_prime = cfg["c_prime"];
  if (p.M < 2 || p.K < 1 || p.eta_y <= 0 || p.eta_z <= 0 || p.rho0 <= 0)
    throw ConfigError("theory needs M >= 2, K >= 1 and positive eta_y, eta_z, rho0");
  const double t_max = cfg["t_max"];
  auto os = open_out(cfg["out"].get<std::string>(), outputs);
  write_theory_csv(os, p, log_grid(t_max, cfg["points"].get<std::size_t>()));
}

void run_sweep(const json& cfg, Outputs& outputs) {
  SweepConfig sc;
  const auto ds = cfg["dataset"].get<std::string>();
  if (ds != "syn-medium") sc.dataset = dataset_of(cfg);
  sc.K_grid = list_of<std::size_t>(cfg, "K_grid");
  sc.eta_y_grid = list_of<double>(cfg, "eta_y_grid");
  sc.eta_z_grid = list_of<double>(cfg, "eta_z_grid");
  sc.seeds = list_of<std::uint64_t>(cfg, "seeds");
  sc.steps = cfg["steps"];
  sc.batch = cfg["batch"];
  sc.seq_len = cfg["seq_len"];
  sc.momentum = cfg["momentum"];
  sc.optimizer = optimizer_of(cfg["optimizer"]);
  sc.workers = cfg["workers"];
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const SweepResult r = run_entropy_sweep(sc);
  const fs::path dir = cfg["out_dir"].get<std::string>();
  {
    auto os = open_out(dir / "runs.csv", outputs);
    write_sweep_runs_csv(os, r);
  }
  {
    auto os = open_out(dir / "cells.csv", outputs);
    write_sweep_cells_csv(os, r);
  }
  auto os = open_out(dir / "crossings.csv", outputs);
  write_crossings_csv(os, ratio_crossings(r));
}

void run_consistency(const json& cfg, Outputs& outputs) {
  const DatasetSpec spec = dataset_of(cfg);
  ConsistencyConfig cc;
  cc.eta_y = cfg["eta_y"];
  cc.eta_z = cfg["eta_z"];
  cc.steps = cfg["steps"];
  cc.T_list = list_of<std::size_t>(cfg, "T_list");
  cc.seeds = list_of<std::uint64_t>(cfg, "seeds");
  const double rho0 = cfg["rho0"];
  if (rho0 > 0) cc.rho0 = rho0;
  const ConsistencyReport r = consistency_study(spec, cc);
  auto os = open_out(cfg["out"].get<std::string>(), outputs);
  write_consistency_csv(os, r);
  std::cerr << "consistency: inversions=" << r.inversions
            << " max_bn_rel_deviation=" << fmt_double(r.max_bn_rel_deviation) << '\n';
}

void run_growth(const json& cfg, Outputs& outputs) {
  GrowthCurveConfig fc;
  fc.K = cfg["K"];
  fc.M = cfg["M"];
  fc.eta_z = cfg["eta_z"];
  fc.eta_y_grid = list_of<double>(cfg, "eta_y_grid");
  fc.steps = cfg["steps"];
  fc.ct_mass = cfg["ct_mass"];
  fc.c_prime = cfg["c_prime"];
  const auto curves = run_growth_curves(fc);
  const fs::path dir = cfg["out_dir"].get<std::string>();
  {
    auto os = open_out(dir / "growth.csv", outputs);
    write_growth_csv(os, curves, cfg["stride"].get<std::size_t>());
  }
  auto os = open_out(dir / "growth_markers.csv", outputs);
  write_growth_markers_csv(os, curves);
}

fs::path beside(const json& cfg, const char* key) {
  return fs::path(cfg.at(key).get<std::string>() + ".manifest.json");
}
fs::path inside(const json& cfg, const char* key) {
  return fs::path(cfg.at(key).get<std::string>()) / "manifest.json";
}

std::vector<Subcommand> subcommands() {
  const auto U = [](std::uint64_t v) { return json(v); };
  return {
      {"gen",
       "Write a dataset file and optionally sample sequences from it",
       {{"dataset", nullptr, "syn-small, syn-medium or a dataset file"},
        {"K", U(2), "classes for syn-medium"},
        {"dataset_seed", U(0), "seed for syn-medium"},
        {"out", "dataset.json", "dataset file to write"},
        {"samples", U(0), "number of sequences to sample"},
        {"seq_len", U(128), "sequence length T"},
        {"seed", U(0), "sampling seed"},
        {"samples_out", "samples.csv", "sampled sequences CSV"}},
       run_gen,
       [](const json& c) { return beside(c, "out"); }},
      {"train",
       "Mini-batch training of the 1-layer model",
       {{"dataset", nullptr, "syn-small, syn-medium or a dataset file"},
        {"K", U(2), "classes for syn-medium"},
        {"dataset_seed", U(0), "seed for syn-medium"},
        {"eta_y", 1.0, "decoder learning rate"},
        {"eta_z", 1.0, "attention learning rate"},
        {"momentum", 0.9, "heavy-ball momentum"},
        {"batch", U(128), "batch size"},
        {"seq_len", U(128), "sequence length T"},
        {"steps", U(1000), "maximum steps"},
        {"seed", U(0), "training seed"},
        {"optimizer", "sgd", "sgd or adam"},
        {"adam_lr", 0.1, "Adam learning rate"},
        {"grad_norm_threshold", 0.0, "stop once the gradient norm falls below (0 disables)"},
        {"loss_threshold", -1.0, "loss level to report (negative: 0.1 ln M)"},
        {"run_id", "run", "run identifier in the metrics CSV"},
        {"out", "metrics.csv", "metrics CSV"},
        {"snapshots_out", "", "attention snapshot CSV (empty: none)"},
        {"ckpt", "", "checkpoint file (empty: none)"}},
       run_train,
       [](const json& c) { return beside(c, "out"); }},
      {"limit-sim",
       "Integrate the long-sequence limit dynamics of z",
       {{"dataset", nullptr, "syn-small, syn-medium or a dataset file"},
        {"K", U(2), "classes for syn-medium"},
        {"dataset_seed", U(0), "seed for syn-medium"},
        {"eta_y", 1.0, "decoder learning rate"},
        {"eta_z", 1.0, "attention learning rate"},
        {"steps", U(1000), "integration steps"},
        {"mode", "analytic", "analytic or coupled"},
        {"scheme", "gain-preserving", "gain-preserving or euler"},
        {"record_every", U(1), "write every k-th step"},
        {"out", "traj.csv", "trajectory CSV"}},
       run_limit_sim,
       [](const json& c) { return beside(c, "out"); }},
      {"theory",
       "Closed-form curves h, h*, gamma, Gamma, B_n and growth bounds",
       {{"M", U(1000), "vocabulary size"},
        {"K", U(10), "number of classes"},
        {"eta_y", 0.5, "decoder learning rate"},
        {"eta_z", 0.5, "attention learning rate"},
        {"rho0", 1.0, "initial attention scale"},
        {"f0_sq", 0.5, "squared initial attention weight for the lower bound"},
        {"c_prime", 1.0, "constant in the phase-transition time"},
        {"t_max", 1e5, "largest t"},
        {"points", U(200), "log-spaced points in [1, t_max]"},
        {"out", "theory.csv", "output CSV"}},
       run_theory,
       [](const json& c) { return beside(c, "out"); }},
      {"sweep",
       "Entropy sweep over K, eta_y, eta_z and seeds",
       {{"dataset", "syn-medium", "syn-medium (built per K and seed) or a dataset file"},
        {"K_grid", json::array({U(2), U(5), U(10)}), "comma-separated K values"},
        {"eta_y_grid", json::array({1.0}), "comma-separated eta_y values"},
        {"eta_z_grid", json::array({1.0}), "comma-separated eta_z values"},
        {"seeds", json::array({U(0), U(1), U(2), U(3), U(4), U(5), U(6), U(7), U(8), U(9)}), "comma-separated seeds"},
        {"steps", U(1000), "steps per run"},
        {"batch", U(128), "batch size"},
        {"seq_len", U(128), "sequence length T"},
        {"momentum", 0.9, "heavy-ball momentum"},
        {"optimizer", "sgd", "sgd or adam"},
        {"workers", U(1), "parallel runs (default from SCANSNAP_WORKERS)"},
        {"out_dir", "results", "output directory"}},
       run_sweep,
       [](const json& c) { return inside(c, "out_dir"); }},
      {"consistency",
       "Finite-T training against the limit dynamics and the closed form",
       {{"dataset", nullptr, "syn-small, syn-medium or a dataset file"},
        {"K", U(2), "classes for syn-medium"},
        {"dataset_seed", U(0), "seed for syn-medium"},
        {"eta_y", 1.0, "decoder learning rate"},
        {"eta_z", 1.0, "attention learning rate"},
        {"steps", U(200), "steps"},
        {"T_list", json::array({U(100), U(1000), U(10000), U(100000)}), "comma-separated sequence lengths"},
        {"seeds", json::array({U(0), U(1), U(2), U(3), U(4)}), "comma-separated seeds"},
        {"rho0", 0.0, "initial attention scale (<= 0: derived from the dataset)"},
        {"out", "consistency.csv", "output CSV"}},
       run_consistency,
       [](const json& c) { return beside(c, "out"); }},
      {"growth",
       "Growth-factor curves on a single-common-token spec",
       {{"K", U(10), "number of classes"},
        {"M", U(1000), "vocabulary size"},
        {"eta_z", 0.5, "attention learning rate"},
        {"eta_y_grid", json::array({0.3, 0.5, 1.0}), "comma-separated eta_y values"},
        {"steps", U(8000), "integration steps"},
        {"ct_mass", 0.3, "probability of the common token"},
        {"c_prime", 1.0, "constant in the phase-transition time"},
        {"stride", U(10), "write every k-th step"},
        {"out_dir", "growth", "output directory"}},
       run_growth,
       [](const json& c) { return inside(c, "out_dir"); }},
  };
}

std::string top_usage(const std::vector<Subcommand>& subs) {
  std::ostringstream os;
  os << "usage: scansnap <subcommand> [--config file.json] [flags]\n\nsubcommands:\n";
  for (const auto& s : subs) os << "  " << s.name << std::string(14 - s.name.size(), ' ') << s.description << '\n';
  os << "\nRun 'scansnap <subcommand> --help' for its flags.\n";
  return os.str();
}

void write_manifest(const fs::path& path, const std::string& sub, const json& cfg, const std::string& start,
                    const Outputs& outputs, const std::string& status) {
  json m;
  m["subcommand"] = sub;
  m["config"] = cfg;
  m["seed"] = cfg.contains("seed") ? cfg["seed"] : (cfg.contains("seeds") ? cfg["seeds"] : json(nullptr));
  m["tool_version"] = kToolVersion;
  m["schema_version"] = kSchemaVersion;
  m["start_time"] = start;
  m["end_time"] = utc_now();
  m["outputs"] = outputs;
  m["status"] = status;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, m.dump(2) + "\n");
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  const auto subs = subcommands();
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    (args.empty() ? std::cerr : std::cout) << top_usage(subs);
    return args.empty() ? kConfigError : kOk;
  }
  const auto it = std::find_if(subs.begin(), subs.end(), [&](const Subcommand& s) { return s.name == args[0]; });
  if (it == subs.end()) {
    std::cerr << "unknown subcommand '" << args[0] << "'\n" << top_usage(subs);
    return kConfigError;
  }
  const Subcommand& sub = *it;

  CLI::App app(sub.description, "scansnap " + sub.name);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file or manifest; flags override its values");
  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> opts;
  for (const auto& p : sub.params) {
    std::string help = p.help;
    if (p.def.is_null()) help += " (required)";
    else if (p.key == "workers") help += " [" + env_workers() + "]";
    else help += " [" + (p.def.is_string() ? p.def.get<std::string>() : p.def.dump()) + "]";
    opts[p.key] = app.add_option(flag_of(p.key), raw[p.key], help);
  }

  std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kConfigError;
  }

  json cfg;
  std::optional<fs::path> manifest;
  const std::string start = utc_now();
  Outputs outputs;
  try {
    json file = config_path.empty() ? json::object() : read_config_file(config_path, sub.name);
    for (const auto& [k, v] : file.items()) {
      const auto pit = std::find_if(sub.params.begin(), sub.params.end(), [&](const Param& p) { return p.key == k; });
      if (pit == sub.params.end()) throw ConfigError("unknown config key '" + k + "'");
      check_type(v, *pit);
    }
    for (const auto& p : sub.params) {
      if (opts[p.key]->count() > 0) cfg[p.key] = parse_flag_value(raw[p.key], p);
      else if (file.contains(p.key)) cfg[p.key] = file[p.key];
      else if (p.key == "workers") cfg[p.key] = parse_flag_value(env_workers(), p);
      else if (p.def.is_null()) throw ConfigError("missing required flag " + flag_of(p.key));
      else cfg[p.key] = p.def;
    }
    manifest = sub.manifest_path(cfg);
    sub.run(cfg, outputs);
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    if (manifest) write_manifest(*manifest, sub.name, cfg, start, outputs, "diverged");
    return kDiverged;
  } catch (const std::exception& e) {
    // Config errors and invalid parameters surfacing from the library.
    std::cerr << "error: " << e.what() << '\n';
    if (manifest) write_manifest(*manifest, sub.name, cfg, start, outputs, "error");
    return kConfigError;
  }
  write_manifest(*manifest, sub.name, cfg, start, outputs, "ok");
  return kOk;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace scansnap::cli
