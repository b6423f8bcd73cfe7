#include <chrono>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kickpend/action_angle.hpp"
#include "kickpend/core.hpp"
#include "kickpend/energymap.hpp"
#include "kickpend/io.hpp"
#include "kickpend/koopman.hpp"
#include "kickpend/poincare.hpp"

using namespace kickpend;

namespace {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Everything a run needs; config file and flags both write into this, flags
/// last (an absent flag leaves the field untouched).
struct RunConfig {
  Params params;
  IntegratorOptions integrator;
  Window window{-pi, pi, -3.0, 3.0};
  std::size_t n_theta = 400, n_p = 400;
  std::string observable = "hamiltonian";
  double lambda_re = 0.0, lambda_im = 0.0;
  double T_max = 0.0;        // 0 = per-kind default
  bool stop_early = true;    // sweeps: stop each cell at its first converged checkpoint
  std::string out = ".";
  unsigned workers = 1;  // 0 = one per hardware thread
  std::uint64_t seed = 0;
};

double num_field(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  return j.get<double>();
}

void apply_section(const nlohmann::json& section, const std::string& name,
                   const std::map<std::string, double*>& fields) {
  if (!section.is_object()) throw ConfigError("config: '" + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("config: unknown key '" + name + "." + key + "'");
    *it->second = num_field(value, name + "." + key);
  }
}

void apply_config(const std::string& path, RunConfig& cfg) {
  nlohmann::json j;
  try {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad JSON in " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  double n_theta = double(cfg.n_theta), n_p = double(cfg.n_p);
  double max_events = double(cfg.integrator.max_events);
  double workers = double(cfg.workers), seed = double(cfg.seed);

  for (const auto& [key, value] : j.items()) {
    if (key == "params") {
      apply_section(value, key,
                    {{"mu1", &cfg.params.mu1},
                     {"mu2", &cfg.params.mu2},
                     {"theta_star", &cfg.params.theta_star},
                     {"k", &cfg.params.k}});
    } else if (key == "integrator") {
      apply_section(value, key,
                    {{"rel_tol", &cfg.integrator.rel_tol},
                     {"abs_tol", &cfg.integrator.abs_tol},
                     {"max_step", &cfg.integrator.max_step},
                     {"event_time_tol", &cfg.integrator.event_time_tol},
                     {"grazing_p_tol", &cfg.integrator.grazing_p_tol},
                     {"max_time", &cfg.integrator.max_time},
                     {"max_events", &max_events}});
    } else if (key == "window") {
      apply_section(value, key,
                    {{"theta_min", &cfg.window.theta_min},
                     {"theta_max", &cfg.window.theta_max},
                     {"p_min", &cfg.window.p_min},
                     {"p_max", &cfg.window.p_max}});
    } else if (key == "resolution") {
      apply_section(value, key, {{"n_theta", &n_theta}, {"n_p", &n_p}});
    } else if (key == "lambda") {
      apply_section(value, key, {{"re", &cfg.lambda_re}, {"im", &cfg.lambda_im}});
    } else if (key == "observable") {
      if (!value.is_string()) throw ConfigError("config: 'observable' must be a string");
      cfg.observable = value.get<std::string>();
    } else if (key == "out") {
      if (!value.is_string()) throw ConfigError("config: 'out' must be a string");
      cfg.out = value.get<std::string>();
    } else if (key == "T_max") {
      cfg.T_max = num_field(value, key);
    } else if (key == "stop_early") {
      if (!value.is_boolean()) throw ConfigError("config: 'stop_early' must be a boolean");
      cfg.stop_early = value.get<bool>();
    } else if (key == "workers") {
      workers = num_field(value, key);
    } else if (key == "seed") {
      seed = num_field(value, key);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  cfg.n_theta = std::size_t(n_theta);
  cfg.n_p = std::size_t(n_p);
  cfg.integrator.max_events = std::int64_t(max_events);
  cfg.workers = unsigned(workers);
  cfg.seed = std::uint64_t(seed);
}

Observable observable_from(const std::string& name) {
  if (name == "hamiltonian") return Observable::Hamiltonian;
  if (name == "signed-hamiltonian") return Observable::SignedHamiltonian;
  if (name == "g1") return Observable::G1;
  if (name == "g2") return Observable::G2;
  throw ConfigError("unknown observable '" + name + "'");
}

unsigned resolve_workers(unsigned w) {
  if (w > 0) return w;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out);
  return (std::filesystem::path(cfg.out) / name).string();
}

void print_status_counts(const GridField& f) {
  for (auto s : {CellStatus::Ok, CellStatus::Converged, CellStatus::Truncated,
                 CellStatus::Diverged, CellStatus::Escaped, CellStatus::Unsettled,
                 CellStatus::Error}) {
    std::size_t n = 0;
    for (auto c : f.status)
      if (c == s) ++n;
    if (n > 0) std::cout << "status " << to_string(s) << ": " << n << "\n";
  }
}

bool all_cells_error(const GridField& f) {
  for (auto s : f.status)
    if (s != CellStatus::Error) return false;
  return !f.status.empty();
}

int run_simulate(const RunConfig& cfg, double theta0, double p0, double t) {
  cfg.params.validate();
  cfg.integrator.validate();
  const Trajectory traj = flow({theta0, p0}, t, cfg.params, cfg.integrator);
  write_trajectory_csv(traj, cfg.params, out_path(cfg, "trajectory.csv"));
  write_events_csv(traj.events, out_path(cfg, "events.csv"));
  std::cout << "events: " << traj.events.size() << "\n";
  std::cout << "final H: " << format_float(hamiltonian(traj.y.back(), cfg.params)) << "\n";
  return 0;
}

int run_sweep(const RunConfig& cfg, SweepKind kind, double target_p1, double basin_tol) {
  cfg.params.validate();
  cfg.integrator.validate();
  SweepSpec spec;
  spec.kind = kind;
  spec.observable = observable_from(cfg.observable);
  spec.lambda = {cfg.lambda_re, cfg.lambda_im};
  spec.T_max = cfg.T_max;
  spec.stop_early = cfg.stop_early;
  spec.target_p1 = target_p1;
  spec.basin_tol = basin_tol;

  const auto start = std::chrono::steady_clock::now();
  const GridField f = grid_sweep(spec, cfg.window, {cfg.n_theta, cfg.n_p}, cfg.params,
                                 cfg.integrator, resolve_workers(cfg.workers));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (kind == SweepKind::Basin) {
    write_basin_csv(f, out_path(cfg, "basin.csv"));
    write_sidecar_json(f, wall, out_path(cfg, "basin.json"));
    std::cout << "wrote " << out_path(cfg, "basin.csv") << "\n";
  } else if (kind == SweepKind::DampedEigen) {
    GridField part = f;
    part.meta.emplace_back("component", "modulus");
    for (auto& v : part.values) v = {std::abs(v), 0.0};
    write_gridfield_csv(part, out_path(cfg, "damped-eig_modulus.csv"));
    write_sidecar_json(part, wall, out_path(cfg, "damped-eig_modulus.json"));
    part = f;
    part.meta.emplace_back("component", "phase");
    for (auto& v : part.values) v = {std::arg(v), 0.0};
    write_gridfield_csv(part, out_path(cfg, "damped-eig_phase.csv"));
    write_sidecar_json(part, wall, out_path(cfg, "damped-eig_phase.json"));
    std::cout << "wrote " << out_path(cfg, "damped-eig_modulus.csv") << "\n";
    std::cout << "wrote " << out_path(cfg, "damped-eig_phase.csv") << "\n";
  } else {
    const std::string stem = kind == SweepKind::Laplace ? "laplace" : "timeavg";
    write_gridfield_csv(f, out_path(cfg, stem + ".csv"));
    write_sidecar_json(f, wall, out_path(cfg, stem + ".json"));
    std::cout << "wrote " << out_path(cfg, stem + ".csv") << "\n";
  }
  print_status_counts(f);
  if (all_cells_error(f)) {
    std::cerr << "sweep failed: every cell errored\n";
    return 3;
  }
  return 0;
}

int run_analyze_poincare(const RunConfig& cfg, double p0, int n) {
  cfg.params.validate();
  const double p_cr = p_critical(cfg.params);
  const auto iterates = iterate_T({p0, false}, n, cfg.params);
  const auto settle = settle_index(p0, cfg.params);

  std::string body = "{\n  \"p_cr\": " + format_float(p_cr) + ",\n";
  body += "  \"p0\": " + format_float(p0) + ",\n";
  body += "  \"iterates\": [";
  for (std::size_t i = 0; i < iterates.size(); ++i) {
    if (i) body += ", ";
    body += iterates[i].is_gamma ? std::string("null") : format_float(iterates[i].p);
  }
  body += "],\n  \"settle\": {\"kind\": \"";
  switch (settle.kind) {
    case SettleResult::Kind::Settled: body += "settled"; break;
    case SettleResult::Kind::Gamma: body += "gamma"; break;
    case SettleResult::Kind::Unsettled: body += "unsettled"; break;
  }
  body += "\", \"n\": " + std::to_string(settle.n) + "}\n}\n";

  const auto path = out_path(cfg, "poincare.json");
  {
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw IoError("cannot open for writing: " + path);
    outf << body;
    if (!outf) throw IoError("write failed: " + path);
  }
  std::cout << "wrote " << path << "\n";
  return 0;
}

int run_analyze_dissipation(const RunConfig& cfg, double h_min, double h_max, int n_samples) {
  cfg.params.validate();
  cfg.integrator.validate();
  const auto H_values = linspace(h_min, h_max, std::size_t(n_samples));
  const auto samples =
      collect_dissipation_samples(H_values, cfg.params, cfg.integrator, resolve_workers(cfg.workers));
  DissipationReport report;
  report.k = cfg.params.k;
  report.samples = samples;
  report.model = fit_retention(samples, cfg.params);
  const auto path = out_path(cfg, "dissipation.json");
  write_dissipation_json(report, path);
  std::cout << "wrote " << path << "\n";
  std::cout << "r: " << format_float(report.model.r) << "\n";
  std::cout << "fit residual: " << format_float(report.model.fit_residual) << "\n";
  return 0;
}

int run_analyze_energy_map(const RunConfig& cfg, std::optional<double> delta, double h_min,
                           double h_max, int n_samples) {
  cfg.params.validate();
  cfg.integrator.validate();
  DissipationModel model;
  if (delta) {
    model.r = 1.0 - *delta;
    model.delta = *delta;
  } else {
    const auto samples = collect_dissipation_samples(linspace(h_min, h_max, std::size_t(n_samples)),
                                                     cfg.params, cfg.integrator,
                                                     resolve_workers(cfg.workers));
    model = fit_retention(samples, cfg.params);
  }

  EnergyMapReport report;
  report.r = model.r;
  const auto [H_fp, slope] = fixed_point(model, cfg.params);
  report.H_fp = H_fp;
  report.slope = slope;
  const double H0 = h_minus(cfg.params) / model.r;
  for (double H : linspace(H0, h_plus(cfg.params), 21))
    report.escape_table.emplace_back(H, escape_count(H, model, cfg.params));

  const auto path = out_path(cfg, "energy_map.json");
  write_energy_map_json(report, path);
  std::cout << "wrote " << path << "\n";
  std::cout << "H_fp: " << format_float(report.H_fp) << "\n";
  std::cout << "slope: " << format_float(report.slope) << "\n";
  return 0;
}

int run_analyze_spectrum(const RunConfig& cfg, const std::vector<double>& cycles, int J, int M) {
  cfg.params.validate();
  const auto obs = make_observable(observable_from(cfg.observable), cfg.params);
  FourierTable table;
  for (double p1 : cycles) table.rows.push_back(fourier_coefficients(obs, p1, J, M, cfg.params));
  const auto path = out_path(cfg, "spectrum.json");
  write_fourier_json(table, path);
  std::cout << "wrote " << path << "\n";
  return 0;
}

void add_param_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--mu1", cfg.params.mu1, "kick strength [rad/s per unit p]");
  cmd->add_option("--mu2", cfg.params.mu2, "natural frequency sqrt(g/l) [rad/s]");
  cmd->add_option("--theta-star", cfg.params.theta_star, "guard angle [rad]");
  cmd->add_option("--k", cfg.params.k, "viscous damping coefficient");
}

void add_integrator_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--rel-tol", cfg.integrator.rel_tol, "integrator relative tolerance");
  cmd->add_option("--abs-tol", cfg.integrator.abs_tol, "integrator absolute tolerance");
  cmd->add_option("--max-time", cfg.integrator.max_time, "search horizon for settling/crossings");
  cmd->add_option("--max-events", cfg.integrator.max_events, "kick budget before divergence");
}

void add_window_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--theta-min", cfg.window.theta_min, "window lower angle [rad]");
  cmd->add_option("--theta-max", cfg.window.theta_max, "window upper angle [rad]");
  cmd->add_option("--p-min", cfg.window.p_min, "window lower momentum");
  cmd->add_option("--p-max", cfg.window.p_max, "window upper momentum");
  cmd->add_option("--n-theta", cfg.n_theta, "grid cells along theta");
  cmd->add_option("--n-p", cfg.n_p, "grid cells along p");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;

  // config file first, so flags parsed below override it
  try {
    for (int i = 1; i < argc; ++i) {
      const std::string arg = argv[i];
      if (arg == "--config" && i + 1 < argc) {
        apply_config(argv[i + 1], cfg);
      } else if (arg.rfind("--config=", 0) == 0) {
        apply_config(arg.substr(9), cfg);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  CLI::App app{"kicked-pendulum simulation and Koopman analysis toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override it)");
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--workers", cfg.workers, "worker threads for sweeps (0 = one per core)");
  app.add_option("--seed", cfg.seed, "RNG seed, reserved for random test-point generation");

  double theta0 = 0.0, p0 = 0.0, duration = 0.0;
  auto* sim = app.add_subcommand("simulate", "integrate one hybrid trajectory");
  sim->fallthrough();
  sim->add_option("--theta0", theta0, "initial angle [rad]");
  sim->add_option("--p0", p0, "initial momentum");
  sim->add_option("--t", duration, "duration [s]")->required()->check(CLI::PositiveNumber);
  add_param_options(sim, cfg);
  add_integrator_options(sim, cfg);

  auto* sweep = app.add_subcommand("sweep", "grid sweeps over initial conditions");
  sweep->require_subcommand(1);
  sweep->fallthrough();
  double target_p1 = 0.7, basin_tol = 1e-2;
  bool full_horizon = false;
  std::map<std::string, SweepKind> sweep_kinds = {
      {"timeavg", SweepKind::TimeAverage},
      {"laplace", SweepKind::Laplace},
      {"basin", SweepKind::Basin},
      {"damped-eig", SweepKind::DampedEigen},
  };
  for (auto& [name, kind] : sweep_kinds) {
    auto* sub = sweep->add_subcommand(name);
    sub->fallthrough();
    add_param_options(sub, cfg);
    add_integrator_options(sub, cfg);
    add_window_options(sub, cfg);
    sub->add_option("--T-max", cfg.T_max, "averaging horizon (0 = per-kind default)");
    if (kind != SweepKind::Basin)
      sub->add_flag("--full-horizon", full_horizon,
                    "run every cell to T-max instead of stopping at convergence");
    if (kind == SweepKind::TimeAverage || kind == SweepKind::Laplace)
      sub->add_option("--obs", cfg.observable, "observable to average")
          ->check(CLI::IsMember({"hamiltonian", "signed-hamiltonian", "g1", "g2"}));
    if (kind == SweepKind::Laplace) {
      sub->add_option("--lambda-re", cfg.lambda_re, "Laplace eigenvalue, real part");
      sub->add_option("--lambda-im", cfg.lambda_im, "Laplace eigenvalue, imaginary part");
    }
    if (kind == SweepKind::Basin) {
      sub->add_option("--target-p1", target_p1, "cycle label to match");
      sub->add_option("--basin-tol", basin_tol, "label match tolerance");
    }
  }

  auto* analyze = app.add_subcommand("analyze", "single-shot analyses");
  analyze->require_subcommand(1);
  analyze->fallthrough();

  double an_p0 = 3.3;
  int an_n = 10;
  auto* poin = analyze->add_subcommand("poincare", "iterate the pre-kick momentum return map");
  poin->fallthrough();
  poin->add_option("--p0", an_p0, "initial pre-kick momentum")->required();
  poin->add_option("--n", an_n, "number of iterates")->check(CLI::NonNegativeNumber);
  add_param_options(poin, cfg);

  double h_min = 0.70, h_max = 0.95;
  int n_samples = 11;
  auto* diss = analyze->add_subcommand("dissipation", "measure d(H) over one traverse and fit rH");
  diss->fallthrough();
  diss->add_option("--h-min", h_min, "lowest sampled energy");
  diss->add_option("--h-max", h_max, "highest sampled energy");
  diss->add_option("--n-samples", n_samples, "sample count")->check(CLI::PositiveNumber);
  add_param_options(diss, cfg);
  add_integrator_options(diss, cfg);

  double delta_flag = 0.0;
  auto* emap = analyze->add_subcommand("energy-map", "fixed point and escape table of u = f(rH)");
  emap->fallthrough();
  auto* delta_opt =
      emap->add_option("--delta", delta_flag, "energy loss fraction (otherwise measured from k)");
  emap->add_option("--h-min", h_min, "lowest sampled energy (measured mode)");
  emap->add_option("--h-max", h_max, "highest sampled energy (measured mode)");
  emap->add_option("--n-samples", n_samples, "sample count (measured mode)")
      ->check(CLI::PositiveNumber);
  add_param_options(emap, cfg);
  add_integrator_options(emap, cfg);

  std::vector<double> cycles{0.5};
  int J = 256, M = 4096;
  auto* spec = analyze->add_subcommand("spectrum", "Fourier data of an observable along cycles");
  spec->fallthrough();
  spec->add_option("--p1", cycles, "cycle labels in (0,1)")->delimiter(',');
  spec->add_option("--J", J, "truncation order")->check(CLI::PositiveNumber);
  spec->add_option("--M", M, "phase samples per cycle")->check(CLI::PositiveNumber);
  spec->add_option("--obs", cfg.observable, "observable to expand")
      ->check(CLI::IsMember({"hamiltonian", "signed-hamiltonian", "g1", "g2"}));
  add_param_options(spec, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) return run_simulate(cfg, theta0, p0, duration);
    if (sweep->parsed())
      for (auto& [name, kind] : sweep_kinds)
        if (sweep->get_subcommand(name)->parsed()) {
          if (full_horizon) cfg.stop_early = false;
          return run_sweep(cfg, kind, target_p1, basin_tol);
        }
    if (poin->parsed()) return run_analyze_poincare(cfg, an_p0, an_n);
    if (diss->parsed()) return run_analyze_dissipation(cfg, h_min, h_max, n_samples);
    if (emap->parsed()) {
      std::optional<double> delta;
      if (delta_opt->count() > 0) delta = delta_flag;
      return run_analyze_energy_map(cfg, delta, h_min, h_max, n_samples);
    }
    if (spec->parsed()) return run_analyze_spectrum(cfg, cycles, J, M);
  } catch (const InsufficientSamples& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
  return 2;
}
