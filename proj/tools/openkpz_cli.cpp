#include <CLI11.hpp>
#include <Eigen/Core>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "openkpz/bounds.hpp"
#include "openkpz/cole_hopf.hpp"
#include "openkpz/io.hpp"
#include "openkpz/kernels.hpp"
#include "openkpz/operators.hpp"
#include "openkpz/she_ref.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace openkpz;

namespace {

// Thrown by a command whose check did not hold; maps to exit 1.
struct CheckFailed {};

struct Context {
  std::string command;
  json config;          // the experiment config as read, after flag overrides
  fs::path config_dir;  // relative paths inside the config resolve against this
  fs::path out;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::vector<int> Ns;
  std::vector<std::string> ids;
  std::string hash;
  std::vector<std::string> artifacts;

  void emit(const std::string& name, const std::string& body) {
    write_atomic(out / name, with_header(body, hash, seed));
    artifacts.push_back(name);
  }
  void emit_json(const std::string& name, json j) {
    j["config_hash"] = hash;
    j["seed"] = seed;
    write_atomic(out / name, j.dump(2) + "\n");
    artifacts.push_back(name);
  }
};

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InputError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

ModelParams model_of(const Context& c) {
  if (!c.config.contains("model")) throw InputError("missing field 'model'");
  const json& m = c.config.at("model");
  ModelParams p;
  if (m.is_string()) {
    fs::path path = m.get<std::string>();
    if (path.is_relative()) path = c.config_dir / path;
    p = read_json_file(path).get<ModelParams>();
  } else {
    p = m.get<ModelParams>();
  }
  return p;
}

template <class T>
T field_or(const Context& c, const char* key, T fallback) {
  if (!c.config.contains(key)) return fallback;
  try {
    return c.config.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("bad type for '") + key + "': " + e.what());
  }
}

std::vector<int> sweep_Ns(const Context& c, const ModelParams& p) {
  if (!c.Ns.empty()) return c.Ns;
  return field_or<std::vector<int>>(c, "N_list", {p.N});
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

InitialKind initial_of(const Context& c) {
  const auto s = field_or<std::string>(c, "initial", "near_stationary");
  if (s == "near_stationary") return InitialKind::near_stationary;
  if (s == "narrow_wedge") return InitialKind::narrow_wedge;
  throw InputError("unknown initial kind '" + s + "'");
}

void cmd_derive(Context& c) {
  const ModelParams p = model_of(c);
  json out = json::array();
  for (int N : sweep_Ns(c, p)) out.push_back(derive_coefficients(with_N(p, N)));
  c.emit_json("derived.json", {{"derived", out}});
}

void cmd_solve_boundary(Context& c) {
  const ModelParams p = model_of(c);
  json rows = json::array();
  bool ok = true;
  for (int N : sweep_Ns(c, p)) {
    const Model md = Model::build(with_N(p, N));
    const double res = boundary_residual(md.params, md.derived, md.boundary);
    json row{{"N", N}, {"beta", md.boundary}, {"residual", res}};
    try {
      const BoundaryCoefficients mb = matched_boundary_coefficients(md);
      row["matched_beta"] = mb;
      row["matched_drift_residual"] = matched_drift_residual(md, mb);
    } catch (const ModelError& e) {
      row["matched_error"] = e.what();
    }
    ok = ok && res <= 1e-12;
    rows.push_back(row);
  }
  c.emit_json("boundary.json", {{"boundary", rows}, {"pass", ok}});
  if (!ok) throw CheckFailed{};
}

void cmd_validate(Context& c) {
  const ModelParams p = model_of(c);
  ValidationKnobs k;
  k.C = field_or(c, "C", k.C);
  k.beta_c = field_or(c, "beta_c", k.beta_c);
  json rows = json::array();
  bool ok = true;
  for (int N : sweep_Ns(c, p)) {
    const ModelParams q = with_N(p, N);
    const DerivedCoefficients d = derive_coefficients(q, true);
    BoundaryCoefficients b;
    json row{{"N", N}};
    try {
      b = solve_boundary_coefficients(q, d);
      const ValidationReport r = validate_assumptions(q, d, b, k);
      row["report"] = r;
      ok = ok && r.ok();
    } catch (const ModelError& e) {
      row["error"] = e.what();
      ok = false;
    }
    rows.push_back(row);
  }
  c.emit_json("validation.json", {{"validation", rows}, {"pass", ok}});
  if (!ok) throw CheckFailed{};
}

void cmd_simulate(Context& c) {
  const ModelParams p = model_of(c);
  const Model md = Model::build(p);
  const double T = field_or(c, "T", p.T_f);
  Rng rng = make_stream(c.seed, 0);
  const Configuration cfg0 = sample_initial(p.N, initial_of(c), rng);
  HeightState hs = init_height(cfg0, md.derived.lambda_N, md.derived.nu_matched);
  const Trajectory tr = simulate(md, cfg0, T, rng, [&](double t, const EventDescriptor& e,
                                                       const ParticleState& st) {
    advance_time(hs, t);
    update_on_event(hs, st.cfg, e);
  });
  Configuration cur = cfg0;
  for (const auto& te : tr.events) apply_event(cur, te.second);
  advance_time(hs, T);
  check_and_repair(hs, cur);
  std::ostringstream ev, snap, z;
  write_events_jsonl(ev, tr);
  write_snapshot_csv(snap, T, cur, true);
  write_z_csv(z, hs, true);
  write_atomic(c.out / "events.jsonl",
               json{{"config_hash", c.hash}, {"seed", c.seed}}.dump() + "\n" + ev.str());
  c.artifacts.push_back("events.jsonl");
  c.emit("snapshot.csv", snap.str());
  c.emit("z.csv", z.str());
  c.emit_json("simulate.json", {{"events", tr.events.size()},
                                {"creations", tr.creations},
                                {"annihilations", tr.annihilations},
                                {"T", T}});
}

void cmd_drift_check(Context& c) {
  const ModelParams p = model_of(c);
  const Model md = Model::build(p);
  const long samples = field_or(c, "samples", 200L);
  const double tol = 1e-10;
  Rng rng = make_stream(c.seed, 0);
  std::ostringstream csv;
  csv << "sample,x,exact,formula,relative\n";
  double worst = 0.0;
  const bool exhaustive = p.N <= 12;
  const long count = exhaustive ? (1L << p.N) : samples;
  for (long s = 0; s < count; ++s) {
    ParticleState st;
    if (exhaustive) {
      st.cfg = Configuration::filled(p.N, -1);
      for (int y = 1; y <= p.N; ++y)
        if ((s >> (y - 1)) & 1) st.cfg.flip(y);
    } else {
      st.cfg = sample_initial(p.N, InitialKind::near_stationary, rng);
    }
    for (const DriftReport& r : drift_check(md, st, md.derived.nu_N)) {
      const double rel = std::abs(r.residual) / (1.0 + std::abs(r.exact_drift));
      worst = std::max(worst, rel);
      csv << s << ',' << r.x << ',' << csv_number(r.exact_drift) << ','
          << csv_number(r.formula_drift) << ',' << csv_number(rel) << '\n';
    }
  }
  c.emit("drift.csv", csv.str());
  c.emit_json("drift.json", {{"configurations", count},
                             {"exhaustive", exhaustive},
                             {"max_relative", worst},
                             {"pass", worst <= tol}});
  if (worst > tol) throw CheckFailed{};
}

void cmd_operators(Context& c) {
  const ModelParams p = model_of(c);
  json rows = json::array();
  std::ostringstream csv;
  csv << "N,x,pi\n";
  for (int N : sweep_Ns(c, p)) {
    const DerivedCoefficients d = derive_coefficients(with_N(p, N), true);
    const LatticeOperator L = build_L_lap(d, p.A_minus, p.A_plus);
    const InvariantMeasure im = invariant_measure(build_L_lap(d));
    const MaxPrincipleReport mp = max_principle_check(im.pi, p.m);
    for (int x = 0; x <= N; ++x) csv << N << ',' << x << ',' << csv_number(im.pi[x]) << '\n';
    rows.push_back({{"N", N},
                    {"row_sum_max", (L.M.rowwise().sum()).cwiseAbs().maxCoeff()},
                    {"pi_residual", im.residual},
                    {"pi_min", im.pi.minCoeff()},
                    {"pi_ratio", mp.ratio},
                    {"max_in_cluster", mp.max_in_cluster},
                    {"min_in_cluster", mp.min_in_cluster},
                    {"pi_symmetry", std::abs(im.pi[0] - im.pi[N])}});
  }
  c.emit("pi.csv", csv.str());
  c.emit_json("operators.json", {{"operators", rows}});
}

void cmd_kernels(Context& c) {
  const ModelParams p = model_of(c);
  const auto times = field_or<std::vector<double>>(c, "times", {1e-3, 1e-2, 1e-1});
  const DerivedCoefficients d = derive_coefficients(p, true);
  json ck = json::array();
  for (KernelKind k : {KernelKind::neumann, KernelKind::robin, KernelKind::nn_neumann,
                       KernelKind::nn_robin}) {
    const HeatKernel hk = make_heat_kernel(d, k, p.A_minus, p.A_plus);
    for (std::size_t i = 0; i < times.size(); ++i) {
      std::ostringstream os;
      write_matrix_csv(os, hk.P(times[i]));
      c.emit(std::string("kernel_") + kernel_kind_name(k) + "_t" + std::to_string(i) + ".csv",
             os.str());
      ck.push_back({{"kind", kernel_kind_name(k)},
                    {"t", times[i]},
                    {"chapman_kolmogorov", chapman_kolmogorov_error(hk, 0.5 * times[i], times[i])}});
    }
  }
  if (p.m == 1 && p.A_minus == 0.0 && p.A_plus == 0.0) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      std::ostringstream os;
      write_matrix_csv(os, ImageKernel(d, times[i]).matrix());
      c.emit("kernel_image_sum_t" + std::to_string(i) + ".csv", os.str());
    }
  }
  c.emit_json("kernels.json", {{"times", times}, {"chapman_kolmogorov", ck}});
}

void cmd_bounds(Context& c) {
  BoundSuiteConfig cfg = BoundSuiteConfig::defaults();
  if (c.config.contains("model")) cfg.base = model_of(c);
  if (!c.Ns.empty()) cfg.Ns = c.Ns;
  cfg.slack = field_or(c, "slack", cfg.slack);
  cfg.beta_boundary = field_or(c, "beta_boundary", cfg.beta_boundary);
  auto ids = c.ids.empty() ? field_or<std::vector<std::string>>(c, "ids", {}) : c.ids;
  std::vector<std::string> known = bound_ids();
  known.push_back("HitEstimateLiteral");
  for (const auto& id : ids)
    if (std::find(known.begin(), known.end(), id) == known.end())
      throw InputError("unknown bound id '" + id + "'");
  const bool literal = std::find(ids.begin(), ids.end(), "HitEstimateLiteral") != ids.end();
  ids.erase(std::remove(ids.begin(), ids.end(), "HitEstimateLiteral"), ids.end());
  std::vector<BoundFitReport> reps;
  if (!literal || !ids.empty()) reps = bound_suite(cfg, ids);
  if (literal) reps.push_back(hit_estimate_literal(cfg));
  std::ostringstream csv;
  write_bound_csv(csv, reps);
  c.emit("bounds.csv", csv.str());
  bool ok = true;
  json summary = json::array();
  for (const auto& r : reps) {
    ok = ok && r.pass;
    summary.push_back({{"id", r.id}, {"max_ratio", r.max_ratio}, {"pass", r.pass}});
  }
  c.emit_json("bounds.json", {{"Ns", cfg.Ns}, {"reports", summary}, {"pass", ok}});
  if (!ok) throw CheckFailed{};
}

std::vector<double> checkpoints_of(const Context& c) {
  return field_or<std::vector<double>>(c, "checkpoints", {0.05, 0.1});
}

void cmd_she(Context& c) {
  SHEParams sp;
  sp.M = field_or(c, "M", sp.M);
  sp.alpha = field_or(c, "alpha", sp.alpha);
  sp.lambda = field_or(c, "lambda", sp.lambda);
  sp.A_minus = field_or(c, "A_minus", sp.A_minus);
  sp.A_plus = field_or(c, "A_plus", sp.A_plus);
  ExperimentConfig ec;
  ec.grid = field_or(c, "grid", ec.grid);
  const long R = field_or(c, "replicas", ec.replicas);
  const MomentReport mr =
      she_ensemble_moments(sp, checkpoints_of(c), ec.xs(), R, c.seed, c.threads);
  std::ostringstream csv;
  write_moments_csv(csv, mr);
  c.emit("she_moments.csv", csv.str());
}

void cmd_compare(Context& c) {
  const std::vector<int> Ns =
      c.Ns.empty() ? field_or<std::vector<int>>(c, "N_list", {64, 128, 256}) : c.Ns;
  const long R = field_or(c, "replicas", 2000L);
  const double control_A = field_or(c, "control_A", 2.0);
  const SheComparisonResult r =
      she_comparison_experiment(Ns, R, checkpoints_of(c), c.seed, c.threads, control_A);
  json per = json::array();
  for (std::size_t i = 0; i < r.Ns.size(); ++i)
    per.push_back({{"N", r.Ns[i]},
                   {"fraction_within", r.verdicts[i].fraction_within},
                   {"discrepancy_sq", r.verdicts[i].discrepancy_sq},
                   {"pass_points", r.verdicts[i].pass_points}});
  c.emit_json("verdict.json", {{"replicas", R},
                               {"per_N", per},
                               {"monotone", r.monotone},
                               {"control_A", r.control_A},
                               {"control_fraction_within", r.negative_control.fraction_within},
                               {"control_fails", !r.negative_control.pass_points},
                               {"pass", r.pass()}});
  if (!r.pass()) throw CheckFailed{};
}

const std::map<std::string, void (*)(Context&)>& commands() {
  static const std::map<std::string, void (*)(Context&)> m{
      {"derive", cmd_derive},     {"solve-boundary", cmd_solve_boundary},
      {"validate", cmd_validate}, {"simulate", cmd_simulate},
      {"drift-check", cmd_drift_check}, {"operators", cmd_operators},
      {"kernels", cmd_kernels},   {"bounds", cmd_bounds},
      {"she", cmd_she},           {"compare", cmd_compare}};
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-boundary ASEP, Cole-Hopf and heat-kernel experiments"};
  std::string command, config_path, out_dir = "out";
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::vector<std::string> ids;
  std::vector<int> Ns;
  app.add_option("command", command, "derive | solve-boundary | validate | simulate | "
                                     "drift-check | operators | kernels | bounds | she | compare");
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "base seed");
  app.add_option("--threads", threads, "worker threads (default: OPENKPZ_THREADS or 1)");
  app.add_option("--id", ids, "bound ids")->delimiter(',');
  app.add_option("--N", Ns, "system sizes")->delimiter(',');
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  const auto started = std::chrono::steady_clock::now();
  Context c;
  Manifest man;
  man.started_at = utc_timestamp();
  int code = 0;
  try {
    if (!config_path.empty()) {
      c.config = read_json_file(config_path);
      if (!c.config.is_object()) throw InputError("config must be a JSON object");
      c.config_dir = fs::path(config_path).parent_path();
    } else {
      c.config = json::object();
    }
    if (command.empty()) command = c.config.value("command", std::string());
    if (command.empty()) throw InputError("no command given");
    if (!commands().count(command)) throw InputError("unknown command '" + command + "'");
    if (seed_opt->count() == 0) seed = field_or<std::uint64_t>(c, "seed", seed);
    if (threads == 0) {
      if (const char* env = std::getenv("OPENKPZ_THREADS")) {
        try {
          threads = unsigned(std::stoul(env));
        } catch (const std::exception&) {
          throw InputError(std::string("OPENKPZ_THREADS is not a number: ") + env);
        }
      }
    }
    c.command = command;
    c.seed = seed;
    c.threads = std::max(1u, threads);
    c.Ns = Ns;
    c.ids = ids;
    c.out = out_dir;
    json hashed = c.config;
    hashed["command"] = command;
    hashed["seed"] = seed;
    if (!Ns.empty()) hashed["N_list"] = Ns;
    if (!ids.empty()) hashed["ids"] = ids;
    c.hash = config_hash(hashed);
    fs::create_directories(c.out);
    commands().at(command)(c);
  } catch (const CheckFailed&) {
    code = 1;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "check failed: " << e.what() << '\n';
    code = 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  man.command = command;
  man.config_hash = c.hash;
  man.seed = seed;
  man.eigen_version = std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  man.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  man.exit_code = code;
  man.artifacts = c.artifacts;
  write_atomic(c.out / "manifest.json", json(man).dump(2) + "\n");
  std::cout << command << (code == 0 ? ": pass" : ": FAIL") << " (" << c.out.string() << ")\n";
  return code;
}
