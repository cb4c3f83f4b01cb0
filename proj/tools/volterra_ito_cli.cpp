// volterra-ito: command line front end for the verification engine.
//
// Exit status: 0 all checks pass, 1 some check failed, 2 invalid input,
// 3 numerical failure (quadrature budget, conditioning).

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <volterra_ito.hpp>

namespace {

using nlohmann::ordered_json;

struct RunConfig {
  std::string subcommand;
  std::string kernel = "rl";
  double hurst = 0.25;
  double horizon = 1.0;
  std::vector<double> weights;
  std::vector<double> rates;
  std::string kernel2 = "brownian";
  double hurst2 = 0.25;
  std::size_t grid_n = 1024;
  std::size_t paths = 100000;
  std::uint64_t seed = 42;
  std::string phi = "square";
  std::string phi2 = "xy";
  double t = -1.0;  // negative: the horizon
  double eps = 0.01;
  double z = 4.0;
  double tol = -1.0;  // negative: subcommand default
  double bias_c = -1.0;
  std::vector<std::size_t> ladder;
  std::vector<std::size_t> n_list{2, 4, 8, 16};
  double t_min = 1e-3;
  double window_lo = -1.0;
  double window_hi = -1.0;
  std::size_t fit_n = 0;
  std::size_t cases = 200;
  std::string method = "volterra";
  bool cross = false;
  std::string output;
  std::string format = "json";
  unsigned threads = 0;
  bool no_timestamp = false;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) vito::detail::domain_fail("cannot read kernel file '", path, "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

vito::Kernel parse_kernel(const std::string& spec, double hurst, double horizon, const std::vector<double>& weights,
                          const std::vector<double>& rates) {
  if (spec == "brownian") return vito::Kernel::brownian(horizon);
  if (spec == "rl" || spec == "riemann_liouville") return vito::Kernel::riemann_liouville(hurst, horizon);
  if (spec == "expsum") return vito::Kernel::exp_sum(weights, rates, horizon);
  std::string text = spec;
  if (spec.empty() || spec.front() != '{') {
    if (spec.find('.') == std::string::npos && spec.find('/') == std::string::npos)
      vito::detail::domain_fail("kernel field 'kind' has unknown value '", spec, "'");
    text = slurp(spec);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    vito::detail::domain_fail("kernel spec is not valid JSON: ", e.what());
  }
  if (j.is_object() && !j.contains("T") && j.value("kind", "") != "table") j["T"] = horizon;
  return vito::Kernel::from_json(j);
}

ordered_json config_json(const RunConfig& c, const vito::Kernel& k) {
  ordered_json j{{"subcommand", c.subcommand}, {"kernel", k.to_json()}, {"grid_n", c.grid_n}, {"T", k.horizon()}};
  const auto& s = c.subcommand;
  if (s == "verify-multi" || (s == "bracket" && c.cross))
    j["kernel2"] = parse_kernel(c.kernel2, c.hurst2, c.horizon, {}, {}).to_json();
  if (s == "simulate" || s == "verify-mean" || s == "verify-path" || s == "verify-multi" || s == "approx") {
    j["paths"] = c.paths;
    j["seed"] = c.seed;
  }
  if (s == "sandbox") {
    j = ordered_json{{"subcommand", s}, {"cases", c.cases}, {"seed", c.seed}};
    return j;
  }
  if (s == "verify-mean" || s == "verify-path" || s == "verify-unique") j["phi"] = c.phi;
  if (s == "verify-multi") j["phi2"] = c.phi2;
  if (s.rfind("verify", 0) == 0) {
    j["t"] = c.t;
    j["z"] = c.z;
    j["tol"] = c.tol;
    j["bias_c"] = c.bias_c;
  }
  if (s == "verify-unique") j["eps"] = c.eps;
  if (s == "verify-path") j["ladder"] = c.ladder;
  if (s == "simulate") j["method"] = c.method;
  if (s == "approx" || s == "hurst") {
    j["t_min"] = c.t_min;
    j["window"] = {c.window_lo, c.window_hi};
  }
  if (s == "approx") j["n_list"] = c.n_list;
  if (s == "hurst") {
    j["fit_n"] = c.fit_n;
    j["tol"] = c.tol;
  }
  j["format"] = c.format;
  return j;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json envelope(const RunConfig& c, const ordered_json& config) {
  ordered_json j{{"tool", "volterra-ito"}, {"version", vito::kVersion}, {"config", config}};
  if (!c.no_timestamp) j["timestamp"] = utc_timestamp();
  return j;
}

class Output {
public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) vito::detail::domain_fail("cannot open output '", path, "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
  std::ofstream file_;
};

// CSV artifacts carry the envelope on a leading comment line.
void csv_header(std::ostream& os, const ordered_json& env) { os << "# " << env.dump() << '\n'; }

int emit_reports(const RunConfig& c, const ordered_json& config, const std::vector<vito::VerificationReport>& reports,
                 ordered_json extra = {}) {
  bool pass = true;
  for (const auto& r : reports) pass = pass && r.pass;
  Output out(c.output);
  auto& os = out.stream();
  if (c.format == "text") {
    for (const auto& r : reports) os << r.summary_line() << '\n';
    os << (pass ? "PASS" : "FAIL") << " overall (" << reports.size() << " checks)\n";
  } else if (c.format == "json") {
    ordered_json env = envelope(c, config);
    ordered_json arr = ordered_json::array();
    for (const auto& r : reports) arr.push_back(r.to_json());
    env["reports"] = arr;
    if (!extra.is_null()) env["details"] = extra;
    env["pass"] = pass;
    os << env.dump(2) << '\n';
  } else {
    csv_header(os, envelope(c, config));
    os << "identity,estimate,reference,se,bias_bound,grid_n,paths,seed,pass,z\n";
    os.precision(17);
    for (const auto& r : reports)
      os << r.identity << ',' << r.estimate << ',' << r.reference << ',' << r.se << ',' << r.bias_bound << ','
         << r.grid_n << ',' << r.paths << ',' << r.seed << ',' << (r.pass ? "true" : "false") << ',' << r.z << '\n';
  }
  return pass ? 0 : 1;
}

vito::VerifyOptions verify_options(const RunConfig& c) {
  vito::VerifyOptions opt;
  opt.z = c.z;
  if (c.tol > 0.0) opt.quad_tol = c.tol;
  opt.bias_constant = c.bias_c;
  opt.threads = c.threads;
  return opt;
}

int run_bracket(const RunConfig& c, const vito::Kernel& k, const ordered_json& config) {
  const auto grid = vito::TimeGrid::uniform(k.horizon(), c.grid_n);
  const auto g = vito::energy_function(k, grid);
  Output out(c.output);
  auto& os = out.stream();
  if (!c.cross) {
    if (c.format == "json") {
      ordered_json env = envelope(c, config);
      env["t"] = std::vector<double>(grid.times().begin(), grid.times().end());
      env["gamma"] = g.values;
      env["monotone"] = g.monotone;
      os << env.dump(2) << '\n';
    } else {
      csv_header(os, envelope(c, config));
      vito::write_energy_csv(os, g);
    }
    return 0;
  }
  const auto k2 = parse_kernel(c.kernel2, c.hurst2, c.horizon, {}, {});
  const auto g2 = vito::energy_function(k2, grid);
  const auto x = vito::cross_bracket(k, k2, grid);
  if (c.format == "json") {
    ordered_json env = envelope(c, config);
    env["t"] = std::vector<double>(grid.times().begin(), grid.times().end());
    env["gamma"] = g.values;
    env["gamma2"] = g2.values;
    env["cross"] = x.values;
    os << env.dump(2) << '\n';
  } else {
    csv_header(os, envelope(c, config));
    os << "t,gamma,gamma2,cross\n";
    os.precision(17);
    for (std::size_t i = 0; i < grid.size(); ++i)
      os << grid[i] << ',' << g.values[i] << ',' << g2.values[i] << ',' << x.values[i] << '\n';
  }
  return 0;
}

int run_simulate(const RunConfig& c, const vito::Kernel& k, const ordered_json& config) {
  const auto grid = vito::TimeGrid::uniform(k.horizon(), c.grid_n);
  vito::SimulationOptions opt;
  opt.threads = c.threads;
  if (c.method != "volterra" && c.method != "cholesky")
    vito::detail::domain_fail("field 'method' must be volterra or cholesky, got '", c.method, "'");
  const vito::PathBundle b = c.method == "volterra" ? vito::simulate_volterra(k, grid, c.paths, c.seed, opt)
                                                   : vito::simulate_cholesky(k, grid, c.paths, c.seed, {}, opt);
  Output out(c.output);
  auto& os = out.stream();
  if (c.format == "json") {
    ordered_json env = envelope(c, config);
    env["t"] = std::vector<double>(grid.times().begin(), grid.times().end());
    ordered_json rows = ordered_json::array();
    for (std::size_t p = 0; p < b.paths; ++p) {
      const auto r = b.X_row(p);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    env["X"] = rows;
    os << env.dump() << '\n';
  } else {
    csv_header(os, envelope(c, config));
    vito::write_paths_csv(os, b);
  }
  return 0;
}

int run_sandbox(const RunConfig& c, const ordered_json& config) {
  const auto rep = vito::sandbox::run_suite(c.cases, c.seed);
  Output out(c.output);
  auto& os = out.stream();
  if (c.format == "text") {
    const auto j = rep.to_json();
    for (auto it = j.begin(); it != j.end(); ++it) os << it.key() << ": " << it.value().dump() << '\n';
  } else {
    ordered_json env = envelope(c, config);
    env["report"] = rep.to_json();
    env["pass"] = rep.pass();
    os << env.dump(2) << '\n';
  }
  return rep.pass() ? 0 : 1;
}

int run_approx(const RunConfig& c, const vito::Kernel& k, const ordered_json& config) {
  const auto grid = vito::TimeGrid::uniform(k.horizon(), c.grid_n);
  vito::ApproxOptions opt;
  opt.t_min = c.t_min;
  opt.hurst_lo = c.window_lo;
  opt.hurst_hi = c.window_hi;
  opt.verify = verify_options(c);
  const auto rep = vito::convergence_suite(k, c.n_list, grid, c.paths, c.seed, opt);
  Output out(c.output);
  auto& os = out.stream();
  if (c.format == "csv") {
    csv_header(os, envelope(c, config));
    vito::write_approx_csv(os, rep);
  } else if (c.format == "text") {
    os.precision(6);
    for (std::size_t i = 0; i < rep.n_list.size(); ++i)
      os << "n=" << rep.n_list[i] << " l2_err=" << rep.l2_err[i] << " bracket_sup_err=" << rep.bracket_sup_err[i]
         << " mean_residual=" << rep.mean_residual[i] << '\n';
    os << (rep.pass() ? "PASS" : "FAIL") << " overall\n";
  } else {
    ordered_json env = envelope(c, config);
    env["report"] = rep.to_json();
    env["pass"] = rep.pass();
    os << env.dump(2) << '\n';
  }
  return rep.pass() ? 0 : 1;
}

int run_hurst(const RunConfig& c, const vito::Kernel& k, const ordered_json& config) {
  const auto grid = vito::TimeGrid::uniform(k.horizon(), c.grid_n);
  const double reference = k.regularity();
  vito::Kernel measured = k;
  if (c.fit_n > 0) measured = vito::fit_expsum(k, c.fit_n, c.t_min);
  const double lo = c.window_lo > 0.0 ? c.window_lo : c.t_min;
  const double hi = c.window_hi > 0.0 ? c.window_hi : 100.0 * c.t_min;
  const auto est = vito::estimate_hurst(vito::energy_function(measured, grid), lo, hi);
  const double tol = c.tol > 0.0 ? c.tol : (c.fit_n > 0 ? 0.02 : 1e-6);
  vito::VerificationReport r{c.fit_n > 0 ? "hurst/fitted_n=" + std::to_string(c.fit_n) : "hurst/exact",
                             est.hurst, reference, 0.0, tol, c.grid_n, 0, 0, false, c.z};
  r.pass = r.within_tolerance();
  return emit_reports(c, config, {r}, ordered_json{{"r2", est.r2}, {"points", est.points}, {"window", {lo, hi}}});
}

int dispatch(RunConfig& c) {
  if (c.format != "json" && c.format != "csv" && c.format != "text")
    vito::detail::domain_fail("field 'format' must be json, csv or text, got '", c.format, "'");
  if (c.subcommand == "sandbox") return run_sandbox(c, config_json(c, vito::Kernel::brownian(1.0)));
  const auto k = parse_kernel(c.kernel, c.hurst, c.horizon, c.weights, c.rates);
  if (c.t < 0.0) c.t = k.horizon();
  if (c.ladder.empty()) c.ladder = {std::max<std::size_t>(c.grid_n / 16, 1), std::max<std::size_t>(c.grid_n / 4, 1), c.grid_n};
  const auto config = config_json(c, k);
  const auto& s = c.subcommand;
  if (s == "bracket") return run_bracket(c, k, config);
  if (s == "simulate") return run_simulate(c, k, config);
  if (s == "approx") return run_approx(c, k, config);
  if (s == "hurst") return run_hurst(c, k, config);

  const auto opt = verify_options(c);
  const auto grid = vito::TimeGrid::uniform(k.horizon(), c.grid_n);
  if (s == "verify-mean")
    return emit_reports(c, config, vito::verify_mean_identity(k, vito::TestFunction::parse(c.phi), grid, c.paths, c.seed, c.t, opt));
  if (s == "verify-path") {
    const auto res = vito::verify_pathwise_formula(k, vito::TestFunction::parse(c.phi), c.ladder, c.paths, c.seed, c.t, opt);
    auto reports = res.rungs;
    reports.push_back(res.ladder);
    return emit_reports(c, config, reports);
  }
  if (s == "verify-multi") {
    const auto k2 = parse_kernel(c.kernel2, c.hurst2, c.horizon, {}, {});
    vito::Phi2 phi2;
    if (c.phi2 == "xy")
      phi2 = vito::Phi2::product;
    else if (c.phi2 == "sumsq")
      phi2 = vito::Phi2::sum_of_squares;
    else
      vito::detail::domain_fail("field 'phi2' must be xy or sumsq, got '", c.phi2, "'");
    return emit_reports(c, config, vito::verify_multivariate(k, k2, phi2, grid, c.paths, c.seed, c.t, opt));
  }
  if (s == "verify-unique") {
    const auto res = vito::verify_uniqueness_perturbation(k, vito::TestFunction::parse(c.phi), c.eps, grid, c.t, opt);
    return emit_reports(c, config, {res.report},
                        ordered_json{{"residual", res.residual}, {"predicted_shift", res.predicted_shift},
                                     {"detection_ratio", res.detection_ratio}});
  }
  vito::detail::domain_fail("unknown subcommand '", s, "'");
}

void add_kernel_options(CLI::App* app, RunConfig& c) {
  app->add_option("--kernel", c.kernel, "brownian | rl | expsum | inline JSON | JSON file")->capture_default_str();
  app->add_option("--hurst", c.hurst, "Hurst parameter for rl")->capture_default_str();
  app->add_option("--T", c.horizon, "horizon")->capture_default_str();
  app->add_option("--weights", c.weights, "expsum weights")->delimiter(',');
  app->add_option("--rates", c.rates, "expsum rates")->delimiter(',');
  app->add_option("--grid-n", c.grid_n, "number of uniform grid cells")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_common_options(CLI::App* app, RunConfig& c) {
  app->add_option("--output,-o", c.output, "output file (default stdout)");
  app->add_option("--format", c.format, "json | csv | text")->capture_default_str();
  app->add_option("--threads", c.threads, "worker threads (default $VOLTERRA_ITO_THREADS or 1)");
  app->add_flag("--no-timestamp", c.no_timestamp, "omit the timestamp for byte-identical output");
}

void add_mc_options(CLI::App* app, RunConfig& c) {
  app->add_option("--paths", c.paths, "Monte Carlo paths")->capture_default_str();
  app->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
}

void add_check_options(CLI::App* app, RunConfig& c) {
  app->add_option("--t", c.t, "evaluation time (grid point; default T)");
  app->add_option("--z", c.z, "z multiplier for statistical checks")->capture_default_str();
  app->add_option("--tol", c.tol, "quadrature-route tolerance (default 1e-6)");
  app->add_option("--bias-c", c.bias_c, "constant C of the bias bound C*mesh^min(2H,1) (default 2T)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical verification of the operator Ito formula for Volterra Gaussian processes"};
  app.set_version_flag("--version", std::string("volterra-ito ") + vito::kVersion);
  app.require_subcommand(1);
  RunConfig c;

  auto* bracket = app.add_subcommand("bracket", "energy function Gamma on a uniform grid (CSV)");
  add_kernel_options(bracket, c);
  add_common_options(bracket, c);
  bracket->add_flag("--cross", c.cross, "also emit Gamma of --kernel2 and the cross-bracket");
  bracket->add_option("--kernel2", c.kernel2, "second kernel for --cross")->capture_default_str();
  bracket->add_option("--hurst2", c.hurst2, "Hurst parameter of --kernel2")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "simulate paths (CSV path,t,X)");
  add_kernel_options(simulate, c);
  add_common_options(simulate, c);
  add_mc_options(simulate, c);
  simulate->add_option("--method", c.method, "volterra | cholesky")->capture_default_str();

  auto* vmean = app.add_subcommand("verify-mean", "mean identity E phi(X_t) = phi(0) + 1/2 int E phi''(X_s) dGamma");
  auto* vpath = app.add_subcommand("verify-path", "pathwise Ito formula over a grid ladder");
  auto* vunique = app.add_subcommand("verify-unique", "eps-perturbed bracket must be detected");
  for (auto* s : {vmean, vpath, vunique}) {
    add_kernel_options(s, c);
    add_common_options(s, c);
    add_check_options(s, c);
    s->add_option("--phi", c.phi, "square | cos[:a] | mollified[:n] | poly:c0,c1,.. | const:c")->capture_default_str();
  }
  add_mc_options(vmean, c);
  add_mc_options(vpath, c);
  vpath->add_option("--ladder", c.ladder, "grid sizes (default n/16,n/4,n)")->delimiter(',');
  vunique->add_option("--eps", c.eps, "perturbation of the integrator")->capture_default_str();

  auto* vmulti = app.add_subcommand("verify-multi", "two processes sharing the driver");
  add_kernel_options(vmulti, c);
  add_common_options(vmulti, c);
  add_check_options(vmulti, c);
  add_mc_options(vmulti, c);
  vmulti->add_option("--kernel2", c.kernel2, "second kernel")->capture_default_str();
  vmulti->add_option("--hurst2", c.hurst2, "Hurst parameter of --kernel2")->capture_default_str();
  vmulti->add_option("--phi2", c.phi2, "xy | sumsq")->capture_default_str();

  auto* sandbox = app.add_subcommand("sandbox", "exact finite-dimensional operator suite");
  add_common_options(sandbox, c);
  sandbox->add_option("--cases", c.cases, "random cases")->capture_default_str();
  sandbox->add_option("--seed", c.seed, "suite seed (default 20240601)");

  auto* approx = app.add_subcommand("approx", "exponential-sum fits and convergence");
  add_kernel_options(approx, c);
  add_common_options(approx, c);
  add_mc_options(approx, c);
  approx->add_option("--n-list", c.n_list, "term counts")->delimiter(',');
  approx->add_option("--t-min", c.t_min, "resolution floor of the fit")->capture_default_str();
  approx->add_option("--window-lo", c.window_lo, "Hurst window start (default t_min)");
  approx->add_option("--window-hi", c.window_hi, "Hurst window end (default 100 t_min)");
  approx->add_option("--z", c.z, "z multiplier")->capture_default_str();

  auto* hurst = app.add_subcommand("hurst", "log-log Hurst estimate of Gamma");
  add_kernel_options(hurst, c);
  add_common_options(hurst, c);
  hurst->add_option("--fit-n", c.fit_n, "fit an n-term exponential sum first (0: none)")->capture_default_str();
  hurst->add_option("--t-min", c.t_min, "resolution floor of the fit")->capture_default_str();
  hurst->add_option("--window-lo", c.window_lo, "window start (default t_min)");
  hurst->add_option("--window-hi", c.window_hi, "window end (default 100 t_min)");
  hurst->add_option("--tol", c.tol, "tolerance on |H_est - H| (default 1e-6, or 0.02 with --fit-n)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  CLI::App* sub = app.get_subcommands().front();
  c.subcommand = sub->get_name();
  // Subcommand-specific defaults for options bound to shared fields.
  if ((c.subcommand == "verify-mean" || c.subcommand == "approx") && sub->count("--paths") == 0) c.paths = 0;
  if (c.subcommand == "sandbox" && sub->count("--seed") == 0) c.seed = 20240601;
  if ((c.subcommand == "bracket" || c.subcommand == "simulate") && sub->count("--format") == 0) c.format = "csv";

  try {
    return dispatch(c);
  } catch (const vito::DomainError& e) {
    std::cerr << "volterra-ito: " << e.what() << '\n';
    return 2;
  } catch (const vito::NumericalError& e) {
    std::cerr << "volterra-ito: " << e.what() << " (estimate " << e.estimate() << ", bound " << e.error_bound() << ")\n";
    return 3;
  }
}
