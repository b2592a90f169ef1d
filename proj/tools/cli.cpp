#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "affine/density.hpp"
#include "affine/ergodicity.hpp"
#include "affine/errors.hpp"
#include "affine/model_io.hpp"
#include "affine/montecarlo.hpp"
#include "affine/riccati.hpp"
#include "affine/spectral.hpp"

namespace affine::cli {

namespace {

using nlohmann::json;

[[noreturn]] void usage(const std::string& field, const std::string& msg) { throw Error(ErrorKind::Usage, field, msg); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

double to_double(const std::string& s, const std::string& field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    usage(field, "cannot parse '" + s + "' as a number");
  }
}

std::vector<double> parse_list(const std::string& s, const std::string& field) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(to_double(item, field));
  return out;
}

/// "a,b,c" or "lo:hi:count".
std::vector<double> parse_times(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() == 3) {
    const double lo = to_double(parts[0], "--times"), hi = to_double(parts[1], "--times");
    const double cnt = to_double(parts[2], "--times");
    if (cnt < 2 || cnt != static_cast<int>(cnt) || !(hi > lo)) usage("--times", "need lo < hi and count >= 2");
    std::vector<double> out;
    for (int k = 0; k < static_cast<int>(cnt); ++k) out.push_back(lo + (hi - lo) * k / (cnt - 1));
    return out;
  }
  return parse_list(s, "--times");
}

std::vector<int> parse_index(const std::string& s, const std::string& field) {
  std::vector<int> out;
  for (double v : parse_list(s, field)) {
    if (v < 0 || v != static_cast<int>(v)) usage(field, "multi-index entries must be nonnegative integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }


Vec state_or_origin(const std::vector<double>& x, int d, const char* field) {
  if (x.empty()) return Vec::Zero(d);
  if (static_cast<int>(x.size()) != d) usage(field, "expected " + std::to_string(d) + " coordinates");
  return to_vec(x);
}

MultiIndex index_or_zero(const std::vector<int>& q, int d, const char* field) {
  if (q.empty()) return MultiIndex(d, 0);
  if (static_cast<int>(q.size()) != d) usage(field, "expected " + std::to_string(d) + " entries");
  return q;
}

json config_json(const RunConfig& c) {
  json j{{"model", c.model_path.string()},
         {"out", c.out_dir.string()},
         {"t", c.t},
         {"x", c.x},
         {"u", c.u},
         {"grid", c.grid},
         {"t0", c.t0},
         {"seed", c.seed},
         {"tol", c.tol},
         {"method", c.method},
         {"q", c.q},
         {"qt", c.qt},
         {"paths", c.paths},
         {"dt", c.dt},
         {"h", c.h},
         {"M", c.M},
         {"times", c.times},
         {"xs", c.xs},
         {"samples", c.samples},
         {"fit_window", {c.fit_lo, c.fit_hi}},
         {"threads", c.threads}};
  j["theta"] = c.theta ? json(*c.theta) : json(nullptr);
  return j;
}

InversionSettings inversion(const RunConfig& c) {
  InversionSettings s;
  s.method = parse_method(c.method);
  s.eps_trunc = c.tol;
  s.threads = c.threads;
  return s;
}

GridSpec grid_for(const RunConfig& c, const AffineModel& model) {
  const GridSpec g = parse_grid(c.grid.empty() ? default_grid(model.m, model.n) : c.grid);
  check_grid(g, model.m, model.d());
  return g;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) usage("--out", "cannot write " + path.string());
  out << text;
}

template <class F>
void write_with(const std::filesystem::path& path, F&& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) usage("--out", "cannot write " + path.string());
  f(out);
}

struct Report {
  json results = json::object();
  std::vector<std::string> warnings;
};

void append(std::vector<std::string>& to, const std::vector<std::string>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

int cmd_validate(const RunConfig&, const AffineModel& model, Report& rep) {
  const ValidationReport v = validate(model);
  rep.results = to_json(v);
  if (!v.ok) {
    for (const auto& viol : v.violations) {
      std::cerr << "admissibility condition (" << viol.condition << ") violated: " << viol.detail << '\n';
    }
    return 2;
  }
  return 0;
}

int cmd_charfn(const RunConfig& c, const AffineModel& model, Report& rep) {
  require_admissible(model);
  const int d = model.d();
  const Vec x = state_or_origin(c.x, d, "--x");
  if (static_cast<int>(c.u.size()) != d) usage("--u", "expected " + std::to_string(d) + " frequency coordinates");
  const Vec u = to_vec(c.u);
  const Complex value = charfn(model, c.t, x, u);
  const RiccatiPath path = solve_flow(model, u.cast<Complex>() * Complex(0.0, 1.0), c.t);
  write_with(c.out_dir / "flow.csv", [&](std::ostream& o) { write_csv(o, path); });
  rep.results = {{"re", value.real()}, {"im", value.imag()}, {"abs", std::abs(value)}, {"flow_csv", "flow.csv"}};
  return 0;
}

int cmd_density(const RunConfig& c, const AffineModel& model, Report& rep) {
  require_admissible(model);
  const int d = model.d();
  const GridSpec grid = grid_for(c, model);
  const DensityField f = invert_density(model, c.t, state_or_origin(c.x, d, "--x"), index_or_zero(c.q, d, "--q"),
                                        index_or_zero(c.qt, d, "--qt"), grid, inversion(c));
  write_with(c.out_dir / "density.csv", [&](std::ostream& o) { write_csv(o, f); });
  rep.results = metadata_json(f);
  rep.results["csv"] = "density.csv";
  append(rep.warnings, f.warnings);
  return 0;
}

int cmd_invariant(const RunConfig& c, const AffineModel& model, Report& rep) {
  require_admissible(model);
  const int d = model.d();
  const GridSpec grid = grid_for(c, model);
  const DensityField f = invariant_density(model, grid, index_or_zero(c.qt, d, "--qt"), inversion(c));
  write_with(c.out_dir / "invariant.csv", [&](std::ostream& o) { write_csv(o, f); });
  rep.results = metadata_json(f);
  rep.results["csv"] = "invariant.csv";
  if (!c.u.empty()) {
    if (static_cast<int>(c.u.size()) != d) usage("--u", "expected " + std::to_string(d) + " frequency coordinates");
    const InvariantValue v = invariant_charfn(model, to_vec(c.u));
    rep.results["charfn"] = {{"re", v.value.real()}, {"im", v.value.imag()}, {"converged", v.converged},
                             {"t_end", v.t_end}};
    if (!v.converged) rep.warnings.push_back("invariant characteristic function did not converge");
  }
  append(rep.warnings, f.warnings);
  return 0;
}

int cmd_simulate(const RunConfig& c, const AffineModel& model, Report& rep) {
  require_admissible(model);
  const int d = model.d();
  SimConfig sc;
  sc.x0 = state_or_origin(c.x, d, "--x");
  sc.t_end = c.t;
  sc.dt = c.dt;
  sc.n_paths = c.paths;
  sc.seed = c.seed;
  sc.threads = c.threads;
  const PathEnsemble ens = simulate_paths(model, sc);
  write_with(c.out_dir / "paths.csv", [&](std::ostream& o) { write_csv(o, ens); });
  rep.results = summary_json(ens);
  rep.results["csv"] = "paths.csv";
  append(rep.warnings, ens.warnings);
  if (!c.grid.empty()) {
    const DensityField f = invert_density(model, c.t, sc.x0, MultiIndex(d, 0), MultiIndex(d, 0),
                                          grid_for(c, model), inversion(c));
    json cmp = json::array();
    for (int k = 0; k < d; ++k) {
      const DensityComparison dc = compare_density(ens, f, k);
      cmp.push_back({{"axis", k}, {"ks", dc.ks}, {"histogram_l1", dc.histogram_l1}, {"coverage", dc.coverage},
                     {"bins", dc.bins}});
    }
    rep.results["comparison"] = cmp;
    append(rep.warnings, f.warnings);
  }
  return 0;
}

int cmd_bound_check(const RunConfig& c, const AffineModel& model, Report& rep) {
  require_admissible(model);
  const double theta = c.theta ? *c.theta : best_theta(model);
  std::vector<double> times = c.times.empty() ? std::vector<double>{c.t0, 2 * c.t0, 4 * c.t0} : c.times;
  if (std::any_of(times.begin(), times.end(), [&](double t) { return t < c.t0; })) {
    usage("--times", "sample times must be >= t0");
  }
  const std::size_t count = c.samples ? c.samples : 2000;
  const auto us = frequency_samples(model.d(), count, 1.0, 1e4, c.seed);
  const TailBoundCert cert = tail_bound_check(model, c.t0, theta, times, us);
  rep.results = to_json(cert);
  if (!cert.verified) {
    std::cerr << "tail envelope not certified: excess keeps growing at the outer radii\n";
    return 2;
  }
  return 0;
}

int cmd_lyapunov(const RunConfig& c, const AffineModel& model, Report& rep) {
  const SplitModels sp = split_semigroups(model);
  LyapunovData lyap = lyapunov_norms(model);
  const auto xs = drift_samples(model, c.samples ? c.samples : 1000, 1000.0, c.seed);
  const DriftFit fit = drift_fit_sweep(sp.q_model, lyap, xs);
  rep.results = {{"lyapunov", to_json(lyap)}, {"drift", to_json(fit)}, {"samples", xs.size()}};
  if (!fit.ok) {
    std::cerr << "drift condition A_Q V <= -c V + C fails for every tried epsilon\n";
    return 2;
  }
  return 0;
}

int cmd_dobrushin(const RunConfig& c, const AffineModel& model, Report& rep) {
  const SplitModels sp = split_semigroups(model);
  const GridSpec grid = grid_for(c, model);
  const auto pts = dobrushin_points(sp.q_model, c.M, c.samples ? c.samples : 8, c.seed);
  std::vector<std::pair<Vec, Vec>> pairs;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) pairs.emplace_back(pts[i], pts[j]);
  }
  json per_h = json::array();
  double best = -1.0, best_h = 0.0;
  for (double h : c.h) {
    const DobrushinReport r = dobrushin_check(sp.q_model, h, c.M, pairs, grid, inversion(c));
    per_h.push_back(to_json(r));
    if (r.delta > best) {
      best = r.delta;
      best_h = h;
    }
  }
  rep.results = {{"reports", per_h}, {"best_delta", best}, {"best_h", best_h}, {"points", pts.size()}};
  return 0;
}

int cmd_tvdecay(const RunConfig& c, const AffineModel& model, Report& rep) {
  const int d = model.d();
  std::vector<Vec> xs;
  if (c.xs.empty()) {
    xs.push_back(state_or_origin(c.x, d, "--x"));
  } else {
    for (const auto& x : c.xs) xs.push_back(state_or_origin(x, d, "--xs"));
  }
  const std::vector<double> times = c.times.empty() ? parse_times("0.5:10:20") : c.times;
  const auto reports = tv_decay_reports(model, xs, times, grid_for(c, model), inversion(c), c.fit_lo, c.fit_hi);
  json arr = json::array();
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const std::string name = reports.size() == 1 ? "decay.csv" : "decay_" + std::to_string(k) + ".csv";
    write_with(c.out_dir / name, [&](std::ostream& o) { write_csv(o, reports[k]); });
    json j = to_json(reports[k]);
    j["csv"] = name;
    arr.push_back(j);
    append(rep.warnings, reports[k].diagnostics);
  }
  rep.results = {{"reports", arr}};
  if (reports.size() > 1) {
    const BoundFormCheck bf = bound_form_check(reports);
    rep.results["bound_form"] = {{"normalized", bf.normalized}, {"ratio", bf.ratio}, {"ok", bf.ok}};
  }
  return 0;
}

}  // namespace

std::string default_grid(int m, int n) {
  const int d = m + n;
  const int count = d == 1 ? 1024 : d == 2 ? 256 : 48;
  std::string out;
  for (int k = 0; k < d; ++k) {
    if (!out.empty()) out += ',';
    out += (k < m ? "0:20:" : "-10:10:") + std::to_string(count);
  }
  return out;
}

std::optional<RunConfig> parse_config(const std::vector<std::string>& args) {
  RunConfig c;
  CLI::App app{"Affine process toolkit: Riccati flows, densities, tail bounds and ergodicity checks"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);
  for (const auto& name : kCommands) app.add_subcommand(name)->fallthrough()->set_help_flag("--help");

  std::string model, out = ".", x, u, q, qt, h, times, xs;
  std::optional<double> theta;
  app.add_option("--model", model, "model JSON file")->required();
  app.add_option("--out", out, "output directory");
  app.add_option("--t", c.t, "time horizon");
  app.add_option("--x", x, "initial state, comma separated");
  app.add_option("--u", u, "frequency, comma separated");
  app.add_option("--grid", c.grid, "grid spec lo:hi:count[,lo:hi:count...]");
  app.add_option("--theta", theta, "jump-size split for the tail exponent");
  app.add_option("--t0", c.t0, "earliest time covered by the tail certificate");
  app.add_option("--seed", c.seed, "random seed");
  app.add_option("--tol", c.tol, "truncation tolerance for Fourier inversion");
  app.add_option("--method", c.method, "fft or quad")->check(CLI::IsMember({"fft", "quad", "tensor-fft", "direct-quadrature"}));
  app.add_option("--q", q, "state derivative multi-index");
  app.add_option("--qt", qt, "space derivative multi-index");
  app.add_option("--paths", c.paths, "Monte Carlo paths");
  app.add_option("--dt", c.dt, "Euler step");
  app.add_option("--h", h, "Dobrushin horizons, comma separated");
  app.add_option("--M", c.M, "Dobrushin ball radius");
  app.add_option("--times", times, "time grid: a,b,c or lo:hi:count");
  app.add_option("--xs", xs, "starting points separated by ';'");
  app.add_option("--samples", c.samples, "sample count for the command's sweep");
  app.add_option("--fit-lo", c.fit_lo, "lower TV bound of the fit window");
  app.add_option("--fit-hi", c.fit_hi, "upper TV bound of the fit window");
  app.add_option("--threads", c.threads, "worker threads (0 = hardware)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    usage("arguments", e.what());
  }
  for (auto* sub : app.get_subcommands()) c.command = sub->get_name();

  c.model_path = model;
  if (!std::filesystem::is_regular_file(c.model_path)) usage("--model", "model file not found: " + model);
  c.out_dir = out;
  c.theta = theta;
  c.x = parse_list(x, "--x");
  c.u = parse_list(u, "--u");
  c.q = parse_index(q, "--q");
  c.qt = parse_index(qt, "--qt");
  if (!h.empty()) c.h = parse_list(h, "--h");
  if (!times.empty()) c.times = parse_times(times);
  if (!xs.empty()) {
    for (const auto& p : split(xs, ';')) c.xs.push_back(parse_list(p, "--xs"));
  }
  if (!(c.t > 0.0)) usage("--t", "time must be positive");
  if (!(c.t0 > 0.0)) usage("--t0", "t0 must be positive");
  if (!(c.tol > 0.0)) usage("--tol", "tolerance must be positive");
  if (!(c.dt > 0.0)) usage("--dt", "step must be positive");
  if (c.theta && !(*c.theta > 0.0 && *c.theta <= 1.0)) usage("--theta", "theta must lie in (0, 1]");
  if (!c.grid.empty()) parse_grid(c.grid);
  return c;
}

int dispatch(const RunConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec) usage("--out", "cannot create output directory " + c.out_dir.string());
  const AffineModel model = load_model(c.model_path);

  Report rep;
  int status = 0;
  if (c.command == "validate") status = cmd_validate(c, model, rep);
  else if (c.command == "charfn") status = cmd_charfn(c, model, rep);
  else if (c.command == "density") status = cmd_density(c, model, rep);
  else if (c.command == "invariant") status = cmd_invariant(c, model, rep);
  else if (c.command == "simulate") status = cmd_simulate(c, model, rep);
  else if (c.command == "bound-check") status = cmd_bound_check(c, model, rep);
  else if (c.command == "lyapunov") status = cmd_lyapunov(c, model, rep);
  else if (c.command == "dobrushin") status = cmd_dobrushin(c, model, rep);
  else if (c.command == "tvdecay") status = cmd_tvdecay(c, model, rep);
  else usage("command", "unknown subcommand " + c.command);

  const json report{{"command", c.command},
                    {"inputs", {{"config", config_json(c)}, {"model", model_to_json(model)}}},
                    {"results", rep.results},
                    {"warnings", rep.warnings}};
  write_text(c.out_dir / "report.json", report.dump(2) + "\n");
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  return status;
}

int run(const std::vector<std::string>& args) {
  try {
    const auto cfg = parse_config(args);
    if (!cfg) return 0;
    return dispatch(*cfg);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "] " << e.condition() << ": " << e.what() << '\n';
    if (e.kind() == ErrorKind::Usage) return 1;
    return is_precondition(e.kind()) ? 2 : 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [usage] json: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [numerical] " << e.what() << '\n';
    return 3;
  }
}

}  // namespace affine::cli
