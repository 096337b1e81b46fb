#include "braggkit/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "braggkit/constraints.hpp"
#include "braggkit/error.hpp"
#include "braggkit/fringe.hpp"
#include "braggkit/mirror.hpp"
#include "braggkit/mz.hpp"
#include "braggkit/parallel.hpp"
#include "braggkit/two_level.hpp"

namespace braggkit::cli {

using nlohmann::json;

namespace {

constexpr double kWattsPerCm2 = 1e4;  // W/m^2

json search_block() {
  return {{"omega_points", 12}, {"tau_points", 12}, {"max_evaluations", 200},
          {"tau_min", 0.02},    {"tau_cap", 60.0},  {"restarts", 0}};
}
json quadrature_block() { return {{"nodes", 41}, {"cutoff", 5.0}}; }
json integrator_block() { return {{"rtol", 1e-10}, {"atol", 1e-12}}; }

json with_common(json j) {
  j["search"] = search_block();
  j["quadrature"] = quadrature_block();
  j["integrator"] = integrator_block();
  return j;
}

json mz_block() {
  return {{"interrogation_times", {200.0, 400.0, 800.0}},
          {"omega_points", 8},
          {"tau_points", 8},
          {"omega_span", 3.0},
          {"tau_lower", 0.25},
          {"tau_upper", 2.0},
          {"max_evaluations", 60},
          {"phi_points", 9},
          {"joint", false}};
}

// ---- field access with violation collection ------------------------------

class Fields {
 public:
  Fields(const json& obj, std::string scope, std::vector<std::string>& violations)
      : obj_(obj), scope_(std::move(scope)), out_(violations) {}

  Fields sub(const std::string& key) const {
    static const json empty = json::object();
    const json* j = find(key);
    if (!j || !j->is_object()) {
      fail(key, "expected an object");
      return Fields(empty, name(key), out_);
    }
    return Fields(*j, name(key), out_);
  }

  double real(const std::string& key) const {
    const json* j = find(key);
    if (!j || !j->is_number()) {
      fail(key, "expected a number");
      return std::numeric_limits<double>::quiet_NaN();
    }
    return j->get<double>();
  }

  std::optional<double> optional_real(const std::string& key) const {
    const json* j = find(key);
    if (!j || j->is_null()) return std::nullopt;
    return real(key);
  }

  int integer(const std::string& key) const {
    const json* j = find(key);
    if (!j || !j->is_number_integer()) {
      fail(key, "expected an integer");
      return 0;
    }
    return j->get<int>();
  }

  bool boolean(const std::string& key) const {
    const json* j = find(key);
    if (!j || !j->is_boolean()) {
      fail(key, "expected true or false");
      return false;
    }
    return j->get<bool>();
  }

  std::string text(const std::string& key) const {
    const json* j = find(key);
    if (!j || !j->is_string()) {
      fail(key, "expected a string");
      return {};
    }
    return j->get<std::string>();
  }

  std::vector<double> reals(const std::string& key) const {
    const json* j = find(key);
    std::vector<double> out;
    if (!j || !j->is_array() || j->empty()) {
      fail(key, "expected a non-empty list of numbers");
      return out;
    }
    for (const auto& v : *j) {
      if (!v.is_number()) {
        fail(key, "expected a non-empty list of numbers");
        return {};
      }
      out.push_back(v.get<double>());
    }
    return out;
  }

  std::vector<int> integers(const std::string& key) const {
    const json* j = find(key);
    std::vector<int> out;
    if (!j || !j->is_array() || j->empty()) {
      fail(key, "expected a non-empty list of integers");
      return out;
    }
    for (const auto& v : *j) {
      if (!v.is_number_integer()) {
        fail(key, "expected a non-empty list of integers");
        return {};
      }
      out.push_back(v.get<int>());
    }
    return out;
  }

  std::vector<std::string> texts(const std::string& key) const {
    const json* j = find(key);
    std::vector<std::string> out;
    if (!j || !j->is_array() || j->empty()) {
      fail(key, "expected a non-empty list of strings");
      return out;
    }
    for (const auto& v : *j) {
      if (!v.is_string()) {
        fail(key, "expected a non-empty list of strings");
        return {};
      }
      out.push_back(v.get<std::string>());
    }
    return out;
  }

  void check(bool ok, const std::string& key, const std::string& message) const {
    if (!ok) fail(key, message);
  }

  // Runs a domain validate() and records its message under `key`.
  void domain(const std::function<void()>& fn, const std::string& key) const {
    try {
      fn();
    } catch (const ValidationError& e) {
      fail(key, e.what());
    }
  }

  std::string name(const std::string& key) const { return scope_.empty() ? key : scope_ + "." + key; }

 private:
  const json* find(const std::string& key) const {
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  void fail(const std::string& key, const std::string& message) const {
    out_.push_back(name(key) + ": " + message);
  }

  const json& obj_;
  std::string scope_;
  std::vector<std::string>& out_;
};

bool positive(double v) { return v > 0.0 && std::isfinite(v); }
bool all_positive(const std::vector<double>& v) {
  for (double x : v) {
    if (!positive(x)) return false;
  }
  return true;
}
bool ascending(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) return false;
  }
  return true;
}

void unknown_keys(const json& given, const json& known, const std::string& scope,
                  std::vector<std::string>& out) {
  if (!given.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string name = scope.empty() ? it.key() : scope + "." + it.key();
    auto k = known.find(it.key());
    if (k == known.end()) {
      out.push_back(name + ": unknown field");
    } else if (k->is_object() && it->is_object()) {
      unknown_keys(*it, *k, name, out);
    }
  }
}

// Runs a domain validate() and records its message.
void domain_check(const std::function<void()>& fn, const std::string& scope,
                  std::vector<std::string>& out) {
  try {
    fn();
  } catch (const ValidationError& e) {
    out.push_back(scope + ": " + e.what());
  }
}

// ---- parsed parameter sets -------------------------------------------------

struct Common {
  MirrorSearch search;
  int restarts = 0;
};

Common read_common(const Fields& f, const RunConfig& cfg) {
  Common c;
  const auto s = f.sub("search");
  c.search.omega_points = s.integer("omega_points");
  c.search.tau_points = s.integer("tau_points");
  c.search.max_evaluations = s.integer("max_evaluations");
  c.search.tau_min = s.real("tau_min");
  c.search.tau_cap = s.real("tau_cap");
  c.restarts = s.integer("restarts");
  s.check(c.restarts >= 0, "restarts", "must be >= 0");
  const auto q = f.sub("quadrature");
  c.search.quadrature.nodes = q.integer("nodes");
  c.search.quadrature.cutoff = q.real("cutoff");
  const auto in = f.sub("integrator");
  c.search.simulation.evolve.tolerances.rtol = in.real("rtol");
  c.search.simulation.evolve.tolerances.atol = in.real("atol");
  in.check(positive(c.search.simulation.evolve.tolerances.rtol), "rtol", "must be positive");
  in.check(positive(c.search.simulation.evolve.tolerances.atol), "atol", "must be positive");
  c.search.simulation.threads = cfg.threads;
  f.domain([&] { c.search.validate(); }, "search");
  return c;
}

// Random extra starting points for the mirror search, drawn log-uniformly in
// the search box from the configured seed.
MirrorSearch with_restarts(MirrorSearch search, const Common& c, int n,
                           std::optional<double> clamp, std::uint64_t seed) {
  if (c.restarts == 0) return search;
  const auto [lo, hi] = mirror_omega_range(n, clamp, search);
  const double tau_hi = clamp ? search.tau_cap : 1.0;
  std::mt19937_64 rng(seed + static_cast<std::uint64_t>(n));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < c.restarts; ++i) {
    const double om = lo * std::pow(hi / lo, u(rng));
    const double tau = search.tau_min * std::pow(tau_hi / search.tau_min, u(rng));
    search.seeds.emplace_back(om, tau);
  }
  return search;
}

MzSearch read_mz(const Fields& f, const Common& c) {
  MzSearch m;
  const auto b = f.sub("mz");
  m.interrogation_times = b.reals("interrogation_times");
  m.omega_points = b.integer("omega_points");
  m.tau_points = b.integer("tau_points");
  m.omega_span = b.real("omega_span");
  m.tau_lower = b.real("tau_lower");
  m.tau_upper = b.real("tau_upper");
  m.max_evaluations = b.integer("max_evaluations");
  m.phi_points = b.integer("phi_points");
  m.joint = b.boolean("joint");
  m.mirror = c.search;
  b.check(m.interrogation_times.size() >= 2, "interrogation_times",
          "need at least two values for the extrapolation");
  b.check(all_positive(m.interrogation_times), "interrogation_times", "must be positive");
  return m;
}

std::optional<SourceModel> read_source(const Fields& f) {
  const auto kind_name = f.text("kind");
  SourceModel s;
  try {
    s.kind = parse_source_kind(kind_name);
  } catch (const ValidationError&) {
    f.check(false, "kind", "unknown source kind '" + kind_name + "'");
    return std::nullopt;
  }
  s.sigma0 = f.real("sigma0");
  s.flux_ratio = f.optional_real("flux_ratio");
  return s;
}

// ---- output ---------------------------------------------------------------

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}
std::string flag(bool b) { return b ? "true" : "false"; }

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

void write_csv(const std::filesystem::path& path, const Table& t) {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  write_text(path, os.str());
}

// Generic plotting stub: plots every column against the chosen x column.
void write_plot_stub(const std::filesystem::path& path, const std::string& csv,
                     const std::string& x, const std::vector<std::string>& y,
                     const std::string& group) {
  std::ostringstream os;
  os << "import sys\n"
        "import pandas as pd\n"
        "import matplotlib.pyplot as plt\n\n"
     << "data = pd.read_csv(sys.argv[1] if len(sys.argv) > 1 else '" << csv << "')\n"
     << "x = '" << x << "'\n"
     << "ys = [";
  for (std::size_t i = 0; i < y.size(); ++i) os << (i ? ", " : "") << "'" << y[i] << "'";
  os << "]\n"
     << "group = " << (group.empty() ? "None" : "'" + group + "'") << "\n"
     << "fig, axes = plt.subplots(len(ys), 1, squeeze=False, figsize=(6, 3 * len(ys)))\n"
        "for ax, y in zip(axes[:, 0], ys):\n"
        "    parts = data.groupby(group) if group else [(None, data)]\n"
        "    for key, part in parts:\n"
        "        ax.plot(part[x], part[y], marker='o', label=None if key is None else f'{group}={key}')\n"
        "    ax.set_xlabel(x)\n"
        "    ax.set_ylabel(y)\n"
        "    if group:\n"
        "        ax.legend()\n"
        "fig.tight_layout()\n"
        "fig.savefig(sys.argv[2] if len(sys.argv) > 2 else '"
     << std::filesystem::path(csv).stem().string() << ".png')\n";
  write_text(path, os.str());
}

struct Artifacts {
  Table table;
  json summary = json::object();
  std::string digest;
  std::vector<std::pair<std::string, Table>> extra;  // file stem, table
  std::string plot_x;
  std::vector<std::string> plot_y;
  std::string plot_group;
};

// ---- subcommands ----------------------------------------------------------

const std::vector<std::string> kMirrorHeader{"n",     "sigma",   "omega_opt", "tau_opt",
                                             "F_max", "clamped", "evals"};

std::vector<std::string> mirror_row(int n, double sigma, const OptimizationResult& r) {
  return {std::to_string(n), num(sigma), num(r.omega_opt), num(r.tau_opt),
          num(r.objective),  flag(r.clamped), std::to_string(r.evaluations)};
}

json mirror_json(const OptimizationResult& r) {
  return {{"omega_opt", r.omega_opt},     {"tau_opt", r.tau_opt},
          {"F_max", r.objective},         {"clamped", r.clamped},
          {"at_clamp", r.at_clamp},       {"evaluations", r.evaluations},
          {"converged", r.converged},     {"quadrature_converged", r.quadrature_converged}};
}

CloudSpec cloud_of(int n, double sigma) {
  CloudSpec c;
  c.bragg_order = n;
  c.momentum_width = sigma;
  return c;
}

struct Subcommand {
  json defaults;
  std::function<void(const Fields&, const RunConfig&)> check;
  std::function<Artifacts(const Fields&, const RunConfig&)> run;
};

// mirror-optimize ------------------------------------------------------------

void check_mirror_optimize(const Fields& f, const RunConfig& cfg) {
  const int n = f.integer("n");
  const double sigma = f.real("sigma");
  f.check(n >= 1, "n", "must be >= 1");
  f.check(positive(sigma), "sigma", "must be positive");
  (void)read_common(f, cfg);
}

Artifacts run_mirror_optimize(const Fields& f, const RunConfig& cfg) {
  const int n = f.integer("n");
  const double sigma = f.real("sigma");
  const auto c = read_common(f, cfg);
  const auto r =
      optimize_mirror(cloud_of(n, sigma), cfg.clamp, with_restarts(c.search, c, n, cfg.clamp, cfg.seed));
  Artifacts a;
  a.table.header = kMirrorHeader;
  a.table.rows.push_back(mirror_row(n, sigma, r));
  a.summary = mirror_json(r);
  a.digest = "mirror-optimize n=" + std::to_string(n) + " sigma=" + num(sigma) +
             " omega_opt=" + num(r.omega_opt) + " tau_opt=" + num(r.tau_opt) +
             " F_max=" + num(r.objective);
  a.plot_x = "sigma";
  a.plot_y = {"F_max"};
  return a;
}

// mirror-scan ------------------------------------------------------------------

void check_mirror_scan(const Fields& f, const RunConfig& cfg) {
  const auto orders = f.integers("orders");
  const auto sigmas = f.reals("sigmas");
  for (int n : orders) f.check(n >= 1, "orders", "orders must be >= 1");
  f.check(all_positive(sigmas), "sigmas", "must be positive");
  (void)read_common(f, cfg);
}

Artifacts run_mirror_scan(const Fields& f, const RunConfig& cfg) {
  const auto orders = f.integers("orders");
  const auto sigmas = f.reals("sigmas");
  const auto c = read_common(f, cfg);
  Artifacts a;
  a.table.header = kMirrorHeader;
  json rows = json::array();
  double worst = 1.0;
  for (int n : orders) {
    const auto search = with_restarts(c.search, c, n, cfg.clamp, cfg.seed);
    for (double sigma : sigmas) {
      const auto r = optimize_mirror(cloud_of(n, sigma), cfg.clamp, search);
      a.table.rows.push_back(mirror_row(n, sigma, r));
      json row = mirror_json(r);
      row["n"] = n;
      row["sigma"] = sigma;
      rows.push_back(row);
      worst = std::min(worst, r.objective);
    }
  }
  a.summary = {{"rows", rows}};
  a.digest = "mirror-scan runs=" + std::to_string(a.table.rows.size()) + " min_F_max=" + num(worst);
  a.plot_x = "sigma";
  a.plot_y = {"F_max", "omega_opt", "tau_opt"};
  a.plot_group = "n";
  return a;
}

// cusp-scan ---------------------------------------------------------------------

void check_cusp_scan(const Fields& f, const RunConfig& cfg) {
  const int n = f.integer("n");
  const auto sigmas = f.reals("sigmas");
  const double threshold = f.real("threshold");
  f.check(n >= 1, "n", "must be >= 1");
  f.check(all_positive(sigmas), "sigmas", "must be positive");
  f.check(ascending(sigmas), "sigmas", "must be strictly ascending");
  f.check(threshold > 0.0 && threshold < 1.0, "threshold", "must lie in (0, 1)");
  (void)read_common(f, cfg);
}

Artifacts run_cusp_scan(const Fields& f, const RunConfig& cfg) {
  const int n = f.integer("n");
  const auto sigmas = f.reals("sigmas");
  const double threshold = f.real("threshold");
  const auto c = read_common(f, cfg);
  const auto scan = cusp_scan(n, sigmas, cfg.clamp, with_restarts(c.search, c, n, cfg.clamp, cfg.seed),
                              threshold);
  Artifacts a;
  a.table.header = {"n", "sigma", "omega_opt", "tau_opt", "F_max", "off_order_loss", "cusp"};
  for (const auto& r : scan.rows) {
    a.table.rows.push_back({std::to_string(n), num(r.sigma), num(r.optimum.omega_opt),
                            num(r.optimum.tau_opt), num(r.optimum.objective),
                            num(r.off_order_loss), flag(r.cusp)});
  }
  a.summary = {{"n", n}, {"threshold", threshold}};
  a.summary["sigma_cusp"] = scan.sigma_cusp ? json(*scan.sigma_cusp) : json(nullptr);
  a.digest = "cusp-scan n=" + std::to_string(n) + " sigma_cusp=" +
             (scan.sigma_cusp ? num(*scan.sigma_cusp) : std::string("none"));
  a.plot_x = "sigma";
  a.plot_y = {"F_max", "off_order_loss"};
  return a;
}

// two-level -------------------------------------------------------------------

void check_two_level(const Fields& f, const RunConfig&) {
  const double lo = f.real("w_min");
  const double hi = f.real("w_max");
  const int points = f.integer("points");
  f.check(lo >= 0.0, "w_min", "must be >= 0");
  f.check(hi > lo, "w_max", "must exceed w_min");
  f.check(points >= 2, "points", "must be >= 2");
  f.check(positive(f.real("interrogation_time")), "interrogation_time", "must be positive");
  f.check(f.integer("nodes") >= 0, "nodes", "must be >= 0 (0 selects automatically)");
  f.check(f.integer("phi_points") >= 5, "phi_points", "must be >= 5");
}

Artifacts run_two_level(const Fields& f, const RunConfig&) {
  const double lo = f.real("w_min");
  const double hi = f.real("w_max");
  const int points = f.integer("points");
  const double t = f.real("interrogation_time");
  const int nodes = f.integer("nodes");
  const auto phi = default_phi_grid(1, f.integer("phi_points"));
  Artifacts a;
  a.table.header = {"w", "F_pi", "G", "contrast", "N"};
  for (int i = 0; i < points; ++i) {
    const double w = lo + (hi - lo) * i / (points - 1);
    const double fid = two_level_fidelity(w, nodes);
    const auto mz = two_level_mz(w, t, phi, 1, nodes);
    a.table.rows.push_back({num(w), num(fid), num(mz.g.g), num(mz.g.contrast), num(mz.g.population)});
  }
  a.summary = {{"points", points}, {"interrogation_time", t}};
  a.digest = "two-level points=" + std::to_string(points) + " F_pi(w_max)=" + a.table.rows.back()[1] +
             " G(w_max)=" + a.table.rows.back()[2];
  a.plot_x = "w";
  a.plot_y = {"F_pi", "G"};
  return a;
}

// spont-loss -------------------------------------------------------------------

void check_spont_loss(const Fields& f, const RunConfig&) {
  f.check(positive(f.real("omega")), "omega", "must be positive");
  f.check(positive(f.real("tau")), "tau", "must be positive");
  f.check(all_positive(f.reals("intensities_w_cm2")), "intensities_w_cm2", "must be positive");
  const double s = f.real("max_loss");
  f.check(s > 0.0 && s < 1.0, "max_loss", "must lie in (0, 1)");
}

Artifacts run_spont_loss(const Fields& f, const RunConfig& cfg) {
  const double omega = f.real("omega");
  const double tau = f.real("tau");
  const double max_loss = f.real("max_loss");
  const auto transition = preset(cfg.preset);
  GaussianPulse pulse;
  pulse.amplitude = omega;
  pulse.duration = tau;
  Artifacts a;
  a.table.header = {"intensity_w_cm2", "omega", "tau",      "detuning_gamma",
                    "S",               "S_approx", "omega_max", "feasible"};
  int feasible = 0;
  for (double i_cm2 : f.reals("intensities_w_cm2")) {
    LaserBudget budget;
    budget.intensity = i_cm2 * kWattsPerCm2;
    budget.max_loss = max_loss;
    budget.transition = transition;
    const double s = scattering_loss(pulse, budget);
    const double s_approx = scattering_loss_approx(pulse, budget);
    double om_max = std::numeric_limits<double>::quiet_NaN();
    try {
      om_max = omega_max(budget.intensity, tau, max_loss, transition);
    } catch (const InfeasibleBudget&) {
    }
    const bool ok = s <= max_loss;
    feasible += ok;
    a.table.rows.push_back({num(i_cm2), num(omega), num(tau),
                            num(detuning(omega, budget.intensity, transition) / transition.linewidth),
                            num(s), num(s_approx), num(om_max), flag(ok)});
  }
  a.summary = {{"omega", omega}, {"tau", tau}, {"max_loss", max_loss}, {"feasible_rows", feasible}};
  a.digest = "spont-loss rows=" + std::to_string(a.table.rows.size()) +
             " feasible=" + std::to_string(feasible);
  if (feasible == 0) {
    a.summary["infeasible"] = true;
  }
  a.plot_x = "intensity_w_cm2";
  a.plot_y = {"S", "omega_max"};
  return a;
}

// constrained-optimize --------------------------------------------------------

void check_constrained(const Fields& f, const RunConfig& cfg) {
  const int n = f.integer("n");
  f.check(n >= 1, "n", "must be >= 1");
  f.check(positive(f.real("sigma")), "sigma", "must be positive");
  f.check(positive(f.real("intensity_w_cm2")), "intensity_w_cm2", "must be positive");
  const double s = f.real("max_loss");
  f.check(s > 0.0 && s < 1.0, "max_loss", "must lie in (0, 1)");
  const auto taus = f.reals("tau_grid");
  f.check(all_positive(taus) && ascending(taus), "tau_grid", "must be positive and ascending");
  f.check(f.integer("omega_points") >= 2, "omega_points", "must be >= 2");
  f.check(f.integer("max_evaluations") >= 1, "max_evaluations", "must be >= 1");
  (void)read_common(f, cfg);
}

Artifacts run_constrained(const Fields& f, const RunConfig& cfg) {
  const int n = f.integer("n");
  const double sigma = f.real("sigma");
  const auto c = read_common(f, cfg);
  LaserBudget budget;
  budget.intensity = f.real("intensity_w_cm2") * kWattsPerCm2;
  budget.max_loss = f.real("max_loss");
  budget.transition = preset(cfg.preset);
  ConstrainedSearch search;
  search.omega_points = f.integer("omega_points");
  search.max_evaluations = f.integer("max_evaluations");
  search.mirror = c.search;
  const auto r = constrained_optimize(cloud_of(n, sigma), budget, f.reals("tau_grid"), search);
  Artifacts a;
  a.table.header = {"n",         "sigma",          "omega_opt", "tau_opt",  "F_max",
                    "omega_max", "detuning_gamma", "S",         "at_clamp", "evals"};
  a.table.rows.push_back({std::to_string(n), num(sigma), num(r.omega_opt), num(r.tau_opt),
                          num(r.fidelity), num(r.omega_max),
                          num(r.detuning / budget.transition.linewidth), num(r.loss),
                          flag(r.at_clamp), std::to_string(r.evaluations)});
  Table scan;
  scan.header = {"tau", "feasible", "omega_max", "omega_opt", "F"};
  for (const auto& p : r.scan) {
    scan.rows.push_back({num(p.tau), flag(p.feasible), num(p.omega_max), num(p.omega_opt),
                         num(p.fidelity)});
  }
  a.extra.emplace_back("constrained-optimize_scan", scan);
  a.summary = {{"omega_opt", r.omega_opt}, {"tau_opt", r.tau_opt}, {"F_max", r.fidelity},
               {"omega_max", r.omega_max}, {"loss", r.loss},       {"at_clamp", r.at_clamp}};
  a.digest = "constrained-optimize n=" + std::to_string(n) + " omega_opt=" + num(r.omega_opt) +
             " tau_opt=" + num(r.tau_opt) + " F_max=" + num(r.fidelity) + " S=" + num(r.loss);
  a.plot_x = "tau";
  a.plot_y = {"F_max"};
  return a;
}

// mz-optimize and source-compare --------------------------------------------

const std::vector<std::string> kMzHeader{"source",  "n",      "sigma",  "G_max",
                                         "G_err",   "G_eff",  "omega_bs", "tau_bs",
                                         "omega_m", "tau_m",  "clamped"};

std::vector<std::string> mz_row(const std::string& source, int n, double sigma, const MzResult& r,
                                double geff) {
  return {source,
          std::to_string(n),
          num(sigma),
          num(r.g_max),
          num(r.g_err),
          num(geff),
          num(r.pulses.omega_bs),
          num(r.pulses.tau_bs),
          num(r.pulses.omega_m),
          num(r.pulses.tau_m),
          flag(r.clamped)};
}

void check_mz_optimize(const Fields& f, const RunConfig& cfg) {
  const int n = f.integer("n");
  const double sigma = f.real("sigma");
  f.check(n >= 1, "n", "must be >= 1");
  f.check(sigma >= 0.0 && std::isfinite(sigma), "sigma", "must be >= 0");
  const auto c = read_common(f, cfg);
  const auto mz = read_mz(f, c);
  f.domain([&] { mz.validate(); }, "mz");
  if (auto s = read_source(f.sub("source"))) {
    SourceModel src = *s;
    src.sigma = src.kind == SourceKind::plane_wave ? 0.0 : sigma;
    if (src.kind == SourceKind::plane_wave) {
      f.check(sigma == 0.0, "sigma", "plane-wave source needs sigma = 0");
    } else {
      f.check(sigma > 0.0, "sigma", "must be positive for this source");
      if (src.kind == SourceKind::thermal) {
        f.check(sigma <= src.sigma0, "sigma",
                "thermal velocity selection needs sigma <= source.sigma0");
      }
    }
  }
}

Artifacts run_mz_optimize(const Fields& f, const RunConfig& cfg) {
  const int n = f.integer("n");
  const double sigma = f.real("sigma");
  const auto c = read_common(f, cfg);
  MzSearch mz = read_mz(f, c);
  mz.mirror = with_restarts(mz.mirror, c, n, cfg.clamp, cfg.seed);
  SourceModel src = *read_source(f.sub("source"));
  src.sigma = src.kind == SourceKind::plane_wave ? 0.0 : sigma;
  const auto r = optimize_mz(n, sigma, cfg.clamp, mz);
  const double geff = g_eff(src, n, r.g_max);
  Artifacts a;
  a.table.header = kMzHeader;
  a.table.rows.push_back(mz_row(to_string(src.kind), n, sigma, r, geff));
  Table times;
  times.header = {"T", "G", "omega_bs", "tau_bs", "contrast", "N"};
  json per_time = json::array();
  for (const auto& p : r.per_time) {
    times.rows.push_back({num(p.interrogation_time), num(p.g), num(p.omega_bs), num(p.tau_bs),
                          num(p.detail.contrast), num(p.detail.population)});
    per_time.push_back({{"T", p.interrogation_time}, {"G", p.g}});
  }
  a.extra.emplace_back("mz-optimize_times", times);
  a.summary = {{"G_max", r.g_max},       {"G_err", r.g_err},           {"G_eff", geff},
               {"mirror", mirror_json(r.mirror)}, {"per_time", per_time},
               {"converged", r.converged}, {"evaluations", r.evaluations}};
  a.digest = "mz-optimize n=" + std::to_string(n) + " sigma=" + num(sigma) + " G_max=" +
             num(r.g_max) + " +- " + num(r.g_err) + " G_eff=" + num(geff);
  a.plot_x = "n";
  a.plot_y = {"G_max", "G_eff"};
  return a;
}

std::vector<SourceModel> read_sources(const Fields& f) {
  std::vector<SourceModel> out;
  const double sigma0 = f.real("sigma0");
  const double bec = f.real("expanded_bec_sigma");
  const double laser = f.real("atom_laser_sigma");
  const auto flux = f.optional_real("condensed_flux_ratio");
  for (const auto& name : f.texts("sources")) {
    SourceKind kind;
    try {
      kind = parse_source_kind(name);
    } catch (const ValidationError&) {
      f.check(false, "sources", "unknown source kind '" + name + "'");
      continue;
    }
    SourceModel s;
    switch (kind) {
      case SourceKind::thermal: s = SourceModel::thermal(sigma0, sigma0); break;
      case SourceKind::expanded_bec: s = SourceModel::expanded_bec(bec); break;
      case SourceKind::atom_laser: s = SourceModel::atom_laser(laser); break;
      case SourceKind::plane_wave: s = SourceModel::plane_wave(); break;
    }
    if (kind != SourceKind::thermal) s.flux_ratio = flux;
    out.push_back(s);
  }
  return out;
}

void check_source_compare(const Fields& f, const RunConfig& cfg) {
  const int lo = f.integer("n_min");
  const int hi = f.integer("n_max");
  f.check(lo >= 1, "n_min", "must be >= 1");
  f.check(hi >= lo, "n_max", "must be >= n_min");
  const double sigma0 = f.real("sigma0");
  f.check(positive(sigma0), "sigma0", "must be positive");
  const auto sigmas = f.reals("thermal_sigmas");
  f.check(all_positive(sigmas), "thermal_sigmas", "must be positive");
  for (double s : sigmas) {
    f.check(s <= sigma0, "thermal_sigmas", "thermal velocity selection needs sigma <= sigma0");
  }
  f.check(positive(f.real("expanded_bec_sigma")), "expanded_bec_sigma", "must be positive");
  f.check(positive(f.real("atom_laser_sigma")), "atom_laser_sigma", "must be positive");
  const auto flux = f.optional_real("condensed_flux_ratio");
  f.check(!flux || positive(*flux), "condensed_flux_ratio", "must be positive");
  (void)read_sources(f);
  const auto c = read_common(f, cfg);
  const auto mz = read_mz(f, c);
  f.domain([&] { mz.validate(); }, "mz");
}

Artifacts run_source_compare(const Fields& f, const RunConfig& cfg) {
  const auto c = read_common(f, cfg);
  const auto mz = read_mz(f, c);
  const auto sources = read_sources(f);
  const auto cmp = source_compare(sources, f.integer("n_min"), f.integer("n_max"),
                                  f.reals("thermal_sigmas"), cfg.clamp, mz);
  Artifacts a;
  a.table.header = kMzHeader;
  Table optima;
  optima.header = {"source", "n", "sigma", "G_eff"};
  json best = json::object();
  for (const auto& r : cmp.rows) {
    const auto name = to_string(r.source.kind);
    a.table.rows.push_back(mz_row(name, r.bragg_order, r.source.effective_sigma(), r.mz, r.g_eff));
    if (r.best) {
      optima.rows.push_back({name, std::to_string(r.bragg_order), num(r.source.effective_sigma()),
                             num(r.g_eff)});
      best[name] = {{"n", r.bragg_order}, {"sigma", r.source.effective_sigma()}, {"G_eff", r.g_eff}};
    }
  }
  a.extra.emplace_back("source-compare_optima", optima);
  a.summary = {{"best", best}};
  std::string d = "source-compare";
  for (const auto& row : optima.rows) d += " " + row[0] + ":n=" + row[1] + ",G_eff=" + row[3];
  a.digest = d;
  a.plot_x = "n";
  a.plot_y = {"G_eff"};
  a.plot_group = "source";
  return a;
}

const std::map<std::string, Subcommand>& registry() {
  static const std::map<std::string, Subcommand> r = [] {
    std::map<std::string, Subcommand> m;
    m["mirror-optimize"] = {with_common({{"n", 3}, {"sigma", 0.1}}), check_mirror_optimize,
                            run_mirror_optimize};
    m["mirror-scan"] = {with_common({{"orders", {1, 2, 3}}, {"sigmas", {0.05, 0.1, 0.2}}}),
                        check_mirror_scan, run_mirror_scan};
    m["cusp-scan"] = {with_common({{"n", 3},
                                   {"sigmas", {0.02, 0.05, 0.1, 0.2, 0.3}},
                                   {"threshold", kDefaultCuspThreshold}}),
                      check_cusp_scan, run_cusp_scan};
    m["two-level"] = {json{{"w_min", 0.0},
                           {"w_max", 5.0},
                           {"points", 50},
                           {"interrogation_time", kDefaultTwoLevelInterrogation},
                           {"nodes", 0},
                           {"phi_points", 9}},
                      check_two_level, run_two_level};
    m["spont-loss"] = {json{{"omega", 20.0},
                            {"tau", 1.0},
                            {"intensities_w_cm2", {0.1, 0.3, 1.0}},
                            {"max_loss", 0.01}},
                       check_spont_loss, run_spont_loss};
    m["constrained-optimize"] = {with_common({{"n", 5},
                                              {"sigma", 0.1},
                                              {"intensity_w_cm2", 1.0},
                                              {"max_loss", 0.01},
                                              {"tau_grid", {0.1, 0.2, 0.4, 0.8, 1.6}},
                                              {"omega_points", 8},
                                              {"max_evaluations", 40}}),
                                 check_constrained, run_constrained};
    json mz = with_common({{"n", 3}, {"sigma", 0.1}});
    mz["mz"] = mz_block();
    mz["source"] = {{"kind", "thermal"}, {"sigma0", 1.0}, {"flux_ratio", nullptr}};
    m["mz-optimize"] = {mz, check_mz_optimize, run_mz_optimize};
    json sc = with_common({{"n_min", 1},
                           {"n_max", 6},
                           {"thermal_sigmas", {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0}},
                           {"sigma0", 1.0},
                           {"sources", {"thermal", "expanded-bec", "atom-laser", "plane-wave"}},
                           {"expanded_bec_sigma", 0.1},
                           {"atom_laser_sigma", 0.01},
                           {"condensed_flux_ratio", nullptr}});
    sc["mz"] = mz_block();
    m["source-compare"] = {sc, check_source_compare, run_source_compare};
    return m;
  }();
  return r;
}

const Subcommand& lookup(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end()) throw ValidationError("unknown subcommand '" + name + "'");
  return it->second;
}

json merged_params(const RunConfig& cfg) {
  json merged = lookup(cfg.subcommand).defaults;
  merged.merge_patch(cfg.params);
  return merged;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{
      "mirror-optimize", "mirror-scan",          "cusp-scan",   "two-level",
      "spont-loss",      "constrained-optimize", "mz-optimize", "source-compare"};
  return names;
}

json RunConfig::to_json() const {
  json j{{"subcommand", subcommand},   {"params", params},
         {"out", out_dir.string()},    {"threads", threads},
         {"preset", preset},           {"seed", seed}};
  j["clamp"] = clamp ? json(*clamp) : json(nullptr);
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  static const std::vector<std::string> known{"subcommand", "params", "out", "threads",
                                              "preset",     "clamp",  "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ValidationError("config: unknown field '" + it.key() + "'");
    }
  }
  RunConfig c;
  try {
    if (j.contains("subcommand")) c.subcommand = j.at("subcommand").get<std::string>();
    if (j.contains("params")) c.params = j.at("params");
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    if (j.contains("preset")) c.preset = j.at("preset").get<std::string>();
    if (j.contains("clamp") && !j.at("clamp").is_null()) c.clamp = j.at("clamp").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

json default_params(const std::string& subcommand) { return lookup(subcommand).defaults; }

RunConfig default_config(const std::string& subcommand) {
  RunConfig c;
  c.subcommand = subcommand;
  c.params = default_params(subcommand);
  if (subcommand == "source-compare") c.clamp = 20.0;
  return c;
}

std::vector<std::string> validate(const RunConfig& config) {
  std::vector<std::string> out;
  auto it = registry().find(config.subcommand);
  if (it == registry().end()) {
    out.push_back("subcommand: unknown subcommand '" + config.subcommand + "'");
    return out;
  }
  if (!config.params.is_object()) {
    out.push_back("params: expected an object");
    return out;
  }
  if (config.threads < 0) out.push_back("threads: must be >= 0");
  if (config.clamp && !positive(*config.clamp)) out.push_back("clamp: must be positive");
  domain_check([&] { (void)preset(config.preset); }, "preset", out);
  unknown_keys(config.params, it->second.defaults, "params", out);
  const json merged = merged_params(config);
  const Fields f(merged, "params", out);
  it->second.check(f, config);
  return out;
}

int run(const RunConfig& config, std::ostream& digest, std::ostream& errors) {
  const auto violations = validate(config);
  if (!violations.empty()) {
    for (const auto& v : violations) errors << "invalid config: " << v << '\n';
    return kExitInvalid;
  }
  try {
    const json merged = merged_params(config);
    std::vector<std::string> unused;
    const Fields f(merged, "params", unused);
    Artifacts a = lookup(config.subcommand).run(f, config);

    std::filesystem::create_directories(config.out_dir);
    const std::string stem = config.subcommand;
    write_csv(config.out_dir / (stem + ".csv"), a.table);
    for (const auto& [name, table] : a.extra) write_csv(config.out_dir / (name + ".csv"), table);
    RunConfig resolved = config;
    resolved.params = merged;
    write_text(config.out_dir / "config.json", resolved.to_json().dump(2) + "\n");
    json summary{{"subcommand", stem}, {"config", resolved.to_json()}, {"result", a.summary},
                 {"digest", a.digest}};
    write_text(config.out_dir / (stem + ".json"), summary.dump(2) + "\n");
    write_plot_stub(config.out_dir / ("plot_" + stem + ".py"), stem + ".csv", a.plot_x, a.plot_y,
                    a.plot_group);
    digest << a.digest << '\n';
    if (a.summary.contains("infeasible")) return kExitInfeasible;
    return kExitOk;
  } catch (const InfeasibleBudget& e) {
    errors << "infeasible budget: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const ValidationError& e) {
    errors << "invalid config: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    errors << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace braggkit::cli
