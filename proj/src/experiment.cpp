#include "mfgvar/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mfgvar/field_io.hpp"

namespace mfgvar {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---- config reading ----

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) throw ConfigError(field(it.key()) + ": unknown field");
  }

  bool has(const char* k) const { return j_.contains(k); }
  const json& at(const char* k) const { return j_.at(k); }
  std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  void num(const char* k, double& out) const {
    if (!has(k)) return;
    if (!j_[k].is_number()) throw ConfigError(field(k) + ": expected a number");
    out = j_[k].get<double>();
  }
  void integer(const char* k, int& out) const {
    if (!has(k)) return;
    if (!j_[k].is_number_integer()) throw ConfigError(field(k) + ": expected an integer");
    out = j_[k].get<int>();
  }
  void str(const char* k, std::string& out) const {
    if (!has(k)) return;
    if (!j_[k].is_string()) throw ConfigError(field(k) + ": expected a string");
    out = j_[k].get<std::string>();
  }
  void boolean(const char* k, bool& out) const {
    if (!has(k)) return;
    if (!j_[k].is_boolean()) throw ConfigError(field(k) + ": expected true or false");
    out = j_[k].get<bool>();
  }
  void numbers(const char* k, std::vector<double>& out) const {
    if (!has(k)) return;
    if (!j_[k].is_array()) throw ConfigError(field(k) + ": expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < j_[k].size(); ++i) {
      if (!j_[k][i].is_number()) throw ConfigError(field(k) + "[" + std::to_string(i) + "]: expected a number");
      out.push_back(j_[k][i].get<double>());
    }
  }

 private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }
  const json& j_;
  std::string path_;
};

void read_model(const json& j, ModelSpec& m) {
  Reader r(j, "model");
  r.allow({"kind", "f", "Q", "alpha", "gamma", "beta", "m_min"});
  r.str("kind", m.kind);
  r.numbers("Q", m.Q);
  r.num("alpha", m.alpha);
  r.num("gamma", m.gamma);
  r.num("beta", m.beta);
  r.num("m_min", m.m_min);
  if (r.has("f")) {
    Reader f(r.at("f"), "model.f");
    f.allow({"poly", "center", "trig"});
    f.numbers("poly", m.poly);
    f.num("center", m.center);
    if (f.has("trig")) {
      const json& t = f.at("trig");
      if (!t.is_array()) throw ConfigError("model.f.trig: expected an array");
      m.trig.clear();
      for (std::size_t i = 0; i < t.size(); ++i) {
        Reader e(t[i], "model.f.trig[" + std::to_string(i) + "]");
        e.allow({"amplitude", "axis", "k", "sine"});
        Coupling::TrigTerm term;
        e.num("amplitude", term.amplitude);
        e.integer("axis", term.axis);
        e.integer("k", term.k);
        e.boolean("sine", term.sine);
        m.trig.push_back(term);
      }
    }
  }
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

// ---- seeded data ----

double normalize_mass(ScalarField& m) {
  const double mass = integrate(m);
  m *= 1.0 / mass;
  return mass;
}

// ---- output ----

struct Out {
  fs::path dir;
  std::vector<std::string> files;
  void field(const std::string& name, const FieldRecord& r) {
    const fs::path p = dir / name;
    write_csv(p.string(), r);
    files.push_back(p.string());
  }
  void text(const std::string& name, const std::string& body) {
    const fs::path p = dir / name;
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write " + p.string());
    f << body;
    files.push_back(p.string());
  }
};

struct Checks {
  json list = json::array();
  std::vector<std::string> failed;
  void add(const std::string& name, double value, double limit) {
    const bool pass = std::isfinite(value) && value <= limit;
    list.push_back({{"name", name}, {"value", value}, {"limit", limit}, {"passed", pass}});
    if (!pass) failed.push_back(name);
  }
};

std::string csv_num(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

TorusGrid space_grid(const ExperimentConfig& c) { return TorusGrid(c.grid.d, c.grid.n); }

json residual_json(const StationaryResidual& r) {
  return {{"hjb", r.hjb.max_abs()}, {"fp", r.fp.max_abs()}, {"max", r.max_norm}};
}

// value(s + h d) - value(s - h d) against the reported derivative
double directional_error(const StationaryState& s, const HamiltonianModel& h,
                         FunctionalReport (*fn)(const StationaryState&, const HamiltonianModel&),
                         const ScalarField& dm, const ScalarField& du, double dH, double step) {
  const FunctionalReport at = fn(s, h);
  StationaryState p = s, q = s;
  p.m += dm * step;
  p.u += du * step;
  p.Hbar += dH * step;
  q.m -= dm * step;
  q.u -= du * step;
  q.Hbar -= dH * step;
  const double fd = (fn(p, h).value - fn(q, h).value) / (2.0 * step);
  double pred = inner(at.dm[0], dm) + inner(at.du[0], du);
  if (at.dHbar) pred += *at.dHbar * dH;
  return std::abs(fd - pred) / std::max(1.0, std::abs(pred));
}

// ---- tasks ----

void task_report(const ExperimentConfig& c, Out& out, json& js, Checks& ck) {
  const auto h = c.model.build(c.grid.d);
  const TorusGrid g = space_grid(c);
  StationaryState s;
  s.grid = g;
  s.eps = c.dynamic.eps;
  s.Hbar = c.report.Hbar;
  s.m = ScalarField(g, 1.0);
  s.u = ScalarField(g);
  if (c.report.state == "random") {
    s.m += random_band_limited(g, c.seed, 2, 0.3);
    normalize_mass(s.m);
    s.u = random_band_limited(g, c.seed + 1, 2, 0.5);
  }
  const ScalarField dm = random_band_limited(g, c.seed + 2, 2, 0.5);
  const ScalarField du = random_band_limited(g, c.seed + 3, 2, 0.5);
  struct Named {
    const char* name;
    FunctionalReport (*fn)(const StationaryState&, const HamiltonianModel&);
  };
  const Named fns[] = {{"psi1_hat", psi1_hat}, {"psi2_hat", psi2_hat}, {"psi_tilde1", psi_tilde1},
                       {"psi_tilde2", psi_tilde2}};
  json arr = json::array();
  for (const auto& f : fns) {
    const FunctionalReport r = f.fn(s, *h);
    json e = {{"functional", f.name},
              {"value", r.value},
              {"value_alt", r.value_alt},
              {"grad_norms", {{"dm", r.dm[0].max_abs()}, {"du", r.du[0].max_abs()}}}};
    if (r.dHbar) e["grad_norms"]["dHbar"] = std::abs(*r.dHbar);
    const double err = directional_error(s, *h, f.fn, dm, du, 0.7, c.report.fd_step);
    e["identities_checked"] = {{"directional_derivative", err}};
    ck.add(std::string(f.name) + ".directional_derivative", err, c.solver.check_tol);
    ck.add(std::string(f.name) + ".two_forms", std::abs(r.value - r.value_alt), 1e-10);
    arr.push_back(e);
  }
  js["state"] = c.report.state;
  js["functionals"] = arr;
  out.field("m.csv", record_of(s.m));
  out.field("u.csv", record_of(s.u));
}

void task_stationary(const ExperimentConfig& c, Out& out, json& js, Checks& ck) {
  if (c.model.kind != "congestion") throw ConfigError("model.kind: solve-stationary needs a congestion model");
  const auto hp = c.model.build(c.grid.d);
  const auto& h = static_cast<const CongestionHamiltonian&>(*hp);
  const TorusGrid g = space_grid(c);
  StationaryOptions opt;
  opt.tol = c.solver.tol;
  opt.max_iter = c.solver.max_iter;
  StationaryResult r;
  const std::string& f = c.solver.formulation;
  if (f == "bb")
    r = solve_bb(h, g, opt);
  else if (f == "stream2d")
    r = solve_bb_2d_stream(h, g, opt);
  else if (f == "potential")
    r = solve_potential_a_gt_1(h, g, opt);
  else
    throw ConfigError("solver.formulation: expected bb, stream2d or potential");
  js["formulation"] = r.formulation;
  js["phi"] = r.objective;
  js["Hbar"] = r.Hbar;
  js["Hbar_check"] = r.Hbar_check;
  js["residuals"] = residual_json(r.residual);
  js["iterations"] = r.iterations;
  js["stationarity"] = r.stationarity;
  js["curl_defect"] = r.curl_defect;
  out.field("m.csv", record_of(r.m));
  out.field("u.csv", record_of(r.u));
  if (r.v) out.field("v.csv", record_of(*r.v));
  if (r.w)
    for (int a = 0; a < r.w->ncomp(); ++a) out.field("w" + std::to_string(a) + ".csv", record_of((*r.w)[a]));
  ck.add("pde_residual", r.residual.max_norm, c.solver.check_tol);
  ck.add("mass", std::abs(integrate(r.m) - 1.0), 1e-10);
  ck.add("Hbar_consistency", std::abs(r.Hbar - r.Hbar_check), c.solver.check_tol);
}

DynamicOptions dynamic_options(const ExperimentConfig& c) {
  DynamicOptions o;
  o.tol = c.solver.tol;
  o.max_newton = std::min(c.solver.max_iter, 200);
  o.picard_relax = c.solver.damping;
  return o;
}

SpaceTimeGrid st_grid(const ExperimentConfig& c) { return SpaceTimeGrid(space_grid(c), c.grid.n_t, c.grid.T); }

double hamiltonian_deviation(const DynamicState& s, const HamiltonianModel& h) {
  const auto v = hamiltonian_along(s, h);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double dev = 0.0;
  for (double x : v) dev = std::max(dev, std::abs(x - mean));
  return dev;
}

void task_dynamic(const ExperimentConfig& c, Out& out, json& js, Checks& ck, DynamicSystem sys) {
  const auto h = c.model.build(c.grid.d);
  const SpaceTimeGrid st = st_grid(c);
  const ScalarField m0 = initial_density(st.space, c.dynamic, c.seed);
  const ScalarField uT = terminal_cost(st.space, c.dynamic);
  const DynamicSolveResult r = solve_dynamic(*h, st, c.dynamic.eps, m0, uT, sys, dynamic_options(c));
  const FunctionalReport p1 = psi1(r.state, *h), p2 = psi2(r.state, *h);
  const double sc = social_cost(r.state, optimal_control(r.state, *h), *h);
  js["system"] = sys == DynamicSystem::MFG ? "mfg" : "mfc";
  js["residual"] = r.residual;
  js["iterations"] = r.newton_iterations;
  js["picard_iterations"] = r.picard_iterations;
  js["psi1"] = p1.value;
  js["psi2"] = p2.value;
  js["social_cost"] = sc;
  js["mass_drift"] = mass_drift(r.state);
  js["hamiltonian_deviation"] = hamiltonian_deviation(r.state, *h);
  out.field("m.csv", record_of(r.state.m, st.horizon));
  out.field("u.csv", record_of(r.state.u, st.horizon));
  ck.add("pde_residual", r.residual, c.solver.tol);
  ck.add("mass_drift", mass_drift(r.state), 1e-10);
  if (sys == DynamicSystem::MFC) ck.add("social_cost_identity", std::abs(sc + p2.value), 1e-8);
}

void task_compare(const ExperimentConfig& c, Out& out, json& js, Checks& ck) {
  const auto h = c.model.build(c.grid.d);
  const SpaceTimeGrid st = st_grid(c);
  std::ostringstream csv;
  csv << "instance,seed,psi2_mfg,psi2_mfc,social_mfg,social_mfc,holds\n";
  json rows = json::array();
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.dynamic.instances; ++i) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
    const ScalarField m0 = initial_density(st.space, c.dynamic, seed);
    const ScalarField uT = terminal_cost(st.space, c.dynamic);
    const auto mfg = solve_mfg(*h, st, c.dynamic.eps, m0, uT, dynamic_options(c));
    const auto mfc = solve_mfc(*h, st, c.dynamic.eps, m0, uT, dynamic_options(c));
    const PlannerComparison pc = compare_equilibrium_vs_planner(mfg.state, mfc.state, *h);
    csv << i << ',' << seed << ',' << csv_num(pc.psi2_mfg) << ',' << csv_num(pc.psi2_mfc) << ','
        << csv_num(pc.social_mfg) << ',' << csv_num(pc.social_mfc) << ',' << (pc.inequality_holds ? 1 : 0) << '\n';
    rows.push_back({{"seed", seed}, {"psi2_mfg", pc.psi2_mfg}, {"psi2_mfc", pc.psi2_mfc},
                    {"social_mfg", pc.social_mfg}, {"social_mfc", pc.social_mfc},
                    {"inequality_holds", pc.inequality_holds}});
    worst = std::max(worst, pc.psi2_mfg - pc.psi2_mfc);
    ck.add("social_identity_mfc[" + std::to_string(i) + "]", std::abs(pc.social_mfc + pc.psi2_mfc), 1e-8);
  }
  js["instances"] = rows;
  js["max_psi2_gap"] = worst;
  ck.add("planner_inequality", worst, 1e-8);
  out.text("compare.csv", csv.str());
}

Coupling bifurcation_coupling(const BifurcationSpec& b) { return Coupling::cubic_about_one(b.f1, b.fprime1, b.cubic_coef); }

void task_bifurcate(const ExperimentConfig& c, Out& out, json& js, Checks& ck) {
  const BifurcationSpec& b = c.bifurcation;
  const Coupling f = bifurcation_coupling(b);
  ContinuationOptions opt;
  opt.n_x = b.n_x;
  opt.n_t = b.n_t;
  opt.direction = b.direction;
  const BifurcationBranch br = continue_branch(f, b.d, b.amplitudes, opt);
  std::ostringstream csv;
  csv << "amplitude,T,residual,norm_M,nonstationarity\n";
  json pts = json::array();
  for (std::size_t k = 0; k < br.points.size(); ++k) {
    const BranchPoint& p = br.points[k];
    csv << csv_num(p.amplitude) << ',' << csv_num(p.state.T) << ',' << csv_num(p.residual) << ','
        << csv_num(l2_norm(p.state.M)) << ',' << csv_num(p.nonstationarity) << '\n';
    const OriginalPeriodic o = map_to_original(p.state, f);
    const OriginalResidual orr = periodic_residual(o, f);
    pts.push_back({{"amplitude", p.amplitude},
                   {"T", p.state.T},
                   {"Hbar", o.Hbar},
                   {"residual", p.residual},
                   {"original_residual", orr.max_norm},
                   {"slice_mass_defect", orr.max_slice_mass_defect},
                   {"nonstationarity", p.nonstationarity},
                   {"newton_iterations", p.newton_iterations}});
    const std::string tag = "point" + std::to_string(k) + "_";
    FieldRecord rm = record_of(o.m), ru = record_of(o.u);
    rm.horizon = ru.horizon = o.T;
    out.field(tag + "m.csv", rm);
    out.field(tag + "u.csv", ru);
    if (p.amplitude > 0.0) {
      ck.add(tag + "residual", p.residual, 1e-10);
      ck.add(tag + "original_residual", orr.max_norm, 1e-8);
      ck.add(tag + "slice_mass", orr.max_slice_mass_defect, 1e-10);
      ck.add(tag + "stationary_fraction", 0.1 - p.nonstationarity, 0.0);
    }
  }
  out.text("branch.csv", csv.str());
  js["Tbar"] = br.Tbar;
  js["fprime1"] = br.fprime1;
  js["d"] = br.d;
  js["direction"] = b.direction;
  js["points"] = pts;
  js["truncated"] = br.truncated;
  if (br.truncated) {
    js["message"] = br.message;
    throw SolverFailure("branch truncated: " + br.message);
  }
}

void task_spectrum(const ExperimentConfig& c, Out& out, json& js, Checks& ck) {
  const BifurcationSpec& b = c.bifurcation;
  const double Tb = critical_period(b.fprime1);
  std::ostringstream csv;
  csv << "T,sigma_closed_form,eig_nearest_zero,n_near_zero,kernel_dim\n";
  std::vector<double> Ts, eig;
  for (int k = 0; k < b.samples; ++k) {
    const double frac = b.samples == 1 ? 0.0 : static_cast<double>(k) / (b.samples - 1);
    const double T = Tb * (b.scan_min + (b.scan_max - b.scan_min) * frac);
    const LinearizedOperator op = assemble_A(T, b.fprime1, b.d, b.n_x, b.n_t);
    const auto all = near_zero_eigenvalues(op, std::numeric_limits<double>::infinity());
    double nearest = all.front();
    for (double e : all)
      if (std::abs(e) < std::abs(nearest)) nearest = e;
    int count = 0;
    for (double e : all)
      if (std::abs(e) < b.window) ++count;
    double sigma = std::numeric_limits<double>::quiet_NaN();
    try {
      sigma = sigma_branch(T, b.fprime1);
    } catch (const DomainError&) {
    }
    const int kd = kernel_at(op).dimension;
    csv << csv_num(T) << ',' << csv_num(sigma) << ',' << csv_num(nearest) << ',' << count << ',' << kd << '\n';
    Ts.push_back(T);
    eig.push_back(nearest);
  }
  out.text("spectrum.csv", csv.str());
  bool bracket = false;
  for (std::size_t k = 0; k + 1 < Ts.size(); ++k)
    if (Ts[k] < Tb && Tb < Ts[k + 1] && eig[k] < 0.0 && eig[k + 1] > 0.0) bracket = true;
  js["Tbar"] = Tb;
  js["sigma_slope"] = sigma_slope_at_critical(b.fprime1);
  js["samples"] = b.samples;
  js["zero_threshold"] = 1e-8;
  js["sign_change_brackets_Tbar"] = bracket;
  ck.add("sign_change_brackets_Tbar", bracket ? 0.0 : 1.0, 0.0);
}

void task_crosscheck(const ExperimentConfig& c, Out&, json& js, Checks& ck) {
  const DualityReport r = duality_crosscheck(c);
  js["residual"] = r.residual;
  js["psi1"] = r.psi1;
  js["cost_B"] = r.cost_B;
  js["cost_A"] = r.cost_A;
  js["B_plus_psi1"] = r.B_plus_psi1;
  js["A_minus_psi1"] = r.A_minus_psi1;
  js["conjugate_defect"] = r.conjugate_defect;
  ck.add("B_plus_psi1", std::abs(r.B_plus_psi1), c.solver.check_tol);
  ck.add("A_minus_psi1", std::abs(r.A_minus_psi1), c.solver.check_tol);
  ck.add("conjugate_defect", r.conjugate_defect, 1e-8);
}

}  // namespace

// ---- public ----

std::unique_ptr<HamiltonianModel> ModelSpec::build(int d) const {
  if (kind == "separable") return std::make_unique<SeparableHamiltonian>(d, coupling(), beta, m_min);
  if (kind == "congestion") {
    std::vector<double> q = Q;
    if (static_cast<int>(q.size()) > d) throw ConfigError("model.Q: more components than the dimension");
    q.resize(d, 0.0);
    return std::make_unique<CongestionHamiltonian>(q, alpha, gamma, coupling(), m_min);
  }
  throw ConfigError("model.kind: expected separable or congestion, got '" + kind + "'");
}

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"report",  "solve-stationary", "solve-mfg", "solve-mfc",
                                              "compare", "bifurcate",        "spectrum",  "crosscheck"};
  return names;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config at line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  ExperimentConfig c;
  Reader r(j, "");
  r.allow({"task", "model", "grid", "solver", "dynamic", "bifurcation", "report", "output_dir", "seed"});
  r.str("task", c.task);
  r.str("output_dir", c.output_dir);
  if (r.has("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed: expected a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (r.has("model")) read_model(j["model"], c.model);
  if (r.has("grid")) {
    Reader g(j["grid"], "grid");
    g.allow({"d", "n", "n_t", "T"});
    g.integer("d", c.grid.d);
    g.integer("n", c.grid.n);
    g.integer("n_t", c.grid.n_t);
    g.num("T", c.grid.T);
  }
  if (r.has("solver")) {
    Reader s(j["solver"], "solver");
    s.allow({"tol", "max_iter", "damping", "check_tol", "formulation"});
    s.num("tol", c.solver.tol);
    s.integer("max_iter", c.solver.max_iter);
    s.num("damping", c.solver.damping);
    s.num("check_tol", c.solver.check_tol);
    s.str("formulation", c.solver.formulation);
  }
  if (r.has("dynamic")) {
    Reader s(j["dynamic"], "dynamic");
    s.allow({"eps", "m0_amplitude", "m0_k", "m0_random", "uT_amplitude", "instances"});
    s.num("eps", c.dynamic.eps);
    s.num("m0_amplitude", c.dynamic.m0_amplitude);
    s.integer("m0_k", c.dynamic.m0_k);
    s.num("m0_random", c.dynamic.m0_random);
    s.num("uT_amplitude", c.dynamic.uT_amplitude);
    s.integer("instances", c.dynamic.instances);
  }
  if (r.has("bifurcation")) {
    Reader s(j["bifurcation"], "bifurcation");
    s.allow({"fprime1", "cubic_coef", "f1", "amplitudes", "direction", "d", "n_x", "n_t", "scan_min", "scan_max",
             "samples", "window"});
    s.num("fprime1", c.bifurcation.fprime1);
    s.num("cubic_coef", c.bifurcation.cubic_coef);
    s.num("f1", c.bifurcation.f1);
    s.numbers("amplitudes", c.bifurcation.amplitudes);
    s.integer("direction", c.bifurcation.direction);
    s.integer("d", c.bifurcation.d);
    s.integer("n_x", c.bifurcation.n_x);
    s.integer("n_t", c.bifurcation.n_t);
    s.num("scan_min", c.bifurcation.scan_min);
    s.num("scan_max", c.bifurcation.scan_max);
    s.integer("samples", c.bifurcation.samples);
    s.num("window", c.bifurcation.window);
  }
  if (r.has("report")) {
    Reader s(j["report"], "report");
    s.allow({"state", "Hbar", "fd_step"});
    s.str("state", c.report.state);
    s.num("Hbar", c.report.Hbar);
    s.num("fd_step", c.report.fd_step);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig& c) {
  const auto& names = task_names();
  if (std::find(names.begin(), names.end(), c.task) == names.end())
    throw ConfigError("task: unknown task '" + c.task + "'");
  const ModelSpec& m = c.model;
  if (m.kind != "separable" && m.kind != "congestion")
    throw ConfigError("model.kind: expected separable or congestion, got '" + m.kind + "'");
  if (m.kind == "congestion") {
    if (!(m.gamma >= 1.0))
      throw ConfigError("model.gamma = " + csv_num(m.gamma) + " violates the constraint gamma >= 1");
    if (!(m.alpha >= 0.0)) throw ConfigError("model.alpha must satisfy alpha >= 0");
    if (m.alpha == 1.0) throw ConfigError("model.alpha = 1 is excluded");
  } else if (!(m.beta > 1.0)) {
    throw ConfigError("model.beta must satisfy beta > 1");
  }
  if (!(m.m_min > 0.0)) throw ConfigError("model.m_min must be positive");
  if (m.poly.empty()) throw ConfigError("model.f.poly must not be empty");
  for (std::size_t i = 0; i < m.trig.size(); ++i)
    if (m.trig[i].axis < 0 || m.trig[i].axis >= c.grid.d)
      throw ConfigError("model.f.trig[" + std::to_string(i) + "].axis out of range");
  if (c.grid.d < 1) throw ConfigError("grid.d must be positive");
  if (c.grid.n < 2 || c.grid.n % 2) throw ConfigError("grid.n must be a positive even integer");
  if (c.grid.n_t < 2 || c.grid.n_t % 2) throw ConfigError("grid.n_t must be a positive even integer");
  if (!(c.grid.T > 0.0)) throw ConfigError("grid.T must be positive");
  if (!(c.solver.tol > 0.0)) throw ConfigError("solver.tol must be positive");
  if (!(c.solver.check_tol > 0.0)) throw ConfigError("solver.check_tol must be positive");
  if (c.solver.max_iter < 1) throw ConfigError("solver.max_iter must be positive");
  if (!(c.solver.damping > 0.0 && c.solver.damping <= 1.0)) throw ConfigError("solver.damping must lie in (0, 1]");
  if (!(c.dynamic.eps > 0.0) && (c.task == "solve-mfg" || c.task == "solve-mfc" || c.task == "compare" ||
                                  c.task == "crosscheck"))
    throw ConfigError("dynamic.eps must be positive");
  if (c.dynamic.instances < 1) throw ConfigError("dynamic.instances must be positive");
  if (!(c.report.fd_step > 0.0)) throw ConfigError("report.fd_step must be positive");
  if (c.report.state != "trivial" && c.report.state != "random")
    throw ConfigError("report.state: expected trivial or random");
  const BifurcationSpec& b = c.bifurcation;
  if (c.task == "bifurcate" || c.task == "spectrum") {
    if (!(b.fprime1 > -8.0 * M_PI * M_PI && b.fprime1 < -4.0 * M_PI * M_PI))
      throw ConfigError("bifurcation.fprime1 must lie in (-8 pi^2, -4 pi^2)");
    if (b.d < 1) throw ConfigError("bifurcation.d must be positive");
    if (b.n_x < 4 || b.n_t < 4 || b.n_x % 2 || b.n_t % 2)
      throw ConfigError("bifurcation.n_x and n_t must be even and at least 4");
    if (b.direction < 0 || b.direction >= 4 * b.d) throw ConfigError("bifurcation.direction must lie in [0, 4d)");
    if (b.samples < 1) throw ConfigError("bifurcation.samples must be positive");
    if (!(b.scan_min > 0.0 && b.scan_max > b.scan_min)) throw ConfigError("bifurcation scan range is empty");
    for (std::size_t i = 0; i < b.amplitudes.size(); ++i)
      if (!(b.amplitudes[i] >= 0.0) || (i > 0 && !(b.amplitudes[i] > b.amplitudes[i - 1])))
        throw ConfigError("bifurcation.amplitudes must be nonnegative and strictly increasing");
  }
}

std::string default_output_dir() {
  if (const char* e = std::getenv("MFGVAR_OUTPUT_DIR"); e && *e) return e;
  return "mfgvar_out";
}

ScalarField random_band_limited(const TorusGrid& g, std::uint64_t seed, int kmax, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int d = g.dim();
  // all wavevectors in [-kmax, kmax]^d with a positive leading component
  std::vector<std::vector<int>> ks;
  std::vector<int> k(d, -kmax);
  while (true) {
    int first = 0;
    for (int c : k)
      if (c != 0) {
        first = c;
        break;
      }
    if (first > 0) ks.push_back(k);
    int a = d - 1;
    while (a >= 0 && k[a] == kmax) k[a--] = -kmax;
    if (a < 0) break;
    ++k[a];
  }
  std::vector<double> ca(ks.size()), sa(ks.size());
  for (std::size_t q = 0; q < ks.size(); ++q) {
    ca[q] = U(rng);
    sa[q] = U(rng);
  }
  const double scale = amplitude / static_cast<double>(ks.size());
  return ScalarField::sample(g, [&](std::span<const double> x) {
    double v = 0.0;
    for (std::size_t q = 0; q < ks.size(); ++q) {
      double ph = 0.0;
      for (int a = 0; a < d; ++a) ph += ks[q][a] * x[a];
      v += ca[q] * std::cos(2.0 * M_PI * ph) + sa[q] * std::sin(2.0 * M_PI * ph);
    }
    return scale * v;
  });
}

ScalarField initial_density(const TorusGrid& g, const DynamicSpec& d, std::uint64_t seed) {
  ScalarField m = ScalarField::sample(
      g, [&](std::span<const double> x) { return 1.0 + d.m0_amplitude * std::cos(2.0 * M_PI * d.m0_k * x[0]); });
  if (d.m0_random != 0.0) m += random_band_limited(g, seed, 2, d.m0_random);
  if (!(m.min() > 0.0)) throw ConfigError("dynamic: initial density is not positive");
  normalize_mass(m);
  return m;
}

ScalarField terminal_cost(const TorusGrid& g, const DynamicSpec& d) {
  return ScalarField::sample(g, [&](std::span<const double> x) { return d.uT_amplitude * std::sin(2.0 * M_PI * x[0]); });
}

DualityReport duality_crosscheck(const DynamicState& s, const SeparableHamiltonian& h, double residual, double tol,
                                 double residual_threshold) {
  if (residual > residual_threshold)
    throw DomainError("state residual " + csv_num(residual) + " above threshold; cross-check meaningless");
  DualityReport r;
  r.residual = residual;
  r.psi1 = psi1(s, h).value;
  r.cost_B = cost_B(s, optimal_control(s, h), h);
  const TorusGrid& g = s.space();
  const int d = g.dim();
  std::vector<double> x(d);
  std::vector<ScalarField> ctrl;
  for (int j = 0; j < s.steps(); ++j) {
    ScalarField sj(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.point(i, x);
      const double m = s.m_mid(j)[i];
      const double fv = h.coupling().f(x, m);
      sj[i] = fv;
      const double direct = m * fv - h.coupling().F(x, m);
      r.conjugate_defect = std::max(r.conjugate_defect, std::abs(h.coupling().conjugate(x, fv) - direct));
    }
    ctrl.push_back(std::move(sj));
  }
  r.cost_A = cost_A(s, ctrl, h);
  r.B_plus_psi1 = r.cost_B + r.psi1;
  r.A_minus_psi1 = r.cost_A - r.psi1;
  r.passed = std::abs(r.B_plus_psi1) <= tol && std::abs(r.A_minus_psi1) <= tol && r.conjugate_defect <= 1e-8;
  return r;
}

DualityReport duality_crosscheck(const ExperimentConfig& c) {
  if (c.model.kind != "separable") throw ConfigError("model.kind: crosscheck needs a separable model");
  const auto hp = c.model.build(c.grid.d);
  const auto& h = static_cast<const SeparableHamiltonian&>(*hp);
  const SpaceTimeGrid st = st_grid(c);
  const ScalarField m0 = initial_density(st.space, c.dynamic, c.seed);
  const ScalarField uT = terminal_cost(st.space, c.dynamic);
  const DynamicSolveResult sol = solve_mfg(h, st, c.dynamic.eps, m0, uT, dynamic_options(c));
  return duality_crosscheck(sol.state, h, sol.residual, c.solver.check_tol, c.solver.check_tol);
}

RunResult run(const ExperimentConfig& c) {
  RunResult res;
  json js;
  js["task"] = c.task;
  js["seed"] = c.seed;
  Out out;
  out.dir = c.output_dir.empty() ? fs::path(default_output_dir()) : fs::path(c.output_dir);
  Checks ck;
  try {
    validate(c);
    std::error_code ec;
    fs::create_directories(out.dir, ec);
    if (ec) throw ConfigError("output directory " + out.dir.string() + " is not writable: " + ec.message());
    if (c.task == "report")
      task_report(c, out, js, ck);
    else if (c.task == "solve-stationary")
      task_stationary(c, out, js, ck);
    else if (c.task == "solve-mfg")
      task_dynamic(c, out, js, ck, DynamicSystem::MFG);
    else if (c.task == "solve-mfc")
      task_dynamic(c, out, js, ck, DynamicSystem::MFC);
    else if (c.task == "compare")
      task_compare(c, out, js, ck);
    else if (c.task == "bifurcate")
      task_bifurcate(c, out, js, ck);
    else if (c.task == "spectrum")
      task_spectrum(c, out, js, ck);
    else
      task_crosscheck(c, out, js, ck);
    js["checks"] = ck.list;
    res.failed_checks = ck.failed;
    res.exit_code = ck.failed.empty() ? 0 : 3;
    js["status"] = res.exit_code == 0 ? "pass" : "check_failure";
  } catch (const ConfigError& e) {
    js["status"] = "config_error";
    js["error"] = {{"kind", "config_error"}, {"message", e.what()}};
    res.error = e.what();
    res.exit_code = 2;
  } catch (const SolverFailure& e) {
    js["status"] = "solver_failure";
    js["error"] = {{"kind", "solver_failure"}, {"message", e.what()}};
    res.error = e.what();
    res.exit_code = 1;
  } catch (const DomainError& e) {
    js["status"] = "solver_failure";
    js["error"] = {{"kind", "domain_error"}, {"message", e.what()}};
    res.error = e.what();
    res.exit_code = 1;
  }
  res.summary = js.dump(2) + "\n";
  if (res.exit_code != 2 || fs::is_directory(out.dir)) {
    try {
      out.text("summary.json", res.summary);
    } catch (const ConfigError&) {
    }
  }
  res.files = out.files;
  return res;
}

}  // namespace mfgvar
