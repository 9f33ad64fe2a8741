// Batch front-end: every pipeline in the library exposed as a subcommand
// with a flat key=value config file, CLI-flag overrides (flags win), and
// deterministic CSV/JSON emission.
//
// Exit codes: 0 success, 1 validation failure (error JSON on stderr),
// 2 numerical budget exhaustion (partial results still emitted, flagged).

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fermires/fermires.hpp>

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace fermires;

namespace {

// ---------------------------------------------------------------------------
// Error carrier mapped onto the exit-code contract
// ---------------------------------------------------------------------------

struct CliFailure {
  int code;          // 1 validation, 2 budget
  std::string type;  // machine-readable tag
  std::string message;
};

[[noreturn]] void fail_validation(const std::string& msg) {
  throw CliFailure{1, "validation", msg};
}

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(int v) { return std::to_string(v); }

ojson json_rational(const Rational& r) {
  ojson j;
  j["num"] = (long long)r.numerator();
  j["den"] = (long long)r.denominator();
  j["value"] = std::to_string((long long)r.numerator()) + "/" +
               std::to_string((long long)r.denominator());
  return j;
}

ojson json_vec3(const Vec3& v) { return ojson::array({v[0], v[1], v[2]}); }

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string command;
  double lambda{6.0};
  std::map<std::string, double> tolerances;
  std::string output_dir{"."};
  long long seed{1};
  long long budget{0};  // 0: per-command default
  int threads{1};
  std::string output_format{"both"};  // json | csv | both

  // command-specific knobs (defaults documented in --help)
  std::string at{"auto"};  // generic | umbilic | axis | auto
  std::optional<Vec3> xi;
  int points{1000};
  int grid{256};
  int degree{5};
  int directions{64};
  double rmin{16.0};
  double rmax{4096.0};
  double cutoff{0.0};  // 0: choose per point kind
  int z_count{20};
  double p{1.25};
  double r{0.0};
  int section_radius{8};
  int section_radius_2{0};  // 0: skip the doubling comparison
  int box_radius{32};
  int weight_radius{2};
  int seeds{2};
  bool export_kernel{false};
  std::vector<double> eps;
  int trials{50};
  int dim_max{8};
  std::vector<double> p_list{1.0, 1.2, 1.25, 2.0};
};

const std::map<std::string, double> kToleranceDefaults = {
    {"curvature_rel", 1e-9},  // dual-route curvature agreement
    {"locus_residual", 1e-9}, // eigenvector residual on the locus
    {"identity_rel", 1e-8},   // directional-derivative identity
    {"quad_rel", 5e-4},       // oscillatory quadrature target
    {"kernel_rel", 1e-8},     // kernel grid-doubling stabilization
    {"boyd_tol", 1e-8},       // fixed-point tolerance for section norms
};

double tol(const RunConfig& cfg, const std::string& name) {
  auto it = cfg.tolerances.find(name);
  if (it != cfg.tolerances.end()) return it->second;
  return kToleranceDefaults.at(name);
}

ojson config_echo(const RunConfig& cfg) {
  ojson j;
  j["command"] = cfg.command;
  j["lambda"] = cfg.lambda;
  j["seed"] = cfg.seed;
  j["budget"] = cfg.budget;
  j["threads"] = cfg.threads;
  j["output_dir"] = cfg.output_dir;
  j["output"] = cfg.output_format;
  ojson tols;
  for (const auto& [k, v] : kToleranceDefaults)
    tols[k] = tol(cfg, k);
  j["tolerances"] = tols;
  ojson opt;
  opt["at"] = cfg.at;
  if (cfg.xi) opt["xi"] = json_vec3(*cfg.xi);
  opt["points"] = cfg.points;
  opt["grid"] = cfg.grid;
  opt["degree"] = cfg.degree;
  opt["directions"] = cfg.directions;
  opt["rmin"] = cfg.rmin;
  opt["rmax"] = cfg.rmax;
  opt["cutoff"] = cfg.cutoff;
  opt["z_count"] = cfg.z_count;
  opt["p"] = cfg.p;
  opt["r"] = cfg.r;
  opt["section_radius"] = cfg.section_radius;
  opt["section_radius_2"] = cfg.section_radius_2;
  opt["box_radius"] = cfg.box_radius;
  opt["weight_radius"] = cfg.weight_radius;
  opt["seeds"] = cfg.seeds;
  opt["export_kernel"] = cfg.export_kernel;
  opt["eps"] = cfg.eps;
  opt["trials"] = cfg.trials;
  opt["dim_max"] = cfg.dim_max;
  opt["p_list"] = cfg.p_list;
  j["options"] = opt;
  return j;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

struct Emitter {
  fs::path dir;
  std::vector<std::string> written;

  void write_text(const std::string& name, const std::string& content) {
    fs::create_directories(dir);
    fs::path path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_validation("cannot write " + path.string());
    out << content;
    written.push_back(path.string());
  }
};

std::string csv_preamble(const RunConfig& cfg) {
  ojson echo = config_echo(cfg);
  return std::string("# fermires ") + kVersion + "\n# config: " +
         echo.dump() + "\n";
}

ojson report_header(const RunConfig& cfg) {
  ojson j;
  j["version"] = kVersion;
  j["command"] = cfg.command;
  j["config"] = config_echo(cfg);
  return j;
}

bool want_csv(const RunConfig& cfg) {
  return cfg.output_format == "csv" || cfg.output_format == "both";
}
bool want_json(const RunConfig& cfg) {
  return cfg.output_format == "json" || cfg.output_format == "both";
}

void finish(const RunConfig& cfg, Emitter& em, ojson& report) {
  if (want_json(cfg))
    em.write_text(cfg.command + ".json", report.dump(2) + "\n");
  report["emitted"] = em.written;
  std::printf("%s\n", report.dump(2).c_str());
}

// ---------------------------------------------------------------------------
// Point selection shared by taylor / newton / decay
// ---------------------------------------------------------------------------

TorusPoint generic_surface_base(double lambda) {
  double E = 3.0 - lambda / 2.0;
  for (const Vec2 free : {Vec2{0.1, 0.1}, Vec2{0.15, 0.2}, Vec2{0.2, 0.35}}) {
    double a3 = E - std::cos(kTwoPi * free[0]) - std::cos(kTwoPi * free[1]);
    if (std::fabs(a3) < 1.0 - 1e-9) {
      double x3 = std::acos(a3) / kTwoPi;
      return TorusPoint::at(free[0], free[1], x3);
    }
  }
  fail_validation("no generic base point found for lambda = " + fmt(lambda));
}

FermiPatch manual_patch(const Vec3& xi, double lambda, double radius) {
  FermiPatch patch;
  patch.energy = EnergyLevel::from_lambda(lambda);
  patch.solved_axis = 2;
  patch.base = TorusPoint::at(xi);
  patch.branch = patch.base.b[2] > 0.0 ? +1 : -1;
  patch.radius = radius;
  return patch;
}

// Resolve --at / --xi into a chart centered at the requested point.
FermiPatch select_patch(const RunConfig& cfg, std::string* kind_out) {
  std::string at = cfg.at;
  if (at == "auto") {
    if (cfg.xi)
      at = "explicit";
    else if (std::fabs(cfg.lambda - 6.0) < 1e-12)
      at = "umbilic";
    else if (cfg.lambda > 4.0 && cfg.lambda < 8.0)
      at = "axis";
    else
      at = "generic";
  }
  if (kind_out) *kind_out = at;

  if (at == "umbilic") {
    if (std::fabs(cfg.lambda - 6.0) > 1e-12)
      fail_validation("the umbilic point exists only at lambda = 6");
    return manual_patch(Vec3{0.25, 0.25, 0.25}, 6.0, 0.05);
  }
  if (at == "axis") {
    if (!(cfg.lambda > 4.0 && cfg.lambda < 8.0))
      fail_validation("axis points require lambda strictly inside (4, 8)");
    double E = 3.0 - cfg.lambda / 2.0;
    double t = std::acos(E) / kTwoPi;
    return manual_patch(Vec3{0.25, t, 0.25}, cfg.lambda, 0.05);
  }
  if (at == "generic") {
    return make_patch(generic_surface_base(cfg.lambda),
                      EnergyLevel::from_lambda(cfg.lambda));
  }
  if (at == "explicit") {
    if (!cfg.xi) fail_validation("--at explicit requires --xi x1,x2,x3");
    return make_patch(TorusPoint::at(*cfg.xi),
                      EnergyLevel::from_lambda(cfg.lambda));
  }
  fail_validation("unknown --at value '" + at +
                  "' (expected generic|umbilic|axis|auto)");
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int run_thresholds(const RunConfig& cfg, Emitter& em) {
  ojson report = report_header(cfg);
  ojson pts = ojson::array();
  std::string csv = csv_preamble(cfg) + "xi1,xi2,xi3,energy,kind\n";
  for (const ThresholdPoint& tp : critical_points()) {
    ojson j;
    j["xi"] = json_vec3(tp.point.xi);
    j["energy"] = tp.energy;
    j["kind"] = to_string(tp.kind);
    pts.push_back(j);
    csv += fmt(tp.point.xi[0]) + "," + fmt(tp.point.xi[1]) + "," +
           fmt(tp.point.xi[2]) + "," + fmt(tp.energy) + "," +
           to_string(tp.kind) + "\n";
  }
  report["count"] = pts.size();
  report["critical_points"] = pts;
  if (want_csv(cfg)) em.write_text("thresholds.csv", csv);

  int code = 0;
  if (!cfg.eps.empty()) {
    // Near-threshold norm scan along the eps ladder.
    if (cfg.r <= 0.0)
      fail_validation("--eps requires a weight exponent --r > 0");
    KernelOptions opts;
    opts.grid_cap = cfg.budget > 0 ? (int)cfg.budget : 512;
    opts.rel_tol = tol(cfg, "kernel_rel");
    opts.require_convergence = false;
    NormScanReport scan =
        threshold_scan(cfg.p, cfg.r, cfg.eps, cfg.seeds, cfg.section_radius,
                       cfg.box_radius, opts, cfg.weight_radius);

    std::string sec = csv_preamble(cfg) +
                      "z_re,z_im,p,r,section_radius,norm,flag\n";
    std::string wtd = csv_preamble(cfg) + "z_re,z_im,p,r,weighted_norm,flag\n";
    bool any_flag = false;
    for (std::size_t i = 0; i < scan.z_samples.size(); ++i) {
      bool flag = scan.flags[i];
      any_flag = any_flag || flag;
      sec += fmt(scan.z_samples[i].real()) + "," +
             fmt(scan.z_samples[i].imag()) + "," + fmt(scan.p) + "," +
             fmt(scan.r) + "," + fmt(scan.section_radius) + "," +
             fmt(scan.norms[i]) + "," + (flag ? "1" : "0") + "\n";
      wtd += fmt(scan.z_samples[i].real()) + "," +
             fmt(scan.z_samples[i].imag()) + "," + fmt(scan.p) + "," +
             fmt(scan.r) + "," + fmt(scan.weighted_norms[i]) + "," +
             (flag ? "1" : "0") + "\n";
    }
    if (want_csv(cfg)) {
      em.write_text("threshold_sections.csv", sec);
      em.write_text("threshold_weighted.csv", wtd);
    }
    ojson near;
    near["p"] = scan.p;
    near["r"] = scan.r;
    near["section_radius"] = scan.section_radius;
    near["eps"] = cfg.eps;
    near["max_norm"] = scan.max_norm;
    near["flagged"] = any_flag;
    if (scan.near_threshold_slope)
      near["envelope_slope"] = *scan.near_threshold_slope;
    report["near_threshold"] = near;
    if (any_flag) code = 2;
  }
  finish(cfg, em, report);
  return code;
}

int run_curvature_scan(const RunConfig& cfg, Emitter& em) {
  if (cfg.points < 1) fail_validation("--points must be positive");
  if (cfg.lambda <= 0.0 || cfg.lambda >= 12.0)
    fail_validation("curvature scan requires lambda inside (0, 12)");
  EnergyLevel energy = EnergyLevel::from_lambda(cfg.lambda);
  std::mt19937_64 rng((std::uint64_t)cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::string csv =
      csv_preamble(cfg) + "xi1,xi2,xi3,K_closed,K_graph,rel_err\n";
  double max_rel = 0.0;
  int accepted = 0;
  while (accepted < cfg.points) {
    double x1 = unif(rng), x2 = unif(rng);
    double a3 = energy.E - std::cos(kTwoPi * x1) - std::cos(kTwoPi * x2);
    if (std::fabs(a3) >= 1.0 - 1e-9) continue;
    double x3 = std::acos(a3) / kTwoPi;
    if (unif(rng) < 0.5) x3 = 1.0 - x3;
    TorusPoint pt = TorusPoint::at(x1, x2, x3);
    double bnorm2 = pt.b[0] * pt.b[0] + pt.b[1] * pt.b[1] + pt.b[2] * pt.b[2];
    if (bnorm2 < 1e-6) continue;
    CurvatureConsistency cc = curvature_consistency(pt);
    double scale = std::max({std::fabs(cc.closed_form),
                             std::fabs(cc.graph_route), 1e-300});
    double rel = std::fabs(cc.closed_form - cc.graph_route) / scale;
    max_rel = std::max(max_rel, rel);
    csv += fmt(pt.xi[0]) + "," + fmt(pt.xi[1]) + "," + fmt(pt.xi[2]) + "," +
           fmt(cc.closed_form) + "," + fmt(cc.graph_route) + "," + fmt(rel) +
           "\n";
    ++accepted;
  }
  if (want_csv(cfg)) em.write_text("curvature_scan.csv", csv);

  ojson report = report_header(cfg);
  report["points"] = cfg.points;
  report["max_rel_err"] = max_rel;
  report["tolerance"] = tol(cfg, "curvature_rel");
  report["pass"] = max_rel < tol(cfg, "curvature_rel");
  finish(cfg, em, report);
  return 0;
}

int run_degenerate_locus(const RunConfig& cfg, Emitter& em) {
  if (cfg.grid < 16) fail_validation("--grid must be at least 16");
  if (cfg.lambda <= 0.0 || cfg.lambda >= 12.0)
    fail_validation("degenerate locus requires lambda inside (0, 12)");
  auto pts = zero_curvature_locus(EnergyLevel::from_lambda(cfg.lambda),
                                  cfg.grid);
  ojson report = report_header(cfg);
  ojson arr = ojson::array();
  std::string csv = csv_preamble(cfg) + "xi1,xi2,xi3,umbilic,transversal\n";
  for (const DegenerateLocusPoint& dp : pts) {
    ojson j;
    j["xi"] = json_vec3(dp.point.xi);
    j["energy"] = dp.energy;
    j["umbilic"] = dp.umbilic;
    j["transversal"] = dp.transversal;
    arr.push_back(j);
    csv += fmt(dp.point.xi[0]) + "," + fmt(dp.point.xi[1]) + "," +
           fmt(dp.point.xi[2]) + "," + (dp.umbilic ? "1" : "0") + "," +
           (dp.transversal ? "1" : "0") + "\n";
  }
  report["lambda"] = cfg.lambda;
  report["count"] = arr.size();
  report["points"] = arr;
  if (want_csv(cfg)) em.write_text("degenerate_locus.csv", csv);
  finish(cfg, em, report);
  return 0;
}

// Taylor model shared by the taylor and newton subcommands.
struct ModelBundle {
  FermiPatch patch;
  std::string kind;
  TaylorModel model;
};

ModelBundle build_model(const RunConfig& cfg) {
  if (cfg.degree < 2 || cfg.degree > 6)
    fail_validation("--degree must lie in [2, 6]");
  ModelBundle mb;
  mb.patch = select_patch(cfg, &mb.kind);
  try {
    mb.model = taylor_expand(mb.patch, mb.patch.base_free(), cfg.degree, true);
  } catch (const EigenvalueCollision&) {
    // Degenerate quadratic part (the umbilic): the raw chart is already
    // a normal form.
    mb.model = taylor_expand(mb.patch, mb.patch.base_free(), cfg.degree,
                             false);
  }
  return mb;
}

int run_taylor(const RunConfig& cfg, Emitter& em) {
  ModelBundle mb = build_model(cfg);
  ojson report = report_header(cfg);
  report["point_kind"] = mb.kind;
  report["base_xi"] = json_vec3(mb.patch.base.xi);
  report["solved_axis"] = mb.patch.solved_axis;
  report["branch"] = mb.patch.branch;
  report["degree"] = mb.model.degree;
  report["rotated"] = mb.model.rotated;
  report["rotation"] = ojson::array({mb.model.rotation[0],
                                     mb.model.rotation[1],
                                     mb.model.rotation[2],
                                     mb.model.rotation[3]});
  ojson coeffs = ojson::array();
  std::string csv = csv_preamble(cfg) + "j1,j2,coefficient\n";
  for (const auto& [idx, c] : mb.model.coeffs) {
    ojson j;
    j["j1"] = idx[0];
    j["j2"] = idx[1];
    j["value"] = c;
    coeffs.push_back(j);
    csv += fmt(idx[0]) + "," + fmt(idx[1]) + "," + fmt(c) + "\n";
  }
  report["coefficients"] = coeffs;

  try {
    NormalFormCase nf = classify_normal_form(mb.model, mb.patch.energy);
    ojson cls;
    cls["case"] = to_string(nf.case_tag);
    ojson cons = ojson::array();
    for (const auto& [name, residual] : nf.verified_constraints) {
      ojson c;
      c["constraint"] = name;
      c["residual"] = residual;
      cons.push_back(c);
    }
    cls["constraints"] = cons;
    report["classification"] = cls;
  } catch (const UnclassifiedPoint&) {
    report["classification"] = ojson{{"case", "unclassified"}};
  } catch (const PreconditionViolated&) {
    report["classification"] = ojson{{"case", "not-applicable"}};
  }

  if (want_csv(cfg)) em.write_text("taylor.csv", csv);
  finish(cfg, em, report);
  return 0;
}

int run_newton(const RunConfig& cfg, Emitter& em) {
  ModelBundle mb = build_model(cfg);
  NewtonData nd = newton_polyhedron(mb.model);
  AdaptednessReport rep = adaptedness_and_exponent(nd);

  ojson report = report_header(cfg);
  report["point_kind"] = mb.kind;
  report["base_xi"] = json_vec3(mb.patch.base.xi);
  report["d"] = json_rational(nd.newton_distance);
  const char* face = nd.face_kind == FaceKind::Vertex        ? "vertex"
                     : nd.face_kind == FaceKind::Edge        ? "edge"
                     : nd.face_kind == FaceKind::RayVertical ? "ray-vertical"
                                                             : "ray-horizontal";
  report["face_kind"] = face;
  ojson verts = ojson::array();
  for (const RatPoint& v : nd.polyhedron_vertices)
    verts.push_back(ojson::array({json_rational(v.x), json_rational(v.y)}));
  report["vertices"] = verts;
  report["vanishing_order"] = nd.vanishing_order;
  report["adapted"] = rep.adapted;
  if (nd.height) report["height"] = json_rational(*nd.height);
  if (rep.exponent)
    report["exponent"] = json_rational(*rep.exponent);
  else
    report["exponent"] = nullptr;

  std::string csv = csv_preamble(cfg) + "vertex_x,vertex_y\n";
  for (const RatPoint& v : nd.polyhedron_vertices)
    csv += fmt(boost::rational_cast<double>(v.x)) + "," +
           fmt(boost::rational_cast<double>(v.y)) + "\n";
  if (want_csv(cfg)) em.write_text("newton.csv", csv);
  finish(cfg, em, report);
  return 0;
}

int run_decay(const RunConfig& cfg, Emitter& em) {
  if (cfg.directions < 1) fail_validation("--directions must be positive");
  std::string kind;
  FermiPatch patch = select_patch(cfg, &kind);

  CutoffSpec cutoff;
  cutoff.center = patch.base_free();
  double want = cfg.cutoff > 0.0 ? cfg.cutoff : 0.1;
  cutoff.radius = std::min(want, patch.radius);

  OscBudget budget;
  if (cfg.budget > 0) budget.panel_cap = (int)cfg.budget;
  budget.target_factor = tol(cfg, "quad_rel");
  // Long dyadic ladders: three Gauss-12 cycles per panel keeps the
  // order-12 vs order-10 check armed at half the node count.
  budget.phase_per_panel = 6.0 * kPi;

  auto fits = decay_scan(patch, cutoff, cfg.directions, cfg.rmin, cfg.rmax,
                         budget, cfg.threads);

  // Stamp the polyhedron prediction when the center is a classified point.
  std::optional<Rational> predicted;
  if (kind == "umbilic" || kind == "axis") {
    TaylorModel model =
        taylor_expand(patch, patch.base_free(), 5, kind == "axis");
    predicted = adaptedness_and_exponent(newton_polyhedron(model)).exponent;
    for (DecayFit& f : fits) f.predicted = predicted;
  }

  std::string csv =
      csv_preamble(cfg) +
      "direction_x,direction_y,direction_z,R,abs_value,quad_error,tainted\n";
  bool any_tainted = false;
  for (const DecayFit& f : fits) {
    any_tainted = any_tainted || f.tainted;
    for (std::size_t i = 0; i < f.radii.size(); ++i) {
      const OscSample& s = f.samples[i];
      bool bad = s.unreliable || s.budget_exceeded;
      csv += fmt(f.direction[0]) + "," + fmt(f.direction[1]) + "," +
             fmt(f.direction[2]) + "," + fmt(f.radii[i]) + "," +
             fmt(std::abs(s.value)) + "," + fmt(s.quad_error) + "," +
             (bad ? "1" : "0") + "\n";
    }
  }
  if (want_csv(cfg)) em.write_text("decay_samples.csv", csv);

  ojson report = report_header(cfg);
  report["point_kind"] = kind;
  report["base_xi"] = json_vec3(patch.base.xi);
  report["cutoff_radius"] = cutoff.radius;
  report["min_fitted_exponent"] = min_fitted_exponent(fits);
  if (predicted) report["predicted_exponent"] = json_rational(*predicted);
  ojson arr = ojson::array();
  for (const DecayFit& f : fits) {
    ojson j;
    j["direction"] = json_vec3(f.direction);
    j["fitted_exponent"] = f.fitted_exponent;
    j["fit_residual"] = f.fit_residual;
    j["tainted"] = f.tainted;
    arr.push_back(j);
  }
  report["fits"] = arr;
  report["flagged"] = any_tainted;
  finish(cfg, em, report);
  return any_tainted ? 2 : 0;
}

int run_resolvent_scan(const RunConfig& cfg, Emitter& em) {
  if (cfg.z_count < 1) fail_validation("--z-count must be positive");
  std::vector<Complex> zs;
  for (int k = 0; k < cfg.z_count; ++k)
    zs.emplace_back(12.0 * (k + 0.5) / cfg.z_count, 0.5);

  KernelOptions opts;
  opts.grid_cap = cfg.budget > 0 ? (int)cfg.budget : 512;
  opts.rel_tol = tol(cfg, "kernel_rel");
  opts.require_convergence = false;

  NormScanReport scan =
      section_norm_scan(zs, cfg.p, cfg.section_radius, cfg.box_radius, opts);

  std::string csv = csv_preamble(cfg) + "z_re,z_im,p,section_radius,norm,flag\n";
  bool any_flag = false;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    any_flag = any_flag || scan.flags[i];
    csv += fmt(zs[i].real()) + "," + fmt(zs[i].imag()) + "," + fmt(scan.p) +
           "," + fmt(scan.section_radius) + "," + fmt(scan.norms[i]) + "," +
           (scan.flags[i] ? "1" : "0") + "\n";
  }
  if (want_csv(cfg)) em.write_text("resolvent_scan.csv", csv);

  ojson report = report_header(cfg);
  report["p"] = scan.p;
  report["section_radius"] = scan.section_radius;
  report["max_norm"] = scan.max_norm;
  report["flagged"] = any_flag;
  ojson norms = ojson::array();
  for (std::size_t i = 0; i < zs.size(); ++i) {
    ojson j;
    j["z"] = ojson::array({zs[i].real(), zs[i].imag()});
    j["norm"] = scan.norms[i];
    j["flag"] = (bool)scan.flags[i];
    norms.push_back(j);
  }
  report["norms"] = norms;

  if (cfg.section_radius_2 > 0) {
    NormScanReport scan2 = section_norm_scan(zs, cfg.p, cfg.section_radius_2,
                                             cfg.box_radius, opts);
    ojson growth;
    growth["section_radius"] = scan2.section_radius;
    growth["max_norm"] = scan2.max_norm;
    growth["relative_growth"] = scan2.max_norm / scan.max_norm - 1.0;
    report["doubled_section"] = growth;
    for (std::size_t i = 0; i < zs.size(); ++i)
      any_flag = any_flag || scan2.flags[i];
  }

  if (cfg.export_kernel) {
    int L = std::min(cfg.box_radius, 8);
    ResolventGrid grid =
        kernel(zs.front(), std::max(64, 4 * cfg.box_radius), cfg.box_radius,
               opts);
    std::string dat;
    for (int x = -L; x <= L; ++x)
      for (int y = -L; y <= L; ++y)
        for (int z = -L; z <= L; ++z) {
          Complex v = grid.at(x, y, z);
          dat += fmt(x) + " " + fmt(y) + " " + fmt(z) + " " +
                 fmt(v.real()) + " " + fmt(v.imag()) + "\n";
        }
    em.write_text("kernel.dat", dat);
    report["kernel_export"] = ojson{{"z", ojson::array({zs.front().real(),
                                                        zs.front().imag()})},
                                    {"box_radius", L},
                                    {"converged", grid.converged}};
    any_flag = any_flag || !grid.converged;
  }

  report["flagged"] = any_flag;
  finish(cfg, em, report);
  return any_flag ? 2 : 0;
}

int run_holder_test(const RunConfig& cfg, Emitter& em) {
  if (cfg.trials < 1) fail_validation("--trials must be positive");
  if (cfg.dim_max < 1 || cfg.dim_max > 32)
    fail_validation("--dim-max must lie in [1, 32]");
  for (double p : cfg.p_list)
    if (p < 1.0 || p > 2.0)
      fail_validation("every entry of --p-list must lie in [1, 2]");

  std::mt19937_64 rng((std::uint64_t)cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> dim(2, cfg.dim_max);

  std::string csv = csv_preamble(cfg) + "trial,rows,cols,p,c_direct,c_weighted\n";
  double max_upper = -1e300, min_lower = 1e300;
  for (int t = 0; t < cfg.trials; ++t) {
    int rows = dim(rng), cols = dim(rng);
    Eigen::MatrixXd A(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) A(i, j) = gauss(rng);
    for (double p : cfg.p_list) {
      HolderReport rep = holder_equivalence_test(A, p, 20);
      max_upper = std::max(max_upper, rep.c_weighted - rep.c_direct);
      min_lower = std::min(min_lower, rep.c_weighted - rep.c_direct);
      csv += fmt(t) + "," + fmt(rows) + "," + fmt(cols) + "," + fmt(p) + "," +
             fmt(rep.c_direct) + "," + fmt(rep.c_weighted) + "\n";
    }
  }
  if (want_csv(cfg)) em.write_text("holder_test.csv", csv);

  ojson report = report_header(cfg);
  report["trials"] = cfg.trials;
  report["max_upper_violation"] = max_upper;
  report["min_lower_margin"] = min_lower;
  report["pass"] = max_upper <= 1e-6 && min_lower >= -1e-3;
  finish(cfg, em, report);
  return 0;
}

// ---------------------------------------------------------------------------
// Config file + flag plumbing
// ---------------------------------------------------------------------------

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot read config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    auto issp = [](unsigned char c) { return std::isspace(c); };
    while (!s.empty() && issp(s.front())) s.erase(s.begin());
    while (!s.empty() && issp(s.back())) s.pop_back();
    return s;
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      fail_validation("config line " + std::to_string(lineno) +
                      " is not key=value");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail_validation("cannot parse " + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) fail_validation(what + " is empty");
  return out;
}

} // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  std::string config_path, preset, xi_text, eps_text, p_list_text;
  std::vector<std::string> tol_args;

  CLI::App app{
      "fermires: dispersive decay and resolvent bounds for the cubic-lattice "
      "band structure"};
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--config", config_path,
                 "flat key=value config file (flags win over file values)");
  auto* opt_lambda =
      app.add_option("--lambda", cfg.lambda, "energy level in (0, 12)");
  app.add_option("--preset", preset,
                 "named level: band-i (2), band-iii (5), umbilic (6), "
                 "near-threshold (4.05)");
  app.add_option("--output", cfg.output_format, "json | csv | both")
      ->check(CLI::IsMember({"json", "csv", "both"}));
  auto* opt_outdir = app.add_option(
      "--output-dir", cfg.output_dir,
      "report directory (FERMIRES_OUTPUT_DIR overrides the default)");
  app.add_option("--seed", cfg.seed, "PRNG seed for randomized stages");
  app.add_option("--budget", cfg.budget,
                 "quadrature/iteration cap (0: per-command default)");
  app.add_option("--threads", cfg.threads, "worker cap for parallel scans")
      ->check(CLI::Range(1, 64));
  app.add_option("--tol", tol_args,
                 "tolerance override name=value; names: curvature_rel, "
                 "locus_residual, identity_rel, quad_rel, kernel_rel, "
                 "boyd_tol");

  auto* sc_curv = app.add_subcommand(
      "curvature-scan", "dual-route Gauss curvature agreement on a level set");
  sc_curv->add_option("--points", cfg.points, "sample count (default 1000)");

  auto* sc_locus = app.add_subcommand(
      "degenerate-locus", "all curvature-degenerate points of a level set");
  sc_locus->add_option("--grid", cfg.grid,
                       "seed grid resolution (default 256)");

  auto* sc_taylor = app.add_subcommand(
      "taylor", "graph-chart Taylor normal form at a surface point");
  auto* sc_newton = app.add_subcommand(
      "newton", "Newton-polyhedron distance and predicted decay exponent");
  auto* sc_decay = app.add_subcommand(
      "decay", "directional decay fits of the surface-measure transform");
  for (CLI::App* sc : {sc_taylor, sc_newton, sc_decay}) {
    sc->add_option("--at", cfg.at, "generic | umbilic | axis | auto");
    sc->add_option("--xi", xi_text, "explicit base point x1,x2,x3");
  }
  for (CLI::App* sc : {sc_taylor, sc_newton}) {
    sc->add_option("--degree", cfg.degree, "expansion degree in [2,6]");
  }
  sc_decay->add_option("--directions", cfg.directions,
                       "quasi-uniform direction count (default 64)");
  sc_decay->add_option("--rmin", cfg.rmin, "smallest radius (default 16)");
  sc_decay->add_option("--rmax", cfg.rmax, "largest radius (default 4096)");
  sc_decay->add_option("--cutoff", cfg.cutoff,
                       "cutoff radius (default 0.1, clamped to the patch)");

  auto* sc_res = app.add_subcommand(
      "resolvent-scan", "finite-section norms over a spectral-band z grid");
  sc_res->add_option("--z-count", cfg.z_count, "grid size (default 20)");
  sc_res->add_option("--p", cfg.p, "Lebesgue index in [1, 2]");
  sc_res->add_option("--section-radius", cfg.section_radius,
                     "finite-section cube radius");
  sc_res->add_option("--section-radius-2", cfg.section_radius_2,
                     "second radius for the growth comparison (0: skip)");
  sc_res->add_option("--box-radius", cfg.box_radius, "kernel table radius");
  sc_res->add_flag("--export-kernel", cfg.export_kernel,
                   "emit kernel.dat at the first z");

  auto* sc_thr = app.add_subcommand(
      "thresholds", "critical points; with --eps, a near-threshold norm scan");
  sc_thr->add_option("--eps", eps_text, "comma list of offsets, e.g. 0.2,0.1");
  sc_thr->add_option("--p", cfg.p, "Lebesgue index in [1, 2]");
  sc_thr->add_option("--r", cfg.r, "weight exponent for the scan");
  sc_thr->add_option("--seeds", cfg.seeds, "random weights per z (default 2)");
  sc_thr->add_option("--section-radius", cfg.section_radius,
                     "finite-section cube radius");
  sc_thr->add_option("--box-radius", cfg.box_radius, "kernel table radius");
  sc_thr->add_option("--weight-radius", cfg.weight_radius,
                     "support radius of the random weights");

  auto* sc_hold = app.add_subcommand(
      "holder-test", "two-weight vs direct norm equivalence on random matrices");
  sc_hold->add_option("--trials", cfg.trials, "matrix count (default 50)");
  sc_hold->add_option("--dim-max", cfg.dim_max, "largest dimension (default 8)");
  sc_hold->add_option("--p-list", p_list_text,
                      "comma list of indices (default 1,1.2,1.25,2)");

  // Defaults tuned per subcommand before parsing.
  int rc = 0;
  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app.exit(e);  // --help
      fail_validation(std::string("argument parsing: ") + e.what());
    }

    CLI::App* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();
    // Count of a flag on the active subcommand, zero when the flag does not
    // exist there (config keys may target any subcommand).
    auto sub_count = [&](const std::string& name) -> std::size_t {
      const CLI::Option* o = sub->get_option_no_throw(name);
      return o ? o->count() : 0;
    };

    // Config file values fill in anything no flag set (flags win).
    if (!config_path.empty()) {
      auto kv = parse_config_file(config_path);
      auto take = [&](const char* key, auto setter) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        setter(it->second);
        kv.erase(it);
      };
      auto as_double = [&](const std::string& v, const char* key) {
        try {
          return std::stod(v);
        } catch (const std::exception&) {
          fail_validation(std::string("config value for ") + key +
                          " is not a number");
        }
      };
      auto as_int = [&](const std::string& v, const char* key) {
        return (long long)as_double(v, key);
      };
      auto maybe = [&](const CLI::Option* opt, const char* key, auto setter) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        if (opt == nullptr || opt->count() == 0) setter(it->second);
        kv.erase(it);
      };
      maybe(opt_lambda, "lambda",
            [&](const std::string& v) { cfg.lambda = as_double(v, "lambda"); });
      maybe(opt_outdir, "output_dir",
            [&](const std::string& v) { cfg.output_dir = v; });
      maybe(app.get_option("--output"), "output",
            [&](const std::string& v) { cfg.output_format = v; });
      maybe(app.get_option("--seed"), "seed",
            [&](const std::string& v) { cfg.seed = as_int(v, "seed"); });
      maybe(app.get_option("--budget"), "budget",
            [&](const std::string& v) { cfg.budget = as_int(v, "budget"); });
      maybe(app.get_option("--threads"), "threads", [&](const std::string& v) {
        cfg.threads = (int)as_int(v, "threads");
      });
      maybe(app.get_option("--preset"), "preset",
            [&](const std::string& v) { preset = v; });
      // Subcommand knobs: accepted regardless of the active subcommand so
      // one config file can drive a whole batch.
      take("at", [&](const std::string& v) {
        if (sub_count("--at") == 0) cfg.at = v;
      });
      take("xi", [&](const std::string& v) {
        if (xi_text.empty()) xi_text = v;
      });
      take("points", [&](const std::string& v) {
        if (sub_count("--points") == 0)
          cfg.points = (int)as_int(v, "points");
      });
      take("grid", [&](const std::string& v) {
        if (sub_count("--grid") == 0)
          cfg.grid = (int)as_int(v, "grid");
      });
      take("degree", [&](const std::string& v) {
        if (sub_count("--degree") == 0)
          cfg.degree = (int)as_int(v, "degree");
      });
      take("directions", [&](const std::string& v) {
        if (sub_count("--directions") == 0)
          cfg.directions = (int)as_int(v, "directions");
      });
      take("rmin", [&](const std::string& v) {
        if (sub_count("--rmin") == 0) cfg.rmin = as_double(v, "rmin");
      });
      take("rmax", [&](const std::string& v) {
        if (sub_count("--rmax") == 0) cfg.rmax = as_double(v, "rmax");
      });
      take("cutoff", [&](const std::string& v) {
        if (sub_count("--cutoff") == 0) cfg.cutoff = as_double(v, "cutoff");
      });
      take("z_count", [&](const std::string& v) {
        if (sub_count("--z-count") == 0)
          cfg.z_count = (int)as_int(v, "z_count");
      });
      take("p", [&](const std::string& v) {
        if (sub_count("--p") == 0) cfg.p = as_double(v, "p");
      });
      take("r", [&](const std::string& v) {
        if (sub_count("--r") == 0) cfg.r = as_double(v, "r");
      });
      take("section_radius", [&](const std::string& v) {
        if (sub_count("--section-radius") == 0)
          cfg.section_radius = (int)as_int(v, "section_radius");
      });
      take("section_radius_2", [&](const std::string& v) {
        if (sub_count("--section-radius-2") == 0)
          cfg.section_radius_2 = (int)as_int(v, "section_radius_2");
      });
      take("box_radius", [&](const std::string& v) {
        if (sub_count("--box-radius") == 0)
          cfg.box_radius = (int)as_int(v, "box_radius");
      });
      take("weight_radius", [&](const std::string& v) {
        if (sub_count("--weight-radius") == 0)
          cfg.weight_radius = (int)as_int(v, "weight_radius");
      });
      take("seeds", [&](const std::string& v) {
        if (sub_count("--seeds") == 0) cfg.seeds = (int)as_int(v, "seeds");
      });
      take("export_kernel", [&](const std::string& v) {
        if (sub_count("--export-kernel") == 0)
          cfg.export_kernel = (v == "1" || v == "true");
      });
      take("eps", [&](const std::string& v) {
        if (eps_text.empty()) eps_text = v;
      });
      take("trials", [&](const std::string& v) {
        if (sub_count("--trials") == 0)
          cfg.trials = (int)as_int(v, "trials");
      });
      take("dim_max", [&](const std::string& v) {
        if (sub_count("--dim-max") == 0)
          cfg.dim_max = (int)as_int(v, "dim_max");
      });
      take("p_list", [&](const std::string& v) {
        if (p_list_text.empty()) p_list_text = v;
      });
      for (auto it = kv.begin(); it != kv.end();) {
        if (it->first.rfind("tol.", 0) == 0) {
          std::string name = it->first.substr(4);
          if (!kToleranceDefaults.count(name))
            fail_validation("unknown tolerance '" + name + "'");
          if (!cfg.tolerances.count(name))
            cfg.tolerances[name] = as_double(it->second, it->first.c_str());
          it = kv.erase(it);
        } else {
          ++it;
        }
      }
      if (!kv.empty())
        fail_validation("unknown config key '" + kv.begin()->first + "'");
    }

    // --tol overrides (after the file so flags win).
    for (const std::string& ta : tol_args) {
      auto eq = ta.find('=');
      if (eq == std::string::npos)
        fail_validation("--tol expects name=value, got '" + ta + "'");
      std::string name = ta.substr(0, eq);
      if (!kToleranceDefaults.count(name))
        fail_validation("unknown tolerance '" + name + "'");
      try {
        cfg.tolerances[name] = std::stod(ta.substr(eq + 1));
      } catch (const std::exception&) {
        fail_validation("cannot parse tolerance value in '" + ta + "'");
      }
    }

    // Preset levels; an explicit --lambda (or config lambda) wins.
    if (!preset.empty() && opt_lambda->count() == 0) {
      if (preset == "band-i")
        cfg.lambda = 2.0;
      else if (preset == "band-iii")
        cfg.lambda = 5.0;
      else if (preset == "umbilic")
        cfg.lambda = 6.0;
      else if (preset == "near-threshold")
        cfg.lambda = 4.05;
      else
        fail_validation("unknown preset '" + preset +
                        "' (band-i, band-iii, umbilic, near-threshold)");
    }

    // Environment override for the default output directory.
    if (opt_outdir->count() == 0 && cfg.output_dir == ".") {
      if (const char* env = std::getenv("FERMIRES_OUTPUT_DIR"))
        cfg.output_dir = env;
    }

    if (!xi_text.empty()) {
      auto v = parse_double_list(xi_text, "--xi");
      if (v.size() != 3) fail_validation("--xi needs three coordinates");
      cfg.xi = Vec3{v[0], v[1], v[2]};
      if (cfg.at == "auto") cfg.at = "explicit";
    }
    if (!eps_text.empty()) cfg.eps = parse_double_list(eps_text, "--eps");
    if (!p_list_text.empty())
      cfg.p_list = parse_double_list(p_list_text, "--p-list");

    Emitter em{fs::path(cfg.output_dir), {}};
    if (cfg.command == "thresholds") rc = run_thresholds(cfg, em);
    else if (cfg.command == "curvature-scan") rc = run_curvature_scan(cfg, em);
    else if (cfg.command == "degenerate-locus")
      rc = run_degenerate_locus(cfg, em);
    else if (cfg.command == "taylor") rc = run_taylor(cfg, em);
    else if (cfg.command == "newton") rc = run_newton(cfg, em);
    else if (cfg.command == "decay") rc = run_decay(cfg, em);
    else if (cfg.command == "resolvent-scan") rc = run_resolvent_scan(cfg, em);
    else if (cfg.command == "holder-test") rc = run_holder_test(cfg, em);
    else fail_validation("unknown command " + cfg.command);
  } catch (const CliFailure& f) {
    ojson err{{"error", {{"type", f.type}, {"message", f.message}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return f.code;
  } catch (const NoConvergence& e) {
    ojson err{{"error", {{"type", "budget"}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 2;
  } catch (const Error& e) {
    ojson err{{"error", {{"type", "domain"}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  } catch (const std::exception& e) {
    ojson err{{"error", {{"type", "internal"}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
  return rc;
}
