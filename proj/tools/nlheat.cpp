// Command-line front end: one subcommand per library operation, outputs under --out.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlheat/nlheat.hpp"

namespace fs = std::filesystem;
using namespace nlheat;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kDomain = 3, kDivergence = 4, kInternal = 5 };

struct KernelFlags {
  std::string family;
  double rho = 1.0;
  double gamma = 1.0;
  double gamma0 = 1.0;
  double alpha0 = 0.5;
  int dimension = 1;

  KernelSpec spec() const {
    if (family == "uniform") return make_kernel(CompactUniform{rho}, dimension);
    if (family == "bump") return make_kernel(CompactBump{rho}, dimension);
    if (family == "gaussian") return make_kernel(Gaussian{gamma}, dimension);
    if (family == "power") return make_kernel(PowerTail{gamma0}, dimension);
    if (family == "exptail") return make_kernel(ExponentialTail{gamma0}, dimension);
    if (family == "tempered") return make_kernel(TemperedStable{gamma0, alpha0}, dimension);
    throw InvalidArgument("unknown kernel family '" + family + "'");
  }
};

void add_kernel_flags(CLI::App* app, KernelFlags& k, const std::string& gamma_flag = "--gamma") {
  app->add_option("--family", k.family, "kernel family")
      ->required()
      ->check(CLI::IsMember({"uniform", "bump", "gaussian", "power", "exptail", "tempered"}));
  app->add_option("--rho", k.rho, "support radius (uniform, bump)");
  app->add_option(gamma_flag, k.gamma, "Gaussian rate: J = (gamma^2/pi)^{1/2} e^{-gamma^2 x^2}");
  app->add_option("--gamma0", k.gamma0, "critical exponent (power, exptail, tempered)");
  app->add_option("--alpha0", k.alpha0, "tempered power exponent");
  app->add_option("--N", k.dimension, "space dimension (symbolic use only)");
}

struct GridFlags {
  double L;
  double h;
  Grid grid() const { return make_grid(L, h); }
};

void add_grid_flags(CLI::App* app, GridFlags& g) {
  app->add_option("--L", g.L, "grid half extent")->capture_default_str();
  app->add_option("--h", g.h, "grid spacing")->capture_default_str();
}

struct GrowthFlags {
  std::string growth;
  std::optional<double> gamma;  // growth rate; defaults depend on the kernel
  double alpha = 0.5;
  double lo = -0.3;
  double hi = 0.3;
  std::string profile = "upper";
  double c0 = 1.0;
  std::string sign = "nonneg";

  GrowthSpec spec(const KernelSpec& k) const {
    double rate = gamma.value_or(1.0);
    if (!gamma) {
      if (auto* gk = std::get_if<Gaussian>(&k.family)) rate = gk->gamma;
      if (auto* tk = std::get_if<TemperedStable>(&k.family)) rate = tk->gamma0;
    }
    GrowthSpec g;
    g.c0 = c0;
    g.dimension = k.dimension;
    g.sign = sign == "twosided" ? DataSign::TwoSided : DataSign::Nonnegative;
    if (growth == "power") {
      g.family = PowerGrowth{rate};
    } else if (growth == "exp") {
      g.family = ExpGrowth{rate};
    } else if (growth == "exppower") {
      g.family = ExpPowerGrowth{rate, alpha};
    } else if (growth == "xlogx") {
      g.family = XLogXGrowth{alpha};
    } else if (growth == "xsqrtlogx") {
      g.family = XSqrtLogXGrowth{alpha};
    } else {
      const BandProfile p = profile == "lower"  ? BandProfile::Lower
                            : profile == "zero" ? BandProfile::Zero
                                                : BandProfile::Upper;
      g.family = CriticalPerturbedGrowth{rate, lo, hi, p};
    }
    validate(g);
    return g;
  }
};

void add_growth_flags(CLI::App* app, GrowthFlags& g) {
  app->add_option("--growth", g.growth, "growth class of the data")
      ->required()
      ->check(CLI::IsMember({"power", "exp", "exppower", "xlogx", "xsqrtlogx", "critical"}));
  app->add_option("--growth-gamma", g.gamma,
                  "growth rate (power, exp, exppower, critical); defaults to the kernel's rate");
  app->add_option("--alpha", g.alpha, "growth exponent (exppower, xlogx, xsqrtlogx)");
  app->add_option("--lo", g.lo, "lower band slope (critical)");
  app->add_option("--hi", g.hi, "upper band slope (critical)");
  app->add_option("--profile", g.profile, "band edge sampled (critical)")
      ->check(CLI::IsMember({"upper", "lower", "zero"}));
  app->add_option("--c0", g.c0, "amplitude");
  app->add_option("--sign", g.sign, "nonneg or twosided")
      ->check(CLI::IsMember({"nonneg", "twosided"}));
}

/// Flag text as JSON: numbers and booleans typed, everything else a string.
Json config_value(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  return v;
}

std::string default_out() {
  const char* env = std::getenv("NLHEAT_OUT");
  return env && *env ? env : "./out";
}

Json kernel_json(const KernelSpec& k) { return to_string(k); }

/// Initial data from a CSV path, a growth spec ("xlogx:alpha=0.5") or an expression in x.
GridFunction load_data(const std::string& data, const Grid& grid, RunManifest& m, bool& from_csv) {
  from_csv = false;
  if (fs::exists(data) && fs::is_regular_file(data)) {
    from_csv = true;
    m.add_input(data);
    return read_csv(data);
  }
  if (looks_like_growth(data)) return sample_growth(parse_growth(data), grid);
  const Expression e = Expression::parse(data);
  return sample(e, grid);
}

std::string csv_columns(const std::vector<std::string>& header,
                        const std::vector<std::span<const double>>& cols) {
  std::ostringstream os;
  write_csv(os, header, cols);
  return os.str();
}

// ---------------------------------------------------------------------------

int run_kernel_info(const KernelFlags& kf, int max_order, RunManifest& m) {
  const KernelSpec k = kf.spec();
  Json r;
  r["kernel"] = kernel_json(k);
  r["family"] = family_name(k);
  r["normalizer"] = k.normalizer;
  r["decay_class"] = decay_class(k) == DecayClass::Fast ? "Fast" : "Slow";
  const CriticalExponents ce = critical_exponents(k);
  r["critical_exponents"] = {{"gamma0", json_number(ce.gamma0)},
                             {"alpha0", ce.alpha0 ? Json(*ce.alpha0) : Json(nullptr)}};
  Json moments = Json::object();
  Json methods = Json::object();
  for (int order = 0; order <= max_order; order += 2) {
    const std::string key = "m" + std::to_string(order);
    try {
      moments[key] = moment(k, order);
      methods[key] = order == 0 || moment_has_closed_form(k) ? "closed-form" : "quadrature";
    } catch (const MomentDiverges& e) {
      moments[key] = nullptr;
      m.warn(key + ": " + e.what());
    }
  }
  r["moments"] = moments;
  r["moment_methods"] = methods;
  r["warnings"] = m.warnings();
  m.config()["max_moment_order"] = max_order;
  m.write_output_json("kernel_info.json", r);
  std::cout << r.dump(2) << "\n";
  return kOk;
}

struct EvolveFlags {
  std::string data;
  double t = 1.0;
  std::string method = "repr";
  double tol = 1e-10;
  double dt = 1e-3;
};

int run_evolve(const KernelFlags& kf, const GridFlags& gf, const EvolveFlags& ef, RunManifest& m) {
  const KernelSpec k = kf.spec();
  bool from_csv = false;
  const GridFunction u0 = load_data(ef.data, gf.grid(), m, from_csv);
  m.config()["grid"] = {{"L", u0.grid().half_extent()}, {"h", u0.grid().spacing()},
                        {"n", u0.grid().size()}};
  if (from_csv) m.warn("grid taken from the data CSV; --L and --h ignored");
  const SolveResult r = ef.method == "march" ? solve_march(k, u0, ef.t, ef.dt)
                                             : solve_representation(k, u0, ef.t, ef.tol);
  const auto x = u0.grid().nodes();
  m.write_output_text("u.csv", csv_columns({"x", "u0", "u_t"}, {x, u0.values(), r.u.values()}));
  Json d;
  d["t"] = r.t;
  d["method"] = to_string(r.method);
  d["trusted_radius"] = r.diagnostics.trusted_radius;
  d["mass_in"] = r.diagnostics.mass_in;
  d["mass_out"] = r.diagnostics.mass;
  d["sup_norm"] = r.diagnostics.sup_norm;
  d["error_budget"] = r.diagnostics.error_budget;
  d[r.method == SolveMethod::March ? "steps" : "K"] = r.diagnostics.order_or_steps;
  d["kernel"] = kernel_json(k);
  m.write_output_json("diagnostics.json", d);
  return kOk;
}

struct HeatFlags {
  double t = 1.0;
  double tol = 1e-12;
  double residual_dt = 0.0;
  bool dump = false;
};

int run_heatkernel(const KernelFlags& kf, const GridFlags& gf, const HeatFlags& hf,
                   RunManifest& m) {
  const KernelSpec k = kf.spec();
  const Grid grid = gf.grid();
  const DiscreteKernel dk = discretize(k, grid);
  const double sup = sup_norm(dk.density);
  const int K = truncation_order(hf.t, hf.tol, sup);
  const IteratedConvolutions its = iterate(dk.density, K);
  const OmegaExpansion w = omega_from_iterates(its, hf.t, K, sup);
  const auto x = grid.nodes();
  m.write_output_text("omega.csv", csv_columns({"x", "omega"}, {x, w.values.values()}));
  Json j;
  j["t"] = w.t;
  j["K"] = w.order;
  j["remainder_bound"] = w.remainder_bound;
  j["truncation_loss"] = w.truncation_loss;
  j["mass"] = w.mass();
  j["mass_expected"] = w.mass_expected();
  j["kernel"] = kernel_json(k);
  if (hf.residual_dt > 0.0) j["residual"] = omega_residual(k, grid, hf.t, hf.residual_dt, hf.tol);
  m.write_output_json("omega.json", j);
  if (hf.dump) {
    for (const auto& f : dump_iterates(its, m.out_dir() / "iterates")) m.add_output("iterates/" + f);
  }
  return kOk;
}

struct BarrierFlags {
  std::string barrier;
  double gamma = 0.5;
  std::optional<double> gamma0;
  double alpha = 0.25;
};

int run_barrier_check(const KernelFlags& kf, const GridFlags& gf, const BarrierFlags& bf,
                      RunManifest& m) {
  const KernelSpec k = kf.spec();
  Barrier b = PowerBarrier{bf.gamma};
  if (bf.barrier == "exp") b = ExpBarrier{bf.gamma};
  if (bf.barrier == "tempered") {
    double g0 = bf.gamma0.value_or(kf.gamma0);
    b = TemperedBarrier{g0, bf.alpha, k.dimension};
  }
  const BarrierCheck c = verify_barrier(k, b, gf.grid());
  Json j;
  j["kernel"] = kernel_json(k);
  j["barrier"] = to_string(b);
  j["lambda_analytic"] = c.lambda_analytic;
  j["lambda_hat"] = c.measured.lambda_hat;
  j["argmax"] = c.measured.argmax;
  j["collar"] = c.measured.collar;
  j["passed"] = c.passed;
  m.write_output_json("barrier.json", j);
  std::cout << j.dump(2) << "\n";
  return c.passed ? kOk : kInternal;
}

int run_classify(const KernelFlags& kf, const GrowthFlags& gr, const GridFlags& gf, bool verify,
                 RunManifest& m) {
  const KernelSpec k = kf.spec();
  const GrowthSpec g = gr.spec(k);
  const Verdict v = verify ? classify_checked(k, g, gf.grid()) : classify(k, g);
  Json j;
  j["kernel"] = kernel_json(k);
  j["growth"] = to_string(g);
  j["verdict"] = to_string(v.outcome);
  j["citation"] = v.citation;
  j["reason"] = v.reason;
  if (v.barrier) j["barrier"] = to_string(*v.barrier);
  if (v.lambda) j["lambda"] = *v.lambda;
  if (v.divergent_functional) j["divergent_functional"] = *v.divergent_functional;
  if (v.barrier) j["barrier_verified"] = v.barrier_verified;
  m.write_output_json("verdict.json", j);
  std::cout << j.dump(2) << "\n";
  return kOk;
}

struct FitFlags {
  std::vector<double> times{1.0};
  double sigma = 0.5;
  double x_lo = 5.0;
  double x_hi = 15.0;
  int order = 0;

  FitOptions options() const { return {x_lo, x_hi, order}; }
};

void add_fit_flags(CLI::App* app, FitFlags& f) {
  app->add_option("--times", f.times, "fit times")->delimiter(',')->capture_default_str();
  app->add_option("--sigma", f.sigma, "lower-envelope radius, 0 < sigma < rho (compact)");
  app->add_option("--x-lo", f.x_lo, "fit range start (> e)")->capture_default_str();
  app->add_option("--x-hi", f.x_hi, "fit range end (<= L/2)")->capture_default_str();
  app->add_option("--order", f.order, "series order (0 = automatic)");
}

Json fit_json(const EstimateFit& f) {
  Json j;
  j["shape"] = f.shape == TailShape::Compact ? "compact" : "gaussian";
  j["sigma"] = f.sigma ? Json(*f.sigma) : Json(nullptr);
  j["c1"] = f.c1;
  j["c2"] = f.c2;
  j["c3"] = f.c3;
  j["c4"] = f.c4;
  j["exponent_lower"] = f.exponent_lower;
  j["exponent_upper"] = f.exponent_upper;
  j["slope"] = f.slope;
  j["slope_linear"] = f.slope_linear;
  j["residuals"] = {{"free_rms", f.free_rms}, {"lower_rms", f.lower_rms}, {"upper_rms", f.upper_rms}};
  j["ranges"] = {{"x_lo", f.x_lo}, {"x_hi", f.x_hi}, {"times", f.times}, {"order", f.order}};
  return j;
}

std::string fit_csv(const EstimateFit& f) {
  std::vector<double> x, t, lw, lo, up;
  for (const auto& p : f.points) {
    x.push_back(p.x);
    t.push_back(p.t);
    lw.push_back(p.ln_omega);
    lo.push_back(p.lower_env);
    up.push_back(p.upper_env);
  }
  return csv_columns({"x", "t", "ln_omega", "lower_env", "upper_env"}, {x, t, lw, lo, up});
}

int run_estimate_fit(const KernelFlags& kf, const GridFlags& gf, const FitFlags& ff,
                     RunManifest& m) {
  const KernelSpec k = kf.spec();
  const EstimateFit f = fit_estimates(k, gf.grid(), ff.times, ff.sigma, ff.options());
  Json j = fit_json(f);
  j["kernel"] = kernel_json(k);
  m.write_output_json("fit.json", j);
  m.write_output_text("fit.csv", fit_csv(f));
  return kOk;
}

struct ProbeFlags {
  std::vector<double> times{1.0};
  std::vector<double> radii{5, 10, 15, 20, 25, 30, 35, 40};
  double factor = 10.0;
  double span = 10.0;
  double saturation = 1e-6;
  int order = 0;

  ProbeOptions options() const { return {factor, span, saturation, order}; }
};

void add_probe_flags(CLI::App* app, ProbeFlags& p, const char* times_flag) {
  app->add_option(times_flag, p.times, "probe times")->delimiter(',')->capture_default_str();
  app->add_option("--radii", p.radii, "truncation radii R")->delimiter(',')->capture_default_str();
  app->add_option("--factor", p.factor, "growth factor flagging divergence");
  app->add_option("--span", p.span, "radius span of the growth comparison");
  app->add_option("--saturation", p.saturation, "relative increment flagging saturation");
  app->add_option("--probe-order", p.order, "series order (0 = automatic)");
}

Json probe_json(const std::vector<ProbeResult>& rs) {
  Json a = Json::array();
  for (const auto& r : rs) {
    a.push_back({{"t", r.t},
                 {"flag", to_string(r.flag)},
                 {"span_ratio", json_number(r.span_ratio)},
                 {"last_increment", r.last_increment},
                 {"order", r.order},
                 {"radii", r.radii},
                 {"values", r.values}});
  }
  return a;
}

std::string probe_csv(const std::vector<ProbeResult>& rs) {
  std::vector<double> t, R, V;
  for (const auto& r : rs) {
    for (std::size_t i = 0; i < r.radii.size(); ++i) {
      t.push_back(r.t);
      R.push_back(r.radii[i]);
      V.push_back(r.values[i]);
    }
  }
  return csv_columns({"t", "R", "V"}, {t, R, V});
}

int run_probe(const KernelFlags& kf, const GrowthFlags& gr, const GridFlags& gf,
              const ProbeFlags& pf, RunManifest& m) {
  const KernelSpec k = kf.spec();
  const GrowthSpec g = gr.spec(k);
  const auto rs = divergence_scan(k, g, gf.grid(), pf.times, pf.radii, pf.options());
  Json j;
  j["kernel"] = kernel_json(k);
  j["growth"] = to_string(g);
  j["probes"] = probe_json(rs);
  m.write_output_json("probe.json", j);
  m.write_output_text("probe.csv", probe_csv(rs));
  return kOk;
}

int run_blowup(const KernelFlags& kf, const GridFlags& gf, const FitFlags& ff,
               const ProbeFlags& pf, double lo, double hi, bool probe, RunManifest& m) {
  const KernelSpec k = kf.spec();
  if (!std::holds_alternative<Gaussian>(k.family)) {
    throw InvalidArgument("blowup: the bracket is defined for Gaussian kernels");
  }
  const EstimateFit f = fit_estimates(k, gf.grid(), ff.times, ff.sigma, ff.options());
  const BlowupBracket b = blowup_bracket(kf.gamma, lo, hi, f);
  Json j;
  j["kernel"] = kernel_json(k);
  j["t_lo"] = b.t_lo;
  j["t_hi"] = b.t_hi;
  j["alpha_lo"] = b.alpha_lo;
  j["beta_hi"] = b.beta_hi;
  j["fit"] = fit_json(f);
  if (probe) {
    GrowthSpec g{CriticalPerturbedGrowth{kf.gamma, lo, hi, BandProfile::Upper}};
    const auto rs = divergence_scan(k, g, gf.grid(), pf.times, pf.radii, pf.options());
    j["probes"] = probe_json(rs);
    m.write_output_text("probe.csv", probe_csv(rs));
  }
  m.write_output_json("bracket.json", j);
  std::cout << "t_lo = " << format_double(b.t_lo) << "\nt_hi = " << format_double(b.t_hi) << "\n";
  return kOk;
}

template <typename T>
Json poly_json(const PolySolution<T>& s) {
  Json coeffs = Json::object();
  for (int k = 1; k <= s.p; ++k) {
    Json c = Json::array();
    for (const auto& v : s.c[static_cast<std::size_t>(k)].coeffs()) c.push_back(format_coefficient(v));
    coeffs[std::to_string(k)] = c;
  }
  const auto [deg, lead] = leading_term(s);
  Json j;
  j["p"] = s.p;
  j["coefficients"] = coeffs;
  j["leading_term"] = {{"t_degree", deg}, {"coefficient", format_coefficient(lead)}};
  j["polynomial"] = format_solution(s);
  j["residual_zero"] = residual_is_zero(s);
  j["terminated"] = s.next.is_zero();
  return j;
}

int run_poly(const KernelFlags& kf, int p, RunManifest& m) {
  const KernelSpec k = kf.spec();
  Json j;
  std::string text;
  if (std::holds_alternative<CompactUniform>(k.family)) {
    // exact table; rho is read back as the rational nearest its decimal text
    std::ostringstream os;
    os << kf.rho;
    const std::string r = os.str();
    Rational rho;
    if (auto dot = r.find('.'); dot == std::string::npos) {
      rho = Rational(boost::multiprecision::cpp_int(r));
    } else {
      const std::string digits = r.substr(0, dot) + r.substr(dot + 1);
      boost::multiprecision::cpp_int den = 1;
      for (std::size_t i = dot + 1; i < r.size(); ++i) den *= 10;
      rho = Rational(boost::multiprecision::cpp_int(digits), den);
    }
    if (rho.convert_to<double>() != kf.rho) {
      m.warn("rho has no short decimal form; using floating-point moments");
      const auto s = explicit_solution(p, moment_table(k, std::max(2 * p, 2)));
      j = poly_json(s);
      text = format_solution(s);
    } else {
      const auto s = explicit_solution(p, exact_moment_table(rho, std::max(2 * p, 2)));
      j = poly_json(s);
      text = format_solution(s);
      j["arithmetic"] = "exact";
    }
  } else {
    const auto s = explicit_solution(p, moment_table(k, std::max(2 * p, 2)));
    j = poly_json(s);
    text = format_solution(s);
    j["arithmetic"] = "double";
  }
  if (!j.contains("arithmetic")) j["arithmetic"] = "double";
  j["kernel"] = kernel_json(k);
  m.write_output_json("poly.json", j);
  std::cout << text << "\n";
  return kOk;
}

/// Runs a subcommand body, mapping library errors to exit codes and always
/// finishing with the manifest.
int guarded(RunManifest& m, const std::function<int()>& body) {
  int code = kOk;
  try {
    fs::create_directories(m.out_dir());
    code = body();
  } catch (const DomainTooSmall& e) {
    std::cerr << "error: " << e.what() << "\n";
    m.warn(std::string("error: ") + e.what());
    code = kDomain;
  } catch (const MomentDiverges& e) {
    std::cerr << "error: " << e.what() << "\n";
    m.warn(std::string("error: ") + e.what());
    code = kDivergence;
  } catch (const InternalConsistency& e) {
    std::cerr << "error: " << e.what() << "\n";
    m.warn(std::string("error: ") + e.what());
    code = kInternal;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    m.warn(std::string("error: ") + e.what());
    code = kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    m.warn(std::string("error: ") + e.what());
    code = kInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    m.warn(std::string("error: ") + e.what());
    code = kFailure;
  }
  try {
    fs::create_directories(m.out_dir());
    m.finish(code);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write manifest: " << e.what() << "\n";
    return kFailure;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nlheat: numerics for the nonlocal heat equation u_t = J*u - u"};
  app.set_help_flag("--help", "print this help and exit");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  std::string out = default_out();
  app.add_option("--out", out, "output directory (default $NLHEAT_OUT or ./out)");

  KernelFlags kf;
  GridFlags grid_evolve{20.0, 0.01}, grid_heat{20.0, 0.01}, grid_barrier{50.0, 0.05},
      grid_classify{50.0, 0.05}, grid_fit{60.0, 0.05}, grid_probe{80.0, 0.05},
      grid_blowup{80.0, 0.05};

  auto* info = app.add_subcommand("kernel-info", "kernel normalizer, moments, decay class");
  add_kernel_flags(info, kf);
  int max_order = 4;
  info->add_option("--moment", max_order, "largest even moment order reported")->capture_default_str();

  auto* evolve = app.add_subcommand("evolve", "solve the initial-value problem");
  add_kernel_flags(evolve, kf);
  add_grid_flags(evolve, grid_evolve);
  EvolveFlags ef;
  evolve->add_option("--data", ef.data, "expression in x, growth spec (name:key=value,...) or CSV path")
      ->required();
  evolve->add_option("--t", ef.t, "final time")->capture_default_str();
  evolve->add_option("--method", ef.method, "repr or march")
      ->check(CLI::IsMember({"repr", "march"}))
      ->capture_default_str();
  evolve->add_option("--tol", ef.tol, "series tolerance (repr)")->capture_default_str();
  evolve->add_option("--dt", ef.dt, "RK4 step (march)")->capture_default_str();

  auto* heat = app.add_subcommand("heatkernel", "series heat kernel omega(x, t)");
  add_kernel_flags(heat, kf);
  add_grid_flags(heat, grid_heat);
  HeatFlags hf;
  heat->add_option("--t", hf.t, "time")->capture_default_str();
  heat->add_option("--tol", hf.tol, "series tolerance")->capture_default_str();
  heat->add_option("--residual-dt", hf.residual_dt, "also report the PDE residual with this dt");
  heat->add_flag("--dump-iterates", hf.dump, "write J^{*n} CSVs and an index");

  auto* barrier = app.add_subcommand("barrier-check", "compare measured and lemma lambda");
  add_kernel_flags(barrier, kf, "--kernel-gamma");
  add_grid_flags(barrier, grid_barrier);
  BarrierFlags bf;
  barrier->add_option("--barrier", bf.barrier, "power, exp or tempered")
      ->required()
      ->check(CLI::IsMember({"power", "exp", "tempered"}));
  barrier->add_option("--gamma", bf.gamma, "barrier rate (power, exp)");
  barrier->add_option("--barrier-gamma0", bf.gamma0, "tempered barrier rate (default: kernel gamma0)");
  barrier->add_option("--alpha", bf.alpha, "tempered barrier power");

  auto* cls = app.add_subcommand("classify", "existence / nonexistence / blow-up verdict");
  add_kernel_flags(cls, kf);
  add_grid_flags(cls, grid_classify);
  GrowthFlags gr_cls;
  add_growth_flags(cls, gr_cls);
  bool verify = false;
  cls->add_flag("--verify-barrier", verify, "check the verdict's barrier numerically");

  auto* blowup = app.add_subcommand("blowup", "blow-up time bracket for Gaussian kernels");
  add_kernel_flags(blowup, kf);
  add_grid_flags(blowup, grid_blowup);
  FitFlags ff_blow;
  add_fit_flags(blowup, ff_blow);
  ProbeFlags pf_blow;
  pf_blow.times = {0.5, 1, 2, 3, 5, 7, 10};
  add_probe_flags(blowup, pf_blow, "--probe-times");
  double lo = -0.3, hi = 0.3;
  blowup->add_option("--lo", lo, "lower band slope")->capture_default_str();
  blowup->add_option("--hi", hi, "upper band slope")->capture_default_str();
  bool blow_probe = false;
  blowup->add_flag("--probe", blow_probe, "also run the divergence probe on the upper band edge");

  auto* fit = app.add_subcommand("estimate-fit", "fit tail envelopes of omega");
  add_kernel_flags(fit, kf);
  add_grid_flags(fit, grid_fit);
  FitFlags ff;
  add_fit_flags(fit, ff);

  auto* poly = app.add_subcommand("poly", "explicit polynomial solution for u0 = x^{2p}");
  add_kernel_flags(poly, kf);
  int p = 1;
  poly->add_option("--p", p, "half degree of the data")->capture_default_str();

  auto* probe = app.add_subcommand("probe", "divergence probe of truncated data");
  add_kernel_flags(probe, kf);
  add_grid_flags(probe, grid_probe);
  GrowthFlags gr_probe;
  add_growth_flags(probe, gr_probe);
  ProbeFlags pf;
  add_probe_flags(probe, pf, "--t");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  RunManifest m(sub->get_name(), out);
  Json cfg = Json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_name() == "--help") continue;
    const std::string key = opt->get_name().substr(opt->get_name().find_first_not_of('-'));
    std::vector<std::string> vals = opt->results();
    if (vals.empty() && !opt->get_default_str().empty()) {
      vals = CLI::detail::split_up(opt->get_default_str().substr(
          opt->get_default_str().front() == '[' ? 1 : 0,
          opt->get_default_str().size() - (opt->get_default_str().front() == '[' ? 2 : 0)), ',');
    }
    if (vals.empty()) continue;
    Json arr = Json::array();
    for (const auto& v : vals) arr.push_back(config_value(v));
    cfg[key] = opt->get_expected_max() > 1 ? arr : arr.front();
  }
  cfg["out"] = out;
  if (!kf.family.empty()) {
    try {
      cfg["kernel"] = to_string(kf.spec());
    } catch (const Error&) {
      // reported by the subcommand itself
    }
  }
  m.config() = cfg;

  const std::string name = sub->get_name();
  return guarded(m, [&]() -> int {
    if (name == "kernel-info") return run_kernel_info(kf, max_order, m);
    if (name == "evolve") return run_evolve(kf, grid_evolve, ef, m);
    if (name == "heatkernel") return run_heatkernel(kf, grid_heat, hf, m);
    if (name == "barrier-check") return run_barrier_check(kf, grid_barrier, bf, m);
    if (name == "classify") return run_classify(kf, gr_cls, grid_classify, verify, m);
    if (name == "blowup") return run_blowup(kf, grid_blowup, ff_blow, pf_blow, lo, hi, blow_probe, m);
    if (name == "estimate-fit") return run_estimate_fit(kf, grid_fit, ff, m);
    if (name == "poly") return run_poly(kf, p, m);
    if (name == "probe") return run_probe(kf, gr_probe, grid_probe, pf, m);
    throw InvalidArgument("unknown subcommand");
  });
}
