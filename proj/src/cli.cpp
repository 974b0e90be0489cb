#include "fkai/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace fkai::cli {

using io::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

double get_number(const json& j, const std::string& where)
{
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

Index get_count(const json& j, const std::string& where, Index minimum)
{
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  auto v = j.get<long long>();
  if (v < minimum) throw ConfigError(where + ": must be >= " + std::to_string(minimum));
  return static_cast<Index>(v);
}

Vector<double> get_vector(const json& j, const std::string& where)
{
  try {
    return io::vector_from_json(j, where);
  } catch (const io::FormatError& e) {
    throw ConfigError(e.what());
  }
}

Potential<double> parse_potential(const json& j)
{
  const std::string where = "potential";
  if (!j.is_object() || !j.contains("family")) throw ConfigError(where + ": missing 'family'");
  const std::string family = j["family"].get<std::string>();
  if (family == "trig-sum") {
    check_keys(j, {"family", "terms"}, where);
    if (!j.contains("terms") || !j["terms"].is_array()) throw ConfigError(where + ": 'terms' must be an array");
    for (const auto& t : j["terms"]) check_keys(t, {"amplitude", "frequency", "phase"}, where + ".terms");
  } else if (family == "almost-periodic-truncated") {
    check_keys(j, {"family", "amplitude_ratio", "frequency_ratio", "terms", "direction"}, where);
  } else if (family == "delone-bump") {
    check_keys(j, {"family", "points", "fibonacci", "width", "depth"}, where);
    if (j.contains("fibonacci")) {
      if (j.contains("points")) throw ConfigError(where + ": give either 'points' or 'fibonacci'");
      const json& f = j["fibonacci"];
      check_keys(f, {"origin", "length"}, where + ".fibonacci");
      json copy = j;
      copy.erase("fibonacci");
      json pts = json::array();
      for (const auto& p : fibonacci_chain(get_number(f.value("origin", json(0.0)), where + ".fibonacci.origin"),
                                           get_number(f.at("length"), where + ".fibonacci.length")))
        pts.push_back(io::vector_to_json(p));
      copy["points"] = std::move(pts);
      return io::potential_from_json(copy);
    }
  } else {
    throw ConfigError(where + ": unknown family '" + family + "'");
  }
  return io::potential_from_json(j);
}

Interaction<double> parse_interaction(const json& j)
{
  const std::string where = "interaction";
  if (!j.is_object() || !j.contains("kind")) throw ConfigError(where + ": missing 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "generating-nn")
    check_keys(j, {"kind", "coupling", "stiffness", "perturbation"}, where);
  else if (kind == "long-range-polynomial")
    check_keys(j, {"kind", "power", "weights", "ratio", "cutoff", "scale"}, where);
  else
    throw ConfigError(where + ": unknown kind '" + kind + "'");
  return io::interaction_from_json(j);
}

void parse_certification(const json& j, ExperimentConfig& c, const fs::path& base)
{
  const std::string where = "certification";
  check_keys(j,
             {"lower", "upper", "grid_points", "grid_points_per_axis", "zero_tol", "degeneracy_ratio",
              "expansion_floor_ratio", "max_halvings", "ball_samples", "pair_samples", "covering_samples", "safety",
              "expansion_safety", "detect_period", "certificate"},
             where);
  auto& o = c.aubry;
  if (j.contains("lower") != j.contains("upper")) throw ConfigError(where + ": give both 'lower' and 'upper'");
  if (j.contains("lower")) {
    o.lower = get_vector(j["lower"], where + ".lower");
    o.upper = get_vector(j["upper"], where + ".upper");
    c.has_search_window = true;
  }
  if (j.contains("grid_points")) o.grid_points = get_count(j["grid_points"], where + ".grid_points", 8);
  if (j.contains("grid_points_per_axis"))
    o.grid_points_per_axis = get_count(j["grid_points_per_axis"], where + ".grid_points_per_axis", 4);
  if (j.contains("zero_tol")) o.zero_tol = get_number(j["zero_tol"], where + ".zero_tol");
  if (j.contains("degeneracy_ratio")) o.degeneracy_ratio = get_number(j["degeneracy_ratio"], where);
  if (j.contains("expansion_floor_ratio")) o.expansion_floor_ratio = get_number(j["expansion_floor_ratio"], where);
  if (j.contains("max_halvings")) o.max_halvings = static_cast<int>(get_count(j["max_halvings"], where, 0));
  if (j.contains("ball_samples")) o.ball_samples = get_count(j["ball_samples"], where + ".ball_samples", 3);
  if (j.contains("pair_samples")) o.pair_samples = get_count(j["pair_samples"], where + ".pair_samples", 1);
  if (j.contains("covering_samples"))
    o.covering_samples = get_count(j["covering_samples"], where + ".covering_samples", 1);
  if (j.contains("safety")) o.safety = get_number(j["safety"], where + ".safety");
  if (j.contains("expansion_safety")) o.expansion_safety = get_number(j["expansion_safety"], where);
  if (j.contains("detect_period")) {
    if (!j["detect_period"].is_boolean()) throw ConfigError(where + ".detect_period: expected a boolean");
    o.detect_period = j["detect_period"].get<bool>();
  }
  if (j.contains("certificate")) c.certificate_path = base / j["certificate"].get<std::string>();
}

void parse_solver(const json& j, ExperimentConfig& c)
{
  const std::string where = "solver";
  check_keys(j, {"lambda", "lambdas", "rho", "rhos", "anchor_offset", "half_width", "tol", "max_iter", "inner_tol"},
             where);
  if (j.contains("lambda") && j.contains("lambdas")) throw ConfigError(where + ": give 'lambda' or 'lambdas'");
  if (j.contains("rho") && j.contains("rhos")) throw ConfigError(where + ": give 'rho' or 'rhos'");
  if (j.contains("lambda")) c.lambdas = {get_number(j["lambda"], where + ".lambda")};
  if (j.contains("lambdas")) {
    if (!j["lambdas"].is_array()) throw ConfigError(where + ".lambdas: expected an array");
    for (const auto& l : j["lambdas"]) c.lambdas.push_back(get_number(l, where + ".lambdas"));
  }
  if (j.contains("rho")) c.rhos = {get_vector(j["rho"], where + ".rho")};
  if (j.contains("rhos")) {
    if (!j["rhos"].is_array()) throw ConfigError(where + ".rhos: expected an array");
    for (const auto& r : j["rhos"]) c.rhos.push_back(get_vector(r, where + ".rhos"));
  }
  if (j.contains("anchor_offset")) c.anchor_offset = get_vector(j["anchor_offset"], where + ".anchor_offset");
  if (j.contains("half_width")) c.half_width = get_count(j["half_width"], where + ".half_width", 1);
  if (j.contains("tol")) c.tol = get_number(j["tol"], where + ".tol");
  if (j.contains("max_iter")) c.max_iter = get_count(j["max_iter"], where + ".max_iter", 1);
  if (j.contains("inner_tol")) c.inner_tol = get_number(j["inner_tol"], where + ".inner_tol");
  for (double l : c.lambdas)
    if (!(l > 0)) throw ConfigError(where + ": lambda must be positive");
  if (!(c.tol > 0)) throw ConfigError(where + ".tol must be positive");
  if (!(c.inner_tol > 0 && c.inner_tol <= c.tol / 10)) throw ConfigError(where + ".inner_tol must be in (0, tol/10]");
}

void parse_hyperbolicity(const json& j, ExperimentConfig& c, const fs::path& base)
{
  const std::string where = "hyperbolicity";
  check_keys(j, {"horizon", "samples", "solution"}, where);
  if (j.contains("horizon")) c.horizon = get_count(j["horizon"], where + ".horizon", 1);
  if (j.contains("samples")) c.samples = get_count(j["samples"], where + ".samples", 1);
  if (j.contains("solution")) c.solution_path = base / j["solution"].get<std::string>();
}

ExperimentConfig parse_config_at(const json& j, const fs::path& base)
{
  check_keys(j, {"potential", "interaction", "certification", "solver", "hyperbolicity", "output", "seed"}, "config");
  if (!j.contains("potential")) throw ConfigError("config: missing 'potential'");
  ExperimentConfig c;
  try {
    c.potential = parse_potential(j["potential"]);
    if (j.contains("interaction")) c.interaction = parse_interaction(j["interaction"]);
  } catch (const io::FormatError& e) {
    throw ConfigError(e.what());
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const Index d = c.potential.dimension();
  if (j.contains("certification")) parse_certification(j["certification"], c, base);
  if (j.contains("solver")) parse_solver(j["solver"], c);
  if (j.contains("hyperbolicity")) parse_hyperbolicity(j["hyperbolicity"], c, base);
  if (j.contains("output")) c.output = j["output"].get<std::string>();
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (c.has_search_window && (c.aubry.lower.size() != d || c.aubry.upper.size() != d))
    throw ConfigError("certification: search window dimension differs from the potential");
  for (const auto& r : c.rhos)
    if (r.size() != d) throw ConfigError("solver: rho dimension differs from the potential");
  if (c.anchor_offset.size() == 0) c.anchor_offset = Vector<double>::Zero(d);
  if (c.anchor_offset.size() != d) throw ConfigError("solver.anchor_offset: dimension mismatch");
  return c;
}

std::string hex64(std::uint64_t h)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text(const fs::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_manifest(const ExperimentConfig& c, const std::string& command, std::vector<std::string> artifacts,
                    int code, const json& summary)
{
  artifacts.push_back("manifest.json");
  json m = {{"tool", "fkai"},
            {"version", tool_version},
            {"command", command},
            {"config_hash", hex64(config_hash(c))},
            {"artifacts", artifacts},
            {"exit_code", code},
            {"passed", code == exit_code::ok},
            {"summary", summary}};
  write_json(c.output / "manifest.json", m);
}

AubryCertificate<double> obtain_certificate(const ExperimentConfig& c)
{
  if (c.certificate_path) {
    std::ifstream in(*c.certificate_path);
    if (!in) throw ConfigError("cannot read certificate " + c.certificate_path->string());
    json j;
    try {
      j = json::parse(in);
      return io::certificate_from_json(j);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("certificate: ") + e.what());
    } catch (const io::FormatError& e) {
      throw ConfigError(e.what());
    }
  }
  if (!c.has_search_window) throw ConfigError("certification: search window 'lower'/'upper' is required");
  AubryOptions<double> opts = c.aubry;
  opts.seed = c.seed;
  return estimate_aubry(c.potential, opts);
}

json certificate_summary(const AubryCertificate<double>& cert)
{
  return {{"R", cert.R}, {"r", cert.r}, {"m", cert.m}, {"zeros", cert.zeros.size()}};
}

double single_lambda(const ExperimentConfig& c)
{
  if (c.lambdas.size() != 1) throw ConfigError("solver: exactly one 'lambda' is required");
  return c.lambdas.front();
}

Vector<double> single_rho(const ExperimentConfig& c)
{
  if (c.rhos.size() > 1) throw ConfigError("solver: exactly one 'rho' is required");
  if (c.rhos.empty()) return Vector<double>::Zero(c.potential.dimension());
  return c.rhos.front();
}

SolveParams<double> solve_params(const ExperimentConfig& c, double lambda, const Vector<double>& rho)
{
  SolveParams<double> p;
  p.lambda = lambda;
  p.rho = RotationVector<double>(rho);
  p.anchor_offset = c.anchor_offset;
  p.window = Window{c.half_width, c.potential.dimension()};
  p.tol = c.tol;
  p.max_iter = c.max_iter;
  p.inner_tol = c.inner_tol;
  return p;
}

struct SolveOutcome
{
  int code = exit_code::ok;
  std::string status = "ok";
  std::string message;
  std::optional<Site> site;
  std::optional<SolveResult<double>> result;
  std::vector<double> trace;
  json checks = json::object();
};

SolveOutcome run_solve(const ExperimentConfig& c, const AubryCertificate<double>& cert, double lambda,
                       const Vector<double>& rho)
{
  SolveOutcome out;
  try {
    auto res = solve_equilibrium(solve_params(c, lambda, rho), c.interaction, c.potential, cert);
    const auto& r = res.report;
    const double slack = 1 + 1e-12;
    bool residual_ok = r.residual <= c.tol;
    bool anchor_ok = r.distance_to_anchor <= cert.r * slack;
    bool rho_ok = r.distance_to_rho <= (cert.r + cert.R) * slack;
    out.checks = {{"residual_ok", residual_ok}, {"anchor_containment", anchor_ok}, {"rho_containment", rho_ok}};
    if (!(residual_ok && anchor_ok && rho_ok)) {
      out.code = exit_code::certification;
      out.status = "containment-failure";
      out.message = "converged configuration violates the certified bounds";
    }
    out.result = std::move(res);
  } catch (const DomainError& e) {
    out.code = exit_code::domain;
    out.status = "domain-error";
    out.message = e.what();
    if (e.has_site()) out.site = e.site();
  } catch (const NonConvergenceError& e) {
    out.code = exit_code::nonconvergence;
    out.status = "non-convergence";
    out.message = e.what();
    out.trace = e.trace();
  } catch (const CertificateError& e) {
    out.code = exit_code::certification;
    out.status = "certificate-error";
    out.message = e.what();
  } catch (const NumericalError& e) {
    out.code = exit_code::certification;
    out.status = "numerical-error";
    out.message = e.what();
  }
  return out;
}

int certification_guard(const std::exception& e, std::ostream& log)
{
  log << "certification failed: " << e.what() << '\n';
  return exit_code::certification;
}

HyperbolicityOptions hyperbolicity_options(const ExperimentConfig& c)
{
  HyperbolicityOptions o;
  o.horizon = c.horizon;
  o.cones.samples = c.samples;
  o.cones.seed = c.seed;
  o.solve_tol = c.tol;
  return o;
}

} // namespace

json ExperimentConfig::resolved() const
{
  json cert = {{"grid_points", aubry.grid_points},
               {"grid_points_per_axis", aubry.grid_points_per_axis},
               {"zero_tol", aubry.zero_tol},
               {"degeneracy_ratio", aubry.degeneracy_ratio},
               {"expansion_floor_ratio", aubry.expansion_floor_ratio},
               {"max_halvings", aubry.max_halvings},
               {"ball_samples", aubry.ball_samples},
               {"pair_samples", aubry.pair_samples},
               {"covering_samples", aubry.covering_samples},
               {"safety", aubry.safety ? json(*aubry.safety) : json(nullptr)},
               {"expansion_safety", aubry.expansion_safety ? json(*aubry.expansion_safety) : json(nullptr)},
               {"detect_period", aubry.detect_period}};
  if (has_search_window) {
    cert["lower"] = io::vector_to_json(aubry.lower);
    cert["upper"] = io::vector_to_json(aubry.upper);
  }
  if (certificate_path) cert["certificate"] = certificate_path->generic_string();
  json rho_list = json::array();
  for (const auto& r : rhos) rho_list.push_back(io::vector_to_json(r));
  json solver = {{"lambdas", lambdas},
                 {"rhos", rho_list},
                 {"anchor_offset", io::vector_to_json(anchor_offset)},
                 {"half_width", half_width},
                 {"tol", tol},
                 {"max_iter", max_iter},
                 {"inner_tol", inner_tol}};
  json hyp = {{"horizon", horizon}, {"samples", samples}};
  if (solution_path) hyp["solution"] = solution_path->generic_string();
  return {{"potential", io::potential_to_json(potential)},
          {"interaction", io::interaction_to_json(interaction)},
          {"certification", std::move(cert)},
          {"solver", std::move(solver)},
          {"hyperbolicity", std::move(hyp)},
          {"output", output.generic_string()},
          {"seed", seed}};
}

ExperimentConfig parse_config(const json& j) { return parse_config_at(j, fs::path()); }

ExperimentConfig load_config(const fs::path& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config_at(j, path.parent_path());
}

std::uint64_t config_hash(const ExperimentConfig& config)
{
  const std::string text = config.resolved().dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

int cmd_certify(const ExperimentConfig& c, std::ostream& log)
{
  fs::create_directories(c.output);
  AubryCertificate<double> cert;
  try {
    cert = obtain_certificate(c);
  } catch (const CertificationFailure& e) {
    write_manifest(c, "certify", {}, exit_code::certification, {{"error", e.what()}});
    return certification_guard(e, log);
  } catch (const CertificateError& e) {
    write_manifest(c, "certify", {}, exit_code::certification, {{"error", e.what()}});
    return certification_guard(e, log);
  }
  write_json(c.output / "certificate.json", io::certificate_to_json(cert));
  write_manifest(c, "certify", {"certificate.json"}, exit_code::ok, certificate_summary(cert));
  log << "certificate: R = " << cert.R << ", r = " << cert.r << ", m = " << cert.m << ", " << cert.zeros.size()
      << " zeros\n";
  return exit_code::ok;
}

int cmd_solve(const ExperimentConfig& c, std::ostream& log)
{
  fs::create_directories(c.output);
  const double lambda = single_lambda(c);
  const Vector<double> rho = single_rho(c);
  AubryCertificate<double> cert;
  try {
    cert = obtain_certificate(c);
  } catch (const CertificationFailure& e) {
    write_manifest(c, "solve", {}, exit_code::certification, {{"error", e.what()}});
    return certification_guard(e, log);
  }
  std::vector<std::string> artifacts;
  if (!c.certificate_path) {
    write_json(c.output / "certificate.json", io::certificate_to_json(cert));
    artifacts.push_back("certificate.json");
  }

  SolveOutcome out = run_solve(c, cert, lambda, rho);
  json report = {{"command", "solve"},
                 {"status", out.status},
                 {"exit_code", out.code},
                 {"message", out.message},
                 {"lambda", lambda},
                 {"rho", io::vector_to_json(rho)},
                 {"certificate", certificate_summary(cert)},
                 {"checks", out.checks},
                 {"config", c.resolved()}};
  if (out.site) report["site"] = *out.site;
  if (out.result) {
    report["report"] = io::report_to_json(out.result->report);
    std::ofstream sol(c.output / "solution.csv");
    io::write_configuration_csv(sol, out.result->solution);
    std::ofstream trace(c.output / "trace.csv");
    io::write_trace_csv(trace, out.result->report);
    artifacts.insert(artifacts.end(), {"solution.csv", "trace.csv"});
  } else if (!out.trace.empty()) {
    report["step_distances"] = out.trace;
  }
  write_json(c.output / "report.json", report);
  artifacts.push_back("report.json");
  write_manifest(c, "solve", artifacts, out.code, {{"status", out.status}});

  if (out.result) {
    const auto& r = out.result->report;
    log << "solve: " << out.status << ", iterations " << r.iterations << ", residual " << r.residual
        << ", d(u,a) " << r.distance_to_anchor << ", lambda_0 " << r.lambda_threshold << '\n';
  } else {
    log << "solve: " << out.status << ": " << out.message << '\n';
  }
  return out.code;
}

int cmd_hyperbolicity(const ExperimentConfig& c, std::ostream& log)
{
  fs::create_directories(c.output);
  if (c.interaction.kind() != InteractionKind::generating_nn)
    throw ConfigError("hyperbolicity: needs a generating-nn interaction");
  const double lambda = single_lambda(c);
  const Vector<double> rho = single_rho(c);
  const fs::path solution = c.solution_path ? *c.solution_path : c.output / "solution.csv";
  std::ifstream in(solution);
  if (!in) throw ConfigError("hyperbolicity: solve artifact " + solution.string() + " not found");
  io::WindowValues wv;
  try {
    wv = io::read_configuration_csv(in);
  } catch (const io::FormatError& e) {
    throw ConfigError(std::string("hyperbolicity: ") + e.what());
  }
  if (wv.window.dimension != c.potential.dimension())
    throw ConfigError("hyperbolicity: solution dimension differs from the potential");

  AubryCertificate<double> cert;
  try {
    cert = obtain_certificate(c);
  } catch (const CertificationFailure& e) {
    write_manifest(c, "hyperbolicity", {}, exit_code::certification, {{"error", e.what()}});
    return certification_guard(e, log);
  }
  Configuration<double> u;
  try {
    auto anchors = anchor_configuration(wv.window, RotationVector<double>(rho), cert.anchors, cert.R,
                                        c.anchor_offset);
    u = anchors.with_values(std::move(wv.values));
  } catch (const CertificateError& e) {
    write_manifest(c, "hyperbolicity", {}, exit_code::certification, {{"error", e.what()}});
    return certification_guard(e, log);
  }

  auto hc = certify_hyperbolicity(u, c.interaction, c.potential, lambda, cert, hyperbolicity_options(c));
  bool bounds_ok = true;
  std::string bounds_message;
  try {
    auto sites = linearize(u, c.interaction, c.potential, lambda);
    check_linearization_bounds<double>(sites, c.interaction, RotationVector<double>(rho), cert, lambda);
  } catch (const CertificateError& e) {
    bounds_ok = false;
    bounds_message = e.what();
  }
  const bool passed = hc.passed() && hc.orbit_passed;
  const int code = passed ? exit_code::ok : exit_code::hyperbolicity;

  json j = io::hyperbolicity_to_json(hc);
  j["lambda"] = lambda;
  j["rho"] = io::vector_to_json(rho);
  j["linearization_bounds_ok"] = bounds_ok;
  if (!bounds_ok) j["linearization_bounds_message"] = bounds_message;
  j["exit_code"] = code;
  j["config"] = c.resolved();
  write_json(c.output / "hyperbolicity.json", j);
  Matrix<double> p = momentum(u, c.interaction, c.potential, lambda);
  std::ofstream orbit(c.output / "orbit.csv");
  io::write_orbit_csv(orbit, u, p, hc.verdicts);
  write_manifest(c, "hyperbolicity", {"hyperbolicity.json", "orbit.csv"}, code,
                 {{"cones_passed", hc.cones_passed},
                  {"orbit_passed", hc.orbit_passed},
                  {"failing_sites", hc.failing_sites.size()}});
  log << "hyperbolicity: " << (passed ? "pass" : "fail") << ", mu " << hc.cone.mu << ", alpha " << hc.cone.alpha
      << ", min angle " << hc.splitting.min_angle << ", orbit deviation " << hc.orbit_deviation << ", "
      << hc.failing_sites.size() << " failing sites\n";
  return code;
}

int cmd_sweep(const ExperimentConfig& c, unsigned workers, std::ostream& log)
{
  if (c.lambdas.empty()) throw ConfigError("sweep: 'lambdas' is empty");
  std::vector<Vector<double>> rhos = c.rhos;
  if (rhos.empty()) throw ConfigError("sweep: 'rhos' is empty");
  fs::create_directories(c.output);
  AubryCertificate<double> cert;
  try {
    cert = obtain_certificate(c);
  } catch (const CertificationFailure& e) {
    write_manifest(c, "sweep", {}, exit_code::certification, {{"error", e.what()}});
    return certification_guard(e, log);
  }

  struct Job
  {
    double lambda;
    Vector<double> rho;
  };
  struct Row
  {
    std::string status;
    int code = 0;
    Index iterations = 0;
    double distance_to_anchor = 0, residual = 0, contraction_factor = 0;
    std::string hyperbolic = "";
  };
  std::vector<Job> jobs;
  for (const auto& r : rhos)
    for (double l : c.lambdas) jobs.push_back({l, r});
  std::vector<Row> rows(jobs.size());
  const bool nn = c.interaction.kind() == InteractionKind::generating_nn;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      Row row;
      SolveOutcome out = run_solve(c, cert, jobs[k].lambda, jobs[k].rho);
      row.status = out.status;
      row.code = out.code;
      if (out.result) {
        const auto& rep = out.result->report;
        row.iterations = rep.iterations;
        row.distance_to_anchor = rep.distance_to_anchor;
        row.residual = rep.residual;
        row.contraction_factor = rep.contraction_factor;
        if (nn && out.code == exit_code::ok) {
          auto hc = certify_hyperbolicity(out.result->solution, c.interaction, c.potential, jobs[k].lambda, cert,
                                          hyperbolicity_options(c));
          row.hyperbolic = hc.passed() && hc.orbit_passed ? "true" : "false";
        }
      }
      rows[k] = std::move(row);
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const Index d = c.potential.dimension();
  std::ostringstream csv;
  csv << "lambda";
  for (Index j = 0; j < d; ++j) csv << ",rho_" << j;
  csv << ",status,exit_code,iterations,distance_to_anchor,residual,contraction_factor,hyperbolic_pass\n";
  int code = exit_code::ok;
  std::size_t failed = 0;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const Row& r = rows[k];
    csv << io::format_number(jobs[k].lambda);
    for (Index j = 0; j < d; ++j) csv << ',' << io::format_number(jobs[k].rho(j));
    csv << ',' << r.status << ',' << r.code << ',' << r.iterations << ',' << io::format_number(r.distance_to_anchor)
        << ',' << io::format_number(r.residual) << ',' << io::format_number(r.contraction_factor) << ','
        << r.hyperbolic << '\n';
    if (r.code != exit_code::ok) {
      ++failed;
      if (code == exit_code::ok) code = r.code;
    }
  }
  write_text(c.output / "sweep.csv", csv.str());
  write_manifest(c, "sweep", {"sweep.csv"}, code, {{"runs", jobs.size()}, {"failed", failed}});
  log << "sweep: " << jobs.size() << " runs, " << failed << " failed\n";
  return code;
}

int run(const std::string& command, const fs::path& config_path, const RunOptions& options, std::ostream& log,
        std::ostream& err)
{
  try {
    ExperimentConfig c = load_config(config_path);
    if (options.out) c.output = *options.out;
    if (options.seed) c.seed = *options.seed;
    if (command == "certify") return cmd_certify(c, log);
    if (command == "solve") return cmd_solve(c, log);
    if (command == "hyperbolicity") return cmd_hyperbolicity(c, log);
    if (command == "sweep") return cmd_sweep(c, options.workers, log);
    err << "unknown command '" << command << "'\n";
    return exit_code::usage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const CertificationFailure& e) {
    err << "certification failed: " << e.what() << '\n';
    return exit_code::certification;
  } catch (const CertificateError& e) {
    err << "certificate error: " << e.what() << '\n';
    return exit_code::certification;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  }
}

} // namespace fkai::cli
