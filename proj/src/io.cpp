#include "fkai/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace fkai::io {

namespace {

// JSON has no infinity; non-finite values travel as strings.
json number(double x)
{
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double read_number(const json& j, const std::string& where)
{
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return infinity<double>();
    if (s == "-inf") return -infinity<double>();
    if (s == "nan") return std::nan("");
  }
  throw FormatError(where + ": expected a number");
}

const json& field(const json& j, const char* key, const std::string& where)
{
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(where + ": missing '" + key + "'");
  return *it;
}

json matrix_to_json(const Matrix<double>& m)
{
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix<double> matrix_from_json(const json& j, const std::string& where)
{
  if (!j.is_array() || j.empty()) throw FormatError(where + ": expected a non-empty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.front().size());
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Index>(j[i].size()) != cols)
      throw FormatError(where + ": ragged matrix");
    for (Index k = 0; k < cols; ++k) m(i, k) = read_number(j[i][k], where);
  }
  return m;
}

json points_to_json(const std::vector<Vector<double>>& pts)
{
  json a = json::array();
  for (const auto& p : pts) a.push_back(vector_to_json(p));
  return a;
}

std::vector<Vector<double>> points_from_json(const json& j, const std::string& where)
{
  if (!j.is_array()) throw FormatError(where + ": expected an array of points");
  std::vector<Vector<double>> out;
  for (const auto& p : j) out.push_back(vector_from_json(p, where));
  return out;
}

const char* coupling_name(CouplingKind k)
{
  return k == CouplingKind::quadratic ? "quadratic" : "quadratic-sqrt";
}

} // namespace

std::string format_number(double x)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json vector_to_json(const Vector<double>& v)
{
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

Vector<double> vector_from_json(const json& j, const std::string& where)
{
  if (j.is_number()) return Vector<double>::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw FormatError(where + ": expected a number or non-empty array");
  Vector<double> v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = read_number(j[i], where);
  return v;
}

json potential_to_json(const Potential<double>& V)
{
  json j;
  j["family"] = to_string(V.family());
  j["dimension"] = V.dimension();
  switch (V.family()) {
  case PotentialFamily::delone_bump:
    j["points"] = points_to_json(V.points());
    j["width"] = V.width();
    j["depth"] = V.depth();
    break;
  case PotentialFamily::almost_periodic_truncated: {
    const auto& s = *V.series();
    j["amplitude_ratio"] = s.amplitude_ratio;
    j["frequency_ratio"] = s.frequency_ratio;
    j["terms"] = s.terms;
    j["direction"] = vector_to_json(s.direction);
    j["truncation_c2_tail"] = number(V.truncation_c2_tail());
    break;
  }
  case PotentialFamily::trig_sum: {
    json terms = json::array();
    for (const auto& t : V.terms())
      terms.push_back({{"amplitude", t.amplitude}, {"frequency", vector_to_json(t.frequency)}, {"phase", t.phase}});
    j["terms"] = std::move(terms);
    break;
  }
  }
  return j;
}

Potential<double> potential_from_json(const json& j)
{
  const std::string where = "potential";
  const std::string family = field(j, "family", where).get<std::string>();
  if (family == "trig-sum") {
    std::vector<TrigTerm<double>> terms;
    for (const auto& t : field(j, "terms", where)) {
      TrigTerm<double> term{read_number(field(t, "amplitude", where + ".terms"), where),
                            vector_from_json(field(t, "frequency", where + ".terms"), where + ".terms"), 0.0};
      if (t.contains("phase")) term.phase = read_number(t["phase"], where + ".terms");
      terms.push_back(std::move(term));
    }
    return Potential<double>::trig_sum(std::move(terms));
  }
  if (family == "almost-periodic-truncated") {
    AlmostPeriodicSeries<double> s;
    if (j.contains("amplitude_ratio")) s.amplitude_ratio = read_number(j["amplitude_ratio"], where);
    if (j.contains("frequency_ratio")) s.frequency_ratio = read_number(j["frequency_ratio"], where);
    if (j.contains("terms")) s.terms = j["terms"].get<int>();
    if (j.contains("direction")) s.direction = vector_from_json(j["direction"], where + ".direction");
    return Potential<double>::almost_periodic(s);
  }
  if (family == "delone-bump") {
    double depth = j.contains("depth") ? read_number(j["depth"], where) : 1.0;
    return Potential<double>::delone_bump(points_from_json(field(j, "points", where), where + ".points"),
                                          read_number(field(j, "width", where), where), depth);
  }
  throw FormatError(where + ": unknown family '" + family + "'");
}

json interaction_to_json(const Interaction<double>& delta)
{
  json j;
  if (delta.kind() == InteractionKind::generating_nn) {
    const auto& c = delta.coupling();
    j["kind"] = "generating-nn";
    j["coupling"] = coupling_name(c.kind);
    j["stiffness"] = c.stiffness;
    j["perturbation"] = c.perturbation;
    j["convexity_lower"] = c.convexity_lower();
    j["convexity_upper"] = c.convexity_upper();
    return j;
  }
  j["kind"] = "long-range-polynomial";
  j["power"] = delta.power();
  j["cutoff"] = delta.cutoff();
  if (delta.geometric()) {
    j["ratio"] = delta.ratio();
    j["scale"] = delta.scale();
  } else {
    json w = json::object();
    for (const auto& [k, c] : delta.weights()) w[std::to_string(k)] = c;
    j["weights"] = std::move(w);
  }
  return j;
}

Interaction<double> interaction_from_json(const json& j)
{
  const std::string where = "interaction";
  const std::string kind = field(j, "kind", where).get<std::string>();
  if (kind == "generating-nn") {
    std::string coupling = j.value("coupling", std::string("quadratic"));
    double k = j.contains("stiffness") ? read_number(j["stiffness"], where) : 1.0;
    if (!(k > 0)) throw FormatError(where + ": stiffness must be positive");
    if (coupling == "quadratic") return Interaction<double>::generating_nn(Coupling<double>::quadratic(k));
    if (coupling == "quadratic-sqrt") {
      double c = j.contains("perturbation") ? read_number(j["perturbation"], where) : 0.0;
      if (c < 0) throw FormatError(where + ": perturbation must be non-negative");
      return Interaction<double>::generating_nn(Coupling<double>::quadratic_sqrt(k, c));
    }
    throw FormatError(where + ": unknown coupling '" + coupling + "'");
  }
  if (kind == "long-range-polynomial") {
    int power = j.value("power", 3);
    if (j.contains("weights")) {
      std::map<int, double> w;
      for (const auto& [key, value] : j["weights"].items()) {
        int k = 0;
        auto res = std::from_chars(key.data(), key.data() + key.size(), k);
        if (res.ec != std::errc() || res.ptr != key.data() + key.size())
          throw FormatError(where + ".weights: keys must be integers");
        w[k] = read_number(value, where + ".weights");
      }
      return Interaction<double>::long_range(std::move(w), power);
    }
    double ratio = j.contains("ratio") ? read_number(j["ratio"], where) : 0.5;
    double scale = j.contains("scale") ? read_number(j["scale"], where) : 1.0;
    return Interaction<double>::long_range_geometric(ratio, j.value("cutoff", 32), power, scale);
  }
  throw FormatError(where + ": unknown kind '" + kind + "'");
}

json anchors_to_json(const AnchorSet<double>& O)
{
  if (auto p = dynamic_cast<const PeriodicAnchorSet<double>*>(&O))
    return {{"kind", "periodic"}, {"base", points_to_json(p->base())}, {"basis", matrix_to_json(p->basis())}};
  if (auto l = dynamic_cast<const ListedAnchorSet<double>*>(&O))
    return {{"kind", "listed"},
            {"points", points_to_json(l->points())},
            {"lower", vector_to_json(l->lower())},
            {"upper", vector_to_json(l->upper())}};
  throw FormatError("anchor set has no serial form");
}

std::shared_ptr<const AnchorSet<double>> anchors_from_json(const json& j)
{
  const std::string where = "anchors";
  const std::string kind = field(j, "kind", where).get<std::string>();
  if (kind == "periodic")
    return std::make_shared<const PeriodicAnchorSet<double>>(points_from_json(field(j, "base", where), where),
                                                             matrix_from_json(field(j, "basis", where), where));
  if (kind == "listed")
    return std::make_shared<const ListedAnchorSet<double>>(points_from_json(field(j, "points", where), where),
                                                           vector_from_json(field(j, "lower", where), where),
                                                           vector_from_json(field(j, "upper", where), where));
  throw FormatError(where + ": unknown kind '" + kind + "'");
}

json certificate_to_json(const AubryCertificate<double>& cert)
{
  const auto& p = cert.provenance;
  json prov = {{"method", p.method},
               {"grid_points", p.grid_points},
               {"candidates_found", p.candidates_found},
               {"rejected_degenerate", p.rejected_degenerate},
               {"rejected_residual", p.rejected_residual},
               {"zero_tol", number(p.zero_tol)},
               {"max_zero_residual", number(p.max_zero_residual)},
               {"sigma_min_at_zeros", number(p.sigma_min_at_zeros)},
               {"sigma_max_at_zeros", number(p.sigma_max_at_zeros)},
               {"degeneracy_ratio", number(p.degeneracy_ratio)},
               {"expansion_floor", number(p.expansion_floor)},
               {"radius_fraction", number(p.radius_fraction)},
               {"max_radius", number(p.max_radius)},
               {"ball_samples", p.ball_samples},
               {"pair_samples", p.pair_samples},
               {"pair_worst_ratio", number(p.pair_worst_ratio)},
               {"covering_samples", p.covering_samples},
               {"covering_worst", number(p.covering_worst)},
               {"safety", number(p.safety)},
               {"expansion_safety", number(p.expansion_safety)},
               {"period", p.period ? number(*p.period) : json(nullptr)},
               {"seed", p.seed}};
  return {{"dimension", cert.dimension()},
          {"R", number(cert.R)},
          {"r", number(cert.r)},
          {"m", number(cert.m)},
          {"target_radius", number(cert.target_radius())},
          {"anchors", anchors_to_json(*cert.anchors)},
          {"zeros", points_to_json(cert.zeros)},
          {"provenance", std::move(prov)}};
}

AubryCertificate<double> certificate_from_json(const json& j)
{
  const std::string where = "certificate";
  auto cert = make_certificate(anchors_from_json(field(j, "anchors", where)), read_number(field(j, "R", where), where),
                               read_number(field(j, "r", where), where), read_number(field(j, "m", where), where));
  if (j.contains("zeros")) cert.zeros = points_from_json(j["zeros"], where + ".zeros");
  if (j.contains("provenance")) {
    const auto& p = j["provenance"];
    auto& q = cert.provenance;
    auto num = [&](const char* k, double& dst) {
      if (p.contains(k)) dst = read_number(p[k], where + ".provenance");
    };
    auto idx = [&](const char* k, Index& dst) {
      if (p.contains(k)) dst = p[k].get<Index>();
    };
    q.method = p.value("method", q.method);
    idx("grid_points", q.grid_points);
    idx("candidates_found", q.candidates_found);
    idx("rejected_degenerate", q.rejected_degenerate);
    idx("rejected_residual", q.rejected_residual);
    num("zero_tol", q.zero_tol);
    num("max_zero_residual", q.max_zero_residual);
    num("sigma_min_at_zeros", q.sigma_min_at_zeros);
    num("sigma_max_at_zeros", q.sigma_max_at_zeros);
    num("degeneracy_ratio", q.degeneracy_ratio);
    num("expansion_floor", q.expansion_floor);
    num("radius_fraction", q.radius_fraction);
    num("max_radius", q.max_radius);
    idx("ball_samples", q.ball_samples);
    idx("pair_samples", q.pair_samples);
    num("pair_worst_ratio", q.pair_worst_ratio);
    idx("covering_samples", q.covering_samples);
    num("covering_worst", q.covering_worst);
    num("safety", q.safety);
    num("expansion_safety", q.expansion_safety);
    if (p.contains("period") && !p["period"].is_null()) q.period = read_number(p["period"], where);
    if (p.contains("seed")) q.seed = p["seed"].get<std::uint64_t>();
  }
  return cert;
}

json configuration_to_json(const Configuration<double>& u)
{
  const Window& w = u.window();
  const auto& t = u.tail();
  json tail = {{"kind", to_string(t.kind)},
               {"rho", vector_to_json(t.rho)},
               {"offset", vector_to_json(t.offset)},
               {"site_shift", t.site_shift},
               {"value_shift", vector_to_json(t.value_shift)}};
  if (t.kind == TailKind::anchor) tail["covering_radius"] = t.covering_radius;
  json values = json::array();
  for (Site i = w.first(); i <= w.last(); ++i) values.push_back(vector_to_json(u.col(i)));
  return {{"window", {{"half_width", w.half_width}, {"first", w.first()}, {"last", w.last()}}},
          {"dimension", w.dimension},
          {"tail_rule", std::move(tail)},
          {"values", std::move(values)}};
}

Configuration<double> configuration_from_json(const json& j, std::shared_ptr<const AnchorSet<double>> anchors)
{
  const std::string where = "configuration";
  const Index N = field(field(j, "window", where), "half_width", where + ".window").get<Index>();
  const Index d = field(j, "dimension", where).get<Index>();
  Window w{N, d};
  const json& t = field(j, "tail_rule", where);
  const std::string kind = field(t, "kind", where + ".tail_rule").get<std::string>();
  Vector<double> rho = vector_from_json(field(t, "rho", where + ".tail_rule"), where + ".tail_rule");
  Vector<double> offset = t.contains("offset") ? vector_from_json(t["offset"], where) : Vector<double>::Zero(d);
  TailRule<double> tail;
  if (kind == to_string(TailKind::homomorphism)) {
    tail = TailRule<double>::homomorphism(rho, offset);
  } else if (kind == to_string(TailKind::anchor)) {
    if (!anchors) throw FormatError(where + ": anchor tail needs its anchor set");
    tail = TailRule<double>::anchor(rho, std::move(anchors), read_number(field(t, "covering_radius", where), where),
                                    offset);
  } else {
    throw FormatError(where + ": unknown tail kind '" + kind + "'");
  }
  if (t.contains("site_shift")) tail.site_shift = t["site_shift"].get<Site>();
  if (t.contains("value_shift")) tail.value_shift = vector_from_json(t["value_shift"], where);
  const json& values = field(j, "values", where);
  if (!values.is_array() || static_cast<Index>(values.size()) != w.size())
    throw FormatError(where + ": values must list 2N+1 sites");
  Matrix<double> m(d, w.size());
  for (Index c = 0; c < w.size(); ++c) {
    Vector<double> v = vector_from_json(values[c], where + ".values");
    if (v.size() != d) throw FormatError(where + ": value dimension mismatch");
    m.col(c) = v;
  }
  return Configuration<double>(w, std::move(m), std::move(tail));
}

json report_to_json(const SolveReport<double>& r)
{
  json steps = json::array(), res = json::array();
  for (double s : r.step_distances) steps.push_back(number(s));
  for (double s : r.residual_trace) res.push_back(number(s));
  return {{"converged", r.converged},
          {"iterations", r.iterations},
          {"residual", number(r.residual)},
          {"contraction_factor", number(r.contraction_factor)},
          {"contraction_bound", number(r.contraction_bound)},
          {"distance_to_anchor", number(r.distance_to_anchor)},
          {"distance_to_rho", number(r.distance_to_rho)},
          {"max_iterate_distance_to_anchor", number(r.max_iterate_distance_to_anchor)},
          {"rotation_estimate", vector_to_json(r.rotation_estimate)},
          {"lambda_threshold", number(r.lambda_threshold)},
          {"above_threshold", r.above_threshold},
          {"delta_truncation_tail", number(r.delta_truncation_tail)},
          {"note", r.note},
          {"step_distances", std::move(steps)},
          {"residual_trace", std::move(res)}};
}

json hyperbolicity_to_json(const HyperbolicityCertificate<double>& hc)
{
  json verdicts = json::array();
  for (const auto& v : hc.verdicts)
    verdicts.push_back({{"site", v.site},
                        {"unstable_ok", v.unstable_ok},
                        {"stable_ok", v.stable_ok},
                        {"unstable_cone_ratio", number(v.unstable_cone_ratio)},
                        {"unstable_expansion_ratio", number(v.unstable_expansion_ratio)},
                        {"stable_cone_ratio", number(v.stable_cone_ratio)},
                        {"stable_expansion_ratio", number(v.stable_expansion_ratio)}});
  json split = json::array();
  const auto& s = hc.splitting;
  for (std::size_t k = 0; k < s.sites.size(); ++k)
    split.push_back({{"site", s.sites[k]},
                     {"unstable", matrix_to_json(s.unstable[k])},
                     {"stable", matrix_to_json(s.stable[k])},
                     {"angle", number(s.angles[k])}});
  return {{"passed", hc.passed() && hc.orbit_passed},
          {"cones_passed", hc.cones_passed},
          {"angle_positive", hc.angle_positive},
          {"orbit_passed", hc.orbit_passed},
          {"mu", number(hc.cone.mu)},
          {"alpha", number(hc.cone.alpha)},
          {"beta", number(hc.cone.beta)},
          {"min_angle", number(s.min_angle)},
          {"horizon", s.horizon},
          {"legendre_forward_bound", number(hc.legendre.forward)},
          {"legendre_inverse_bound", number(hc.legendre.inverse)},
          {"orbit_deviation", number(hc.orbit_deviation)},
          {"orbit_threshold", number(hc.orbit_threshold)},
          {"sampled", hc.sampled},
          {"samples_per_site", hc.samples_per_site},
          {"failing_sites", hc.failing_sites},
          {"note", hc.note},
          {"verdicts", std::move(verdicts)},
          {"splitting", std::move(split)}};
}

void write_configuration_csv(std::ostream& out, const Configuration<double>& u)
{
  const Window& w = u.window();
  out << "site";
  for (Index j = 0; j < w.dimension; ++j) out << ",component_" << j;
  out << '\n';
  for (Site i = w.first(); i <= w.last(); ++i) {
    out << i;
    for (Index j = 0; j < w.dimension; ++j) out << ',' << format_number(u.col(i)(j));
    out << '\n';
  }
}

std::vector<std::vector<std::string>> read_csv(std::istream& in)
{
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

namespace {

double parse_double(const std::string& s)
{
  double x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("csv: bad number '" + s + "'");
  return x;
}

} // namespace

WindowValues read_configuration_csv(std::istream& in)
{
  auto rows = read_csv(in);
  if (rows.size() < 2) throw FormatError("csv: no data rows");
  const auto& head = rows.front();
  if (head.empty() || head[0] != "site") throw FormatError("csv: first column must be 'site'");
  const Index d = static_cast<Index>(head.size()) - 1;
  if (d < 1) throw FormatError("csv: no component columns");
  for (Index j = 0; j < d; ++j)
    if (head[j + 1] != "component_" + std::to_string(j)) throw FormatError("csv: unexpected header '" + head[j + 1] + "'");
  const Index n = static_cast<Index>(rows.size()) - 1;
  if (n % 2 == 0 || n < 3) throw FormatError("csv: need 2N+1 sites with N >= 1");
  Window w{(n - 1) / 2, d};
  Matrix<double> values(d, n);
  for (Index c = 0; c < n; ++c) {
    const auto& row = rows[c + 1];
    if (static_cast<Index>(row.size()) != d + 1) throw FormatError("csv: ragged row");
    Site site = 0;
    auto res = std::from_chars(row[0].data(), row[0].data() + row[0].size(), site);
    if (res.ec != std::errc() || site != w.first() + c) throw FormatError("csv: sites must run -N..N in order");
    for (Index j = 0; j < d; ++j) values(j, c) = parse_double(row[j + 1]);
  }
  return {w, std::move(values)};
}

void write_orbit_csv(std::ostream& out, const Configuration<double>& u, const Matrix<double>& p,
                     const std::vector<ConeVerdict<double>>& verdicts)
{
  const Window& w = u.window();
  out << "i";
  for (Index j = 0; j < w.dimension; ++j) out << ",u_" << j;
  for (Index j = 0; j < w.dimension; ++j) out << ",p_" << j;
  out << ",verdict\n";
  for (Site i = w.first(); i <= w.last(); ++i) {
    out << i;
    for (Index j = 0; j < w.dimension; ++j) out << ',' << format_number(u.col(i)(j));
    for (Index j = 0; j < w.dimension; ++j) out << ',' << format_number(p(j, w.column(i)));
    out << ',';
    for (const auto& v : verdicts)
      if (v.site == i) out << (v.passed() ? "pass" : "fail");
    out << '\n';
  }
}

void write_trace_csv(std::ostream& out, const SolveReport<double>& report)
{
  out << "iter,step_distance,residual\n";
  for (std::size_t k = 0; k < report.step_distances.size(); ++k)
    out << k + 1 << ',' << format_number(report.step_distances[k]) << ','
        << format_number(report.residual_trace[k]) << '\n';
}

} // namespace fkai::io
