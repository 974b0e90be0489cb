#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fkai/aubry.hpp"
#include "fkai/hyperbolicity.hpp"
#include "fkai/interaction.hpp"
#include "fkai/lattice.hpp"
#include "fkai/potential.hpp"
#include "fkai/solver.hpp"

namespace fkai::io {

using json = nlohmann::json;

/// Raised on malformed input documents; carries a path-like location.
class FormatError : public Error
{
public:
  using Error::Error;
};

json vector_to_json(const Vector<double>& v);
Vector<double> vector_from_json(const json& j, const std::string& where);

json potential_to_json(const Potential<double>& V);
Potential<double> potential_from_json(const json& j);

json interaction_to_json(const Interaction<double>& delta);
Interaction<double> interaction_from_json(const json& j);

json anchors_to_json(const AnchorSet<double>& O);
std::shared_ptr<const AnchorSet<double>> anchors_from_json(const json& j);

json certificate_to_json(const AubryCertificate<double>& cert);
AubryCertificate<double> certificate_from_json(const json& j);

/// {window, dimension, tail_rule, values}
json configuration_to_json(const Configuration<double>& u);
/// Anchor tails need the anchor set they were built from.
Configuration<double> configuration_from_json(const json& j,
                                              std::shared_ptr<const AnchorSet<double>> anchors = nullptr);

json report_to_json(const SolveReport<double>& report);
json hyperbolicity_to_json(const HyperbolicityCertificate<double>& hc);

/// CSV with header site,component_0,...,component_{d-1}.
void write_configuration_csv(std::ostream& out, const Configuration<double>& u);

struct WindowValues
{
  Window window;
  Matrix<double> values;
};

/// Sites must be the contiguous range -N..N in order.
WindowValues read_configuration_csv(std::istream& in);

/// i,u_0..,p_0..,verdict per window site; verdict is empty when unknown.
void write_orbit_csv(std::ostream& out, const Configuration<double>& u, const Matrix<double>& p,
                     const std::vector<ConeVerdict<double>>& verdicts);

/// iter,step_distance,residual
void write_trace_csv(std::ostream& out, const SolveReport<double>& report);

/// Splits simple comma-separated lines; no quoting.
std::vector<std::vector<std::string>> read_csv(std::istream& in);

/// Shortest round-trip decimal form.
std::string format_number(double x);

} // namespace fkai::io
