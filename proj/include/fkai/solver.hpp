#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fkai/aubry.hpp"
#include "fkai/errors.hpp"
#include "fkai/interaction.hpp"
#include "fkai/lattice.hpp"
#include "fkai/potential.hpp"

namespace fkai {

template <typename Scalar>
struct SolveParams
{
  Scalar lambda = Scalar(1);
  RotationVector<Scalar> rho;
  /// Anchors are taken along offset + rho(i); zero by default.
  Vector<Scalar> anchor_offset;
  Window window;
  Scalar tol = Scalar(1e-10);
  Index max_iter = 10000;
  Scalar inner_tol = Scalar(1e-12);
  /// Starting iterate; must lie in {u : d(u, a) <= r}. Defaults to the anchors.
  std::optional<Configuration<Scalar>> initial;

  void validate() const
  {
    if (!(lambda > 0)) throw ShapeError("lambda must be positive");
    if (!(tol > 0)) throw ShapeError("tol must be positive");
    if (max_iter < 1) throw ShapeError("max_iter must be >= 1");
    if (!(inner_tol <= tol / 10)) throw ShapeError("inner_tol must be <= tol / 10");
    if (rho.dimension() != window.dimension) throw ShapeError("rotation vector dimension mismatch");
  }
};

template <typename Scalar>
struct SolveReport
{
  bool converged = false;
  Index iterations = 0;
  Scalar residual = Scalar(0);
  /// d(u^{k+1}, u^k) for every step taken.
  std::vector<Scalar> step_distances;
  /// Residual of u^{k+1} after each step.
  std::vector<Scalar> residual_trace;
  /// Largest ratio of consecutive step distances above the rounding floor.
  Scalar contraction_factor = Scalar(0);
  /// r / (r + R).
  Scalar contraction_bound = Scalar(0);
  Scalar distance_to_anchor = Scalar(0);
  Scalar distance_to_rho = Scalar(0);
  /// Largest iterate distance from the anchors seen during the run.
  Scalar max_iterate_distance_to_anchor = Scalar(0);
  Vector<Scalar> rotation_estimate;
  Scalar lambda_threshold = Scalar(0);
  bool above_threshold = false;
  /// Non-zero only for cut-off long-range kernels.
  Scalar delta_truncation_tail = Scalar(0);
  std::string note;
};

template <typename Scalar>
struct SolveResult
{
  Configuration<Scalar> solution;
  Configuration<Scalar> anchors;
  SolveReport<Scalar> report;
};

/// lambda_0 = (K(rho, r + R)(r + R) + ||Delta|_Hom(rho)||) / (r m).
template <typename Scalar>
Scalar lambda_threshold(const Interaction<Scalar>& delta, const RotationVector<Scalar>& rho,
                        const AubryCertificate<Scalar>& cert)
{
  const Scalar reach = cert.r + cert.R;
  return (lipschitz_bound(delta, rho, reach) * reach + delta_hom(delta, rho).norm()) / (cert.r * cert.m);
}

/// sup over window sites of ||Delta(u)_i + lambda grad V(u_i)||.
template <typename Scalar>
Scalar residual(const Configuration<Scalar>& u, const Interaction<Scalar>& delta,
                const Potential<Scalar>& V, Scalar lambda)
{
  const Window& w = u.window();
  Scalar sup = 0;
  for (Site i = w.first(); i <= w.last(); ++i)
    sup = std::max(sup, (apply_delta(delta, u, i) + lambda * V.gradient(Vector<Scalar>(u.col(i)))).norm());
  return sup;
}

/// One application of Phi(u)_i = phi_{a_i}(-Delta(u)_i / lambda), all sites from the same iterate.
template <typename Scalar>
Configuration<Scalar> phi_step(const Configuration<Scalar>& u, const Configuration<Scalar>& anchors,
                               const Interaction<Scalar>& delta, const Potential<Scalar>& V,
                               const AubryCertificate<Scalar>& cert, Scalar lambda, Scalar inner_tol)
{
  const Window& w = u.window();
  if (!(w == anchors.window())) throw ShapeError("iterate and anchors live on different windows");
  const Scalar limit = cert.target_radius();
  Matrix<Scalar> next(w.dimension, w.size());
  for (Site i = w.first(); i <= w.last(); ++i) {
    Vector<Scalar> target = -apply_delta(delta, u, i) / lambda;
    if (target.norm() > limit * (Scalar(1) + Scalar(1e-12)))
      throw DomainError("site " + std::to_string(i) + ": ||Delta(u)_i / lambda|| exceeds r*m", i, true);
    Vector<Scalar> a = anchors.col(i);
    next.col(w.column(i)) = local_inverse(V, a, target, cert, inner_tol);
  }
  Configuration<Scalar> out = u.with_values(std::move(next));
  const Scalar gap = window_distance(out, anchors);
  if (gap > cert.r * (Scalar(1) + Scalar(1e-9)))
    throw CertificateError("Phi left the ball d(u, a) <= r");
  return out;
}

/// Refines every window anchor to a root of psi in working precision.
template <typename Scalar>
Configuration<Scalar> polish_anchors(const Configuration<Scalar>& anchors, const Potential<Scalar>& V,
                                     const AubryCertificate<Scalar>& cert, Scalar tol)
{
  const Window& w = anchors.window();
  Matrix<Scalar> values = anchors.values();
  const Vector<Scalar> zero = Vector<Scalar>::Zero(w.dimension);
  for (Site i = w.first(); i <= w.last(); ++i)
    values.col(w.column(i)) = local_inverse(V, Vector<Scalar>(anchors.col(i)), zero, cert, tol);
  return anchors.with_values(std::move(values));
}

namespace detail {

// Step distances below this are dominated by rounding and excluded from contraction ratios.
template <typename Scalar>
Scalar rounding_floor(const Configuration<Scalar>& u)
{
  Scalar scale = std::max(Scalar(1), u.values().cwiseAbs().maxCoeff());
  return Scalar(1e4) * epsilon<Scalar>() * scale;
}

} // namespace detail

/// Fixed-point iteration of Phi from the anchor configuration.
///
/// Stops once d(u^{k+1}, u^k) <= tol (1 - q) / q with q = r / (r + R), which
/// bounds the distance to the fixed point by tol, and the residual of the
/// iterate is at most tol. Below lambda_0 the run proceeds but is flagged.
template <typename Scalar>
SolveResult<Scalar> solve_equilibrium(const SolveParams<Scalar>& params, const Interaction<Scalar>& delta,
                                      const Potential<Scalar>& V, const AubryCertificate<Scalar>& cert)
{
  params.validate();
  if (V.dimension() != params.window.dimension) throw ShapeError("potential dimension mismatch");
  if (cert.dimension() != params.window.dimension) throw ShapeError("certificate dimension mismatch");

  SolveReport<Scalar> report;
  report.lambda_threshold = lambda_threshold(delta, params.rho, cert);
  report.above_threshold = params.lambda >= report.lambda_threshold;
  if (!report.above_threshold) report.note = "lambda below lambda_0: no contraction guarantee";
  report.contraction_bound = cert.r / (cert.r + cert.R);
  report.delta_truncation_tail = delta_truncation_tail(delta, params.rho, cert.r + cert.R);

  Configuration<Scalar> anchors = polish_anchors(
      anchor_configuration(params.window, params.rho, cert.anchors, cert.R, params.anchor_offset), V, cert,
      params.inner_tol);

  Configuration<Scalar> u = anchors;
  if (params.initial) {
    if (!(params.initial->window() == params.window)) throw ShapeError("initial iterate window mismatch");
    if (window_distance(*params.initial, anchors) > cert.r * (Scalar(1) + Scalar(1e-12)))
      throw CertificateError("initial iterate lies outside d(u, a) <= r");
    u = anchors.with_values(params.initial->values());
  }

  const Scalar q = report.contraction_bound;
  const Scalar step_goal = params.tol * (Scalar(1) - q) / q;
  Scalar floor = detail::rounding_floor(anchors);
  Scalar previous_step = -1;

  Scalar res = residual(u, delta, V, params.lambda);
  for (Index k = 0; k < params.max_iter; ++k) {
    Configuration<Scalar> next = phi_step(u, anchors, delta, V, cert, params.lambda, params.inner_tol);
    Scalar step = window_distance(next, u);
    u = std::move(next);
    res = residual(u, delta, V, params.lambda);
    report.step_distances.push_back(step);
    report.residual_trace.push_back(res);
    report.iterations = k + 1;
    report.max_iterate_distance_to_anchor =
        std::max(report.max_iterate_distance_to_anchor, window_distance(u, anchors));
    if (previous_step > floor && step > floor)
      report.contraction_factor = std::max(report.contraction_factor, step / previous_step);
    previous_step = step;
    if (step <= step_goal && res <= params.tol) {
      report.converged = true;
      break;
    }
  }

  report.residual = res;
  report.distance_to_anchor = window_distance(u, anchors);
  report.distance_to_rho = distance_to_line(u, params.rho, params.anchor_offset);
  report.rotation_estimate = rotation_vector_estimate(u);
  if (!report.converged) {
    std::vector<double> trace(report.step_distances.begin(), report.step_distances.end());
    throw NonConvergenceError("fixed-point iteration did not converge within max_iter", std::move(trace));
  }
  return {std::move(u), std::move(anchors), std::move(report)};
}

template <typename Scalar>
struct UniquenessVerdict
{
  /// Every site of both configurations lies in one common closed r-ball around a point of O.
  bool same_ball = false;
  Scalar distance = Scalar(0);
  /// same_ball implies distance <= 10 tol; false flags a contradiction with uniqueness.
  bool consistent = true;
  std::optional<Site> first_separated_site;
};

/// Compares two equilibria against the uniqueness statement of the contraction argument.
template <typename Scalar>
UniquenessVerdict<Scalar> uniqueness_check(const Configuration<Scalar>& u, const Configuration<Scalar>& v,
                                           const AubryCertificate<Scalar>& cert, Scalar tol)
{
  UniquenessVerdict<Scalar> verdict;
  verdict.distance = window_distance(u, v);
  const Window& w = u.window();
  const Scalar slack = cert.r * (Scalar(1) + Scalar(1e-12));
  verdict.same_ball = true;
  for (Site i = w.first(); i <= w.last(); ++i) {
    Vector<Scalar> ui = u.col(i), vi = v.col(i);
    bool shared = false;
    for (const auto& z : cert.anchors->points_within(ui, cert.r * (Scalar(1) + Scalar(1e-12))))
      if ((vi - z).norm() <= slack) shared = true;
    if (!shared) {
      verdict.same_ball = false;
      verdict.first_separated_site = i;
      break;
    }
  }
  verdict.consistent = !verdict.same_ball || verdict.distance <= Scalar(10) * tol;
  return verdict;
}

} // namespace fkai
