#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fkai/aubry.hpp"
#include "fkai/errors.hpp"
#include "fkai/interaction.hpp"
#include "fkai/lattice.hpp"
#include "fkai/potential.hpp"

namespace fkai {

/// Coefficients of the linearized equilibrium equation at one site:
///   A (xi_i - xi_{i+1}) - B (xi_{i-1} - xi_i) + C xi_i = 0.
template <typename Scalar>
struct LinearizationSite
{
  Site site = 0;
  Matrix<Scalar> A; ///< Hessian I(u_i - u_{i+1})
  Matrix<Scalar> B; ///< Hessian I(u_{i-1} - u_i)
  Matrix<Scalar> C; ///< lambda Hessian V(u_i)
};

namespace detail {

template <typename Scalar>
const Coupling<Scalar>& require_generating(const Interaction<Scalar>& delta)
{
  if (delta.kind() != InteractionKind::generating_nn)
    throw ShapeError("hyperbolicity is defined for nearest-neighbour generating interactions only");
  return delta.coupling();
}

} // namespace detail

template <typename Scalar>
std::vector<LinearizationSite<Scalar>> linearize(const Configuration<Scalar>& u, const Interaction<Scalar>& delta,
                                                 const Potential<Scalar>& V, Scalar lambda)
{
  const auto& I = detail::require_generating(delta);
  const Window& w = u.window();
  std::vector<LinearizationSite<Scalar>> out;
  out.reserve(w.size());
  for (Site i = w.first(); i <= w.last(); ++i) {
    Vector<Scalar> ui = u.at(i);
    out.push_back({i, I.hessian(ui - u.at(i + 1)), I.hessian(u.at(i - 1) - ui), lambda * V.hessian(ui)});
  }
  return out;
}

/// Checks sigma_max(A_i), sigma_max(B_i) <= K(rho, r + R) / 4 and
/// sigma_min(C_i) >= lambda m at every site; throws CertificateError otherwise.
template <typename Scalar>
void check_linearization_bounds(std::span<const LinearizationSite<Scalar>> sites, const Interaction<Scalar>& delta,
                                const RotationVector<Scalar>& rho, const AubryCertificate<Scalar>& cert,
                                Scalar lambda)
{
  const Scalar upper = lipschitz_bound(delta, rho, cert.r + cert.R) / Scalar(4);
  const Scalar lower = lambda * cert.m;
  const Scalar slack = Scalar(1e-9);
  for (const auto& s : sites) {
    if (sigma_max(s.A) > upper * (Scalar(1) + slack) || sigma_max(s.B) > upper * (Scalar(1) + slack))
      throw CertificateError("site " + std::to_string(s.site) + ": coupling Hessian exceeds K(rho, r+R)/4");
    if (sigma_min(s.C) < lower * (Scalar(1) - slack))
      throw CertificateError("site " + std::to_string(s.site) + ": sigma_min(lambda Hessian V) below lambda m");
  }
}

template <typename Scalar>
std::vector<LinearizationSite<Scalar>> linearize(const Configuration<Scalar>& u, const Interaction<Scalar>& delta,
                                                 const Potential<Scalar>& V, Scalar lambda,
                                                 const RotationVector<Scalar>& rho, const AubryCertificate<Scalar>& cert)
{
  auto sites = linearize(u, delta, V, lambda);
  check_linearization_bounds<Scalar>(sites, delta, rho, cert, lambda);
  return sites;
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> checked_inverse(const Matrix<Scalar>& m, const char* what)
{
  Vector<Scalar> s = singular_values(m);
  if (!(s.minCoeff() > Scalar(64) * epsilon<Scalar>() * s.maxCoeff()))
    throw ConvexityError(std::string(what) + " is singular");
  return m.inverse();
}

} // namespace detail

/// xi_{i+1} = A^{-1} [(A + B + C) xi_i - B xi_{i-1}].
template <typename Scalar>
Vector<Scalar> transfer_step(const LinearizationSite<Scalar>& s, const Vector<Scalar>& xi_prev,
                             const Vector<Scalar>& xi_cur)
{
  Matrix<Scalar> Ainv = detail::checked_inverse(s.A, "coupling Hessian A_i");
  return Ainv * ((s.A + s.B + s.C) * xi_cur - s.B * xi_prev);
}

/// xi_{i-1} = B^{-1} [(A + B + C) xi_i - A xi_{i+1}].
template <typename Scalar>
Vector<Scalar> backward_transfer_step(const LinearizationSite<Scalar>& s, const Vector<Scalar>& xi_cur,
                                      const Vector<Scalar>& xi_next)
{
  Matrix<Scalar> Binv = detail::checked_inverse(s.B, "coupling Hessian B_i");
  return Binv * ((s.A + s.B + s.C) * xi_cur - s.A * xi_next);
}

/// Residual of the linearized equation on a triple.
template <typename Scalar>
Scalar linearization_residual(const LinearizationSite<Scalar>& s, const Vector<Scalar>& xi_prev,
                              const Vector<Scalar>& xi_cur, const Vector<Scalar>& xi_next)
{
  return (s.A * (xi_cur - xi_next) - s.B * (xi_prev - xi_cur) + s.C * xi_cur).norm();
}

/// (xi_{i-1}, xi_i) -> (xi_i, xi_{i+1}) as a 2d x 2d matrix.
template <typename Scalar>
Matrix<Scalar> transfer_matrix(const LinearizationSite<Scalar>& s)
{
  const Index d = s.A.rows();
  Matrix<Scalar> Ainv = detail::checked_inverse(s.A, "coupling Hessian A_i");
  Matrix<Scalar> T = Matrix<Scalar>::Zero(2 * d, 2 * d);
  T.topRightCorner(d, d).setIdentity();
  T.bottomLeftCorner(d, d) = -Ainv * s.B;
  T.bottomRightCorner(d, d) = Ainv * (s.A + s.B + s.C);
  return T;
}

/// (xi_i, xi_{i+1}) -> (xi_{i-1}, xi_i).
template <typename Scalar>
Matrix<Scalar> inverse_transfer_matrix(const LinearizationSite<Scalar>& s)
{
  const Index d = s.A.rows();
  Matrix<Scalar> Binv = detail::checked_inverse(s.B, "coupling Hessian B_i");
  Matrix<Scalar> T = Matrix<Scalar>::Zero(2 * d, 2 * d);
  T.topLeftCorner(d, d) = Binv * (s.A + s.B + s.C);
  T.topRightCorner(d, d) = -Binv * s.A;
  T.bottomLeftCorner(d, d).setIdentity();
  return T;
}

template <typename Scalar>
struct ConeParams
{
  Scalar mu;
  Scalar alpha;
  Scalar beta;
};

/// mu > 1 > alpha: the roots of x^2 - (2 + 4R/r) x + 1; beta = alpha.
template <typename Scalar>
ConeParams<Scalar> cone_parameters(Scalar r, Scalar R)
{
  using std::sqrt;
  if (!(r > 0 && R > 0)) throw ShapeError("cone parameters need r, R > 0");
  const Scalar s = Scalar(2) + Scalar(4) * R / r;
  const Scalar disc = sqrt(s * s - Scalar(4));
  const Scalar mu = (s + disc) / Scalar(2);
  // 1/mu instead of (s - disc)/2 avoids cancellation
  const Scalar alpha = Scalar(1) / mu;
  return {mu, alpha, alpha};
}

template <typename Scalar>
ConeParams<Scalar> cone_parameters(const AubryCertificate<Scalar>& cert)
{
  return cone_parameters(cert.r, cert.R);
}

template <typename Scalar>
struct ConeVerdict
{
  Site site = 0;
  /// min over the unstable cone of alpha ||xi_{i+1}|| / ||xi_i||; >= 1 maps the cone into itself.
  Scalar unstable_cone_ratio = Scalar(0);
  /// min of ||(xi_i, xi_{i+1})|| / (mu ||(xi_{i-1}, xi_i)||).
  Scalar unstable_expansion_ratio = Scalar(0);
  Scalar stable_cone_ratio = Scalar(0);
  Scalar stable_expansion_ratio = Scalar(0);
  bool unstable_ok = false;
  bool stable_ok = false;

  bool passed() const { return unstable_ok && stable_ok; }
};

struct ConeCheckOptions
{
  /// Boundary/interior direction pairs per site when d > 1.
  Index samples = 256;
  std::uint64_t seed = 0;
};

namespace detail {

// d = 1 with xi_i = 1, t = neighbour in [-a, a], other neighbour = c - b t.
// Returns (min |c - b t| * a, min sqrt((1 + (c-bt)^2) / (1 + t^2)) / mu).
template <typename Scalar>
std::pair<Scalar, Scalar> scalar_cone_ratios(Scalar c, Scalar b, Scalar a, Scalar mu)
{
  using std::abs;
  using std::sqrt;
  auto value = [&](Scalar t) { return c - b * t; };
  Scalar lo_end = value(-a), hi_end = value(a);
  Scalar min_abs = (lo_end < 0) != (hi_end < 0) ? Scalar(0) : std::min(abs(lo_end), abs(hi_end));

  auto g = [&](Scalar t) { return (Scalar(1) + value(t) * value(t)) / (Scalar(1) + t * t); };
  Scalar gmin = std::min(g(-a), g(a));
  // g'(t) = 0  <=>  c b t^2 + (b^2 - 1 - c^2) t - c b = 0
  const Scalar qa = c * b, qb = b * b - Scalar(1) - c * c, qc = -c * b;
  if (qa == 0) {
    if (qb != 0) {
      Scalar t = -qc / qb;
      if (abs(t) <= a) gmin = std::min(gmin, g(t));
    }
  } else {
    Scalar disc = qb * qb - Scalar(4) * qa * qc;
    if (disc >= 0) {
      Scalar root = sqrt(disc);
      for (Scalar t : {(-qb + root) / (Scalar(2) * qa), (-qb - root) / (Scalar(2) * qa)})
        if (abs(t) <= a) gmin = std::min(gmin, g(t));
    }
  }
  return {min_abs * a, sqrt(gmin) / mu};
}

template <typename Scalar>
Vector<Scalar> random_unit(std::mt19937_64& rng, Index d)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector<Scalar> v(d);
  do {
    for (Index j = 0; j < d; ++j) v(j) = Scalar(normal(rng));
  } while (v.norm() == 0);
  return v.normalized();
}

} // namespace detail

/// Verdicts for both cone conditions at one linearization site.
template <typename Scalar>
ConeVerdict<Scalar> check_cone_site(const LinearizationSite<Scalar>& s, const ConeParams<Scalar>& cone,
                                    const ConeCheckOptions& opts = {})
{
  const Scalar tolerance = Scalar(1) - Scalar(1e-12);
  ConeVerdict<Scalar> v;
  v.site = s.site;
  const Index d = s.A.rows();
  if (d == 1) {
    const Scalar a = s.A(0, 0), b = s.B(0, 0), sum = a + b + s.C(0, 0);
    if (a == 0 || b == 0) throw ConvexityError("coupling Hessian is singular");
    std::tie(v.unstable_cone_ratio, v.unstable_expansion_ratio) =
        detail::scalar_cone_ratios(sum / a, b / a, cone.alpha, cone.mu);
    std::tie(v.stable_cone_ratio, v.stable_expansion_ratio) =
        detail::scalar_cone_ratios(sum / b, a / b, cone.beta, cone.mu);
  } else {
    std::mt19937_64 rng(opts.seed ^ static_cast<std::uint64_t>(s.site * 2654435761LL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    v.unstable_cone_ratio = v.unstable_expansion_ratio = infinity<Scalar>();
    v.stable_cone_ratio = v.stable_expansion_ratio = infinity<Scalar>();
    for (Index k = 0; k < opts.samples; ++k) {
      Vector<Scalar> cur = detail::random_unit<Scalar>(rng, d);
      Scalar scale = k % 2 == 0 ? Scalar(1) : Scalar(unit(rng));
      Vector<Scalar> prev = (cone.alpha * scale) * detail::random_unit<Scalar>(rng, d);
      Vector<Scalar> next = transfer_step(s, prev, cur);
      v.unstable_cone_ratio = std::min(v.unstable_cone_ratio, cone.alpha * next.norm());
      Scalar before = std::sqrt(prev.squaredNorm() + Scalar(1));
      Scalar after = std::sqrt(Scalar(1) + next.squaredNorm());
      v.unstable_expansion_ratio = std::min(v.unstable_expansion_ratio, after / (cone.mu * before));

      Vector<Scalar> fwd = (cone.beta * scale) * detail::random_unit<Scalar>(rng, d);
      Vector<Scalar> back = backward_transfer_step(s, cur, fwd);
      v.stable_cone_ratio = std::min(v.stable_cone_ratio, cone.beta * back.norm());
      before = std::sqrt(Scalar(1) + fwd.squaredNorm());
      after = std::sqrt(back.squaredNorm() + Scalar(1));
      v.stable_expansion_ratio = std::min(v.stable_expansion_ratio, after / (cone.mu * before));
    }
  }
  v.unstable_ok = v.unstable_cone_ratio >= tolerance && v.unstable_expansion_ratio >= tolerance;
  v.stable_ok = v.stable_cone_ratio >= tolerance && v.stable_expansion_ratio >= tolerance;
  return v;
}

template <typename Scalar>
std::vector<ConeVerdict<Scalar>> verify_cone_conditions(std::span<const LinearizationSite<Scalar>> sites,
                                                        const ConeParams<Scalar>& cone,
                                                        const ConeCheckOptions& opts = {})
{
  std::vector<ConeVerdict<Scalar>> out;
  out.reserve(sites.size());
  for (const auto& s : sites) out.push_back(check_cone_site(s, cone, opts));
  return out;
}

template <typename Scalar>
std::vector<ConeVerdict<Scalar>> verify_cone_conditions(const Configuration<Scalar>& u, const Interaction<Scalar>& delta,
                                                        const Potential<Scalar>& V, Scalar lambda,
                                                        const AubryCertificate<Scalar>& cert,
                                                        const ConeCheckOptions& opts = {})
{
  auto sites = linearize(u, delta, V, lambda);
  return verify_cone_conditions<Scalar>(sites, cone_parameters(cert), opts);
}

/// Approximate invariant splitting on pair space (xi_{i-1}, xi_i).
template <typename Scalar>
struct Splitting
{
  Index horizon = 0;
  /// Site i of the pair (xi_{i-1}, xi_i).
  std::vector<Site> sites;
  /// Orthonormal 2d x d bases.
  std::vector<Matrix<Scalar>> unstable;
  std::vector<Matrix<Scalar>> stable;
  /// Smallest principal angle between E^u_i and E^s_i, radians.
  std::vector<Scalar> angles;
  Scalar min_angle = Scalar(0);
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> orthonormal_basis(const Matrix<Scalar>& m)
{
  Eigen::HouseholderQR<Matrix<Scalar>> qr(m);
  return qr.householderQ() * Matrix<Scalar>::Identity(m.rows(), m.cols());
}

template <typename Scalar>
Scalar principal_angle(const Matrix<Scalar>& a, const Matrix<Scalar>& b)
{
  using std::acos;
  Scalar c = sigma_max(Matrix<Scalar>(a.transpose() * b));
  return acos(std::min(Scalar(1), c));
}

} // namespace detail

/// E^u_i: the unstable cone at site i - H pushed forward H steps. E^s_i: the
/// stable cone at i + H pulled back. Pairs whose horizon leaves the sites are skipped.
template <typename Scalar>
Splitting<Scalar> cone_splitting(std::span<const LinearizationSite<Scalar>> sites, Index horizon)
{
  const Index n = static_cast<Index>(sites.size());
  if (horizon < 1 || 2 * horizon > n - 1) throw RangeError("splitting horizon exceeds the window");
  const Index d = sites.front().A.rows();
  std::vector<Matrix<Scalar>> forward, backward;
  forward.reserve(n);
  backward.reserve(n);
  for (const auto& s : sites) {
    forward.push_back(transfer_matrix(s));
    backward.push_back(inverse_transfer_matrix(s));
  }
  Matrix<Scalar> unstable_seed = Matrix<Scalar>::Zero(2 * d, d);
  unstable_seed.bottomRows(d).setIdentity();
  Matrix<Scalar> stable_seed = Matrix<Scalar>::Zero(2 * d, d);
  stable_seed.topRows(d).setIdentity();

  Splitting<Scalar> out;
  out.horizon = horizon;
  out.min_angle = infinity<Scalar>();
  // Pair (xi_{s_j - 1}, xi_{s_j}) sits at column j; T_j maps column j to j + 1.
  for (Index j = horizon; j + horizon <= n; ++j) {
    Matrix<Scalar> eu = unstable_seed;
    for (Index k = j - horizon; k < j; ++k) eu = detail::orthonormal_basis<Scalar>(forward[k] * eu);
    Matrix<Scalar> es = stable_seed;
    for (Index k = j + horizon - 1; k >= j; --k) es = detail::orthonormal_basis<Scalar>(backward[k] * es);
    Scalar angle = detail::principal_angle(eu, es);
    out.sites.push_back(sites[j].site);
    out.unstable.push_back(std::move(eu));
    out.stable.push_back(std::move(es));
    out.angles.push_back(angle);
    out.min_angle = std::min(out.min_angle, angle);
  }
  return out;
}

template <typename Scalar>
Splitting<Scalar> cone_splitting(const Configuration<Scalar>& u, const Interaction<Scalar>& delta,
                                 const Potential<Scalar>& V, Scalar lambda, Index horizon)
{
  auto sites = linearize(u, delta, V, lambda);
  return cone_splitting<Scalar>(sites, horizon);
}

/// p_i = -grad I(u_i - u_{i+1}) - lambda grad V(u_i) on every window site.
template <typename Scalar>
Matrix<Scalar> momentum(const Configuration<Scalar>& u, const Interaction<Scalar>& delta, const Potential<Scalar>& V,
                        Scalar lambda)
{
  const auto& I = detail::require_generating(delta);
  const Window& w = u.window();
  Matrix<Scalar> p(w.dimension, w.size());
  for (Site i = w.first(); i <= w.last(); ++i) {
    Vector<Scalar> ui = u.at(i);
    p.col(w.column(i)) = -I.gradient(ui - u.at(i + 1)) - lambda * V.gradient(ui);
  }
  return p;
}

template <typename Scalar>
using PhasePoint = std::pair<Vector<Scalar>, Vector<Scalar>>;

/// F_lambda(x, p) = (y, p'): grad I(x - y) = -p - lambda grad V(x), p' = p + lambda grad V(x).
template <typename Scalar>
PhasePoint<Scalar> twist_map_step(const Vector<Scalar>& x, const Vector<Scalar>& p, const Interaction<Scalar>& delta,
                                  const Potential<Scalar>& V, Scalar lambda)
{
  const auto& I = detail::require_generating(delta);
  Vector<Scalar> force = lambda * V.gradient(x);
  Vector<Scalar> w = I.inverse_gradient(Vector<Scalar>(-p - force));
  return {x - w, p + force};
}

/// L(x, y) = (y, -grad I(x - y)).
template <typename Scalar>
PhasePoint<Scalar> legendre_transform(const Vector<Scalar>& x, const Vector<Scalar>& y, const Coupling<Scalar>& I)
{
  return {y, -I.gradient(x - y)};
}

/// L^{-1}(y, p) = (y + (grad I)^{-1}(-p), y).
template <typename Scalar>
PhasePoint<Scalar> inverse_legendre_transform(const Vector<Scalar>& y, const Vector<Scalar>& p,
                                              const Coupling<Scalar>& I)
{
  return {y + I.inverse_gradient(Vector<Scalar>(-p)), y};
}

/// Position-pair dynamics Sigma(u_{i-1}, u_i) = (u_i, u_{i+1}) solving the equilibrium equation at i.
template <typename Scalar>
PhasePoint<Scalar> position_pair_step(const Vector<Scalar>& prev, const Vector<Scalar>& cur,
                                      const Interaction<Scalar>& delta, const Potential<Scalar>& V, Scalar lambda)
{
  const auto& I = detail::require_generating(delta);
  Vector<Scalar> g = I.gradient(prev - cur) - lambda * V.gradient(cur);
  return {cur, cur - I.inverse_gradient(g)};
}

template <typename Scalar>
struct LegendreBounds
{
  /// sigma_max(DL) <= sqrt(1 + 4 E^2)
  Scalar forward;
  /// sigma_max(DL^{-1}) <= sqrt(1 + 4 / epsilon^2)
  Scalar inverse;
};

template <typename Scalar>
LegendreBounds<Scalar> legendre_bounds(const Coupling<Scalar>& I)
{
  using std::sqrt;
  const Scalar E = I.convexity_upper(), e = I.convexity_lower();
  return {sqrt(Scalar(1) + Scalar(4) * E * E), sqrt(Scalar(1) + Scalar(4) / (e * e))};
}

/// max_i ||F_lambda(u_i, p_i) - (u_{i+1}, p_{i+1})|| over sites with i, i+1 in the window.
template <typename Scalar>
Scalar verify_orbit(const Configuration<Scalar>& u, const Matrix<Scalar>& p, const Interaction<Scalar>& delta,
                    const Potential<Scalar>& V, Scalar lambda)
{
  const Window& w = u.window();
  if (p.rows() != w.dimension || p.cols() != w.size()) throw ShapeError("momentum must share the window");
  Scalar worst = 0;
  for (Site i = w.first(); i < w.last(); ++i) {
    auto [y, q] = twist_map_step<Scalar>(u.col(i), p.col(w.column(i)), delta, V, lambda);
    Scalar dev = std::sqrt((y - u.col(i + 1)).squaredNorm() + (q - p.col(w.column(i + 1))).squaredNorm());
    worst = std::max(worst, dev);
  }
  return worst;
}

struct HyperbolicityOptions
{
  Index horizon = 20;
  ConeCheckOptions cones;
  /// Solver tolerance the orbit threshold scales with.
  double solve_tol = 1e-10;
};

template <typename Scalar>
struct HyperbolicityCertificate
{
  ConeParams<Scalar> cone;
  std::vector<ConeVerdict<Scalar>> verdicts;
  Splitting<Scalar> splitting;
  LegendreBounds<Scalar> legendre;
  Scalar orbit_deviation = Scalar(0);
  /// tol (1 + lambda sup ||Hessian V(u_i)||) 10
  Scalar orbit_threshold = Scalar(0);
  bool sampled = false;
  Index samples_per_site = 0;
  bool cones_passed = false;
  bool angle_positive = false;
  bool orbit_passed = false;
  std::vector<Site> failing_sites;
  std::string note;

  /// Cone verdicts all pass and the splitting angle is bounded away from zero.
  bool passed() const { return cones_passed && angle_positive; }
};

template <typename Scalar>
HyperbolicityCertificate<Scalar> certify_hyperbolicity(const Configuration<Scalar>& u,
                                                       const Interaction<Scalar>& delta,
                                                       const Potential<Scalar>& V, Scalar lambda,
                                                       const AubryCertificate<Scalar>& cert,
                                                       const HyperbolicityOptions& opts = {})
{
  const auto& I = detail::require_generating(delta);
  HyperbolicityCertificate<Scalar> hc;
  hc.cone = cone_parameters(cert);
  auto sites = linearize(u, delta, V, lambda);
  hc.verdicts = verify_cone_conditions<Scalar>(sites, hc.cone, opts.cones);
  hc.cones_passed = true;
  for (const auto& v : hc.verdicts) {
    if (!v.passed()) {
      hc.cones_passed = false;
      hc.failing_sites.push_back(v.site);
    }
  }
  hc.sampled = u.dimension() > 1;
  hc.samples_per_site = hc.sampled ? opts.cones.samples : 0;
  if (hc.sampled) hc.note = "d > 1: cone conditions checked on sampled directions, not proven";

  const Index horizon = std::min<Index>(opts.horizon, u.window().half_width);
  hc.splitting = cone_splitting<Scalar>(sites, horizon);
  hc.angle_positive = hc.splitting.min_angle > 0;
  hc.legendre = legendre_bounds(I);

  Matrix<Scalar> p = momentum(u, delta, V, lambda);
  hc.orbit_deviation = verify_orbit(u, p, delta, V, lambda);
  Scalar hess = 0;
  for (Site i = u.window().first(); i <= u.window().last(); ++i)
    hess = std::max(hess, sigma_max(V.hessian(Vector<Scalar>(u.col(i)))));
  hc.orbit_threshold = Scalar(opts.solve_tol) * (Scalar(1) + lambda * hess) * Scalar(10);
  hc.orbit_passed = hc.orbit_deviation <= hc.orbit_threshold;
  return hc;
}

} // namespace fkai
