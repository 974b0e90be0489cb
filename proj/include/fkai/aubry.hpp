#pragma once

#include <type_traits>
#include <algorithm>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fkai/anchors.hpp"
#include "fkai/errors.hpp"
#include "fkai/potential.hpp"
#include "fkai/types.hpp"

namespace fkai {

/// How a certificate's numbers were obtained.
template <typename Scalar>
struct CertificateProvenance
{
  std::string method = "explicit";
  Index grid_points = 0;
  Index candidates_found = 0;
  Index rejected_degenerate = 0;
  Index rejected_residual = 0;
  Scalar zero_tol = Scalar(0);
  Scalar max_zero_residual = Scalar(0);
  Scalar sigma_min_at_zeros = Scalar(0);
  Scalar sigma_max_at_zeros = Scalar(0);
  Scalar degeneracy_ratio = Scalar(0);
  Scalar expansion_floor = Scalar(0);
  Scalar radius_fraction = Scalar(0);
  Scalar max_radius = Scalar(0);
  Index ball_samples = 0;
  Index pair_samples = 0;
  Scalar pair_worst_ratio = Scalar(0);
  Index covering_samples = 0;
  Scalar covering_worst = Scalar(0);
  Scalar safety = Scalar(1);
  Scalar expansion_safety = Scalar(1);
  std::optional<Scalar> period;
  std::uint64_t seed = 0;
};

/// Data (O, R, r, m) of the Aubry criterion for psi = grad V.
template <typename Scalar>
struct AubryCertificate
{
  std::shared_ptr<const AnchorSet<Scalar>> anchors;
  /// Zeros explicitly found (periodic sets list one fundamental domain).
  std::vector<Vector<Scalar>> zeros;
  Scalar R = Scalar(0);
  Scalar r = Scalar(0);
  Scalar m = Scalar(0);
  CertificateProvenance<Scalar> provenance;

  Index dimension() const { return anchors->dimension(); }
  /// Radius of the target ball on which every local inverse is defined.
  Scalar target_radius() const { return r * m; }
};

template <typename Scalar>
AubryCertificate<Scalar> make_certificate(std::shared_ptr<const AnchorSet<Scalar>> anchors, Scalar R,
                                          Scalar r, Scalar m)
{
  if (!anchors) throw ShapeError("certificate needs an anchor set");
  if (!(R > 0 && r > 0 && m > 0)) throw CertificateError("certificate requires R, r, m > 0");
  AubryCertificate<Scalar> c;
  c.anchors = std::move(anchors);
  c.R = R;
  c.r = r;
  c.m = m;
  if (auto p = std::dynamic_pointer_cast<const PeriodicAnchorSet<Scalar>>(c.anchors)) c.zeros = p->base();
  if (auto l = std::dynamic_pointer_cast<const ListedAnchorSet<Scalar>>(c.anchors)) c.zeros = l->points();
  return c;
}

template <typename Scalar>
struct AubryOptions
{
  Vector<Scalar> lower;
  Vector<Scalar> upper;
  /// Grid nodes in d = 1; nodes per axis when d > 1.
  Index grid_points = 4000;
  Index grid_points_per_axis = 48;
  Scalar zero_tol = Scalar(1e-10);
  /// Zeros with sigma_min(Hessian) below this fraction of the largest are discarded.
  Scalar degeneracy_ratio = Scalar(0.1);
  /// sigma_min on the r-ball must stay above this fraction of its value at the zero.
  Scalar expansion_floor_ratio = Scalar(0.5);
  int max_halvings = 12;
  Index ball_samples = 2001;
  Index pair_samples = 1000;
  Index covering_samples = 1000;
  /// Multiplies R. Defaults to 1 in d = 1 and 1.1 for d > 1, where R itself is sampled.
  std::optional<Scalar> safety;
  /// Divides m. Defaults to 1 in d = 1 (minimum is refined) and 1.05 for d > 1.
  std::optional<Scalar> expansion_safety;
  bool detect_period = true;
  std::uint64_t seed = 0;
};

namespace detail {

// Golden-section refinement of a 1-D minimum on [a, b].
template <typename Scalar, typename F>
Scalar golden_min(F&& f, Scalar a, Scalar b, int iters = 80)
{
  using std::sqrt;
  const Scalar g = (sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar c = b - g * (b - a), d = a + g * (b - a);
  Scalar fc = f(c), fd = f(d);
  for (int k = 0; k < iters; ++k) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return std::min({fc, fd, f(a), f(b)});
}

// Safeguarded Newton for g(x) = 0 on a bracket [a, b] with g(a) g(b) <= 0.
template <typename Scalar, typename G, typename DG>
Scalar bracketed_newton(G&& g, DG&& dg, Scalar a, Scalar b, Scalar x0, int max_iter, Scalar tol,
                        bool& converged)
{
  using std::abs;
  Scalar ga = g(a);
  Scalar x = std::clamp(x0, std::min(a, b), std::max(a, b));
  if (a > b) std::swap(a, b), ga = g(a);
  converged = false;
  for (int k = 0; k < max_iter; ++k) {
    Scalar gx = g(x);
    if (gx == 0) {
      converged = true;
      return x;
    }
    if ((gx < 0) == (ga < 0)) {
      a = x;
      ga = gx;
    } else {
      b = x;
    }
    Scalar slope = dg(x);
    Scalar next = x - gx / slope;
    if (slope != 0 && next == x) {
      converged = abs(gx) <= tol;
      return x;
    }
    if (!(slope != 0) || !(next > a && next < b)) next = (a + b) / Scalar(2);
    Scalar step = abs(next - x);
    x = next;
    if (abs(g(x)) <= tol && step <= epsilon<Scalar>() * abs(x)) {
      converged = true;
      return x;
    }
    if (b - a <= Scalar(2) * epsilon<Scalar>() * (Scalar(1) + abs(x))) {
      converged = abs(g(x)) <= tol;
      return x;
    }
  }
  converged = abs(g(x)) <= tol;
  return x;
}

template <typename Scalar>
Vector<Scalar> random_in_ball(std::mt19937_64& rng, const Vector<Scalar>& center, Scalar radius,
                              bool on_boundary = false)
{
  const Index d = center.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector<Scalar> dir(d);
  do {
    for (Index j = 0; j < d; ++j) dir(j) = Scalar(normal(rng));
  } while (dir.norm() == 0);
  dir.normalize();
  using std::pow;
  Scalar s = on_boundary ? Scalar(1) : Scalar(pow(unit(rng), 1.0 / double(d)));
  return center + (radius * s) * dir;
}

template <typename Scalar>
Scalar potential_sigma_min(const Potential<Scalar>& V, const Vector<Scalar>& x)
{
  return sigma_min(V.hessian(x));
}

// Minimum of sigma_min(Hessian) over the closed ball, sampled (and refined in d = 1).
template <typename Scalar>
Scalar ball_sigma_min(const Potential<Scalar>& V, const Vector<Scalar>& z, Scalar radius,
                      Index samples, std::mt19937_64& rng)
{
  const Index d = z.size();
  if (d == 1) {
    auto f = [&](Scalar t) { return potential_sigma_min<Scalar>(V, Vector<Scalar>::Constant(1, t)); };
    const Index n = std::max<Index>(samples, 3);
    const Scalar a = z(0) - radius, h = Scalar(2) * radius / Scalar(n - 1);
    Index best = 0;
    Scalar best_value = infinity<Scalar>();
    for (Index k = 0; k < n; ++k) {
      Scalar v = f(a + Scalar(k) * h);
      if (v < best_value) best_value = v, best = k;
    }
    Scalar lo = a + Scalar(std::max<Index>(best - 1, 0)) * h;
    Scalar hi = a + Scalar(std::min<Index>(best + 1, n - 1)) * h;
    return std::min(best_value, golden_min(f, lo, hi));
  }
  Scalar out = potential_sigma_min(V, z);
  for (Index j = 0; j < d; ++j) {
    for (Scalar sgn : {Scalar(-1), Scalar(1)}) {
      Vector<Scalar> x = z;
      x(j) += sgn * radius;
      out = std::min(out, potential_sigma_min(V, x));
    }
  }
  for (Index k = 0; k < samples; ++k) {
    out = std::min(out, potential_sigma_min(V, random_in_ball(rng, z, radius, k % 2 == 0)));
  }
  return out;
}

} // namespace detail

/// Sampled check of ||psi(x) - psi(y)|| >= m ||x - y|| on r-balls around anchors.
/// Returns the worst observed ratio ||psi(x) - psi(y)|| / (m ||x - y||), rounding-corrected.
template <typename Scalar>
Scalar sampled_expansion_ratio(const Potential<Scalar>& V, const AubryCertificate<Scalar>& cert,
                               const std::vector<Vector<Scalar>>& centers, Index pairs,
                               std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, centers.size() - 1);
  Scalar worst = infinity<Scalar>();
  for (Index k = 0; k < pairs; ++k) {
    const auto& z = centers[pick(rng)];
    Vector<Scalar> x = detail::random_in_ball(rng, z, cert.r, k % 4 == 0);
    Vector<Scalar> y = detail::random_in_ball(rng, z, cert.r, k % 4 == 1);
    Scalar sep = (x - y).norm();
    if (sep == 0) continue;
    Vector<Scalar> gx = V.gradient(x), gy = V.gradient(y);
    Scalar slack = Scalar(64) * epsilon<Scalar>() * (gx.norm() + gy.norm() + Scalar(1));
    worst = std::min(worst, ((gx - gy).norm() + slack) / (cert.m * sep));
  }
  return worst;
}

/// Sampled check that every closed R-ball centred in [lower, upper] meets O.
/// Returns the largest distance from a sampled centre to O over R (<= 1 passes).
template <typename Scalar>
Scalar sampled_covering_ratio(const AubryCertificate<Scalar>& cert, const Vector<Scalar>& lower,
                              const Vector<Scalar>& upper, Index samples, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index d = lower.size();
  Scalar worst = 0;
  for (Index k = 0; k < samples; ++k) {
    Vector<Scalar> c(d);
    for (Index j = 0; j < d; ++j) c(j) = lower(j) + Scalar(unit(rng)) * (upper(j) - lower(j));
    auto near = cert.anchors->points_within(c, cert.R);
    Scalar best = infinity<Scalar>();
    for (const auto& z : near) best = std::min(best, (z - c).norm());
    worst = std::max(worst, best / cert.R);
  }
  return worst;
}

namespace detail {

template <typename Scalar>
std::vector<Scalar> scan_zeros_1d(const Potential<Scalar>& V, Scalar lo, Scalar hi, Index n,
                                  Scalar zero_tol, Index& rejected_residual)
{
  using std::abs;
  auto g = [&](Scalar x) { return V.derivative(x); };
  auto dg = [&](Scalar x) { return V.second_derivative(x); };
  std::vector<Scalar> out;
  const Scalar h = (hi - lo) / Scalar(n - 1);
  Scalar x0 = lo, g0 = g(lo);
  auto accept = [&](Scalar z) {
    if (abs(g(z)) > zero_tol) {
      ++rejected_residual;
      return;
    }
    if (!out.empty() && abs(out.back() - z) <= Scalar(1e-9) * (Scalar(1) + abs(z))) return;
    out.push_back(z);
  };
  if (g0 == 0) accept(x0);
  for (Index k = 1; k < n; ++k) {
    Scalar x1 = lo + Scalar(k) * h;
    Scalar g1 = g(x1);
    if (g1 == 0) {
      accept(x1);
    } else if (g0 != 0 && (g0 < 0) != (g1 < 0)) {
      bool ok = false;
      Scalar z = bracketed_newton(g, dg, x0, x1, (x0 + x1) / Scalar(2), 200, zero_tol, ok);
      accept(z);
    }
    x0 = x1;
    g0 = g1;
  }
  return out;
}

template <typename Scalar>
std::vector<Vector<Scalar>> scan_zeros_nd(const Potential<Scalar>& V, const Vector<Scalar>& lo,
                                          const Vector<Scalar>& hi, Index n, Scalar zero_tol,
                                          Index& rejected_residual)
{
  const Index d = lo.size();
  Vector<Scalar> h = (hi - lo) / Scalar(n - 1);
  Index total = 1;
  for (Index j = 0; j < d; ++j) total *= n;
  std::vector<Scalar> f(total);
  auto node = [&](Index flat) {
    Vector<Scalar> x(d);
    for (Index j = 0; j < d; ++j) {
      x(j) = lo(j) + Scalar(flat % n) * h(j);
      flat /= n;
    }
    return x;
  };
  for (Index k = 0; k < total; ++k) f[k] = V.gradient(node(k)).squaredNorm();

  std::vector<Vector<Scalar>> out;
  std::vector<Index> idx(d);
  for (Index k = 0; k < total; ++k) {
    Index rem = k;
    for (Index j = 0; j < d; ++j) idx[j] = rem % n, rem /= n;
    // local minimum of ||psi||^2 over the 3^d neighbourhood
    bool is_min = true;
    Index neighbours = 1;
    for (Index j = 0; j < d; ++j) neighbours *= 3;
    for (Index q = 0; q < neighbours && is_min; ++q) {
      Index qq = q, flat = 0, stride = 1;
      bool inside = true;
      for (Index j = 0; j < d; ++j) {
        Index off = qq % 3 - 1;
        qq /= 3;
        Index c = idx[j] + off;
        if (c < 0 || c >= n) inside = false;
        flat += c * stride;
        stride *= n;
      }
      if (inside && flat != k && f[flat] < f[k]) is_min = false;
    }
    if (!is_min) continue;
    // Newton polish, confined to two grid cells around the node
    Vector<Scalar> x0 = node(k), x = x0;
    for (int it = 0; it < 60; ++it) {
      auto der = V.derivatives(x);
      Vector<Scalar> step = der.hessian.fullPivLu().solve(der.gradient);
      if (!step.allFinite()) break;
      Scalar t = 1;
      Scalar base = der.gradient.norm();
      while (t > Scalar(1e-4) && V.gradient(Vector<Scalar>(x - t * step)).norm() > base) t /= 2;
      x -= t * step;
      if (((x - x0).array().abs() > Scalar(2) * h.array()).any()) break;
      if (t * step.norm() <= Scalar(8) * epsilon<Scalar>() * (Scalar(1) + x.norm())) break;
    }
    if (((x - x0).array().abs() > Scalar(2) * h.array()).any()) continue;
    if (((x.array() < lo.array()) || (x.array() > hi.array())).any()) continue;
    if (V.gradient(x).norm() > zero_tol) {
      ++rejected_residual;
      continue;
    }
    bool dup = false;
    for (const auto& z : out)
      if ((z - x).norm() <= Scalar(0.5) * h.minCoeff()) dup = true;
    if (!dup) out.push_back(x);
  }
  return out;
}

} // namespace detail

/// Numerical estimate of (O, R, r, m) for psi = grad V on a search box.
///
/// Zeros come from a grid scan with root polish; degenerate zeros are dropped;
/// r is the largest radius in {1, 3/4, 1/2, 1/4, ...} x (half the smallest
/// zero gap) on which sigma_min(Hessian) stays above `expansion_floor_ratio`
/// of its smallest value at a zero, and m is that sampled minimum. R is half
/// the largest gap (d = 1) or the sampled covering radius (d > 1), times the
/// safety factor. Expansion and covering are then re-checked on fresh samples.
template <typename Scalar>
AubryCertificate<Scalar> estimate_aubry(const Potential<Scalar>& V, const AubryOptions<Scalar>& opts)
{
  using std::abs;
  const Index d = V.dimension();
  if (opts.lower.size() != d || opts.upper.size() != d)
    throw ShapeError("search window dimension mismatch");
  if (((opts.upper - opts.lower).array() <= 0).any()) throw ShapeError("empty search window");

  CertificateProvenance<Scalar> prov;
  prov.method = d == 1 ? "grid-scan+bracketed-newton" : "grid-scan+newton";
  prov.zero_tol = opts.zero_tol;
  prov.degeneracy_ratio = opts.degeneracy_ratio;
  prov.seed = opts.seed;
  prov.safety = opts.safety.value_or(d == 1 ? Scalar(1) : Scalar(1.1));
  prov.expansion_safety = opts.expansion_safety.value_or(d == 1 ? Scalar(1) : Scalar(1.05));
  prov.ball_samples = d == 1 ? opts.ball_samples : std::min<Index>(opts.ball_samples, 512);
  prov.pair_samples = opts.pair_samples;
  prov.covering_samples = opts.covering_samples;

  std::vector<Vector<Scalar>> candidates;
  if (d == 1) {
    prov.grid_points = opts.grid_points;
    for (Scalar z : detail::scan_zeros_1d(V, opts.lower(0), opts.upper(0), opts.grid_points,
                                          opts.zero_tol, prov.rejected_residual))
      candidates.push_back(Vector<Scalar>::Constant(1, z));
  } else {
    prov.grid_points = opts.grid_points_per_axis;
    candidates = detail::scan_zeros_nd(V, opts.lower, opts.upper, opts.grid_points_per_axis,
                                       opts.zero_tol, prov.rejected_residual);
  }
  prov.candidates_found = static_cast<Index>(candidates.size());
  if (candidates.empty()) throw CertificationFailure("no zero of grad V found in the search window");

  std::vector<Scalar> sigma;
  for (const auto& z : candidates) sigma.push_back(detail::potential_sigma_min(V, z));
  const Scalar sigma_top = *std::max_element(sigma.begin(), sigma.end());
  std::vector<Vector<Scalar>> zeros;
  Scalar sigma_low = infinity<Scalar>();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (!(sigma[k] >= opts.degeneracy_ratio * sigma_top) || sigma[k] == 0) {
      ++prov.rejected_degenerate;
      continue;
    }
    zeros.push_back(candidates[k]);
    sigma_low = std::min(sigma_low, sigma[k]);
    prov.max_zero_residual = std::max(prov.max_zero_residual, V.gradient(candidates[k]).norm());
  }
  if (zeros.empty()) throw CertificationFailure("every zero of grad V is degenerate");
  prov.sigma_min_at_zeros = sigma_low;
  prov.sigma_max_at_zeros = sigma_top;

  AubryCertificate<Scalar> cert;
  std::vector<Vector<Scalar>> ball_centers;
  Scalar min_gap = infinity<Scalar>(), max_gap = 0;

  std::optional<Scalar> period;
  if (d == 1 && opts.detect_period) period = V.period();
  if (period && zeros.back()(0) - zeros.front()(0) < *period) period.reset();

  if (d == 1) {
    std::vector<Scalar> z1;
    for (const auto& z : zeros) z1.push_back(z(0));
    if (period) {
      const Scalar T = *period;
      // One fundamental domain, centred on the origin when the scan covers it.
      Scalar start = z1.front();
      if (opts.lower(0) <= -T / 2 && opts.upper(0) >= T / 2) {
        for (Scalar z : z1)
          if (z >= -T / 2) {
            start = z;
            break;
          }
        if (start + T > z1.back() + Scalar(1e-9) * (Scalar(1) + abs(start))) start = z1.front();
      }
      std::vector<Scalar> base;
      for (Scalar z : z1)
        if (z >= start && z < start + T - Scalar(1e-9) * (Scalar(1) + abs(z))) base.push_back(z);
      for (std::size_t k = 0; k < base.size(); ++k) {
        Scalar gap = (k + 1 < base.size() ? base[k + 1] : base.front() + T) - base[k];
        min_gap = std::min(min_gap, gap);
        max_gap = std::max(max_gap, gap);
      }
      cert.anchors = PeriodicAnchorSet<Scalar>::line(base, T);
      for (Scalar z : base) ball_centers.push_back(Vector<Scalar>::Constant(1, z));
      prov.period = T;
    } else {
      if (z1.size() < 2) throw CertificationFailure("search window holds fewer than two usable zeros");
      for (std::size_t k = 0; k + 1 < z1.size(); ++k) {
        min_gap = std::min(min_gap, z1[k + 1] - z1[k]);
        max_gap = std::max(max_gap, z1[k + 1] - z1[k]);
      }
      cert.anchors = std::make_shared<const ListedAnchorSet<Scalar>>(zeros, opts.lower, opts.upper);
      ball_centers = zeros;
    }
    cert.R = Scalar(0.5) * max_gap * prov.safety;
  } else {
    if (zeros.size() < 2) throw CertificationFailure("search window holds fewer than two usable zeros");
    for (std::size_t a = 0; a < zeros.size(); ++a)
      for (std::size_t b = a + 1; b < zeros.size(); ++b) min_gap = std::min(min_gap, (zeros[a] - zeros[b]).norm());
    cert.anchors = std::make_shared<const ListedAnchorSet<Scalar>>(zeros, opts.lower, opts.upper);
    ball_centers = zeros;
    // Sampled covering radius, on the box shrunk by the current estimate.
    std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Scalar Rs = 0;
    for (int pass = 0; pass < 4; ++pass) {
      Vector<Scalar> lo = opts.lower.array() + Rs, hi = opts.upper.array() - Rs;
      if (((hi - lo).array() <= 0).any()) throw CertificationFailure("search window too small to estimate R");
      Scalar next = 0;
      for (Index k = 0; k < std::max<Index>(opts.covering_samples, 2000); ++k) {
        Vector<Scalar> c(d);
        for (Index j = 0; j < d; ++j) c(j) = lo(j) + Scalar(unit(rng)) * (hi(j) - lo(j));
        Scalar best = infinity<Scalar>();
        for (const auto& z : zeros) best = std::min(best, (z - c).norm());
        next = std::max(next, best);
      }
      if (abs(next - Rs) <= Scalar(1e-3) * next) {
        Rs = next;
        break;
      }
      Rs = next;
    }
    cert.R = Rs * prov.safety;
  }

  // Radius r and expansion constant m.
  const Scalar floor = opts.expansion_floor_ratio * sigma_low;
  prov.expansion_floor = floor;
  prov.max_radius = Scalar(0.5) * min_gap;
  std::mt19937_64 ball_rng(opts.seed + 1);
  std::vector<Scalar> fractions{Scalar(1), Scalar(0.75)};
  for (int k = 1; k <= opts.max_halvings; ++k) fractions.push_back(Scalar(1) / Scalar(1 << k));
  bool found = false;
  for (Scalar frac : fractions) {
    Scalar radius = frac * prov.max_radius;
    Scalar low = infinity<Scalar>();
    for (const auto& z : ball_centers) {
      low = std::min(low, detail::ball_sigma_min(V, z, radius, prov.ball_samples, ball_rng));
      if (low < floor) break;
    }
    if (low >= floor) {
      cert.r = radius;
      cert.m = low / prov.expansion_safety;
      prov.radius_fraction = frac;
      found = true;
      break;
    }
  }
  if (!found) throw CertificationFailure("no tested radius keeps sigma_min(Hessian) above the floor");

  cert.zeros = ball_centers;
  cert.provenance = prov;

  cert.provenance.pair_worst_ratio =
      sampled_expansion_ratio(V, cert, ball_centers, opts.pair_samples, opts.seed + 2);
  if (cert.provenance.pair_worst_ratio < Scalar(1))
    throw CertificationFailure("sampled expansion check failed: ||psi(x)-psi(y)|| < m||x-y||");

  Vector<Scalar> clo = opts.lower.array() + cert.R, chi = opts.upper.array() - cert.R;
  if (d == 1 && !period) {
    clo(0) = std::max(clo(0), zeros.front()(0));
    chi(0) = std::min(chi(0), zeros.back()(0));
  }
  if (((chi - clo).array() > 0).all()) {
    cert.provenance.covering_worst =
        sampled_covering_ratio(cert, clo, chi, opts.covering_samples, opts.seed + 3);
    if (cert.provenance.covering_worst > Scalar(1) + Scalar(1e-12))
      throw CertificationFailure("sampled covering check failed: an R-ball misses O");
  }
  return cert;
}

/// phi_z(target): the point y in the closed r-ball around z with psi(y) = target.
template <typename Scalar>
Vector<Scalar> local_inverse(const Potential<Scalar>& V, const std::type_identity_t<Vector<Scalar>>& z,
                             const std::type_identity_t<Vector<Scalar>>& target, const AubryCertificate<Scalar>& cert,
                             std::type_identity_t<Scalar> tol, int max_iter = 200)
{
  using std::abs;
  if (z.size() != V.dimension() || target.size() != V.dimension())
    throw ShapeError("local inverse dimension mismatch");
  const Scalar limit = cert.target_radius();
  if (target.norm() > limit * (Scalar(1) + Scalar(1e-12)))
    throw DomainError("target lies outside the ball of radius r*m");
  if (target.norm() == 0 && V.gradient(z).norm() == 0) return z;

  if (z.size() == 1) {
    auto g = [&](Scalar y) { return V.derivative(y) - target(0); };
    auto dg = [&](Scalar y) { return V.second_derivative(y); };
    Scalar a = z(0) - cert.r, b = z(0) + cert.r;
    if (g(a) != 0 && g(b) != 0 && (g(a) < 0) == (g(b) < 0)) {
      // Rounding at |target| = r m can leave both ends on one side; accept the closer end.
      Scalar end = abs(g(a)) < abs(g(b)) ? a : b;
      if (abs(g(end)) <= tol) return Vector<Scalar>::Constant(1, end);
      throw NumericalError("psi - target has no sign change on the r-ball; certificate is inconsistent");
    }
    bool ok = false;
    Scalar y = detail::bracketed_newton(g, dg, a, b, z(0), max_iter, tol, ok);
    if (!ok) throw NumericalError("local inverse did not converge");
    return Vector<Scalar>::Constant(1, y);
  }

  Vector<Scalar> y = z;
  Vector<Scalar> res = V.gradient(y) - target;
  for (int it = 0; it < max_iter; ++it) {
    Matrix<Scalar> H = V.hessian(y);
    Vector<Scalar> step = H.fullPivLu().solve(res);
    if (!step.allFinite()) throw NumericalError("singular Hessian inside the r-ball");
    Scalar t = 1;
    Vector<Scalar> next, next_res;
    while (true) {
      next = y - t * step;
      Scalar off = (next - z).norm();
      if (off > cert.r) next = z + (cert.r / off) * (next - z);
      next_res = V.gradient(next) - target;
      if (next_res.norm() < res.norm() || t < Scalar(1e-6)) break;
      t /= 2;
    }
    Scalar moved = (next - y).norm();
    y = next;
    bool settled = moved <= Scalar(8) * epsilon<Scalar>() * (Scalar(1) + y.norm());
    bool stalled = next_res.norm() >= res.norm();
    res = next_res;
    if (res.norm() <= tol && (settled || stalled)) return y;
  }
  if (res.norm() <= tol) return y;
  throw NumericalError("local inverse did not converge");
}

} // namespace fkai
