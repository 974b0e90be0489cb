#pragma once

#include <map>
#include <random>
#include <vector>

#include "fkai/errors.hpp"
#include "fkai/lattice.hpp"
#include "fkai/types.hpp"

namespace fkai {

enum class CouplingKind { quadratic, quadratic_sqrt };

inline const char* to_string(CouplingKind k)
{
  return k == CouplingKind::quadratic ? "quadratic" : "quadratic-sqrt";
}

/// Nearest-neighbour generating function I : R^d -> R.
///
///   quadratic:      I(w) = k/2 |w|^2
///   quadratic_sqrt: I(w) = k/2 |w|^2 + c (sqrt(1 + |w|^2) - 1)
///
/// Both are uniformly convex with k <= sigma(Hessian) <= k + c.
template <typename Scalar>
struct Coupling
{
  CouplingKind kind = CouplingKind::quadratic;
  Scalar stiffness = Scalar(1);
  Scalar perturbation = Scalar(0);

  static Coupling quadratic(Scalar k = 1) { return {CouplingKind::quadratic, k, Scalar(0)}; }
  static Coupling quadratic_sqrt(Scalar k, Scalar c) { return {CouplingKind::quadratic_sqrt, k, c}; }

  Scalar value(const Vector<Scalar>& w) const
  {
    using std::sqrt;
    Scalar v = Scalar(0.5) * stiffness * w.squaredNorm();
    if (kind == CouplingKind::quadratic_sqrt) v += perturbation * (sqrt(Scalar(1) + w.squaredNorm()) - Scalar(1));
    return v;
  }

  Vector<Scalar> gradient(const Vector<Scalar>& w) const
  {
    using std::sqrt;
    Scalar g = stiffness;
    if (kind == CouplingKind::quadratic_sqrt) g += perturbation / sqrt(Scalar(1) + w.squaredNorm());
    return g * w;
  }

  Matrix<Scalar> hessian(const Vector<Scalar>& w) const
  {
    using std::sqrt;
    const Index d = w.size();
    Matrix<Scalar> h = stiffness * Matrix<Scalar>::Identity(d, d);
    if (kind == CouplingKind::quadratic_sqrt) {
      Scalar s = Scalar(1) + w.squaredNorm();
      Scalar root = sqrt(s);
      h += (perturbation / root) * Matrix<Scalar>::Identity(d, d) -
           (perturbation / (root * s)) * w * w.transpose();
    }
    return h;
  }

  /// epsilon: global lower bound of sigma_min(Hessian).
  Scalar convexity_lower() const { return stiffness; }
  /// E: global upper bound of sigma_max(Hessian).
  Scalar convexity_upper() const { return stiffness + (kind == CouplingKind::quadratic_sqrt ? perturbation : Scalar(0)); }
  bool constant_hessian() const { return kind == CouplingKind::quadratic || perturbation == 0; }

  /// Solves grad I(w) = g. Closed form when quadratic, Newton on the radial
  /// equation otherwise (grad I(w) is parallel to w for both kinds).
  Vector<Scalar> inverse_gradient(const Vector<Scalar>& g, Scalar tol = Scalar(0)) const
  {
    using std::abs;
    using std::sqrt;
    if (!(stiffness > 0)) throw ConvexityError("coupling is not uniformly convex");
    if (constant_hessian()) return g / stiffness;
    // |grad I(w)| = t (k + c / sqrt(1 + t^2)) with t = |w|, strictly increasing in t.
    const Scalar target = g.norm();
    if (target == 0) return Vector<Scalar>::Zero(g.size());
    auto f = [&](Scalar t) { return t * (stiffness + perturbation / sqrt(Scalar(1) + t * t)) - target; };
    auto df = [&](Scalar t) {
      Scalar s = Scalar(1) + t * t;
      return stiffness + perturbation / (s * sqrt(s));
    };
    Scalar lo = target / convexity_upper(), hi = target / stiffness;
    Scalar t = Scalar(0.5) * (lo + hi);
    const Scalar stop = tol > 0 ? tol : Scalar(4) * epsilon<Scalar>() * (Scalar(1) + target);
    for (int it = 0; it < 200; ++it) {
      Scalar ft = f(t);
      if (ft > 0) hi = t; else lo = t;
      Scalar next = t - ft / df(t);
      if (!(next > lo && next < hi)) next = Scalar(0.5) * (lo + hi);
      Scalar moved = abs(next - t);
      t = next;
      if (moved <= Scalar(4) * epsilon<Scalar>() * (Scalar(1) + t) && abs(f(t)) <= stop) return (t / target) * g;
      if (hi - lo <= Scalar(2) * epsilon<Scalar>() * (Scalar(1) + t)) return (t / target) * g;
    }
    if (abs(f(t)) <= stop * Scalar(16)) return (t / target) * g;
    throw ConvexityError("inverse of grad I did not converge");
  }
};

enum class InteractionKind { generating_nn, long_range_polynomial };

inline const char* to_string(InteractionKind k)
{
  return k == InteractionKind::generating_nn ? "generating-nn" : "long-range-polynomial";
}

/// Invariant interaction operator Delta.
///
///   generating-nn:          Delta(u)_i = grad I(u_i - u_{i+1}) - grad I(u_{i-1} - u_i)
///   long-range-polynomial:  Delta(u)_i = sum_{0<|k|<=K} c_k (u_i - u_{i+k})^p   (componentwise power)
///
/// Long-range weights are either explicit or geometric c_k = scale * ratio^|k| cut at K.
template <typename Scalar>
class Interaction
{
public:
  static Interaction generating_nn(Coupling<Scalar> coupling)
  {
    Interaction d;
    d.kind_ = InteractionKind::generating_nn;
    d.coupling_ = coupling;
    return d;
  }

  static Interaction long_range(std::map<int, Scalar> weights, int power = 3)
  {
    if (power < 1) throw ShapeError("interaction power must be >= 1");
    Interaction d;
    d.kind_ = InteractionKind::long_range_polynomial;
    weights.erase(0);
    d.weights_ = std::move(weights);
    d.power_ = power;
    for (const auto& [k, c] : d.weights_) d.cutoff_ = std::max(d.cutoff_, std::abs(k));
    return d;
  }

  static Interaction long_range_geometric(Scalar ratio = Scalar(0.5), int cutoff = 32, int power = 3,
                                          Scalar scale = Scalar(1))
  {
    using std::pow;
    if (!(ratio > 0 && ratio < 1)) throw ShapeError("geometric kernel ratio must lie in (0, 1)");
    if (cutoff < 1) throw ShapeError("kernel cutoff must be >= 1");
    std::map<int, Scalar> w;
    for (int k = 1; k <= cutoff; ++k) w[k] = w[-k] = scale * pow(ratio, Scalar(k));
    Interaction d = long_range(std::move(w), power);
    d.geometric_ = true;
    d.ratio_ = ratio;
    d.scale_ = scale;
    d.cutoff_ = cutoff;
    return d;
  }

  InteractionKind kind() const noexcept { return kind_; }
  const Coupling<Scalar>& coupling() const noexcept { return coupling_; }
  const std::map<int, Scalar>& weights() const noexcept { return weights_; }
  int power() const noexcept { return power_; }
  int cutoff() const noexcept { return cutoff_; }
  bool geometric() const noexcept { return geometric_; }
  Scalar ratio() const noexcept { return ratio_; }
  Scalar scale() const noexcept { return scale_; }

  /// Largest |k| with u_{i+k} entering Delta(u)_i.
  int reach() const noexcept { return kind_ == InteractionKind::generating_nn ? 1 : cutoff_; }

  /// Kernel weight c_k, including the analytic continuation beyond the cutoff.
  Scalar kernel_weight(int k) const
  {
    using std::pow;
    if (k == 0) return geometric_ ? scale_ : Scalar(0);
    if (geometric_) return scale_ * pow(ratio_, Scalar(std::abs(k)));
    auto it = weights_.find(k);
    return it == weights_.end() ? Scalar(0) : it->second;
  }

private:
  InteractionKind kind_ = InteractionKind::generating_nn;
  Coupling<Scalar> coupling_;
  std::map<int, Scalar> weights_;
  int power_ = 3;
  int cutoff_ = 0;
  bool geometric_ = false;
  Scalar ratio_ = Scalar(0);
  Scalar scale_ = Scalar(1);
};

namespace detail {

template <typename Scalar>
Vector<Scalar> componentwise_power(const Vector<Scalar>& w, int p)
{
  Vector<Scalar> out = w;
  for (int k = 1; k < p; ++k) out = out.cwiseProduct(w);
  return out;
}

} // namespace detail

/// Delta(u)_i for one site; sites within reach() outside the window come from the tail rule.
template <typename Scalar>
Vector<Scalar> apply_delta(const Interaction<Scalar>& delta, const Configuration<Scalar>& u, Site i)
{
  const Vector<Scalar> ui = u.at(i);
  if (delta.kind() == InteractionKind::generating_nn) {
    const auto& I = delta.coupling();
    return I.gradient(ui - u.at(i + 1)) - I.gradient(u.at(i - 1) - ui);
  }
  Vector<Scalar> out = Vector<Scalar>::Zero(ui.size());
  for (const auto& [k, c] : delta.weights())
    out += c * detail::componentwise_power<Scalar>(ui - u.at(i + k), delta.power());
  return out;
}

/// Delta(u) on every window site, as a d x (2N+1) matrix.
template <typename Scalar>
Matrix<Scalar> apply_delta(const Interaction<Scalar>& delta, const Configuration<Scalar>& u)
{
  const Window& w = u.window();
  Matrix<Scalar> out(w.dimension, w.size());
  for (Site i = w.first(); i <= w.last(); ++i) out.col(w.column(i)) = apply_delta(delta, u, i);
  return out;
}

/// Delta|_Hom(rho) = Delta(rho)_0 in closed form.
template <typename Scalar>
Vector<Scalar> delta_hom(const Interaction<Scalar>& delta, const RotationVector<Scalar>& rho)
{
  Vector<Scalar> out = Vector<Scalar>::Zero(rho.dimension());
  if (delta.kind() == InteractionKind::generating_nn) return out;
  for (const auto& [k, c] : delta.weights())
    out += c * detail::componentwise_power<Scalar>(Vector<Scalar>(-Scalar(k) * rho.rho), delta.power());
  return out;
}

struct LipschitzOptions
{
  /// Grid points in the ball for the sampled sup of sigma_max(Hessian).
  Index samples = 10000;
  double safety = 1.05;
};

/// Lipschitz constant K(rho, R) of Delta on {u : d(u, rho) <= R}.
///
/// generating-nn: 4 sup_{|x| <= |rho| + 2R} sigma_max(Hessian I(x)); exact for a
/// constant Hessian, otherwise a sampled sup times safety, capped at the global bound E.
/// long-range: sum_{k in Z} |c_k| 2p (|k||rho| + 2R)^{p-1}, the k = 0 term included,
/// with the part beyond the cutoff summed analytically for geometric kernels.
template <typename Scalar>
Scalar lipschitz_bound(const Interaction<Scalar>& delta, const RotationVector<Scalar>& rho, Scalar R,
                       const LipschitzOptions& opts = {})
{
  using std::abs;
  using std::pow;
  if (!(R > 0)) throw ShapeError("Lipschitz radius must be positive");
  const Scalar rn = rho.rho.norm();
  if (delta.kind() == InteractionKind::generating_nn) {
    const auto& I = delta.coupling();
    if (I.constant_hessian()) return Scalar(4) * abs(I.stiffness);
    const Scalar ball = rn + Scalar(2) * R;
    const Index d = rho.dimension();
    Scalar sup = 0;
    std::mt19937_64 rng(0xC0FFEE);
    for (Index k = 0; k < opts.samples; ++k) {
      Vector<Scalar> x = Vector<Scalar>::Zero(d);
      if (d == 1) {
        x(0) = -ball + Scalar(2) * ball * Scalar(k) / Scalar(std::max<Index>(opts.samples - 1, 1));
      } else if (k > 0) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index j = 0; j < d; ++j) x(j) = Scalar(normal(rng));
        x *= ball * Scalar(pow(unit(rng), 1.0 / double(d))) / x.norm();
      }
      sup = std::max(sup, sigma_max(I.hessian(x)));
    }
    return Scalar(4) * std::min(Scalar(opts.safety) * sup, I.convexity_upper());
  }
  const int p = delta.power();
  auto term = [&](int k) {
    return abs(delta.kernel_weight(k)) * Scalar(2 * p) * pow(Scalar(std::abs(k)) * rn + Scalar(2) * R, Scalar(p - 1));
  };
  Scalar sum = term(0);
  for (int k = 1; k <= delta.cutoff(); ++k) sum += term(k) + term(-k);
  if (delta.geometric()) {
    // Terms decay geometrically once k exceeds the polynomial turning point.
    for (int k = delta.cutoff() + 1; k < delta.cutoff() + 100000; ++k) {
      Scalar t = term(k) + term(-k);
      sum += t;
      if (t <= epsilon<Scalar>() * sum * Scalar(1e-2) && (rn == 0 || Scalar(k) * rn > Scalar(p) * R)) break;
      if (t == 0) break;
    }
  }
  return sum;
}

/// For a geometric kernel: the part of the K-series beyond the cutoff
/// (how much the truncated operator under-reports K).
template <typename Scalar>
Scalar lipschitz_tail(const Interaction<Scalar>& delta, const RotationVector<Scalar>& rho, Scalar R)
{
  if (delta.kind() != InteractionKind::long_range_polynomial || !delta.geometric()) return Scalar(0);
  Interaction<Scalar> truncated = Interaction<Scalar>::long_range(delta.weights(), delta.power());
  Scalar k0 = Scalar(2 * delta.power()) * delta.kernel_weight(0) *
              std::pow(Scalar(2) * R, Scalar(delta.power() - 1));
  return lipschitz_bound(delta, rho, R) - (lipschitz_bound(truncated, rho, R) + k0);
}

/// Bound on ||sum_{|k| > K} c_k (u_i - u_{i+k})^p|| for d(u, rho) <= R: the
/// amount by which the stored (cut-off) operator differs from the full series.
template <typename Scalar>
Scalar delta_truncation_tail(const Interaction<Scalar>& delta, const RotationVector<Scalar>& rho, Scalar R)
{
  using std::pow;
  if (delta.kind() != InteractionKind::long_range_polynomial || !delta.geometric()) return Scalar(0);
  const Scalar rn = rho.rho.norm();
  Scalar sum = 0;
  for (int k = delta.cutoff() + 1; k < delta.cutoff() + 100000; ++k) {
    Scalar t = Scalar(2) * delta.kernel_weight(k) * pow(Scalar(k) * rn + Scalar(2) * R, Scalar(delta.power()));
    sum += t;
    if (t <= epsilon<Scalar>() * sum * Scalar(1e-2) &&
        (rn == 0 || Scalar(k) * rn > Scalar(delta.power()) * R))
      break;
    if (t == 0) break;
  }
  return sum;
}

} // namespace fkai
