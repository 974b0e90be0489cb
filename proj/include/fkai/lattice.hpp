#pragma once

#include <memory>
#include <optional>
#include <string>
#include <type_traits>

#include "fkai/anchors.hpp"
#include "fkai/errors.hpp"
#include "fkai/types.hpp"

namespace fkai {

/// Sites {-N, ..., N} carrying values in R^d.
struct Window
{
  Index half_width = 1;
  Index dimension = 1;

  Window() = default;
  Window(Index n, Index d) : half_width(n), dimension(d)
  {
    if (n < 1) throw ShapeError("window half-width must be >= 1");
    if (d < 1) throw ShapeError("dimension must be >= 1");
  }

  Index size() const noexcept { return 2 * half_width + 1; }
  Site first() const noexcept { return -static_cast<Site>(half_width); }
  Site last() const noexcept { return static_cast<Site>(half_width); }
  bool contains(Site i) const noexcept { return i >= first() && i <= last(); }
  Index column(Site i) const noexcept { return static_cast<Index>(i + half_width); }

  friend bool operator==(const Window&, const Window&) = default;
};

/// The homomorphism i -> i * rho.
template <typename Scalar>
struct RotationVector
{
  Vector<Scalar> rho;

  RotationVector() = default;
  explicit RotationVector(Vector<Scalar> r) : rho(std::move(r)) {}
  static RotationVector scalar(Scalar r) { return RotationVector(Vector<Scalar>::Constant(1, r)); }

  Index dimension() const noexcept { return rho.size(); }
  Vector<Scalar> operator()(Site i) const { return Scalar(i) * rho; }
};

enum class TailKind { anchor, homomorphism };

inline const char* to_string(TailKind k)
{
  return k == TailKind::anchor ? "anchor-extension" : "homomorphism-extension";
}

/// Values outside the window. The base sequence is either the line
/// offset + i*rho or its site-wise nearest anchors; shift/translate compose
/// into `site_shift` and `value_shift`.
template <typename Scalar>
struct TailRule
{
  TailKind kind = TailKind::homomorphism;
  Vector<Scalar> rho;
  Vector<Scalar> offset;
  std::shared_ptr<const AnchorSet<Scalar>> anchors;
  Scalar covering_radius = Scalar(0);
  Site site_shift = 0;
  Vector<Scalar> value_shift;

  static TailRule homomorphism(Vector<Scalar> r, Vector<Scalar> off = {})
  {
    TailRule t;
    t.kind = TailKind::homomorphism;
    if (off.size() == 0) off = Vector<Scalar>::Zero(r.size());
    t.value_shift = Vector<Scalar>::Zero(r.size());
    t.rho = std::move(r);
    t.offset = std::move(off);
    return t;
  }

  static TailRule anchor(Vector<Scalar> r, std::shared_ptr<const AnchorSet<Scalar>> set, Scalar R,
                         Vector<Scalar> off = {})
  {
    TailRule t = homomorphism(std::move(r), std::move(off));
    t.kind = TailKind::anchor;
    t.anchors = std::move(set);
    t.covering_radius = R;
    return t;
  }

  Vector<Scalar> base(Site i) const
  {
    Vector<Scalar> line = offset + Scalar(i) * rho;
    if (kind == TailKind::homomorphism) return line;
    return nearest_point(*anchors, line, covering_radius);
  }

  Vector<Scalar> value(Site i) const { return base(i + site_shift) + value_shift; }
};

/// u : Z -> R^d, stored on a finite window and extended by a tail rule.
template <typename Scalar>
class Configuration
{
public:
  Configuration() = default;

  Configuration(Window w, Matrix<Scalar> values, TailRule<Scalar> tail)
    : window_(w), values_(std::move(values)), tail_(std::move(tail))
  {
    if (values_.rows() != w.dimension || values_.cols() != w.size())
      throw ShapeError("values must be d x (2N+1)");
    if (tail_.rho.size() != w.dimension) throw ShapeError("tail rule dimension mismatch");
    if (!values_.allFinite()) throw ShapeError("configuration values must be finite");
  }

  /// u_i = rho(i) on the window, extended the same way.
  static Configuration homomorphism(Window w, const RotationVector<Scalar>& rho)
  {
    auto tail = TailRule<Scalar>::homomorphism(rho.rho);
    return from_tail(w, std::move(tail));
  }

  /// Window values copied from the tail rule itself.
  static Configuration from_tail(Window w, TailRule<Scalar> tail)
  {
    Matrix<Scalar> v(w.dimension, w.size());
    for (Site i = w.first(); i <= w.last(); ++i) v.col(w.column(i)) = tail.value(i);
    return Configuration(w, std::move(v), std::move(tail));
  }

  const Window& window() const noexcept { return window_; }
  Index dimension() const noexcept { return window_.dimension; }
  const Matrix<Scalar>& values() const noexcept { return values_; }
  const TailRule<Scalar>& tail() const noexcept { return tail_; }

  /// u_i for any site; the tail rule supplies sites outside the window.
  Vector<Scalar> at(Site i) const
  {
    if (window_.contains(i)) return values_.col(window_.column(i));
    return tail_.value(i);
  }

  auto col(Site i) const { return values_.col(window_.column(i)); }

  /// Same window and tail, new window values.
  Configuration with_values(Matrix<Scalar> v) const { return Configuration(window_, std::move(v), tail_); }

private:
  Window window_;
  Matrix<Scalar> values_;
  TailRule<Scalar> tail_;
};

namespace detail {

template <typename Scalar>
void require_same_shape(const Configuration<Scalar>& u, const Configuration<Scalar>& v)
{
  if (!(u.window() == v.window())) throw ShapeError("configurations live on different windows");
}

// Sites probed beyond the window when two tail rules cannot be compared in closed form.
inline Site tail_probe_length(const Window& w) { return std::max<Site>(64, 2 * w.half_width); }

template <typename Scalar>
Scalar tail_distance(const TailRule<Scalar>& a, const TailRule<Scalar>& b, const Window& w)
{
  if (a.rho != b.rho) return infinity<Scalar>();
  if (a.kind == TailKind::homomorphism && b.kind == TailKind::homomorphism) {
    Vector<Scalar> diff = Scalar(a.site_shift - b.site_shift) * a.rho + (a.offset - b.offset) +
                          (a.value_shift - b.value_shift);
    return diff.norm();
  }
  if (a.kind == b.kind && a.anchors == b.anchors && a.offset == b.offset &&
      a.site_shift == b.site_shift)
    return (a.value_shift - b.value_shift).norm();
  Scalar sup = 0;
  const Site probe = tail_probe_length(w);
  for (Site k = 1; k <= probe; ++k) {
    for (Site i : {w.last() + k, w.first() - k}) sup = std::max(sup, (a.value(i) - b.value(i)).norm());
  }
  return sup;
}

} // namespace detail

/// Extended sup-metric d(u, v) = sup_i ||u_i - v_i||; may be +infinity.
template <typename Scalar>
Scalar ext_distance(const Configuration<Scalar>& u, const Configuration<Scalar>& v)
{
  detail::require_same_shape(u, v);
  Scalar window_sup = (u.values() - v.values()).colwise().norm().maxCoeff();
  return std::max(window_sup, detail::tail_distance(u.tail(), v.tail(), u.window()));
}

/// Sup over window sites only; the quantity iterations and residual checks use.
template <typename Scalar>
Scalar window_distance(const Configuration<Scalar>& u, const Configuration<Scalar>& v)
{
  detail::require_same_shape(u, v);
  return (u.values() - v.values()).colwise().norm().maxCoeff();
}

/// sup over window sites of ||u_i - rho(i)||.
template <typename Scalar>
Scalar distance_to_line(const Configuration<Scalar>& u, const RotationVector<Scalar>& rho,
                        const Vector<Scalar>& offset = {})
{
  if (rho.dimension() != u.dimension()) throw ShapeError("rotation vector dimension mismatch");
  Scalar sup = 0;
  for (Site i = u.window().first(); i <= u.window().last(); ++i) {
    Vector<Scalar> line = rho(i);
    if (offset.size() != 0) line += offset;
    sup = std::max(sup, (u.col(i) - line).norm());
  }
  return sup;
}

/// S^k(u)_i = u_{i+k}.
template <typename Scalar>
Configuration<Scalar> shift(const Configuration<Scalar>& u, Site k)
{
  const Window& w = u.window();
  if (k > static_cast<Site>(w.half_width) || -k > static_cast<Site>(w.half_width))
    throw RangeError("shift exceeds window half-width");
  Matrix<Scalar> v(w.dimension, w.size());
  for (Site i = w.first(); i <= w.last(); ++i) v.col(w.column(i)) = u.at(i + k);
  TailRule<Scalar> tail = u.tail();
  tail.site_shift += k;
  return Configuration<Scalar>(w, std::move(v), std::move(tail));
}

/// T^c(u)_i = u_i + c.
template <typename Scalar>
Configuration<Scalar> translate(const Configuration<Scalar>& u, const std::type_identity_t<Vector<Scalar>>& c)
{
  if (c.size() != u.dimension()) throw ShapeError("translation dimension mismatch");
  Matrix<Scalar> v = u.values().colwise() + c;
  TailRule<Scalar> tail = u.tail();
  tail.value_shift += c;
  return Configuration<Scalar>(u.window(), std::move(v), std::move(tail));
}

/// Two-endpoint estimate (u_N - u_{-N}) / (2N).
template <typename Scalar>
Vector<Scalar> rotation_vector_estimate(const Configuration<Scalar>& u)
{
  const Window& w = u.window();
  return (u.col(w.last()) - u.col(w.first())) / Scalar(2 * w.half_width);
}

/// Least-squares slope of u_i against i over the window.
template <typename Scalar>
Vector<Scalar> rotation_vector_lsq(const Configuration<Scalar>& u)
{
  const Window& w = u.window();
  Vector<Scalar> num = Vector<Scalar>::Zero(u.dimension());
  Scalar den = 0;
  Vector<Scalar> mean = u.values().rowwise().mean();
  for (Site i = w.first(); i <= w.last(); ++i) {
    num += Scalar(i) * (u.col(i) - mean);
    den += Scalar(i) * Scalar(i);
  }
  return num / den;
}

/// a_i = argmin_{z in O} ||z - (offset + rho(i))||, ties to the lexicographically smallest z.
template <typename Scalar>
Vector<Scalar> nearest_anchor(const RotationVector<Scalar>& rho, Site i, const AnchorSet<Scalar>& O,
                              Scalar R, const Vector<Scalar>& offset = {})
{
  if (rho.dimension() != O.dimension()) throw ShapeError("rotation vector dimension mismatch");
  Vector<Scalar> x = rho(i);
  if (offset.size() != 0) x += offset;
  return nearest_point(O, x, R);
}

/// The anchor configuration a(rho) on a window, with anchor-extension tails.
template <typename Scalar>
Configuration<Scalar> anchor_configuration(const Window& w, const RotationVector<Scalar>& rho,
                                           std::type_identity_t<std::shared_ptr<const AnchorSet<Scalar>>> O, std::type_identity_t<Scalar> R,
                                           Vector<Scalar> offset = {})
{
  if (rho.dimension() != w.dimension) throw ShapeError("rotation vector dimension mismatch");
  auto tail = TailRule<Scalar>::anchor(rho.rho, std::move(O), R, std::move(offset));
  return Configuration<Scalar>::from_tail(w, std::move(tail));
}

} // namespace fkai
