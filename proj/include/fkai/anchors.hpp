#pragma once

#include <type_traits>
#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "fkai/errors.hpp"
#include "fkai/types.hpp"

namespace fkai {

/// Enumerates points of a certified zero set O near a query point.
template <typename Scalar>
class AnchorSet
{
public:
  virtual ~AnchorSet() = default;

  virtual Index dimension() const = 0;

  /// All points z of O with ||z - center|| <= radius.
  virtual std::vector<Vector<Scalar>> points_within(const Vector<Scalar>& center,
                                                    Scalar radius) const = 0;
};

/// O = base + lattice, the anchor set of a periodic potential.
template <typename Scalar>
class PeriodicAnchorSet final : public AnchorSet<Scalar>
{
public:
  /// `basis` holds one lattice vector per column.
  PeriodicAnchorSet(std::vector<Vector<Scalar>> base, Matrix<Scalar> basis)
    : base_(std::move(base)), basis_(std::move(basis))
  {
    if (base_.empty()) throw ShapeError("periodic anchor set needs at least one base point");
    if (basis_.rows() != basis_.cols() || basis_.rows() != base_.front().size())
      throw ShapeError("lattice basis must be d x d");
    for (const auto& b : base_)
      if (b.size() != basis_.rows()) throw ShapeError("base point dimension mismatch");
    inverse_ = basis_.inverse();
  }

  /// One-dimensional convenience: zeros modulo `period`.
  static std::shared_ptr<const PeriodicAnchorSet> line(std::vector<Scalar> zeros, Scalar period)
  {
    std::vector<Vector<Scalar>> base;
    for (Scalar z : zeros) base.push_back(Vector<Scalar>::Constant(1, z));
    return std::make_shared<const PeriodicAnchorSet>(std::move(base),
                                                     Matrix<Scalar>::Constant(1, 1, period));
  }

  Index dimension() const override { return basis_.rows(); }
  const std::vector<Vector<Scalar>>& base() const { return base_; }
  const Matrix<Scalar>& basis() const { return basis_; }

  std::vector<Vector<Scalar>> points_within(const Vector<Scalar>& center,
                                            Scalar radius) const override
  {
    using std::ceil;
    using std::floor;
    const Index d = dimension();
    std::vector<Vector<Scalar>> out;
    for (const auto& b : base_) {
      // Coefficient box: n_j ranges over (B^-1 (x - b))_j for x in the ball.
      Vector<Scalar> c = inverse_ * (center - b);
      std::vector<long long> lo(d), hi(d), n(d);
      for (Index j = 0; j < d; ++j) {
        Scalar spread = radius * inverse_.row(j).norm();
        lo[j] = static_cast<long long>(floor(c(j) - spread));
        hi[j] = static_cast<long long>(ceil(c(j) + spread));
        n[j] = lo[j];
      }
      while (true) {
        Vector<Scalar> p = b;
        for (Index j = 0; j < d; ++j) p += Scalar(n[j]) * basis_.col(j);
        if ((p - center).norm() <= radius) out.push_back(p);
        Index j = 0;
        for (; j < d; ++j) {
          if (++n[j] <= hi[j]) break;
          n[j] = lo[j];
        }
        if (j == d) break;
      }
    }
    return out;
  }

private:
  std::vector<Vector<Scalar>> base_;
  Matrix<Scalar> basis_;
  Matrix<Scalar> inverse_;
};

/// Finite list of zeros, valid only inside the box it was certified on.
template <typename Scalar>
class ListedAnchorSet final : public AnchorSet<Scalar>
{
public:
  ListedAnchorSet(std::vector<Vector<Scalar>> points, Vector<Scalar> lower, Vector<Scalar> upper)
    : points_(std::move(points)), lower_(std::move(lower)), upper_(std::move(upper))
  {
    if (lower_.size() != upper_.size()) throw ShapeError("box bounds differ in dimension");
    for (const auto& p : points_)
      if (p.size() != lower_.size()) throw ShapeError("anchor point dimension mismatch");
  }

  Index dimension() const override { return lower_.size(); }
  const std::vector<Vector<Scalar>>& points() const { return points_; }
  const Vector<Scalar>& lower() const { return lower_; }
  const Vector<Scalar>& upper() const { return upper_; }

  std::vector<Vector<Scalar>> points_within(const Vector<Scalar>& center,
                                            Scalar radius) const override
  {
    const Scalar slack = Scalar(1e-12) * (Scalar(1) + radius + center.cwiseAbs().maxCoeff());
    if (((center.array() - radius) < lower_.array() - slack).any() ||
        ((center.array() + radius) > upper_.array() + slack).any())
      throw CertificateError("query ball leaves the certified search window");
    std::vector<Vector<Scalar>> out;
    for (const auto& p : points_)
      if ((p - center).norm() <= radius) out.push_back(p);
    return out;
  }

private:
  std::vector<Vector<Scalar>> points_;
  Vector<Scalar> lower_;
  Vector<Scalar> upper_;
};

/// Lexicographic order on vectors, used to break argmin ties.
template <typename Scalar>
bool lexicographic_less(const Vector<Scalar>& a, const Vector<Scalar>& b)
{
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

/// argmin over O of ||z - x|| restricted to the closed R-ball around x.
template <typename Scalar>
Vector<Scalar> nearest_point(const AnchorSet<Scalar>& anchors, const std::type_identity_t<Vector<Scalar>>& x, std::type_identity_t<Scalar> R)
{
  if (x.size() != anchors.dimension()) throw ShapeError("query point dimension mismatch");
  auto candidates = anchors.points_within(x, R);
  if (candidates.empty())
    throw CertificateError("no anchor within covering radius R of the query point");
  const Scalar tie = Scalar(64) * epsilon<Scalar>() * (Scalar(1) + x.norm());
  const Vector<Scalar>* best = &candidates.front();
  Scalar best_distance = (*best - x).norm();
  for (const auto& z : candidates) {
    Scalar dist = (z - x).norm();
    if (dist < best_distance - tie ||
        (dist <= best_distance + tie && lexicographic_less(z, *best))) {
      best = &z;
      best_distance = std::min(dist, best_distance);
    }
  }
  return *best;
}

} // namespace fkai
