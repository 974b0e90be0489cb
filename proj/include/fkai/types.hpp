#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>

namespace fkai {

using Index = Eigen::Index;
/// Lattice site on Z.
using Site = std::int64_t;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
constexpr Scalar infinity() noexcept
{
  return std::numeric_limits<Scalar>::infinity();
}

template <typename Scalar>
constexpr Scalar epsilon() noexcept
{
  return std::numeric_limits<Scalar>::epsilon();
}

template <typename Scalar>
Scalar pi()
{
  using std::acos;
  return acos(Scalar(-1));
}

/// Singular values of a square matrix, ascending order not guaranteed.
template <typename Derived>
auto singular_values(const Eigen::MatrixBase<Derived>& m)
{
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> a = m;
  if (a.rows() == 1) {
    Vector<Scalar> s(1);
    using std::abs;
    s(0) = abs(a(0, 0));
    return s;
  }
  Eigen::JacobiSVD<Matrix<Scalar>> svd(a);
  return Vector<Scalar>(svd.singularValues());
}

template <typename Derived>
typename Derived::Scalar sigma_min(const Eigen::MatrixBase<Derived>& m)
{
  return singular_values(m).minCoeff();
}

template <typename Derived>
typename Derived::Scalar sigma_max(const Eigen::MatrixBase<Derived>& m)
{
  return singular_values(m).maxCoeff();
}

} // namespace fkai
