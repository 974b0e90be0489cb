#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fkai/types.hpp"

namespace fkai {

/// Root of every error thrown by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Mismatched windows or dimensions.
class ShapeError : public Error
{
public:
  using Error::Error;
};

/// Site or horizon outside what a configuration can resolve.
class RangeError : public Error
{
public:
  using Error::Error;
};

/// A certificate's claims do not hold where they were relied on.
class CertificateError : public Error
{
public:
  using Error::Error;
};

/// Estimation could not produce a certificate.
class CertificationFailure : public Error
{
public:
  using Error::Error;
};

/// A local-inverse target fell outside the ball of radius r*m.
class DomainError : public Error
{
public:
  DomainError(const std::string& what, Site site = 0, bool has_site = false)
    : Error(what), site_(site), has_site_(has_site)
  {
  }

  Site site() const noexcept { return site_; }
  bool has_site() const noexcept { return has_site_; }

private:
  Site site_;
  bool has_site_;
};

/// An inner iteration (root polish, local inverse) failed to converge.
class NumericalError : public Error
{
public:
  using Error::Error;
};

/// The outer fixed-point iteration hit its cap.
class NonConvergenceError : public Error
{
public:
  NonConvergenceError(const std::string& what, std::vector<double> trace)
    : Error(what), trace_(std::move(trace))
  {
  }

  const std::vector<double>& trace() const noexcept { return trace_; }

private:
  std::vector<double> trace_;
};

/// Coupling convexity bounds were violated (singular Hessian, failed inversion).
class ConvexityError : public Error
{
public:
  using Error::Error;
};

} // namespace fkai
