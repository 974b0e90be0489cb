#pragma once

#include <numeric>
#include <optional>
#include <vector>

#include "fkai/errors.hpp"
#include "fkai/types.hpp"

namespace fkai {

enum class PotentialFamily { trig_sum, almost_periodic_truncated, delone_bump };

inline const char* to_string(PotentialFamily f)
{
  switch (f) {
  case PotentialFamily::trig_sum: return "trig-sum";
  case PotentialFamily::almost_periodic_truncated: return "almost-periodic-truncated";
  case PotentialFamily::delone_bump: return "delone-bump";
  }
  return "unknown";
}

/// amplitude * cos(frequency . x + phase)
template <typename Scalar>
struct TrigTerm
{
  Scalar amplitude;
  Vector<Scalar> frequency;
  Scalar phase = Scalar(0);
};

template <typename Scalar>
struct Derivatives
{
  Scalar value;
  Vector<Scalar> gradient;
  Matrix<Scalar> hessian;
};

/// Generator of the almost-periodic family sum_{n<terms} a^n cos(b^n (w . x)).
template <typename Scalar>
struct AlmostPeriodicSeries
{
  Scalar amplitude_ratio = Scalar(0.5);
  Scalar frequency_ratio = Scalar(1) / pi<Scalar>();
  int terms = 8;
  Vector<Scalar> direction = Vector<Scalar>::Ones(1);
};

/// On-site potential V : R^d -> R with closed-form derivatives.
template <typename Scalar>
class Potential
{
public:
  static Potential trig_sum(std::vector<TrigTerm<Scalar>> terms)
  {
    if (terms.empty()) throw ShapeError("trig-sum potential needs at least one term");
    Potential p;
    p.family_ = PotentialFamily::trig_sum;
    p.dimension_ = terms.front().frequency.size();
    for (const auto& t : terms)
      if (t.frequency.size() != p.dimension_) throw ShapeError("frequency dimension mismatch");
    p.terms_ = std::move(terms);
    return p;
  }

  /// amplitude * cos(frequency * x + phase) in d = 1.
  static Potential cosine(Scalar amplitude = 1, Scalar frequency = 1, Scalar phase = 0)
  {
    return trig_sum({{amplitude, Vector<Scalar>::Constant(1, frequency), phase}});
  }

  static Potential almost_periodic(const AlmostPeriodicSeries<Scalar>& series)
  {
    using std::pow;
    if (series.terms < 1) throw ShapeError("almost-periodic series needs >= 1 term");
    std::vector<TrigTerm<Scalar>> terms;
    for (int n = 0; n < series.terms; ++n)
      terms.push_back({pow(series.amplitude_ratio, Scalar(n)),
                       pow(series.frequency_ratio, Scalar(n)) * series.direction, Scalar(0)});
    Potential p = trig_sum(std::move(terms));
    p.family_ = PotentialFamily::almost_periodic_truncated;
    p.series_ = series;
    return p;
  }

  /// V(x) = -depth * sum_p exp(-||x - p||^2 / w^2).
  static Potential delone_bump(std::vector<Vector<Scalar>> points, Scalar width, Scalar depth = 1)
  {
    if (points.empty()) throw ShapeError("delone-bump potential needs at least one point");
    if (!(width > 0)) throw ShapeError("bump width must be positive");
    Potential p;
    p.family_ = PotentialFamily::delone_bump;
    p.dimension_ = points.front().size();
    for (const auto& q : points)
      if (q.size() != p.dimension_) throw ShapeError("point dimension mismatch");
    p.points_ = std::move(points);
    p.width_ = width;
    p.depth_ = depth;
    return p;
  }

  PotentialFamily family() const noexcept { return family_; }
  Index dimension() const noexcept { return dimension_; }
  const std::vector<TrigTerm<Scalar>>& terms() const noexcept { return terms_; }
  const std::optional<AlmostPeriodicSeries<Scalar>>& series() const noexcept { return series_; }
  const std::vector<Vector<Scalar>>& points() const noexcept { return points_; }
  Scalar width() const noexcept { return width_; }
  Scalar depth() const noexcept { return depth_; }

  Derivatives<Scalar> derivatives(const Vector<Scalar>& x) const
  {
    using std::cos;
    using std::exp;
    using std::sin;
    if (x.size() != dimension_) throw ShapeError("evaluation point dimension mismatch");
    Derivatives<Scalar> out{Scalar(0), Vector<Scalar>::Zero(dimension_),
                            Matrix<Scalar>::Zero(dimension_, dimension_)};
    if (family_ == PotentialFamily::delone_bump) {
      const Scalar w2 = width_ * width_;
      for (const auto& p : points_) {
        Vector<Scalar> y = x - p;
        Scalar e = depth_ * exp(-y.squaredNorm() / w2);
        // V = -e, dV = 2e y / w^2, d2V = 2e/w^2 (I - 2 y y^T / w^2)
        out.value -= e;
        out.gradient += (Scalar(2) * e / w2) * y;
        out.hessian += (Scalar(2) * e / w2) *
                       (Matrix<Scalar>::Identity(dimension_, dimension_) - (Scalar(2) / w2) * y * y.transpose());
      }
      return out;
    }
    for (const auto& t : terms_) {
      Scalar arg = t.frequency.dot(x) + t.phase;
      Scalar c = cos(arg);
      Scalar s = sin(arg);
      out.value += t.amplitude * c;
      out.gradient -= (t.amplitude * s) * t.frequency;
      out.hessian -= (t.amplitude * c) * t.frequency * t.frequency.transpose();
    }
    return out;
  }

  Scalar value(const Vector<Scalar>& x) const { return derivatives(x).value; }
  Vector<Scalar> gradient(const Vector<Scalar>& x) const { return derivatives(x).gradient; }
  Matrix<Scalar> hessian(const Vector<Scalar>& x) const { return derivatives(x).hessian; }

  /// Scalar conveniences for d = 1.
  Scalar value(Scalar x) const { return value(Vector<Scalar>::Constant(1, x)); }
  Scalar derivative(Scalar x) const { return gradient(Vector<Scalar>::Constant(1, x))(0); }
  Scalar second_derivative(Scalar x) const { return hessian(Vector<Scalar>::Constant(1, x))(0, 0); }

  /// Upper bound on sup ||V|| + sup ||V'|| + sup ||V''|| of the discarded tail of an
  /// almost-periodic series; zero for every other family.
  Scalar truncation_c2_tail() const
  {
    using std::pow;
    if (!series_) return Scalar(0);
    const Scalar a = series_->amplitude_ratio;
    const Scalar b = series_->frequency_ratio * series_->direction.norm();
    const Scalar n = Scalar(series_->terms);
    Scalar tail = 0;
    for (Scalar q : {a, a * b, a * b * b}) {
      if (!(q < 1)) return infinity<Scalar>();
      tail += pow(q, n) / (Scalar(1) - q);
    }
    return tail;
  }

  /// Sup-norm bound of the Hessian over R^d (trig families) or over the point list (bumps).
  Scalar hessian_bound() const
  {
    Scalar sum = 0;
    if (family_ == PotentialFamily::delone_bump) {
      // ||d2V|| <= 2/w^2 * sum e (1 + 2|y|^2/w^2) <= 2/w^2 * 3 * depth per bump
      return Scalar(6) * depth_ * Scalar(points_.size()) / (width_ * width_);
    }
    using std::abs;
    for (const auto& t : terms_) sum += abs(t.amplitude) * t.frequency.squaredNorm();
    return sum;
  }

  /// Smallest common period in d = 1 when all frequencies are commensurate
  /// (ratios p/q with q <= max_denominator); empty otherwise.
  std::optional<Scalar> period(int max_denominator = 16) const
  {
    using std::abs;
    using std::round;
    if (family_ != PotentialFamily::trig_sum || dimension_ != 1) return std::nullopt;
    Scalar base = 0;
    for (const auto& t : terms_) {
      Scalar w = abs(t.frequency(0));
      if (w > 0 && (base == 0 || w < base)) base = w;
    }
    if (base == 0) return std::nullopt;
    long long common = 1;
    std::vector<std::pair<long long, long long>> ratios;
    for (const auto& t : terms_) {
      Scalar q = abs(t.frequency(0)) / base;
      if (q == 0) continue;
      bool found = false;
      for (long long den = 1; den <= max_denominator && !found; ++den) {
        Scalar num = round(q * Scalar(den));
        if (abs(q * Scalar(den) - num) <= Scalar(1e-12) * Scalar(den) * (Scalar(1) + q)) {
          common = std::lcm(common, den);
          found = true;
        }
      }
      if (!found) return std::nullopt;
    }
    return Scalar(2) * pi<Scalar>() * Scalar(common) / base;
  }

private:
  PotentialFamily family_ = PotentialFamily::trig_sum;
  Index dimension_ = 1;
  std::vector<TrigTerm<Scalar>> terms_;
  std::optional<AlmostPeriodicSeries<Scalar>> series_;
  std::vector<Vector<Scalar>> points_;
  Scalar width_ = Scalar(0);
  Scalar depth_ = Scalar(1);
};

/// Segment of the Fibonacci chain: lengths long = golden ratio, short = 1,
/// generated by L -> LS, S -> L, starting at `origin`, covering [origin, origin + length].
template <typename Scalar>
std::vector<Vector<Scalar>> fibonacci_chain(Scalar origin, Scalar length)
{
  using std::sqrt;
  const Scalar tau = (Scalar(1) + sqrt(Scalar(5))) / Scalar(2);
  std::vector<bool> word{true};
  Scalar total = tau;
  while (total < length) {
    std::vector<bool> next;
    total = 0;
    for (bool is_long : word) {
      if (is_long) {
        next.push_back(true);
        next.push_back(false);
        total += tau + 1;
      } else {
        next.push_back(true);
        total += tau;
      }
    }
    word = std::move(next);
  }
  std::vector<Vector<Scalar>> out;
  Scalar x = origin;
  out.push_back(Vector<Scalar>::Constant(1, x));
  for (bool is_long : word) {
    x += is_long ? tau : Scalar(1);
    if (x > origin + length) break;
    out.push_back(Vector<Scalar>::Constant(1, x));
  }
  return out;
}

} // namespace fkai
