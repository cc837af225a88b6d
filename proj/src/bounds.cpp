#include "wrates/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wrates {

double bound_iid_integral(const CoveringCurve& curve, double p, double n, double t) {
  if (p < 1.0) throw Error("exponent p must be >= 1");
  if (!(n >= 1.0)) throw Error("sample size must be >= 1");
  if (!(t > 0.0)) throw Error("cut t must be positive");
  const double d = curve.diam();
  double integral = curve.integral_pow(t, d / 4.0, 1.0 / (2.0 * p));
  return kTransportConstant * (t + std::pow(n, -1.0 / (2.0 * p)) * integral);
}

MinimizedBound minimize_bound_iid(const CoveringCurve& curve, double p, double n) {
  const double d = curve.diam();
  const double t_hi = d / 4.0;
  const double t_lo = d * std::pow(4.0, -20.0);
  MinimizedBound best;
  for (int i = 0; i < 64; ++i) {
    double t = t_lo * std::pow(t_hi / t_lo, i / 63.0);
    double v = bound_iid_integral(curve, p, n, t);
    if (i == 0 || v < best.value) {
      best.t = t;
      best.value = v;
    }
  }
  return best;
}

BoundResult bound_finite_dim(const DimensionProfile& prof, double d, double p, double n) {
  if (p < 1.0) throw Error("exponent p must be >= 1");
  if (!(prof.alpha > 0.0) || !(prof.k_E > 0.0))
    throw Error("dimension profile needs positive alpha and k_E");
  if (!(d > 0.0) || !(n >= 1.0)) throw Error("need d > 0 and n >= 1");
  BoundResult out;
  if (prof.alpha <= 2.0 * p) {
    out.applicable = false;
    out.value = std::numeric_limits<double>::quiet_NaN();
    out.note = "requires alpha > 2p";
    return out;
  }
  out.value = kTransportConstant * (prof.alpha / (prof.alpha - 2.0 * p)) * d *
              std::pow(prof.k_E, 1.0 / prof.alpha) * std::pow(n, -1.0 / prof.alpha);
  return out;
}

BoundResult bound_markov(const DimensionProfile& prof, double d, double p, double n,
                         const MarkovBoundInputs& in) {
  if (p < 1.0) throw Error("exponent p must be >= 1");
  if (!(prof.alpha > 0.0) || !(prof.k_E > 0.0))
    throw Error("dimension profile needs positive alpha and k_E");
  if (!(in.lambda >= 0.0) || in.lambda >= 1.0)
    throw Error("decay rate lambda must lie in [0, 1)");
  if (!(in.C > 0.0) || !(in.nu_over_pi_r > 0.0)) throw Error("C and the norm must be positive");
  if (!(in.r >= 1.0)) throw Error("norm index r must be >= 1 (inf allowed)");
  if (!(d > 0.0) || !(n >= 1.0)) throw Error("need d > 0 and n >= 1");

  const double q = prof.alpha * (1.0 + 1.0 / in.r);  // 1/r = 0 when r = inf
  BoundResult out;
  if (!(2.0 * p > q)) {
    out.applicable = false;
    out.value = std::numeric_limits<double>::quiet_NaN();
    out.note = "requires 2p > alpha (1 + 1/r)";
    return out;
  }
  const double ratio = in.C * in.nu_over_pi_r / ((1.0 - in.lambda) * n);
  out.value = kTransportConstant * std::abs(q / (q - 2.0 * p)) *
              std::pow(prof.k_E, 1.0 / prof.alpha) * d * std::pow(ratio, 1.0 / q);
  out.note = "leading ratio taken in absolute value (negative in the valid regime)";
  return out;
}

namespace {

double moment_at(const std::map<double, double>& moments, double theta) {
  for (const auto& [key, val] : moments)
    if (std::abs(key - theta) <= 1e-9 * std::max(1.0, std::abs(theta))) return val;
  throw Error("missing moment at theta = " + fmt_g17(theta));
}

}  // namespace

BoundResult bound_markov_unbounded(const DimensionProfile& prof, double p, double n,
                                   const UnboundedMarkovInputs& in) {
  if (p < 1.0) throw Error("exponent p must be >= 1");
  if (!(in.zeta > 0.0)) throw Error("zeta must be positive");
  const auto& b = in.base;
  if (!(b.lambda >= 0.0) || b.lambda >= 1.0)
    throw Error("decay rate lambda must lie in [0, 1)");
  if (!(b.r >= 1.0)) throw Error("norm index r must be >= 1 (inf allowed)");

  const double q = prof.alpha * (1.0 + 1.0 / b.r);
  const double Mp = moment_at(in.moments, p);
  const double Mz = moment_at(in.moments, in.zeta);
  const double Mz2p = moment_at(in.moments, in.zeta + 2.0 * p);
  if (!(Mp > 0.0)) throw Error("moment at theta = p must be positive");

  const double k1 = Mz / std::pow(Mp, in.zeta / p);
  const double k2 = Mz2p / std::pow(Mp, 1.0 + in.zeta / p);
  const double k3 = std::pow(prof.k_E, 1.0 / (2.0 * p * (1.0 + 1.0 / b.r))) * (2.0 * p / q) *
                    std::pow(Mp, q / (2.0 * p * p));
  const double K = std::max({k1, k2, k3});

  const double ratio = b.C * b.nu_over_pi_r / ((1.0 - b.lambda) * n);
  const double qz = q * (1.0 + 1.0 / in.zeta);
  BoundResult out;
  out.value = in.c1 * K * std::pow(ratio, 1.0 / qz);
  out.applicable = (2.0 * p > qz) && (ratio <= in.ratio_threshold);
  if (!(2.0 * p > qz))
    out.note = "requires 2p > alpha (1 + 1/r)(1 + 1/zeta)";
  else if (ratio > in.ratio_threshold)
    out.note = "small ratio exceeds the applicability threshold";
  return out;
}

// -------- small-ball function --------

SmallBallFunction SmallBallFunction::analytic(std::function<double(double)> f, double t_lo,
                                              double t_hi) {
  if (!f || !(t_lo > 0.0) || !(t_hi > t_lo))
    throw Error("analytic small-ball function needs f and 0 < t_lo < t_hi");
  SmallBallFunction s;
  s.f_ = std::move(f);
  s.t_lo_ = t_lo;
  s.t_hi_ = t_hi;
  return s;
}

SmallBallFunction SmallBallFunction::from_table(std::vector<double> ts,
                                                std::vector<double> values) {
  if (ts.size() != values.size() || ts.size() < 2)
    throw Error("small-ball table needs at least two (t, psi) rows");
  for (size_t i = 1; i < ts.size(); ++i) {
    if (ts[i] <= ts[i - 1]) throw Error("small-ball table abscissas must increase");
    if (values[i] > values[i - 1] + 1e-12 * std::max(1.0, std::abs(values[i - 1])))
      throw Error("psi must be nonincreasing in t");
  }
  SmallBallFunction s;
  s.t_lo_ = ts.front();
  s.t_hi_ = ts.back();
  s.ts_ = std::move(ts);
  s.vals_ = std::move(values);
  return s;
}

double SmallBallFunction::value(double t) const {
  if (t < t_lo_ || t > t_hi_)
    throw RangeError("small-ball function evaluated outside [t_lo, t_hi]");
  if (f_) return f_(t);
  auto it = std::lower_bound(ts_.begin(), ts_.end(), t);
  size_t j = it - ts_.begin();
  if (j == 0) return vals_.front();
  if (j >= ts_.size()) return vals_.back();
  double w = (t - ts_[j - 1]) / (ts_[j] - ts_[j - 1]);
  return vals_[j - 1] + w * (vals_[j] - vals_[j - 1]);
}

double SmallBallFunction::inverse(double y) const {
  double v_hi = value(t_lo_);  // largest value (psi decreasing)
  double v_lo = value(t_hi_);
  if (y > v_hi * (1.0 + 1e-12) || y < v_lo * (1.0 - 1e-12))
    throw RangeError("small-ball inverse target outside the covered range");
  double lo = t_lo_, hi = t_hi_;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (value(mid) > y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double gaussian_validity_threshold(const GaussianBoundInputs& in) {
  if (!(in.sigma > 0.0)) throw Error("sigma must be positive");
  double m = std::log(2.0);
  m = std::max(m, in.psi.value(1.0));
  m = std::max(m, in.psi.value(in.t0 / 2.0));
  m = std::max(m, 1.0 / (in.sigma * in.sigma));
  return (6.0 + in.kappa) * m;
}

BoundResult bound_gaussian(const GaussianBoundInputs& in, double n) {
  if (!(n >= 2.0)) throw Error("need n >= 2");
  BoundResult out;
  const double ln = std::log(n);
  const double threshold = gaussian_validity_threshold(in);
  if (ln < threshold) {
    out.applicable = false;
    out.value = std::numeric_limits<double>::quiet_NaN();
    out.note = "log n below validity threshold " + fmt_g17(threshold);
    return out;
  }
  const double a = 6.0 + in.kappa;
  out.value = in.c_g * (in.psi.inverse(ln / a) + in.sigma * std::pow(n, -1.0 / (4.0 * a)));
  out.note = "validity threshold (log n) = " + fmt_g17(threshold);
  return out;
}

double quantization_lower_envelope(const GaussianBoundInputs& in, double n) {
  if (!(n >= 2.0)) throw Error("need n >= 2");
  return in.psi.inverse(std::log(n));
}

}  // namespace wrates
