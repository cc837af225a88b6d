#pragma once

#include <functional>
#include <map>
#include <string>

#include "wrates/multiscale.hpp"

namespace wrates {

// leading constant of the multiscale transport estimate
inline constexpr double kTransportConstant = 64.0 / 3.0;

// covering-number model N(E, delta) <= k_E * (diam E / delta)^alpha
struct DimensionProfile {
  double k_E = 1.0;
  double alpha = 1.0;
};

struct BoundResult {
  double value = 0.0;
  bool applicable = true;
  std::string note;
};

// mean-distance bound for n iid samples with an explicit cut t:
//   c * ( t + n^{-1/2p} * integral_t^{d/4} count(x)^{1/2p} dx ),
// c = 64/3, d the curve's diameter. For t >= d/4 the integral is empty.
double bound_iid_integral(const CoveringCurve& curve, double p, double n, double t);

struct MinimizedBound {
  double t = 0.0;
  double value = 0.0;
};
// minimizes over a 64-point geometric t-grid on [d * 4^-20, d / 4]
MinimizedBound minimize_bound_iid(const CoveringCurve& curve, double p, double n);

// closed-form rate bound when alpha > 2p:
//   c * alpha/(alpha - 2p) * d * k_E^{1/alpha} * n^{-1/alpha}
BoundResult bound_finite_dim(const DimensionProfile& prof, double d, double p, double n);

struct MarkovBoundInputs {
  double lambda = 0.0;       // decay-of-variance rate in [0, 1)
  double C = 1.0;            // decay-of-variance prefactor
  double nu_over_pi_r = 1.0; // || d nu / d pi ||_r
  double r = 1.0;            // norm index in [1, inf]
};

// occupation-measure rate bound, valid when 2p > alpha (1 + 1/r):
//   c * |q / (q - 2p)| * k_E^{1/alpha} * d * (C ||dnu/dpi||_r / ((1-lambda) n))^{1/q},
// q = alpha (1 + 1/r). The leading ratio is negative in the valid
// regime and enters through its absolute value.
BoundResult bound_markov(const DimensionProfile& prof, double d, double p, double n,
                         const MarkovBoundInputs& in);

struct UnboundedMarkovInputs {
  MarkovBoundInputs base;
  double zeta = 1.0;                 // extra moment index, > 0
  std::map<double, double> moments;  // theta -> M_theta = E_pi d(x, x0)^theta
  double c1 = kTransportConstant;    // configurable leading constant
  double ratio_threshold = 1.0;      // applicability cap on the small ratio
};

// unbounded-space variant: value = c1 * K(zeta) * ratio^{1/(q (1 + 1/zeta))}
// with ratio = C ||dnu/dpi||_r / ((1-lambda) n) and
// K(zeta) = max( M_zeta / M_p^{zeta/p},
//                M_{zeta+2p} / M_p^{1+zeta/p},
//                k_E^{1/(2p(1+1/r))} * (2p/q) * M_p^{q/(2p^2)} ).
// Applicable when 2p > q (1 + 1/zeta) and ratio <= ratio_threshold.
// Needs moments at theta = p, zeta, zeta + 2p.
BoundResult bound_markov_unbounded(const DimensionProfile& prof, double p, double n,
                                   const UnboundedMarkovInputs& in);

// psi(t) = -log mu(B(0, t)): nonincreasing in t, either analytic on
// [t_lo, t_hi] or a monotone table with linear interpolation. inverse()
// solves psi(t) = y by bisection (well below 1e-9 of the bracket).
class SmallBallFunction {
 public:
  static SmallBallFunction analytic(std::function<double(double)> f, double t_lo,
                                    double t_hi);
  static SmallBallFunction from_table(std::vector<double> ts, std::vector<double> values);

  double value(double t) const;
  double inverse(double y) const;
  double t_lo() const { return t_lo_; }
  double t_hi() const { return t_hi_; }

 private:
  std::function<double(double)> f_;
  std::vector<double> ts_, vals_;
  double t_lo_ = 0.0, t_hi_ = 0.0;
};

struct GaussianBoundInputs {
  SmallBallFunction psi;
  double kappa = 1.0;  // doubling constant: psi(t) <= kappa psi(2t) below t0
  double sigma = 1.0;  // sup over marginals of sqrt(Var)
  double t0 = 1.0;     // scale below which doubling holds
  double c_g = 1.0;    // configurable leading constant
};

// log-n threshold above which the Gaussian bound applies:
//   (6 + kappa) * max(log 2, psi(1), psi(t0 / 2), 1 / sigma^2)
double gaussian_validity_threshold(const GaussianBoundInputs& in);

// c_g * ( psi^{-1}( log n / (6 + kappa) ) + sigma * n^{-1/(4(6+kappa))} )
BoundResult bound_gaussian(const GaussianBoundInputs& in, double n);

// quantization / small-ball lower envelope psi^{-1}(log n), n >= 2
double quantization_lower_envelope(const GaussianBoundInputs& in, double n);

}  // namespace wrates
