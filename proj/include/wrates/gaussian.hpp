#pragma once

#include <cstdint>
#include <vector>

#include "wrates/bounds.hpp"
#include "wrates/measures.hpp"

namespace wrates {

// Centered Gaussian vector X_t = sum_k z_k basis_k(t) on a grid of
// [0, 1], z_k iid standard normal. The sup norm over the grid is the
// working metric. brownian_kl uses the Karhunen-Loeve basis of Brownian
// motion, sqrt(2) sin((k - 1/2) pi t) / ((k - 1/2) pi), tabulated on
// t = 1/G, 2/G, ..., 1 so the grid contains the variance-maximizing
// endpoint t = 1.
class GaussianProcessModel {
 public:
  static GaussianProcessModel brownian_kl(int n_basis, int n_grid);
  // degenerate 1-point model: X = sigma Z
  static GaussianProcessModel scalar(double sigma);

  int basis_count() const { return K_; }
  int grid_size() const { return G_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& basis() const { return basis_; }  // K x G row major
  // sup over grid points of sqrt(Var X_t)
  double sigma_hat() const { return sigma_hat_; }

  std::vector<double> sample_path(Rng& rng) const;
  std::vector<double> sample_path(uint64_t seed) const;
  // n paths as a sup-norm empirical measure, atom weights 1/n
  DiscreteMeasure sample_paths_measure(int n, uint64_t seed) const;

 private:
  int K_ = 0, G_ = 0;
  std::vector<double> basis_;
  std::vector<double> grid_;
  double sigma_hat_ = 0.0;
};

struct SmallBallEstimate {
  double t = 0.0;
  double psi_hat = 0.0;   // -log(hits / mc), +inf when hits == 0
  double std_error = 0.0; // delta method: sqrt((1 - p) / (mc p))
  long hits = 0;
  long mc = 0;
  bool infinite = false;
};

SmallBallEstimate estimate_small_ball(const GaussianProcessModel& model, double t, int mc,
                                      uint64_t seed);
// shares one Monte Carlo sweep across all thresholds
std::vector<SmallBallEstimate> small_ball_table(const GaussianProcessModel& model,
                                                const std::vector<double>& ts, int mc,
                                                uint64_t seed);

struct DoublingCheck {
  double kappa_hat = 0.0;  // max psi(t) / psi(2t), the smallest valid kappa
  double t0_hat = 0.0;     // largest left endpoint of a validated pair
  int pairs_used = 0;
};
// scans the table for (t, 2t) pairs (1e-9 relative match on t)
DoublingCheck check_doubling(const std::vector<SmallBallEstimate>& table);

// monotone small-ball function from the finite entries of a table
SmallBallFunction small_ball_function_from_table(const std::vector<SmallBallEstimate>& table);

struct ConcentrationResult {
  double t = 0.0;
  double exceed_rate = 0.0;  // fraction of replicates with W2 >= mean + t
  double std_error = 0.0;
  double gauss_bound = 0.0;  // exp(-n t^2 / (2 sigma_hat^2))
  double mean_w2 = 0.0;
};

// Replicates W_2(L_n, ref) and reports the upper-tail exceedance around
// the replicate mean for each threshold, next to the Gaussian
// concentration bound.
std::vector<ConcentrationResult> concentration_tail(const GaussianProcessModel& model, int n,
                                                    const std::vector<double>& ts,
                                                    int replicates, uint64_t seed,
                                                    const DiscreteMeasure& ref);
// convenience wrapper that draws its own reference sample (size n_ref)
ConcentrationResult concentration_tail(const GaussianProcessModel& model, int n, double t,
                                       int replicates, uint64_t seed, int n_ref = 10000);

struct LloydResult {
  std::vector<double> centers;  // n_centers x dim
  std::vector<double> weights;  // Voronoi masses
  double delta_hat = 0.0;       // W_2(samples, quantized); equals the sqrt
                                // of the final assignment energy
  int iterations_run = 0;
  DiscreteMeasure quantized;
};

// Weighted Lloyd / k-medoids on a coordinate-space measure: euclidean
// spaces update centers to weighted means, sup-norm spaces to weighted
// medoids (so the objective is monotone in both cases). Empty clusters
// re-seed at the sample point farthest from its center. 1-d samples use
// sorted quantile initialization, higher dimensions a farthest-point
// sweep from a seeded random start.
LloydResult lloyd_quantizer(const DiscreteMeasure& samples, int n_centers, int iterations,
                            uint64_t seed);

struct QuantizerComparison {
  long n = 0;
  double w2_empirical = 0.0;  // W_2(L_n, ref)
  double delta_hat = 0.0;     // n-center quantizer of ref
  double psi_inv_log_n = 0.0; // small-ball envelope psi^{-1}(log n)
};

// one row of the quantizer-vs-empirical comparison; psi comes from a
// fitted small-ball table, ref is the fixed reference sample
QuantizerComparison empirical_vs_quantizer(const GaussianProcessModel& model, int n,
                                           uint64_t seed, const DiscreteMeasure& ref,
                                           const SmallBallFunction& psi,
                                           int quantizer_iterations = 40);

}  // namespace wrates
