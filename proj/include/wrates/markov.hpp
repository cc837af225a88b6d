#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wrates/measures.hpp"

namespace wrates {

// Finite-state chain: row-stochastic kernel on a metric state space with
// its invariant distribution pi and an initial distribution nu. pi is
// never solved for here; constructors that know it exactly (Metropolis,
// explicit input) must pass it and validate() checks the fixed-point
// identity.
struct MarkovModel {
  SpacePtr states;
  std::vector<double> kernel;  // n*n row major
  std::vector<double> pi;
  std::vector<double> nu;
  bool reversible = false;

  int size() const { return states ? states->size() : 0; }
  // throws Error on: bad sizes, negative entries, row sums off 1 beyond
  // 1e-12, pi P != pi beyond 1e-9, or broken detailed balance when the
  // reversible flag is set
  void validate() const;

  static MarkovModel make(SpacePtr states, std::vector<double> kernel, std::vector<double> pi,
                          std::vector<double> nu, bool reversible);
};

// Metropolis-Hastings kernel on a state space for an unnormalized target
// density table. The proposal is uniform over the 2w neighboring grid
// indices (w = proposal_width); proposals leaving the grid are rejected
// in place, which keeps the proposal symmetric and the kernel reversible
// with pi = target / sum(target). nu defaults to pi.
MarkovModel metropolis_kernel(SpacePtr states, const std::vector<double>& target,
                              int proposal_width = 1);

struct SpectralGap {
  double lambda = 0.0;       // second-largest eigenvalue of P^2
  double c_poincare = 0.0;   // 1 / (1 - lambda)
  double beta2 = 0.0;        // second-largest (signed) eigenvalue of P
  std::vector<double> eigenvalues;  // of P, descending
  // P-eigenfunction attaining lambda (pi-mean zero); handy as the
  // extremal observable in decay tests
  std::vector<double> top_eigenfunction;
};

// reversible chains only: eigen-decomposes the pi-symmetrized kernel
// D^{1/2} P D^{-1/2}; lambda = max_{i >= 2} beta_i^2 and the Poincare
// constant is 1/(1 - lambda)
SpectralGap spectral_gap_finite(const MarkovModel& model);

struct VarianceDecay {
  std::vector<double> variances;  // Var_pi(P^k f), k = 0..n_max
  double lambda_fit = 0.0;        // max_k (v_k / v_0)^{1/k}
  double c_fit = 1.0;             // smallest C with v_k <= C lambda_fit^k v_0
  bool degenerate = false;        // f is pi-a.s. constant
};
VarianceDecay check_variance_decay(const MarkovModel& model, const std::vector<double>& f,
                                   int n_max);

// trajectory X_1..X_n with X_0 ~ nu (X_0 itself is not reported)
std::vector<int> run_chain(const MarkovModel& model, int n, uint64_t seed);

// occupation measure of a trajectory: visited states weighted count/n
DiscreteMeasure occupation_measure(const MarkovModel& model, const std::vector<int>& traj);

// || d nu / d pi ||_r in L_r(pi); r = inf gives max_i nu_i / pi_i
double nu_over_pi_norm(const MarkovModel& model, double r);

struct OccupationDeviation {
  double mean_abs_dev = 0.0;
  double std_error = 0.0;
  double bound = 0.0;  // (1/sqrt n) 2 sqrt(2C)/sqrt(1-lambda) ||dnu/dpi||_r^{1/2} pi(A)^{1/2 - 1/(2r)}
  double pi_A = 0.0;
};

// replicated |L_n(A) - pi(A)| against the spectral-gap deviation bound
// with C = 1 (reversible chains)
OccupationDeviation occupation_deviation(const MarkovModel& model, const std::vector<int>& A,
                                         int n, int replicates, uint64_t seed, double r);

// kernel CSV: n rows of n entries, then one row holding pi; loader
// validates and sets nu = pi
MarkovModel read_kernel_csv(const std::string& path, SpacePtr states_or_null,
                            bool reversible_hint);
void write_kernel_csv(const std::string& path, const MarkovModel& model);

}  // namespace wrates
