#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "wrates/markov.hpp"

using namespace wrates;

namespace {

SpacePtr line_space(int n) {
  std::vector<double> coords(n);
  for (int i = 0; i < n; ++i) coords[i] = n == 1 ? 0.0 : double(i) / (n - 1);
  return make_space(std::move(coords), 1, MetricKind::euclidean);
}

// two-state birth-death chain: stays with 1-a / 1-b
MarkovModel two_state(double a, double b) {
  auto sp = line_space(2);
  std::vector<double> kernel = {1.0 - a, a, b, 1.0 - b};
  double pb = a / (a + b);
  std::vector<double> pi = {1.0 - pb, pb};
  return MarkovModel::make(sp, kernel, pi, pi, true);
}

}  // namespace

TEST_CASE("model validation catches broken inputs") {
  auto sp = line_space(2);
  std::vector<double> pi = {0.5, 0.5};
  CHECK_NOTHROW(MarkovModel::make(sp, {0.5, 0.5, 0.5, 0.5}, pi, pi, true));
  // row sum off
  CHECK_THROWS_AS(MarkovModel::make(sp, {0.6, 0.5, 0.5, 0.5}, pi, pi, false), Error);
  // negative entry
  CHECK_THROWS_AS(MarkovModel::make(sp, {1.1, -0.1, 0.5, 0.5}, pi, pi, false), Error);
  // pi not invariant
  CHECK_THROWS_AS(MarkovModel::make(sp, {0.9, 0.1, 0.5, 0.5}, pi, pi, false), Error);
  // detailed balance broken but flagged reversible: rotation chain
  auto sp3 = line_space(3);
  std::vector<double> rot = {0, 1, 0, 0, 0, 1, 1, 0, 0};
  std::vector<double> u3 = {1. / 3, 1. / 3, 1. / 3};
  CHECK_THROWS_AS(MarkovModel::make(sp3, rot, u3, u3, true), Error);
  CHECK_NOTHROW(MarkovModel::make(sp3, rot, u3, u3, false));
}

TEST_CASE("spectral gap of two state chains") {
  // symmetric fast chain: P has eigenvalues 1 and 0
  auto fast = two_state(0.5, 0.5);
  auto g0 = spectral_gap_finite(fast);
  CHECK(g0.beta2 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g0.lambda == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g0.c_poincare == doctest::Approx(1.0));

  // sticky chain: beta2 = 1 - a - b = 0.8, lambda = 0.64
  auto slow = two_state(0.1, 0.1);
  auto g = spectral_gap_finite(slow);
  CHECK(g.beta2 == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(g.lambda == doctest::Approx(0.64).epsilon(1e-12));
  CHECK(g.c_poincare == doctest::Approx(1.0 / 0.36).epsilon(1e-9));
  CHECK(g.eigenvalues.size() == 2);
  CHECK(g.eigenvalues[0] == doctest::Approx(1.0));

  // lazier variant mixes slower
  auto lazier = two_state(0.05, 0.05);
  CHECK(spectral_gap_finite(lazier).lambda > g.lambda);
}

TEST_CASE("variance decay follows the spectral rate exactly on two states") {
  auto model = two_state(0.1, 0.1);
  // indicator of state 1 has pi-variance 1/4 and lies in the beta2
  // eigenspace, so Var(P^k f) = 0.64^k / 4
  std::vector<double> f = {0.0, 1.0};
  auto vd = check_variance_decay(model, f, 12);
  REQUIRE((int)vd.variances.size() == 13);
  CHECK_FALSE(vd.degenerate);
  for (int k = 0; k <= 12; ++k)
    CHECK(vd.variances[k] ==
          doctest::Approx(0.25 * std::pow(0.64, k)).epsilon(1e-10));
  CHECK(vd.lambda_fit == doctest::Approx(0.64).epsilon(1e-9));
  CHECK(vd.c_fit == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("variance decay degenerate and iid cases") {
  auto model = two_state(0.2, 0.2);
  std::vector<double> c = {3.0, 3.0};
  auto vd = check_variance_decay(model, c, 6);
  CHECK(vd.degenerate);
  CHECK(vd.variances[0] == doctest::Approx(0.0));

  // iid kernel (rows equal pi): one step kills all variance
  auto sp = line_space(3);
  std::vector<double> pi = {0.2, 0.3, 0.5};
  std::vector<double> kernel;
  for (int i = 0; i < 3; ++i) kernel.insert(kernel.end(), pi.begin(), pi.end());
  auto iid = MarkovModel::make(sp, kernel, pi, pi, false);
  std::vector<double> f = {1.0, -2.0, 0.5};
  auto vd2 = check_variance_decay(iid, f, 5);
  CHECK(vd2.variances[0] > 0.0);
  for (int k = 1; k <= 5; ++k)
    CHECK(vd2.variances[k] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(vd2.lambda_fit == doctest::Approx(0.0));
}

TEST_CASE("fitted decay rate never beats the spectral value") {
  Rng rng(3);
  auto model = two_state(0.3, 0.15);
  auto gap = spectral_gap_finite(model);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> f = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    auto vd = check_variance_decay(model, f, 10);
    if (!vd.degenerate) CHECK(vd.lambda_fit <= gap.lambda + 1e-6);
  }
  // the top eigenfunction attains the rate
  auto vd = check_variance_decay(model, gap.top_eigenfunction, 10);
  CHECK(vd.lambda_fit == doctest::Approx(gap.lambda).epsilon(1e-9));
}

TEST_CASE("trajectories are deterministic in the seed and follow the kernel") {
  auto model = two_state(0.3, 0.4);
  auto t1 = run_chain(model, 50, 7);
  auto t2 = run_chain(model, 50, 7);
  CHECK(t1 == t2);
  CHECK(t1.size() == 50);
  auto t3 = run_chain(model, 50, 8);
  CHECK(t1 != t3);

  // absorbing chain never leaves state 0 when started there
  auto sp = line_space(2);
  std::vector<double> kernel = {1.0, 0.0, 0.3, 0.7};
  std::vector<double> pi = {1.0, 0.0};
  auto absorbing = MarkovModel::make(sp, kernel, pi, {1.0, 0.0}, false);
  for (int s : run_chain(absorbing, 100, 5)) CHECK(s == 0);
}

TEST_CASE("long run state frequencies approach pi") {
  auto model = two_state(0.2, 0.1);
  const int n = 100000;
  auto traj = run_chain(model, n, 11);
  auto occ = occupation_measure(model, traj);
  occ.validate();
  CHECK(occ.is_probability());
  double freq1 = 0.0;
  for (int i = 0; i < occ.size(); ++i)
    if (occ.support()[i] == 1) freq1 = occ.weights()[i];
  CHECK(std::abs(freq1 - model.pi[1]) < 0.01);
}

TEST_CASE("metropolis on a flat target accepts everything") {
  auto sp = line_space(8);
  std::vector<double> target(8, 1.0);
  auto model = metropolis_kernel(sp, target, 1);
  CHECK_NOTHROW(model.validate());
  CHECK(model.reversible);
  for (int i = 0; i < 8; ++i) CHECK(model.pi[i] == doctest::Approx(0.125));
  // interior states move left or right with probability 1/2 each
  CHECK(model.kernel[1 * 8 + 0] == doctest::Approx(0.5));
  CHECK(model.kernel[1 * 8 + 2] == doctest::Approx(0.5));
  CHECK(model.kernel[1 * 8 + 1] == doctest::Approx(0.0));
  // edge states bounce back in place with probability 1/2
  CHECK(model.kernel[0] == doctest::Approx(0.5));
  CHECK(model.kernel[1] == doctest::Approx(0.5));
}

TEST_CASE("metropolis two point target satisfies detailed balance") {
  auto sp = line_space(2);
  std::vector<double> target = {2.0, 1.0};
  auto model = metropolis_kernel(sp, target, 1);
  CHECK(model.pi[0] == doctest::Approx(2.0 / 3.0));
  CHECK(model.pi[1] == doctest::Approx(1.0 / 3.0));
  // flow 0 -> 1 = pi_0 * accept(1/2) * propose(1/2) = 1/6 each way
  CHECK(model.pi[0] * model.kernel[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(model.pi[1] * model.kernel[2] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK_NOTHROW(model.validate());
}

TEST_CASE("metropolis leaves a gaussian profile invariant on a wide grid") {
  auto sp = line_space(64);
  std::vector<double> target(64);
  for (int i = 0; i < 64; ++i) {
    double x = double(i) / 63.0;
    target[i] = std::exp(-(x - 0.5) * (x - 0.5) / (2.0 * 0.25 * 0.25));
  }
  auto model = metropolis_kernel(sp, target, 3);
  CHECK_NOTHROW(model.validate());
  // pi P = pi to solver precision
  for (int j = 0; j < 64; ++j) {
    double s = 0.0;
    for (int i = 0; i < 64; ++i) s += model.pi[i] * model.kernel[i * 64 + j];
    CHECK(s == doctest::Approx(model.pi[j]).epsilon(1e-9));
  }
  auto gap = spectral_gap_finite(model);
  CHECK(gap.lambda > 0.0);
  CHECK(gap.lambda < 1.0);
}

TEST_CASE("radon nikodym norms of nu against pi") {
  auto sp = line_space(2);
  std::vector<double> pi = {0.75, 0.25};
  std::vector<double> nu = {0.5, 0.5};
  auto model =
      MarkovModel::make(sp, {0.75, 0.25, 0.75, 0.25}, pi, nu, false);
  // density is (2/3, 2)
  CHECK(nu_over_pi_norm(model, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  double l2 = std::sqrt(0.75 * (2.0 / 3.0) * (2.0 / 3.0) + 0.25 * 4.0);
  CHECK(nu_over_pi_norm(model, 2.0) == doctest::Approx(l2).epsilon(1e-12));
  CHECK(nu_over_pi_norm(model, std::numeric_limits<double>::infinity()) ==
        doctest::Approx(2.0).epsilon(1e-12));
  // nu = pi has norm 1 for every r
  auto eq = two_state(0.3, 0.3);
  for (double r : {1.0, 2.0, 5.0}) CHECK(nu_over_pi_norm(eq, r) == doctest::Approx(1.0));
}

TEST_CASE("occupation deviation vanishes on the full space") {
  auto model = two_state(0.25, 0.25);
  auto dev = occupation_deviation(model, {0, 1}, 100, 20, 3, 2.0);
  CHECK(dev.pi_A == doctest::Approx(1.0));
  CHECK(dev.mean_abs_dev == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("occupation deviation sits inside its bound") {
  auto model = two_state(0.1, 0.1);
  double inf = std::numeric_limits<double>::infinity();
  auto dev = occupation_deviation(model, {1}, 400, 60, 17, inf);
  CHECK(dev.pi_A == doctest::Approx(0.5));
  CHECK(dev.bound ==
        doctest::Approx((2.0 * std::sqrt(2.0) / std::sqrt(0.36)) * std::sqrt(0.5) /
                        std::sqrt(400.0))
            .epsilon(1e-12));
  CHECK(dev.mean_abs_dev > 0.0);
  CHECK(dev.mean_abs_dev <= dev.bound + 3.0 * dev.std_error);

  // iid kernel: the bound holds comfortably at r = inf
  auto sp = line_space(2);
  std::vector<double> pi = {0.5, 0.5};
  auto iid = MarkovModel::make(sp, {0.5, 0.5, 0.5, 0.5}, pi, pi, true);
  auto dev2 = occupation_deviation(iid, {0}, 200, 50, 23, inf);
  CHECK(dev2.mean_abs_dev < dev2.bound);
}

TEST_CASE("kernel csv round trip") {
  auto sp = line_space(3);
  std::vector<double> kernel = {0.5, 0.5, 0.0, 0.25, 0.5, 0.25, 0.0, 0.5, 0.5};
  std::vector<double> pi = {0.25, 0.5, 0.25};
  auto model = MarkovModel::make(sp, kernel, pi, pi, true);
  auto path = std::filesystem::temp_directory_path() / "wrates_kernel_rt.csv";
  write_kernel_csv(path.string(), model);
  auto back = read_kernel_csv(path.string(), sp, true);
  CHECK(back.reversible);
  CHECK(back.kernel == model.kernel);
  CHECK(back.pi == model.pi);
  CHECK(back.nu == model.pi);
  CHECK_NOTHROW(back.validate());
  // default space: unit-spaced line with as many points as rows
  auto anon = read_kernel_csv(path.string(), nullptr, false);
  CHECK(anon.size() == 3);
  std::filesystem::remove(path);
}

TEST_CASE("spectral gap needs the reversible flag") {
  auto sp = line_space(3);
  // rotation kernel is doubly stochastic but not reversible
  std::vector<double> kernel = {0, 1, 0, 0, 0, 1, 1, 0, 0};
  std::vector<double> pi = {1. / 3, 1. / 3, 1. / 3};
  auto rot = MarkovModel::make(sp, kernel, pi, pi, false);
  CHECK_THROWS_AS(spectral_gap_finite(rot), Error);
}
