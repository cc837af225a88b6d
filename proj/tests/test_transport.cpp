#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "wrates/measures.hpp"
#include "wrates/transport.hpp"

using namespace wrates;

namespace {

DiscreteMeasure random_measure(Rng& rng, SpacePtr sp, int k) {
  std::vector<int> supp;
  std::vector<double> w;
  std::vector<int> ids(sp->size());
  for (int i = 0; i < sp->size(); ++i) ids[i] = i;
  for (int c = 0; c < k; ++c) {
    int pick = (int)rng.uniform_index(ids.size() - c);
    std::swap(ids[pick], ids[ids.size() - 1 - c]);
    supp.push_back(ids[ids.size() - 1 - c]);
    w.push_back(rng.uniform(0.1, 1.0));
  }
  double s = 0.0;
  for (double x : w) s += x;
  for (double& x : w) x /= s;
  return DiscreteMeasure(sp, std::move(supp), std::move(w));
}

SpacePtr random_space(Rng& rng, int n, int dim) {
  std::vector<double> coords((size_t)n * dim);
  for (auto& c : coords) c = rng.uniform(0.0, 1.0);
  return make_space(std::move(coords), dim, MetricKind::euclidean);
}

void check_marginals(const TransportPlan& plan, const DiscreteMeasure& mu,
                     const DiscreteMeasure& nu) {
  std::vector<double> row(mu.size(), 0.0), col(nu.size(), 0.0);
  for (const auto& e : plan.entries) {
    CHECK(e.mass > 0.0);
    row[e.src] += e.mass;
    col[e.dst] += e.mass;
  }
  for (int i = 0; i < mu.size(); ++i)
    CHECK(row[i] == doctest::Approx(mu.weights()[i]).epsilon(1e-9));
  for (int j = 0; j < nu.size(); ++j)
    CHECK(col[j] == doctest::Approx(nu.weights()[j]).epsilon(1e-9));
}

}  // namespace

TEST_CASE("identical measures are at distance zero") {
  Rng rng(1);
  auto sp = random_space(rng, 12, 2);
  auto mu = random_measure(rng, sp, 6);
  for (double p : {1.0, 2.0, 3.5}) {
    CHECK(exact_wp(mu, mu, p).value == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("two point masses cost their distance for every p") {
  auto sp = make_space({0.0, 0.0, 3.0, 4.0}, 2, MetricKind::euclidean);
  DiscreteMeasure mu(sp, {0}, {1.0});
  DiscreteMeasure nu(sp, {1}, {1.0});
  for (double p : {1.0, 1.5, 2.0, 4.0}) {
    auto sol = exact_wp(mu, nu, p);
    CHECK(sol.value == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(sol.value_p == doctest::Approx(std::pow(5.0, p)).epsilon(1e-9));
  }
}

TEST_CASE("splitting half the mass across unit distance") {
  auto sp = make_space({0.0, 1.0}, 1, MetricKind::euclidean);
  DiscreteMeasure mu(sp, {0}, {1.0});
  DiscreteMeasure nu(sp, {0, 1}, {0.5, 0.5});
  auto sol = exact_wp(mu, nu, 1.0);
  CHECK(sol.value == doctest::Approx(0.5).epsilon(1e-12));
  auto sol2 = exact_wp(mu, nu, 2.0);
  CHECK(sol2.value_p == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol2.value == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("brute force on a hand checkable pair") {
  // mass 0.5 travels distance 1 and mass 0.5 travels distance 1: cost 1
  auto sp = make_space({0.0, 1.0, 2.0}, 1, MetricKind::euclidean);
  DiscreteMeasure mu(sp, {0, 2}, {0.5, 0.5});
  DiscreteMeasure nu(sp, {1}, {1.0});
  CHECK(brute_force_wp(mu, nu, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact_wp(mu, nu, 1.0).value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("brute force cell cap") {
  Rng rng(2);
  auto sp = random_space(rng, 20, 1);
  auto mu = random_measure(rng, sp, 9);
  auto nu = random_measure(rng, sp, 9);
  CHECK_THROWS_AS(brute_force_wp(mu, nu, 1.0), Error);
}

TEST_CASE("network simplex agrees with the dense oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    auto sp = random_space(rng, 16, 2);
    auto mu = random_measure(rng, sp, 5);
    auto nu = random_measure(rng, sp, 5);
    for (double p : {1.0, 2.0}) {
      double ref = brute_force_wp(mu, nu, p);
      auto sol = exact_wp(mu, nu, p);
      CHECK(sol.value == doctest::Approx(ref).epsilon(1e-8));
    }
  }
}

TEST_CASE("returned plans satisfy their marginals and price their cost") {
  Rng rng(4);
  auto sp = random_space(rng, 30, 3);
  auto mu = random_measure(rng, sp, 10);
  auto nu = random_measure(rng, sp, 8);
  WpOptions opts;
  opts.want_plan = true;
  for (double p : {1.0, 2.0}) {
    auto sol = exact_wp(mu, nu, p, opts);
    check_marginals(sol.plan, mu, nu);
    CHECK(plan_cost_p(sol.plan) == doctest::Approx(sol.value_p).epsilon(1e-9));
    CHECK(sol.plan.cost == doctest::Approx(sol.value).epsilon(1e-9));
  }
}

TEST_CASE("symmetry and triangle inequality hold empirically") {
  Rng rng(5);
  auto sp = random_space(rng, 18, 2);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_measure(rng, sp, 4);
    auto b = random_measure(rng, sp, 4);
    auto c = random_measure(rng, sp, 4);
    for (double p : {1.0, 2.0}) {
      double ab = exact_wp(a, b, p).value;
      double ba = exact_wp(b, a, p).value;
      CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
      double ac = exact_wp(a, c, p).value;
      double cb = exact_wp(c, b, p).value;
      CHECK(ab <= ac + cb + 1e-9);
    }
  }
}

TEST_CASE("W_p is nondecreasing in p for probability measures") {
  Rng rng(6);
  auto sp = random_space(rng, 14, 2);
  auto mu = random_measure(rng, sp, 5);
  auto nu = random_measure(rng, sp, 5);
  double prev = 0.0;
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    double v = exact_wp(mu, nu, p).value;
    CHECK(v >= prev - 1e-9);
    prev = v;
  }
}

TEST_CASE("one dimensional solver against the quantile formula") {
  // mu uniform on {0, 1}, nu uniform on {0.25, 0.75}: the monotone
  // coupling matches 0 -> 0.25 and 1 -> 0.75
  auto sp = make_space({0.0, 1.0, 0.25, 0.75}, 1, MetricKind::euclidean);
  DiscreteMeasure mu(sp, {0, 1}, {0.5, 0.5});
  DiscreteMeasure nu(sp, {2, 3}, {0.5, 0.5});
  CHECK(wp_1d(mu, nu, 1.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(wp_1d(mu, nu, 2.0) == doctest::Approx(0.25).epsilon(1e-12));

  // unequal weights: quantile coupling sends 0.3 of the mass at 0 to 2,
  // then 0.7 at 1 splits 0.2 to 2 and 0.5 to 5
  auto sp2 = make_space({0.0, 1.0, 2.0, 5.0}, 1, MetricKind::euclidean);
  DiscreteMeasure mu2(sp2, {0, 1}, {0.3, 0.7});
  DiscreteMeasure nu2(sp2, {2, 3}, {0.5, 0.5});
  double by_hand = 0.3 * 2.0 + 0.2 * 1.0 + 0.5 * 4.0;
  CHECK(wp_1d(mu2, nu2, 1.0) == doctest::Approx(by_hand).epsilon(1e-12));
}

TEST_CASE("all three solvers agree on random one dimensional instances") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    auto sp = random_space(rng, 16, 1);
    int k = 2 + (int)rng.uniform_index(6);
    auto mu = random_measure(rng, sp, k);
    auto nu = random_measure(rng, sp, k);
    for (double p : {1.0, 2.0, 3.0}) {
      double q = wp_1d(mu, nu, p);
      auto ns = exact_wp(mu, nu, p);
      CHECK(ns.value == doctest::Approx(q).epsilon(1e-8));
      if ((size_t)mu.size() * nu.size() <= 64)
        CHECK(brute_force_wp(mu, nu, p) == doctest::Approx(q).epsilon(1e-8));
    }
  }
}

TEST_CASE("moderate instances exercise column generation consistently") {
  Rng rng(8);
  auto sp = random_space(rng, 400, 2);
  std::vector<int> sa, sb;
  std::vector<double> wa(200, 1.0 / 200), wb(200, 1.0 / 200);
  for (int i = 0; i < 200; ++i) {
    sa.push_back(i);
    sb.push_back(200 + i);
  }
  DiscreteMeasure mu(sp, sa, wa), nu(sp, sb, wb);
  auto sol = exact_wp(mu, nu, 1.0);
  CHECK(sol.value > 0.0);
  CHECK(sol.value < std::sqrt(2.0));
  WpOptions opts;
  opts.want_plan = true;
  auto planned = exact_wp(mu, nu, 1.0, opts);
  CHECK(planned.value == doctest::Approx(sol.value).epsilon(1e-9));
  check_marginals(planned.plan, mu, nu);
}

TEST_CASE("mass mismatch beyond tolerance is rejected") {
  auto sp = make_space({0.0, 1.0}, 1, MetricKind::euclidean);
  DiscreteMeasure mu(sp, {0}, {1.0});
  DiscreteMeasure nu(sp, {1}, {0.9});
  CHECK_THROWS_AS(exact_wp(mu, nu, 1.0), InvalidMeasure);
  CHECK_THROWS_AS(wp_1d(mu, nu, 1.0), InvalidMeasure);
  CHECK_THROWS_AS(brute_force_wp(mu, nu, 1.0), InvalidMeasure);
  CHECK_THROWS_AS(exact_wp(mu, nu, 0.5), Error);
}

TEST_CASE("unnormalized but balanced measures are handled") {
  auto sp = make_space({0.0, 2.0}, 1, MetricKind::euclidean);
  DiscreteMeasure mu(sp, {0}, {3.0});
  DiscreteMeasure nu(sp, {1}, {3.0});
  // W_p^p scales linearly with total mass
  CHECK(exact_wp(mu, nu, 1.0).value_p == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("atom distance bridges measures on distinct spaces") {
  auto spa = make_space({0.0, 1.0}, 1, MetricKind::euclidean);
  auto spb = make_space({5.0}, 1, MetricKind::euclidean);
  DiscreteMeasure mu(spa, {0, 1}, {0.5, 0.5});
  DiscreteMeasure nu(spb, {0}, {1.0});
  CHECK(atom_distance(mu, 1, nu, 0) == doctest::Approx(4.0));
  auto sol = exact_wp(mu, nu, 1.0);
  CHECK(sol.value == doctest::Approx(4.5).epsilon(1e-9));
}

TEST_CASE("table space transport") {
  auto sp = make_table_space({0, 1, 2, 1, 0, 1, 2, 1, 0}, 3);
  DiscreteMeasure mu(sp, {0}, {1.0});
  DiscreteMeasure nu(sp, {2}, {1.0});
  CHECK(exact_wp(mu, nu, 1.0).value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(brute_force_wp(mu, nu, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
}
