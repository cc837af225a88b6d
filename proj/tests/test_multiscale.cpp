#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "wrates/measures.hpp"
#include "wrates/multiscale.hpp"
#include "wrates/transport.hpp"

using namespace wrates;

namespace {

std::vector<int> all_ids(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

// minimal number of closed intervals of radius delta (centers anywhere on
// the line) covering a sorted 1-d point set
int min_interval_cover(std::vector<double> xs, double delta) {
  std::sort(xs.begin(), xs.end());
  int count = 0;
  size_t i = 0;
  while (i < xs.size()) {
    double reach = xs[i] + 2.0 * delta;
    ++count;
    while (i < xs.size() && xs[i] <= reach + 1e-15) ++i;
  }
  return count;
}

SpacePtr grid_space(int n, double lo, double hi) {
  std::vector<double> coords(n);
  for (int i = 0; i < n; ++i)
    coords[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1.0);
  return make_space(std::move(coords), 1, MetricKind::euclidean);
}

DiscreteMeasure measure_on_leaves(const PartitionTree& tree, Rng& rng) {
  auto centers = tree.leaf_centers();
  std::vector<double> w(centers.size());
  double s = 0.0;
  for (auto& x : w) {
    x = rng.uniform(0.0, 1.0);
    s += x;
  }
  for (auto& x : w) x /= s;
  return DiscreteMeasure(tree.space, centers, std::move(w));
}

}  // namespace

TEST_CASE("single center when the radius reaches everything") {
  auto sp = grid_space(11, 0.0, 1.0);
  auto gc = greedy_cover(*sp, all_ids(11), 1.0);
  CHECK(gc.centers.size() == 1);
  for (int a : gc.assign) CHECK(a == 0);
}

TEST_CASE("cover of the 11 point grid at radius 0.05") {
  auto sp = grid_space(11, 0.0, 1.0);
  auto gc = greedy_cover(*sp, all_ids(11), 0.05);
  // every ball holds one grid point, so the greedy estimate is 11, the
  // ambient optimum is 6, and the packing bound N(delta/2) is 11
  std::vector<double> xs(11);
  for (int i = 0; i < 11; ++i) xs[i] = 0.1 * i;
  CHECK(min_interval_cover(xs, 0.05) == 6);
  CHECK(gc.centers.size() == 11);
  CHECK(gc.centers.size() >= 6);
  CHECK((int)gc.centers.size() <= min_interval_cover(xs, 0.025));
}

TEST_CASE("cover of a 1000 point interval grid at radius 0.1") {
  auto sp = grid_space(1000, 0.0, 1.0);
  auto gc = greedy_cover(*sp, all_ids(1000), 0.1);
  CHECK(gc.centers.size() >= 5);
  CHECK(gc.centers.size() <= 10);
}

TEST_CASE("greedy covers really cover and their centers pack") {
  Rng rng(41);
  std::vector<double> coords(80 * 2);
  for (auto& c : coords) c = rng.uniform01();
  auto sp = make_space(coords, 2, MetricKind::euclidean);
  for (double delta : {0.05, 0.15, 0.4}) {
    auto gc = greedy_cover(*sp, all_ids(80), delta);
    for (int k = 0; k < 80; ++k)
      CHECK(sp->distance(k, gc.centers[gc.assign[k]]) <= delta + 1e-12);
    for (size_t a = 0; a < gc.centers.size(); ++a)
      for (size_t b = a + 1; b < gc.centers.size(); ++b)
        CHECK(sp->distance(gc.centers[a], gc.centers[b]) > delta);
  }
}

TEST_CASE("partition tree on a single point") {
  auto sp = grid_space(1, 0.3, 0.3);
  auto tree = build_partition_tree(sp, {0}, 1.0, 0, 2);
  CHECK_NOTHROW(validate_partition_tree(tree));
  for (const auto& lv : tree.levels) CHECK(lv.cells.size() == 1);
  DiscreteMeasure m(sp, {0}, {1.0});
  auto bb = tree_transport_bound(m, m, tree, 1.0, 1.0);
  CHECK(bb.bound == 0.0);
}

TEST_CASE("two separated points across two levels") {
  auto sp = make_space({0.0, 0.9}, 1, MetricKind::euclidean);
  auto tree = build_partition_tree(sp, {0, 1}, 0.9, 1, 2);
  CHECK_NOTHROW(validate_partition_tree(tree));
  CHECK(tree.level(1).cells.size() == 2);
  CHECK(tree.level(2).cells.size() == 2);
  DiscreteMeasure mu(sp, {0}, {1.0});
  DiscreteMeasure nu(sp, {1}, {1.0});
  auto bb = tree_transport_bound(mu, nu, tree, 1.0, 0.9);
  CHECK(bb.tv[0] == doctest::Approx(1.0));
  CHECK(bb.tv[1] == doctest::Approx(1.0));
  // levels 1 and 2 contribute 2*4*d and 2*1*d
  CHECK(bb.bound == doctest::Approx(10.0 * 0.9).epsilon(1e-12));
  auto plan = tree_transport_plan(mu, nu, tree, 1.0);
  CHECK(plan.cost == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(plan.cost <= bb.bound);
}

TEST_CASE("full mass moved across one level costs eight diameters") {
  auto sp = make_space({0.0, 2.0}, 1, MetricKind::euclidean);
  auto tree = build_partition_tree(sp, {0, 1}, 2.0, 1, 1);
  DiscreteMeasure mu(sp, {0}, {1.0});
  DiscreteMeasure nu(sp, {1}, {1.0});
  for (double p : {1.0, 2.0}) {
    auto bb = tree_transport_bound(mu, nu, tree, p, 2.0);
    CHECK(bb.bound == doctest::Approx(16.0).epsilon(1e-12));
  }
}

TEST_CASE("preconditions of the tree bound") {
  auto sp = make_space({0.0, 0.9}, 1, MetricKind::euclidean);
  DiscreteMeasure mu(sp, {0}, {1.0});
  DiscreteMeasure nu(sp, {1}, {1.0});
  auto deep = build_partition_tree(sp, {0, 1}, 1.0, 3, 4);
  CHECK_THROWS_AS(tree_transport_bound(mu, nu, deep, 1.0, 1.0), InapplicableRegime);
  auto tree = build_partition_tree(sp, {0, 1}, 1.0, 1, 2);
  // d below the tree scale
  CHECK_THROWS_AS(tree_transport_bound(mu, nu, tree, 1.0, 0.5), Error);
  auto wide = build_partition_tree(sp, {0, 1}, 0.5, 1, 2);
  // d below the point set diameter
  CHECK_THROWS_AS(tree_transport_bound(mu, nu, wide, 1.0, 0.6), Error);
  // atoms off the finest centers
  auto far = make_space({0.0, 0.45, 0.9}, 1, MetricKind::euclidean);
  auto ftree = build_partition_tree(far, {0, 2}, 1.0, 1, 2);
  DiscreteMeasure off(far, {1}, {1.0});
  DiscreteMeasure on(far, {0}, {1.0});
  CHECK_THROWS_AS(tree_transport_bound(off, on, ftree, 1.0, 1.0), InvalidMeasure);
}

TEST_CASE("identical projected measures give a zero bound") {
  Rng rng(42);
  std::vector<double> coords(60 * 2);
  for (auto& c : coords) c = rng.uniform01();
  auto sp = make_space(coords, 2, MetricKind::euclidean);
  double d = sp->diameter().value;
  auto tree = build_partition_tree(sp, all_ids(60), d, 0, 3);
  auto mu = measure_on_leaves(tree, rng);
  auto bb = tree_transport_bound(mu, mu, tree, 2.0, d);
  CHECK(bb.bound == doctest::Approx(0.0).epsilon(1e-12));
  auto plan = tree_transport_plan(mu, mu, tree, 2.0);
  CHECK(plan.cost == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("tree invariants hold on random point sets") {
  Rng rng(43);
  for (int trial = 0; trial < 8; ++trial) {
    int n = 40 + (int)rng.uniform_index(160);
    int dim = 1 + (int)rng.uniform_index(3);
    std::vector<double> coords((size_t)n * dim);
    for (auto& c : coords) c = rng.uniform(-2.0, 2.0);
    auto sp = make_space(std::move(coords), dim, MetricKind::euclidean);
    double d = sp->diameter().value;
    int u = (int)rng.uniform_index(3);
    int v = u + 1 + (int)rng.uniform_index(3);
    auto tree = build_partition_tree(sp, all_ids(n), d, u, v);
    CHECK_NOTHROW(validate_partition_tree(tree));
    // cells get strictly coarser going up
    for (int j = u; j < v; ++j)
      CHECK(tree.level(j).cells.size() <= tree.level(j + 1).cells.size());
  }
}

TEST_CASE("exact distance, plan cost and bound sandwich") {
  Rng rng(44);
  std::vector<double> coords(120 * 2);
  for (auto& c : coords) c = rng.uniform01();
  auto sp = make_space(coords, 2, MetricKind::euclidean);
  double d = sp->diameter().value;
  auto tree = build_partition_tree(sp, all_ids(120), d, 1, 3);
  for (int trial = 0; trial < 5; ++trial) {
    auto mu = measure_on_leaves(tree, rng);
    auto nu = measure_on_leaves(tree, rng);
    for (double p : {1.0, 2.0}) {
      auto bb = tree_transport_bound(mu, nu, tree, p, d);
      auto plan = tree_transport_plan(mu, nu, tree, p);
      double exact = exact_wp(mu, nu, p).value;
      CHECK(exact <= plan.cost + 1e-9);
      CHECK(plan.cost <= bb.bound + 1e-9);
    }
  }
}

TEST_CASE("covering curve of a single point") {
  auto sp = grid_space(1, 0.0, 0.0);
  auto curve = covering_curve(*sp, {0});
  CHECK(curve.count(0.0) == 1.0);
  CHECK(curve.count(5.0) == 1.0);
}

TEST_CASE("covering curve is a monotone valid cover size") {
  Rng rng(45);
  std::vector<double> coords(200);
  for (auto& c : coords) c = rng.uniform01();
  auto sp = make_space(coords, 1, MetricKind::euclidean);
  auto curve = covering_curve(*sp, all_ids(200));
  double prev = 1e18;
  std::vector<double> xs(coords.begin(), coords.end());
  for (double delta : {0.01, 0.05, 0.1, 0.3, 1.0}) {
    double c = curve.count(delta);
    CHECK(c <= prev);
    CHECK(c <= 200.0);
    CHECK(c >= (double)min_interval_cover(xs, delta));
    prev = c;
  }
}

TEST_CASE("step curve integral is exact") {
  auto curve = CoveringCurve::from_radii({0.5, 0.2}, 1.0);
  CHECK(curve.count(0.6) == 1.0);
  CHECK(curve.count(0.3) == 2.0);
  CHECK(curve.count(0.1) == 3.0);
  double v = curve.integral_pow(0.05, 1.0, 1.0);
  CHECK(v == doctest::Approx(0.15 * 3 + 0.3 * 2 + 0.5 * 1).epsilon(1e-12));
}

TEST_CASE("power law curve quadrature matches the closed form") {
  auto curve = CoveringCurve::power_law(1.0, 3.0, 1.0);
  CHECK(curve.count(0.5) == doctest::Approx(8.0));
  CHECK_THROWS_AS(curve.count(0.0), RangeError);
  double e = 0.5;
  double a = 0.01, b = 0.25;
  // integral of x^{-3/2} over [a, b]
  double closed = 2.0 * (1.0 / std::sqrt(a) - 1.0 / std::sqrt(b));
  CHECK(curve.integral_pow(a, b, e) == doctest::Approx(closed).epsilon(1e-6));
}
