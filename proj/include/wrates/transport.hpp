#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wrates/measures.hpp"

namespace wrates {

// Coupling between the atoms of two measures. src / dst are atom
// positions (indices into the measures' support lists, not space ids).
struct TransportPlan {
  struct Entry {
    int src = 0;
    int dst = 0;
    double mass = 0.0;
    double distance = 0.0;
  };
  std::vector<Entry> entries;
  double p = 1.0;
  double cost_p = 0.0;  // sum mass * distance^p
  double cost = 0.0;    // cost_p^(1/p)
};

double plan_cost_p(const TransportPlan& plan);

struct WpOptions {
  bool want_plan = false;
  // relative mismatch of total masses tolerated before the second
  // measure is rescaled to balance exactly
  double mass_tol = 1e-9;
};

struct SolveStats {
  int64_t pivots = 0;
  int pricing_rounds = 0;
  size_t arcs = 0;
};

struct WpSolution {
  double value = 0.0;    // W_p
  double value_p = 0.0;  // W_p^p
  TransportPlan plan;    // populated when want_plan
  SolveStats stats;
};

// Exact p-Wasserstein distance between two finitely supported measures
// via a transportation network simplex. Costs d(x,y)^p are scaled to
// integers by 1e9 / (upper bound on the max cost), so optima are exact
// for the rounded costs and the returned value matches the true optimum
// to about 1e-9 relative resolution of the largest cost. Large
// coordinate-space instances are solved by column generation: a
// restricted arc set is optimized and the full product is scanned for
// negative reduced costs until the dual certificate covers every pair.
// The reported value recomputes distances in double from the final plan.
WpSolution exact_wp(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                    const WpOptions& opts = {});

// Independent dense-tableau primal simplex with Bland's rule on raw
// double costs. Guard: at most 64 cost cells (|mu| * |nu| <= 64). Used
// as the cross-checking oracle for exact_wp.
double brute_force_wp(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

// Exact W_p on the line via the monotone quantile coupling. Both
// measures must live on 1-dimensional coordinate spaces.
double wp_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

// Distance between atom i of mu and atom j of nu; both measures must
// share a space or live on coordinate spaces of equal kind and dim.
double atom_distance(const DiscreteMeasure& mu, int i, const DiscreteMeasure& nu, int j);

void write_plan_csv(const std::string& path, const TransportPlan& plan);

}  // namespace wrates
