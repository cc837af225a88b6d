#pragma once

#include <unordered_map>
#include <vector>

#include "wrates/measures.hpp"
#include "wrates/transport.hpp"

namespace wrates {

// Greedy metric ball cover: walk the points in order, each point not yet
// covered becomes a center and absorbs every uncovered point within
// `radius`. assign[k] is the center position covering points[k].
struct GreedyCover {
  std::vector<int> centers;  // space ids, in creation order
  std::vector<int> assign;   // per input point, index into centers
};
GreedyCover greedy_cover(const MetricSpace& space, const std::vector<int>& points,
                         double radius);

// Nested partitions of a finite point set at radii 4^{-j} s for
// j = u..v. The finest level is a greedy cover partition (each point
// joins the first ball that reaches it); coarser levels agglomerate
// whole cells of the level below onto a coarser greedy cover. Every
// cell records the covering center and its parent cell. Invariants:
// each level partitions the point set, diam(cell at level j) <=
// 4^{-j+1} s, each cell is contained in one parent cell, and the number
// of cells at level j is at most the size of a greedy cover at radius
// 4^{-j} s.
struct PartitionTree {
  struct Cell {
    std::vector<int> members;  // space ids
    int center = -1;           // space id of the covering center
    int parent = -1;           // cell index one level up, -1 at the top
  };
  struct Level {
    double radius = 0.0;            // 4^{-j} s
    std::vector<Cell> cells;
    std::vector<int> cell_of;       // per point position -> cell index
  };

  SpacePtr space;
  std::vector<int> points;  // space ids of X
  double s = 0.0;
  int u = 0, v = 0;
  std::vector<Level> levels;  // levels[k] is level u+k

  const Level& level(int j) const { return levels[j - u]; }
  int position_of(int point_id) const;
  // space ids of the finest-level centers
  std::vector<int> leaf_centers() const;

 private:
  friend PartitionTree build_partition_tree(SpacePtr, const std::vector<int>&, double, int,
                                            int);
  mutable std::unordered_map<int, int> pos_;
};

PartitionTree build_partition_tree(SpacePtr space, const std::vector<int>& points, double s,
                                   int u, int v);

// throws Error explaining the first violated invariant
void validate_partition_tree(const PartitionTree& tree);

// Multiscale transport bound between two measures supported on the
// finest-level centers of the tree:
//   sum_{j=u..v} 2 * 4^{-j+2} * d * TV_j^{1/p},
// where TV_j is half the l1 distance between the cell-mass vectors of mu
// and nu at level j. Requires d >= diam(point set) and tree.s <= d (the
// cell diameter guarantees are stated in units of s), and u <= 2 so the
// coarsest term dominates a diameter-length move.
struct TreeBoundBreakdown {
  double bound = 0.0;
  std::vector<double> tv;          // per level u..v
  std::vector<double> level_term;  // per level u..v
};
TreeBoundBreakdown tree_transport_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                        const PartitionTree& tree, double p, double d);

// Constructive coupling that realizes the bound: cell-local mass is
// matched in place, surplus rises to the parent cell and is matched
// against deficits there, and whatever reaches the top is matched across
// the coarsest cells. Every entry pairs two leaf centers inside their
// lowest common cell, so the plan cost never exceeds the bound.
TransportPlan tree_transport_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                  const PartitionTree& tree, double p);

// Covering-number curve of a finite point set from one farthest-point
// sweep: radii[m] is the covering radius achieved by the first m+1
// centers, so count(delta) = 1 + #{m : radii[m] > delta} is a valid
// covering-number estimate with count(delta) <= |points|.
class CoveringCurve {
 public:
  static CoveringCurve power_law(double k, double alpha, double diam);
  static CoveringCurve from_radii(std::vector<double> radii, double diam);

  double count(double delta) const;
  double diam() const { return diam_; }
  bool analytic() const { return analytic_; }
  double k() const { return k_; }
  double alpha() const { return alpha_; }

  // integral of count(x)^expo over [a, b]: exact for the step curve,
  // adaptive trapezoid (relative tolerance 1e-6) for the analytic one
  double integral_pow(double a, double b, double expo) const;

 private:
  bool analytic_ = false;
  double k_ = 1.0, alpha_ = 1.0, diam_ = 1.0;
  std::vector<double> radii_;  // nonincreasing
};

CoveringCurve covering_curve(const MetricSpace& space, const std::vector<int>& points);

}  // namespace wrates
