#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "wrates/errors.hpp"
#include "wrates/rng.hpp"

namespace wrates {

enum class MetricKind { euclidean, sup_norm, custom_table };

std::string to_string(MetricKind k);
MetricKind metric_kind_from_string(const std::string& s);

// A finite metric space: either n points in R^dim under the euclidean or
// sup norm, or an explicit n x n distance table. Point storage is row
// major. Distance tables are checked for symmetry, zero diagonal and the
// triangle inequality when n <= kTriangleCheckLimit; above that the check
// is skipped and table_triangle_checked() reports false.
class MetricSpace {
 public:
  static constexpr int kTriangleCheckLimit = 500;
  // diameters of larger spaces are returned as the upper bound
  // 2 * max_i d(x_i, x_pivot) instead of the exact max over pairs
  static constexpr int kExactDiameterLimit = 20000;

  static MetricSpace points(std::vector<double> coords, int dim, MetricKind kind);
  static MetricSpace from_table(std::vector<double> table, int n);

  int size() const { return n_; }
  int dim() const { return dim_; }
  MetricKind kind() const { return kind_; }
  bool has_coords() const { return kind_ != MetricKind::custom_table; }
  const double* point(int i) const { return coords_.data() + (size_t)i * dim_; }
  const std::vector<double>& coords() const { return coords_; }

  double distance(int i, int j) const;
  // distance from point i to an external coordinate vector (coordinate
  // spaces only)
  double distance_to(int i, const double* q) const;

  struct DiameterResult {
    double value = 0.0;
    bool exact = true;
  };
  DiameterResult diameter() const;
  DiameterResult subset_diameter(const std::vector<int>& idx) const;

  bool table_triangle_checked() const { return triangle_checked_; }

 private:
  MetricSpace() = default;

  int n_ = 0;
  int dim_ = 0;
  MetricKind kind_ = MetricKind::euclidean;
  std::vector<double> coords_;  // n_ * dim_, coordinate spaces
  std::vector<double> table_;   // n_ * n_, custom_table
  bool triangle_checked_ = false;

  // unique_ptr keeps the space movable despite the mutex
  mutable std::unique_ptr<std::mutex> diam_mutex_ = std::make_unique<std::mutex>();
  mutable std::optional<DiameterResult> diam_cache_;
};

using SpacePtr = std::shared_ptr<const MetricSpace>;

SpacePtr make_space(std::vector<double> coords, int dim, MetricKind kind);
SpacePtr make_table_space(std::vector<double> table, int n);

// Finitely supported nonnegative measure on a MetricSpace. Support
// indices are distinct; coincident sample points are represented as
// distinct space points with equal coordinates.
class DiscreteMeasure {
 public:
  DiscreteMeasure(SpacePtr space, std::vector<int> support, std::vector<double> weights);

  const MetricSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  const std::vector<int>& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  int size() const { return (int)support_.size(); }

  double total_mass() const;
  bool is_probability(double tol = 1e-9) const;
  // throws InvalidMeasure on violated invariants
  void validate() const;

  DiscreteMeasure normalized() const;
  // drops atoms with weight <= tol (keeps at least nothing; an all-zero
  // measure comes back empty)
  DiscreteMeasure without_zero_atoms(double tol = 0.0) const;

 private:
  SpacePtr space_;
  std::vector<int> support_;
  std::vector<double> weights_;
};

// uniform measure on all points of a space
DiscreteMeasure uniform_on(SpacePtr space);

struct Sampler {
  enum class Kind { uniform_cube, gaussian_iid, finite_support, custom };

  Kind kind = Kind::uniform_cube;
  uint64_t seed = 0;

  // uniform_cube / gaussian_iid
  int dim = 1;
  double cube_lo = 0.0, cube_hi = 1.0;
  std::vector<double> gauss_sigma;  // per-coordinate std devs; empty = all 1

  // finite_support: draws indices from `base` by inverse CDF
  std::optional<DiscreteMeasure> base;

  // custom: fills a dim-long coordinate buffer
  std::function<void(Rng&, double*)> custom_draw;
  MetricKind custom_metric = MetricKind::euclidean;

  static Sampler uniform_cube_sampler(int dim, uint64_t seed, double lo = 0.0, double hi = 1.0);
  static Sampler gaussian_iid_sampler(int dim, uint64_t seed, std::vector<double> sigma = {});
  static Sampler finite_support_sampler(DiscreteMeasure base, uint64_t seed);
};

// n independent draws, each atom weight exactly 1/n. Coordinate-space
// samplers return a fresh space with n (possibly coincident) points. A
// finite_support sampler over a distance-table space cannot duplicate
// table rows, so there the result lives on the base space with weights
// count/n (same measure, merged representation).
DiscreteMeasure sample_empirical(const Sampler& s, int n);
DiscreteMeasure sample_empirical(const Sampler& s, int n, uint64_t seed);

// CSV round trip for coordinate-space measures.
// Line 1: "# metric=<euclidean|sup_norm>"; line 2: "x1,...,xd,weight";
// then one row per atom. Doubles are written with %.17g.
void write_measure_csv(const std::string& path, const DiscreteMeasure& m);
DiscreteMeasure read_measure_csv(const std::string& path);

// %.17g formatting used everywhere a double lands in a file, so reruns
// are byte-identical
std::string fmt_g17(double v);

}  // namespace wrates
