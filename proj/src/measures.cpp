#include "wrates/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace wrates {

std::string to_string(MetricKind k) {
  switch (k) {
    case MetricKind::euclidean: return "euclidean";
    case MetricKind::sup_norm: return "sup_norm";
    case MetricKind::custom_table: return "custom_table";
  }
  return "?";
}

MetricKind metric_kind_from_string(const std::string& s) {
  if (s == "euclidean") return MetricKind::euclidean;
  if (s == "sup_norm") return MetricKind::sup_norm;
  if (s == "custom_table") return MetricKind::custom_table;
  throw ParseError("unknown metric kind: " + s);
}

MetricSpace MetricSpace::points(std::vector<double> coords, int dim, MetricKind kind) {
  if (kind == MetricKind::custom_table)
    throw Error("MetricSpace::points expects a coordinate metric");
  if (dim <= 0) throw DimensionMismatch("point dimension must be positive");
  if (coords.size() % (size_t)dim != 0)
    throw DimensionMismatch("coordinate array length is not a multiple of dim");
  MetricSpace sp;
  sp.n_ = (int)(coords.size() / (size_t)dim);
  sp.dim_ = dim;
  sp.kind_ = kind;
  sp.coords_ = std::move(coords);
  return sp;
}

MetricSpace MetricSpace::from_table(std::vector<double> table, int n) {
  if (n <= 0 || table.size() != (size_t)n * (size_t)n)
    throw DimensionMismatch("distance table must be n*n");
  MetricSpace sp;
  sp.n_ = n;
  sp.dim_ = 0;
  sp.kind_ = MetricKind::custom_table;
  sp.table_ = std::move(table);
  const auto& t = sp.table_;
  for (int i = 0; i < n; ++i) {
    if (t[(size_t)i * n + i] != 0.0)
      throw Error("distance table has nonzero diagonal");
    for (int j = 0; j < i; ++j) {
      double a = t[(size_t)i * n + j], b = t[(size_t)j * n + i];
      if (a < 0.0 || b < 0.0) throw Error("distance table has a negative entry");
      if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a)))
        throw Error("distance table is not symmetric");
    }
  }
  if (n <= kTriangleCheckLimit) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double dij = t[(size_t)i * n + j];
        for (int k = 0; k < n; ++k) {
          double viol = dij - t[(size_t)i * n + k] - t[(size_t)k * n + j];
          if (viol > 1e-9 * std::max(1.0, dij))
            throw Error("distance table violates the triangle inequality");
        }
      }
    sp.triangle_checked_ = true;
  }
  return sp;
}

double MetricSpace::distance(int i, int j) const {
  if (kind_ == MetricKind::custom_table) return table_[(size_t)i * n_ + j];
  const double* a = point(i);
  const double* b = point(j);
  if (kind_ == MetricKind::euclidean) {
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) {
      double d = a[k] - b[k];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double m = 0.0;
  for (int k = 0; k < dim_; ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double MetricSpace::distance_to(int i, const double* q) const {
  if (!has_coords()) throw Error("distance_to needs a coordinate space");
  const double* a = point(i);
  if (kind_ == MetricKind::euclidean) {
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) {
      double d = a[k] - q[k];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double m = 0.0;
  for (int k = 0; k < dim_; ++k) m = std::max(m, std::abs(a[k] - q[k]));
  return m;
}

MetricSpace::DiameterResult MetricSpace::diameter() const {
  std::lock_guard<std::mutex> lock(*diam_mutex_);
  if (diam_cache_) return *diam_cache_;
  DiameterResult r;
  if (n_ <= kExactDiameterLimit) {
    double best = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j) best = std::max(best, distance(i, j));
    r.value = best;
    r.exact = true;
  } else {
    double best = 0.0;
    for (int i = 1; i < n_; ++i) best = std::max(best, distance(0, i));
    r.value = 2.0 * best;
    r.exact = false;
  }
  diam_cache_ = r;
  return r;
}

MetricSpace::DiameterResult MetricSpace::subset_diameter(const std::vector<int>& idx) const {
  DiameterResult r;
  int m = (int)idx.size();
  if (m <= kExactDiameterLimit) {
    double best = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) best = std::max(best, distance(idx[i], idx[j]));
    r.value = best;
    r.exact = true;
  } else {
    double best = 0.0;
    for (int i = 1; i < m; ++i) best = std::max(best, distance(idx[0], idx[i]));
    r.value = 2.0 * best;
    r.exact = false;
  }
  return r;
}

SpacePtr make_space(std::vector<double> coords, int dim, MetricKind kind) {
  return std::make_shared<const MetricSpace>(MetricSpace::points(std::move(coords), dim, kind));
}

SpacePtr make_table_space(std::vector<double> table, int n) {
  return std::make_shared<const MetricSpace>(MetricSpace::from_table(std::move(table), n));
}

DiscreteMeasure::DiscreteMeasure(SpacePtr space, std::vector<int> support,
                                 std::vector<double> weights)
    : space_(std::move(space)), support_(std::move(support)), weights_(std::move(weights)) {
  if (!space_) throw InvalidMeasure("measure needs a space");
  validate();
}

double DiscreteMeasure::total_mass() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

bool DiscreteMeasure::is_probability(double tol) const {
  return std::abs(total_mass() - 1.0) <= tol;
}

void DiscreteMeasure::validate() const {
  if (support_.size() != weights_.size())
    throw InvalidMeasure("support / weight size mismatch");
  const int n = space_->size();
  for (int idx : support_)
    if (idx < 0 || idx >= n) throw InvalidMeasure("support index out of range");
  for (double w : weights_)
    if (!(w >= 0.0)) throw InvalidMeasure("negative or NaN weight");
  std::vector<int> s(support_);
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end())
    throw InvalidMeasure("duplicate support index");
}

DiscreteMeasure DiscreteMeasure::normalized() const {
  double m = total_mass();
  if (m <= 0.0) throw InvalidMeasure("cannot normalize a zero measure");
  std::vector<double> w(weights_);
  for (double& x : w) x /= m;
  return DiscreteMeasure(space_, support_, std::move(w));
}

DiscreteMeasure DiscreteMeasure::without_zero_atoms(double tol) const {
  std::vector<int> s;
  std::vector<double> w;
  for (size_t i = 0; i < weights_.size(); ++i)
    if (weights_[i] > tol) {
      s.push_back(support_[i]);
      w.push_back(weights_[i]);
    }
  return DiscreteMeasure(space_, std::move(s), std::move(w));
}

DiscreteMeasure uniform_on(SpacePtr space) {
  int n = space->size();
  std::vector<int> s(n);
  std::vector<double> w(n, 1.0 / n);
  for (int i = 0; i < n; ++i) s[i] = i;
  return DiscreteMeasure(std::move(space), std::move(s), std::move(w));
}

Sampler Sampler::uniform_cube_sampler(int dim, uint64_t seed, double lo, double hi) {
  Sampler s;
  s.kind = Kind::uniform_cube;
  s.dim = dim;
  s.seed = seed;
  s.cube_lo = lo;
  s.cube_hi = hi;
  return s;
}

Sampler Sampler::gaussian_iid_sampler(int dim, uint64_t seed, std::vector<double> sigma) {
  Sampler s;
  s.kind = Kind::gaussian_iid;
  s.dim = dim;
  s.seed = seed;
  s.gauss_sigma = std::move(sigma);
  return s;
}

Sampler Sampler::finite_support_sampler(DiscreteMeasure base, uint64_t seed) {
  Sampler s;
  s.kind = Kind::finite_support;
  s.seed = seed;
  s.base = std::move(base);
  return s;
}

namespace {

int draw_index(const std::vector<double>& cdf, Rng& rng) {
  double u = rng.uniform01() * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  int k = (int)(it - cdf.begin());
  if (k >= (int)cdf.size()) k = (int)cdf.size() - 1;
  return k;
}

}  // namespace

DiscreteMeasure sample_empirical(const Sampler& s, int n) {
  return sample_empirical(s, n, s.seed);
}

DiscreteMeasure sample_empirical(const Sampler& s, int n, uint64_t seed) {
  if (n <= 0) throw InvalidMeasure("sample size must be positive");
  Rng rng(seed);

  if (s.kind == Sampler::Kind::finite_support) {
    if (!s.base) throw Error("finite_support sampler has no base measure");
    const DiscreteMeasure& base = *s.base;
    std::vector<double> cdf(base.size());
    double acc = 0.0;
    for (int i = 0; i < base.size(); ++i) {
      acc += base.weights()[i];
      cdf[i] = acc;
    }
    if (acc <= 0.0) throw InvalidMeasure("base measure has zero mass");
    std::vector<int> draws(n);
    for (int i = 0; i < n; ++i) draws[i] = base.support()[draw_index(cdf, rng)];

    const MetricSpace& bs = base.space();
    if (bs.has_coords()) {
      std::vector<double> coords((size_t)n * bs.dim());
      for (int i = 0; i < n; ++i) {
        const double* p = bs.point(draws[i]);
        std::copy(p, p + bs.dim(), coords.begin() + (size_t)i * bs.dim());
      }
      auto sp = make_space(std::move(coords), bs.dim(), bs.kind());
      std::vector<int> sup(n);
      for (int i = 0; i < n; ++i) sup[i] = i;
      return DiscreteMeasure(sp, std::move(sup), std::vector<double>(n, 1.0 / n));
    }
    // table space: merged representation (counts / n)
    std::vector<int> count(bs.size(), 0);
    for (int d : draws) ++count[d];
    std::vector<int> sup;
    std::vector<double> w;
    for (int i = 0; i < bs.size(); ++i)
      if (count[i] > 0) {
        sup.push_back(i);
        w.push_back((double)count[i] / n);
      }
    return DiscreteMeasure(base.space_ptr(), std::move(sup), std::move(w));
  }

  const int dim = s.dim;
  std::vector<double> coords((size_t)n * dim);
  MetricKind kind = MetricKind::euclidean;
  if (s.kind == Sampler::Kind::uniform_cube) {
    for (size_t i = 0; i < coords.size(); ++i) coords[i] = rng.uniform(s.cube_lo, s.cube_hi);
  } else if (s.kind == Sampler::Kind::gaussian_iid) {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < dim; ++k) {
        double sig = s.gauss_sigma.empty() ? 1.0 : s.gauss_sigma[k];
        coords[(size_t)i * dim + k] = sig * rng.normal();
      }
  } else {
    if (!s.custom_draw) throw Error("custom sampler has no draw function");
    kind = s.custom_metric;
    for (int i = 0; i < n; ++i) s.custom_draw(rng, coords.data() + (size_t)i * dim);
  }
  auto sp = make_space(std::move(coords), dim, kind);
  std::vector<int> sup(n);
  for (int i = 0; i < n; ++i) sup[i] = i;
  return DiscreteMeasure(sp, std::move(sup), std::vector<double>(n, 1.0 / n));
}

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

void write_measure_csv(const std::string& path, const DiscreteMeasure& m) {
  const MetricSpace& sp = m.space();
  if (!sp.has_coords()) throw Error("CSV export supports coordinate spaces only");
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "# metric=" << to_string(sp.kind()) << "\n";
  for (int k = 0; k < sp.dim(); ++k) out << "x" << (k + 1) << ",";
  out << "weight\n";
  for (int i = 0; i < m.size(); ++i) {
    const double* p = sp.point(m.support()[i]);
    for (int k = 0; k < sp.dim(); ++k) out << fmt_g17(p[k]) << ",";
    out << fmt_g17(m.weights()[i]) << "\n";
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

DiscreteMeasure read_measure_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  MetricKind kind = MetricKind::euclidean;
  bool header_seen = false;
  int dim = -1;
  std::vector<double> coords;
  std::vector<double> weights;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto pos = line.find("metric=");
      if (pos != std::string::npos) {
        std::string v = line.substr(pos + 7);
        while (!v.empty() && (v.back() == '\r' || v.back() == ' ')) v.pop_back();
        kind = metric_kind_from_string(v);
      }
      continue;
    }
    auto cells = split_csv(line);
    if (!header_seen) {
      header_seen = true;
      if (cells.empty() || cells.back() != "weight")
        throw ParseError(path + ": header must end with 'weight'");
      dim = (int)cells.size() - 1;
      if (dim <= 0) throw ParseError(path + ": no coordinate columns");
      continue;
    }
    if ((int)cells.size() != dim + 1)
      throw ParseError(path + ": row has wrong number of cells");
    try {
      for (int k = 0; k < dim; ++k) coords.push_back(std::stod(cells[k]));
      weights.push_back(std::stod(cells[dim]));
    } catch (const std::exception&) {
      throw ParseError(path + ": non-numeric cell");
    }
  }
  if (!header_seen) throw ParseError(path + ": empty file");
  auto sp = make_space(std::move(coords), dim, kind);
  std::vector<int> sup((size_t)weights.size());
  for (size_t i = 0; i < sup.size(); ++i) sup[i] = (int)i;
  return DiscreteMeasure(sp, std::move(sup), std::move(weights));
}

}  // namespace wrates
