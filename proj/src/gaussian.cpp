#include "wrates/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wrates/transport.hpp"

namespace wrates {

GaussianProcessModel GaussianProcessModel::brownian_kl(int n_basis, int n_grid) {
  if (n_basis < 1 || n_grid < 1) throw Error("brownian_kl needs n_basis, n_grid >= 1");
  GaussianProcessModel m;
  m.K_ = n_basis;
  m.G_ = n_grid;
  m.grid_.resize(n_grid);
  for (int g = 0; g < n_grid; ++g) m.grid_[g] = (double)(g + 1) / n_grid;
  m.basis_.resize((size_t)n_basis * n_grid);
  for (int k = 0; k < n_basis; ++k) {
    double freq = (k + 0.5) * M_PI;
    for (int g = 0; g < n_grid; ++g)
      m.basis_[(size_t)k * n_grid + g] = std::sqrt(2.0) * std::sin(freq * m.grid_[g]) / freq;
  }
  double vmax = 0.0;
  for (int g = 0; g < n_grid; ++g) {
    double v = 0.0;
    for (int k = 0; k < n_basis; ++k) {
      double b = m.basis_[(size_t)k * n_grid + g];
      v += b * b;
    }
    vmax = std::max(vmax, v);
  }
  m.sigma_hat_ = std::sqrt(vmax);
  return m;
}

GaussianProcessModel GaussianProcessModel::scalar(double sigma) {
  if (!(sigma > 0.0)) throw Error("scalar model needs sigma > 0");
  GaussianProcessModel m;
  m.K_ = 1;
  m.G_ = 1;
  m.grid_ = {1.0};
  m.basis_ = {sigma};
  m.sigma_hat_ = sigma;
  return m;
}

std::vector<double> GaussianProcessModel::sample_path(Rng& rng) const {
  std::vector<double> path(G_, 0.0);
  for (int k = 0; k < K_; ++k) {
    double z = rng.normal();
    const double* row = &basis_[(size_t)k * G_];
    for (int g = 0; g < G_; ++g) path[g] += z * row[g];
  }
  return path;
}

std::vector<double> GaussianProcessModel::sample_path(uint64_t seed) const {
  Rng rng(seed);
  return sample_path(rng);
}

DiscreteMeasure GaussianProcessModel::sample_paths_measure(int n, uint64_t seed) const {
  if (n <= 0) throw Error("sample size must be positive");
  Rng rng(seed);
  std::vector<double> coords((size_t)n * G_);
  for (int i = 0; i < n; ++i) {
    auto path = sample_path(rng);
    std::copy(path.begin(), path.end(), coords.begin() + (size_t)i * G_);
  }
  auto sp = make_space(std::move(coords), G_, MetricKind::sup_norm);
  std::vector<int> sup(n);
  std::iota(sup.begin(), sup.end(), 0);
  return DiscreteMeasure(sp, std::move(sup), std::vector<double>(n, 1.0 / n));
}

namespace {

std::vector<double> sup_norms(const GaussianProcessModel& model, int mc, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> sups(mc);
  const int G = model.grid_size();
  for (int i = 0; i < mc; ++i) {
    auto path = model.sample_path(rng);
    double s = 0.0;
    for (int g = 0; g < G; ++g) s = std::max(s, std::abs(path[g]));
    sups[i] = s;
  }
  return sups;
}

SmallBallEstimate estimate_from_hits(double t, long hits, long mc) {
  SmallBallEstimate e;
  e.t = t;
  e.hits = hits;
  e.mc = mc;
  if (hits == 0) {
    e.infinite = true;
    e.psi_hat = std::numeric_limits<double>::infinity();
    e.std_error = std::numeric_limits<double>::infinity();
    return e;
  }
  double ph = (double)hits / mc;
  e.psi_hat = -std::log(ph);
  e.std_error = std::sqrt((1.0 - ph) / ((double)mc * ph));
  return e;
}

}  // namespace

SmallBallEstimate estimate_small_ball(const GaussianProcessModel& model, double t, int mc,
                                      uint64_t seed) {
  if (!(t > 0.0) || mc < 1) throw Error("estimate_small_ball needs t > 0 and mc >= 1");
  auto sups = sup_norms(model, mc, seed);
  long hits = 0;
  for (double s : sups) hits += (s <= t);
  return estimate_from_hits(t, hits, mc);
}

std::vector<SmallBallEstimate> small_ball_table(const GaussianProcessModel& model,
                                                const std::vector<double>& ts, int mc,
                                                uint64_t seed) {
  if (ts.empty() || mc < 1) throw Error("small_ball_table needs thresholds and mc >= 1");
  auto sups = sup_norms(model, mc, seed);
  std::sort(sups.begin(), sups.end());
  std::vector<SmallBallEstimate> out;
  out.reserve(ts.size());
  for (double t : ts) {
    if (!(t > 0.0)) throw Error("thresholds must be positive");
    long hits = std::upper_bound(sups.begin(), sups.end(), t) - sups.begin();
    out.push_back(estimate_from_hits(t, hits, mc));
  }
  return out;
}

DoublingCheck check_doubling(const std::vector<SmallBallEstimate>& table) {
  DoublingCheck out;
  for (const auto& lo : table) {
    if (lo.infinite) continue;
    for (const auto& hi : table) {
      if (hi.infinite || !(hi.psi_hat > 0.0)) continue;
      if (std::abs(hi.t - 2.0 * lo.t) <= 1e-9 * std::max(1.0, 2.0 * lo.t)) {
        out.kappa_hat = std::max(out.kappa_hat, lo.psi_hat / hi.psi_hat);
        out.t0_hat = std::max(out.t0_hat, lo.t);
        ++out.pairs_used;
      }
    }
  }
  if (out.pairs_used == 0) throw Error("small-ball table contains no usable (t, 2t) pair");
  return out;
}

SmallBallFunction small_ball_function_from_table(
    const std::vector<SmallBallEstimate>& table) {
  std::vector<std::pair<double, double>> rows;
  for (const auto& e : table)
    if (!e.infinite) rows.push_back({e.t, e.psi_hat});
  std::sort(rows.begin(), rows.end());
  std::vector<double> ts, vals;
  for (auto& [t, v] : rows) {
    // enforce monotonicity against Monte Carlo jitter
    if (!vals.empty() && v > vals.back()) v = vals.back();
    ts.push_back(t);
    vals.push_back(v);
  }
  if (ts.size() < 2) throw Error("not enough finite small-ball estimates for a table");
  return SmallBallFunction::from_table(std::move(ts), std::move(vals));
}

std::vector<ConcentrationResult> concentration_tail(const GaussianProcessModel& model, int n,
                                                    const std::vector<double>& ts,
                                                    int replicates, uint64_t seed,
                                                    const DiscreteMeasure& ref) {
  if (replicates < 2) throw Error("need at least two replicates");
  std::vector<double> w2(replicates);
  for (int rep = 0; rep < replicates; ++rep) {
    auto ln = model.sample_paths_measure(n, replicate_seed(seed, rep));
    w2[rep] = exact_wp(ln, ref, 2.0).value;
  }
  double mean = 0.0;
  for (double w : w2) mean += w;
  mean /= replicates;

  const double s2 = model.sigma_hat() * model.sigma_hat();
  std::vector<ConcentrationResult> out;
  out.reserve(ts.size());
  for (double t : ts) {
    ConcentrationResult r;
    r.t = t;
    r.mean_w2 = mean;
    long exceed = 0;
    for (double w : w2) exceed += (w >= mean + t);
    r.exceed_rate = (double)exceed / replicates;
    r.std_error = std::sqrt(r.exceed_rate * (1.0 - r.exceed_rate) / replicates);
    r.gauss_bound = std::exp(-(double)n * t * t / (2.0 * s2));
    if (r.exceed_rate > r.gauss_bound + 3.0 * r.std_error)
      throw ConvergenceFailure("exceedance rate " + fmt_g17(r.exceed_rate) +
                               " above the concentration bound " + fmt_g17(r.gauss_bound) +
                               " beyond 3 standard errors at t = " + fmt_g17(t));
    out.push_back(r);
  }
  return out;
}

ConcentrationResult concentration_tail(const GaussianProcessModel& model, int n, double t,
                                       int replicates, uint64_t seed, int n_ref) {
  auto ref = model.sample_paths_measure(n_ref, seed ^ 0xA5A5A5A5DEADBEEFULL);
  return concentration_tail(model, n, std::vector<double>{t}, replicates, seed, ref)[0];
}

// -------- Lloyd quantizer --------

namespace {

struct Points {
  const MetricSpace* sp;
  std::vector<int> ids;
  std::vector<double> w;
  int dim;
};

double point_center_dist(const Points& pts, int i, const std::vector<double>& centers,
                         int c) {
  const double* x = pts.sp->point(pts.ids[i]);
  const double* y = &centers[(size_t)c * pts.dim];
  if (pts.sp->kind() == MetricKind::euclidean) {
    double s = 0.0;
    for (int k = 0; k < pts.dim; ++k) {
      double d = x[k] - y[k];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double m = 0.0;
  for (int k = 0; k < pts.dim; ++k) m = std::max(m, std::abs(x[k] - y[k]));
  return m;
}

}  // namespace

LloydResult lloyd_quantizer(const DiscreteMeasure& samples, int n_centers, int iterations,
                            uint64_t seed) {
  const MetricSpace& sp = samples.space();
  if (!sp.has_coords()) throw Error("lloyd_quantizer needs a coordinate space");
  const int ns = samples.size();
  if (n_centers < 1 || n_centers > ns)
    throw Error("number of centers must lie in [1, sample count]");
  if (iterations < 1) throw Error("need at least one iteration");

  Points pts{&sp, samples.support(), samples.weights(), sp.dim()};
  const int dim = pts.dim;
  double total = samples.total_mass();
  if (!(total > 0.0)) throw InvalidMeasure("zero sample measure");

  std::vector<double> centers((size_t)n_centers * dim);
  if (dim == 1) {
    // quantile init on the sorted sample
    std::vector<int> order(ns);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return sp.point(pts.ids[a])[0] < sp.point(pts.ids[b])[0];
    });
    double acc = 0.0;
    size_t oi = 0;
    for (int c = 0; c < n_centers; ++c) {
      double target = total * (c + 0.5) / n_centers;
      while (oi + 1 < order.size() && acc + pts.w[order[oi]] < target)
        acc += pts.w[order[oi++]];
      centers[c] = sp.point(pts.ids[order[oi]])[0];
    }
  } else {
    // farthest-point init from a seeded start
    Rng rng(seed);
    int first = (int)rng.uniform_index(ns);
    std::copy_n(sp.point(pts.ids[first]), dim, centers.begin());
    std::vector<double> dist(ns);
    for (int i = 0; i < ns; ++i) dist[i] = point_center_dist(pts, i, centers, 0);
    for (int c = 1; c < n_centers; ++c) {
      int far = 0;
      for (int i = 1; i < ns; ++i)
        if (dist[i] > dist[far]) far = i;
      std::copy_n(sp.point(pts.ids[far]), dim, centers.begin() + (size_t)c * dim);
      for (int i = 0; i < ns; ++i)
        dist[i] = std::min(dist[i], point_center_dist(pts, i, centers, c));
    }
  }

  std::vector<int> assign(ns, 0);
  std::vector<double> mass(n_centers, 0.0);
  double energy = 0.0;
  auto assign_all = [&]() {
    energy = 0.0;
    std::fill(mass.begin(), mass.end(), 0.0);
    for (int i = 0; i < ns; ++i) {
      int best = 0;
      double bd = point_center_dist(pts, i, centers, 0);
      for (int c = 1; c < n_centers; ++c) {
        double d = point_center_dist(pts, i, centers, c);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      assign[i] = best;
      mass[best] += pts.w[i];
      energy += pts.w[i] * bd * bd;
    }
  };

  assign_all();
  int iters = 0;
  for (int it = 0; it < iterations; ++it) {
    ++iters;
    // update step
    if (sp.kind() == MetricKind::euclidean) {
      std::vector<double> acc((size_t)n_centers * dim, 0.0);
      std::vector<double> wsum(n_centers, 0.0);
      for (int i = 0; i < ns; ++i) {
        const double* x = sp.point(pts.ids[i]);
        double* a = &acc[(size_t)assign[i] * dim];
        for (int k = 0; k < dim; ++k) a[k] += pts.w[i] * x[k];
        wsum[assign[i]] += pts.w[i];
      }
      for (int c = 0; c < n_centers; ++c)
        if (wsum[c] > 0.0)
          for (int k = 0; k < dim; ++k) centers[(size_t)c * dim + k] = acc[(size_t)c * dim + k] / wsum[c];
    } else {
      // weighted medoid per cluster keeps the objective monotone for an
      // arbitrary metric
      std::vector<std::vector<int>> clusters(n_centers);
      for (int i = 0; i < ns; ++i) clusters[assign[i]].push_back(i);
      for (int c = 0; c < n_centers; ++c) {
        const auto& cl = clusters[c];
        if (cl.empty()) continue;
        int best = cl[0];
        double bcost = std::numeric_limits<double>::infinity();
        for (int cand : cl) {
          double cost = 0.0;
          for (int other : cl) {
            double d = sp.distance(pts.ids[cand], pts.ids[other]);
            cost += pts.w[other] * d * d;
            if (cost >= bcost) break;
          }
          if (cost < bcost) {
            bcost = cost;
            best = cand;
          }
        }
        std::copy_n(sp.point(pts.ids[best]), dim, centers.begin() + (size_t)c * dim);
      }
    }

    double prev = energy;
    assign_all();
    if (energy > prev * (1.0 + 1e-9) + 1e-30)
      throw ConvergenceFailure("quantizer objective increased across an iteration");

    // revive empty clusters at the current farthest sample point
    bool revived = false;
    for (int c = 0; c < n_centers; ++c) {
      if (mass[c] > 0.0) continue;
      int far = 0;
      double fd = -1.0;
      for (int i = 0; i < ns; ++i) {
        double d = point_center_dist(pts, i, centers, assign[i]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      std::copy_n(sp.point(pts.ids[far]), dim, centers.begin() + (size_t)c * dim);
      revived = true;
    }
    if (revived) assign_all();
    if (!revived && energy >= prev * (1.0 - 1e-12)) break;
  }

  // quantized measure on the nonempty centers
  std::vector<double> qcoords;
  std::vector<double> qw;
  for (int c = 0; c < n_centers; ++c)
    if (mass[c] > 0.0) {
      qcoords.insert(qcoords.end(), centers.begin() + (size_t)c * dim,
                     centers.begin() + (size_t)(c + 1) * dim);
      qw.push_back(mass[c] / total);
    }
  auto qsp = make_space(std::move(qcoords), dim, sp.kind());
  std::vector<int> qsup((size_t)qw.size());
  std::iota(qsup.begin(), qsup.end(), 0);
  return LloydResult{std::move(centers), std::move(mass), std::sqrt(energy / total), iters,
                     DiscreteMeasure(qsp, std::move(qsup), std::move(qw))};
}

QuantizerComparison empirical_vs_quantizer(const GaussianProcessModel& model, int n,
                                           uint64_t seed, const DiscreteMeasure& ref,
                                           const SmallBallFunction& psi,
                                           int quantizer_iterations) {
  QuantizerComparison out;
  out.n = n;
  auto ln = model.sample_paths_measure(n, seed);
  out.w2_empirical = exact_wp(ln, ref, 2.0).value;
  auto lloyd = lloyd_quantizer(ref, n, quantizer_iterations, seed ^ 0x51ED270B0BADF00DULL);
  out.delta_hat = lloyd.delta_hat;
  out.psi_inv_log_n = psi.inverse(std::log((double)n));
  // the empirical measure is itself a feasible n-point quantizer, so the
  // fitted quantizer should not do worse
  if (out.delta_hat > out.w2_empirical * (1.0 + 1e-9) + 1e-12)
    throw ConvergenceFailure("quantizer error exceeds the empirical-measure distance");
  return out;
}

}  // namespace wrates
