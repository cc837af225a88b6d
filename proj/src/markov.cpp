#include "wrates/markov.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace wrates {

void MarkovModel::validate() const {
  const int n = size();
  if (n <= 0) throw Error("markov model needs a state space");
  if (kernel.size() != (size_t)n * n) throw DimensionMismatch("kernel must be n*n");
  if ((int)pi.size() != n || (int)nu.size() != n)
    throw DimensionMismatch("pi and nu must have one entry per state");
  double spi = 0.0, snu = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(pi[i] >= 0.0) || !(nu[i] >= 0.0)) throw Error("pi and nu must be nonnegative");
    spi += pi[i];
    snu += nu[i];
  }
  if (std::abs(spi - 1.0) > 1e-9 || std::abs(snu - 1.0) > 1e-9)
    throw Error("pi and nu must be probability vectors");
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      double v = kernel[(size_t)i * n + j];
      if (!(v >= 0.0)) throw Error("kernel has a negative entry");
      row += v;
    }
    if (std::abs(row - 1.0) > 1e-12) throw Error("kernel row does not sum to 1");
  }
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += pi[i] * kernel[(size_t)i * n + j];
    if (std::abs(s - pi[j]) > 1e-9) throw Error("pi is not invariant for the kernel");
  }
  if (reversible) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) {
        double a = pi[i] * kernel[(size_t)i * n + j];
        double b = pi[j] * kernel[(size_t)j * n + i];
        if (std::abs(a - b) > 1e-12 * std::max(1.0, std::max(a, b)))
          throw Error("detailed balance fails for the reversible flag");
      }
  }
}

MarkovModel MarkovModel::make(SpacePtr states, std::vector<double> kernel,
                              std::vector<double> pi, std::vector<double> nu,
                              bool reversible) {
  MarkovModel m;
  m.states = std::move(states);
  m.kernel = std::move(kernel);
  m.pi = std::move(pi);
  m.nu = std::move(nu);
  m.reversible = reversible;
  m.validate();
  return m;
}

MarkovModel metropolis_kernel(SpacePtr states, const std::vector<double>& target,
                              int proposal_width) {
  if (!states) throw Error("metropolis_kernel needs a state space");
  const int n = states->size();
  if ((int)target.size() != n) throw DimensionMismatch("target table size mismatch");
  if (proposal_width < 1 || proposal_width >= n)
    throw Error("proposal width must lie in [1, n)");
  double tsum = 0.0;
  for (double t : target) {
    if (!(t > 0.0)) throw Error("target density must be strictly positive");
    tsum += t;
  }
  std::vector<double> pi(n);
  for (int i = 0; i < n; ++i) pi[i] = target[i] / tsum;

  const double q = 1.0 / (2.0 * proposal_width);
  std::vector<double> P((size_t)n * n, 0.0);
  for (int i = 0; i < n; ++i) {
    double stay = 0.0;
    for (int off = -proposal_width; off <= proposal_width; ++off) {
      if (off == 0) continue;
      int j = i + off;
      if (j < 0 || j >= n) {
        stay += q;  // off-grid proposal rejected in place
        continue;
      }
      double acc = std::min(1.0, pi[j] / pi[i]);
      P[(size_t)i * n + j] = q * acc;
      stay += q * (1.0 - acc);
    }
    P[(size_t)i * n + i] = stay;
  }
  return MarkovModel::make(std::move(states), std::move(P), pi, pi, true);
}

SpectralGap spectral_gap_finite(const MarkovModel& model) {
  model.validate();
  if (!model.reversible)
    throw Error("spectral_gap_finite requires a reversible chain");
  const int n = model.size();
  for (int i = 0; i < n; ++i)
    if (!(model.pi[i] > 0.0))
      throw Error("spectral decomposition needs pi > 0 everywhere");

  Eigen::MatrixXd S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      S(i, j) = std::sqrt(model.pi[i] / model.pi[j]) * model.kernel[(size_t)i * n + j];
  // pi-symmetrized kernel is symmetric up to roundoff
  Eigen::MatrixXd Ssym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ssym);
  if (es.info() != Eigen::Success) throw ConvergenceFailure("eigensolver failed");

  SpectralGap out;
  out.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::reverse(out.eigenvalues.begin(), out.eigenvalues.end());  // descending
  if (n == 1) {
    out.lambda = 0.0;
    out.beta2 = 0.0;
    out.c_poincare = 1.0;
    out.top_eigenfunction.assign(1, 0.0);
    return out;
  }
  out.beta2 = out.eigenvalues[1];
  int best = 1;
  double lam = 0.0;
  for (int i = 1; i < n; ++i) {
    double b2 = out.eigenvalues[i] * out.eigenvalues[i];
    if (b2 > lam) {
      lam = b2;
      best = i;
    }
  }
  out.lambda = lam;
  out.c_poincare = lam < 1.0 ? 1.0 / (1.0 - lam) : std::numeric_limits<double>::infinity();
  // eigen returns ascending order; column n-1-best matches eigenvalue best
  Eigen::VectorXd phi = es.eigenvectors().col(n - 1 - best);
  out.top_eigenfunction.resize(n);
  for (int i = 0; i < n; ++i) out.top_eigenfunction[i] = phi(i) / std::sqrt(model.pi[i]);
  return out;
}

VarianceDecay check_variance_decay(const MarkovModel& model, const std::vector<double>& f,
                                   int n_max) {
  const int n = model.size();
  if ((int)f.size() != n) throw DimensionMismatch("observable size mismatch");
  if (n_max < 1) throw Error("n_max must be >= 1");

  double mean = 0.0, scale = 0.0;
  for (int i = 0; i < n; ++i) {
    mean += model.pi[i] * f[i];
    scale = std::max(scale, std::abs(f[i]));
  }
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = f[i] - mean;

  VarianceDecay out;
  auto variance = [&](const std::vector<double>& h) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += model.pi[i] * h[i] * h[i];
    return s;
  };
  out.variances.push_back(variance(g));
  if (out.variances[0] <= 1e-24 * std::max(1.0, scale * scale)) {
    out.degenerate = true;
    out.lambda_fit = 0.0;
    out.c_fit = 1.0;
    return out;
  }
  std::vector<double> h(n);
  for (int k = 1; k <= n_max; ++k) {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      const double* row = &model.kernel[(size_t)i * n];
      for (int j = 0; j < n; ++j) s += row[j] * g[j];
      h[i] = s;
    }
    g.swap(h);
    out.variances.push_back(variance(g));
  }
  const double v0 = out.variances[0];
  double lam = 0.0;
  for (int k = 1; k <= n_max; ++k) {
    double vk = out.variances[k];
    if (vk > 0.0) lam = std::max(lam, std::pow(vk / v0, 1.0 / k));
  }
  out.lambda_fit = lam;
  double c = 1.0;
  if (lam > 0.0)
    for (int k = 1; k <= n_max; ++k)
      c = std::max(c, out.variances[k] / (std::pow(lam, k) * v0));
  out.c_fit = c;
  if (model.reversible && out.lambda_fit > spectral_gap_finite(model).lambda + 1e-6)
    throw ConvergenceFailure("fitted decay rate exceeds the spectral value");
  return out;
}

namespace {

int draw_from_row(const double* row, int n, Rng& rng) {
  double u = rng.uniform01();
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    acc += row[j];
    if (u < acc) return j;
  }
  return n - 1;
}

}  // namespace

std::vector<int> run_chain(const MarkovModel& model, int n, uint64_t seed) {
  if (n <= 0) throw Error("trajectory length must be positive");
  const int ns = model.size();
  Rng rng(seed);
  int x = draw_from_row(model.nu.data(), ns, rng);
  std::vector<int> traj(n);
  for (int k = 0; k < n; ++k) {
    x = draw_from_row(&model.kernel[(size_t)x * ns], ns, rng);
    traj[k] = x;
  }
  return traj;
}

DiscreteMeasure occupation_measure(const MarkovModel& model, const std::vector<int>& traj) {
  if (traj.empty()) throw Error("empty trajectory");
  const int ns = model.size();
  std::vector<int> count(ns, 0);
  for (int s : traj) {
    if (s < 0 || s >= ns) throw Error("trajectory state out of range");
    ++count[s];
  }
  std::vector<int> sup;
  std::vector<double> w;
  const double inv = 1.0 / traj.size();
  for (int i = 0; i < ns; ++i)
    if (count[i] > 0) {
      sup.push_back(i);
      w.push_back(count[i] * inv);
    }
  return DiscreteMeasure(model.states, std::move(sup), std::move(w));
}

double nu_over_pi_norm(const MarkovModel& model, double r) {
  if (!(r >= 1.0)) throw Error("norm index r must be >= 1 (inf allowed)");
  const int n = model.size();
  if (std::isinf(r)) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) {
      if (model.nu[i] == 0.0) continue;
      if (!(model.pi[i] > 0.0)) throw Error("nu is not absolutely continuous w.r.t. pi");
      m = std::max(m, model.nu[i] / model.pi[i]);
    }
    return m;
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    if (model.nu[i] == 0.0) continue;
    if (!(model.pi[i] > 0.0)) throw Error("nu is not absolutely continuous w.r.t. pi");
    s += model.pi[i] * std::pow(model.nu[i] / model.pi[i], r);
  }
  return std::pow(s, 1.0 / r);
}

OccupationDeviation occupation_deviation(const MarkovModel& model, const std::vector<int>& A,
                                         int n, int replicates, uint64_t seed, double r) {
  if (A.empty()) throw Error("occupation_deviation needs a nonempty set");
  if (replicates < 2) throw Error("need at least two replicates");
  const int ns = model.size();
  std::vector<char> inA(ns, 0);
  double piA = 0.0;
  for (int s : A) {
    if (s < 0 || s >= ns) throw Error("set state out of range");
    if (inA[s]) throw Error("duplicate state in A");
    inA[s] = 1;
    piA += model.pi[s];
  }

  double sum = 0.0, sumsq = 0.0;
  for (int rep = 0; rep < replicates; ++rep) {
    auto traj = run_chain(model, n, replicate_seed(seed, rep));
    int hits = 0;
    for (int s : traj) hits += inA[s];
    double dev = std::abs((double)hits / n - piA);
    sum += dev;
    sumsq += dev * dev;
  }
  OccupationDeviation out;
  out.pi_A = piA;
  out.mean_abs_dev = sum / replicates;
  double var = std::max(0.0, sumsq / replicates - out.mean_abs_dev * out.mean_abs_dev);
  out.std_error = std::sqrt(var / replicates);

  const double C = 1.0;
  const double lambda = spectral_gap_finite(model).lambda;
  const double norm = nu_over_pi_norm(model, r);
  const double expo = std::isinf(r) ? 0.5 : 0.5 - 0.5 / r;
  out.bound = (1.0 / std::sqrt((double)n)) * 2.0 * std::sqrt(2.0 * C) /
              std::sqrt(1.0 - lambda) * std::sqrt(norm) * std::pow(piA, expo);
  if (out.mean_abs_dev > out.bound + 3.0 * out.std_error)
    throw ConvergenceFailure("occupation deviation " + fmt_g17(out.mean_abs_dev) +
                             " exceeds its bound " + fmt_g17(out.bound) +
                             " beyond 3 standard errors");
  return out;
}

MarkovModel read_kernel_csv(const std::string& path, SpacePtr states_or_null,
                            bool reversible_hint) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(path + ": non-numeric cell");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw ParseError(path + ": expected kernel rows plus a pi row");
  const int n = (int)rows.size() - 1;
  for (const auto& row : rows)
    if ((int)row.size() != n)
      throw ParseError(path + ": expected " + std::to_string(n) + " columns");
  std::vector<double> kernel;
  kernel.reserve((size_t)n * n);
  for (int i = 0; i < n; ++i) kernel.insert(kernel.end(), rows[i].begin(), rows[i].end());
  std::vector<double> pi = rows[n];
  SpacePtr states = states_or_null;
  if (!states) {
    // default state geometry: unit-interval grid
    std::vector<double> coords(n);
    for (int i = 0; i < n; ++i) coords[i] = n == 1 ? 0.0 : (double)i / (n - 1);
    states = make_space(std::move(coords), 1, MetricKind::euclidean);
  }
  return MarkovModel::make(std::move(states), std::move(kernel), pi, pi, reversible_hint);
}

void write_kernel_csv(const std::string& path, const MarkovModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  const int n = model.size();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      out << fmt_g17(model.kernel[(size_t)i * n + j]) << (j + 1 < n ? "," : "\n");
  }
  for (int j = 0; j < n; ++j) out << fmt_g17(model.pi[j]) << (j + 1 < n ? "," : "\n");
}

}  // namespace wrates
