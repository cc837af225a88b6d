// Acceptance gate: `acceptance <criterion> <workdir>`. Prints one
// "criterion N PASS/FAIL: ..." line per criterion covered by the
// invocation (4 also covers 5, 6 also covers 7) and exits nonzero if
// any printed criterion failed. Criterion 11 expects the artifacts of
// 4, 6 and 9 under <workdir>/outputs.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "wrates/experiments.hpp"
#include "wrates/gaussian.hpp"
#include "wrates/markov.hpp"
#include "wrates/multiscale.hpp"
#include "wrates/transport.hpp"

using namespace wrates;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kOracleRelTol = 1e-9;       // criterion 1
constexpr double kSandwichSlack = 1e-9;      // criterion 2, relative
constexpr double kSlopeLo = -0.45;           // criterion 4
constexpr double kSlopeHi = -0.25;
constexpr double kLambdaFitTol = 1e-6;       // criterion 6
constexpr double kRatioSlopeBand = 0.15;     // criterion 9
constexpr double kQuantizerTol = 0.01;       // criterion 10
constexpr int kMarkovStates = 16;

struct Line {
  int id;
  bool pass;
  std::string detail;
};

void emit(std::vector<Line>& lines, int id, bool pass, std::string detail) {
  lines.push_back({id, pass, std::move(detail)});
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

DiscreteMeasure random_measure(Rng& rng, const SpacePtr& sp, int max_atoms) {
  int n = sp->size();
  int k = 1 + (int)rng.uniform_index(std::min(max_atoms, n));
  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i;
  for (int i = 0; i < k; ++i) std::swap(ids[i], ids[i + rng.uniform_index(n - i)]);
  ids.resize(k);
  std::vector<double> w(k);
  double tot = 0.0;
  for (double& x : w) tot += x = 0.05 + rng.uniform01();
  for (double& x : w) x /= tot;
  return DiscreteMeasure(sp, ids, w);
}

SpacePtr random_space(Rng& rng, int n, int dim, MetricKind kind) {
  std::vector<double> coords(n * dim);
  for (double& c : coords) c = rng.uniform01();
  return make_space(std::move(coords), dim, kind);
}

const BoundResult* find_bound(const RatePoint& pt, const std::string& name) {
  for (const auto& [k, b] : pt.bounds)
    if (k == name) return &b;
  return nullptr;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------- shared experiment configs (criterion 11 rebuilds these) ----------

json iid_rate_config(const fs::path& workdir) {
  return {{"scenario", "iid_cube"},
          {"p", 1.0},
          {"n_grid", {64, 128, 256, 512, 1024, 2048, 4096}},
          {"replicates", 200},
          {"seed", 20260814},
          {"n_reference", 20000},
          {"output_root", (workdir / "outputs").string()},
          {"iid", {{"dim", 3}}}};
}

json markov_rate_config(const fs::path& workdir) {
  return {{"scenario", "markov_finite"},
          {"p", 2.0},
          {"n_grid", {100, 1000, 10000}},
          {"replicates", 200},
          {"seed", 1009},
          {"output_root", (workdir / "outputs").string()},
          {"markov",
           {{"states", kMarkovStates}, {"proposal_width", 1}, {"target_width", 0.25},
            {"r", 1.0}, {"c", 1.0}}}};
}

json gaussian_rate_config(const fs::path& workdir) {
  return {{"scenario", "gaussian_kl"},
          {"p", 2.0},
          {"n_grid", {16, 32, 64, 128, 256, 512, 1024}},
          {"replicates", 8},
          {"seed", 424242},
          {"n_reference", 10000},
          {"output_root", (workdir / "outputs").string()},
          {"gaussian",
           {{"basis", 64}, {"grid", 64}, {"smallball_mc", 400000},
            {"quantizer_iterations", 30}}}};
}

MarkovModel acceptance_chain() {
  std::vector<double> coords(kMarkovStates);
  for (int i = 0; i < kMarkovStates; ++i) coords[i] = (double)i / (kMarkovStates - 1);
  auto states = make_space(std::move(coords), 1, MetricKind::euclidean);
  std::vector<double> target(kMarkovStates);
  for (int i = 0; i < kMarkovStates; ++i) {
    double x = states->point(i)[0] - 0.5;
    target[i] = std::exp(-x * x / (2.0 * 0.25 * 0.25));
  }
  return metropolis_kernel(states, target, 1);
}

// ---------- criteria ----------

// solver cross-checks on random small instances
bool crit_oracles(std::string& detail) {
  Rng rng(0xACC01ULL);
  const double ps[] = {1.0, 1.5, 2.0};
  double worst = 0.0;
  int checked = 0;
  for (int inst = 0; inst < 500; ++inst) {
    int dim = 1 + inst % 3;
    double p = ps[(inst / 3) % 3];
    MetricKind kind = inst % 2 ? MetricKind::sup_norm : MetricKind::euclidean;
    auto sp = random_space(rng, 16, dim, kind);
    auto mu = random_measure(rng, sp, 8);
    auto nu = random_measure(rng, sp, 8);
    double a = exact_wp(mu, nu, p).value;
    double b = brute_force_wp(mu, nu, p);
    double rel = std::abs(a - b) / std::max({1.0, a, b});
    worst = std::max(worst, rel);
    if (dim == 1) {
      double c = wp_1d(mu, nu, p);
      worst = std::max(worst, std::abs(a - c) / std::max({1.0, a, c}));
    }
    ++checked;
  }
  detail = std::to_string(checked) + " instances, worst relative gap " + fmt(worst) +
           " (tol " + fmt(kOracleRelTol) + ")";
  return worst <= kOracleRelTol;
}

// exact <= constructive plan cost <= analytic tree bound
bool crit_sandwich(std::string& detail) {
  Rng rng(0xACC02ULL);
  int violations = 0, checked = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 1000; ++inst) {
    int n = 50 + (int)rng.uniform_index(151);
    int dim = 1 + inst % 3;
    MetricKind kind = inst % 2 ? MetricKind::sup_norm : MetricKind::euclidean;
    auto sp = random_space(rng, n, dim, kind);
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    double p = inst % 5 < 3 ? 1.0 : 2.0;
    int u = inst % 3;
    int v = u + 1 + inst % 3;
    double d = sp->diameter().value;
    auto tree = build_partition_tree(sp, ids, d, u, v);
    auto leaves_space = sp;
    auto leaves = tree.leaf_centers();
    auto pick = [&](uint64_t) {
      int k = 1 + (int)rng.uniform_index((int)leaves.size());
      std::vector<int> sub(leaves);
      for (int i = 0; i < k; ++i) std::swap(sub[i], sub[i + rng.uniform_index((int)sub.size() - i)]);
      sub.resize(k);
      std::vector<double> w(k);
      double tot = 0.0;
      for (double& x : w) tot += x = 0.05 + rng.uniform01();
      for (double& x : w) x /= tot;
      return DiscreteMeasure(leaves_space, sub, w);
    };
    auto mu = pick(0), nu = pick(1);
    double bound = tree_transport_bound(mu, nu, tree, p, d).bound;
    double plan_cost = tree_transport_plan(mu, nu, tree, p).cost;
    double exact = exact_wp(mu, nu, p).value;
    double slack = kSandwichSlack * std::max(1.0, d);
    if (exact > plan_cost + slack || plan_cost > bound + slack) ++violations;
    worst = std::max(worst, std::max(exact - plan_cost, plan_cost - bound));
    ++checked;
  }
  detail = std::to_string(checked) + " instances, " + std::to_string(violations) +
           " violations, worst margin " + fmt(worst);
  return violations == 0;
}

// nested-partition invariants on random point sets
bool crit_partitions(std::string& detail) {
  Rng rng(0xACC03ULL);
  int violations = 0;
  for (int inst = 0; inst < 200; ++inst) {
    int n = 20 + (int)rng.uniform_index(131);
    int dim = 1 + inst % 3;
    MetricKind kind = inst % 2 ? MetricKind::sup_norm : MetricKind::euclidean;
    auto sp = random_space(rng, n, dim, kind);
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    double s = sp->diameter().value * (0.5 + rng.uniform01());
    int u = inst % 3;
    try {
      auto tree = build_partition_tree(sp, ids, s, u, u + 2);
      validate_partition_tree(tree);
    } catch (const Error&) {
      ++violations;
    }
  }
  detail = "200 point sets, " + std::to_string(violations) + " invariant violations";
  return violations == 0;
}

// shared iid-cube experiment feeding criteria 4 and 5
void crit_iid(const fs::path& workdir, std::vector<Line>& lines) {
  auto cfg = config_from_json(iid_rate_config(workdir));
  RateReport rep;
  try {
    rep = run_experiment(cfg);
  } catch (const std::exception& e) {
    emit(lines, 4, false, std::string("experiment failed: ") + e.what());
    emit(lines, 5, false, std::string("experiment failed: ") + e.what());
    return;
  }

  int dominated = 0, dominated3 = 0, total = (int)rep.points.size();
  for (const auto& pt : rep.points) {
    const BoundResult* fd = find_bound(pt, "finite_dim");
    const BoundResult* in = find_bound(pt, "iid_integral");
    if (fd && fd->applicable && pt.mean <= fd->value) ++dominated;
    if (in && in->applicable && pt.mean + 3.0 * pt.std_error <= in->value) ++dominated3;
  }
  bool slope_ok = rep.fit_valid && rep.fit.slope >= kSlopeLo && rep.fit.slope <= kSlopeHi;
  emit(lines, 4, slope_ok && dominated == total,
       "slope " + fmt(rep.fit.slope) + " in [" + fmt(kSlopeLo) + ", " + fmt(kSlopeHi) +
           "]: " + (slope_ok ? "yes" : "NO") + "; mean <= dimension bound at " +
           std::to_string(dominated) + "/" + std::to_string(total) + " grid points");
  emit(lines, 5, dominated3 == total,
       "mean + 3 stderr <= minimized covering-integral bound at " +
           std::to_string(dominated3) + "/" + std::to_string(total) + " grid points");
}

// shared Markov experiment feeding criteria 6 and 7
void crit_markov(const fs::path& workdir, std::vector<Line>& lines) {
  auto cfg = config_from_json(markov_rate_config(workdir));
  RateReport rep;
  try {
    rep = run_experiment(cfg);
  } catch (const std::exception& e) {
    emit(lines, 6, false, std::string("experiment failed: ") + e.what());
    emit(lines, 7, false, std::string("experiment failed: ") + e.what());
    return;
  }

  int applicable = 0, dominated = 0, total = (int)rep.points.size();
  for (const auto& pt : rep.points) {
    const BoundResult* mk = find_bound(pt, "markov");
    if (!mk || !mk->applicable) continue;
    ++applicable;
    if (pt.mean + 3.0 * pt.std_error <= mk->value) ++dominated;
  }

  MarkovModel model = acceptance_chain();
  SpectralGap gap = spectral_gap_finite(model);
  VarianceDecay vd = check_variance_decay(model, gap.top_eigenfunction, 12);
  double gap_err = std::abs(vd.lambda_fit - gap.lambda);
  bool decay_ok = !vd.degenerate && gap_err <= kLambdaFitTol;

  emit(lines, 6, applicable > 0 && dominated == applicable && decay_ok,
       "mean + 3 stderr <= spectral-gap bound at " + std::to_string(dominated) + "/" +
           std::to_string(applicable) + " applicable points (of " + std::to_string(total) +
           "); |lambda_fit - lambda| = " + fmt(gap_err) + " (tol " + fmt(kLambdaFitTol) +
           ", lambda " + fmt(gap.lambda) + ")");

  Rng rng(0xACC07ULL);
  int combos = 0, violations = 0;
  for (int set = 0; set < 20; ++set) {
    std::vector<int> A;
    while (A.empty() || (int)A.size() == kMarkovStates) {
      A.clear();
      for (int i = 0; i < kMarkovStates; ++i)
        if (rng.uniform01() < 0.5) A.push_back(i);
    }
    for (long n : {100L, 1000L, 10000L}) {
      auto dev = occupation_deviation(model, A, (int)n, 200, 0xD0C5ULL + set * 131 + n,
                                      std::numeric_limits<double>::infinity());
      ++combos;
      if (dev.mean_abs_dev > dev.bound + 3.0 * dev.std_error) ++violations;
    }
  }
  emit(lines, 7, violations == 0,
       std::to_string(combos) + " (set, n) combinations, " + std::to_string(violations) +
           " beyond bound + 3 stderr");
}

// upper-tail exceedance of W2 around its replicate mean vs the
// subgaussian bound, for a scalar and a path-space model
bool crit_concentration(std::string& detail) {
  struct Case {
    const char* name;
    GaussianProcessModel model;
  };
  std::vector<Case> cases;
  cases.push_back({"scalar", GaussianProcessModel::scalar(1.0)});
  cases.push_back({"brownian", GaussianProcessModel::brownian_kl(64, 64)});
  int points = 0, violations = 0;
  std::string note;
  for (size_t ci = 0; ci < cases.size(); ++ci) {
    const auto& c = cases[ci];
    double sig = c.model.sigma_hat();
    for (int n : {25, 50}) {
      uint64_t seed = 0xACC08ULL + 977 * ci + n;
      auto ref = c.model.sample_paths_measure(2000, seed ^ kReferenceSalt);
      std::vector<double> ts;
      for (double f : {0.5, 1.0, 2.0, 4.0}) ts.push_back(f * sig / std::sqrt((double)n));
      try {
        auto rows = concentration_tail(c.model, n, ts, 1000, seed, ref);
        for (const auto& r : rows) {
          ++points;
          if (r.exceed_rate > r.gauss_bound + 3.0 * r.std_error) ++violations;
        }
      } catch (const Error& e) {
        points += 4;
        violations += 1;
        note = std::string(" (") + c.name + " n=" + std::to_string(n) + ": " + e.what() + ")";
      }
    }
  }
  detail = std::to_string(points) + " grid points over 2 models x 2 n x 4 thresholds, " +
           std::to_string(violations) + " exceedances beyond bound + 3 stderr" + note;
  return violations == 0;
}

// path-space rate shape: ratio to the small-ball envelope stays flat and
// the fitted quantizer undercuts the empirical W2 at every n
bool crit_gaussian_rate(const fs::path& workdir, std::string& detail) {
  auto cfg = config_from_json(gaussian_rate_config(workdir));
  RateReport rep;
  try {
    rep = run_experiment(cfg);
  } catch (const std::exception& e) {
    detail = std::string("experiment failed: ") + e.what();
    return false;
  }
  const json& g = rep.extra.at("gaussian");
  if (!g.contains("ratio_fit")) {
    detail = "no ratio fit (fewer than 3 envelope values were computable)";
    return false;
  }
  double slope = g.at("ratio_fit").at("slope").get<double>();
  int rows = 0, quantizer_ok = 0, env_rows = 0;
  for (const auto& row : g.at("quantizer")) {
    ++rows;
    if (row.at("delta_hat").get<double>() <= row.at("mean_w2").get<double>()) ++quantizer_ok;
    if (!row.at("psi_inv_log_n").is_null()) ++env_rows;
  }
  bool slope_ok = std::abs(slope) <= kRatioSlopeBand;
  detail = "ratio slope " + fmt(slope) + " (band +-" + fmt(kRatioSlopeBand) +
           "), envelope computable at " + std::to_string(env_rows) + "/" +
           std::to_string(rows) + " n, quantizer <= empirical W2 at " +
           std::to_string(quantizer_ok) + "/" + std::to_string(rows) + " n";
  return slope_ok && quantizer_ok == rows && rows > 0;
}

// one-center quantizer of the uniform distribution
bool crit_quantizer(std::string& detail) {
  auto sampler = Sampler::uniform_cube_sampler(1, 0xACC10ULL);
  auto samples = sample_empirical(sampler, 10000, 0xACC10AULL);
  auto lq = lloyd_quantizer(samples, 1, 20, 0xACC10BULL);
  double target = 1.0 / (2.0 * std::sqrt(3.0));
  double err = std::abs(lq.delta_hat - target);
  detail = "delta_hat " + fmt(lq.delta_hat) + " vs 1/(2 sqrt 3) = " + fmt(target) +
           ", |diff| = " + fmt(err) + " (tol " + fmt(kQuantizerTol) + ")";
  return err <= kQuantizerTol;
}

// identical seeds reproduce results.csv byte for byte
bool crit_determinism(const fs::path& workdir, std::string& detail) {
  struct Entry {
    const char* name;
    json doc;
  };
  std::vector<Entry> entries;
  entries.push_back({"iid", iid_rate_config(workdir)});
  entries.push_back({"markov", markov_rate_config(workdir)});
  entries.push_back({"gaussian", gaussian_rate_config(workdir)});
  std::string parts;
  bool ok = true;
  for (const auto& e : entries) {
    auto cfg = config_from_json(e.doc);
    fs::path base = workdir / "outputs" / config_hash(cfg);
    if (!fs::exists(base / "results.csv")) {
      parts += std::string(e.name) + ": base run missing (run criteria 4/6/9 first); ";
      ok = false;
      continue;
    }
    int k = 1;
    while (fs::exists(base / ("rerun-" + std::to_string(k)))) ++k;
    fs::path rerun = base / ("rerun-" + std::to_string(k));
    try {
      run_experiment(cfg);
    } catch (const Error&) {
      // domination failures still persist their artifacts
    }
    bool same = fs::exists(rerun / "results.csv") &&
                slurp(rerun / "results.csv") == slurp(base / "results.csv");
    parts += std::string(e.name) + ": " + (same ? "identical" : "DIFFERENT") + "; ";
    ok = ok && same;
  }
  detail = parts;
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <criterion 1-11> <workdir>\n";
    return 64;
  }
  std::string which = argv[1];
  fs::path workdir = argv[2];
  fs::create_directories(workdir);

  std::vector<Line> lines;
  try {
    if (which == "1") {
      std::string d;
      bool ok = crit_oracles(d);
      emit(lines, 1, ok, d);
    } else if (which == "2") {
      std::string d;
      bool ok = crit_sandwich(d);
      emit(lines, 2, ok, d);
    } else if (which == "3") {
      std::string d;
      bool ok = crit_partitions(d);
      emit(lines, 3, ok, d);
    } else if (which == "4") {
      crit_iid(workdir, lines);
    } else if (which == "6") {
      crit_markov(workdir, lines);
    } else if (which == "8") {
      std::string d;
      bool ok = crit_concentration(d);
      emit(lines, 8, ok, d);
    } else if (which == "9") {
      std::string d;
      bool ok = crit_gaussian_rate(workdir, d);
      emit(lines, 9, ok, d);
    } else if (which == "10") {
      std::string d;
      bool ok = crit_quantizer(d);
      emit(lines, 10, ok, d);
    } else if (which == "11") {
      std::string d;
      bool ok = crit_determinism(workdir, d);
      emit(lines, 11, ok, d);
    } else {
      std::cerr << "unknown criterion " << which << "\n";
      return 64;
    }
  } catch (const std::exception& e) {
    emit(lines, std::atoi(which.c_str()), false, std::string("unexpected error: ") + e.what());
  }

  int failures = 0;
  for (const auto& l : lines) {
    std::cout << "criterion " << l.id << (l.pass ? " PASS: " : " FAIL: ") << l.detail << "\n";
    if (!l.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
