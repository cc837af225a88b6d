#include "wrates/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "wrates/gaussian.hpp"
#include "wrates/markov.hpp"
#include "wrates/svg.hpp"
#include "wrates/transport.hpp"

namespace wrates {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::iid_cube: return "iid_cube";
    case Scenario::iid_custom: return "iid_custom";
    case Scenario::markov_finite: return "markov_finite";
    case Scenario::gaussian_kl: return "gaussian_kl";
  }
  throw Error("unknown scenario");
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "iid_cube") return Scenario::iid_cube;
  if (s == "iid_custom") return Scenario::iid_custom;
  if (s == "markov_finite") return Scenario::markov_finite;
  if (s == "gaussian_kl") return Scenario::gaussian_kl;
  throw ParseError("unknown scenario '" + s + "'");
}

// ---------- config parsing ----------

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

json parse_toml_scalar(const std::string& raw) {
  std::string v = trim(raw);
  if (v.empty()) throw ParseError("empty value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw ParseError("unterminated string: " + v);
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    size_t used = 0;
    if (v.find_first_of(".eE") == std::string::npos &&
        v.find("inf") == std::string::npos && v.find("nan") == std::string::npos) {
      long long iv = std::stoll(v, &used);
      if (used == v.size()) return iv;
    }
    double dv = std::stod(v, &used);
    if (used == v.size()) return dv;
  } catch (const std::exception&) {
  }
  throw ParseError("cannot parse value '" + v + "'");
}

std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

}  // namespace

json parse_toml_subset(const std::string& text) {
  json root = json::object();
  json* cur = &root;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("bad section header at line " + std::to_string(lineno));
      std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ParseError("empty section name at line " + std::to_string(lineno));
      cur = &root;
      size_t start = 0;
      while (true) {
        size_t dot = name.find('.', start);
        std::string part = name.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) throw ParseError("bad section name at line " + std::to_string(lineno));
        if (!cur->contains(part)) (*cur)[part] = json::object();
        cur = &(*cur)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
      }
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value at line " + std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key at line " + std::to_string(lineno));
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']') throw ParseError("unterminated array at line " + std::to_string(lineno));
      json arr = json::array();
      std::string body = val.substr(1, val.size() - 2);
      std::string item;
      std::istringstream items(body);
      while (std::getline(items, item, ',')) {
        if (trim(item).empty()) continue;
        arr.push_back(parse_toml_scalar(item));
      }
      (*cur)[key] = std::move(arr);
    } else {
      (*cur)[key] = parse_toml_scalar(val);
    }
  }
  return root;
}

namespace {

// strict key lookup: unknown keys are typos we refuse to ignore
void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ParseError("unknown config key '" + where + it.key() + "'");
  }
}

template <class T>
T num_or(const json& j, const char* key, T dflt) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number()) throw ParseError(std::string("config key '") + key + "' must be a number");
  return v.get<T>();
}

std::string str_or(const json& j, const char* key, const std::string& dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_string()) throw ParseError(std::string("config key '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

bool bool_or(const json& j, const char* key, bool dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_boolean()) throw ParseError(std::string("config key '") + key + "' must be a boolean");
  return j.at(key).get<bool>();
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("config root must be an object");
  check_keys(doc, "",
             {"scenario", "p", "n_grid", "replicates", "seed", "jobs", "output_root",
              "n_reference", "iid", "bounds", "markov", "gaussian"});
  ExperimentConfig cfg;
  cfg.raw = doc;
  if (!doc.contains("scenario")) throw ParseError("config needs a scenario");
  cfg.scenario = scenario_from_string(doc.at("scenario").get<std::string>());
  cfg.p = num_or(doc, "p", cfg.p);
  if (!doc.contains("n_grid") || !doc.at("n_grid").is_array())
    throw ParseError("config needs an n_grid array");
  for (const auto& v : doc.at("n_grid")) {
    if (!v.is_number_integer()) throw ParseError("n_grid entries must be integers");
    cfg.n_grid.push_back(v.get<long>());
  }
  cfg.replicates = num_or(doc, "replicates", cfg.replicates);
  cfg.seed = num_or<uint64_t>(doc, "seed", cfg.seed);
  cfg.jobs = num_or(doc, "jobs", cfg.jobs);
  cfg.output_root = str_or(doc, "output_root", cfg.output_root);
  cfg.n_reference = num_or(doc, "n_reference", cfg.n_reference);

  if (doc.contains("iid")) {
    const json& j = doc.at("iid");
    check_keys(j, "iid.", {"dim", "mu_csv"});
    cfg.dim = num_or(j, "dim", cfg.dim);
    cfg.mu_csv = str_or(j, "mu_csv", cfg.mu_csv);
  }
  if (doc.contains("bounds")) {
    const json& j = doc.at("bounds");
    check_keys(j, "bounds.", {"k_e", "alpha", "diameter"});
    cfg.k_e = num_or(j, "k_e", cfg.k_e);
    cfg.alpha = num_or(j, "alpha", cfg.alpha);
    cfg.diameter = num_or(j, "diameter", cfg.diameter);
  }
  if (doc.contains("markov")) {
    const json& j = doc.at("markov");
    check_keys(j, "markov.",
               {"kernel_csv", "states", "proposal_width", "target_width", "r", "c"});
    cfg.kernel_csv = str_or(j, "kernel_csv", cfg.kernel_csv);
    cfg.markov_states = num_or(j, "states", cfg.markov_states);
    cfg.proposal_width = num_or(j, "proposal_width", cfg.proposal_width);
    cfg.target_width = num_or(j, "target_width", cfg.target_width);
    if (j.contains("r") && j.at("r").is_string()) {
      if (j.at("r").get<std::string>() != "inf") throw ParseError("markov.r must be a number or \"inf\"");
      cfg.markov_r = std::numeric_limits<double>::infinity();
    } else {
      cfg.markov_r = num_or(j, "r", cfg.markov_r);
    }
    cfg.markov_c = num_or(j, "c", cfg.markov_c);
  }
  if (doc.contains("gaussian")) {
    const json& j = doc.at("gaussian");
    check_keys(j, "gaussian.",
               {"basis", "grid", "smallball_mc", "kappa", "t0", "c_g",
                "quantizer_iterations", "quantizer"});
    cfg.gauss_basis = num_or(j, "basis", cfg.gauss_basis);
    cfg.gauss_grid = num_or(j, "grid", cfg.gauss_grid);
    cfg.smallball_mc = num_or(j, "smallball_mc", cfg.smallball_mc);
    cfg.gauss_kappa = num_or(j, "kappa", cfg.gauss_kappa);
    cfg.gauss_t0 = num_or(j, "t0", cfg.gauss_t0);
    cfg.c_g = num_or(j, "c_g", cfg.c_g);
    cfg.quantizer_iterations = num_or(j, "quantizer_iterations", cfg.quantizer_iterations);
    cfg.quantizer = bool_or(j, "quantizer", cfg.quantizer);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  json doc;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    doc = json::parse(text, nullptr, true, true);
  } else {
    doc = parse_toml_subset(text);
  }
  return config_from_json(doc);
}

void ExperimentConfig::validate() const {
  if (n_grid.empty()) throw ParseError("n_grid must be nonempty");
  for (size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw ParseError("n_grid entries must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1])
      throw ParseError("n_grid must be strictly increasing");
  }
  if (replicates < 1) throw ParseError("replicates must be >= 1");
  if (jobs < 1) throw ParseError("jobs must be >= 1");
  if (!(p >= 1.0)) throw ParseError("p must be >= 1");
  if (n_reference < 1) throw ParseError("n_reference must be >= 1");
  switch (scenario) {
    case Scenario::iid_cube:
      if (dim < 1) throw ParseError("iid.dim must be >= 1");
      break;
    case Scenario::iid_custom:
      if (mu_csv.empty()) throw ParseError("iid_custom needs iid.mu_csv");
      break;
    case Scenario::markov_finite:
      if (kernel_csv.empty() && markov_states < 2)
        throw ParseError("markov.states must be >= 2");
      if (proposal_width < 1) throw ParseError("markov.proposal_width must be >= 1");
      if (!(target_width > 0.0)) throw ParseError("markov.target_width must be > 0");
      if (!(markov_r >= 1.0)) throw ParseError("markov.r must be >= 1 or \"inf\"");
      break;
    case Scenario::gaussian_kl:
      if (p != 2.0) throw ParseError("gaussian_kl is defined for p = 2");
      if (gauss_basis < 1 || gauss_grid < 1)
        throw ParseError("gaussian.basis and gaussian.grid must be >= 1");
      if (smallball_mc < 100) throw ParseError("gaussian.smallball_mc must be >= 100");
      if (quantizer_iterations < 1)
        throw ParseError("gaussian.quantizer_iterations must be >= 1");
      break;
  }
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a64(cfg.raw.dump()));
  return buf;
}

// ---------- estimation ----------

MeanWp estimate_mean_wp(const std::function<DiscreteMeasure(uint64_t)>& draw,
                        const DiscreteMeasure& reference, double p, int replicates,
                        uint64_t seed, int jobs) {
  if (replicates < 1) throw Error("replicates must be >= 1");
  if (!reference.is_probability())
    throw InvalidMeasure("reference must be a probability measure");
  std::vector<double> vals(replicates, 0.0);
  std::vector<char> good(replicates, 0);
  auto work = [&](int i) {
    try {
      DiscreteMeasure ln = draw(replicate_seed(seed, (uint64_t)i));
      vals[i] = exact_wp(ln, reference, p).value;
      good[i] = 1;
    } catch (const Error&) {
      good[i] = 0;
    }
  };
  if (jobs <= 1 || replicates == 1) {
    for (int i = 0; i < replicates; ++i) work(i);
  } else {
    std::atomic<int> next{0};
    int n_threads = std::min(jobs, replicates);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < replicates; i = next.fetch_add(1)) work(i);
      });
    for (auto& th : pool) th.join();
  }

  MeanWp out;
  for (int i = 0; i < replicates; ++i) {
    if (good[i])
      out.values.push_back(vals[i]);
    else
      ++out.failures;
  }
  out.replicates_done = (int)out.values.size();
  if (out.failures * 100 > replicates)
    throw ExperimentError("more than 1% of replicates failed (" +
                          std::to_string(out.failures) + " of " + std::to_string(replicates) +
                          ")");
  if (out.replicates_done == 0) throw ExperimentError("all replicates failed");
  for (double v : out.values) out.mean += v;
  out.mean /= out.replicates_done;
  if (out.replicates_done >= 2) {
    double ss = 0.0;
    for (double v : out.values) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / ((double)out.replicates_done * (out.replicates_done - 1)));
  }
  return out;
}

MeanWp estimate_mean_wp(const Sampler& sampler, const DiscreteMeasure& reference, double p,
                        long n, int replicates, uint64_t seed, int jobs) {
  return estimate_mean_wp(
      [&sampler, n](uint64_t s) { return sample_empirical(sampler, (int)n, s); }, reference,
      p, replicates, seed, jobs);
}

RateFit fit_rate(const std::vector<long>& n_grid, const std::vector<double>& means) {
  if (n_grid.size() != means.size()) throw Error("fit_rate: size mismatch");
  size_t k = n_grid.size();
  if (k < 3) throw Error("fit_rate needs at least 3 points");
  std::vector<double> xs(k), ys(k);
  for (size_t i = 0; i < k; ++i) {
    if (n_grid[i] < 1) throw RangeError("fit_rate: n must be positive");
    if (!(means[i] > 0.0)) throw RangeError("fit_rate: means must be positive");
    xs[i] = std::log((double)n_grid[i]);
    ys[i] = std::log(means[i]);
  }
  double xbar = 0.0, ybar = 0.0;
  for (size_t i = 0; i < k; ++i) {
    xbar += xs[i];
    ybar += ys[i];
  }
  xbar /= k;
  ybar /= k;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < k; ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
  }
  if (!(sxx > 0.0)) throw RangeError("fit_rate: degenerate n grid");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double rss = 0.0;
  for (size_t i = 0; i < k; ++i) {
    double r = ys[i] - fit.intercept - fit.slope * xs[i];
    rss += r * r;
  }
  fit.slope_stderr = std::sqrt(rss / (double)(k - 2) / sxx);
  fit.slope_lo = fit.slope - 1.96 * fit.slope_stderr;
  fit.slope_hi = fit.slope + 1.96 * fit.slope_stderr;
  return fit;
}

// ---------- scenario orchestration ----------

uint64_t per_n_seed(uint64_t seed, size_t grid_index) {
  uint64_t s = seed + 0x9E3779B97F4A7C15ULL * (uint64_t)(grid_index + 1);
  return Rng::splitmix64(s);
}

namespace {

void pick_tightest(RatePoint& pt) {
  bool any = false;
  for (const auto& [name, b] : pt.bounds) {
    if (!b.applicable) continue;
    if (!any || b.value < pt.bound.value) pt.bound = b;
    any = true;
  }
  if (!any) {
    pt.bound.applicable = false;
    pt.bound.value = std::numeric_limits<double>::quiet_NaN();
    pt.bound.note = "no applicable bound";
  }
}

void run_iid(const ExperimentConfig& cfg, RateReport& rep) {
  const bool custom = cfg.scenario == Scenario::iid_custom;
  Sampler sampler = custom ? Sampler::finite_support_sampler(
                                 read_measure_csv(cfg.mu_csv).normalized(), cfg.seed)
                           : Sampler::uniform_cube_sampler(cfg.dim, cfg.seed);
  DiscreteMeasure reference =
      custom ? *sampler.base
             : sample_empirical(sampler, (int)cfg.n_reference, cfg.seed ^ kReferenceSalt);

  CoveringCurve curve = covering_curve(reference.space(), reference.support());
  DimensionProfile prof{cfg.k_e, cfg.alpha > 0.0 ? cfg.alpha : (custom ? 1.0 : (double)cfg.dim)};
  double d = cfg.diameter > 0.0
                 ? cfg.diameter
                 : (custom ? curve.diam() : std::sqrt((double)cfg.dim));

  for (size_t i = 0; i < cfg.n_grid.size(); ++i) {
    long n = cfg.n_grid[i];
    MeanWp mw = estimate_mean_wp(sampler, reference, cfg.p, n, cfg.replicates,
                                 per_n_seed(cfg.seed, i), cfg.jobs);
    RatePoint pt;
    pt.n = n;
    pt.mean = mw.mean;
    pt.std_error = mw.std_error;
    pt.bounds.emplace_back("finite_dim", bound_finite_dim(prof, d, cfg.p, (double)n));
    MinimizedBound mb = minimize_bound_iid(curve, cfg.p, (double)n);
    pt.bounds.emplace_back(
        "iid_integral",
        BoundResult{mb.value, true, "minimized at t = " + fmt_g17(mb.t)});
    pick_tightest(pt);
    rep.points.push_back(std::move(pt));
  }
  rep.extra["iid"] = {{"reference_size", reference.size()},
                      {"covering_diameter", curve.diam()},
                      {"k_E", prof.k_E},
                      {"alpha", prof.alpha},
                      {"diameter", d}};
}

void run_markov(const ExperimentConfig& cfg, RateReport& rep) {
  MarkovModel model = [&]() {
    if (!cfg.kernel_csv.empty()) return read_kernel_csv(cfg.kernel_csv, nullptr, true);
    int m = cfg.markov_states;
    std::vector<double> coords(m);
    for (int i = 0; i < m; ++i) coords[i] = m == 1 ? 0.0 : (double)i / (m - 1);
    auto states = make_space(std::move(coords), 1, MetricKind::euclidean);
    std::vector<double> target(m);
    for (int i = 0; i < m; ++i) {
      double x = states->point(i)[0] - 0.5;
      target[i] = std::exp(-x * x / (2.0 * cfg.target_width * cfg.target_width));
    }
    return metropolis_kernel(states, target, cfg.proposal_width);
  }();
  model.validate();

  std::vector<int> all(model.size());
  for (int i = 0; i < model.size(); ++i) all[i] = i;
  DiscreteMeasure reference(model.states, all, model.pi);
  reference = reference.without_zero_atoms();

  SpectralGap gap = spectral_gap_finite(model);
  MarkovBoundInputs in;
  in.lambda = gap.lambda;
  in.C = cfg.markov_c;
  in.r = cfg.markov_r;
  in.nu_over_pi_r = nu_over_pi_norm(model, cfg.markov_r);
  DimensionProfile prof{cfg.k_e, cfg.alpha > 0.0 ? cfg.alpha : 1.0};
  double d = cfg.diameter > 0.0 ? cfg.diameter
                                : model.states->subset_diameter(reference.support()).value;

  for (size_t i = 0; i < cfg.n_grid.size(); ++i) {
    long n = cfg.n_grid[i];
    MeanWp mw = estimate_mean_wp(
        [&model, n](uint64_t s) {
          return occupation_measure(model, run_chain(model, (int)n, s));
        },
        reference, cfg.p, cfg.replicates, per_n_seed(cfg.seed, i), cfg.jobs);
    RatePoint pt;
    pt.n = n;
    pt.mean = mw.mean;
    pt.std_error = mw.std_error;
    pt.bounds.emplace_back("markov", bound_markov(prof, d, cfg.p, (double)n, in));
    pick_tightest(pt);
    rep.points.push_back(std::move(pt));
  }
  rep.extra["markov"] = {{"states", model.size()},
                         {"lambda", gap.lambda},
                         {"beta2", gap.beta2},
                         {"c_poincare", gap.c_poincare},
                         {"nu_over_pi_r", in.nu_over_pi_r},
                         {"r", std::isinf(cfg.markov_r) ? json("inf") : json(cfg.markov_r)},
                         {"diameter", d}};
}

void run_gaussian(const ExperimentConfig& cfg, RateReport& rep) {
  GaussianProcessModel model =
      GaussianProcessModel::brownian_kl(cfg.gauss_basis, cfg.gauss_grid);
  DiscreteMeasure reference =
      model.sample_paths_measure((int)cfg.n_reference, cfg.seed ^ kReferenceSalt);

  // dyadic-compatible threshold ladder: consecutive half-decades of 2,
  // so (t, 2t) pairs are exact two steps apart
  std::vector<double> ts;
  for (int k = 16; k >= 0; --k) ts.push_back(2.0 * std::pow(2.0, -k / 2.0));
  auto table = small_ball_table(model, ts, cfg.smallball_mc, cfg.seed ^ kSmallBallSalt);
  double kappa = cfg.gauss_kappa;
  json kappa_src = "config";
  if (!(kappa > 0.0)) {
    kappa = check_doubling(table).kappa_hat;
    kappa_src = "doubling scan";
  }
  GaussianBoundInputs gin;
  gin.psi = small_ball_function_from_table(table);
  gin.kappa = kappa;
  gin.sigma = model.sigma_hat();
  gin.t0 = cfg.gauss_t0;
  gin.c_g = cfg.c_g;

  json rows = json::array();
  std::vector<long> ratio_n;
  std::vector<double> ratio_vals;
  for (size_t i = 0; i < cfg.n_grid.size(); ++i) {
    long n = cfg.n_grid[i];
    MeanWp mw = estimate_mean_wp(
        [&model, n](uint64_t s) { return model.sample_paths_measure((int)n, s); },
        reference, cfg.p, cfg.replicates, per_n_seed(cfg.seed, i), cfg.jobs);
    RatePoint pt;
    pt.n = n;
    pt.mean = mw.mean;
    pt.std_error = mw.std_error;
    pt.bounds.emplace_back("gaussian", bound_gaussian(gin, (double)n));
    pick_tightest(pt);
    rep.points.push_back(std::move(pt));

    if (cfg.quantizer) {
      json row = {{"n", n}, {"mean_w2", mw.mean}};
      auto lq = lloyd_quantizer(reference, (int)std::min<long>(n, reference.size()),
                                cfg.quantizer_iterations, cfg.seed ^ kQuantizerSalt);
      row["delta_hat"] = lq.delta_hat;
      try {
        double env = quantization_lower_envelope(gin, (double)n);
        row["psi_inv_log_n"] = env;
        row["ratio"] = mw.mean / env;
        ratio_n.push_back(n);
        ratio_vals.push_back(mw.mean / env);
      } catch (const Error& e) {
        row["psi_inv_log_n"] = nullptr;
        row["ratio"] = nullptr;
        row["note"] = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  json extra = {{"sigma_hat", model.sigma_hat()},
                {"kappa", kappa},
                {"kappa_source", kappa_src},
                {"validity_threshold_log_n", gaussian_validity_threshold(gin)},
                {"smallball_mc", cfg.smallball_mc}};
  json tab = json::array();
  for (const auto& e : table)
    tab.push_back({{"t", e.t},
                   {"psi_hat", e.infinite ? json(nullptr) : json(e.psi_hat)},
                   {"std_error", e.infinite ? json(nullptr) : json(e.std_error)},
                   {"hits", e.hits}});
  extra["smallball_table"] = std::move(tab);
  if (cfg.quantizer) {
    extra["quantizer"] = std::move(rows);
    if (ratio_vals.size() >= 3) {
      RateFit rf = fit_rate(ratio_n, ratio_vals);
      extra["ratio_fit"] = {{"slope", rf.slope},
                            {"intercept", rf.intercept},
                            {"slope_stderr", rf.slope_stderr},
                            {"slope_ci", {rf.slope_lo, rf.slope_hi}}};
    }
  }
  rep.extra["gaussian"] = std::move(extra);
}

std::string fit_line_label(const RateFit& fit) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "fit slope %.3f [%.3f, %.3f]", fit.slope, fit.slope_lo,
                fit.slope_hi);
  return buf;
}

std::string render_report_svg(const RateReport& rep) {
  SvgSeries emp;
  emp.label = "empirical mean";
  emp.draw_line = true;
  SvgSeries bnd;
  bnd.label = "analytic bound";
  bnd.color = "#d62728";
  bnd.draw_line = true;
  for (const auto& pt : rep.points) {
    emp.x.push_back((double)pt.n);
    emp.y.push_back(pt.mean);
    emp.y_err.push_back(pt.std_error);
    if (pt.bound.applicable) {
      bnd.x.push_back((double)pt.n);
      bnd.y.push_back(pt.bound.value);
    }
  }
  std::vector<SvgSeries> series{emp};
  if (!bnd.x.empty()) series.push_back(bnd);
  if (rep.fit_valid) {
    SvgSeries fitline;
    fitline.label = fit_line_label(rep.fit);
    fitline.color = "#2ca02c";
    fitline.draw_points = false;
    fitline.draw_line = true;
    for (const auto& pt : rep.points) {
      fitline.x.push_back((double)pt.n);
      fitline.y.push_back(std::exp(rep.fit.intercept + rep.fit.slope * std::log((double)pt.n)));
    }
    series.push_back(fitline);
  }
  char title[160];
  std::snprintf(title, sizeof title, "%s, p = %g (%s)", to_string(rep.scenario).c_str(),
                rep.p, rep.config_hash.c_str());
  return render_loglog_svg(title, "n", "mean W_p", series);
}

}  // namespace

std::string results_csv(const RateReport& rep) {
  std::string out = "n,mean,stderr,bound\n";
  for (const auto& pt : rep.points) {
    out += std::to_string(pt.n);
    out += ',';
    out += fmt_g17(pt.mean);
    out += ',';
    out += fmt_g17(pt.std_error);
    out += ',';
    if (pt.bound.applicable) out += fmt_g17(pt.bound.value);
    out += '\n';
  }
  return out;
}

json report_to_json(const RateReport& rep, const ExperimentConfig& cfg) {
  json points = json::array();
  for (const auto& pt : rep.points) {
    json bounds = json::object();
    for (const auto& [name, b] : pt.bounds) {
      bounds[name] = {{"value", b.applicable ? json(b.value) : json(nullptr)},
                      {"applicable", b.applicable},
                      {"note", b.note}};
    }
    points.push_back({{"n", pt.n},
                      {"mean", pt.mean},
                      {"stderr", pt.std_error},
                      {"bound", pt.bound.applicable ? json(pt.bound.value) : json(nullptr)},
                      {"bounds", std::move(bounds)}});
  }
  json fit = nullptr;
  if (rep.fit_valid)
    fit = {{"slope", rep.fit.slope},
           {"intercept", rep.fit.intercept},
           {"slope_stderr", rep.fit.slope_stderr},
           {"slope_ci", {rep.fit.slope_lo, rep.fit.slope_hi}}};
  return json{{"version", "1.0"},
              {"config", cfg.raw},
              {"config_hash", rep.config_hash},
              {"scenario", to_string(rep.scenario)},
              {"p", rep.p},
              {"constants", {{"c_transport", kTransportConstant}, {"c_g", cfg.c_g}}},
              {"points", std::move(points)},
              {"fit", std::move(fit)},
              {"domination", rep.domination},
              {"all_bounds_inapplicable", rep.all_bounds_inapplicable},
              {"extra", rep.extra}};
}

RateReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RateReport rep;
  rep.scenario = cfg.scenario;
  rep.p = cfg.p;
  rep.config_hash = config_hash(cfg);
  rep.extra = json::object();

  switch (cfg.scenario) {
    case Scenario::iid_cube:
    case Scenario::iid_custom:
      run_iid(cfg, rep);
      break;
    case Scenario::markov_finite:
      run_markov(cfg, rep);
      break;
    case Scenario::gaussian_kl:
      run_gaussian(cfg, rep);
      break;
  }

  std::vector<long> ns;
  std::vector<double> means;
  bool positive = true;
  for (const auto& pt : rep.points) {
    ns.push_back(pt.n);
    means.push_back(pt.mean);
    if (!(pt.mean > 0.0)) positive = false;
  }
  if (ns.size() >= 3 && positive) {
    rep.fit = fit_rate(ns, means);
    rep.fit_valid = true;
  }

  rep.all_bounds_inapplicable = true;
  std::string violation;
  for (const auto& pt : rep.points) {
    for (const auto& [name, b] : pt.bounds) {
      if (!b.applicable) continue;
      rep.all_bounds_inapplicable = false;
      if (pt.mean > b.value) {
        rep.domination = false;
        if (violation.empty())
          violation = "bound '" + name + "' violated at n = " + std::to_string(pt.n) +
                      ": mean " + fmt_g17(pt.mean) + " > bound " + fmt_g17(b.value);
      }
    }
  }

  // persist before any domination failure so the evidence survives
  fs::path base = fs::path(cfg.output_root) / rep.config_hash;
  fs::path dir = base;
  if (fs::exists(base)) {
    int k = 1;
    while (fs::exists(base / ("rerun-" + std::to_string(k)))) ++k;
    dir = base / ("rerun-" + std::to_string(k));
  }
  fs::create_directories(dir);
  rep.out_dir = dir.string();
  {
    std::ofstream f(dir / "results.csv", std::ios::binary);
    f << results_csv(rep);
  }
  {
    std::ofstream f(dir / "report.json", std::ios::binary);
    f << report_to_json(rep, cfg).dump(2) << '\n';
  }
  {
    std::ofstream f(dir / "plot.svg", std::ios::binary);
    f << render_report_svg(rep);
  }

  if (!rep.domination) throw ExperimentError(violation + " (artifacts in " + rep.out_dir + ")");
  return rep;
}

}  // namespace wrates
