#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wrates/bounds.hpp"
#include "wrates/measures.hpp"

namespace wrates {

enum class Scenario { iid_cube, iid_custom, markov_finite, gaussian_kl };
std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

// Flat view of a parsed config file. Every field has a default; the raw
// parsed document is kept alongside so the output hash reflects exactly
// what the user wrote.
struct ExperimentConfig {
  Scenario scenario = Scenario::iid_cube;
  double p = 1.0;
  std::vector<long> n_grid;
  int replicates = 2;
  uint64_t seed = 1;
  int jobs = 1;
  std::string output_root = "outputs";
  long n_reference = 20000;

  // iid scenarios
  int dim = 1;
  std::string mu_csv;  // iid_custom reference measure

  // analytic bound knobs; 0 means scenario-derived default
  double k_e = 1.0;
  double alpha = 0.0;     // 0 -> dim for iid_cube, 1 otherwise
  double diameter = 0.0;  // 0 -> derived from the reference points

  // markov_finite
  std::string kernel_csv;  // empty -> built-in Metropolis grid chain
  int markov_states = 16;
  int proposal_width = 1;
  double target_width = 0.25;
  double markov_r = 1.0;  // Lr norm order for dnu/dpi, "inf" allowed
  double markov_c = 1.0;

  // gaussian_kl
  int gauss_basis = 64;
  int gauss_grid = 64;
  int smallball_mc = 200000;
  double gauss_kappa = 0.0;  // 0 -> estimated by the doubling scan
  double gauss_t0 = 1.0;
  double c_g = 1.0;
  int quantizer_iterations = 40;
  bool quantizer = true;  // emit the quantizer comparison rows

  nlohmann::json raw;  // parsed document, hashed canonically

  void validate() const;
};

// TOML (subset: sections, scalars, one-line arrays, # comments) or JSON,
// chosen by extension, ".json" vs anything else
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json parse_toml_subset(const std::string& text);

// FNV-1a 64 over the sorted-key dump of the raw document, 16 hex chars
std::string config_hash(const ExperimentConfig& cfg);
uint64_t fnv1a64(const std::string& bytes);

// Seed schedule, part of the reproducibility contract: the reference
// sample uses seed ^ kReferenceSalt, grid entry i uses per_n_seed(seed, i)
// as the base for replicate_seed, the small-ball sweep and the quantizer
// use their own salts.
inline constexpr uint64_t kReferenceSalt = 0x8F3A91B5C2D46E07ULL;
inline constexpr uint64_t kSmallBallSalt = 0x3C6EF372FE94F82AULL;
inline constexpr uint64_t kQuantizerSalt = 0x51ED270B0BADF00DULL;
uint64_t per_n_seed(uint64_t seed, size_t grid_index);

struct MeanWp {
  double mean = 0.0;
  double std_error = 0.0;
  int replicates_done = 0;
  int failures = 0;
  std::vector<double> values;  // per surviving replicate, replicate order
};

// draw(rep_seed) produces one replicate measure; replicate k uses
// replicate_seed(seed, k). Values are reduced in replicate order no
// matter which worker finished first. Solver errors drop the replicate;
// more than 1% dropped aborts the run.
MeanWp estimate_mean_wp(const std::function<DiscreteMeasure(uint64_t)>& draw,
                        const DiscreteMeasure& reference, double p, int replicates,
                        uint64_t seed, int jobs = 1);
MeanWp estimate_mean_wp(const Sampler& sampler, const DiscreteMeasure& reference, double p,
                        long n, int replicates, uint64_t seed, int jobs = 1);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double slope_lo = 0.0;  // 95% band, slope +- 1.96 stderr
  double slope_hi = 0.0;
};

// least squares on (log n, log mean); needs >= 3 points, means > 0
RateFit fit_rate(const std::vector<long>& n_grid, const std::vector<double>& means);

struct RatePoint {
  long n = 0;
  double mean = 0.0;
  double std_error = 0.0;
  BoundResult bound;                                     // tightest applicable
  std::vector<std::pair<std::string, BoundResult>> bounds;  // every bound tried
};

struct RateReport {
  std::string config_hash;
  std::string out_dir;
  Scenario scenario = Scenario::iid_cube;
  double p = 1.0;
  std::vector<RatePoint> points;
  RateFit fit;
  bool fit_valid = false;
  bool all_bounds_inapplicable = false;
  bool domination = true;  // mean <= bound wherever a bound applied
  nlohmann::json extra;    // scenario-specific diagnostics
};

// Runs the configured scenario: reference construction, per-n replicate
// means, analytic bounds, rate fit; persists results.csv, report.json and
// plot.svg under output_root/<hash>/ (rerun-N when the directory already
// holds a run). Throws ExperimentError after persisting if an applicable
// bound is violated by the plain mean.
RateReport run_experiment(const ExperimentConfig& cfg);

nlohmann::json report_to_json(const RateReport& rep, const ExperimentConfig& cfg);
std::string results_csv(const RateReport& rep);

}  // namespace wrates
