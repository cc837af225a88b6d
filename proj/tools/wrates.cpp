#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wrates/bounds.hpp"
#include "wrates/experiments.hpp"
#include "wrates/gaussian.hpp"
#include "wrates/markov.hpp"
#include "wrates/multiscale.hpp"
#include "wrates/transport.hpp"

using namespace wrates;

namespace {

int report_bound(const BoundResult& b) {
  if (!b.applicable) {
    std::cout << "inapplicable";
    if (!b.note.empty()) std::cout << ": " << b.note;
    std::cout << "\n";
    return 2;
  }
  std::cout << fmt_g17(b.value) << "\n";
  if (!b.note.empty()) std::cout << "# " << b.note << "\n";
  return 0;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"empirical Wasserstein convergence-rate toolkit"};
  app.require_subcommand(1);

  // wp
  auto* wp = app.add_subcommand("wp", "exact W_p between two measure CSV files");
  std::string wp_mu, wp_nu, wp_method = "exact", wp_plan;
  double wp_p = 1.0;
  wp->add_option("--mu", wp_mu, "first measure CSV")->required();
  wp->add_option("--nu", wp_nu, "second measure CSV")->required();
  wp->add_option("--p", wp_p, "order p >= 1");
  wp->add_option("--method", wp_method, "exact | brute | 1d");
  wp->add_option("--plan", wp_plan, "write the optimal plan CSV here");

  // bound <name>
  auto* bound = app.add_subcommand("bound", "evaluate an analytic rate bound");
  bound->require_subcommand(1);
  double b_alpha = 1.0, b_ke = 1.0, b_d = 1.0, b_p = 1.0, b_n = 1.0;
  auto add_profile = [&](CLI::App* c) {
    c->add_option("--alpha", b_alpha, "covering exponent");
    c->add_option("--k-e", b_ke, "covering prefactor");
    c->add_option("--d", b_d, "diameter");
    c->add_option("--p", b_p, "order p");
    c->add_option("--n", b_n, "sample size")->required();
  };
  auto* b_fd = bound->add_subcommand("finite-dim", "closed-form iid bound, alpha > 2p");
  add_profile(b_fd);
  auto* b_ii = bound->add_subcommand("iid-integral", "covering-integral iid bound");
  std::string ii_mu;
  double ii_t = 0.0;
  b_ii->add_option("--mu", ii_mu, "measure CSV whose support drives the covering curve")
      ->required();
  b_ii->add_option("--p", b_p, "order p");
  b_ii->add_option("--n", b_n, "sample size")->required();
  b_ii->add_option("--t", ii_t, "explicit cut; omit to minimize over t");
  auto* b_mk = bound->add_subcommand("markov", "occupation-measure bound, 2p > alpha(1+1/r)");
  add_profile(b_mk);
  double mk_lambda = 0.0, mk_r = 1.0, mk_norm = 1.0, mk_C = 1.0;
  b_mk->add_option("--lambda", mk_lambda, "variance decay rate")->required();
  b_mk->add_option("--r", mk_r, "norm index, <= 0 for infinity");
  b_mk->add_option("--norm", mk_norm, "|| d nu / d pi ||_r");
  b_mk->add_option("--c-chain", mk_C, "decay prefactor C");
  auto* b_g = bound->add_subcommand("gaussian", "small-ball Gaussian bound");
  std::string g_table;
  double g_kappa = 1.0, g_sigma = 1.0, g_t0 = 1.0, g_cg = 1.0;
  b_g->add_option("--psi", g_table, "table t1:v1,t2:v2,... nonincreasing in t")->required();
  b_g->add_option("--kappa", g_kappa, "doubling constant");
  b_g->add_option("--sigma", g_sigma, "max marginal std");
  b_g->add_option("--t0", g_t0, "doubling scale");
  b_g->add_option("--c-g", g_cg, "leading constant");
  b_g->add_option("--n", b_n, "sample size")->required();

  // tree-bound
  auto* tb = app.add_subcommand("tree-bound", "multiscale transport bound between measures");
  std::string tb_mu, tb_nu;
  double tb_p = 1.0, tb_s = 0.0, tb_d = 0.0;
  int tb_u = 1, tb_v = 1;
  tb->add_option("--mu", tb_mu, "first measure CSV")->required();
  tb->add_option("--nu", tb_nu, "second measure CSV")->required();
  tb->add_option("--p", tb_p, "order p");
  tb->add_option("--s", tb_s, "tree scale; 0 derives it from the point diameter");
  tb->add_option("--u", tb_u, "coarsest level, at most 2");
  tb->add_option("--v", tb_v, "finest level, >= u");
  tb->add_option("--d", tb_d, "diameter parameter; 0 uses the point diameter");

  // experiment
  auto* ex = app.add_subcommand("experiment", "run a configured rate experiment");
  std::string ex_config;
  ex->add_option("config", ex_config, "TOML or JSON config file")->required();

  // markov gap
  auto* mk = app.add_subcommand("markov", "finite-chain diagnostics");
  mk->require_subcommand(1);
  auto* mk_gap = mk->add_subcommand("gap", "spectral gap of a reversible kernel CSV");
  std::string gap_kernel;
  mk_gap->add_option("--kernel", gap_kernel, "kernel CSV, n rows plus a pi row")->required();

  // gaussian smallball
  auto* ga = app.add_subcommand("gaussian", "Gaussian process diagnostics");
  ga->require_subcommand(1);
  auto* ga_sb = ga->add_subcommand("smallball", "Monte Carlo small-ball table");
  int sb_basis = 64, sb_grid = 64, sb_mc = 100000;
  uint64_t sb_seed = 1;
  std::string sb_ts = "0.25,0.5,1.0,2.0";
  ga_sb->add_option("--basis", sb_basis, "Karhunen-Loeve terms");
  ga_sb->add_option("--grid", sb_grid, "time grid size");
  ga_sb->add_option("--mc", sb_mc, "Monte Carlo paths");
  ga_sb->add_option("--seed", sb_seed, "RNG seed");
  ga_sb->add_option("--ts", sb_ts, "comma-separated radii");

  CLI11_PARSE(app, argc, argv);

  try {
    if (wp->parsed()) {
      DiscreteMeasure mu = read_measure_csv(wp_mu);
      DiscreteMeasure nu = read_measure_csv(wp_nu);
      double value = 0.0;
      if (wp_method == "exact") {
        WpOptions opts;
        opts.want_plan = !wp_plan.empty();
        WpSolution sol = exact_wp(mu, nu, wp_p, opts);
        value = sol.value;
        if (!wp_plan.empty()) write_plan_csv(wp_plan, sol.plan);
      } else if (wp_method == "brute") {
        value = brute_force_wp(mu, nu, wp_p);
      } else if (wp_method == "1d") {
        value = wp_1d(mu, nu, wp_p);
      } else {
        throw Error("unknown method '" + wp_method + "'");
      }
      std::cout << fmt_g17(value) << "\n";
      return 0;
    }

    if (bound->parsed()) {
      if (b_fd->parsed())
        return report_bound(bound_finite_dim({b_ke, b_alpha}, b_d, b_p, b_n));
      if (b_ii->parsed()) {
        DiscreteMeasure mu = read_measure_csv(ii_mu);
        CoveringCurve curve = covering_curve(mu.space(), mu.support());
        if (ii_t > 0.0) {
          std::cout << fmt_g17(bound_iid_integral(curve, b_p, b_n, ii_t)) << "\n";
        } else {
          MinimizedBound mb = minimize_bound_iid(curve, b_p, b_n);
          std::cout << fmt_g17(mb.value) << "\n";
          std::cout << "# minimized at t = " << fmt_g17(mb.t) << "\n";
        }
        return 0;
      }
      if (b_mk->parsed()) {
        MarkovBoundInputs in;
        in.lambda = mk_lambda;
        in.C = mk_C;
        in.nu_over_pi_r = mk_norm;
        in.r = mk_r <= 0.0 ? std::numeric_limits<double>::infinity() : mk_r;
        return report_bound(bound_markov({b_ke, b_alpha}, b_d, b_p, b_n, in));
      }
      if (b_g->parsed()) {
        std::vector<double> ts, vals;
        std::istringstream in(g_table);
        std::string item;
        while (std::getline(in, item, ',')) {
          size_t colon = item.find(':');
          if (colon == std::string::npos) throw ParseError("--psi entries must be t:value");
          ts.push_back(std::stod(item.substr(0, colon)));
          vals.push_back(std::stod(item.substr(colon + 1)));
        }
        GaussianBoundInputs gin;
        gin.psi = SmallBallFunction::from_table(std::move(ts), std::move(vals));
        gin.kappa = g_kappa;
        gin.sigma = g_sigma;
        gin.t0 = g_t0;
        gin.c_g = g_cg;
        return report_bound(bound_gaussian(gin, b_n));
      }
    }

    if (tb->parsed()) {
      DiscreteMeasure mu_in = read_measure_csv(tb_mu);
      DiscreteMeasure nu_in = read_measure_csv(tb_nu);
      const MetricSpace& msp = mu_in.space();
      const MetricSpace& nsp = nu_in.space();
      if (!msp.has_coords() || !nsp.has_coords() || msp.dim() != nsp.dim() ||
          msp.kind() != nsp.kind())
        throw Error("tree-bound needs coordinate measures of matching dimension and metric");

      // merge the two point sets, collapsing exact coordinate duplicates
      const int dim = msp.dim();
      std::vector<double> coords;
      std::map<std::vector<double>, int> seen;
      auto add_point = [&](const double* x) {
        std::vector<double> key(x, x + dim);
        auto it = seen.find(key);
        if (it != seen.end()) return it->second;
        int id = (int)(coords.size() / dim);
        coords.insert(coords.end(), x, x + dim);
        seen.emplace(std::move(key), id);
        return id;
      };
      std::vector<int> mu_sup, nu_sup;
      for (int i : mu_in.support()) mu_sup.push_back(add_point(msp.point(i)));
      for (int i : nu_in.support()) nu_sup.push_back(add_point(nsp.point(i)));
      auto space = make_space(std::move(coords), dim, msp.kind());
      DiscreteMeasure mu(space, mu_sup, mu_in.weights());
      DiscreteMeasure nu(space, nu_sup, nu_in.weights());

      std::vector<int> pts(space->size());
      for (int i = 0; i < space->size(); ++i) pts[i] = i;
      double diam = space->diameter().value;
      double s = tb_s > 0.0 ? tb_s : diam;
      double d = tb_d > 0.0 ? tb_d : diam;
      PartitionTree tree = build_partition_tree(space, pts, s, tb_u, tb_v);
      TreeBoundBreakdown bd = tree_transport_bound(mu, nu, tree, tb_p, d);
      TransportPlan plan = tree_transport_plan(mu, nu, tree, tb_p);
      std::cout << "bound " << fmt_g17(bd.bound) << "\n";
      std::cout << "plan-cost " << fmt_g17(std::pow(plan_cost_p(plan), 1.0 / tb_p)) << "\n";
      std::cout << "exact " << fmt_g17(exact_wp(mu, nu, tb_p).value) << "\n";
      return 0;
    }

    if (ex->parsed()) {
      ExperimentConfig cfg = load_config(ex_config);
      RateReport rep = run_experiment(cfg);
      std::cout << "wrote " << rep.out_dir << "\n";
      for (const auto& pt : rep.points) {
        std::cout << "n=" << pt.n << " mean=" << fmt_g17(pt.mean);
        if (pt.bound.applicable)
          std::cout << " bound=" << fmt_g17(pt.bound.value);
        else
          std::cout << " bound=inapplicable";
        std::cout << "\n";
      }
      if (rep.fit_valid)
        std::cout << "slope " << fmt_g17(rep.fit.slope) << " ci [" << fmt_g17(rep.fit.slope_lo)
                  << ", " << fmt_g17(rep.fit.slope_hi) << "]\n";
      return rep.all_bounds_inapplicable ? 2 : 0;
    }

    if (mk->parsed()) {
      MarkovModel model = read_kernel_csv(gap_kernel, nullptr, true);
      SpectralGap gap = spectral_gap_finite(model);
      std::cout << "lambda " << fmt_g17(gap.lambda) << "\n";
      std::cout << "beta2 " << fmt_g17(gap.beta2) << "\n";
      std::cout << "c-poincare " << fmt_g17(gap.c_poincare) << "\n";
      return 0;
    }

    if (ga->parsed()) {
      auto model = GaussianProcessModel::brownian_kl(sb_basis, sb_grid);
      auto table = small_ball_table(model, parse_list(sb_ts), sb_mc, sb_seed);
      std::cout << "sigma-hat " << fmt_g17(model.sigma_hat()) << "\n";
      std::cout << "t,psi_hat,stderr,hits\n";
      for (const auto& e : table) {
        std::cout << fmt_g17(e.t) << ",";
        if (e.infinite)
          std::cout << "inf,inf," << e.hits << "\n";
        else
          std::cout << fmt_g17(e.psi_hat) << "," << fmt_g17(e.std_error) << "," << e.hits
                    << "\n";
      }
      try {
        DoublingCheck dc = check_doubling(table);
        std::cout << "kappa-hat " << fmt_g17(dc.kappa_hat) << " (" << dc.pairs_used
                  << " pairs)\n";
      } catch (const Error&) {
      }
      return 0;
    }
  } catch (const InapplicableRegime& e) {
    std::cout << "inapplicable: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
