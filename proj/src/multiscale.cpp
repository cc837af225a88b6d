#include "wrates/multiscale.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace wrates {

GreedyCover greedy_cover(const MetricSpace& space, const std::vector<int>& points,
                         double radius) {
  if (points.empty()) throw Error("greedy_cover needs a nonempty point set");
  if (!(radius >= 0.0)) throw Error("greedy_cover needs a nonnegative radius");
  const int n = (int)points.size();
  GreedyCover out;
  out.assign.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    if (out.assign[i] >= 0) continue;
    int c = (int)out.centers.size();
    out.centers.push_back(points[i]);
    out.assign[i] = c;
    for (int k = i + 1; k < n; ++k) {
      if (out.assign[k] >= 0) continue;
      if (space.distance(points[i], points[k]) <= radius) out.assign[k] = c;
    }
  }
  return out;
}

int PartitionTree::position_of(int point_id) const {
  if (pos_.empty()) {
    pos_.reserve(points.size());
    for (size_t k = 0; k < points.size(); ++k) pos_[points[k]] = (int)k;
  }
  auto it = pos_.find(point_id);
  if (it == pos_.end()) throw Error("point id is not part of the tree");
  return it->second;
}

std::vector<int> PartitionTree::leaf_centers() const {
  std::vector<int> out;
  for (const auto& c : levels.back().cells) out.push_back(c.center);
  return out;
}

PartitionTree build_partition_tree(SpacePtr space, const std::vector<int>& points, double s,
                                   int u, int v) {
  if (!space) throw Error("build_partition_tree needs a space");
  if (points.empty()) throw Error("build_partition_tree needs points");
  if (!(s > 0.0)) throw Error("scale s must be positive");
  if (u > v) throw Error("level range requires u <= v");
  {
    std::unordered_set<int> seen(points.begin(), points.end());
    if (seen.size() != points.size()) throw Error("duplicate point id in tree point set");
  }

  PartitionTree tree;
  tree.space = space;
  tree.points = points;
  tree.s = s;
  tree.u = u;
  tree.v = v;
  tree.levels.resize(v - u + 1);
  const int n = (int)points.size();

  // finest level: greedy cover partition, first ball wins
  {
    double radius = std::pow(4.0, -v) * s;
    GreedyCover gc = greedy_cover(*space, points, radius);
    auto& lv = tree.levels[v - u];
    lv.radius = radius;
    lv.cells.resize(gc.centers.size());
    lv.cell_of = gc.assign;
    for (size_t c = 0; c < gc.centers.size(); ++c) lv.cells[c].center = gc.centers[c];
    for (int k = 0; k < n; ++k) lv.cells[gc.assign[k]].members.push_back(points[k]);
  }

  // coarser levels: agglomerate whole cells of the level below onto a
  // greedy cover; a cell joins the first ball any of its members meets
  for (int j = v - 1; j >= u; --j) {
    double radius = std::pow(4.0, -j) * s;
    GreedyCover gc = greedy_cover(*space, points, radius);
    auto& below = tree.levels[j + 1 - u];
    auto& lv = tree.levels[j - u];
    lv.radius = radius;

    const int nc = (int)gc.centers.size();
    const int nq = (int)below.cells.size();
    std::vector<int> cell_owner(nq, -1);
    for (int q = 0; q < nq; ++q) {
      for (int l = 0; l < nc && cell_owner[q] < 0; ++l) {
        for (int m : below.cells[q].members) {
          if (space->distance(gc.centers[l], m) <= radius) {
            cell_owner[q] = l;
            break;
          }
        }
      }
      if (cell_owner[q] < 0)
        throw Error("cover failed to absorb a cell (inconsistent metric?)");
    }

    // drop empty balls, relabel in ball order
    std::vector<int> new_index(nc, -1);
    for (int l = 0; l < nc; ++l) {
      bool used = false;
      for (int q = 0; q < nq; ++q)
        if (cell_owner[q] == l) {
          used = true;
          break;
        }
      if (used) {
        new_index[l] = (int)lv.cells.size();
        lv.cells.emplace_back();
        lv.cells.back().center = gc.centers[l];
      }
    }
    lv.cell_of.assign(n, -1);
    for (int q = 0; q < nq; ++q) {
      int cl = new_index[cell_owner[q]];
      below.cells[q].parent = cl;
      for (int m : below.cells[q].members) {
        lv.cells[cl].members.push_back(m);
        lv.cell_of[tree.position_of(m)] = cl;
      }
    }
  }
  return tree;
}

void validate_partition_tree(const PartitionTree& tree) {
  if (!tree.space || tree.levels.empty()) throw Error("empty tree");
  const MetricSpace& sp = *tree.space;
  const int n = (int)tree.points.size();
  for (int j = tree.u; j <= tree.v; ++j) {
    const auto& lv = tree.level(j);
    double limit = std::pow(4.0, -j + 1) * tree.s;

    std::vector<char> seen(n, 0);
    size_t counted = 0;
    for (size_t ci = 0; ci < lv.cells.size(); ++ci) {
      const auto& cell = lv.cells[ci];
      if (cell.members.empty()) throw Error("empty cell survived construction");
      for (int m : cell.members) {
        int pos = tree.position_of(m);
        if (seen[pos]) throw Error("point appears in two cells of one level");
        if (lv.cell_of[pos] != (int)ci) throw Error("cell_of is inconsistent with members");
        seen[pos] = 1;
        ++counted;
      }
      auto dia = sp.subset_diameter(cell.members);
      if (dia.value > limit * (1.0 + 1e-9)) throw Error("cell diameter exceeds 4^{-j+1} s");
    }
    if (counted != (size_t)n) throw Error("level does not cover the point set");

    if (j > tree.u) {
      const auto& up = tree.level(j - 1);
      for (const auto& cell : lv.cells) {
        int par = cell.parent;
        if (par < 0 || par >= (int)up.cells.size()) throw Error("missing parent cell");
        for (int m : cell.members)
          if (up.cell_of[tree.position_of(m)] != par)
            throw Error("cell members escape their parent cell");
      }
    }
    GreedyCover gc = greedy_cover(sp, tree.points, lv.radius);
    if (lv.cells.size() > gc.centers.size())
      throw Error("level has more cells than the greedy cover");
  }
  // finest centers are members of their own cells and pairwise distinct
  const auto& leaf = tree.levels.back();
  std::unordered_set<int> centers;
  for (const auto& cell : leaf.cells) {
    if (std::find(cell.members.begin(), cell.members.end(), cell.center) ==
        cell.members.end())
      throw Error("finest-level center is outside its cell");
    if (!centers.insert(cell.center).second) throw Error("duplicate finest-level center");
  }
}

namespace {

struct MassBit {
  int atom;
  double mass;
};

void fifo_match(std::vector<MassBit>& sur, std::vector<MassBit>& def,
                const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                TransportPlan& plan) {
  size_t is = 0, id = 0;
  while (is < sur.size() && id < def.size()) {
    double take = std::min(sur[is].mass, def[id].mass);
    if (take > 0.0) {
      TransportPlan::Entry e;
      e.src = sur[is].atom;
      e.dst = def[id].atom;
      e.mass = take;
      e.distance = atom_distance(mu, e.src, nu, e.dst);
      plan.entries.push_back(e);
    }
    sur[is].mass -= take;
    def[id].mass -= take;
    if (sur[is].mass <= 0.0) ++is;
    if (id < def.size() && def[id].mass <= 0.0) ++id;
  }
  sur.erase(sur.begin(), sur.begin() + is);
  def.erase(def.begin(), def.begin() + id);
}

struct TreeMeasures {
  // per level, per cell, mass of mu and nu
  std::vector<std::vector<double>> mu_mass, nu_mass;
  std::vector<int> mu_leaf_atom, nu_leaf_atom;  // per finest cell, atom index or -1
  double scale_nu = 1.0;
};

TreeMeasures project_onto_tree(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               const PartitionTree& tree) {
  if (mu.space_ptr().get() != tree.space.get() || nu.space_ptr().get() != tree.space.get())
    throw DimensionMismatch("measures must live on the tree's space");
  double sa = mu.total_mass(), sb = nu.total_mass();
  if (sa <= 0.0 || sb <= 0.0) throw InvalidMeasure("zero measure");
  if (std::abs(sa - sb) > 1e-9 * std::max({sa, sb, 1.0}))
    throw InvalidMeasure("total masses differ beyond tolerance");

  const auto& leaf = tree.levels.back();
  // leaf-center point id -> finest cell
  std::unordered_map<int, int> center_cell;
  for (size_t c = 0; c < leaf.cells.size(); ++c) center_cell[leaf.cells[c].center] = (int)c;

  TreeMeasures tm;
  tm.scale_nu = sa / sb;
  const int L = (int)tree.levels.size();
  tm.mu_mass.resize(L);
  tm.nu_mass.resize(L);
  for (int k = 0; k < L; ++k) {
    tm.mu_mass[k].assign(tree.levels[k].cells.size(), 0.0);
    tm.nu_mass[k].assign(tree.levels[k].cells.size(), 0.0);
  }
  tm.mu_leaf_atom.assign(leaf.cells.size(), -1);
  tm.nu_leaf_atom.assign(leaf.cells.size(), -1);

  auto scatter = [&](const DiscreteMeasure& m, std::vector<std::vector<double>>& mass,
                     std::vector<int>& leaf_atom, double f) {
    for (int i = 0; i < m.size(); ++i) {
      auto it = center_cell.find(m.support()[i]);
      if (it == center_cell.end())
        throw InvalidMeasure("measure atom is not a finest-level center of the tree");
      if (leaf_atom[it->second] >= 0)
        throw InvalidMeasure("two atoms share one finest-level center");
      leaf_atom[it->second] = i;
      double w = m.weights()[i] * f;
      int cell = it->second;
      mass[L - 1][cell] += w;
      for (int k = L - 1; k > 0; --k) {
        cell = tree.levels[k].cells[cell].parent;
        mass[k - 1][cell] += w;
      }
    }
  };
  scatter(mu, tm.mu_mass, tm.mu_leaf_atom, 1.0);
  scatter(nu, tm.nu_mass, tm.nu_leaf_atom, tm.scale_nu);
  return tm;
}

void check_tree_bound_pre(const PartitionTree& tree, double d) {
  if (tree.u > 2)
    throw InapplicableRegime("coarsest level must satisfy u <= 2 for the bound base case");
  if (tree.s > d * (1.0 + 1e-12))
    throw Error("bound scale d must be at least the tree scale s");
  double diam = tree.space->subset_diameter(tree.points).value;
  if (diam > d * (1.0 + 1e-9))
    throw Error("bound scale d must dominate the point set diameter");
}

}  // namespace

TreeBoundBreakdown tree_transport_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                        const PartitionTree& tree, double p, double d) {
  if (p < 1.0) throw Error("exponent p must be >= 1");
  check_tree_bound_pre(tree, d);
  TreeMeasures tm = project_onto_tree(mu, nu, tree);
  TreeBoundBreakdown out;
  for (int j = tree.u; j <= tree.v; ++j) {
    const auto& muv = tm.mu_mass[j - tree.u];
    const auto& nuv = tm.nu_mass[j - tree.u];
    double tv = 0.0;
    for (size_t c = 0; c < muv.size(); ++c) tv += std::abs(muv[c] - nuv[c]);
    tv *= 0.5;
    double term = 2.0 * std::pow(4.0, -j + 2) * d * std::pow(tv, 1.0 / p);
    out.tv.push_back(tv);
    out.level_term.push_back(term);
    out.bound += term;
  }
  return out;
}

TransportPlan tree_transport_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                  const PartitionTree& tree, double p) {
  if (p < 1.0) throw Error("exponent p must be >= 1");
  TreeMeasures tm = project_onto_tree(mu, nu, tree);
  TransportPlan plan;
  plan.p = p;

  const int L = (int)tree.levels.size();
  const auto& leaf = tree.levels[L - 1];
  // per-cell surplus (mu excess) and deficit (nu excess) queues
  std::vector<std::vector<MassBit>> sur(leaf.cells.size()), def(leaf.cells.size());
  for (size_t c = 0; c < leaf.cells.size(); ++c) {
    double wm = tm.mu_mass[L - 1][c], wn = tm.nu_mass[L - 1][c];
    double matched = std::min(wm, wn);
    if (matched > 0.0) {
      TransportPlan::Entry e;
      e.src = tm.mu_leaf_atom[c];
      e.dst = tm.nu_leaf_atom[c];
      e.mass = matched;
      e.distance = 0.0;  // both atoms sit on the same center
      plan.entries.push_back(e);
    }
    if (wm > wn) sur[c].push_back({tm.mu_leaf_atom[c], wm - wn});
    if (wn > wm) def[c].push_back({tm.nu_leaf_atom[c], wn - wm});
  }

  for (int k = L - 2; k >= 0; --k) {
    const auto& lv = tree.levels[k];
    const auto& below = tree.levels[k + 1];
    std::vector<std::vector<MassBit>> sur_up(lv.cells.size()), def_up(lv.cells.size());
    for (size_t q = 0; q < below.cells.size(); ++q) {
      int par = below.cells[q].parent;
      for (auto& b : sur[q]) sur_up[par].push_back(b);
      for (auto& b : def[q]) def_up[par].push_back(b);
    }
    for (size_t c = 0; c < lv.cells.size(); ++c)
      fifo_match(sur_up[c], def_up[c], mu, nu, p, plan);
    sur = std::move(sur_up);
    def = std::move(def_up);
  }

  // cross-cell stage at the coarsest level
  std::vector<MassBit> all_sur, all_def;
  for (auto& v : sur) all_sur.insert(all_sur.end(), v.begin(), v.end());
  for (auto& v : def) all_def.insert(all_def.end(), v.begin(), v.end());
  fifo_match(all_sur, all_def, mu, nu, p, plan);
  double rest = 0.0;
  for (auto& b : all_sur) rest += b.mass;
  for (auto& b : all_def) rest += b.mass;
  if (rest > 1e-9 * std::max(1.0, mu.total_mass()))
    throw ConvergenceFailure("tree plan left unmatched mass");

  plan.cost_p = plan_cost_p(plan);
  plan.cost = std::pow(plan.cost_p, 1.0 / p);
  return plan;
}

// -------- covering curve --------

CoveringCurve CoveringCurve::power_law(double k, double alpha, double diam) {
  if (!(k > 0.0) || !(alpha > 0.0) || !(diam > 0.0))
    throw Error("power-law covering curve needs positive k, alpha, diam");
  CoveringCurve c;
  c.analytic_ = true;
  c.k_ = k;
  c.alpha_ = alpha;
  c.diam_ = diam;
  return c;
}

CoveringCurve CoveringCurve::from_radii(std::vector<double> radii, double diam) {
  if (radii.empty()) throw Error("covering curve needs at least one radius");
  for (size_t i = 1; i < radii.size(); ++i)
    if (radii[i] > radii[i - 1] + 1e-15)
      throw Error("insertion radii must be nonincreasing");
  CoveringCurve c;
  c.analytic_ = false;
  c.radii_ = std::move(radii);
  c.diam_ = diam;
  return c;
}

double CoveringCurve::count(double delta) const {
  if (!(delta >= 0.0)) throw RangeError("covering curve evaluated at negative radius");
  if (analytic_) {
    if (delta == 0.0) throw RangeError("power-law covering count diverges at 0");
    return k_ * std::pow(diam_ / delta, alpha_);
  }
  // number of radii strictly above delta, plus one
  auto it = std::partition_point(radii_.begin(), radii_.end(),
                                 [&](double r) { return r > delta; });
  return double(it - radii_.begin()) + 1.0;
}

namespace {

double adaptive_trapezoid(const std::function<double(double)>& f, double a, double b,
                          double fa, double fb, int depth) {
  double m = 0.5 * (a + b);
  double fm = f(m);
  double t1 = 0.5 * (b - a) * (fa + fb);
  double t2 = 0.25 * (b - a) * (fa + 2.0 * fm + fb);
  if (depth >= 48 || std::abs(t2 - t1) <= 1e-6 * std::abs(t2)) return t2;
  return adaptive_trapezoid(f, a, m, fa, fm, depth + 1) +
         adaptive_trapezoid(f, m, b, fm, fb, depth + 1);
}

}  // namespace

double CoveringCurve::integral_pow(double a, double b, double expo) const {
  if (b <= a) return 0.0;
  if (analytic_) {
    auto f = [&](double x) { return std::pow(count(x), expo); };
    return adaptive_trapezoid(f, a, b, f(a), f(b), 0);
  }
  // exact integral of the step function
  std::vector<double> cuts;
  for (double r : radii_)
    if (r > a && r < b) cuts.push_back(r);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  double lo = a;
  auto add = [&](double hi) {
    if (hi > lo) total += (hi - lo) * std::pow(count(0.5 * (lo + hi)), expo);
    lo = hi;
  };
  for (double ccut : cuts) add(ccut);
  add(b);
  return total;
}

CoveringCurve covering_curve(const MetricSpace& space, const std::vector<int>& points) {
  if (points.empty()) throw Error("covering_curve needs points");
  const int n = (int)points.size();
  std::vector<double> dist(n);
  std::vector<double> radii;
  radii.reserve(n);
  int center = 0;
  for (int i = 0; i < n; ++i) dist[i] = space.distance(points[center], points[i]);
  while (true) {
    double far = 0.0;
    int next = -1;
    for (int i = 0; i < n; ++i)
      if (dist[i] > far) {
        far = dist[i];
        next = i;
      }
    radii.push_back(far);
    if ((int)radii.size() == n || next < 0) break;
    for (int i = 0; i < n; ++i)
      dist[i] = std::min(dist[i], space.distance(points[next], points[i]));
  }
  while ((int)radii.size() < n) radii.push_back(0.0);
  double diam = space.subset_diameter(points).value;
  return CoveringCurve::from_radii(std::move(radii), diam);
}

}  // namespace wrates
