#include "wrates/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <utility>

namespace wrates {

namespace {

double pow_p(double d, double p) {
  if (p == 1.0) return d;
  if (p == 2.0) return d * d;
  if (p == 1.5) return d * std::sqrt(d);
  return std::pow(d, p);
}

// -------- problem instance normalized for the solver (m <= n) --------

struct Instance {
  int m = 0, n = 0, dim = 0;
  MetricKind kind = MetricKind::euclidean;
  bool swapped = false;  // true when mu/nu were exchanged so m <= n
  std::vector<double> xs, ys;  // coordinate case, row major
  const MetricSpace* table = nullptr;
  std::vector<int> xi, yi;  // table case: space ids per atom
  std::vector<double> a, b;
  double p = 1.0;
  double scale = 1.0, inv_scale = 1.0;
  int64_t max_cost_int = 0;

  double dist(int i, int j) const {
    if (table) return table->distance(xi[i], yi[j]);
    const double* x = &xs[(size_t)i * dim];
    const double* y = &ys[(size_t)j * dim];
    if (kind == MetricKind::euclidean) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k) {
        double d = x[k] - y[k];
        s += d * d;
      }
      return std::sqrt(s);
    }
    double mx = 0.0;
    for (int k = 0; k < dim; ++k) mx = std::max(mx, std::abs(x[k] - y[k]));
    return mx;
  }

  int64_t cost_int(int i, int j) const { return llround(pow_p(dist(i, j), p) * scale); }

  // monotone in dist(i, j); cheaper for the euclidean case
  double dist_key(int i, int j) const {
    if (table) return table->distance(xi[i], yi[j]);
    const double* x = &xs[(size_t)i * dim];
    const double* y = &ys[(size_t)j * dim];
    if (kind == MetricKind::euclidean) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k) {
        double d = x[k] - y[k];
        s += d * d;
      }
      return s;
    }
    double mx = 0.0;
    for (int k = 0; k < dim; ++k) mx = std::max(mx, std::abs(x[k] - y[k]));
    return mx;
  }
};

// -------- transportation network simplex --------
//
// Nodes 0..m-1 are sources, m..m+n-1 targets, m+n the artificial root.
// Arcs 0..m+n-1 are the artificial arcs (source->root, root->target) at
// cost BIG; real arcs are appended behind them. Flow is stored on tree
// edges only (keyed by the child node). Alongside parent pointers the
// basis tree keeps a preorder thread (with inverse), subtree sizes and
// subtree tails, so a pivot costs O(cycle) for the walks plus
// O(min side) for the uniform potential shift; the shift lands on
// whichever side of the leaving cut is smaller, since a global
// potential offset never changes reduced costs. The basis stays
// strongly feasible via the last-blocking-arc leaving rule; a Bland
// fallback kicks in after a long degenerate streak as a safety net.

class NetSimplex {
 public:
  NetSimplex(int m, int n, const std::vector<double>& a, const std::vector<double>& b,
             int64_t big)
      : m_(m), n_(n), N_(m + n + 1), root_(m + n), big_(big) {
    int N = N_;
    parent_.assign(N, -1);
    pedge_.assign(N, -1);
    pdown_.assign(N, 0);
    flow_.assign(N, 0.0);
    pot_.assign(N, 0);
    thread_.assign(N, 0);
    rev_thread_.assign(N, 0);
    succ_num_.assign(N, 1);
    last_succ_.assign(N, 0);

    asrc_.reserve((size_t)m + n);
    adst_.reserve((size_t)m + n);
    acost_.reserve((size_t)m + n);
    for (int i = 0; i < m; ++i) {
      asrc_.push_back(i);
      adst_.push_back(root_);
      acost_.push_back(big);
    }
    for (int j = 0; j < n; ++j) {
      asrc_.push_back(root_);
      adst_.push_back(m + j);
      acost_.push_back(big);
    }
    for (int i = 0; i < m; ++i) {
      parent_[i] = root_;
      pedge_[i] = i;
      pdown_[i] = 0;  // arc i -> root, child is the source
      flow_[i] = a[i];
      pot_[i] = big;
    }
    for (int j = 0; j < n; ++j) {
      int x = m + j;
      parent_[x] = root_;
      pedge_[x] = m + j;
      pdown_[x] = 1;  // arc root -> target
      flow_[x] = b[j];
      pot_[x] = -big;
    }
    // initial preorder: root, then every node as a direct child
    thread_[root_] = 0;
    rev_thread_[0] = root_;
    for (int x = 0; x < m + n; ++x) {
      thread_[x] = x + 1 == m + n ? root_ : x + 1;
      if (x > 0) rev_thread_[x] = x - 1;
      last_succ_[x] = x;
    }
    rev_thread_[root_] = m + n - 1;
    succ_num_[root_] = N;
    last_succ_[root_] = m + n - 1;
    bland_after_ = 1000 + N_;
  }

  void add_arc(int i, int j, int64_t c) {
    asrc_.push_back(i);
    adst_.push_back(m_ + j);
    acost_.push_back(c);
  }

  size_t arc_count() const { return acost_.size(); }
  int64_t pivots() const { return pivots_; }
  const int64_t* potentials() const { return pot_.data(); }
  void use_pool_pricing(bool on) { pool_pricing_ = on; }

  void optimize() {
    next_arc_ = (size_t)(m_ + n_);
    while (true) {
      int a = find_entering();
      if (a < 0) break;
      pivot(a);
      // complement-side shifts drift all potentials together; recenter
      // now and then so the accumulated offset stays far from overflow
      if ((pivots_ & 0xFFFF) == 0 && pot_[root_] != 0) {
        const int64_t off = pot_[root_];
        for (int x = 0; x < N_; ++x) pot_[x] -= off;
      }
      if (pivots_ > pivot_cap()) throw ConvergenceFailure("network simplex pivot cap exceeded");
    }
  }

  double artificial_flow() const {
    double s = 0.0;
    for (int x = 0; x < m_ + n_; ++x)
      if (pedge_[x] == x && parent_[x] == root_) s += flow_[x];
    return s;
  }

  // visits every basic real arc with positive flow
  template <class F>
  void for_each_flow(F&& f) const {
    for (int x = 0; x < m_ + n_; ++x) {
      int e = pedge_[x];
      if (e < m_ + n_ || flow_[x] <= 0.0) continue;
      int s = asrc_[e], t = adst_[e];
      f(s, t - m_, flow_[x]);
    }
  }

 private:
  int64_t pivot_cap() const { return 1000000 + 500 * (int64_t)(N_ + acost_.size()); }

  int64_t reduced(int a) const { return acost_[a] - pot_[asrc_[a]] + pot_[adst_[a]]; }

  // artificial arcs never enter: they start basic and once out are
  // never needed again (zero artificial flow is checked at the end)
  //
  // two pricing rules share the block scan. With pooling on, the scan
  // gathers violated arcs into a pool that later pivots re-verify and
  // drain worst-first, approaching Dantzig quality at block-scan cost;
  // that pays off when arcs are few and pivots expensive (the column
  // generation regime). Dense instances fare better with plain
  // best-in-block plus rotation, which spreads entering arcs across
  // sources instead of draining one neighbourhood at a time.
  int find_entering() {
    const size_t A = acost_.size();
    const size_t lo = (size_t)(m_ + n_);
    if (A <= lo) return -1;
    if (bland_) {
      for (size_t a = lo; a < A; ++a)
        if (reduced((int)a) < 0) return (int)a;
      return -1;
    }
    if (!pool_pricing_) return find_entering_block();
    while (!cand_.empty()) {
      int best = -1;
      int64_t best_r = 0;
      size_t w = 0;
      for (int ar : cand_) {
        const int64_t r = reduced(ar);
        if (r < 0) {
          cand_[w++] = ar;
          if (r < best_r) {
            best_r = r;
            best = ar;
          }
        }
      }
      cand_.resize(w);
      if (best >= 0) return best;
    }
    const size_t live = A - lo;
    size_t block = 64;
    while (block * block < live) block += 64;
    size_t seen = 0, a = next_arc_;
    if (a < lo || a >= A) a = lo;
    size_t in_block = 0;
    while (seen < live) {
      if (reduced((int)a) < 0) cand_.push_back((int)a);
      ++seen;
      ++a;
      if (a == A) a = lo;
      if (++in_block == block) {
        if (cand_.size() >= kCandPool) break;
        in_block = 0;
      }
    }
    next_arc_ = a;
    if (cand_.empty()) return -1;
    int best = cand_[0];
    int64_t best_r = reduced(best);
    for (size_t k = 1; k < cand_.size(); ++k) {
      const int64_t r = reduced(cand_[k]);
      if (r < best_r) {
        best_r = r;
        best = cand_[k];
      }
    }
    return best;
  }

  int find_entering_block() {
    const size_t A = acost_.size();
    const size_t lo = (size_t)(m_ + n_);
    const size_t live = A - lo;
    size_t block = 64;
    while (block * block < live) block += 64;
    int best = -1;
    int64_t best_r = 0;
    size_t seen = 0, a = next_arc_;
    if (a < lo || a >= A) a = lo;
    size_t in_block = 0;
    while (seen < live) {
      const int64_t r = reduced((int)a);
      if (r < best_r) {
        best_r = r;
        best = (int)a;
      }
      ++seen;
      ++a;
      if (a == A) a = lo;
      if (++in_block == block) {
        if (best >= 0) break;
        in_block = 0;
      }
    }
    next_arc_ = a;
    return best;
  }

  // apex of the basic cycle; a node with the strictly smaller subtree
  // cannot be an ancestor of the other, so climbing it is always safe
  int lca(int u, int v) const {
    while (u != v) {
      if (succ_num_[u] < succ_num_[v])
        u = parent_[u];
      else
        v = parent_[v];
    }
    return u;
  }

  void pivot(int a) {
    ++pivots_;
    const int u = asrc_[a], v = adst_[a];
    const int64_t r = reduced(a);
    const int apex = lca(u, v);

    // leaving arc: minimal residual on the arcs that lose flow, picking
    // the last blocking arc in cycle direction (strong feasibility); in
    // Bland mode ties resolve to the smallest arc id instead
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    bool leave_v_side = false;
    for (int x = u; x != apex; x = parent_[x]) {
      if (!pdown_[x]) {
        bool take = bland_ ? (flow_[x] < theta ||
                              (flow_[x] == theta && leave >= 0 && pedge_[x] < pedge_[leave]))
                           : (flow_[x] < theta);
        if (take) {
          theta = flow_[x];
          leave = x;
          leave_v_side = false;
        }
      }
    }
    for (int x = v; x != apex; x = parent_[x]) {
      if (pdown_[x]) {
        bool take = bland_ ? (flow_[x] < theta ||
                              (flow_[x] == theta && leave >= 0 && pedge_[x] < pedge_[leave]))
                           : (flow_[x] <= theta);
        if (take) {
          theta = flow_[x];
          leave = x;
          leave_v_side = true;
        }
      }
    }
    if (leave < 0) throw ConvergenceFailure("transport polytope looks unbounded (solver bug)");

    if (theta > 0.0) {
      for (int x = u; x != apex; x = parent_[x]) flow_[x] += pdown_[x] ? theta : -theta;
      for (int x = v; x != apex; x = parent_[x]) flow_[x] += pdown_[x] ? -theta : theta;
      degen_streak_ = 0;
      if (bland_) bland_ = false;
    } else if (!bland_ && ++degen_streak_ > bland_after_) {
      bland_ = true;
    }

    // the detached subtree T hangs below the leaving arc; it re-roots
    // at the entering arc's inside endpoint w and re-attaches under the
    // outside endpoint
    const int w = leave_v_side ? v : u;
    const int w_out = leave_v_side ? u : v;
    const int tsz = succ_num_[leave];

    // rewire parent/pedge/pdown/flow along the path w -> leave; the
    // traversed path is kept for the preorder repair below
    path_.clear();
    int p_leave = -1;
    {
      int prev = w_out;
      int carry_arc = a;
      uint8_t carry_down = (w == v) ? 1 : 0;
      double carry_flow = theta;
      int x = w;
      while (true) {
        const int px = parent_[x];
        const int old_arc = pedge_[x];
        const uint8_t old_down = pdown_[x];
        const double old_flow = flow_[x];
        path_.push_back(x);
        parent_[x] = prev;
        pedge_[x] = carry_arc;
        pdown_[x] = carry_down;
        flow_[x] = carry_flow;
        if (x == leave) {
          p_leave = px;
          break;
        }
        prev = x;
        carry_arc = old_arc;
        carry_down = old_down ? 0 : 1;
        carry_flow = old_flow;
        x = px;
      }
    }
    const int L = (int)path_.size() - 1;

    // snapshots of the preorder indices along the path, taken before
    // any of them are overwritten
    ls_snap_.resize(path_.size());
    rv_snap_.resize(path_.size());
    tl_snap_.resize(path_.size());
    sn_snap_.resize(path_.size());
    for (size_t k = 0; k < path_.size(); ++k) {
      const int xk = path_[k];
      ls_snap_[k] = last_succ_[xk];
      rv_snap_[k] = rev_thread_[xk];
      tl_snap_[k] = thread_[last_succ_[xk]];
      sn_snap_[k] = succ_num_[xk];
    }

    // unlink T's old preorder interval [leave .. last_succ(leave)]
    const int bv = rv_snap_[L];
    const int av = tl_snap_[L];
    thread_[bv] = av;
    rev_thread_[av] = bv;

    // subtree tails that pointed at T's old end now stop just before it
    for (int anc = p_leave; anc >= 0 && last_succ_[anc] == ls_snap_[L]; anc = parent_[anc])
      last_succ_[anc] = bv;

    // stitch T's new preorder: w keeps its old block, then each path
    // node contributes its remaining interval, split around the block
    // that moved in front of it
    int prev_end = ls_snap_[0];
    for (int k = 1; k <= L; ++k) {
      const int xk = path_[k];
      thread_[prev_end] = xk;
      rev_thread_[xk] = prev_end;
      if (ls_snap_[k] == ls_snap_[k - 1]) {
        prev_end = rv_snap_[k - 1];
      } else {
        const int bstart = tl_snap_[k - 1];
        const int aend = rv_snap_[k - 1];
        thread_[aend] = bstart;
        rev_thread_[bstart] = aend;
        prev_end = ls_snap_[k];
      }
    }
    const int tail = prev_end;

    // insert the re-rooted block right after its new parent
    const int tnext = thread_[w_out];
    thread_[w_out] = w;
    rev_thread_[w] = w_out;
    thread_[tail] = tnext;
    rev_thread_[tnext] = tail;

    // a childless new parent extends its interval over the insertion
    for (int anc = w_out; anc >= 0 && last_succ_[anc] == w_out; anc = parent_[anc])
      last_succ_[anc] = tail;

    // every path node's new subtree ends at the block tail; its size is
    // T minus the part that moved above it
    for (size_t k = 0; k < path_.size(); ++k) last_succ_[path_[k]] = tail;
    succ_num_[w] = tsz;
    for (size_t k = 1; k < path_.size(); ++k) succ_num_[path_[k]] = tsz - sn_snap_[k - 1];

    // T switched branches: ancestor counts transfer between the old and
    // new attachment points, cancelling above the apex
    for (int anc = p_leave; anc != apex; anc = parent_[anc]) succ_num_[anc] -= tsz;
    for (int anc = w_out; anc != apex; anc = parent_[anc]) succ_num_[anc] += tsz;

    // the potential shift is uniform across the leaving cut: -r on the
    // side holding v, +r on the side holding u. A global constant never
    // changes reduced costs, so the smaller side takes the shift; both
    // sides are contiguous in the repaired preorder
    const int64_t delta = (w == v) ? -r : r;
    if (2 * tsz <= N_) {
      int x = w;
      for (int c = 0; c < tsz; ++c) {
        pot_[x] += delta;
        x = thread_[x];
      }
    } else {
      int x = tnext;
      for (int c = 0; c < N_ - tsz; ++c) {
        pot_[x] -= delta;
        x = thread_[x];
      }
    }
  }

  int m_, n_, N_, root_;
  int64_t big_;
  std::vector<int32_t> asrc_, adst_;
  std::vector<int64_t> acost_;
  std::vector<int> parent_, pedge_;
  std::vector<uint8_t> pdown_;
  std::vector<double> flow_;
  std::vector<int64_t> pot_;
  std::vector<int> thread_, rev_thread_, succ_num_, last_succ_;
  std::vector<int> path_, ls_snap_, rv_snap_, tl_snap_, sn_snap_;
  std::vector<int> cand_;
  bool pool_pricing_ = false;
  static constexpr size_t kCandPool = 128;
  size_t next_arc_ = 0;
  int64_t pivots_ = 0;
  int degen_streak_ = 0;
  int bland_after_ = 0;
  bool bland_ = false;
};

// -------- full-product pricing scan for column generation --------
//
// Finds arcs with negative reduced cost under the current duals without
// storing the product. The distance test is prefiltered with squared
// comparisons so sqrt/pow only runs on near-candidates. KIND: 0
// euclidean, 1 sup. PCASE: 0 p=1, 1 p=2, 2 p=1.5, 3 generic.

struct Harvest {
  // per-source top-k violated arcs plus the best arc per target
  int k;
  std::vector<int> src_tgt;       // m * k target ids, -1 empty
  std::vector<int64_t> src_viol;  // violation = thr - c > 0
  std::vector<int64_t> tgt_viol;  // per-target best violation
  std::vector<int> tgt_src;

  Harvest(int m, int n, int kk) : k(kk) {
    src_tgt.assign((size_t)m * k, -1);
    src_viol.assign((size_t)m * k, 0);
    tgt_viol.assign(n, 0);
    tgt_src.assign(n, -1);
  }

  void offer(int i, int j, int64_t viol) {
    int64_t* sv = &src_viol[(size_t)i * k];
    int* st = &src_tgt[(size_t)i * k];
    if (viol > sv[k - 1]) {
      int pos = k - 1;
      while (pos > 0 && sv[pos - 1] < viol) {
        sv[pos] = sv[pos - 1];
        st[pos] = st[pos - 1];
        --pos;
      }
      sv[pos] = viol;
      st[pos] = j;
    }
    if (viol > tgt_viol[j]) {
      tgt_viol[j] = viol;
      tgt_src[j] = i;
    }
  }
};

// uniform bucket index over the target atoms. Cells along axis 0 are
// consecutive in the CSR layout, so a box query walks contiguous item
// runs. Inactive for table metrics and high dimensions, where callers
// fall back to full scans.
struct TargetGrid {
  int dim = 0;
  double h = 1.0;
  std::vector<double> lo;
  std::vector<int> gk, stride;
  std::vector<int> start, items;
  std::vector<int> qa, qb, qi;  // box query scratch
  int total_cells = 0;

  bool active() const { return total_cells > 1; }

  explicit TargetGrid(const Instance& inst) {
    if (inst.table || inst.dim > 20 || inst.n < 64) return;
    dim = inst.dim;
    const int n = inst.n;
    lo.assign(dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
    for (int j = 0; j < n; ++j) {
      const double* y = &inst.ys[(size_t)j * dim];
      for (int k = 0; k < dim; ++k) {
        lo[k] = std::min(lo[k], y[k]);
        hi[k] = std::max(hi[k], y[k]);
      }
    }
    const int per = std::max(1, (int)std::ceil(std::pow(n / 4.0, 1.0 / dim)));
    double span = 0.0;
    for (int k = 0; k < dim; ++k) span = std::max(span, hi[k] - lo[k]);
    if (span <= 0.0) return;
    h = span / per * (1.0 + 1e-12);
    gk.resize(dim);
    stride.resize(dim);
    double cells = 1.0;
    for (int k = 0; k < dim; ++k) {
      gk[k] = std::clamp((int)((hi[k] - lo[k]) / h) + 1, 1, per);
      cells *= gk[k];
    }
    if (cells > 4.0 * n + 16.0 || cells < 2.0) return;
    int c = 1;
    for (int k = 0; k < dim; ++k) {
      stride[k] = c;
      c *= gk[k];
    }
    total_cells = c;
    start.assign(total_cells + 1, 0);
    items.resize(n);
    std::vector<int> cell(n);
    for (int j = 0; j < n; ++j) {
      cell[j] = cell_of(&inst.ys[(size_t)j * dim]);
      ++start[cell[j] + 1];
    }
    for (int t = 0; t < total_cells; ++t) start[t + 1] += start[t];
    std::vector<int> at(start.begin(), start.end() - 1);
    for (int j = 0; j < n; ++j) items[at[cell[j]]++] = j;
    qa.resize(dim);
    qb.resize(dim);
    qi.resize(dim);
  }

  int axis_cell(double c, int k) const {
    return std::clamp((int)((c - lo[k]) / h), 0, gk[k] - 1);
  }

  int cell_of(const double* y) const {
    int c = 0;
    for (int k = 0; k < dim; ++k) c += axis_cell(y[k], k) * stride[k];
    return c;
  }

  // number of cells a box query of radius R around x would touch
  double box_cells(const double* x, double R) const {
    double c = 1.0;
    for (int k = 0; k < dim; ++k)
      c *= axis_cell(x[k] + R, k) - axis_cell(x[k] - R, k) + 1;
    return c;
  }

  // calls f(j) for every target within L-inf radius R of x (and
  // possibly a few beyond it; callers re-check exact distances)
  template <class F>
  void for_box(const double* x, double R, F&& f) {
    for (int k = 0; k < dim; ++k) {
      qa[k] = axis_cell(x[k] - R, k);
      qb[k] = axis_cell(x[k] + R, k);
      qi[k] = qa[k];
    }
    while (true) {
      int base = 0;
      for (int k = 1; k < dim; ++k) base += qi[k] * stride[k];
      const int c0 = base + qa[0], c1 = base + qb[0];
      for (int t = start[c0]; t < start[c1 + 1]; ++t) f(items[t]);
      int k = 1;
      while (k < dim) {
        if (++qi[k] <= qb[k]) break;
        qi[k] = qa[k];
        ++k;
      }
      if (k >= dim) break;
    }
  }
};

// per-pair violation check shared by the full and the grid scans
template <int KIND, int PCASE>
inline void offer_if_violated(const Instance& inst, const int64_t* B, int64_t Ai,
                              const double* x, int i, int j, Harvest& h) {
  const int64_t thr = Ai - B[j];
  if (thr <= 0) return;
  const double u = (double)(thr + 1) * inst.inv_scale;  // candidate iff dist^p < u
  const double* y = &inst.ys[(size_t)j * inst.dim];
  const int dim = inst.dim;
  double d;
  if constexpr (KIND == 0) {
    double d2 = 0.0;
    for (int kk = 0; kk < dim; ++kk) {
      double t = x[kk] - y[kk];
      d2 += t * t;
    }
    if constexpr (PCASE == 0) {
      if (d2 >= u * u) return;
    } else if constexpr (PCASE == 1) {
      if (d2 >= u) return;
    } else if constexpr (PCASE == 2) {
      double u2 = u * u;
      if (d2 * d2 * d2 >= u2 * u2) return;
    } else {
      double du = std::pow(u, 2.0 / inst.p);
      if (d2 >= du) return;
    }
    d = std::sqrt(d2);
  } else {
    double du;
    if constexpr (PCASE == 0)
      du = u;
    else if constexpr (PCASE == 1)
      du = std::sqrt(u);
    else
      du = std::pow(u, 1.0 / inst.p);
    double mx = 0.0;
    for (int kk = 0; kk < dim; ++kk) {
      double t = std::abs(x[kk] - y[kk]);
      if (t > mx) {
        mx = t;
        if (mx >= du) break;
      }
    }
    if (mx >= du) return;
    d = mx;
  }
  const int64_t c = llround(pow_p(d, inst.p) * inst.scale);
  if (c < thr) h.offer(i, j, thr - c);
}

// largest distance that could still violate given the best target
// potential; doubles as the box-query radius
template <int PCASE>
inline double violation_radius(const Instance& inst, int64_t thr_max) {
  const double u = (double)(thr_max + 1) * inst.inv_scale;
  if constexpr (PCASE == 0) return u;
  if constexpr (PCASE == 1) return std::sqrt(u);
  if constexpr (PCASE == 2) return std::cbrt(u * u);
  return std::pow(u, 1.0 / inst.p);
}

template <int KIND, int PCASE>
void scan_violated(const Instance& inst, const int64_t* pot, TargetGrid& grid, Harvest& h) {
  const int m = inst.m, n = inst.n, dim = inst.dim;
  const int64_t* B = pot + m;
  int64_t minB = B[0];
  for (int j = 1; j < n; ++j) minB = std::min(minB, B[j]);
  const bool spatial = grid.active();
  for (int i = 0; i < m; ++i) {
    const int64_t Ai = pot[i];
    if (Ai - minB <= 0) continue;
    const double* x = &inst.xs[(size_t)i * dim];
    if (spatial) {
      const double R = violation_radius<PCASE>(inst, Ai - minB);
      if (grid.box_cells(x, R) < 0.6 * grid.total_cells) {
        grid.for_box(x, R, [&](int j) { offer_if_violated<KIND, PCASE>(inst, B, Ai, x, i, j, h); });
        continue;
      }
    }
    for (int j = 0; j < n; ++j) offer_if_violated<KIND, PCASE>(inst, B, Ai, x, i, j, h);
  }
}

void scan_dispatch(const Instance& inst, const int64_t* pot, TargetGrid& grid, Harvest& h) {
  const int kind = inst.kind == MetricKind::euclidean ? 0 : 1;
  int pc = 3;
  if (inst.p == 1.0) pc = 0;
  else if (inst.p == 2.0) pc = 1;
  else if (inst.p == 1.5) pc = 2;
  if (kind == 0) {
    if (pc == 0) scan_violated<0, 0>(inst, pot, grid, h);
    else if (pc == 1) scan_violated<0, 1>(inst, pot, grid, h);
    else if (pc == 2) scan_violated<0, 2>(inst, pot, grid, h);
    else scan_violated<0, 3>(inst, pot, grid, h);
  } else {
    if (pc == 0) scan_violated<1, 0>(inst, pot, grid, h);
    else if (pc == 1) scan_violated<1, 1>(inst, pot, grid, h);
    else if (pc == 2) scan_violated<1, 2>(inst, pot, grid, h);
    else scan_violated<1, 3>(inst, pot, grid, h);
  }
}

// -------- instance construction --------

void check_compatible(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const MetricSpace& A = mu.space();
  const MetricSpace& B = nu.space();
  if (&A == &B) return;
  if (!A.has_coords() || !B.has_coords())
    throw DimensionMismatch("table-space measures must share one space");
  if (A.kind() != B.kind() || A.dim() != B.dim())
    throw DimensionMismatch("measures live on incompatible coordinate spaces");
}

Instance build_instance(const DiscreteMeasure& mu0, const DiscreteMeasure& nu0, double p,
                        double mass_tol) {
  if (p < 1.0) throw Error("exponent p must be >= 1");
  check_compatible(mu0, nu0);
  DiscreteMeasure mu = mu0.without_zero_atoms();
  DiscreteMeasure nu = nu0.without_zero_atoms();
  if (mu.size() == 0 || nu.size() == 0)
    throw InvalidMeasure("transport between zero measures is undefined");
  double sa = mu.total_mass(), sb = nu.total_mass();
  if (std::abs(sa - sb) > mass_tol * std::max({sa, sb, 1.0}))
    throw InvalidMeasure("total masses differ beyond tolerance");

  Instance inst;
  inst.p = p;
  inst.swapped = mu.size() > nu.size();
  const DiscreteMeasure& src = inst.swapped ? nu : mu;
  const DiscreteMeasure& dst = inst.swapped ? mu : nu;
  inst.m = src.size();
  inst.n = dst.size();
  inst.a = src.weights();
  inst.b = dst.weights();
  // rescale the target side so supplies and demands balance exactly
  double ssum = 0.0, dsum = 0.0;
  for (double w : inst.a) ssum += w;
  for (double w : inst.b) dsum += w;
  double f = ssum / dsum;
  for (double& w : inst.b) w *= f;

  const MetricSpace& S = src.space();
  const MetricSpace& D = dst.space();
  if (!S.has_coords()) {
    inst.table = &S;
    inst.xi = src.support();
    inst.yi = dst.support();
    inst.kind = MetricKind::custom_table;
  } else {
    inst.kind = S.kind();
    inst.dim = S.dim();
    inst.xs.resize((size_t)inst.m * inst.dim);
    inst.ys.resize((size_t)inst.n * inst.dim);
    for (int i = 0; i < inst.m; ++i)
      std::copy_n(S.point(src.support()[i]), inst.dim, &inst.xs[(size_t)i * inst.dim]);
    for (int j = 0; j < inst.n; ++j)
      std::copy_n(D.point(dst.support()[j]), inst.dim, &inst.ys[(size_t)j * inst.dim]);
  }

  // integer cost scale from a triangle-inequality bound on the max distance
  double dx = 0.0, dy = 0.0;
  for (int i = 0; i < inst.m; ++i) dx = std::max(dx, inst.dist(i, 0));
  if (inst.table) {
    for (int j = 0; j < inst.n; ++j)
      dy = std::max(dy, inst.table->distance(inst.yi[0], inst.yi[j]));
  } else {
    const double* y0 = &inst.ys[0];
    for (int j = 0; j < inst.n; ++j) {
      const double* y = &inst.ys[(size_t)j * inst.dim];
      double d;
      if (inst.kind == MetricKind::euclidean) {
        double s = 0.0;
        for (int k = 0; k < inst.dim; ++k) {
          double t = y[k] - y0[k];
          s += t * t;
        }
        d = std::sqrt(s);
      } else {
        d = 0.0;
        for (int k = 0; k < inst.dim; ++k) d = std::max(d, std::abs(y[k] - y0[k]));
      }
      dy = std::max(dy, d);
    }
  }
  double maxd = dx + dy;
  double maxc = pow_p(maxd, p);
  if (maxc > 0.0) {
    inst.scale = 1e9 / maxc;
    inst.inv_scale = maxc / 1e9;
    inst.max_cost_int = (int64_t)1e9 + 1;
  } else {
    inst.scale = 1.0;
    inst.inv_scale = 1.0;
    inst.max_cost_int = 1;
  }
  return inst;
}

// -------- initial arc set for column generation --------
//
// Supply-scaled nearest neighbors per source. Pivots are two orders of
// magnitude cheaper while the basis tree is still shallow, so the bulk
// of the arcs should be on the table before the first optimize; the
// pricing rounds afterwards only repair boundaries between regions.

// seeds the restricted problem with each source's nearest targets,
// scaled so heavy sources get enough fan-out to place their supply
void add_knn_arcs(const Instance& inst, TargetGrid& grid, NetSimplex& ns) {
  const int m = inst.m, n = inst.n, dim = inst.dim;
  double total_a = 0.0;
  for (double w : inst.a) total_a += w;
  const double avg_b = total_a > 0.0 ? total_a / n : 1.0;
  const bool spatial = grid.active();
  std::vector<std::pair<double, int>> heap;
  std::vector<int> ctr(spatial ? dim : 0);
  auto offer = [&](size_t k, double d, int j) {
    if (heap.size() < k) {
      heap.emplace_back(d, j);
      std::push_heap(heap.begin(), heap.end());
    } else if (d < heap.front().first) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = {d, j};
      std::push_heap(heap.begin(), heap.end());
    }
  };
  for (int i = 0; i < m; ++i) {
    const size_t k = (size_t)std::min<double>((double)n,
                                              8.0 + 2.0 * std::ceil(inst.a[i] / avg_b));
    heap.clear();
    if (!spatial) {
      for (int j = 0; j < n; ++j) offer(k, inst.dist_key(i, j), j);
    } else {
      // grow chebyshev cell rings until the heap cannot improve; a
      // ring-r cell is at least (r-1)*h away from the query point
      const double* x = &inst.xs[(size_t)i * dim];
      int rmax = 0;
      for (int kk = 0; kk < dim; ++kk) {
        ctr[kk] = grid.axis_cell(x[kk], kk);
        rmax = std::max(rmax, std::max(ctr[kk], grid.gk[kk] - 1 - ctr[kk]));
      }
      for (int r = 0; r <= rmax; ++r) {
        if (r > 0 && heap.size() >= k) {
          const double lb = (r - 1) * grid.h;
          const double lbkey = inst.kind == MetricKind::euclidean ? lb * lb : lb;
          if (lbkey >= heap.front().first) break;
        }
        // rows of the ring: full rows where a higher axis hits |off| = r,
        // otherwise just the two edge cells of axis 0
        for (int kk = 1; kk < dim; ++kk)
          grid.qi[kk] = std::max(0, ctr[kk] - r);
        while (true) {
          int base = 0, hi = 0;
          for (int kk = 1; kk < dim; ++kk) {
            base += grid.qi[kk] * grid.stride[kk];
            hi = std::max(hi, std::abs(grid.qi[kk] - ctr[kk]));
          }
          auto visit_run = [&](int clo, int chi) {
            if (clo > chi) return;
            for (int t = grid.start[base + clo]; t < grid.start[base + chi + 1]; ++t) {
              const int j = grid.items[t];
              offer(k, inst.dist_key(i, j), j);
            }
          };
          if (hi == r) {
            visit_run(std::max(0, ctr[0] - r), std::min(grid.gk[0] - 1, ctr[0] + r));
          } else {
            if (ctr[0] - r >= 0) visit_run(ctr[0] - r, ctr[0] - r);
            if (ctr[0] + r <= grid.gk[0] - 1) visit_run(ctr[0] + r, ctr[0] + r);
          }
          int kk = 1;
          while (kk < dim) {
            if (++grid.qi[kk] <= std::min(grid.gk[kk] - 1, ctr[kk] + r)) break;
            grid.qi[kk] = std::max(0, ctr[kk] - r);
            ++kk;
          }
          if (kk >= dim) break;
        }
      }
    }
    for (const auto& c : heap) ns.add_arc(i, c.second, inst.cost_int(i, c.second));
  }
}

constexpr size_t kDenseLimit = 3000000;

}  // namespace

double plan_cost_p(const TransportPlan& plan) {
  double s = 0.0;
  for (const auto& e : plan.entries) s += e.mass * pow_p(e.distance, plan.p);
  return s;
}

double atom_distance(const DiscreteMeasure& mu, int i, const DiscreteMeasure& nu, int j) {
  check_compatible(mu, nu);
  const MetricSpace& A = mu.space();
  const MetricSpace& B = nu.space();
  if (&A == &B) return A.distance(mu.support()[i], nu.support()[j]);
  return A.distance_to(mu.support()[i], B.point(nu.support()[j]));
}

WpSolution exact_wp(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                    const WpOptions& opts) {
  Instance inst = build_instance(mu, nu, p, opts.mass_tol);
  WpSolution out;
  out.plan.p = p;

  double total_mass = 0.0;
  for (double w : inst.a) total_mass += w;

  // all points coincide: nothing to move
  if (inst.max_cost_int <= 1) {
    out.value = 0.0;
    out.value_p = 0.0;
    if (opts.want_plan) {
      int i = 0, j = 0;
      std::vector<double> ra = inst.a, rb = inst.b;
      while (i < inst.m && j < inst.n) {
        double take = std::min(ra[i], rb[j]);
        TransportPlan::Entry e;
        e.src = inst.swapped ? j : i;
        e.dst = inst.swapped ? i : j;
        e.mass = take;
        e.distance = inst.dist(i, j);
        out.plan.entries.push_back(e);
        ra[i] -= take;
        rb[j] -= take;
        if (ra[i] <= rb[j])
          ++i;
        else
          ++j;
      }
    }
    return out;
  }

  const int64_t big = inst.max_cost_int + 1;
  NetSimplex ns(inst.m, inst.n, inst.a, inst.b, big);

  const size_t prod = (size_t)inst.m * (size_t)inst.n;
  if (inst.table || prod <= kDenseLimit) {
    if (prod > 20000000) throw Error("instance too large for a dense arc list");
    for (int i = 0; i < inst.m; ++i)
      for (int j = 0; j < inst.n; ++j) ns.add_arc(i, j, inst.cost_int(i, j));
    ns.optimize();
    out.stats.pricing_rounds = 1;
  } else {
    ns.use_pool_pricing(true);
    TargetGrid grid(inst);
    add_knn_arcs(inst, grid, ns);
    ns.optimize();
    const int kPerSrc = 16;
    for (int round = 0;; ++round) {
      if (round > 500) throw ConvergenceFailure("column generation failed to converge");
      Harvest h(inst.m, inst.n, kPerSrc);
      scan_dispatch(inst, ns.potentials(), grid, h);
      size_t added = 0;
      for (int i = 0; i < inst.m; ++i)
        for (int k = 0; k < kPerSrc; ++k) {
          int j = h.src_tgt[(size_t)i * kPerSrc + k];
          if (j < 0) break;
          ns.add_arc(i, j, inst.cost_int(i, j));
          ++added;
        }
      for (int j = 0; j < inst.n; ++j) {
        int i = h.tgt_src[j];
        if (i < 0) continue;
        bool dup = false;
        for (int k = 0; k < kPerSrc; ++k)
          if (h.src_tgt[(size_t)i * kPerSrc + k] == j) {
            dup = true;
            break;
          }
        if (!dup) {
          ns.add_arc(i, j, inst.cost_int(i, j));
          ++added;
        }
      }
      out.stats.pricing_rounds = round + 1;
      if (added == 0) break;
      ns.optimize();
    }
  }

  if (ns.artificial_flow() > 1e-9 * total_mass)
    throw ConvergenceFailure("solver left mass on artificial arcs");

  // read the basic flows; cost is recomputed from raw distances
  std::vector<TransportPlan::Entry> entries;
  ns.for_each_flow([&](int i, int j, double mass) {
    TransportPlan::Entry e;
    e.src = inst.swapped ? j : i;
    e.dst = inst.swapped ? i : j;
    e.mass = mass;
    e.distance = inst.dist(i, j);
    entries.push_back(e);
  });
  std::sort(entries.begin(), entries.end(), [](const auto& l, const auto& r) {
    return l.src != r.src ? l.src < r.src : l.dst < r.dst;
  });

  // conservation sanity check on the recovered plan
  {
    std::vector<double> sa(inst.m, 0.0), sb(inst.n, 0.0);
    for (const auto& e : entries) {
      sa[inst.swapped ? e.dst : e.src] += e.mass;
      sb[inst.swapped ? e.src : e.dst] += e.mass;
    }
    double err = 0.0;
    for (int i = 0; i < inst.m; ++i) err = std::max(err, std::abs(sa[i] - inst.a[i]));
    for (int j = 0; j < inst.n; ++j) err = std::max(err, std::abs(sb[j] - inst.b[j]));
    if (err > 1e-7 * std::max(1.0, total_mass))
      throw ConvergenceFailure("transport plan violates its marginals");
  }

  double cost_p = 0.0;
  for (const auto& e : entries) cost_p += e.mass * pow_p(e.distance, p);
  out.value_p = cost_p;
  out.value = std::pow(cost_p, 1.0 / p);
  out.stats.pivots = ns.pivots();
  out.stats.arcs = ns.arc_count();
  if (opts.want_plan) {
    out.plan.entries = std::move(entries);
    out.plan.cost_p = cost_p;
    out.plan.cost = out.value;
  }
  return out;
}

// -------- dense tableau simplex oracle --------

double brute_force_wp(const DiscreteMeasure& mu0, const DiscreteMeasure& nu0, double p) {
  if (p < 1.0) throw Error("exponent p must be >= 1");
  check_compatible(mu0, nu0);
  DiscreteMeasure mu = mu0.without_zero_atoms();
  DiscreteMeasure nu = nu0.without_zero_atoms();
  if (mu.size() == 0 || nu.size() == 0)
    throw InvalidMeasure("transport between zero measures is undefined");
  const int m = mu.size(), n = nu.size();
  if ((size_t)m * n > 64) throw Error("brute_force_wp is limited to 64 cost cells");
  double sa = mu.total_mass(), sb = nu.total_mass();
  if (std::abs(sa - sb) > 1e-9 * std::max({sa, sb, 1.0}))
    throw InvalidMeasure("total masses differ beyond tolerance");

  std::vector<double> a(mu.weights()), b(nu.weights());
  double f = sa / sb;
  for (double& w : b) w *= f;

  std::vector<double> c((size_t)m * n);
  double cmax = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      c[(size_t)i * n + j] = pow_p(atom_distance(mu, i, nu, j), p);
      cmax = std::max(cmax, c[(size_t)i * n + j]);
    }

  const int R = m + n - 1;  // last column-sum constraint is redundant
  const int V = m * n;
  // tableau rows: [A | rhs], basis found by north-west corner
  std::vector<std::vector<double>> T(R, std::vector<double>(V + 1, 0.0));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) T[i][(size_t)i * n + j] = 1.0;
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i < m; ++i) T[m + j][(size_t)i * n + j] = 1.0;
  for (int i = 0; i < m; ++i) T[i][V] = a[i];
  for (int j = 0; j + 1 < n; ++j) T[m + j][V] = b[j];

  std::vector<int> basis;
  {
    std::vector<double> ra(a), rb(b);
    int i = 0, j = 0;
    while (true) {
      basis.push_back(i * n + j);
      double take = std::min(ra[i], rb[j]);
      ra[i] -= take;
      rb[j] -= take;
      if (i == m - 1 && j == n - 1) break;
      if (i < m - 1 && (ra[i] <= rb[j] || j == n - 1))
        ++i;
      else
        ++j;
    }
  }
  if ((int)basis.size() != R)
    throw ConvergenceFailure("north-west corner basis has unexpected size");

  std::vector<int> basis_of_row(R, -1);
  auto pivot_on = [&](int row, int col) {
    double pv = T[row][col];
    for (int k = 0; k <= V; ++k) T[row][k] /= pv;
    for (int r = 0; r < R; ++r) {
      if (r == row) continue;
      double fct = T[r][col];
      if (fct == 0.0) continue;
      for (int k = 0; k <= V; ++k) T[r][k] -= fct * T[row][k];
    }
    basis_of_row[row] = col;
  };

  // reduce initial basis columns to an identity
  {
    std::vector<bool> row_used(R, false);
    for (int col : basis) {
      int pr = -1;
      double best = 0.0;
      for (int r = 0; r < R; ++r)
        if (!row_used[r] && std::abs(T[r][col]) > best) {
          best = std::abs(T[r][col]);
          pr = r;
        }
      if (pr < 0 || best < 1e-12)
        throw ConvergenceFailure("degenerate north-west corner basis");
      row_used[pr] = true;
      pivot_on(pr, col);
    }
  }

  const double tol = 1e-10 * std::max(1.0, cmax);
  std::vector<double> red(V);
  for (int iter = 0; iter < 200000; ++iter) {
    for (int v = 0; v < V; ++v) red[v] = c[v];
    for (int r = 0; r < R; ++r) {
      double cb = c[basis_of_row[r]];
      if (cb == 0.0) continue;
      for (int v = 0; v < V; ++v) red[v] -= cb * T[r][v];
    }
    int enter = -1;
    for (int v = 0; v < V; ++v)
      if (red[v] < -tol) {
        enter = v;  // Bland: smallest improving index
        break;
      }
    if (enter < 0) {
      double cost = 0.0;
      for (int r = 0; r < R; ++r) cost += c[basis_of_row[r]] * std::max(0.0, T[r][V]);
      return std::pow(cost, 1.0 / p);
    }
    int lrow = -1;
    double lratio = 0.0;
    for (int r = 0; r < R; ++r) {
      if (T[r][enter] <= 1e-11) continue;
      double ratio = T[r][V] / T[r][enter];
      if (lrow < 0 || ratio < lratio - 1e-15 ||
          (std::abs(ratio - lratio) <= 1e-15 && basis_of_row[r] < basis_of_row[lrow])) {
        lrow = r;
        lratio = ratio;
      }
    }
    if (lrow < 0) throw ConvergenceFailure("dense simplex found an unbounded ray");
    pivot_on(lrow, enter);
  }
  throw ConvergenceFailure("dense simplex iteration cap exceeded");
}

// -------- 1-d quantile coupling --------

double wp_1d(const DiscreteMeasure& mu0, const DiscreteMeasure& nu0, double p) {
  if (p < 1.0) throw Error("exponent p must be >= 1");
  const MetricSpace& A = mu0.space();
  const MetricSpace& B = nu0.space();
  if (!A.has_coords() || !B.has_coords() || A.dim() != 1 || B.dim() != 1)
    throw DimensionMismatch("wp_1d needs 1-dimensional coordinate spaces");
  DiscreteMeasure mu = mu0.without_zero_atoms();
  DiscreteMeasure nu = nu0.without_zero_atoms();
  if (mu.size() == 0 || nu.size() == 0)
    throw InvalidMeasure("transport between zero measures is undefined");
  double sa = mu.total_mass(), sb = nu.total_mass();
  if (std::abs(sa - sb) > 1e-9 * std::max({sa, sb, 1.0}))
    throw InvalidMeasure("total masses differ beyond tolerance");

  auto sorted_atoms = [](const DiscreteMeasure& m) {
    std::vector<std::pair<double, double>> v(m.size());
    for (int i = 0; i < m.size(); ++i)
      v[i] = {m.space().point(m.support()[i])[0], m.weights()[i]};
    std::sort(v.begin(), v.end());
    return v;
  };
  auto va = sorted_atoms(mu);
  auto vb = sorted_atoms(nu);
  double fb = sa / sb;

  size_t ia = 0, ib = 0;
  double ra = va[0].second, rb = vb[0].second * fb;
  double acc = 0.0;
  while (true) {
    double take = std::min(ra, rb);
    acc += take * pow_p(std::abs(va[ia].first - vb[ib].first), p);
    ra -= take;
    rb -= take;
    if (ra <= 0.0) {
      ++ia;
      if (ia == va.size()) break;
      ra = va[ia].second;
    }
    if (rb <= 0.0) {
      ++ib;
      if (ib == vb.size()) break;
      rb = vb[ib].second * fb;
    }
  }
  return std::pow(acc, 1.0 / p);
}

void write_plan_csv(const std::string& path, const TransportPlan& plan) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "src,dst,mass,distance\n";
  for (const auto& e : plan.entries)
    out << e.src << "," << e.dst << "," << fmt_g17(e.mass) << "," << fmt_g17(e.distance)
        << "\n";
}

}  // namespace wrates
