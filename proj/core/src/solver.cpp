#include "hps/solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <new>
#include <sstream>
#include <thread>

namespace hps {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
// exception after all workers have stopped.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min(threads, n);
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

RankStats rank_stats(const HbsMatrix& H) {
  RankStats s;
  double sum = 0.0;
  for (int t = 1; t < H.tree().size(); ++t) {
    for (Index k : {H.row_rank(t), H.col_rank(t)}) {
      s.min_rank = s.nodes == 0 ? k : std::min(s.min_rank, k);
      s.max_rank = std::max(s.max_rank, k);
      sum += static_cast<double>(k);
      ++s.nodes;
    }
  }
  s.mean_rank = s.nodes > 0 ? sum / static_cast<double>(s.nodes) : 0.0;
  return s;
}

Index scalar_count(const SolutionOperator& S) {
  if (const auto* m = std::get_if<Matrix>(&S)) return m->size();
  const auto& lr = std::get<LowRank>(S);
  return lr.left.size() + lr.right.size();
}

Index scalar_count(const DtnOperator& T) {
  if (const auto* m = std::get_if<Matrix>(&T)) return m->size();
  return std::get<HbsMatrix>(T).entry_count();
}

}  // namespace

HpsSolver::HpsSolver(const Rectangle& domain, int levels, int q, CoefficientField coeffs,
                     SolverOptions options)
    : disc_(build_tree(domain, levels, q)), options_(options) {
  if (!(options_.tol > 0.0) || !(options_.tol < 1.0))
    throw ConfigError("solver tolerance must lie in (0, 1)");
  if (options_.switch_threshold < 0) throw ConfigError("switch threshold must be non-negative");
  if (options_.threads < 1) throw ConfigError("thread count must be positive");
  leaf_disc_ = std::make_shared<const LeafDiscretization>(q);
  build(coeffs);
}

HbsMatrix HpsSolver::as_hbs(DtnOperator op, int box) const {
  if (auto* h = std::get_if<HbsMatrix>(&op)) return std::move(*h);
  return compress_dense(std::get<Matrix>(op), box_index_tree(tree().box(box), tree().q()),
                        options_.tol);
}

void HpsSolver::build(const CoefficientField& coeffs) {
  const BoxTree& bt = tree();
  const auto nbox = static_cast<std::size_t>(bt.size());
  psi_.assign(nbox, Matrix());
  s_ops_.clear();
  s_ops_.resize(nbox);
  box_ranks_.assign(nbox, RankStats{});
  std::vector<DtnOperator> T(nbox);

  std::vector<std::vector<int>> by_depth(static_cast<std::size_t>(bt.max_depth() + 1));
  for (int i = 0; i < bt.size(); ++i)
    by_depth[static_cast<std::size_t>(bt.box(i).depth)].push_back(i);

  std::atomic<int> dense_merges{0}, hbs_merges{0};
  try {
    for (int depth = bt.max_depth(); depth >= 0; --depth) {
      const auto& ids = by_depth[static_cast<std::size_t>(depth)];
      const bool leaf_level = bt.box(ids.front()).is_leaf();
      const auto t0 = Clock::now();
      parallel_for(static_cast<int>(ids.size()), options_.threads, [&](int k) {
        const int id = ids[static_cast<std::size_t>(k)];
        const auto uid = static_cast<std::size_t>(id);
        const BoxNode& box = bt.box(id);
        if (box.is_leaf()) {
          LeafOperators ops = build_leaf_dtn(coeffs, box.rect, *leaf_disc_, id);
          T[uid] = std::move(ops.T);
          psi_[uid] = std::move(ops.Psi);
          return;
        }
        const auto ua = static_cast<std::size_t>(box.child_a);
        const auto ub = static_cast<std::size_t>(box.child_b);
        const Index child_size = std::max(bt.box(box.child_a).side_offset[4],
                                          bt.box(box.child_b).side_offset[4]);
        if (child_size > options_.switch_threshold) {
          const HbsMatrix Ta = as_hbs(std::move(T[ua]), box.child_a);
          const HbsMatrix Tb = as_hbs(std::move(T[ub]), box.child_b);
          T[ua] = Matrix();
          T[ub] = Matrix();
          HbsMerge m = merge_hbs(Ta, Tb, bt, id, options_.tol);
          box_ranks_[uid] = rank_stats(m.T);
          s_ops_[uid] = std::make_unique<SolutionOperator>(std::move(m.S));
          T[uid] = std::move(m.T);
          ++hbs_merges;
        } else {
          const MergeIndexSplit split =
              split_indices(box, bt.box(box.child_a), bt.box(box.child_b));
          DenseMerge m = merge_dense(std::get<Matrix>(T[ua]), std::get<Matrix>(T[ub]), split, bt.q(), id);
          s_ops_[uid] = std::make_unique<SolutionOperator>(std::move(m.S));
          T[uid] = std::move(m.T);
          ++dense_merges;
        }
        // Children's DtN maps are no longer needed.
        T[ua] = Matrix();
        T[ub] = Matrix();
      });
      (leaf_level ? stats_.leaf_seconds : stats_.merge_seconds) += seconds_since(t0);
    }
  } catch (const std::bad_alloc&) {
    MemoryReport partial = memory_report();
    std::ostringstream msg;
    msg << "out of memory during build after storing " << partial.megabytes << " MB";
    throw BuildMemoryError(msg.str(), std::move(partial));
  }
  root_dtn_ = std::move(T[0]);
  stats_.dense_merges = dense_merges.load();
  stats_.hbs_merges = hbs_merges.load();
}

Vector HpsSolver::boundary_values(const CoefficientField::Function& f) const {
  const auto& ids = boundary_nodes();
  Vector out(static_cast<Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k)
    out(static_cast<Index>(k)) = f(nodes().points[static_cast<std::size_t>(ids[k])]);
  return out;
}

const SolutionOperator* HpsSolver::solution_operator(int box) const {
  return s_ops_.at(static_cast<std::size_t>(box)).get();
}

const Matrix& HpsSolver::leaf_psi(int leaf) const {
  if (!tree().box(leaf).is_leaf()) throw Error("leaf_psi: box is not a leaf");
  return psi_.at(static_cast<std::size_t>(leaf));
}

Vector HpsSolver::solve(const Vector& f) const {
  const auto& bnd = boundary_nodes();
  if (f.size() != static_cast<Index>(bnd.size()))
    throw Error("solve: boundary data has the wrong length");
  Vector u = Vector::Zero(nodes().size());
  u(bnd) = f;
  const BoxTree& bt = tree();
  for (int id = 0; id < bt.size(); ++id) {
    const BoxNode& box = bt.box(id);
    if (box.is_leaf()) continue;
    const Vector ue = u(box.exterior);
    const auto& S = *s_ops_[static_cast<std::size_t>(id)];
    if (const auto* m = std::get_if<Matrix>(&S))
      u(box.interior) = *m * ue;
    else
      u(box.interior) = std::get<LowRank>(S).apply(ue);
  }
  // Shared-edge values are fixed only up to junction modes, which vanish on
  // the leaf Chebyshev grids. Re-tabulate them from the leaf fields.
  const int q = bt.q();
  const GlobalNodeSet& g = nodes();
  Vector sum = Vector::Zero(u.size());
  Eigen::VectorXi count = Eigen::VectorXi::Zero(u.size());
  for (int id = 0; id < bt.size(); ++id) {
    const BoxNode& box = bt.box(id);
    if (!box.is_leaf()) continue;
    const Vector w = leaf_grid(u, id);
    Vector sides(4 * q);
    for (int k = 0; k < q; ++k) {
      sides(k) = w(leaf_disc_->grid_index(k, 0));
      sides(q + k) = w(leaf_disc_->grid_index(q - 1, k));
      sides(2 * q + k) = w(leaf_disc_->grid_index(k, q - 1));
      sides(3 * q + k) = w(leaf_disc_->grid_index(0, k));
    }
    const Vector ug = leaf_disc_->cheb_to_gauss * sides;
    for (std::size_t k = 0; k < box.exterior.size(); ++k) {
      const Index gid = box.exterior[k];
      if (g.on_boundary[static_cast<std::size_t>(gid)]) continue;
      sum(gid) += ug(static_cast<Index>(k));
      ++count(gid);
    }
  }
  for (Index i = 0; i < u.size(); ++i)
    if (count(i) > 0) u(i) = sum(i) / count(i);
  return u;
}

Vector HpsSolver::apply_global_dtn(const Vector& f) const {
  if (f.size() != static_cast<Index>(boundary_nodes().size()))
    throw Error("apply_global_dtn: boundary data has the wrong length");
  if (const auto* m = std::get_if<Matrix>(&root_dtn_)) return *m * f;
  return hbs_apply(std::get<HbsMatrix>(root_dtn_), f);
}

int HpsSolver::locate_leaf(Point x) const {
  const Rectangle& d = tree().domain();
  if (!std::isfinite(x.x) || !std::isfinite(x.y) || !d.contains(x)) {
    std::ostringstream msg;
    msg << "target (" << x.x << ", " << x.y << ") lies outside the domain";
    throw Error(msg.str());
  }
  const int n = tree().leaves_per_side();
  auto cell = [n](double t) {
    const int c = static_cast<int>(std::ceil(t)) - 1;
    return std::clamp(c, 0, n - 1);
  };
  const int col = cell((x.x - d.x_lo) / d.width() * n);
  const int row = cell((x.y - d.y_lo) / d.height() * n);
  return tree().leaf_at(col, row);
}

Vector HpsSolver::leaf_grid(const Vector& u, int leaf) const {
  const BoxNode& box = tree().box(leaf);
  if (!box.is_leaf()) throw Error("leaf_grid: box is not a leaf");
  if (u.size() != nodes().size()) throw Error("leaf_grid: node vector has the wrong length");
  return leaf_grid_values(*leaf_disc_, psi_[static_cast<std::size_t>(leaf)], u(box.exterior));
}

namespace {

// Row vector of Lagrange weights at t on the leaf's Chebyshev nodes.
Eigen::RowVectorXd weights_at(const std::vector<double>& nodes, double t) {
  const double d[1] = {t};
  return interp_matrix(nodes, d).row(0);
}

}  // namespace

double HpsSolver::evaluate(const Vector& u, Point x) const {
  const int leaf = locate_leaf(x);
  const Rectangle& r = tree().box(leaf).rect;
  const int q = tree().q();
  const Vector w = leaf_grid(u, leaf);
  const Eigen::Map<const Matrix> W(w.data(), q, q);  // W(j, i) = value at (i, j)
  const auto ex = weights_at(cheb_nodes(q, r.x_lo, r.x_hi), x.x);
  const auto ey = weights_at(cheb_nodes(q, r.y_lo, r.y_hi), x.y);
  return ey * W * ex.transpose();
}

std::array<double, 2> HpsSolver::gradient(const Vector& u, Point x) const {
  const int leaf = locate_leaf(x);
  const Rectangle& r = tree().box(leaf).rect;
  const int q = tree().q();
  const Vector w = leaf_grid(u, leaf);
  const Eigen::Map<const Matrix> W(w.data(), q, q);
  const auto xs = cheb_nodes(q, r.x_lo, r.x_hi);
  const auto ys = cheb_nodes(q, r.y_lo, r.y_hi);
  const auto ex = weights_at(xs, x.x);
  const auto ey = weights_at(ys, x.y);
  const Matrix Dx = cheb_diff_matrix(q, r.x_lo, r.x_hi);
  const Matrix Dy = cheb_diff_matrix(q, r.y_lo, r.y_hi);
  return {ey * W * Dx.transpose() * ex.transpose(), ey * Dy * W * ex.transpose()};
}

Vector HpsSolver::evaluate(const Vector& u, std::span<const Point> targets) const {
  Vector out(static_cast<Index>(targets.size()));
  for (std::size_t k = 0; k < targets.size(); ++k)
    out(static_cast<Index>(k)) = evaluate(u, targets[k]);
  return out;
}

MemoryReport HpsSolver::memory_report() const {
  MemoryReport rep;
  const BoxTree& bt = tree();
  rep.levels.resize(static_cast<std::size_t>(bt.max_depth() + 1));
  for (std::size_t d = 0; d < rep.levels.size(); ++d) rep.levels[d].depth = static_cast<int>(d);
  double rank_sum = 0.0;
  for (int id = 0; id < bt.size(); ++id) {
    const BoxNode& box = bt.box(id);
    auto& lvl = rep.levels[static_cast<std::size_t>(box.depth)];
    ++lvl.boxes;
    const auto uid = static_cast<std::size_t>(id);
    if (uid < psi_.size()) lvl.solution_scalars += psi_[uid].size();
    if (uid < s_ops_.size() && s_ops_[uid]) lvl.solution_scalars += scalar_count(*s_ops_[uid]);
    if (uid < box_ranks_.size()) {
      const RankStats& r = box_ranks_[uid];
      if (r.nodes > 0) {
        lvl.hbs_max_rank = std::max(lvl.hbs_max_rank, r.max_rank);
        rep.ranks.min_rank =
            rep.ranks.nodes == 0 ? r.min_rank : std::min(rep.ranks.min_rank, r.min_rank);
        rep.ranks.max_rank = std::max(rep.ranks.max_rank, r.max_rank);
        rank_sum += r.mean_rank * static_cast<double>(r.nodes);
        rep.ranks.nodes += r.nodes;
      }
    }
  }
  rep.levels[0].dtn_scalars = scalar_count(root_dtn_);
  if (rep.ranks.nodes > 0) rep.ranks.mean_rank = rank_sum / static_cast<double>(rep.ranks.nodes);

  // Shared leaf interpolation factors are stored once.
  rep.scalars = leaf_disc_->gauss_to_cheb.size() + leaf_disc_->cheb_to_gauss.size();
  for (const auto& lvl : rep.levels) rep.scalars += lvl.solution_scalars + lvl.dtn_scalars;
  rep.megabytes = static_cast<double>(rep.scalars) * MemoryReport::kBytesPerScalar /
                  (1024.0 * 1024.0);
  return rep;
}

}  // namespace hps
