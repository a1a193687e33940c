#pragma once

#include "hps/common.hpp"
#include "hps/grid.hpp"
#include "hps/hbs.hpp"
#include "hps/leafops.hpp"
#include "hps/merge.hpp"

#include <array>
#include <limits>
#include <memory>
#include <span>
#include <variant>
#include <vector>

namespace hps {

struct SolverOptions {
  /// Switch threshold that keeps every merge dense.
  static constexpr Index kNeverSwitch = std::numeric_limits<Index>::max();

  /// Relative tolerance for HBS compression, recompression and S truncation.
  double tol = 1e-10;
  /// Merges whose children have more exterior nodes than this run in HBS
  /// arithmetic. 0 forces HBS everywhere, kNeverSwitch keeps everything dense.
  Index switch_threshold = 2000;
  /// Worker threads for the build (leaves and merges within a level).
  int threads = 1;
};

using DtnOperator = std::variant<Matrix, HbsMatrix>;
using SolutionOperator = std::variant<Matrix, LowRank>;

struct RankStats {
  Index nodes = 0;  ///< non-root HBS nodes seen
  Index min_rank = 0;
  Index max_rank = 0;
  double mean_rank = 0.0;
};

struct LevelMemory {
  int depth = 0;
  int boxes = 0;
  Index solution_scalars = 0;  ///< S operators (or leaf Psi at the leaf level)
  Index dtn_scalars = 0;       ///< retained T operators (root only)
  Index hbs_max_rank = 0;      ///< largest HBS rank among T operators built on this level
};

struct MemoryReport {
  static constexpr double kBytesPerScalar = 8.0;

  Index scalars = 0;
  double megabytes = 0.0;  ///< scalars * 8 / 2^20
  std::vector<LevelMemory> levels;
  RankStats ranks;
};

struct BuildStats {
  double leaf_seconds = 0.0;
  double merge_seconds = 0.0;
  int dense_merges = 0;
  int hbs_merges = 0;
};

/// Reported when the build runs out of memory; carries what had been stored.
class BuildMemoryError : public Error {
 public:
  BuildMemoryError(const std::string& what, MemoryReport partial)
      : Error(what), partial_(std::move(partial)) {}
  const MemoryReport& partial_report() const { return partial_; }

 private:
  MemoryReport partial_;
};

/// Built solution operators for A u = 0 on a rectangle with Dirichlet data.
/// Construction runs the full build stage; afterwards the object is
/// read-only and solves may run concurrently.
class HpsSolver {
 public:
  HpsSolver(const Rectangle& domain, int levels, int q, CoefficientField coeffs,
            SolverOptions options = {});

  const Discretization& discretization() const { return disc_; }
  const BoxTree& tree() const { return disc_.tree; }
  const GlobalNodeSet& nodes() const { return disc_.nodes; }
  const SolverOptions& options() const { return options_; }
  const LeafDiscretization& leaf_discretization() const { return *leaf_disc_; }
  const BuildStats& build_stats() const { return stats_; }

  /// Global ids of the domain boundary nodes, in root exterior order.
  const std::vector<Index>& boundary_nodes() const { return disc_.tree.box(0).exterior; }
  /// f sampled at boundary_nodes().
  Vector boundary_values(const CoefficientField::Function& f) const;

  const SolutionOperator* solution_operator(int box) const;
  const DtnOperator& root_dtn() const { return root_dtn_; }
  const Matrix& leaf_psi(int leaf) const;

  /// u at all N tabulation nodes from Dirichlet data in boundary order.
  Vector solve(const Vector& boundary_data) const;
  /// T^1 f: boundary fluxes (d/dx1 on vertical, d/dx2 on horizontal edges).
  Vector apply_global_dtn(const Vector& boundary_data) const;

  /// Leaf containing x; points on shared edges go to the lower-left owner.
  int locate_leaf(Point x) const;
  /// q x q Chebyshev grid values of the local solution on a leaf.
  Vector leaf_grid(const Vector& u, int leaf) const;
  double evaluate(const Vector& u, Point x) const;
  std::array<double, 2> gradient(const Vector& u, Point x) const;
  Vector evaluate(const Vector& u, std::span<const Point> targets) const;

  MemoryReport memory_report() const;

 private:
  void build(const CoefficientField& coeffs);
  HbsMatrix as_hbs(DtnOperator op, int box) const;

  Discretization disc_;
  SolverOptions options_;
  std::shared_ptr<const LeafDiscretization> leaf_disc_;
  std::vector<Matrix> psi_;                               // per box, leaves only
  std::vector<std::unique_ptr<SolutionOperator>> s_ops_;  // per box, parents only
  DtnOperator root_dtn_;
  std::vector<RankStats> box_ranks_;  // HBS T built at each box
  BuildStats stats_;
};

}  // namespace hps
