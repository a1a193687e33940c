#pragma once

#include "hps/common.hpp"
#include "hps/grid.hpp"
#include "hps/hbs.hpp"

#include <vector>

namespace hps {

/// Positions of the parent's exterior and shared-edge nodes inside the two
/// children's exterior lists.
struct MergeIndexSplit {
  std::vector<Index> J1;    ///< child a positions of nodes on the parent boundary
  std::vector<Index> J2;    ///< child b positions of nodes on the parent boundary
  std::vector<Index> J3_a;  ///< child a positions of the shared edge, parent interior order
  std::vector<Index> J3_b;  ///< child b positions of the shared edge, parent interior order
  /// For each parent exterior position, its position in the stacked [J1; J2] list.
  std::vector<Index> parent_from_stack;
  /// Child exterior position to parent exterior position (-1 on the shared edge).
  std::vector<Index> a_to_parent;
  std::vector<Index> b_to_parent;
};

/// Throws Error unless a and b are the two halves of parent.
MergeIndexSplit split_indices(const BoxNode& parent, const BoxNode& a, const BoxNode& b);

/// A rank-r factorization left * right.
struct LowRank {
  Matrix left;   ///< rows x r
  Matrix right;  ///< r x cols

  Index rows() const { return left.rows(); }
  Index cols() const { return right.cols(); }
  Index rank() const { return left.cols(); }
  Matrix apply(const Matrix& x) const { return left * (right * x); }
  Matrix to_dense() const { return left * right; }
};

struct DenseMerge {
  Matrix T;  ///< parent DtN map, parent exterior order
  Matrix S;  ///< shared-edge values from parent exterior values
};

/// Junction modes (n x (n/q - 1), unit columns) of a shared edge made of n/q
/// leaf segments. Mode j is the Gauss tabulation of the Chebyshev Lagrange
/// basis function of the common endpoint of segments j and j + 1. These
/// vectors re-tabulate to zero on every leaf's Chebyshev boundary, so they
/// span the null space of the shared-edge system. Each mode touches only two
/// segments, which keeps N N^T compatible with the HBS inversion.
Matrix junction_modes(Index n, int q);

/// S = (T^a_33 - T^b_33 + w N N^T)^{-1} [-T^a_31 | T^b_32],
/// T = [T^a_11 0; 0 T^b_22] + [T^a_13; T^b_23] S, permuted to parent order.
/// N = junction_modes; the w N N^T term selects the shared-edge values with no
/// junction-mode component and leaves T unchanged.
/// Throws ResonanceError (kind merge) when the shared-edge system is singular.
DenseMerge merge_dense(const Matrix& Ta, const Matrix& Tb, const MergeIndexSplit& split, int q,
                       int box = -1);

/// Index tree on a box's exterior list: root -> {S, E} and {N, W} -> sides ->
/// balanced halves down to single q-point segments.
IndexTree box_index_tree(const BoxNode& box, int q);

/// Node of box_index_tree(box, q) covering side s.
int side_node(const IndexTree& tree, const BoxNode& box, Side s);

struct HbsMerge {
  HbsMatrix T;
  LowRank S;
};

/// The merge carried out in HBS arithmetic. Ta and Tb must live on the
/// children's box_index_tree; the result lives on the parent's.
HbsMerge merge_hbs(const HbsMatrix& Ta, const HbsMatrix& Tb, const BoxTree& tree, int box,
                   double tol);

}  // namespace hps
