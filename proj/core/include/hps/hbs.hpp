#pragma once

#include "hps/common.hpp"

#include <span>
#include <vector>

namespace hps {

/// Binary tree over the index vector [0, M). Node 0 is the root, parents
/// precede children, and every node's range is the ordered union of its
/// children's ranges.
class IndexTree {
 public:
  struct Node {
    Index begin = 0;
    Index end = 0;
    int parent = -1;
    int left = -1;
    int right = -1;
    int level = 0;

    Index size() const { return end - begin; }
    bool is_leaf() const { return left < 0; }
  };

  IndexTree() = default;
  /// Validates the partition and ordering invariants; throws Error on failure.
  explicit IndexTree(std::vector<Node> nodes);

  int size() const { return static_cast<int>(nodes_.size()); }
  Index dimension() const { return nodes_.empty() ? 0 : nodes_.front().size(); }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  int depth() const;

  /// Leaves in index order.
  std::vector<int> leaves() const;
  /// Node whose range is exactly [begin, end), or -1.
  int find(Index begin, Index end) const;
  /// Same topology and node sizes (offsets may differ).
  bool same_shape(const IndexTree& other) const;
  /// The subtree rooted at `node`, renumbered and shifted to start at 0.
  IndexTree subtree(int node) const;

 private:
  std::vector<Node> nodes_;
};

/// Balanced binary splits down to at most `leaf_capacity` indices per leaf;
/// the left half takes the extra index when a size is odd.
IndexTree build_index_tree(Index size, Index leaf_capacity);

struct HbsNodeFactors {
  Matrix D;    ///< leaves: diagonal block
  Matrix U;    ///< leaves: m x k basis; interior nodes: transfer matrix; root: empty
  Matrix V;
  Matrix B12;  ///< interior nodes: left-right sibling interaction (k_left x k_right)
  Matrix B21;  ///< interior nodes: right-left sibling interaction
};

/// Hierarchically block-separable matrix: telescoping factors {D, U, V, B}
/// on an IndexTree. Bases are nested; ranks are chosen per node.
class HbsMatrix {
 public:
  HbsMatrix() = default;
  HbsMatrix(IndexTree tree, std::vector<HbsNodeFactors> factors);

  const IndexTree& tree() const { return tree_; }
  const HbsNodeFactors& factors(int node) const {
    return factors_[static_cast<std::size_t>(node)];
  }
  HbsNodeFactors& factors(int node) { return factors_[static_cast<std::size_t>(node)]; }
  Index rows() const { return tree_.dimension(); }
  Index cols() const { return tree_.dimension(); }

  Index row_rank(int node) const { return factors(node).U.cols(); }
  Index col_rank(int node) const { return factors(node).V.cols(); }
  Index max_rank() const;
  /// Number of stored scalars across all factors.
  Index entry_count() const;

  /// Dense reconstruction through the telescoping identities. O(M^2).
  Matrix to_dense() const;

 private:
  IndexTree tree_;
  std::vector<HbsNodeFactors> factors_;
};

/// Off-diagonal ranks chosen per node by column-pivoted QR truncated at
/// relative tolerance eps.
HbsMatrix compress_dense(const Matrix& H, const IndexTree& tree, double eps);

/// y = H x through the telescoping factorization, O(M k) per column.
Matrix hbs_apply(const HbsMatrix& H, const Matrix& x);

struct HbsInverseFactors {
  IndexTree tree;
  std::vector<Matrix> E;
  std::vector<Matrix> Fh;  ///< F^* per node
  std::vector<Matrix> G;
  Matrix root;             ///< G_1, inverse of the reduced root block

  Index rows() const { return tree.dimension(); }
};

/// Multi-level Woodbury inversion, finest level to coarsest. Throws
/// ResonanceError (kind hbs) naming the node when a reduced block is singular.
HbsInverseFactors hbs_invert(const HbsMatrix& H);

/// y = H^{-1} x from the factors of hbs_invert.
Matrix inverse_apply(const HbsInverseFactors& factors, const Matrix& x);

/// alpha * H (scales D and B).
HbsMatrix scaled(const HbsMatrix& H, double alpha);

/// A + B on a shared tree: stacked bases followed by recompression at eps.
HbsMatrix hbs_add(const HbsMatrix& A, const HbsMatrix& B, double eps);

/// HBS form of the rank-k product Q R on `tree`. Ranks never exceed k; with
/// eps > 0 the result is also recompressed.
HbsMatrix low_rank_to_hbs(const Matrix& Q, const Matrix& R, const IndexTree& tree,
                          double eps = 0.0);

/// Re-orthonormalizes all bases and truncates each node to its eps-rank.
HbsMatrix recompress(const HbsMatrix& H, double eps);

/// Orthonormal nested bases without truncation.
HbsMatrix orthonormalized(const HbsMatrix& H);

/// The diagonal block H(I_node, I_node) as a standalone HBS matrix.
HbsMatrix subtree(const HbsMatrix& H, int node);

/// Small matrix C with H(I_f, I_g) = Ubig_f C Vbig_g^* for disjoint nodes.
Matrix coupling(const HbsMatrix& H, int f, int g);

/// Explicit |I_node| x k column basis Ubig_node (resp. row basis Vbig_node).
Matrix expand_u(const HbsMatrix& H, int node);
Matrix expand_v(const HbsMatrix& H, int node);

/// Vbig_node^* X for X with |I_node| rows.
Matrix project_v(const HbsMatrix& H, int node, const Matrix& X);

/// A node of `source` used as a block in compose_block_diagonal.
struct HbsPiece {
  const HbsMatrix* source = nullptr;
  int node = 0;
};

/// Nested binary grouping of pieces. A layout with no children stands for
/// piece `piece`; otherwise it has exactly two children.
struct HbsLayout {
  int piece = -1;
  std::vector<HbsLayout> children;

  static HbsLayout leaf(int piece) { return HbsLayout{piece, {}}; }
  static HbsLayout pair(HbsLayout a, HbsLayout b) {
    HbsLayout l;
    l.children.push_back(std::move(a));
    l.children.push_back(std::move(b));
    return l;
  }
};

/// Builds the HBS matrix whose diagonal blocks are the given pieces, arranged
/// in layout order. Blocks taken from the same source keep their exact
/// coupling; blocks from different sources do not interact. Group nodes get
/// identity transfer matrices, so the result is exact but not rank-minimal.
HbsMatrix compose_block_diagonal(std::span<const HbsPiece> pieces, const HbsLayout& layout);

}  // namespace hps
