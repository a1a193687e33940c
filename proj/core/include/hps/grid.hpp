#pragma once

#include "hps/common.hpp"

#include <array>
#include <span>
#include <vector>

namespace hps {

struct Rectangle {
  double x_lo = 0.0;
  double x_hi = 1.0;
  double y_lo = 0.0;
  double y_hi = 1.0;

  double width() const { return x_hi - x_lo; }
  double height() const { return y_hi - y_lo; }
  bool contains(Point p) const {
    return p.x >= x_lo && p.x <= x_hi && p.y >= y_lo && p.y <= y_hi;
  }
  /// Throws ConfigError unless x_lo < x_hi and y_lo < y_hi (and all finite).
  void validate() const;
};

/// Sides of a box in canonical order. Every box lists its exterior nodes side
/// by side in this order, each side sorted by increasing coordinate.
enum class Side : int { south = 0, east = 1, north = 2, west = 3 };
inline constexpr std::array<Side, 4> kSides = {Side::south, Side::east, Side::north,
                                               Side::west};

/// vertical: the box is cut by a vertical line, child_a is left, child_b right.
/// horizontal: cut by a horizontal line, child_a is bottom, child_b top.
enum class SplitAxis { none, vertical, horizontal };

/// Which kind of edge a tabulation node sits on. Fluxes are tabulated as
/// d/dx2 on horizontal edges and d/dx1 on vertical edges (not outward normals).
enum class EdgeOrientation { horizontal, vertical };

/// q Gauss-Legendre points on (-1, 1), increasing.
std::vector<double> gauss_nodes(int q);

/// p Chebyshev extreme points mapped to [a, b], increasing, endpoints included.
std::vector<double> cheb_nodes(int p, double a, double b);

/// Barycentric weights for arbitrary distinct nodes (scaled so max |w| = 1).
std::vector<double> barycentric_weights(std::span<const double> nodes);

/// Dense |dst| x |src| matrix of Lagrange weights: (M f)(r) is the value at
/// dst[r] of the polynomial interpolating f on src. Throws on duplicate src.
Matrix interp_matrix(std::span<const double> src, std::span<const double> dst);

struct BoxNode {
  Rectangle rect;
  int parent = -1;
  int child_a = -1;
  int child_b = -1;
  SplitAxis split = SplitAxis::none;
  int depth = 0;
  /// Leaf-grid extent [col_lo, col_hi) x [row_lo, row_hi).
  int col_lo = 0, col_hi = 0, row_lo = 0, row_hi = 0;
  /// I_e: global ids of the exterior nodes, canonical side order.
  std::vector<Index> exterior;
  /// I_i: global ids of the nodes on the shared edge of the two children.
  std::vector<Index> interior;
  /// side_offset[s] is the first position of side s in `exterior`;
  /// side_offset[4] == exterior.size().
  std::array<Index, 5> side_offset{};

  bool is_leaf() const { return child_a < 0; }
  Index side_begin(Side s) const { return side_offset[static_cast<int>(s)]; }
  Index side_end(Side s) const { return side_offset[static_cast<int>(s) + 1]; }
  Index side_size(Side s) const { return side_end(s) - side_begin(s); }
};

struct GlobalNodeSet {
  std::vector<Point> points;
  std::vector<EdgeOrientation> orientation;
  /// True for nodes on the boundary of the whole domain.
  std::vector<bool> on_boundary;

  Index size() const { return static_cast<Index>(points.size()); }
};

/// Uniform binary box tree over a rectangle with 4^levels leaves.
/// Box 0 is the root, parents precede their children, and the split axis
/// alternates with depth starting with a vertical cut at the root.
class BoxTree {
 public:
  BoxTree() = default;
  BoxTree(Rectangle domain, int levels, int q, std::vector<BoxNode> boxes,
          std::vector<int> leaf_at);

  const Rectangle& domain() const { return domain_; }
  int levels() const { return levels_; }
  int q() const { return q_; }
  int leaves_per_side() const { return 1 << levels_; }
  int size() const { return static_cast<int>(boxes_.size()); }
  const BoxNode& box(int i) const { return boxes_[static_cast<std::size_t>(i)]; }
  const std::vector<BoxNode>& boxes() const { return boxes_; }
  /// Box id of the leaf at leaf-grid column `col` and row `row`.
  int leaf_at(int col, int row) const {
    return leaf_at_[static_cast<std::size_t>(col * leaves_per_side() + row)];
  }
  int max_depth() const { return 2 * levels_; }

 private:
  Rectangle domain_;
  int levels_ = 0;
  int q_ = 0;
  std::vector<BoxNode> boxes_;
  std::vector<int> leaf_at_;
};

struct Discretization {
  BoxTree tree;
  GlobalNodeSet nodes;
};

/// Builds the box tree and the deduplicated set of Gauss tabulation nodes.
/// Node numbering: domain boundary first (root exterior order), then each
/// box's interior edge in tree order.
Discretization build_tree(const Rectangle& domain, int levels, int q);

/// 2^{2L+1} q + 2^{L+1} q.
Index expected_node_count(int levels, int q);

}  // namespace hps
