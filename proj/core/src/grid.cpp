#include "hps/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <string>

namespace hps {

void Rectangle::validate() const {
  if (!std::isfinite(x_lo) || !std::isfinite(x_hi) || !std::isfinite(y_lo) ||
      !std::isfinite(y_hi) || !(x_lo < x_hi) || !(y_lo < y_hi)) {
    throw ConfigError("degenerate rectangle [" + std::to_string(x_lo) + ", " +
                      std::to_string(x_hi) + "] x [" + std::to_string(y_lo) + ", " +
                      std::to_string(y_hi) + "]");
  }
}

std::vector<double> gauss_nodes(int q) {
  if (q < 1) throw ConfigError("gauss_nodes: q must be positive");
  std::vector<double> x(static_cast<std::size_t>(q));
  const int half = (q + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi's initial guess for the i-th largest root, then Newton on the
    // three-term recurrence.
    double t = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = t;
      for (int k = 2; k <= q; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = q * (t * p1 - p0) / (t * t - 1.0);
      const double step = p1 / dp;
      t -= step;
      if (std::abs(step) < 1e-16) break;
    }
    x[static_cast<std::size_t>(q - 1 - i)] = t;
    x[static_cast<std::size_t>(i)] = -t;
  }
  if (q % 2 == 1) x[static_cast<std::size_t>(q / 2)] = 0.0;
  return x;
}

std::vector<double> cheb_nodes(int p, double a, double b) {
  if (p < 2) throw ConfigError("cheb_nodes: p must be at least 2");
  if (!(a < b)) throw ConfigError("cheb_nodes: empty interval");
  std::vector<double> x(static_cast<std::size_t>(p));
  const int n = p - 1;
  for (int j = 0; j <= n; ++j) {
    // sin form keeps the nodes exactly symmetric about the midpoint.
    const double t = std::sin(std::numbers::pi * (2.0 * j - n) / (2.0 * n));
    x[static_cast<std::size_t>(j)] = 0.5 * (a + b) + 0.5 * (b - a) * t;
  }
  x.front() = a;
  x.back() = b;
  return x;
}

std::vector<double> barycentric_weights(std::span<const double> nodes) {
  const std::size_t n = nodes.size();
  std::vector<double> w(n, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      if (k != j) w[j] *= (nodes[j] - nodes[k]);
    }
    w[j] = 1.0 / w[j];
  }
  double scale = 0.0;
  for (double v : w) scale = std::max(scale, std::abs(v));
  for (double& v : w) v /= scale;
  return w;
}

Matrix interp_matrix(std::span<const double> src, std::span<const double> dst) {
  if (src.empty()) throw ConfigError("interp_matrix: empty source node set");
  {
    std::vector<double> sorted(src.begin(), src.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("interp_matrix: duplicate source nodes");
    }
  }
  const auto w = barycentric_weights(src);
  const Index ns = static_cast<Index>(src.size());
  Matrix M = Matrix::Zero(static_cast<Index>(dst.size()), ns);
  for (Index r = 0; r < M.rows(); ++r) {
    const double d = dst[static_cast<std::size_t>(r)];
    const auto hit = std::find(src.begin(), src.end(), d);
    if (hit != src.end()) {
      M(r, hit - src.begin()) = 1.0;
      continue;
    }
    double denom = 0.0;
    for (Index j = 0; j < ns; ++j) {
      const double c = w[static_cast<std::size_t>(j)] / (d - src[static_cast<std::size_t>(j)]);
      M(r, j) = c;
      denom += c;
    }
    M.row(r) /= denom;
  }
  return M;
}

BoxTree::BoxTree(Rectangle domain, int levels, int q, std::vector<BoxNode> boxes,
                 std::vector<int> leaf_at)
    : domain_(domain),
      levels_(levels),
      q_(q),
      boxes_(std::move(boxes)),
      leaf_at_(std::move(leaf_at)) {}

Index expected_node_count(int levels, int q) {
  return (Index{1} << (2 * levels + 1)) * q + (Index{1} << (levels + 1)) * q;
}

namespace {

// Structured identity of a tabulation node: which grid line, which leaf
// segment along it, and which Gauss point in the segment.
class NodeNumbering {
 public:
  NodeNumbering(int n, int q)
      : n_(n), q_(q),
        vertical_(static_cast<std::size_t>((n + 1) * n * q), -1),
        horizontal_(static_cast<std::size_t>((n + 1) * n * q), -1) {}

  Index& vertical(int line, int seg, int g) {
    return vertical_[static_cast<std::size_t>((line * n_ + seg) * q_ + g)];
  }
  Index& horizontal(int line, int seg, int g) {
    return horizontal_[static_cast<std::size_t>((line * n_ + seg) * q_ + g)];
  }

 private:
  int n_, q_;
  std::vector<Index> vertical_;
  std::vector<Index> horizontal_;
};

}  // namespace

Discretization build_tree(const Rectangle& domain, int levels, int q) {
  domain.validate();
  if (levels < 0 || levels > 12) throw ConfigError("build_tree: levels must be in [0, 12]");
  if (q < 2) throw ConfigError("build_tree: q must be at least 2");

  const int n = 1 << levels;
  const double hx = domain.width() / n;
  const double hy = domain.height() / n;
  const auto t = gauss_nodes(q);

  std::vector<BoxNode> boxes;
  boxes.reserve(static_cast<std::size_t>(2 * n * n - 1));
  {
    BoxNode root;
    root.col_hi = n;
    root.row_hi = n;
    boxes.push_back(root);
  }
  // Breadth-first so that parents always precede children.
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    BoxNode b = boxes[i];
    if (b.col_hi - b.col_lo == 1 && b.row_hi - b.row_lo == 1) continue;
    BoxNode ca = b, cb = b;
    ca.parent = cb.parent = static_cast<int>(i);
    ca.depth = cb.depth = b.depth + 1;
    if (b.depth % 2 == 0) {
      const int mid = (b.col_lo + b.col_hi) / 2;
      ca.col_hi = mid;
      cb.col_lo = mid;
      boxes[i].split = SplitAxis::vertical;
    } else {
      const int mid = (b.row_lo + b.row_hi) / 2;
      ca.row_hi = mid;
      cb.row_lo = mid;
      boxes[i].split = SplitAxis::horizontal;
    }
    boxes[i].child_a = static_cast<int>(boxes.size());
    boxes.push_back(ca);
    boxes[i].child_b = static_cast<int>(boxes.size());
    boxes.push_back(cb);
  }

  NodeNumbering ids(n, q);
  GlobalNodeSet nodes;
  const auto expected = expected_node_count(levels, q);
  nodes.points.reserve(static_cast<std::size_t>(expected));

  auto assign_vertical = [&](int line, int seg) {
    for (int g = 0; g < q; ++g) {
      Index& id = ids.vertical(line, seg, g);
      if (id >= 0) continue;
      id = nodes.size();
      nodes.points.push_back({domain.x_lo + line * hx,
                              domain.y_lo + (seg + 0.5 * (t[static_cast<std::size_t>(g)] + 1.0)) * hy});
      nodes.orientation.push_back(EdgeOrientation::vertical);
      nodes.on_boundary.push_back(line == 0 || line == n);
    }
  };
  auto assign_horizontal = [&](int line, int seg) {
    for (int g = 0; g < q; ++g) {
      Index& id = ids.horizontal(line, seg, g);
      if (id >= 0) continue;
      id = nodes.size();
      nodes.points.push_back({domain.x_lo + (seg + 0.5 * (t[static_cast<std::size_t>(g)] + 1.0)) * hx,
                              domain.y_lo + line * hy});
      nodes.orientation.push_back(EdgeOrientation::horizontal);
      nodes.on_boundary.push_back(line == 0 || line == n);
    }
  };

  auto for_each_side_segment = [&](const BoxNode& b, auto&& on_vertical, auto&& on_horizontal) {
    for (int c = b.col_lo; c < b.col_hi; ++c) on_horizontal(b.row_lo, c);  // south
    for (int r = b.row_lo; r < b.row_hi; ++r) on_vertical(b.col_hi, r);    // east
    for (int c = b.col_lo; c < b.col_hi; ++c) on_horizontal(b.row_hi, c);  // north
    for (int r = b.row_lo; r < b.row_hi; ++r) on_vertical(b.col_lo, r);    // west
  };

  for_each_side_segment(boxes[0], assign_vertical, assign_horizontal);
  for (const BoxNode& b : boxes) {
    if (b.split == SplitAxis::vertical) {
      const int mid = (b.col_lo + b.col_hi) / 2;
      for (int r = b.row_lo; r < b.row_hi; ++r) assign_vertical(mid, r);
    } else if (b.split == SplitAxis::horizontal) {
      const int mid = (b.row_lo + b.row_hi) / 2;
      for (int c = b.col_lo; c < b.col_hi; ++c) assign_horizontal(mid, c);
    }
  }

  std::vector<int> leaf_at(static_cast<std::size_t>(n * n), -1);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    BoxNode& b = boxes[i];
    b.rect = {domain.x_lo + b.col_lo * hx, domain.x_lo + b.col_hi * hx,
              domain.y_lo + b.row_lo * hy, domain.y_lo + b.row_hi * hy};
    if (b.col_lo == 0) b.rect.x_lo = domain.x_lo;
    if (b.col_hi == n) b.rect.x_hi = domain.x_hi;
    if (b.row_lo == 0) b.rect.y_lo = domain.y_lo;
    if (b.row_hi == n) b.rect.y_hi = domain.y_hi;

    const Index ncol = b.col_hi - b.col_lo;
    const Index nrow = b.row_hi - b.row_lo;
    b.side_offset = {0, ncol * q, (ncol + nrow) * q, (2 * ncol + nrow) * q,
                     2 * (ncol + nrow) * q};
    b.exterior.reserve(static_cast<std::size_t>(b.side_offset[4]));
    for_each_side_segment(
        b,
        [&](int line, int seg) {
          for (int g = 0; g < q; ++g) b.exterior.push_back(ids.vertical(line, seg, g));
        },
        [&](int line, int seg) {
          for (int g = 0; g < q; ++g) b.exterior.push_back(ids.horizontal(line, seg, g));
        });
    if (b.split == SplitAxis::vertical) {
      const int mid = (b.col_lo + b.col_hi) / 2;
      for (int r = b.row_lo; r < b.row_hi; ++r)
        for (int g = 0; g < q; ++g) b.interior.push_back(ids.vertical(mid, r, g));
    } else if (b.split == SplitAxis::horizontal) {
      const int mid = (b.row_lo + b.row_hi) / 2;
      for (int c = b.col_lo; c < b.col_hi; ++c)
        for (int g = 0; g < q; ++g) b.interior.push_back(ids.horizontal(mid, c, g));
    } else {
      leaf_at[static_cast<std::size_t>(b.col_lo * n + b.row_lo)] = static_cast<int>(i);
    }
  }

  return {BoxTree(domain, levels, q, std::move(boxes), std::move(leaf_at)), std::move(nodes)};
}

}  // namespace hps
