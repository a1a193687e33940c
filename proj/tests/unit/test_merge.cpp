#include "hps/merge.hpp"
#include "hps/leafops.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <complex>

using namespace hps;

namespace {

// Builds every operator of a dense tree bottom-up (children freed lazily).
struct DenseTree {
  Discretization disc;
  std::vector<Matrix> T;
  std::vector<Matrix> S;

  DenseTree(Rectangle domain, int levels, int q, const CoefficientField& coeffs = CoefficientField::laplace())
      : disc(build_tree(domain, levels, q)) {
    const BoxTree& bt = disc.tree;
    T.resize(static_cast<std::size_t>(bt.size()));
    S.resize(T.size());
    const LeafDiscretization ld(q);
    for (int id = bt.size() - 1; id >= 0; --id) {
      const BoxNode& b = bt.box(id);
      if (b.is_leaf()) {
        T[id] = build_leaf_dtn(coeffs, b.rect, ld, id).T;
        continue;
      }
      const auto split = split_indices(b, bt.box(b.child_a), bt.box(b.child_b));
      auto m = merge_dense(T[b.child_a], T[b.child_b], split, q, id);
      T[id] = std::move(m.T);
      S[id] = std::move(m.S);
    }
  }

  Vector sample(int box, const std::function<double(Point)>& f) const {
    const auto& ids = disc.tree.box(box).exterior;
    Vector v(static_cast<Index>(ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k) v(k) = f(disc.nodes.points[ids[k]]);
    return v;
  }

  Vector flux(int box, const std::function<std::array<double, 2>(Point)>& grad) const {
    const auto& ids = disc.tree.box(box).exterior;
    Vector v(static_cast<Index>(ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto g = grad(disc.nodes.points[ids[k]]);
      v(k) = disc.nodes.orientation[ids[k]] == EdgeOrientation::vertical ? g[0] : g[1];
    }
    return v;
  }
};

}  // namespace

TEST_SUITE("merge") {
  TEST_CASE("index split counts") {
    const auto d = build_tree({0, 2, 0, 2}, 1, 21);
    const BoxTree& bt = d.tree;
    // Box 1 stacks two unit leaves.
    const BoxNode& p = bt.box(1);
    const auto s = split_indices(p, bt.box(p.child_a), bt.box(p.child_b));
    CHECK(s.J1.size() == 63u);
    CHECK(s.J2.size() == 63u);
    CHECK(s.J3_a.size() == 21u);
    // The root joins two 1 x 2 rectangles.
    const auto r = split_indices(bt.box(0), bt.box(1), bt.box(2));
    CHECK(r.J3_a.size() == 42u);
    CHECK(r.J1.size() + r.J2.size() == bt.box(0).exterior.size());
    for (const auto* sp : {&s, &r}) {
      std::vector<Index> j1 = sp->J1, j3 = sp->J3_a;
      std::sort(j1.begin(), j1.end());
      std::sort(j3.begin(), j3.end());
      std::vector<Index> both;
      std::set_intersection(j1.begin(), j1.end(), j3.begin(), j3.end(), std::back_inserter(both));
      CHECK(both.empty());
    }
    // Non-adjacent boxes.
    CHECK_THROWS_AS(split_indices(bt.box(0), bt.box(3), bt.box(6)), Error);
  }

  TEST_CASE("merged operator shapes") {
    const DenseTree t({0, 2, 0, 2}, 1, 21);
    CHECK(t.T[1].rows() == 126);
    CHECK(t.T[1].cols() == 126);
    CHECK(t.S[1].rows() == 21);
    CHECK(t.S[1].cols() == 126);
    CHECK(t.S[0].rows() == 42);
  }

  TEST_CASE("merged DtN maps reproduce the analytic flux") {
    const DenseTree t({0, 1, 0, 1}, 2, 16);
    for (int id = 0; id < t.disc.tree.size(); ++id) {
      const Vector err = t.T[id] * t.sample(id, oracle::log_solution) - t.flux(id, oracle::log_gradient);
      CHECK(err.cwiseAbs().maxCoeff() <= 1e-9);
    }
    // Linear data is reproduced exactly.
    const Vector lin = t.T[0] * t.sample(0, [](Point p) { return p.x; });
    const Vector want = t.flux(0, [](Point) { return std::array<double, 2>{1.0, 0.0}; });
    CHECK((lin - want).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("merge exactness for harmonic polynomials") {
    const int q = 12;
    const DenseTree t({0, 1, 0, 1}, 1, q);
    for (int k = 1; k < q; ++k) {
      auto u = [k](Point p) { return std::pow(std::complex<double>(p.x, p.y), k).real(); };
      auto g = [k](Point p) -> std::array<double, 2> {
        const auto d = static_cast<double>(k) * std::pow(std::complex<double>(p.x, p.y), k - 1);
        return {d.real(), -d.imag()};
      };
      for (int id : {0, 1}) {
        const Vector err = t.T[id] * t.sample(id, u) - t.flux(id, g);
        CHECK(err.cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, t.flux(id, g).cwiseAbs().maxCoeff()));
      }
    }
  }

  TEST_CASE("interface flux matching") {
    const DenseTree t({0, 1, 0, 1}, 2, 10);
    const BoxTree& bt = t.disc.tree;
    for (int id : {0, 1, 3}) {
      const BoxNode& p = bt.box(id);
      const BoxNode& a = bt.box(p.child_a);
      const BoxNode& b = bt.box(p.child_b);
      const auto s = split_indices(p, a, b);
      const Vector f = oracle::random_matrix(static_cast<Index>(p.exterior.size()), 1, 11 + id);
      const Vector u3 = t.S[id] * f;
      Vector ua(static_cast<Index>(a.exterior.size())), ub(static_cast<Index>(b.exterior.size()));
      for (std::size_t k = 0; k < s.a_to_parent.size(); ++k)
        if (s.a_to_parent[k] >= 0) ua(static_cast<Index>(k)) = f(s.a_to_parent[k]);
      for (std::size_t k = 0; k < s.b_to_parent.size(); ++k)
        if (s.b_to_parent[k] >= 0) ub(static_cast<Index>(k)) = f(s.b_to_parent[k]);
      ua(s.J3_a) = u3;
      ub(s.J3_b) = u3;
      const Vector va = t.T[p.child_a](s.J3_a, Eigen::all) * ua;
      const Vector vb = t.T[p.child_b](s.J3_b, Eigen::all) * ub;
      CHECK((va - vb).norm() <= 1e-12 * t.T[p.child_a].norm() * f.norm());
    }
  }

  TEST_CASE("junction modes are null vectors of the shared-edge blocks") {
    const DenseTree t({0, 1, 0, 1}, 2, 12);
    const BoxTree& bt = t.disc.tree;
    const BoxNode& root = bt.box(0);
    const auto s = split_indices(root, bt.box(1), bt.box(2));
    const Matrix N = junction_modes(static_cast<Index>(s.J3_a.size()), 12);
    CHECK(N.cols() == 3);
    CHECK((N.colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-14);
    const Matrix& Ta = t.T[1];
    const Matrix& Tb = t.T[2];
    CHECK((Ta(Eigen::all, s.J3_a) * N).norm() <= 1e-11 * Ta.norm());
    CHECK((Tb(Eigen::all, s.J3_b) * N).norm() <= 1e-11 * Tb.norm());
    CHECK(junction_modes(12, 12).cols() == 0);
    CHECK_THROWS_AS(junction_modes(13, 12), Error);
  }

  TEST_CASE("singular shared-edge system raises a merge resonance") {
    const auto d = build_tree({0, 1, 0, 1}, 1, 8);
    const BoxTree& bt = d.tree;
    const BoxNode& p = bt.box(1);
    const auto s = split_indices(p, bt.box(p.child_a), bt.box(p.child_b));
    Matrix Ta = build_leaf_dtn(CoefficientField::laplace(), bt.box(p.child_a).rect, 8).T;
    Matrix Tb = Ta;
    Tb(s.J3_b, s.J3_b) = Ta(s.J3_a, s.J3_a);
    try {
      (void)merge_dense(Ta, Tb, s, 8, 1);
      FAIL("expected a merge resonance");
    } catch (const ResonanceError& e) {
      CHECK(e.kind() == ResonanceError::Kind::merge);
      CHECK(e.box() == 1);
    }
  }

  TEST_CASE("box index trees") {
    const auto d = build_tree({0, 1, 0, 1}, 2, 5);
    const BoxTree& bt = d.tree;
    for (int id = 0; id < bt.size(); ++id) {
      const BoxNode& b = bt.box(id);
      const IndexTree tree = box_index_tree(b, 5);
      CHECK(tree.dimension() == static_cast<Index>(b.exterior.size()));
      for (Side side : kSides) CHECK(side_node(tree, b, side) > 0);
      for (int leaf : tree.leaves()) CHECK(tree.node(leaf).size() == 5);
    }
  }

  TEST_CASE("structured merge agrees with the dense merge") {
    const int q = 10;
    const double tol = 1e-12;
    const DenseTree t({0, 1, 0, 1}, 2, q);
    const BoxTree& bt = t.disc.tree;
    for (int id : {0, 1, 3}) {
      const BoxNode& p = bt.box(id);
      const HbsMatrix Ha = compress_dense(t.T[p.child_a], box_index_tree(bt.box(p.child_a), q), tol);
      const HbsMatrix Hb = compress_dense(t.T[p.child_b], box_index_tree(bt.box(p.child_b), q), tol);
      const HbsMerge m = merge_hbs(Ha, Hb, bt, id, tol);
      CHECK(m.T.tree().same_shape(box_index_tree(p, q)));
      const Matrix Td = m.T.to_dense();
      CHECK((Td - t.T[id]).norm() <= 1e-9 * t.T[id].norm());
      const Vector err = Td * t.sample(id, oracle::log_solution) - t.flux(id, oracle::log_gradient);
      CHECK(err.cwiseAbs().maxCoeff() <= 1e-7);
      // Shared-edge values agree modulo junction modes, which T annihilates.
      const Vector f = t.sample(id, oracle::log_solution);
      const Vector du = m.S.apply(f) - t.S[id] * f;
      const Matrix N = junction_modes(du.size(), q);
      const Vector rest = du - N * N.colPivHouseholderQr().solve(du);
      CHECK(rest.cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}
