#include "hps/leafops.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace hps;

namespace {

Vector sample_boundary(const LeafDiscretization& d, const Rectangle& r,
                       const std::function<double(Point)>& f) {
  Vector v(4 * d.q);
  const double cx = 0.5 * (r.x_lo + r.x_hi), hx = 0.5 * r.width();
  const double cy = 0.5 * (r.y_lo + r.y_hi), hy = 0.5 * r.height();
  for (int k = 0; k < d.q; ++k) {
    const double gx = cx + hx * d.gauss[k];
    const double gy = cy + hy * d.gauss[k];
    v(k) = f({gx, r.y_lo});
    v(d.q + k) = f({r.x_hi, gy});
    v(2 * d.q + k) = f({gx, r.y_hi});
    v(3 * d.q + k) = f({r.x_lo, gy});
  }
  return v;
}

Vector exact_flux(const LeafDiscretization& d, const Rectangle& r) {
  Vector v(4 * d.q);
  const double cx = 0.5 * (r.x_lo + r.x_hi), hx = 0.5 * r.width();
  const double cy = 0.5 * (r.y_lo + r.y_hi), hy = 0.5 * r.height();
  for (int k = 0; k < d.q; ++k) {
    const double gx = cx + hx * d.gauss[k];
    const double gy = cy + hy * d.gauss[k];
    v(k) = oracle::log_gradient({gx, r.y_lo})[1];
    v(d.q + k) = oracle::log_gradient({r.x_hi, gy})[0];
    v(2 * d.q + k) = oracle::log_gradient({gx, r.y_hi})[1];
    v(3 * d.q + k) = oracle::log_gradient({r.x_lo, gy})[0];
  }
  return v;
}

}  // namespace

TEST_SUITE("leafops") {
  TEST_CASE("chebyshev differentiation") {
    const auto x = cheb_nodes(8, -1.0, 1.0);
    const Matrix D = cheb_diff_matrix(8, -1.0, 1.0);
    Vector ones = Vector::Ones(8), lin(8), quart(8), dquart(8);
    for (int k = 0; k < 8; ++k) {
      lin(k) = x[k];
      quart(k) = std::pow(x[k], 4);
      dquart(k) = 4.0 * std::pow(x[k], 3);
    }
    CHECK((D * ones).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((D * lin - ones).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((D * quart - dquart).cwiseAbs().maxCoeff() < 1e-12);
    // Scaling to [a, b].
    const auto y = cheb_nodes(8, 2.0, 2.5);
    Vector s(8);
    for (int k = 0; k < 8; ++k) s(k) = std::sin(y[k]);
    Vector ds = cheb_diff_matrix(8, 2.0, 2.5) * s;
    for (int k = 0; k < 8; ++k) CHECK(ds(k) == doctest::Approx(std::cos(y[k])).epsilon(1e-7));
  }

  TEST_CASE("local operator") {
    const Rectangle r{0.25, 0.5, 0.5, 0.75};
    const int p = 10;
    const auto x1 = cheb_nodes(p, r.x_lo, r.x_hi);
    const auto x2 = cheb_nodes(p, r.y_lo, r.y_hi);
    Vector u(p * p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) u(i * p + j) = x1[i] * x1[i] - x2[j] * x2[j];
    const Matrix A = build_local_operator(CoefficientField::laplace(), r, p);
    CHECK((A * u).cwiseAbs().maxCoeff() <= 1e-10 * u.cwiseAbs().maxCoeff());

    CoefficientField five;
    five.c = [](Point) { return 5.0; };
    const Vector w = oracle::random_matrix(p * p, 1, 3);
    CHECK((build_local_operator(five, r, p) * w - 5.0 * w).cwiseAbs().maxCoeff() <= 1e-14 * w.cwiseAbs().maxCoeff());

    // -Lap u - kappa^2 u = 0 for u = sin(kappa x1).
    const double kappa = 10.0;
    CoefficientField helm = CoefficientField::laplace();
    helm.c = [kappa](Point) { return -kappa * kappa; };
    const Rectangle unit{0, 1, 0, 1};
    const int q = 21;
    const auto y1 = cheb_nodes(q, 0.0, 1.0);
    Vector s(q * q);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) s(i * q + j) = std::sin(kappa * y1[i]);
    const LeafDiscretization d(q);
    const Vector res = build_local_operator(helm, unit, q) * s;
    CHECK(res(d.interior).cwiseAbs().maxCoeff() < 1e-6 * kappa * kappa);
  }

  TEST_CASE("interior solve reproduces harmonic functions") {
    const int q = 16;
    const LeafDiscretization d(q);
    const Rectangle r{0.0, 0.5, 0.0, 0.5};
    const Matrix A = build_local_operator(CoefficientField::laplace(), r, q);
    const Matrix Psi = leaf_solve_operator(A, d.interior, d.boundary);
    CHECK(Psi.rows() == (q - 2) * (q - 2));
    CHECK(Psi.cols() == 4 * (q - 1));
    const auto x1 = cheb_nodes(q, r.x_lo, r.x_hi);
    const auto x2 = cheb_nodes(q, r.y_lo, r.y_hi);
    auto grid = [&](auto f) {
      Vector v(q * q);
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) v(i * q + j) = f(Point{x1[i], x2[j]});
      return v;
    };
    const Vector one = grid([](Point) { return 1.0; });
    const Vector lin = grid([](Point p) { return p.x; });
    const Vector lg = grid(oracle::log_solution);
    for (const Vector* v : {&one, &lin, &lg}) {
      const Vector wi = Psi * (*v)(d.boundary);
      CHECK((wi - (*v)(d.interior)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("re-tabulation maps") {
    const LeafDiscretization d(12);
    CHECK(d.gauss_to_cheb.rows() == 4 * 11);
    CHECK(d.gauss_to_cheb.cols() == 48);
    CHECK((d.gauss_to_cheb.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-13);
    // Block diagonal by side.
    for (int s = 0; s < 4; ++s)
      for (int t = 0; t < 4; ++t)
        if (s != t) CHECK(d.cheb_to_gauss.block(s * 12, t * 12, 12, 12).norm() == 0.0);
  }

  TEST_CASE("leaf DtN map") {
    const int q = 16;
    const LeafDiscretization d(q);
    const Rectangle unit{0, 1, 0, 1};
    const Matrix T = build_leaf_dtn(CoefficientField::laplace(), unit, d).T;
    REQUIRE(T.rows() == 4 * q);
    REQUIRE(T.cols() == 4 * q);

    const Vector one = Vector::Ones(4 * q);
    CHECK((T * one).cwiseAbs().maxCoeff() <= 1e-11 * T.cwiseAbs().maxCoeff());

    const Vector lin = sample_boundary(d, unit, [](Point p) { return p.x; });
    const Vector flux = T * lin;
    CHECK(flux.segment(0, q).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((flux.segment(q, q).array() - 1.0).abs().maxCoeff() < 1e-11);
    CHECK(flux.segment(2 * q, q).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((flux.segment(3 * q, q).array() - 1.0).abs().maxCoeff() < 1e-11);

    const Vector lg = sample_boundary(d, unit, oracle::log_solution);
    CHECK((T * lg - exact_flux(d, unit)).cwiseAbs().maxCoeff() <= 1e-9);

    // Same result on a small shifted leaf.
    const Rectangle small{0.5, 0.625, 0.25, 0.375};
    const Matrix Ts = build_leaf_dtn(CoefficientField::laplace(), small, d).T;
    const Vector ls = sample_boundary(d, small, oracle::log_solution);
    CHECK((Ts * ls - exact_flux(d, small)).cwiseAbs().maxCoeff() <= 1e-10);
  }

  TEST_CASE("null action on constants for any coefficients without c") {
    CoefficientField f;
    f.c11 = [](Point p) { return 1.0 + 0.5 * p.x; };
    f.c22 = [](Point p) { return 2.0 + std::sin(p.y); };
    f.c12 = [](Point p) { return 0.1 * p.x * p.y; };
    f.c1 = [](Point p) { return 3.0 * p.y; };
    f.c2 = [](Point) { return -4.0; };
    const LeafDiscretization d(10);
    const Matrix T = build_leaf_dtn(f, {0.1, 0.3, 0.2, 0.4}, d).T;
    CHECK((T * Vector::Ones(40)).cwiseAbs().maxCoeff() <= 1e-11 * T.cwiseAbs().maxCoeff());
  }

  TEST_CASE("spectral convergence in q") {
    double previous = 1.0;
    for (int q : {6, 8, 10, 12, 14, 16}) {
      const LeafDiscretization d(q);
      const Rectangle unit{0, 1, 0, 1};
      const Matrix T = build_leaf_dtn(CoefficientField::laplace(), unit, d).T;
      const double err =
          (T * sample_boundary(d, unit, oracle::log_solution) - exact_flux(d, unit))
              .cwiseAbs()
              .maxCoeff();
      CHECK(err * 3.0 <= previous);
      previous = err;
    }
  }

  TEST_CASE("leaf resonance is reported") {
    const int q = 10;
    const LeafDiscretization d(q);
    const Rectangle unit{0, 1, 0, 1};
    const Matrix A = build_local_operator(CoefficientField::laplace(), unit, q);
    const Matrix Aii = A(d.interior, d.interior);
    Eigen::EigenSolver<Matrix> es(Aii);
    double lambda = 1e300;
    for (Index k = 0; k < es.eigenvalues().size(); ++k)
      if (std::abs(es.eigenvalues()(k).imag()) < 1e-9)
        lambda = std::min(lambda, es.eigenvalues()(k).real());
    CoefficientField helm = CoefficientField::laplace();
    helm.c = [lambda](Point) { return -lambda; };
    try {
      (void)build_leaf_dtn(helm, unit, d, 7);
      FAIL("expected a leaf resonance");
    } catch (const ResonanceError& e) {
      CHECK(e.kind() == ResonanceError::Kind::leaf);
      CHECK(e.box() == 7);
    }
  }
}
