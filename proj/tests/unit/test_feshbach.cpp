#include "reslab/feshbach.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace reslab;
using Catch::Approx;

TEST_CASE("feshbach map of a block-diagonal matrix is the block") {
    CMat h = CMat::Zero(4, 4);
    h(0, 0) = 2.0;
    h(0, 1) = 1.0;
    h(1, 0) = 0.5;
    h(1, 1) = 3.0;
    h(2, 2) = 5.0;
    h(3, 3) = 7.0;
    CMat p = CMat::Zero(4, 4);
    p(0, 0) = p(1, 1) = 1.0;
    const auto f = feshbach::feshbach_map(h, p);
    CHECK((f.matrix - h.topLeftCorner(2, 2)).norm() < 1e-14);
}

TEST_CASE("feshbach map is isospectral") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        CMat h(7, 7);
        for (long i = 0; i < 7; ++i)
            for (long j = 0; j < 7; ++j) h(i, j) = cplx(nd(rng), nd(rng));
        CMat range = CMat::Zero(7, 2), comp = CMat::Zero(7, 5);
        range(0, 0) = range(1, 1) = 1.0;
        for (long i = 0; i < 5; ++i) comp(i + 2, i) = 1.0;
        const Eigen::ComplexEigenSolver<CMat> es(h, false);
        for (long k = 0; k < 7; ++k) {
            const cplx z = es.eigenvalues()[k];
            const auto f = feshbach::feshbach_map(h - z * CMat::Identity(7, 7), range, comp);
            CHECK(std::abs(f.matrix.determinant()) < 1e-10 * std::max(1.0, f.matrix.squaredNorm()));
        }
    }
}

TEST_CASE("singular complement block is reported") {
    CMat h = CMat::Identity(3, 3);
    CMat p = CMat::Zero(3, 3);
    p(0, 0) = 1.0;
    CHECK_THROWS_AS(feshbach::feshbach_map(h - CMat::Identity(3, 3), p), NumericalError);
}

TEST_CASE("rank-one Schur reduction matches the dense formula") {
    const auto m = reslab::testing::small_model(6, 1);
    const auto h = model::build_hamiltonian(m, cplx(0, 0.3), 0.1).matrix;
    const long piv = m->index(1, 0);
    const feshbach::SchurReduction red(h, piv);
    const cplx z(0.9, -0.05);
    const CMat hd = h.dense() - z * CMat::Identity(h.dim(), h.dim());
    CMat p = CMat::Zero(h.dim(), h.dim());
    p(piv, piv) = 1.0;
    const cplx dense = feshbach::feshbach_map(hd, p).matrix(0, 0);
    const auto [b, db] = red.b_and_derivative(z);
    CHECK(std::abs(b - dense) < 1e-12);
    const cplx fd = (red.b_of(z + 1e-6) - red.b_of(z - 1e-6)) / 2e-6;
    CHECK(std::abs(db - fd) < 1e-6);
}

TEST_CASE("principal value against a closed form") {
    // PV int_0^2 e^k/(k - 1) dk = e (Ei(1) - Ei(-1))
    const double expected = std::exp(1.0) * (1.8951178163559368 + 0.21938393439552029);
    const double pv = feshbach::principal_value([](double k) { return std::exp(k); }, 0.0, 2.0, 1.0, 400);
    CHECK(pv == Approx(expected).epsilon(1e-9));
}

TEST_CASE("golden rule: ground state is stable, excited state decays") {
    const auto spec = model::default_spec();
    const auto c0 = feshbach::fgr(spec, 0);
    CHECK(c0.stable);
    CHECK(c0.z_od.imag() == 0.0);
    const auto c1 = feshbach::fgr(spec, 1);
    CHECK_FALSE(c1.stable);
    CHECK(c1.z_od.imag() > 0.0);
    CHECK(c1.width(0.1) == Approx(0.01 * c1.z_od.imag()));
}

TEST_CASE("Schur Newton finds the cutoff resonance of the eigensolver") {
    const auto m = reslab::testing::small_model(10, 2);
    const cplx theta(0, 0.3);
    const auto a = feshbach::schur_resonance(m, theta, 0.02, 1, 0.2);
    const auto b = spectral::resonance_at(m, theta, 0.02, 1, 0.2);
    CHECK(std::abs(a.value - b.value) < 1e-9);
}
