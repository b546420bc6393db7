#include "reslab/rg.hpp"
#include "reslab/spectral.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace reslab;
using Catch::Approx;
using reslab::testing::small_model;

TEST_CASE("scale transform relabels modes and rescales energies") {
    const auto grid = fock::ModeGrid::geometric(1e-3, 4.0, 6);
    const fock::FockBasis basis(grid, 2);
    const auto hf = fock::field_energy(basis);
    const double rho = grid.ratio() * grid.ratio();
    const auto s = rg::scale_transform(hf, grid, rho);
    CHECK(s.grid.node(0) == Approx(grid.node(0) / rho));
    CHECK((s.matrix.dense() - hf.dense() / rho).norm() < 1e-14);
    CHECK_THROWS_AS(rg::scale_transform(hf, grid, 1.7), ValidationError);
}

TEST_CASE("decimation at g = 0 is exact") {
    const auto m = small_model(12, 2);
    const cplx z(1.0, -0.01);
    const auto d = rg::decimate(m, cplx(0, 0.3), 0.0, z, 0.2, 0.2, 1);
    CHECK(std::abs(d.e_z - (1.0 - z)) < 1e-13);
    CHECK(d.w_norm < 1e-13);
    CHECK(d.low_states.size() == static_cast<std::size_t>(d.h_eff.rows()));
}

TEST_CASE("decimated operator is singular at the full resonance") {
    const auto m = small_model(12, 2);
    const cplx theta(0, 0.3);
    const double g = 0.03;
    const auto full = spectral::resonance_at(m, theta, g, 1).value;
    const auto d = rg::decimate(m, theta, g, full, 0.2, 0.2, 1);
    const Eigen::JacobiSVD<CMat> svd(d.h_eff);
    CHECK(svd.singularValues().tail(1)[0] < 1e-9);
}

TEST_CASE("E_z root solves E_z = 0") {
    const auto m = small_model(12, 2);
    const auto r = rg::ez_root(m, cplx(0, 0.3), 0.03, 0.2, 0.2, 1);
    CHECK(r.residual < 1e-12);
    CHECK(std::abs(r.lambda1 - r.lambda_cut) < 0.01);
}

TEST_CASE("decimation needs z near the cutoff resonance") {
    const auto m = small_model(12, 2);
    CHECK_THROWS_AS(rg::decimate(m, cplx(0, 0.3), 0.03, cplx(0.5, -0.01), 0.2, 0.2, 1), ValidationError);
}

TEST_CASE("IR gap rows are reported per cutoff") {
    const auto m = small_model(12, 2);
    const auto r = rg::ir_gap_experiment(m, cplx(0, 0.3), 0.03, 1, {0.1, 0.2, 0.4});
    REQUIRE(r.rows.size() == 3);
    CHECK(r.predicted_slope == Approx(1.5));
    for (const auto& row : r.rows) CHECK(row.diff_abs > 0.0);
}
