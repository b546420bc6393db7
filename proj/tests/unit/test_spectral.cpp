#include "reslab/spectral.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace reslab;
using reslab::testing::small_model;

TEST_CASE("eig_near agrees with the dense solver") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    const long n = 200;
    std::vector<Triplet> t;
    for (long i = 0; i < n; ++i) {
        t.emplace_back(i, i, cplx(0.01 * i, -0.001 * i));
        if (i + 1 < n) {
            t.emplace_back(i, i + 1, cplx(0.01 * nd(rng), 0.01 * nd(rng)));
            t.emplace_back(i + 1, i, cplx(0.01 * nd(rng), 0.01 * nd(rng)));
        }
    }
    const auto h = fock::SparseOperator::from_triplets(n, t);
    const cplx z0(1.0, -0.1);
    const auto near = spectral::eig_near(h, z0, 3);
    const auto all = spectral::dense_spectrum(h);
    for (const auto& e : near) {
        double d = INFINITY;
        for (const auto& p : all) d = std::min(d, std::abs(p.value - e.value));
        CHECK(d < 1e-9);
        CHECK(e.residual < 1e-9);
        CHECK(std::abs(e.left_vec.dot(e.right_vec) - 1.0) < 1e-9);
    }
    CHECK(std::abs(near[0].value - z0) <= std::abs(near[2].value - z0));
}

TEST_CASE("dense spectrum is sorted and respects the cap") {
    const auto m = small_model(6, 1);
    const auto h = model::build_hamiltonian(m, cplx(0, 0.3), 0.05).matrix;
    const auto s = spectral::dense_spectrum(h);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i - 1].value.real() <= s[i].value.real());
    CHECK_THROWS_AS(spectral::dense_spectrum(h, 3), CapacityError);
}

TEST_CASE("g = 0 tracking returns lambda_j exactly") {
    const auto m = small_model();
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(spectral::resonance_at(m, cplx(0, 0.3), 0.0, j).value == cplx(m->spec().particle.levels[j]));
}

TEST_CASE("excited level turns into a resonance") {
    const auto m = small_model(12, 2);
    const auto up = spectral::resonance_at(m, cplx(0, 0.3), 0.03, 1);
    CHECK(up.value.imag() < 0.0);
    CHECK(up.residual < 1e-8);
    CHECK(up.overlap > 0.9);
}

TEST_CASE("theta spread is exactly zero at g = 0 and shrinks under grid refinement") {
    const std::vector<cplx> thetas = {cplx(0, 0.25), cplx(0, 0.3), cplx(0, 0.35)};
    auto spread_at = [&](std::size_t modes, double g) {
        return spectral::theta_report(small_model(modes, 1), g, thetas, 1).spread_full;
    };
    CHECK(spread_at(24, 0.0) == 0.0);
    const double coarse = spread_at(24, 0.03), fine = spread_at(48, 0.03);
    CHECK(fine < 0.5 * coarse);
}

TEST_CASE("string attached to lambda_j is rotated by -Im theta at g = 0") {
    const auto m = small_model(24, 1);
    const auto rep = spectral::theta_report(m, 0.0, {cplx(0, 0.2), cplx(0, 0.3), cplx(0, 0.4)}, 1);
    for (std::size_t i = 0; i < rep.thetas.size(); ++i)
        CHECK(std::abs(rep.string_angle[i] + rep.thetas[i].imag()) < 0.05);
}

TEST_CASE("eigenvalues at conj(theta) are the conjugates") {
    const auto m = small_model(6, 1);
    const cplx theta(0.05, 0.3);
    const auto a = spectral::dense_spectrum(model::build_hamiltonian(m, theta, 0.1).matrix);
    const auto b = spectral::dense_spectrum(model::build_hamiltonian(m, std::conj(theta), 0.1).matrix);
    for (const auto& e : a) {
        double d = INFINITY;
        for (const auto& f : b) d = std::min(d, std::abs(std::conj(e.value) - f.value));
        CHECK(d < 1e-9);
    }
}

TEST_CASE("tracking validates its inputs") {
    const auto m = small_model();
    CHECK_THROWS_AS(spectral::track_resonance(m, 0.0, {0.0, 0.1}, 1), ValidationError);
    CHECK_THROWS_AS(spectral::track_resonance(m, cplx(0, 0.3), {0.1}, 1), ValidationError);
    CHECK_THROWS_AS(spectral::track_resonance(m, cplx(0, 0.3), {0.0, 0.1}, 5), ValidationError);
}
