#include "reslab/resolvent.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace reslab;
using Catch::Approx;
using reslab::testing::small_model;

TEST_CASE("resolvent element matches a dense inverse") {
    const auto m = small_model();
    const auto h = model::build_hamiltonian(m, cplx(0, 0.3), 0.1).matrix;
    const auto v = resolvent::random_vector(*m, 4);
    const CVec a = v.at(*m, 0.0), b = resolvent::soft_vector(*m, 1).at(*m, 0.0);
    const cplx z(0.8, -0.02);
    const CMat inv = (h.dense() - z * CMat::Identity(h.dim(), h.dim())).inverse();
    const auto r = resolvent::resolvent_element(h, a, b, z);
    CHECK(std::abs(r.value - a.dot(inv * b)) < 1e-10 * std::abs(r.value));
    CHECK(r.cond_estimate > 1.0);
}

TEST_CASE("singular shifts are reported as numerical failures") {
    const auto m = small_model();
    const auto h = model::build_hamiltonian(m, 0.0, 0.0).matrix;
    const CVec psi = m->unperturbed_state(1);
    CHECK_THROWS_AS(resolvent::resolvent_element(h, psi, psi, 1.0), NumericalError);
}

TEST_CASE("Combes identity at real theta on a small instance") {
    const auto m = small_model(24, 1);
    const double lr = std::log(m->grid().ratio());
    const auto v = resolvent::random_vector(*m, 9);
    const auto h0 = model::build_hamiltonian(m, 0.0, 0.05).matrix;
    const auto ht = model::build_hamiltonian(m, lr, 0.05).matrix;
    const cplx z(0.7, 0.3);
    const cplx a = resolvent::resolvent_element(h0, v.at(*m, 0.0), v.at(*m, 0.0), z).value;
    const cplx b = resolvent::resolvent_element(ht, v.at(*m, lr), v.at(*m, lr), z).value;
    CHECK(std::abs(a - b) < 1e-9 * std::abs(a));
}

TEST_CASE("test vectors: normalization, overlap and D' norm") {
    const auto m = small_model();
    const auto soft = resolvent::soft_vector(*m, 1);
    CHECK(soft.at(*m, 0.0).norm() == Approx(1.0));
    CHECK(std::norm(soft.overlap(*m, 1)) < 1.0);
    CHECK(resolvent::dprime_norm(m->unperturbed_state(1), *m) == 0.0);
    CHECK(resolvent::dprime_norm(soft.at(*m, 0.0), *m) > 0.0);
    CHECK((resolvent::random_vector(*m, 3).at(*m, 0.0) - resolvent::random_vector(*m, 3).at(*m, 0.0)).norm() == 0.0);
}

TEST_CASE("continuation domain geometry and wedge") {
    const cplx c(1.0, -0.01);
    const auto d = resolvent::make_domain(c, 1.4, 3.5);
    REQUIRE(d.samples.size() == 18);
    for (const cplx z : d.samples) {
        const double r = std::abs(z - c) / 0.01;
        CHECK(r >= 0.05 - 1e-12);
        CHECK(r <= 0.45 + 1e-12);
        CHECK(resolvent::wedge_ok(cplx(0, 0.3), c, z));
    }
    CHECK_THROWS_AS(resolvent::make_domain(c, 1.7, 3.5), ValidationError);
    CHECK_FALSE(resolvent::wedge_ok(cplx(0, 0.3), c, c + 0.001));
}

TEST_CASE("pole fit recovers synthetic pole plus power remainder") {
    const cplx lambda(0.95, -0.01), p(0.8, 0.1), c(0.03, -0.02);
    const double beta = 0.75;
    const auto d = resolvent::make_domain(lambda, 1.4, 3.5);
    std::vector<std::pair<cplx, cplx>> data;
    for (const cplx z : d.samples) data.emplace_back(z, p / (lambda - z) + c * std::pow(lambda - z, -beta));
    const auto f = resolvent::pole_fit(data, lambda);
    CHECK(std::abs(f.p - p) < 1e-8);
    CHECK(f.fitted_beta == Approx(beta).margin(1e-6));
    CHECK_FALSE(f.degenerate);
    CHECK(resolvent::predicted_beta(0.5) == Approx(0.75));
}

TEST_CASE("pole fit of a pure pole is flagged degenerate") {
    const cplx lambda(1.0, 0.0);
    const auto d = resolvent::make_domain(lambda, 1.4, 3.5);
    std::vector<std::pair<cplx, cplx>> data;
    for (const cplx z : d.samples) data.emplace_back(z, 1.0 / (lambda - z));
    const auto f = resolvent::pole_fit(data, lambda);
    CHECK(f.degenerate);
    CHECK(std::abs(f.p - 1.0) < 1e-13);
    data.resize(5);
    CHECK_THROWS_AS(resolvent::pole_fit(data, lambda), ValidationError);
}
