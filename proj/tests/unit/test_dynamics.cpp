#include "reslab/dynamics.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace reslab;
using Catch::Approx;
using reslab::testing::small_model;

TEST_CASE("free evolution of an eigenstate is a pure phase") {
    const auto m = small_model();
    const auto h = model::build_hamiltonian(m, 0.0, 0.0).matrix;
    const std::vector<double> t = {0.0, 0.5, 3.0, 40.0};
    const auto tr = dynamics::propagate_survival(h, m->unperturbed_state(1), t, 1.0);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(tr.amplitude[i] - std::exp(cplx(0, -t[i]))) < 1e-13);
    CHECK(tr.sup_deviation() < 1e-13);
}

TEST_CASE("Krylov and dense propagation agree and conserve the norm") {
    const auto m = small_model(10, 2);
    const auto h = model::build_hamiltonian(m, 0.0, 0.1).matrix;
    std::vector<double> t;
    for (int i = 0; i <= 10; ++i) t.push_back(5.0 * i);
    dynamics::PropagationOptions k;
    k.force_krylov = true;
    const auto a = dynamics::propagate_survival(h, m->unperturbed_state(1), t, 1.0, k);
    const auto b = dynamics::propagate_survival(h, m->unperturbed_state(1), t, 1.0);
    CHECK(a.krylov);
    CHECK_FALSE(b.krylov);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(std::abs(a.amplitude[i] - b.amplitude[i]) < 1e-9);
        CHECK(a.norm_drift[i] < 1e-9);
    }
}

TEST_CASE("propagation rejects bad inputs") {
    const auto m = small_model();
    const auto h = model::build_hamiltonian(m, cplx(0, 0.3), 0.1).matrix;
    CHECK_THROWS_AS(dynamics::propagate_survival(h, m->unperturbed_state(1), {0.0, 1.0}, 1.0), ValidationError);
    const auto hr = model::build_hamiltonian(m, 0.0, 0.1).matrix;
    CHECK_THROWS_AS(dynamics::propagate_survival(hr, 2.0 * m->unperturbed_state(1), {0.0}, 1.0), ValidationError);
    CHECK_THROWS_AS(dynamics::propagate_survival(hr, m->unperturbed_state(1), {1.0, 0.5}, 1.0), ValidationError);
}

TEST_CASE("bump is one on the inner interval and zero outside") {
    const dynamics::Interval iv{1.0, 0.2};
    CHECK(dynamics::bump(iv, 1.0) == 1.0);
    CHECK(dynamics::bump(iv, 1.09) == 1.0);
    CHECK(dynamics::bump(iv, 1.21) == 0.0);
    const double s = dynamics::bump(iv, 1.15);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(dynamics::bump(iv, 0.85) == Approx(s));
}

TEST_CASE("a filter wide enough to hold the spectrum removes nothing") {
    const auto m = small_model();
    const auto h = model::build_hamiltonian(m, 0.0, 0.05).matrix;
    const auto psi = m->unperturbed_state(1);
    const auto f = dynamics::filtered_survival(h, psi, {0.0, 1.0}, 1.0, {0.0, 200.0});
    CHECK(f.removed_weight < 1e-20);
    const auto narrow = dynamics::filtered_survival(h, psi, {0.0}, 1.0, {5.0, 0.1});
    CHECK(narrow.removed_weight == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("time grid and predicted exponent") {
    const auto t = dynamics::survival_time_grid(0.5, 20, 2.0);
    CHECK(t.size() == 20);
    CHECK(t.front() == 0.0);
    CHECK(t[1] == Approx(0.02));
    CHECK(t.back() == Approx(4.0));
    CHECK(dynamics::predicted_alpha(model::default_spec()) == Approx(2.0 / 3.0));
    CHECK(dynamics::predicted_alpha(model::default_qed_spec()) == Approx(2.0 / 3.0));
}

TEST_CASE("metastability report validates the coupling list") {
    const auto m = small_model();
    CHECK_THROWS_AS(dynamics::metastability_report(m, 1, {0.02, 0.04, 0.08}), ValidationError);
    CHECK_THROWS_AS(dynamics::metastability_report(m, 1, {0.08, 0.04}), ValidationError);
}
