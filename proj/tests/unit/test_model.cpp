#include "reslab/model.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace reslab;
using reslab::testing::max_abs;
using reslab::testing::small_model;

TEST_CASE("default instance has the documented dimension") {
    const auto m = model::make_model(model::default_spec());
    CHECK(m->dim() == 650);
    CHECK(m->levels() == 2);
}

TEST_CASE("hamiltonian is hermitian at theta = 0") {
    const auto m = small_model();
    const auto h = model::build_hamiltonian(m, 0.0, 0.1).matrix.matrix;
    CHECK(max_abs(h - SpMat(h.adjoint())) < 1e-14);
}

TEST_CASE("cutoff splitting and conjugation symmetry") {
    const auto m = small_model();
    const cplx theta(0.02, 0.3);
    const auto full = model::build_hamiltonian(m, theta, 0.1).matrix.matrix;
    const auto cut = model::build_hamiltonian(m, theta, 0.1, 0.1, model::Part::Cutoff).matrix.matrix;
    const auto below = model::build_hamiltonian(m, theta, 0.1, 0.1, model::Part::BelowInteraction).matrix.matrix;
    CHECK(max_abs(full - cut - below) < 1e-14);
    const auto conj = model::build_hamiltonian(m, std::conj(theta), 0.1).matrix.matrix;
    CHECK(max_abs(SpMat(full.conjugate()) - conj) < 1e-14);
}

TEST_CASE("real dilation by ln r acts as a mode shift on the free part") {
    const auto m = small_model(24, 1);
    const double lr = std::log(m->grid().ratio());
    const auto h0 = model::build_hamiltonian(m, 0.0, 0.0).matrix.dense();
    const auto ht = model::build_hamiltonian(m, lr, 0.0).matrix.dense();
    // one boson in mode n costs k_n at theta = 0 and k_{n-1} after the dilation
    fock::OccupationState occ(m->grid().size(), 0);
    occ[3] = 1;
    const long i = m->index(0, static_cast<std::size_t>(m->basis().index_of(occ)));
    CHECK(std::abs(ht(i, i) - m->grid().node(2)) < 1e-14);
    CHECK(std::abs(h0(i, i) - m->grid().node(3)) < 1e-14);
}

TEST_CASE("theta outside the analyticity radius is rejected") {
    const auto m = small_model();
    CHECK_THROWS_AS(model::build_hamiltonian(m, cplx(0.0, 0.6), 0.1), ValidationError);
}

TEST_CASE("spec JSON round trip and unknown keys") {
    const auto spec = model::default_spec();
    const auto doc = model::to_json(spec);
    CHECK(model::to_json(model::model_spec_from_json(doc)) == doc);
    auto bad = doc;
    bad["grid"]["colour"] = 1;
    try {
        model::model_spec_from_json(bad);
        FAIL("accepted an unknown key");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("model.grid.colour") != std::string::npos);
    }
}

TEST_CASE("invalid particle systems are rejected") {
    auto spec = model::default_spec();
    spec.particle.levels = {1.0, 0.5};
    CHECK_THROWS_AS(model::make_model(spec), ValidationError);
    spec = model::default_spec();
    spec.particle.coupling(0, 1) = cplx(0.0, 1.0);  // not hermitian
    CHECK_THROWS_AS(model::make_model(spec), ValidationError);
}

TEST_CASE("snap_sigma returns a cell edge") {
    const auto m = small_model();
    const double s = m->snap_sigma(0.1);
    bool found = false;
    for (const double e : m->grid().edges()) found = found || e == s;
    CHECK(found);
}
