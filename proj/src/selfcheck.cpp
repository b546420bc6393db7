#include "reslab/selfcheck.hpp"

#include "reslab/dynamics.hpp"
#include "reslab/experiment.hpp"
#include "reslab/feshbach.hpp"
#include "reslab/resolvent.hpp"
#include "reslab/rg.hpp"
#include "reslab/spectral.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <random>

namespace reslab::selfcheck {

namespace {

double max_abs(const SpMat& m) {
    double s = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) s = std::max(s, std::abs(it.value()));
    return s;
}

CheckResult make(std::string name, double value, double tol, std::string detail = {}) {
    return {std::move(name), value, tol, value <= tol, std::move(detail)};
}

CheckResult ccr_off_top_shell() {
    const auto grid = fock::ModeGrid::geometric(0.1, 3.0, 3);
    const fock::FockBasis basis(grid, 3);
    double worst = 0.0;
    for (std::size_t n = 0; n < basis.modes(); ++n)
        for (std::size_t m = 0; m < basis.modes(); ++m) {
            const auto a = fock::ladder(basis, n, fock::LadderKind::Annihilate);
            const auto ad = fock::ladder(basis, m, fock::LadderKind::Create);
            const CMat comm = (a * ad - ad * a).dense();
            for (std::size_t i = 0; i < basis.size(); ++i) {
                if (basis.total(i) >= basis.n_max()) continue;
                for (std::size_t k = 0; k < basis.size(); ++k) {
                    if (basis.total(k) >= basis.n_max()) continue;
                    const double expected = (n == m && i == k) ? 1.0 : 0.0;
                    worst = std::max(worst, std::abs(comm(static_cast<long>(i), static_cast<long>(k)) - expected));
                }
            }
        }
    return make("ccr_off_top_shell", worst, 1e-14);
}

CheckResult hermiticity(const model::ModelPtr& m) {
    const auto h = model::build_hamiltonian(m, 0.0, 0.05).matrix.matrix;
    return make("hermiticity_theta0", max_abs(h - SpMat(h.adjoint())), 1e-12);
}

CheckResult splitting(const model::ModelPtr& m) {
    const cplx theta(0.0, 0.3);
    const auto full = model::build_hamiltonian(m, theta, 0.05).matrix.matrix;
    const auto cut = model::build_hamiltonian(m, theta, 0.05, 0.1, model::Part::Cutoff).matrix.matrix;
    const auto below = model::build_hamiltonian(m, theta, 0.05, 0.1, model::Part::BelowInteraction).matrix.matrix;
    return make("splitting_identity", max_abs(full - cut - below), 1e-12);
}

CheckResult conjugation(const model::ModelPtr& m) {
    const cplx theta(0.05, 0.3);
    const auto a = model::build_hamiltonian(m, theta, 0.05).matrix.matrix;
    const auto b = model::build_hamiltonian(m, std::conj(theta), 0.05).matrix.matrix;
    return make("conjugation_symmetry", max_abs(SpMat(a.conjugate()) - b), 1e-12);
}

std::vector<CheckResult> unitarity() {
    auto spec = model::default_spec();
    spec.n_max = 1;
    spec.grid.count = 40;
    const auto m = model::make_model(spec);
    const auto h = model::build_hamiltonian(m, 0.0, 0.1).matrix;
    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) times.push_back(2.0 * i);
    dynamics::PropagationOptions k;
    k.force_krylov = true;
    const auto tk = dynamics::propagate_survival(h, m->unperturbed_state(1), times, 1.0, k);
    const auto td = dynamics::propagate_survival(h, m->unperturbed_state(1), times, 1.0);
    double drift = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        drift = std::max(drift, tk.norm_drift[i]);
        diff = std::max(diff, std::abs(tk.amplitude[i] - td.amplitude[i]));
    }
    return {make("unitarity_propagation", drift, 1e-9), make("krylov_dense_agreement", diff, 1e-7)};
}

CheckResult basis_determinism(const model::ModelPtr& m) {
    const auto& a = m->basis();
    const fock::FockBasis b(a.grid(), a.n_max());
    double mismatches = a.size() == b.size() ? 0.0 : 1.0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
        if (a.state(i) != b.state(i) || a.index_of(a.state(i)) != static_cast<long>(i)) mismatches += 1.0;
    return make("basis_determinism", mismatches, 0.0);
}

CheckResult config_round_trip() {
    const nlohmann::json doc = {{"experiment", "ir-gap"},
                                {"model", model::to_json(model::default_spec())},
                                {"parameters", {{"g", 0.05}, {"sigma_list", {0.1, 0.2}}}}};
    const auto a = experiment::parse_config(doc);
    const auto b = experiment::parse_config(experiment::to_json(a));
    const bool same = experiment::canonical_dump(a) == experiment::canonical_dump(b) &&
                      experiment::to_json(a) == experiment::to_json(b);
    return make("config_round_trip", same ? 0.0 : 1.0, 0.0);
}

CheckResult isospectrality() {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const long n = 6;
        CMat h(n, n);
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < n; ++j) h(i, j) = cplx(nd(rng), nd(rng));
        CMat p = CMat::Zero(n, n);
        p(0, 0) = p(1, 1) = 1.0;
        Eigen::ComplexEigenSolver<CMat> es(h);
        for (long k = 0; k < n; ++k) {
            const cplx z = es.eigenvalues()[k];
            try {
                const auto f = feshbach::feshbach_map(h - z * CMat::Identity(n, n), p);
                const double smin = Eigen::JacobiSVD<CMat>(f.matrix).singularValues().tail(1)[0];
                worst = std::max(worst, smin / std::max(1.0, f.matrix.norm()));
            } catch (const NumericalError&) {
                // z also in the spectrum of the complement block; not a test point.
            }
        }
    }
    return make("feshbach_isospectrality", worst, 1e-8);
}

CheckResult combes_real_theta(const model::ModelPtr& m) {
    const double theta = std::log(m->grid().ratio());
    const auto h0 = model::build_hamiltonian(m, 0.0, 0.05).matrix;
    const auto ht = model::build_hamiltonian(m, theta, 0.05).matrix;
    const auto v = resolvent::random_vector(*m, 3);
    const CVec psi = v.at(*m, 0.0);
    const CVec right = v.at(*m, theta), left = v.at(*m, theta);
    double worst = 0.0;
    for (const cplx z : {cplx(0.5, 0.2), cplx(1.0, 0.1), cplx(1.3, 0.4)}) {
        const cplx a = resolvent::resolvent_element(h0, psi, psi, z).value;
        const cplx b = resolvent::resolvent_element(ht, left, right, z).value;
        worst = std::max(worst, std::abs(a - b) / std::abs(a));
    }
    return make("combes_real_theta", worst, 1e-10);
}

CheckResult g0_exactness(const model::ModelPtr& m) {
    const cplx theta(0.0, 0.3);
    double worst = std::abs(spectral::resonance_at(m, theta, 0.0, 1).value - 1.0);
    const auto h = model::build_hamiltonian(m, 0.0, 0.0).matrix;
    const auto t = dynamics::propagate_survival(h, m->unperturbed_state(1), {0.0, 1.0, 10.0, 100.0}, 1.0);
    worst = std::max(worst, t.sup_deviation());
    const auto d = rg::decimate(m, theta, 0.0, cplx(1.0, -0.01), 0.2, 0.2, 1);
    worst = std::max(worst, std::abs(d.e_z - (1.0 - cplx(1.0, -0.01))));
    return make("g0_exactness", worst, 1e-12);
}

} // namespace

std::vector<CheckResult> run_all() {
    const auto m = model::make_model(model::default_spec());
    std::vector<CheckResult> out;
    auto guarded = [&](const char* name, auto&& fn) {
        try {
            out.push_back(fn());
        } catch (const std::exception& e) {
            out.push_back({name, INFINITY, 0.0, false, e.what()});
        }
    };
    guarded("ccr_off_top_shell", [] { return ccr_off_top_shell(); });
    guarded("hermiticity_theta0", [&] { return hermiticity(m); });
    guarded("splitting_identity", [&] { return splitting(m); });
    guarded("conjugation_symmetry", [&] { return conjugation(m); });
    try {
        for (auto& r : unitarity()) out.push_back(r);
    } catch (const std::exception& e) {
        out.push_back({"unitarity_propagation", INFINITY, 0.0, false, e.what()});
    }
    guarded("basis_determinism", [&] { return basis_determinism(m); });
    guarded("config_round_trip", [] { return config_round_trip(); });
    guarded("feshbach_isospectrality", [] { return isospectrality(); });
    guarded("combes_real_theta", [&] { return combes_real_theta(m); });
    guarded("g0_exactness", [&] { return g0_exactness(m); });
    return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.passed) return false;
    return true;
}

} // namespace reslab::selfcheck
