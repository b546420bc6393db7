// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// `acceptance N ...` runs only the listed criteria.

#include "reslab/dynamics.hpp"
#include "reslab/feshbach.hpp"
#include "reslab/fit.hpp"
#include "reslab/resolvent.hpp"
#include "reslab/rg.hpp"
#include "reslab/selfcheck.hpp"
#include "reslab/spectral.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace reslab;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const cplx kTheta(0.0, 0.3);

model::ModelPtr default_model() {
    static const auto m = model::make_model(model::default_spec());
    return m;
}

// Smallest |eigenvalue| of F_P(H - z) relative to the scale of H.
cplx nearest_zero_eigenvalue(const CMat& f) {
    const Eigen::ComplexEigenSolver<CMat> es(f, false);
    cplx best = es.eigenvalues()[0];
    for (long i = 1; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()[i]) < std::abs(best)) best = es.eigenvalues()[i];
    return best;
}

Outcome isospectrality() {
    std::mt19937_64 rng(20240611);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> dim(6, 8);
    int matrices = 0, skipped = 0;
    double forward = 0.0, backward = 0.0;
    while (matrices < 200) {
        const long n = dim(rng);
        CMat h(n, n);
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < n; ++j) h(i, j) = cplx(nd(rng), nd(rng));
        const long rank = 1 + static_cast<long>(rng() % 3);
        // oblique projection: range spanned by random columns, kernel by a random complement
        CMat basis(n, n);
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < n; ++j) basis(i, j) = cplx(nd(rng), nd(rng));
        const CMat range = basis.leftCols(rank);
        const CMat complement = basis.rightCols(n - rank);
        const CMat id = CMat::Identity(n, n);
        const Eigen::ComplexEigenSolver<CMat> es(h, false);
        const auto& ev = es.eigenvalues();

        bool ok = true;
        double fw = 0.0, bw = 0.0;
        try {
            // z in spec(H) => 0 in spec(F_P(H - z))
            for (long k = 0; k < n && ok; ++k) {
                const auto f = feshbach::feshbach_map(h - ev[k] * id, range, complement);
                if (f.complement_cond > 1e8) ok = false;
                fw = std::max(fw, std::abs(nearest_zero_eigenvalue(f.matrix)) / h.norm());
            }
            // 0 in spec(F_P(H - z)) => z in spec(H): Newton on the small eigenvalue of F from a perturbed start
            for (long k = 0; k < n && ok; ++k) {
                cplx z = ev[k] + cplx(1e-3, -1e-3) * h.norm() / 10.0;
                for (int it = 0; it < 60; ++it) {
                    const cplx mu = nearest_zero_eigenvalue(feshbach::feshbach_map(h - z * id, range, complement).matrix);
                    const cplx dz = 1e-7 * (1.0 + std::abs(z));
                    const cplx mu2 =
                        nearest_zero_eigenvalue(feshbach::feshbach_map(h - (z + dz) * id, range, complement).matrix);
                    const cplx step = mu * dz / (mu2 - mu);
                    z -= step;
                    if (std::abs(step) < 1e-14 * (1.0 + std::abs(z))) break;
                }
                double d = INFINITY;
                for (long i = 0; i < n; ++i) d = std::min(d, std::abs(z - ev[i]));
                bw = std::max(bw, d / (1.0 + std::abs(z)));
            }
        } catch (const NumericalError&) {
            ok = false;
        }
        if (!ok) {
            ++skipped;
            continue;
        }
        forward = std::max(forward, fw);
        backward = std::max(backward, bw);
        ++matrices;
    }
    return {forward <= 1e-8 && backward <= 1e-8,
            fmt("200 matrices (%d ill-conditioned skipped): max |0-eig| %.2e, max root mismatch %.2e", skipped, forward,
                backward)};
}

Outcome combes() {
    const auto m = default_model();
    const double lr = std::log(m->grid().ratio());
    const auto h0 = model::build_hamiltonian(m, 0.0, 0.05).matrix;
    const std::vector<resolvent::TestVector> vectors = {
        resolvent::unperturbed_vector(*m, 1), resolvent::unperturbed_vector(*m, 0), resolvent::random_vector(*m, 1),
        resolvent::random_vector(*m, 2), resolvent::random_vector(*m, 3)};
    const std::vector<cplx> zs = {{0.5, 0.2}, {1.0, 0.1}, {1.3, 0.4}, {0.2, 0.5}};
    double worst = 0.0;
    int pairs = 0;
    for (const double theta : {lr, -lr}) {
        const auto ht = model::build_hamiltonian(m, theta, 0.05).matrix;
        for (const auto& v : vectors) {
            const CVec psi = v.at(*m, 0.0), psi_t = v.at(*m, theta);
            for (const cplx z : zs) {
                const cplx a = resolvent::resolvent_element(h0, psi, psi, z).value;
                const cplx b = resolvent::resolvent_element(ht, psi_t, psi_t, z).value;
                worst = std::max(worst, std::abs(a - b) / std::abs(a));
                ++pairs;
            }
        }
    }
    return {worst <= 1e-10, fmt("%d (psi, z) pairs at theta = +-ln r: max rel diff %.2e", pairs / 2, worst)};
}

Outcome g0_exactness() {
    const auto m = default_model();
    double tracker = 0.0, survival = 0.0, pole = 0.0, decim = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
        const double lj = m->spec().particle.levels[j];
        tracker = std::max(tracker, std::abs(spectral::resonance_at(m, kTheta, 0.0, j).value - lj));
        const auto h = model::build_hamiltonian(m, 0.0, 0.0).matrix;
        std::vector<double> times;
        for (int i = 0; i <= 50; ++i) times.push_back(0.7 * i * i);
        const auto tr = dynamics::propagate_survival(h, m->unperturbed_state(j), times, lj);
        for (std::size_t i = 0; i < times.size(); ++i)
            survival = std::max(survival, std::abs(tr.amplitude[i] - std::exp(cplx(0.0, -lj * times[i]))));
        resolvent::ContinuationDomain dom;
        const auto scan = resolvent::continuation_scan(m, j, 0.0, kTheta, resolvent::unperturbed_vector(*m, j), dom);
        std::vector<std::pair<cplx, cplx>> data;
        for (const auto& s : scan.samples)
            if (s.wedge_ok) data.emplace_back(s.z, s.value);
        pole = std::max(pole, std::abs(resolvent::pole_fit(data, scan.center).p - 1.0));
        for (const cplx z : {cplx(lj, -0.01), cplx(lj + 0.02, -0.03)}) {
            const auto d = rg::decimate(m, kTheta, 0.0, z, 0.2, 0.2, j);
            decim = std::max(decim, std::abs(d.e_z - (lj - z)));
        }
    }
    const double worst = std::max({tracker, survival, pole, decim});
    return {worst <= 1e-12, fmt("tracker %.1e, survival %.1e, pole p %.1e, E_z %.1e", tracker, survival, pole, decim)};
}

Outcome fermi_golden_rule() {
    const auto m = default_model();
    const auto c = feshbach::fgr(m->spec(), 1);
    std::vector<double> gs = {0.04, 0.02, 0.01}, ratio;
    bool strict = true;
    for (const double g : gs) {
        const cplx l = spectral::resonance_at(m, kTheta, g, 1).value;
        strict = strict && l.imag() < 0.0;
        ratio.push_back(l.imag() / (g * g));
    }
    const double limit = line_fit(gs, ratio).second;
    const double target = -c.z_od.imag();
    const double rel = std::abs(limit / target - 1.0);
    return {strict && rel <= 0.10,
            fmt("Im lambda/g^2 -> %.6f vs -Im Z_od %.6f (rel %.3f); Im lambda < 0 at all g: %s", limit, target, rel,
                strict ? "yes" : "no")};
}

Outcome ir_scaling() {
    const auto r = rg::ir_gap_experiment(default_model(), kTheta, 0.05, 1, {0.05, 0.1, 0.2, 0.4});
    const double mu = default_model()->spec().form.mu;
    return {std::abs(r.slope - (1.0 + mu)) <= 0.4, fmt("slope %.3f, predicted %.3f +- 0.4", r.slope, 1.0 + mu)};
}

Outcome metastability() {
    auto spec = model::default_spec();
    spec.n_max = 1;
    spec.grid.count = 600;
    const auto m = model::make_model(spec);
    dynamics::MetastabilityOptions opts;
    opts.jobs = 3;
    const auto rep = dynamics::metastability_report(m, 1, {0.08, 0.04, 0.02}, opts);
    bool ok = true;
    double env = 0.0;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        env = std::max(env, r.envelope_error);
        ok = ok && r.resolvable && r.envelope_error <= 0.10;
        if (i > 0) ok = ok && r.sup_error < rep.rows[i - 1].sup_error;
    }
    return {ok, fmt("max envelope error %.3f; E(g) = %.3e, %.3e, %.3e; alpha_hat %.3f (predicted %.3f, not gated)", env,
                    rep.rows[0].sup_error, rep.rows[1].sup_error, rep.rows[2].sup_error, rep.alpha_hat,
                    rep.alpha_predicted)};
}

Outcome pole_structure() {
    const auto m = default_model();
    auto fit_at = [&](const resolvent::TestVector& v, double g, bool& scan_ok) {
        resolvent::ContinuationDomain dom;
        resolvent::ScanOptions so;
        so.jobs = 4;
        const auto scan = resolvent::continuation_scan(m, 1, g, kTheta, v, dom, so);
        std::vector<std::pair<cplx, cplx>> data;
        for (const auto& s : scan.samples)
            if (s.wedge_ok && std::isfinite(s.value.real())) data.emplace_back(s.z, s.value);
        scan_ok = scan_ok && scan.samples.size() == 18 && scan.skipped == 0 && data.size() == 18;
        return resolvent::pole_fit(data, scan.center);
    };
    // the 18-point scan at g = 0.05
    bool scan_ok = true;
    const auto psi = resolvent::unperturbed_vector(*m, 1);
    const auto f05 = fit_at(psi, 0.05, scan_ok);

    // residue extrapolated to g -> 0 (linear in g^2) against |<psi, Psi_j>|^2
    auto extrapolated = [&](const resolvent::TestVector& v) {
        std::vector<double> g2, pr;
        for (const double g : {0.035, 0.025, 0.015}) {
            g2.push_back(g * g);
            pr.push_back(std::abs(fit_at(v, g, scan_ok).p));
        }
        return line_fit(g2, pr).second;
    };
    const double target = std::norm(psi.overlap(*m, 1));
    const double p0 = extrapolated(psi);
    const double err = std::abs(p0 / target - 1.0);
    const auto soft = resolvent::soft_vector(*m, 1);
    const double soft_p0 = extrapolated(soft), soft_target = std::norm(soft.overlap(*m, 1));

    // synthetic data with known (p, beta)
    double synth_p = 0.0, synth_beta = 0.0;
    const cplx lambda(1.0, -0.004);
    for (const auto& [p, c, beta] : std::vector<std::tuple<cplx, cplx, double>>{
             {{0.9, 0.05}, {0.02, -0.01}, 0.75}, {{1.0, 0.0}, {0.05, 0.0}, 0.5}, {{0.7, -0.1}, {0.01, 0.02}, 0.9}}) {
        const auto dom = resolvent::make_domain(lambda, 1.4, 3.5);
        std::vector<std::pair<cplx, cplx>> data;
        for (const cplx z : dom.samples) data.emplace_back(z, p / (lambda - z) + c * std::pow(lambda - z, -beta));
        const auto f = resolvent::pole_fit(data, lambda);
        synth_p = std::max(synth_p, std::abs(f.p / p - 1.0));
        synth_beta = std::max(synth_beta, std::abs(f.fitted_beta - beta));
    }
    const bool ok = scan_ok && err <= 0.02 && synth_p <= 0.01 && synth_beta <= 0.05;
    return {ok, fmt("scans ok %s; Psi_j: |p|(g->0) %.4f vs %.4f (%.2f%%), p(0.05) = %.4f%+.4fi; soft (not gated): "
                    "%.4f vs %.4f; synthetic p err %.1e, beta err %.1e; beta_hat %.3f vs predicted %.3f (not gated)",
                    scan_ok ? "yes" : "no", p0, target, 100 * err, f05.p.real(), f05.p.imag(), soft_p0, soft_target,
                    synth_p, synth_beta, f05.fitted_beta, resolvent::predicted_beta(m->spec().form.mu))};
}

Outcome decimation() {
    const auto m = default_model();
    const double mu = m->spec().form.mu;
    std::vector<double> gs = {0.04, 0.02, 0.01}, dez;
    for (const double g : gs) dez.push_back(std::abs(rg::decimate_at_cutoff_resonance(m, kTheta, g, 0.2, 0.2, 1).e_z));
    std::vector<double> sigmas = {0.05, 0.1, 0.2, 0.4}, wn;
    for (const double s : sigmas) wn.push_back(rg::decimate_at_cutoff_resonance(m, kTheta, 0.05, s, s, 1).w_norm);
    const double s_ez = log_log_slope(gs, dez), s_w = log_log_slope(sigmas, wn);
    const auto root = rg::ez_root(m, kTheta, 0.05, 0.2, 0.2, 1);
    const cplx full = spectral::resonance_at(m, kTheta, 0.05, 1).value;
    const double d1 = std::abs(root.lambda1 - full), dc = std::abs(root.lambda_cut - full);
    const bool ok_ez = std::abs(s_ez - 2.0) <= 0.1, ok_w = std::abs(s_w - (1.0 + mu)) <= 0.3, ok_i = d1 <= dc;
    return {ok_ez && ok_w && ok_i,
            fmt("dE_z slope %.3f (%s), W_norm slope %.3f (%s), |l1 - l| %.2e vs |l_cut - l| %.2e (%s)", s_ez,
                ok_ez ? "ok" : "FAIL", s_w, ok_w ? "ok" : "FAIL", d1, dc, ok_i ? "ok" : "FAIL")};
}

Outcome invariants() {
    const auto results = selfcheck::run_all();
    std::string failed;
    for (const auto& r : results)
        if (!r.passed) failed += " " + r.name;
    bool ok = selfcheck::all_passed(results);
    std::string detail = fmt("%zu library checks", results.size());
#ifdef RESLAB_CLI
    const int rc = std::system(RESLAB_CLI " selfcheck > /dev/null");
    const int code = rc == -1 ? -1 : WEXITSTATUS(rc);
    ok = ok && code == 0;
    detail += fmt(", CLI exit code %d", code);
#endif
    if (!failed.empty()) detail += ", failed:" + failed;
    return {ok, detail};
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> fn;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "feshbach isospectrality", 5, isospectrality},
        {2, "combes identity", 10, combes},
        {3, "g = 0 exactness", 30, g0_exactness},
        {4, "fermi golden rule", 300, fermi_golden_rule},
        {5, "ir eigenvalue-difference scaling", 600, ir_scaling},
        {6, "metastability", 600, metastability},
        {7, "pole structure", 300, pole_structure},
        {8, "decimation scalings", 600, decimation},
        {9, "invariant suite", 60, invariants},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = secs <= c.budget_s;
        const bool pass = o.passed && in_budget;
        if (!pass) ++failures;
        std::printf("criterion %d %-34s %s  [%.1fs%s] %s\n", c.id, c.name, pass ? "PASS" : "FAIL", secs,
                    in_budget ? "" : " over budget", o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
