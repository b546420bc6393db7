#include "reslab/rg.hpp"

#include "reslab/feshbach.hpp"
#include "reslab/fit.hpp"
#include "reslab/io.hpp"
#include "reslab/parallel.hpp"
#include "reslab/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace reslab::rg {

IrGapResult ir_gap_experiment(const model::ModelPtr& model, cplx theta, double g, std::size_t j,
                              const std::vector<double>& sigma_list, int jobs) {
    if (sigma_list.empty()) throw ValidationError("rg: sigma_list is empty");
    if (!(theta.imag() > 0.0)) throw ValidationError("rg: the IR comparison needs Im theta > 0");
    const auto& grid = model->grid();
    for (double s : sigma_list) {
        if (!(s > grid.kmin())) throw ValidationError("rg: sigma must exceed the grid minimum");
        if (s < grid.kmax() && grid.count_below(model->snap_sigma(s)) < 4)
            throw ValidationError("rg: sigma " + io::format_double(s) + " has fewer than 4 grid nodes below it");
    }
    IrGapResult out;
    out.predicted_slope = 1.0 + model->spec().form.mu;
    const auto full = spectral::resonance_at(model, theta, g, j);
    out.rows.resize(sigma_list.size());

    parallel_for(sigma_list.size(), jobs, [&](std::size_t i) {
        IrGapRow& row = out.rows[i];
        row.lambda_full = full.value;
        spectral::ResonanceEstimate cut;
        fock::SparseOperator h;
        if (sigma_list[i] >= grid.kmax()) {
            // The cutoff removes every mode from the interaction.
            row.sigma = sigma_list[i];
            cut = spectral::resonance_at(model, theta, 0.0, j);
            h = model::build_hamiltonian(model, theta, 0.0).matrix;
        } else {
            row.sigma = model->snap_sigma(sigma_list[i]);
            cut = spectral::resonance_at(model, theta, g, j, row.sigma);
            h = model::build_hamiltonian(model, theta, g, row.sigma, model::Part::Cutoff).matrix;
        }
        row.lambda_cut = cut.value;
        row.diff_abs = std::abs(row.lambda_full - row.lambda_cut);
        row.resolvable = row.diff_abs > 10.0 * std::max(full.residual, cut.residual);
        spectral::ArnoldiOptions opts;
        opts.left_vectors = false;
        const auto near = spectral::eig_near(h, cut.value, 4, opts);
        double gap = std::numeric_limits<double>::infinity();
        for (const auto& e : near) {
            const double d = std::abs(e.value - cut.value);
            if (d > 1e-9) gap = std::min(gap, d);
        }
        row.gap_over_sigma = gap / row.sigma;
    });

    std::vector<double> xs, ys;
    for (auto& row : out.rows) {
        if (row.resolvable && row.diff_abs > 0.0) {
            xs.push_back(row.sigma);
            ys.push_back(row.diff_abs);
        }
        row.slope_running = xs.size() >= 2 ? log_log_slope(xs, ys) : std::numeric_limits<double>::quiet_NaN();
    }
    out.slope = xs.size() >= 2 ? log_log_slope(xs, ys) : std::numeric_limits<double>::quiet_NaN();
    for (std::size_t a = 0; a < out.rows.size(); ++a)
        for (std::size_t b = 0; b < out.rows.size(); ++b)
            if (out.rows[a].sigma < out.rows[b].sigma && !(out.rows[a].diff_abs <= out.rows[b].diff_abs))
                out.monotone = false;
    return out;
}

ScaledOperator scale_transform(const SparseOperator& h, const fock::ModeGrid& grid, double rho) {
    if (grid.kind() != fock::GridKind::Geometric)
        throw ValidationError("rg: the scaling transformation needs a geometric grid");
    if (!(rho > 0.0)) throw ValidationError("rg: rho must be > 0");
    if (h.matrix.rows() != h.matrix.cols()) throw ValidationError("rg: operator must be square");
    const double s = std::log(rho) / std::log(grid.ratio());
    if (std::abs(s - std::round(s)) > 1e-9)
        throw ValidationError("rg: rho = " + io::format_double(rho) + " is not an integer power of the grid ratio " +
                              io::format_double(grid.ratio()));
    // S_rho relabels mode n (momentum k_n) as momentum k_n / rho; with unit-normalized mode
    // operators the matrix is unchanged, A_rho multiplies by 1/rho.
    return {(1.0 / rho) * h, grid.scaled(1.0 / rho)};
}

// ---------------------------------------------------------------------------

namespace {

struct DecimationSetup {
    double sigma = 0.0;
    double rho = 0.0;
    cplx lambda_cut;
    CMat h_full;
    CMat range;
    CMat complement;
    std::vector<fock::OccupationState> low_states;
    std::vector<double> field_energies;
};

DecimationSetup setup(const model::ModelPtr& model, cplx theta, double g, double sigma, double rho0, std::size_t j) {
    if (j >= model->levels()) throw ValidationError("rg: level index out of range");
    if (!(rho0 > 0.0)) throw ValidationError("rg: rho0 must be > 0");
    if (model->dim() > spectral::kDenseCap)
        throw CapacityError("rg: decimation is dense; dimension " + std::to_string(model->dim()) +
                            " exceeds the dense cap");
    DecimationSetup s;
    s.sigma = model->snap_sigma(sigma);
    s.rho = rho0;
    const auto& basis = model->basis();
    const auto& grid = model->grid();
    const std::size_t n_low = grid.count_below(s.sigma);

    const CMat h_cut = model::build_hamiltonian(model, theta, g, s.sigma, model::Part::Cutoff).matrix.dense();
    s.h_full = model::build_hamiltonian(model, theta, g).matrix.dense();

    // Group Fock states by their low-mode part, keeping basis order.
    std::vector<fock::OccupationState> order;
    std::map<fock::OccupationState, std::vector<std::size_t>> sectors;
    for (std::size_t f = 0; f < basis.size(); ++f) {
        fock::OccupationState low = basis.state(f);
        std::fill(low.begin() + static_cast<long>(n_low), low.end(), 0);
        auto [it, inserted] = sectors.try_emplace(low);
        if (inserted) order.push_back(low);
        it->second.push_back(f);
    }

    const long n = model->dim();
    std::vector<CVec> rights, lefts;
    for (const auto& low : order) {
        double energy = 0.0;
        for (std::size_t m = 0; m < n_low; ++m) energy += low[m] * grid.omega(m);
        if (energy > rho0 * (1.0 + 1e-12)) continue;
        const auto& fs = sectors.at(low);
        std::vector<long> idx;
        for (std::size_t l = 0; l < model->levels(); ++l)
            for (std::size_t f : fs) idx.push_back(model->index(l, f));
        const long d = static_cast<long>(idx.size());
        CMat hs(d, d);
        for (long a = 0; a < d; ++a)
            for (long b = 0; b < d; ++b) hs(a, b) = h_cut(idx[a], idx[b]);
        const long anchor = model->index(j, static_cast<std::size_t>(basis.index_of(low)));
        const long anchor_pos = std::find(idx.begin(), idx.end(), anchor) - idx.begin();

        Eigen::ComplexEigenSolver<CMat> es(hs);
        if (es.info() != Eigen::Success) throw NumericalError("rg", "sector eigendecomposition failed");
        const CMat& v = es.eigenvectors();
        long t = 0;
        double best = -1.0;
        for (long c = 0; c < d; ++c) {
            const double w = std::abs(v(anchor_pos, c)) / v.col(c).norm();
            if (w > best) {
                best = w;
                t = c;
            }
        }
        if (best < 0.5) throw NumericalError("rg", "cutoff resonance not identifiable in a low-energy sector");
        const CMat vinv = v.inverse();
        const double scale = v.col(t).norm();
        CVec r = CVec::Zero(n), w = CVec::Zero(n);
        for (long a = 0; a < d; ++a) {
            r[idx[a]] = v(a, t) / scale;
            w[idx[a]] = std::conj(vinv(t, a) * scale);  // <w, .> is the dual functional
        }
        if (rights.empty()) s.lambda_cut = es.eigenvalues()[t];
        rights.push_back(r);
        lefts.push_back(w);
        s.low_states.push_back(low);
        s.field_energies.push_back(energy);
    }
    const long r = static_cast<long>(rights.size());
    s.range.resize(n, r);
    CMat duals(n, r);
    for (long c = 0; c < r; ++c) {
        s.range.col(c) = rights[static_cast<std::size_t>(c)];
        duals.col(c) = lefts[static_cast<std::size_t>(c)];
    }
    // Ran(1 - P) = Ker P = orthogonal complement of the dual vectors.
    Eigen::HouseholderQR<CMat> qr(duals);
    const CMat q = qr.householderQ() * CMat::Identity(n, n);
    s.complement = q.rightCols(n - r);
    return s;
}

DecimationResult evaluate(const DecimationSetup& s, cplx z) {
    if (!(std::abs(z - s.lambda_cut) < 0.5 * s.sigma))
        throw ValidationError("rg: z must lie in the disc |z - lambda_cut| < sigma/2");
    const long n = s.h_full.rows();
    const CMat shifted = s.h_full - z * CMat::Identity(n, n);
    const auto reduced = feshbach::feshbach_map(shifted, s.range, s.complement);
    DecimationResult out;
    out.rho = s.rho;
    out.sigma = s.sigma;
    out.z = z;
    out.lambda_cut = s.lambda_cut;
    out.h_eff = reduced.matrix;
    out.complement_cond = reduced.complement_cond;
    out.low_states = s.low_states;
    out.field_energies = s.field_energies;
    out.e_z = out.h_eff(0, 0);
    out.t_diag = out.h_eff.diagonal().array() - out.e_z;
    CMat off = out.h_eff;
    off.diagonal().setZero();
    out.w_norm = off.size() > 1 ? Eigen::JacobiSVD<CMat>(off).singularValues()[0] : 0.0;
    return out;
}

} // namespace

DecimationResult decimate(const model::ModelPtr& model, cplx theta, double g, cplx z, double sigma, double rho0,
                          std::size_t j) {
    return evaluate(setup(model, theta, g, sigma, rho0, j), z);
}

DecimationResult decimate_at_cutoff_resonance(const model::ModelPtr& model, cplx theta, double g, double sigma,
                                              double rho0, std::size_t j) {
    const auto s = setup(model, theta, g, sigma, rho0, j);
    return evaluate(s, s.lambda_cut);
}

EzRoot ez_root(const model::ModelPtr& model, cplx theta, double g, double sigma, double rho0, std::size_t j) {
    const auto s = setup(model, theta, g, sigma, rho0, j);
    EzRoot out;
    out.lambda_cut = s.lambda_cut;
    cplx z = s.lambda_cut;
    cplx e = evaluate(s, z).e_z;
    const double h = 1e-7;
    while (std::abs(e) > 1e-14) {
        if (++out.iterations > 30) throw NumericalError("rg", "Newton on E_z did not converge");
        const cplx de = (evaluate(s, z + h).e_z - evaluate(s, z - h).e_z) / (2.0 * h);
        if (!(std::abs(de) > 0.0)) throw NumericalError("rg", "dE_z/dz vanished");
        const cplx step = -e / de;
        z += step;
        const cplx e_new = evaluate(s, z).e_z;
        if (!std::isfinite(std::abs(e_new)) || std::abs(e_new) > 10.0 * std::abs(e))
            throw NumericalError("rg", "Newton on E_z diverged");
        e = e_new;
        if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    out.lambda1 = z;
    out.residual = std::abs(e);
    return out;
}

std::vector<std::string> ir_gap_csv_header() {
    return {"sigma",    "lambda_full_re", "lambda_full_im", "lambda_cut_re", "lambda_cut_im",
            "diff_abs", "gap_over_sigma", "slope_running"};
}

std::vector<std::vector<std::string>> ir_gap_csv_rows(const IrGapResult& r) {
    using io::format_double;
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : r.rows)
        rows.push_back({format_double(row.sigma), format_double(row.lambda_full.real()),
                        format_double(row.lambda_full.imag()), format_double(row.lambda_cut.real()),
                        format_double(row.lambda_cut.imag()), format_double(row.diff_abs),
                        format_double(row.gap_over_sigma), format_double(row.slope_running)});
    return rows;
}

} // namespace reslab::rg
