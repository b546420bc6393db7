#include "reslab/dynamics.hpp"

#include "reslab/fit.hpp"
#include "reslab/io.hpp"
#include "reslab/parallel.hpp"
#include "reslab/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace reslab::dynamics {

double SurvivalTrace::sup_deviation() const {
    double s = 0.0;
    for (double d : deviation) s = std::max(s, d);
    return s;
}

namespace {

void require_hermitian(const SparseOperator& h) {
    const SpMat diff = h.matrix - SpMat(h.matrix.adjoint());
    double scale = 0.0;
    for (int k = 0; k < h.matrix.outerSize(); ++k)
        for (SpMat::InnerIterator it(h.matrix, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
    double worst = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (SpMat::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    if (worst > 1e-12 * std::max(1.0, scale))
        throw ValidationError("dynamics: propagation needs a hermitian (theta = 0) Hamiltonian");
}

void require_normalized(const CVec& psi, long dim) {
    if (psi.size() != dim) throw ValidationError("dynamics: state dimension mismatch");
    if (std::abs(psi.norm() - 1.0) > 1e-12) throw ValidationError("dynamics: state must be normalized");
}

void require_times(const std::vector<double>& times) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0) || !std::isfinite(times[i])) throw ValidationError("dynamics: times must be >= 0");
        if (i > 0 && !(times[i] > times[i - 1])) throw ValidationError("dynamics: times must be increasing");
    }
}

void fill_reference(SurvivalTrace& t, cplx lambda_ref) {
    t.reference.resize(t.times.size());
    t.deviation.resize(t.times.size());
    for (std::size_t i = 0; i < t.times.size(); ++i) {
        t.reference[i] = std::exp(-kI * t.times[i] * lambda_ref);
        t.deviation[i] = std::abs(t.amplitude[i] - t.reference[i]);
    }
}

struct DenseSystem {
    RVec energies;
    CVec weights;  // |<e_k, psi>|^2 as complex for convenience
    CVec coeffs;   // <e_k, psi>
    CMat vectors;
};

DenseSystem diagonalize(const SparseOperator& h, const CVec& psi, long dense_cap) {
    if (h.dim() > dense_cap)
        throw CapacityError("dynamics: dimension " + std::to_string(h.dim()) + " exceeds the dense cap " +
                            std::to_string(dense_cap));
    Eigen::SelfAdjointEigenSolver<CMat> es(h.dense());
    if (es.info() != Eigen::Success) throw NumericalError("dynamics", "hermitian eigendecomposition failed");
    DenseSystem d;
    d.energies = es.eigenvalues();
    d.vectors = es.eigenvectors();
    d.coeffs = d.vectors.adjoint() * psi;
    d.weights = d.coeffs.cwiseAbs2().cast<cplx>();
    return d;
}

// Lanczos approximation of e^{-i dt H} v for unit v. Returns the propagated vector and the
// a-posteriori error estimate beta_m |[e^{-i dt T}]_{m,1}|.
struct KrylovStep {
    CVec v;
    double error = 0.0;
};

KrylovStep lanczos_step(const SpMat& h, const CVec& v0, double dt, int m_max) {
    const long n = v0.size();
    const double nrm = v0.norm();
    const int m = static_cast<int>(std::min<long>(m_max, n));
    CMat basis(n, m);
    RVec alpha(m), beta(m);
    basis.col(0) = v0 / nrm;
    int used = m;
    double beta_last = 0.0;
    for (int k = 0; k < m; ++k) {
        CVec w = h * basis.col(k);
        alpha[k] = basis.col(k).dot(w).real();
        w -= alpha[k] * basis.col(k);
        if (k > 0) w -= beta[k - 1] * basis.col(k - 1);
        // Full reorthogonalization keeps the basis orthonormal to working precision.
        for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).adjoint() * w);
        const double b = w.norm();
        if (k + 1 == m) {
            beta_last = b;
            break;
        }
        if (b < 1e-13 * std::max(1.0, std::abs(alpha[k]))) {
            used = k + 1;
            beta_last = 0.0;
            break;
        }
        beta[k] = b;
        basis.col(k + 1) = w / b;
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(used, used);
    for (int k = 0; k < used; ++k) {
        t(k, k) = alpha[k];
        if (k + 1 < used) t(k, k + 1) = t(k + 1, k) = beta[k];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const Eigen::MatrixXd& q = es.eigenvectors();
    CVec y = CVec::Zero(used);
    for (int a = 0; a < used; ++a) {
        const cplx phase = std::exp(-kI * dt * es.eigenvalues()[a]);
        y += (phase * q(0, a)) * q.col(a).cast<cplx>();
    }
    KrylovStep out;
    out.v = nrm * (basis.leftCols(used) * y);
    out.error = nrm * beta_last * std::abs(y[used - 1]);
    return out;
}

} // namespace

SurvivalTrace propagate_survival(const SparseOperator& h, const CVec& psi, const std::vector<double>& times,
                                 cplx lambda_ref, const PropagationOptions& options) {
    require_hermitian(h);
    require_normalized(psi, h.dim());
    require_times(times);

    SurvivalTrace out;
    out.times = times;
    out.amplitude.resize(times.size());
    out.norm_drift.assign(times.size(), 0.0);

    const bool dense = !options.force_krylov && h.dim() <= options.dense_cap;
    if (dense) {
        const auto d = diagonalize(h, psi, options.dense_cap);
        for (std::size_t i = 0; i < times.size(); ++i) {
            cplx acc = 0.0;
            double norm2 = 0.0;
            for (long k = 0; k < d.energies.size(); ++k) {
                acc += d.weights[k] * std::exp(-kI * times[i] * d.energies[k]);
                norm2 += d.weights[k].real();
            }
            out.amplitude[i] = times[i] == 0.0 ? psi.squaredNorm() : acc;
            out.norm_drift[i] = std::abs(std::sqrt(norm2) - 1.0);
        }
    } else {
        if (!options.allow_krylov)
            throw CapacityError("dynamics: dense cap exceeded and Krylov propagation disabled");
        out.krylov = true;
        CVec v = psi;
        double t_now = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            double remaining = times[i] - t_now;
            double dt = remaining;
            int halvings = 0;
            while (remaining > 0.0) {
                dt = std::min(dt, remaining);
                const auto step = lanczos_step(h.matrix, v, dt, options.krylov_dim);
                if (!step.v.allFinite()) throw NumericalError("dynamics", "Krylov breakdown (non-finite vector)");
                if (step.error > options.step_tolerance) {
                    dt *= 0.5;
                    if (++halvings > 60) throw NumericalError("dynamics", "Krylov step size underflow");
                    continue;
                }
                v = step.v;
                halvings = 0;
                remaining -= dt;
                t_now += dt;
                dt *= 1.5;
            }
            t_now = times[i];
            out.amplitude[i] = times[i] == 0.0 ? psi.squaredNorm() : psi.dot(v);
            out.norm_drift[i] = std::abs(v.norm() - 1.0);
        }
        for (double d : out.norm_drift)
            if (d > options.max_norm_drift)
                throw NumericalError("dynamics", "Krylov norm drift " + io::format_double(d) + " exceeds tolerance");
    }
    fill_reference(out, lambda_ref);
    return out;
}

double bump(const Interval& outer, double u) {
    const double inner = 0.5 * outer.half_width;
    const double d = std::abs(u - outer.center);
    if (d <= inner) return 1.0;
    if (d >= outer.half_width) return 0.0;
    const double s = (d - inner) / (outer.half_width - inner);
    return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

CVec spectral_filter(const SparseOperator& h, const Interval& interval, const CVec& psi, long dense_cap) {
    require_hermitian(h);
    if (psi.size() != h.dim()) throw ValidationError("dynamics: state dimension mismatch");
    if (!(interval.half_width > 0.0)) throw ValidationError("dynamics: filter interval must have positive width");
    const auto d = diagonalize(h, psi, dense_cap);
    CVec scaled = d.coeffs;
    for (long k = 0; k < scaled.size(); ++k) scaled[k] *= bump(interval, d.energies[k]);
    return d.vectors * scaled;
}

FilteredTrace filtered_survival(const SparseOperator& h, const CVec& psi, const std::vector<double>& times,
                                cplx lambda_ref, const Interval& interval, long dense_cap) {
    require_hermitian(h);
    require_normalized(psi, h.dim());
    require_times(times);
    if (!(interval.half_width > 0.0)) throw ValidationError("dynamics: filter interval must have positive width");
    const auto d = diagonalize(h, psi, dense_cap);
    FilteredTrace out;
    out.trace.times = times;
    out.trace.amplitude.resize(times.size());
    out.trace.norm_drift.assign(times.size(), 0.0);
    RVec f(d.energies.size());
    for (long k = 0; k < f.size(); ++k) {
        f[k] = bump(interval, d.energies[k]);
        out.removed_weight += (1.0 - f[k]) * (1.0 - f[k]) * d.weights[k].real();
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        cplx acc = 0.0;
        for (long k = 0; k < f.size(); ++k) acc += f[k] * d.weights[k] * std::exp(-kI * times[i] * d.energies[k]);
        out.trace.amplitude[i] = acc;
    }
    fill_reference(out.trace, lambda_ref);
    return out;
}

std::vector<double> survival_time_grid(double gamma, std::size_t count, double t_max_factor) {
    if (!(gamma > 0.0)) throw ValidationError("dynamics: time grid needs gamma > 0");
    if (count < 3) throw ValidationError("dynamics: time grid needs at least 3 points");
    std::vector<double> t{0.0};
    const double a = std::log(0.01 / gamma), b = std::log(t_max_factor / gamma);
    for (std::size_t i = 0; i + 1 < count; ++i)
        t.push_back(std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 2)));
    return t;
}

double predicted_alpha(const model::ModelSpec& spec) {
    if (spec.kind == model::ModelKind::QedToy) return 2.0 / 3.0;
    const double mu = spec.form.mu;
    return (2.0 + 4.0 * mu) / (5.0 + 2.0 * mu);
}

MetastabilityReport metastability_report(const model::ModelPtr& model, std::size_t j,
                                         const std::vector<double>& g_list, const MetastabilityOptions& options) {
    if (g_list.size() < 3) throw ValidationError("dynamics: metastability needs at least 3 couplings");
    for (std::size_t i = 0; i < g_list.size(); ++i) {
        if (!(g_list[i] > 0.0)) throw ValidationError("dynamics: couplings must be > 0");
        if (i > 0 && !(g_list[i] < g_list[i - 1])) throw ValidationError("dynamics: g_list must be decreasing");
    }
    if (j >= model->levels()) throw ValidationError("dynamics: level index out of range");
    if (!(options.filter_constant > 1.0)) throw ValidationError("dynamics: filter constant must exceed 1");

    MetastabilityReport rep;
    rep.alpha_predicted = predicted_alpha(model->spec());
    rep.rows.resize(g_list.size());
    const CVec psi = model->unperturbed_state(j);
    const double lambda_j = model->spec().particle.levels[j];
    const auto& grid = model->grid();

    parallel_for(g_list.size(), options.jobs, [&](std::size_t i) {
        MetastabilityRow& row = rep.rows[i];
        row.g = g_list[i];
        row.sigma = std::pow(row.g, 2.0 - rep.alpha_predicted);
        row.delta = options.filter_constant * row.sigma;
        row.lambda = spectral::resonance_at(model, options.theta, row.g, j).value;
        row.gamma = -row.lambda.imag();
        if (!(row.gamma > 0.0)) {
            row.resolvable = false;
            row.sup_error = std::numeric_limits<double>::quiet_NaN();
            row.envelope_error = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        // Recurrence time of the discretized continuum near the decay momentum.
        const double k_star = std::max(lambda_j - row.lambda.real(), grid.kmin());
        double spacing = std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n + 1 < grid.size(); ++n)
            if (grid.node(n) <= k_star && k_star <= grid.node(n + 1)) spacing = grid.node(n + 1) - grid.node(n);
        if (!std::isfinite(spacing)) spacing = grid.weight(grid.size() - 1);
        row.resolvable = options.t_max_factor / row.gamma < 2.0 * kPi / spacing;

        const auto h = model::build_hamiltonian(model, 0.0, row.g);
        const auto times = survival_time_grid(row.gamma, options.time_points, options.t_max_factor);
        row.trace = propagate_survival(h.matrix, psi, times, row.lambda, options.propagation);
        row.sup_error = row.trace.sup_deviation();
        row.envelope_error = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double tg = times[k] * row.gamma;
            if (tg < 0.2 || tg > 1.0) continue;
            row.envelope_error = std::max(
                row.envelope_error, std::abs(std::abs(row.trace.amplitude[k]) * std::exp(row.gamma * times[k]) - 1.0));
        }
        if (h.matrix.dim() <= options.propagation.dense_cap) {
            const Interval interval{row.lambda.real(), 0.5 * row.delta};
            row.removed_weight = filtered_survival(h.matrix, psi, {0.0}, row.lambda, interval,
                                                   options.propagation.dense_cap)
                                     .removed_weight;
        } else {
            row.removed_weight = std::numeric_limits<double>::quiet_NaN();
        }
    });

    std::vector<double> lx, ly;
    for (auto& row : rep.rows) {
        if (row.resolvable && row.sup_error > 0.0) {
            lx.push_back(std::log(row.g));
            ly.push_back(std::log(row.sup_error));
        }
        row.alpha_hat_running = lx.size() >= 2 ? line_fit(lx, ly).first : std::numeric_limits<double>::quiet_NaN();
    }
    if (lx.size() >= 2) {
        const auto [slope, intercept] = line_fit(lx, ly);
        rep.alpha_hat = slope;
        for (std::size_t i = 0; i < lx.size(); ++i) rep.residuals.push_back(ly[i] - (intercept + slope * lx[i]));
    } else {
        rep.alpha_hat = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

std::vector<std::string> trace_csv_header() { return {"t", "amp_re", "amp_im", "ref_re", "ref_im", "deviation"}; }

std::vector<std::vector<std::string>> trace_csv_rows(const SurvivalTrace& t) {
    using io::format_double;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < t.times.size(); ++i)
        rows.push_back({format_double(t.times[i]), format_double(t.amplitude[i].real()),
                        format_double(t.amplitude[i].imag()), format_double(t.reference[i].real()),
                        format_double(t.reference[i].imag()), format_double(t.deviation[i])});
    return rows;
}

std::vector<std::string> report_csv_header() {
    return {"g", "sigma", "delta", "gamma", "sup_error", "alpha_hat_running"};
}

std::vector<std::vector<std::string>> report_csv_rows(const MetastabilityReport& r) {
    using io::format_double;
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : r.rows)
        rows.push_back({format_double(row.g), format_double(row.sigma), format_double(row.delta),
                        format_double(row.gamma), format_double(row.sup_error),
                        format_double(row.alpha_hat_running)});
    return rows;
}

} // namespace reslab::dynamics
