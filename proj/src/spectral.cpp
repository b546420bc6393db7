#include "reslab/spectral.hpp"

#include "reslab/io.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace reslab::spectral {

std::string to_string(Method m) {
    switch (m) {
    case Method::Dense: return "dense";
    case Method::ShiftInvert: return "shift-invert";
    case Method::Feshbach: return "feshbach";
    }
    return "dense";
}

namespace {

bool by_real_part(const EigenPair& a, const EigenPair& b) {
    if (a.value.real() != b.value.real()) return a.value.real() < b.value.real();
    return a.value.imag() < b.value.imag();
}

double residual_of(const SpMat& h, cplx value, const CVec& v) {
    return (h * v - value * v).norm() / v.norm();
}

// Givens rotation G = [c s; -conj(s) c] with G [f; g] = [r; 0].
void lartg(cplx f, cplx g, double& c, cplx& s) {
    if (g == 0.0) {
        c = 1.0;
        s = 0.0;
        return;
    }
    if (f == 0.0) {
        c = 0.0;
        s = std::conj(g) / std::abs(g);
        return;
    }
    const double nf = std::abs(f), ng = std::abs(g);
    const double d = std::hypot(nf, ng);
    c = nf / d;
    s = (f / nf) * std::conj(g) / d;
}

// Swap diagonal entries k and k+1 of the upper triangular T, updating Q so that Q T Q^* is invariant.
void swap_schur(CMat& t, CMat& q, long k) {
    const cplx t11 = t(k, k), t22 = t(k + 1, k + 1);
    double c;
    cplx s;
    lartg(t(k, k + 1), t22 - t11, c, s);
    const long n = t.rows();
    for (long j = k; j < n; ++j) {
        const cplx a = t(k, j), b = t(k + 1, j);
        t(k, j) = c * a + s * b;
        t(k + 1, j) = -std::conj(s) * a + c * b;
    }
    for (long i = 0; i <= k + 1; ++i) {
        const cplx a = t(i, k), b = t(i, k + 1);
        t(i, k) = c * a + std::conj(s) * b;
        t(i, k + 1) = -s * a + c * b;
    }
    for (long i = 0; i < q.rows(); ++i) {
        const cplx a = q(i, k), b = q(i, k + 1);
        q(i, k) = c * a + std::conj(s) * b;
        q(i, k + 1) = -s * a + c * b;
    }
    t(k, k) = t22;
    t(k + 1, k + 1) = t11;
    t(k + 1, k) = 0.0;
}

// Eigenvector of upper triangular T for its i-th diagonal entry (unit last component).
CVec triangular_eigvec(const CMat& t, long i) {
    CVec s = CVec::Zero(t.rows());
    s[i] = 1.0;
    const cplx lam = t(i, i);
    for (long r = i - 1; r >= 0; --r) {
        cplx acc = 0.0;
        for (long c = r + 1; c <= i; ++c) acc += t(r, c) * s[c];
        cplx d = t(r, r) - lam;
        if (std::abs(d) < 1e-300) d = 1e-300;
        s[r] = -acc / d;
    }
    return s;
}

CVec start_vector(long n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    CVec v(n);
    for (long i = 0; i < n; ++i) v[i] = cplx(1.0 + 0.1 * nd(rng), 0.1 * nd(rng));
    return v / v.norm();
}

using LU = Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>;

bool factorize(LU& lu, const SpMat& a) {
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) return false;
    // probe for a numerically singular factor
    CVec b = CVec::Ones(a.rows());
    CVec x = lu.solve(b);
    return x.allFinite() && x.norm() < 1e14 * b.norm();
}

SpMat shifted(const SpMat& h, cplx z) {
    SpMat id(h.rows(), h.cols());
    id.setIdentity();
    return h - z * id;
}

// Left eigenvector by inverse iteration with H^* near conj(value).
CVec left_eigvec(const SpMat& h, cplx value, const CVec& right) {
    const cplx shift = std::conj(value) + 1e-9 * (1.0 + std::abs(value)) * cplx(1.0, 1.0);
    SpMat adj = h.adjoint();
    LU lu;
    lu.analyzePattern(shifted(adj, shift));
    lu.factorize(shifted(adj, shift));
    if (lu.info() != Eigen::Success) throw NumericalError("spectral", "left eigenvector factorization failed");
    CVec l = right;
    for (int it = 0; it < 3; ++it) {
        l = lu.solve(l);
        l /= l.norm();
    }
    const cplx ov = l.dot(right);  // <l, r>
    if (std::abs(ov) < 1e-300) throw NumericalError("spectral", "left/right eigenvectors orthogonal (defective?)");
    return l / std::conj(ov);      // now <l, r> = 1
}

void check_biorthogonality(std::vector<ResonanceEstimate>& out) {
    for (std::size_t a = 0; a < out.size(); ++a)
        for (std::size_t b = 0; b < out.size(); ++b) {
            if (a == b || out[a].left_vec.size() == 0) continue;
            const double v = std::abs(out[a].left_vec.dot(out[b].right_vec)) /
                             (out[a].left_vec.norm() * out[b].right_vec.norm());
            if (v >= 1e-6) {
                out[a].resolved = false;
                out[b].resolved = false;
            }
        }
}

} // namespace

std::vector<EigenPair> dense_spectrum(const CMat& h, long dense_cap) {
    if (h.rows() != h.cols()) throw ValidationError("spectral: matrix must be square");
    if (h.rows() > dense_cap)
        throw CapacityError("spectral: dimension " + std::to_string(h.rows()) + " exceeds dense cap " +
                            std::to_string(dense_cap));
    Eigen::ComplexEigenSolver<CMat> es(h, true);
    if (es.info() != Eigen::Success) throw NumericalError("spectral", "dense eigensolver did not converge");
    std::vector<EigenPair> out(static_cast<std::size_t>(h.rows()));
    for (long i = 0; i < h.rows(); ++i) {
        CVec v = es.eigenvectors().col(i);
        out[static_cast<std::size_t>(i)] = {es.eigenvalues()[i], v / v.norm()};
    }
    std::sort(out.begin(), out.end(), by_real_part);
    return out;
}

std::vector<EigenPair> dense_spectrum(const SparseOperator& h, long dense_cap) {
    if (h.dim() > dense_cap)
        throw CapacityError("spectral: dimension " + std::to_string(h.dim()) + " exceeds dense cap " +
                            std::to_string(dense_cap));
    return dense_spectrum(h.dense(), dense_cap);
}

namespace {

std::vector<ResonanceEstimate> eig_near_once(const SparseOperator& hop, cplx z0, int count,
                                             const ArnoldiOptions& options) {
    const SpMat& h = hop.matrix;
    const long n = h.rows();
    if (count <= 0 || n == 0) return {};
    count = static_cast<int>(std::min<long>(count, n));

    std::vector<ResonanceEstimate> out;
    auto finish = [&](std::vector<std::pair<cplx, CVec>> pairs) {
        std::sort(pairs.begin(), pairs.end(),
                  [z0](const auto& a, const auto& b) { return std::abs(a.first - z0) < std::abs(b.first - z0); });
        pairs.resize(static_cast<std::size_t>(count));
        for (auto& [value, vec] : pairs) {
            ResonanceEstimate e;
            e.value = value;
            e.right_vec = vec / vec.norm();
            e.residual = residual_of(h, value, e.right_vec);
            e.method = Method::ShiftInvert;
            if (options.left_vectors) e.left_vec = left_eigvec(h, value, e.right_vec);
            out.push_back(std::move(e));
        }
        check_biorthogonality(out);
        return out;
    };

    const long m = std::min<long>(options.subspace, n - 1);
    if (n <= 2 * options.subspace || m < count + 1) {
        auto all = dense_spectrum(CMat(h), std::max<long>(n, 1));
        std::vector<std::pair<cplx, CVec>> pairs;
        for (auto& p : all) pairs.emplace_back(p.value, p.vector);
        auto r = finish(std::move(pairs));
        for (auto& e : r) e.method = Method::Dense;
        return r;
    }

    LU lu;
    cplx shift = z0;
    if (!factorize(lu, shifted(h, shift))) {
        shift = z0 + 1e-8 * (1.0 + std::abs(z0)) * cplx(1.0, 0.5);
        if (!factorize(lu, shifted(h, shift))) {
            shift = z0 + 1e-6 * (1.0 + std::abs(z0)) * cplx(0.7, -1.0);
            if (!factorize(lu, shifted(h, shift)))
                throw NumericalError("spectral", "shift-invert factorization failed near z0");
        }
    }

    CMat v = CMat::Zero(n, m + 1);
    CMat s = CMat::Zero(m + 1, m);
    v.col(0) = start_vector(n, 12345);
    long k = 0;
    const long keep = std::min<long>(m - 1, std::max<long>(count + 2, m / 2));

    std::vector<std::pair<cplx, CVec>> best;
    double best_worst = std::numeric_limits<double>::infinity();
    unsigned reseed = 1;

    for (int restart = 0; restart <= options.max_restarts; ++restart) {
        for (long j = k; j < m; ++j) {
            CVec w = lu.solve(CVec(v.col(j)));
            CVec coef = CVec::Zero(j + 1);
            for (int pass = 0; pass < 2; ++pass) {
                CVec c = v.leftCols(j + 1).adjoint() * w;
                w -= v.leftCols(j + 1) * c;
                coef += c;
            }
            s.block(0, j, j + 1, 1) += coef;
            const double beta = w.norm();
            if (beta <= 1e-13 * std::max(1.0, coef.norm())) {
                // invariant subspace: continue with a fresh orthogonal direction
                CVec r = start_vector(n, 777 + reseed++);
                for (int pass = 0; pass < 2; ++pass) r -= v.leftCols(j + 1) * (v.leftCols(j + 1).adjoint() * r);
                v.col(j + 1) = r / r.norm();
                s(j + 1, j) = 0.0;
            } else {
                v.col(j + 1) = w / beta;
                s(j + 1, j) = beta;
            }
        }

        Eigen::ComplexSchur<CMat> schur(s.topRows(m));
        CMat t = schur.matrixT();
        CMat q = schur.matrixU();
        // Bring the largest |t| (nearest z0) to the front.
        for (long pos = 0; pos < keep; ++pos) {
            long arg = pos;
            for (long i = pos + 1; i < m; ++i)
                if (std::abs(t(i, i)) > std::abs(t(arg, arg))) arg = i;
            for (long i = arg; i > pos; --i) swap_schur(t, q, i - 1);
        }

        std::vector<std::pair<cplx, CVec>> pairs;
        double worst = 0.0;
        for (long i = 0; i < count; ++i) {
            CVec y = q.leftCols(i + 1) * triangular_eigvec(t, i).head(i + 1);
            CVec x = v.leftCols(m) * y;
            const cplx theta = t(i, i);
            const cplx lam = shift + 1.0 / theta;
            x /= x.norm();
            worst = std::max(worst, residual_of(h, lam, x) / std::max(1.0, std::abs(lam)));
            pairs.emplace_back(lam, std::move(x));
        }
        if (worst < best_worst) {
            best_worst = worst;
            best = pairs;
        }
        if (worst <= options.tol) return finish(std::move(pairs));

        // Krylov-Schur restart on the leading `keep` Schur vectors.
        const CVec tail = s(m, m - 1) * q.row(m - 1).head(keep).transpose();
        CMat vk = v.leftCols(m) * q.leftCols(keep);
        CVec vnext = v.col(m);
        v.leftCols(keep) = vk;
        v.col(keep) = vnext;
        s.setZero();
        s.topLeftCorner(keep, keep) = t.topLeftCorner(keep, keep);
        s.block(keep, 0, 1, keep) = tail.transpose();
        k = keep;
    }
    if (best_worst <= 1e-8) return finish(std::move(best));
    throw NumericalError("spectral", "shift-invert Arnoldi did not converge (residual " +
                                         io::format_double(best_worst) + ")");
}

} // namespace

// Clustered spectra near z0 (the discretized continuum attached to lambda_j) can stall the
// restarts; retry with wider subspaces, then fall back to the dense solver below the cap.
std::vector<ResonanceEstimate> eig_near(const SparseOperator& hop, cplx z0, int count,
                                        const ArnoldiOptions& options) {
    ArnoldiOptions opts = options;
    for (int attempt = 0;; ++attempt) {
        try {
            return eig_near_once(hop, z0, count, opts);
        } catch (const NumericalError&) {
            if (attempt < 2) {
                opts.subspace *= 2;
                continue;
            }
            if (hop.dim() > kDenseCap) throw;
            opts.subspace = static_cast<int>(hop.dim());  // forces the dense branch
            return eig_near_once(hop, z0, count, opts);
        }
    }
}

// ---------------------------------------------------------------------------

std::vector<ResonanceEstimate> track_resonance(const model::ModelPtr& model, cplx theta,
                                               const std::vector<double>& g_path, std::size_t j,
                                               std::optional<double> sigma) {
    if (!(theta.imag() > 0.0)) throw ValidationError("spectral: tracking needs Im theta > 0");
    if (g_path.empty() || g_path.front() != 0.0) throw ValidationError("spectral: g_path must start at 0");
    for (std::size_t i = 1; i < g_path.size(); ++i)
        if (!(g_path[i] > g_path[i - 1])) throw ValidationError("spectral: g_path must be increasing");
    if (j >= model->levels()) throw ValidationError("spectral: level index out of range");

    const model::Part part = sigma ? model::Part::Cutoff : model::Part::Full;
    const CVec psi_j = model->unperturbed_state(j);

    auto make = [&](double g) { return model::build_hamiltonian(model, theta, g, sigma, part); };

    std::vector<ResonanceEstimate> out;
    ResonanceEstimate current;
    {
        const auto h0 = make(0.0);
        current.value = model->spec().particle.levels[j];
        current.right_vec = psi_j;
        current.left_vec = psi_j;
        current.method = Method::ShiftInvert;
        current.theta = theta;
        current.sigma = h0.sigma;
        current.g = 0.0;
        current.residual = residual_of(h0.matrix.matrix, current.value, psi_j);
        current.overlap = 1.0;
        out.push_back(current);
    }

    const cplx lambda_j = model->spec().particle.levels[j];
    double g_prev = 0.0;
    for (std::size_t idx = 1; idx < g_path.size(); ++idx) {
        const double target = g_path[idx];
        double step = g_prev == 0.0 ? 0.25 * target : target - g_prev;
        while (g_prev < target) {
            const double g_try = std::min(target, g_prev + step);
            const auto h = make(g_try);
            // lambda - lambda_j grows like g^2 at weak coupling
            const cplx guess = g_prev > 0.0 ? lambda_j + (current.value - lambda_j) * (g_try / g_prev) * (g_try / g_prev)
                                            : current.value;
            auto cands = eig_near(h.matrix, guess, 4);
            std::size_t best = 0;
            double best_ov = -1.0;
            for (std::size_t c = 0; c < cands.size(); ++c) {
                const double ov = std::abs(current.right_vec.dot(cands[c].right_vec));
                if (ov > best_ov) {
                    best_ov = ov;
                    best = c;
                }
            }
            if (best_ov >= kOverlapThreshold) {
                current = std::move(cands[best]);
                current.theta = theta;
                current.sigma = h.sigma;
                current.g = g_try;
                current.overlap = std::abs(psi_j.dot(current.right_vec));
                g_prev = g_try;
                step *= 2.0;
            } else {
                step *= 0.5;
                if (step < kMinContinuationStep)
                    throw NumericalError("spectral", "resonance branch lost near g = " + io::format_double(g_try));
            }
        }
        out.push_back(current);
    }
    return out;
}

ResonanceEstimate resonance_at(const model::ModelPtr& model, cplx theta, double g, std::size_t j,
                               std::optional<double> sigma) {
    if (g == 0.0) return track_resonance(model, theta, {0.0}, j, sigma).back();
    return track_resonance(model, theta, {0.0, g}, j, sigma).back();
}

double spread(const std::vector<cplx>& values) {
    double s = 0.0;
    for (std::size_t a = 0; a < values.size(); ++a)
        for (std::size_t b = a + 1; b < values.size(); ++b) s = std::max(s, std::abs(values[a] - values[b]));
    return s;
}

double string_angle(const model::Model& model, const std::vector<EigenPair>& spectrum, cplx anchor, std::size_t j) {
    const auto& basis = model.basis();
    const auto& levels = model.spec().particle.levels;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < levels.size(); ++m)
        if (m != j) gap = std::min(gap, std::abs(levels[m] - levels[j]));
    const double reach = std::isfinite(gap) ? 0.5 * gap : 1.0;

    std::vector<double> angles;
    for (const auto& p : spectrum) {
        double weight = 0.0;
        for (std::size_t f = 0; f < basis.size(); ++f)
            if (basis.total(f) == 1) weight += std::norm(p.vector[model.index(j, f)]);
        const double dist = std::abs(p.value - anchor);
        if (weight >= 0.5 && dist > 1e-12 && dist < reach) angles.push_back(std::arg(p.value - anchor));
    }
    if (angles.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(angles.begin(), angles.end());
    const std::size_t mid = angles.size() / 2;
    return angles.size() % 2 ? angles[mid] : 0.5 * (angles[mid - 1] + angles[mid]);
}

ThetaReport theta_report(const model::ModelPtr& model, double g, const std::vector<cplx>& thetas, std::size_t j,
                         std::optional<double> sigma) {
    if (thetas.size() < 3) throw ValidationError("spectral: theta_report needs at least 3 angles");
    for (auto th : thetas)
        if (th.imag() < 0.15 - 1e-12 || th.imag() > 0.45 + 1e-12)
            throw ValidationError("spectral: theta_report needs Im theta in [0.15, 0.45]");
    ThetaReport rep;
    rep.thetas = thetas;
    for (auto th : thetas) {
        const auto full = resonance_at(model, th, g, j);
        rep.full.push_back(full.value);
        if (sigma) rep.cutoff.push_back(resonance_at(model, th, g, j, sigma).value);
        const auto h = model::build_hamiltonian(model, th, g);
        rep.string_angle.push_back(string_angle(*model, dense_spectrum(h.matrix), full.value, j));
    }
    rep.spread_full = spread(rep.full);
    rep.spread_cutoff = spread(rep.cutoff);
    return rep;
}

std::vector<std::string> estimate_csv_header() {
    return {"g", "theta_re", "theta_im", "sigma", "lambda_re", "lambda_im", "residual", "overlap", "method"};
}

std::vector<std::string> estimate_csv_row(const ResonanceEstimate& e) {
    using io::format_double;
    return {format_double(e.g),
            format_double(e.theta.real()),
            format_double(e.theta.imag()),
            e.sigma ? format_double(*e.sigma) : std::string(),
            format_double(e.value.real()),
            format_double(e.value.imag()),
            format_double(e.residual),
            format_double(e.overlap),
            to_string(e.method)};
}

} // namespace reslab::spectral
