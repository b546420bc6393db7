#include "reslab/feshbach.hpp"

#include "reslab/io.hpp"

#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>

namespace reslab::feshbach {

namespace {

// Orthonormal basis of the column space of `a`.
CMat range_basis(const CMat& a) {
    Eigen::ColPivHouseholderQR<CMat> qr(a);
    qr.setThreshold(1e-10);
    const long r = qr.rank();
    CMat q = qr.householderQ() * CMat::Identity(a.rows(), r);
    return q;
}

using LU = Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>;

} // namespace

ReducedOperator feshbach_map(const CMat& h, const CMat& range, const CMat& complement) {
    const long n = h.rows();
    if (h.cols() != n || range.rows() != n || complement.rows() != n)
        throw ValidationError("feshbach: dimension mismatch");
    if (range.cols() + complement.cols() != n)
        throw ValidationError("feshbach: range and complement bases do not span the space");
    const long r = range.cols();
    CMat s(n, n);
    s << range, complement;
    Eigen::PartialPivLU<CMat> slu(s);
    const CMat b = slu.solve(h * s);

    ReducedOperator out;
    if (r == n) {
        out.matrix = b;
        out.complement_cond = 1.0;
        return out;
    }
    const CMat b22 = b.bottomRightCorner(n - r, n - r);
    Eigen::PartialPivLU<CMat> lu(b22);
    const double rcond = lu.rcond();
    out.complement_cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(out.complement_cond < kMaxComplementCond))
        throw NumericalError("feshbach", "decimated block is singular (condition " +
                                             io::format_double(out.complement_cond) + "); move z");
    out.matrix = b.topLeftCorner(r, r) - b.topRightCorner(r, n - r) * lu.solve(b.bottomLeftCorner(n - r, r));
    return out;
}

ReducedOperator feshbach_map(const CMat& h, const CMat& p) {
    if (p.rows() != h.rows() || p.cols() != h.cols()) throw ValidationError("feshbach: projection shape mismatch");
    const double idem = (p * p - p).cwiseAbs().maxCoeff();
    if (idem > 1e-10 * std::max(1.0, p.cwiseAbs().maxCoeff()))
        throw ValidationError("feshbach: P is not idempotent (|P^2 - P| = " + io::format_double(idem) + ")");
    const CMat range = range_basis(p);
    const CMat complement = range_basis(CMat::Identity(p.rows(), p.cols()) - p);
    return feshbach_map(h, range, complement);
}

// ---------------------------------------------------------------------------

SchurReduction::SchurReduction(fock::SparseOperator h, long pivot) : pivot_(pivot) {
    const SpMat& m = h.matrix;
    const long n = m.rows();
    if (pivot < 0 || pivot >= n) throw ValidationError("feshbach: pivot out of range");
    row_ = CVec::Zero(n - 1);
    col_ = CVec::Zero(n - 1);
    diag_ = 0.0;
    std::vector<Triplet> t;
    auto red = [pivot](long i) { return i < pivot ? i : i - 1; };
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) {
            const long r = it.row(), c = it.col();
            if (r == pivot && c == pivot) diag_ = it.value();
            else if (r == pivot) row_[red(c)] = it.value();
            else if (c == pivot) col_[red(r)] = it.value();
            else t.emplace_back(static_cast<int>(red(r)), static_cast<int>(red(c)), it.value());
        }
    block_.resize(n - 1, n - 1);
    block_.setFromTriplets(t.begin(), t.end());
}

std::pair<cplx, cplx> SchurReduction::b_and_derivative(cplx z) const {
    SpMat id(block_.rows(), block_.cols());
    id.setIdentity();
    const SpMat a = block_ - z * id;
    LU lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) throw NumericalError("feshbach", "Pbar (H - z) Pbar is not invertible");
    const CVec x = lu.solve(col_);
    const CVec y = lu.solve(x);
    if (!x.allFinite() || !y.allFinite()) throw NumericalError("feshbach", "Pbar (H - z) Pbar is not invertible");
    const cplx b = diag_ - z - row_.cwiseProduct(x).sum();
    const cplx db = -1.0 - row_.cwiseProduct(y).sum();
    return {b, db};
}

cplx SchurReduction::b_of(cplx z) const { return b_and_derivative(z).first; }

spectral::ResonanceEstimate schur_resonance(const model::ModelPtr& model, cplx theta, double g, std::size_t j,
                                            double sigma, const NewtonOptions& options) {
    if (j >= model->levels()) throw ValidationError("feshbach: level index out of range");
    const double snapped = model->snap_sigma(sigma);
    if (g * g / snapped > kWeakCouplingGate)
        throw ValidationError("feshbach: weak-coupling gate g^2/sigma <= 0.05 violated");
    const auto& levels = model->spec().particle.levels;
    double d_j = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < levels.size(); ++m)
        if (m != j) d_j = std::min(d_j, std::abs(levels[m] - levels[j]));
    if (std::isfinite(d_j) && !(snapped < d_j * std::sin(std::abs(theta.imag()))))
        throw ValidationError("feshbach: need sigma < d_j sin|Im theta|");

    const auto h = model::build_hamiltonian(model, theta, g, sigma, model::Part::Cutoff);
    const long pivot = model->index(j, 0);
    const SchurReduction red(h.matrix, pivot);

    cplx z = levels[j];
    auto [b, db] = red.b_and_derivative(z);
    int it = 0;
    while (std::abs(b) > options.tolerance) {
        if (++it > options.max_iterations) throw NumericalError("feshbach", "Newton on b(z) did not converge");
        const cplx dz = -b / db;
        double damp = 1.0;
        cplx z_new = z + dz;
        auto [b_new, db_new] = red.b_and_derivative(z_new);
        while (std::abs(b_new) > std::abs(b) && damp > 1e-3) {
            damp *= 0.5;
            z_new = z + damp * dz;
            std::tie(b_new, db_new) = red.b_and_derivative(z_new);
        }
        if (std::abs(b_new) > std::abs(b) && std::abs(b) > options.tolerance)
            throw NumericalError("feshbach", "Newton on b(z) diverged");
        z = z_new;
        b = b_new;
        db = db_new;
    }

    // Eigenvector: 1 on the pivot, -(Pbar H Pbar - z)^{-1} Pbar H e_i elsewhere.
    const SpMat& m = h.matrix.matrix;
    const long n = m.rows();
    CVec col = CVec::Zero(n - 1);
    std::vector<Triplet> t;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator iter(m, k); iter; ++iter) {
            const long r = iter.row(), c = iter.col();
            if (r == pivot || (c == pivot)) {
                if (c == pivot && r != pivot) col[r < pivot ? r : r - 1] = iter.value();
                continue;
            }
            t.emplace_back(static_cast<int>(r < pivot ? r : r - 1), static_cast<int>(c < pivot ? c : c - 1),
                           iter.value() - (r == c ? z : cplx(0.0)));
        }
    SpMat a(n - 1, n - 1);
    a.setFromTriplets(t.begin(), t.end());
    LU lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    const CVec x = lu.solve(col);
    CVec v(n);
    for (long i = 0, r = 0; i < n; ++i) v[i] = i == pivot ? cplx(1.0) : -x[r++];
    v /= v.norm();

    spectral::ResonanceEstimate e;
    e.value = z;
    e.right_vec = v;
    e.method = spectral::Method::Feshbach;
    e.theta = theta;
    e.sigma = h.sigma;
    e.g = g;
    e.residual = (m * v - z * v).norm();
    e.overlap = std::abs(v[pivot]);
    return e;
}

// ---------------------------------------------------------------------------
// Fermi Golden Rule

double principal_value(const std::function<double(double)>& f, double a, double b, double pole, int nodes) {
    if (!(a < pole && pole < b)) throw ValidationError("feshbach: principal value pole outside (a, b)");
    if (nodes < 2) throw ValidationError("feshbach: need at least 2 principal-value nodes");
    using boost::math::quadrature::gauss_kronrod;
    const double d = std::min(pole - a, b - pole);
    auto symmetric = [&](int count) {
        const double h = d / count;
        double acc = 0.0;
        for (int i = 0; i < count; ++i) {
            const double u = (i + 0.5) * h;
            acc += (f(pole + u) - f(pole - u)) / u;
        }
        return acc * h;
    };
    const double core = (4.0 * symmetric(2 * nodes) - symmetric(nodes)) / 3.0;
    auto regular = [&](double k) { return f(k) / (k - pole); };
    double rest = 0.0;
    if (pole - d > a) rest += gauss_kronrod<double, 61>::integrate(regular, a, pole - d, 15, 1e-13);
    if (pole + d < b) rest += gauss_kronrod<double, 61>::integrate(regular, pole + d, b, 15, 1e-13);
    return core + rest;
}

FGRCoefficients fgr(const model::ModelSpec& spec, std::size_t j, const QuadratureOptions& options) {
    spec.validate();
    const auto& levels = spec.particle.levels;
    if (j >= levels.size()) throw ValidationError("feshbach: level index out of range");
    using boost::math::quadrature::gauss_kronrod;
    const double a = spec.grid.kmin, b = spec.grid.kmax;
    // The QED toy couples through the momentum matrix, the Nelson model through C.
    const CMat& c = spec.kind == model::ModelKind::Nelson ? spec.particle.coupling : spec.particle.momentum;
    auto density = [&spec](double k) { return std::norm(model::coupling_profile(spec, 0.0, k)); };

    FGRCoefficients out;
    out.stable = true;
    for (std::size_t m = 0; m < levels.size(); ++m) {
        if (m == j) continue;
        const double w2 = std::norm(c(static_cast<long>(j), static_cast<long>(m)));
        Channel ch;
        ch.level = m;
        ch.k_star = std::numeric_limits<double>::quiet_NaN();
        const double delta = levels[m] - levels[j];
        if (w2 != 0.0) {
            if (delta < 0.0 && -delta > a && -delta < b) {
                ch.k_star = -delta;
                ch.width = kPi * w2 * density(ch.k_star);
                const double pv = principal_value(density, a, b, ch.k_star, options.pv_nodes);
                ch.z_od = cplx(w2 * pv, ch.width);
                out.stable = false;
            } else {
                auto integrand = [&](double k) { return density(k) / (k + delta); };
                ch.z_od = w2 * gauss_kronrod<double, 61>::integrate(integrand, a, b, 15, 1e-13);
            }
        }
        out.z_od += ch.z_od;
        out.channels.push_back(ch);
    }
    const double cjj = std::norm(c(static_cast<long>(j), static_cast<long>(j)));
    if (cjj != 0.0) {
        auto integrand = [&](double k) { return density(k) / k; };
        out.z_d = cjj * gauss_kronrod<double, 61>::integrate(integrand, a, b, 15, 1e-13);
    }
    out.z = out.z_od + out.z_d;
    return out;
}

std::vector<std::string> channel_csv_header() {
    return {"level_m", "k_star", "channel_width", "Z_od_re", "Z_od_im", "Z_d"};
}

std::vector<std::vector<std::string>> channel_csv_rows(const FGRCoefficients& c) {
    using io::format_double;
    std::vector<std::vector<std::string>> rows;
    for (const auto& ch : c.channels)
        rows.push_back({std::to_string(ch.level), format_double(ch.k_star), format_double(ch.width),
                        format_double(ch.z_od.real()), format_double(ch.z_od.imag()), format_double(c.z_d)});
    return rows;
}

} // namespace reslab::feshbach
