#include "reslab/resolvent.hpp"

#include "reslab/io.hpp"
#include "reslab/parallel.hpp"
#include "reslab/spectral.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace reslab::resolvent {

namespace {

using LU = Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>;

double one_norm(const SpMat& a) {
    double best = 0.0;
    for (int k = 0; k < a.outerSize(); ++k) {
        double s = 0.0;
        for (SpMat::InnerIterator it(a, k); it; ++it) s += std::abs(it.value());
        best = std::max(best, s);
    }
    return best;
}

// Hager-Higham estimate of |A^{-1}|_1 from solves with A and A^*.
double inverse_one_norm(LU& lu, long n) {
    CVec x = CVec::Constant(n, cplx(1.0 / static_cast<double>(n)));
    double estimate = 0.0;
    for (int iter = 0; iter < 5; ++iter) {
        const CVec y = lu.solve(x);
        estimate = y.lpNorm<1>();
        CVec xi(n);
        for (long i = 0; i < n; ++i) xi[i] = std::abs(y[i]) > 0.0 ? y[i] / std::abs(y[i]) : cplx(1.0);
        const CVec z = lu.adjoint().solve(xi);
        long jmax = 0;
        const double zmax = z.cwiseAbs().maxCoeff(&jmax);
        if (zmax <= z.dot(x).real()) break;
        x.setZero();
        x[jmax] = 1.0;
    }
    return estimate;
}

} // namespace

ResolventValue resolvent_element(const SparseOperator& h, const CVec& psi_left, const CVec& psi_right, cplx z) {
    const long n = h.dim();
    if (psi_left.size() != n || psi_right.size() != n) throw ValidationError("resolvent: vector dimension mismatch");
    SpMat id(n, n);
    id.setIdentity();
    const SpMat a = h.matrix - z * id;
    LU lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) throw NumericalError("resolvent", "H - z is singular (z in the spectrum)");
    ResolventValue out;
    out.cond_estimate = one_norm(a) * inverse_one_norm(lu, n);
    if (!std::isfinite(out.cond_estimate) || !(out.cond_estimate < kMaxCondition))
        throw NumericalError("resolvent", "H - z is ill-conditioned (estimate " +
                                              io::format_double(out.cond_estimate) + ")");
    const CVec x = lu.solve(psi_right);
    if (!x.allFinite()) throw NumericalError("resolvent", "resolvent solve produced non-finite values");
    out.value = psi_left.dot(x);
    return out;
}

double dprime_norm(const CVec& psi, const model::Model& model) {
    if (psi.size() != model.dim()) throw ValidationError("resolvent: vector dimension mismatch");
    const auto& basis = model.basis();
    double acc = 0.0;
    for (std::size_t l = 0; l < model.levels(); ++l)
        for (std::size_t f = 1; f < basis.size(); ++f) {
            double s = 0.0;
            const auto& occ = basis.state(f);
            for (std::size_t n = 0; n < occ.size(); ++n)
                if (occ[n]) s += occ[n] / std::sqrt(basis.grid().omega(n));
            acc += s * s * std::norm(psi[model.index(l, f)]);
        }
    return std::sqrt(acc);
}

// ---------------------------------------------------------------------------

CVec TestVector::at(const model::Model& model, cplx theta) const {
    if (vacuum.size() != model.levels() || (!boson.empty() && boson.size() != model.levels()))
        throw ValidationError("resolvent: test vector does not match the number of levels");
    const auto& basis = model.basis();
    const auto& grid = model.grid();
    auto build = [&](cplx th) {
        CVec v = CVec::Zero(model.dim());
        for (std::size_t l = 0; l < model.levels(); ++l) v[model.index(l, 0)] = vacuum[l];
        if (boson.empty() || basis.n_max() < 1) return v;
        for (std::size_t n = 0; n < grid.size(); ++n) {
            fock::OccupationState occ(grid.size(), 0);
            occ[n] = 1;
            const long f = basis.index_of(occ);
            const cplx k = std::exp(-th) * grid.node(n);
            for (std::size_t l = 0; l < model.levels(); ++l) {
                cplx profile = 0.0;
                for (const auto& term : boson[l])
                    profile += term.amplitude * std::pow(k, term.power) * std::exp(-(k * k) / (term.width * term.width));
                v[model.index(l, static_cast<std::size_t>(f))] =
                    std::exp(-0.5 * th) * profile * std::sqrt(grid.weight(n));
            }
        }
        return v;
    };
    const double norm0 = build(0.0).norm();
    if (!(norm0 > 0.0)) throw ValidationError("resolvent: test vector is zero");
    return build(theta) / norm0;
}

cplx TestVector::overlap(const model::Model& model, std::size_t j) const {
    return at(model, 0.0)[model.index(j, 0)];
}

TestVector unperturbed_vector(const model::Model& model, std::size_t j) {
    if (j >= model.levels()) throw ValidationError("resolvent: level index out of range");
    TestVector v;
    v.name = "psi_j";
    v.vacuum.assign(model.levels(), 0.0);
    v.vacuum[j] = 1.0;
    return v;
}

TestVector soft_vector(const model::Model& model, std::size_t j, double weight) {
    TestVector v = unperturbed_vector(model, j);
    v.name = "soft";
    v.boson.assign(model.levels(), {});
    v.boson[j].push_back({weight, model.spec().form.lambda, 0.5});
    return v;
}

TestVector random_vector(const model::Model& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> width(0.5, 1.0);
    TestVector v;
    v.name = "random";
    v.boson.resize(model.levels());
    for (std::size_t l = 0; l < model.levels(); ++l) {
        v.vacuum.emplace_back(unit(rng), unit(rng));
        for (int t = 0; t < 2; ++t) {
            const cplx a(unit(rng), unit(rng));
            v.boson[l].push_back({0.5 * a, width(rng) * model.spec().form.lambda, 1.0});
        }
    }
    return v;
}

ContinuationDomain make_domain(cplx center, double phi1, double phi2, int rays, int radii, double r_lo,
                               double r_hi) {
    if (!(phi1 < kPi / 2) || !(phi2 > kPi) || !(phi2 - phi1 < 2 * kPi))
        throw ValidationError("resolvent: need phi1 < pi/2 < pi < phi2 < phi1 + 2 pi");
    if (rays < 1 || radii < 2) throw ValidationError("resolvent: need at least 1 ray and 2 radii");
    if (!(0.0 < r_lo && r_lo < r_hi && r_hi < 0.5)) throw ValidationError("resolvent: need 0 < r_lo < r_hi < 1/2");
    ContinuationDomain d;
    d.center = center;
    d.phi1 = phi1;
    d.phi2 = phi2;
    // At a real center (g = 0) the radii are measured in units of 0.1 instead of |Im center|.
    const double scale = std::abs(center.imag()) > 1e-12 ? std::abs(center.imag()) : 0.1;
    for (int a = 0; a < rays; ++a) {
        const double phi = rays == 1 ? 0.5 * (phi1 + phi2) : phi1 + (phi2 - phi1) * a / (rays - 1);
        for (int b = 0; b < radii; ++b) {
            const double r = r_lo * std::pow(r_hi / r_lo, static_cast<double>(b) / (radii - 1));
            d.samples.push_back(center + r * scale * std::polar(1.0, phi));
        }
    }
    return d;
}

bool wedge_ok(cplx theta, cplx lambda, cplx z) { return (std::exp(theta) * (lambda - z)).real() >= 0.0; }

std::string to_string(SigmaSchedule s) { return s == SigmaSchedule::Fixed ? "fixed" : "coupled"; }

SigmaSchedule sigma_schedule_from_string(const std::string& name) {
    if (name == "fixed") return SigmaSchedule::Fixed;
    if (name == "coupled") return SigmaSchedule::Coupled;
    throw ValidationError("unknown sigma schedule '" + name + "' (expected fixed|coupled)");
}

double predicted_beta(double mu) { return 1.0 / (1.0 + 2.0 * mu / 3.0); }

ScanResult continuation_scan(const model::ModelPtr& model, std::size_t j, double g, cplx theta,
                             const TestVector& psi, const ContinuationDomain& domain, const ScanOptions& options) {
    if (j >= model->levels()) throw ValidationError("resolvent: level index out of range");
    if (g < 0.0) throw ValidationError("resolvent: coupling must be >= 0");
    ScanResult out;
    ContinuationDomain dom = domain;
    if (dom.samples.empty()) {
        const cplx center = g == 0.0 ? cplx(model->spec().particle.levels[j]) : [&] {
            if (!(theta.imag() > 0.0)) throw ValidationError("resolvent: continuation needs Im theta > 0");
            return spectral::resonance_at(model, theta, g, j).value;
        }();
        dom = make_domain(center, domain.phi1, domain.phi2);
    }
    out.center = dom.center;
    const double scale = std::abs(dom.center.imag());
    for (const cplx z : dom.samples)
        if (scale > 1e-12 && !(std::abs(z - dom.center) < dom.radius_factor * scale))
            throw ValidationError("resolvent: sample outside the continuation disc");

    const auto h = model::build_hamiltonian(model, theta, g);
    const CVec right = psi.at(*model, theta);
    const CVec left = psi.at(*model, std::conj(theta));
    const double mu = model->spec().form.mu;
    out.samples.resize(dom.samples.size());
    parallel_for(dom.samples.size(), options.jobs, [&](std::size_t i) {
        ScanSample& s = out.samples[i];
        s.z = dom.samples[i];
        const double r = std::abs(s.z - dom.center);
        s.sigma_used = options.schedule == SigmaSchedule::Fixed || g == 0.0
                           ? options.sigma
                           : std::pow(r, predicted_beta(mu)) * std::pow(g, -1.0 / (1.5 + mu));
        s.wedge_ok = wedge_ok(theta, dom.center, s.z);
        if (!s.wedge_ok) {
            s.value = cplx(std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
            s.cond_estimate = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        const auto v = resolvent_element(h.matrix, left, right, s.z);
        s.value = v.value;
        s.cond_estimate = v.cond_estimate;
    });
    for (const auto& s : out.samples)
        if (!s.wedge_ok) ++out.skipped;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct JointFit {
    cplx p, c;
    double residual = 0.0;
};

JointFit fit_fixed_beta(const std::vector<std::pair<cplx, cplx>>& samples, cplx lambda, double beta) {
    const long n = static_cast<long>(samples.size());
    CMat a(n, 2);
    CVec b(n);
    for (long i = 0; i < n; ++i) {
        const cplx d = lambda - samples[static_cast<std::size_t>(i)].first;
        a(i, 0) = 1.0 / d;
        a(i, 1) = std::pow(d, -beta);
        b[i] = samples[static_cast<std::size_t>(i)].second;
    }
    // Column scaling keeps the two basis functions comparable.
    const double s0 = a.col(0).norm(), s1 = a.col(1).norm();
    a.col(0) /= s0;
    a.col(1) /= s1;
    const CVec x = a.colPivHouseholderQr().solve(b);
    JointFit f;
    f.p = x[0] / s0;
    f.c = x[1] / s1;
    f.residual = (a * x - b).norm();
    return f;
}

} // namespace

PoleFit pole_fit(const std::vector<std::pair<cplx, cplx>>& samples, cplx lambda) {
    if (samples.size() < 12) throw ValidationError("resolvent: pole fit needs at least 12 samples");
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (const auto& [z, f] : samples) {
        if (!std::isfinite(f.real()) || !std::isfinite(f.imag()))
            throw ValidationError("resolvent: pole fit samples must be finite");
        const double r = std::abs(z - lambda);
        if (!(r > 0.0)) throw ValidationError("resolvent: pole fit sample at the pole");
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
    }
    if (rmax / rmin < 9.0 - 1e-9)
        throw ValidationError("resolvent: pole fit samples too clustered (need |z - lambda| to span a factor 9)");

    PoleFit out;
    out.n_samples = samples.size();

    // Remainder-free data: p from the pole term alone.
    double fmax = 0.0;
    for (const auto& s : samples) fmax = std::max(fmax, std::abs(s.second));
    {
        cplx num = 0.0;
        double den = 0.0;
        for (const auto& [z, f] : samples) {
            const cplx u = 1.0 / (lambda - z);
            num += std::conj(u) * f;
            den += std::norm(u);
        }
        const cplx p0 = num / den;
        double rmax_abs = 0.0;
        for (const auto& [z, f] : samples) rmax_abs = std::max(rmax_abs, std::abs(f - p0 / (lambda - z)));
        if (rmax_abs <= 1e-10 * fmax) {
            out.p = p0;
            out.degenerate = true;
            out.fitted_beta = std::numeric_limits<double>::quiet_NaN();
            out.beta_band = std::numeric_limits<double>::quiet_NaN();
            out.fitted_C = 0.0;
            for (const auto& [z, f] : samples) out.remainder_samples.emplace_back(z, f - p0 / (lambda - z));
            double spread = 0.0;
            for (std::size_t drop = 0; drop < samples.size(); ++drop) {
                cplx nn = 0.0;
                double dd = 0.0;
                for (std::size_t i = 0; i < samples.size(); ++i) {
                    if (i == drop) continue;
                    const cplx u = 1.0 / (lambda - samples[i].first);
                    nn += std::conj(u) * samples[i].second;
                    dd += std::norm(u);
                }
                spread = std::max(spread, std::abs(nn / dd - p0) / std::abs(p0));
            }
            out.jackknife_spread = spread;
            return out;
        }
    }

    // Scan beta, then golden-section refinement around the best grid point.
    double best_beta = 0.02;
    double best_res = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 100; ++i) {
        const double beta = 0.02 * i;
        if (std::abs(beta - 1.0) < 1e-9) continue;  // collinear with the pole term
        const double r = fit_fixed_beta(samples, lambda, beta).residual;
        if (r < best_res) {
            best_res = r;
            best_beta = beta;
        }
    }
    double lo = std::max(1e-3, best_beta - 0.02), hi = best_beta + 0.02;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = fit_fixed_beta(samples, lambda, x1).residual, f2 = fit_fixed_beta(samples, lambda, x2).residual;
    for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = fit_fixed_beta(samples, lambda, x1).residual;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = fit_fixed_beta(samples, lambda, x2).residual;
        }
    }
    const double beta_joint = 0.5 * (lo + hi);
    const JointFit jf = fit_fixed_beta(samples, lambda, beta_joint);
    out.p = jf.p;
    out.c = jf.c;

    // Remainder regression: log|r| = log C - beta log|lambda - z|.
    std::vector<double> lx, ly;
    for (const auto& [z, f] : samples) {
        const cplx r = f - out.p / (lambda - z);
        out.remainder_samples.emplace_back(z, r);
        if (std::abs(r) > 0.0) {
            lx.push_back(std::log(std::abs(lambda - z)));
            ly.push_back(std::log(std::abs(r)));
        }
    }
    const double n = static_cast<double>(lx.size());
    if (n < 3) throw NumericalError("resolvent", "remainder regression has fewer than 3 usable samples");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 1e-12)) throw NumericalError("resolvent", "rank-deficient remainder regression");
    const double slope = sxy / sxx;
    double sse = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double e = ly[i] - (my + slope * (lx[i] - mx));
        sse += e * e;
    }
    out.fitted_beta = -slope;
    out.beta_band = 2.0 * std::sqrt(sse / std::max(1.0, n - 2.0) / sxx);
    out.fitted_C = std::exp(my - slope * mx);

    double spread = 0.0;
    for (std::size_t drop = 0; drop < samples.size(); ++drop) {
        std::vector<std::pair<cplx, cplx>> sub;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (i != drop) sub.push_back(samples[i]);
        const cplx pj = fit_fixed_beta(sub, lambda, beta_joint).p;
        spread = std::max(spread, std::abs(pj - out.p) / std::abs(out.p));
    }
    out.jackknife_spread = spread;
    return out;
}

std::vector<std::string> scan_csv_header() {
    return {"z_re", "z_im", "F_re", "F_im", "cond_estimate", "sigma_used", "wedge_ok"};
}

std::vector<std::vector<std::string>> scan_csv_rows(const ScanResult& r) {
    using io::format_double;
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : r.samples)
        rows.push_back({format_double(s.z.real()), format_double(s.z.imag()), format_double(s.value.real()),
                        format_double(s.value.imag()), format_double(s.cond_estimate), format_double(s.sigma_used),
                        s.wedge_ok ? "1" : "0"});
    return rows;
}

} // namespace reslab::resolvent
