#pragma once

// Eigenvalue machinery for the deformed (non-hermitian) Hamiltonians.

#include "reslab/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace reslab::spectral {

using fock::SparseOperator;

enum class Method { Dense, ShiftInvert, Feshbach };
std::string to_string(Method m);

struct ResonanceEstimate {
    cplx value;
    CVec right_vec;  // unit norm
    CVec left_vec;   // normalized so that <left, right> = 1; empty if not computed
    Method method = Method::ShiftInvert;
    cplx theta;
    std::optional<double> sigma;
    double g = 0.0;
    double residual = 0.0;  // |(H - value) right| / |right|
    double overlap = 0.0;   // |<Psi_j, right>| (tracking only)
    bool resolved = true;   // false when the returned cluster failed the biorthogonality check
};

struct EigenPair {
    cplx value;
    CVec vector;
};

inline constexpr long kDenseCap = 3000;

// Full non-hermitian eigendecomposition, sorted by real part (then imaginary part).
std::vector<EigenPair> dense_spectrum(const SparseOperator& h, long dense_cap = kDenseCap);
std::vector<EigenPair> dense_spectrum(const CMat& h, long dense_cap = kDenseCap);

struct ArnoldiOptions {
    int subspace = 40;
    int max_restarts = 20;
    double tol = 1e-10;
    bool left_vectors = true;
};

// The `count` eigenvalues nearest z0 by shift-invert Krylov-Schur iteration with
// a sparse complex LU of (H - z0). Results are ordered by distance to z0.
std::vector<ResonanceEstimate> eig_near(const SparseOperator& h, cplx z0, int count,
                                        const ArnoldiOptions& options = {});

inline constexpr double kOverlapThreshold = 0.5;
inline constexpr double kMinContinuationStep = 1e-6;

// Continuation of lambda_j into lambda_{j,g} along an increasing coupling path that
// starts at 0. With sigma set, the cutoff Hamiltonian H^sigma is tracked instead.
std::vector<ResonanceEstimate> track_resonance(const model::ModelPtr& model, cplx theta,
                                               const std::vector<double>& g_path, std::size_t j,
                                               std::optional<double> sigma = std::nullopt);

// Convenience: the tracked value at a single coupling (path {0, g}).
ResonanceEstimate resonance_at(const model::ModelPtr& model, cplx theta, double g, std::size_t j,
                               std::optional<double> sigma = std::nullopt);

struct ThetaReport {
    std::vector<cplx> thetas;
    std::vector<cplx> full;    // lambda_{j,g}(theta)
    std::vector<cplx> cutoff;  // lambda^{>=sigma}_{j,g}(theta), empty without sigma
    double spread_full = 0.0;
    double spread_cutoff = 0.0;
    std::vector<double> string_angle;  // fitted ray angle of the string attached to lambda_j
};

ThetaReport theta_report(const model::ModelPtr& model, double g, const std::vector<cplx>& thetas,
                         std::size_t j, std::optional<double> sigma = std::nullopt);

// Angle of the discretized continuum attached to `anchor`: median arg(z - anchor) over
// eigenvalues whose eigenvector lives mostly on level-j one-boson states.
double string_angle(const model::Model& model, const std::vector<EigenPair>& spectrum, cplx anchor,
                    std::size_t j);

// Max pairwise distance.
double spread(const std::vector<cplx>& values);

// Per-sweep CSV header and row.
std::vector<std::string> estimate_csv_header();
std::vector<std::string> estimate_csv_row(const ResonanceEstimate& e);

} // namespace reslab::spectral
