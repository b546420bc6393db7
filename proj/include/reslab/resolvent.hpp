#pragma once

// Matrix elements of the deformed resolvent, their continuation into the lower
// half-plane and the pole + remainder decomposition near a resonance.

#include "reslab/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace reslab::resolvent {

using fock::SparseOperator;

inline constexpr double kMaxCondition = 1e12;

struct ResolventValue {
    cplx value;
    double cond_estimate = 0.0;  // 1-norm condition estimate of H - z
};

// <psi_left, (H - z)^{-1} psi_right> (conjugate-linear in the left slot).
ResolventValue resolvent_element(const SparseOperator& h, const CVec& psi_left, const CVec& psi_right, cplx z);

// |dGamma(omega^{-1/2}) (1 - P_Omega) psi| on the truncated space.
double dprime_norm(const CVec& psi, const model::Model& model);

// A dilation-analytic test vector: vacuum amplitudes per level plus, per level, a one-boson
// component with radial profile F_l(k) = sum_i a_{l,i} k^{p_{l,i}} exp(-k^2 / b_{l,i}^2).
struct ProfileTerm {
    cplx amplitude;
    double width = 1.0;
    double power = 1.0;  // p >= 1/2 keeps the vector in D'
};

struct TestVector {
    std::string name;
    std::vector<cplx> vacuum;                      // one entry per level
    std::vector<std::vector<ProfileTerm>> boson;  // one list per level (may be empty)

    // Discretized psi_theta = U_theta psi, normalized by the theta = 0 norm.
    CVec at(const model::Model& model, cplx theta) const;
    // <Psi_j, psi>/|psi| at theta = 0.
    cplx overlap(const model::Model& model, std::size_t j) const;
};

TestVector unperturbed_vector(const model::Model& model, std::size_t j);
// Psi_j plus a one-boson infrared-soft component (p = 1/2) on level j.
TestVector soft_vector(const model::Model& model, std::size_t j, double weight = 0.3);
// Random vacuum amplitudes and random analytic one-boson profiles with p = 1 (seeded).
TestVector random_vector(const model::Model& model, std::uint64_t seed);

struct ContinuationDomain {
    cplx center;
    double phi1 = 1.4;
    double phi2 = 3.5;
    double radius_factor = 0.5;
    std::vector<cplx> samples;
};

// rays x radii samples: radii geometric in [r_lo, r_hi] * |Im center|, ray angles spread over [phi1, phi2].
ContinuationDomain make_domain(cplx center, double phi1, double phi2, int rays = 3, int radii = 6,
                               double r_lo = 0.05, double r_hi = 0.45);

// Re(e^theta (lambda - z)) >= 0.
bool wedge_ok(cplx theta, cplx lambda, cplx z);

// Fixed: one cutoff for every sample. Coupled: sigma = |z - lambda|^beta g^{-1/(3/2 + mu)} per sample.
enum class SigmaSchedule { Fixed, Coupled };
std::string to_string(SigmaSchedule s);
SigmaSchedule sigma_schedule_from_string(const std::string& name);

struct ScanSample {
    cplx z;
    cplx value;
    double cond_estimate = 0.0;
    double sigma_used = 0.0;
    bool wedge_ok = true;
};

struct ScanOptions {
    SigmaSchedule schedule = SigmaSchedule::Fixed;
    double sigma = 0.1;  // for the fixed schedule
    int jobs = 1;
};

struct ScanResult {
    cplx center;
    std::vector<ScanSample> samples;  // wedge violations are kept with wedge_ok = false and no value
    std::size_t skipped = 0;
};

// F_psi(z) = <psi_{conj theta}, (H_{g,theta} - z)^{-1} psi_theta> at every domain sample.
ScanResult continuation_scan(const model::ModelPtr& model, std::size_t j, double g, cplx theta,
                             const TestVector& psi, const ContinuationDomain& domain,
                             const ScanOptions& options = {});

// beta = (1 + 2 mu / 3)^{-1}.
double predicted_beta(double mu);

struct PoleFit {
    cplx p;
    cplx c;  // coefficient of (lambda - z)^{-beta} in the joint model
    std::vector<std::pair<cplx, cplx>> remainder_samples;  // (z, F(z) - p/(lambda - z))
    double fitted_beta = 0.0;
    double beta_band = 0.0;  // two standard errors of the regression slope
    double fitted_C = 0.0;
    double jackknife_spread = 0.0;  // max relative change of p over leave-one-out fits
    bool degenerate = false;        // remainder numerically zero
    std::size_t n_samples = 0;
};

PoleFit pole_fit(const std::vector<std::pair<cplx, cplx>>& samples, cplx lambda);

std::vector<std::string> scan_csv_header();
std::vector<std::vector<std::string>> scan_csv_rows(const ScanResult& r);

} // namespace reslab::resolvent
