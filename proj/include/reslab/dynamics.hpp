#pragma once

// Time evolution under the physical (theta = 0) Hamiltonian: survival amplitudes,
// smooth spectral filters and the metastability error experiment.

#include "reslab/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace reslab::dynamics {

using fock::SparseOperator;

struct SurvivalTrace {
    std::vector<double> times;
    std::vector<cplx> amplitude;
    std::vector<cplx> reference;  // e^{-i t lambda_ref}
    std::vector<double> deviation;
    std::vector<double> norm_drift;  // | |e^{-itH} psi| - |psi| |
    bool krylov = false;

    double sup_deviation() const;
};

struct PropagationOptions {
    long dense_cap = 3000;
    bool allow_krylov = true;
    bool force_krylov = false;
    int krylov_dim = 30;
    double step_tolerance = 1e-12;  // local Lanczos error estimate per step
    double max_norm_drift = 1e-9;
};

// <psi, e^{-itH} psi> for hermitian H, with the reference e^{-it lambda_ref}.
SurvivalTrace propagate_survival(const SparseOperator& h, const CVec& psi, const std::vector<double>& times,
                                 cplx lambda_ref, const PropagationOptions& options = {});

// Closed interval [center - half_width, center + half_width].
struct Interval {
    double center = 0.0;
    double half_width = 0.0;
};

// Standard bump: 1 on the inner interval (half the half-width of I), exp(1 - 1/(1 - s^2))
// on the shoulders, 0 outside I.
double bump(const Interval& outer, double u);

// f(H) psi by functional calculus (dense eigendecomposition).
CVec spectral_filter(const SparseOperator& h, const Interval& interval, const CVec& psi,
                     long dense_cap = 3000);

// <psi, e^{-itH} f(H) psi> and |(1 - f(H)) psi|^2.
struct FilteredTrace {
    SurvivalTrace trace;
    double removed_weight = 0.0;
};
FilteredTrace filtered_survival(const SparseOperator& h, const CVec& psi, const std::vector<double>& times,
                                cplx lambda_ref, const Interval& interval, long dense_cap = 3000);

// t = 0 followed by `count - 1` log-spaced points on [0.01/gamma, t_max_factor/gamma].
std::vector<double> survival_time_grid(double gamma, std::size_t count = 200, double t_max_factor = 2.0);

// alpha = (2 + 4 mu)/(5 + 2 mu) for the Nelson model, 2/3 for the QED toy.
double predicted_alpha(const model::ModelSpec& spec);

struct MetastabilityOptions {
    cplx theta{0.0, 0.3};
    double filter_constant = 2.0;  // delta = C sigma
    std::size_t time_points = 200;
    double t_max_factor = 2.0;
    int jobs = 1;
    PropagationOptions propagation;
};

struct MetastabilityRow {
    double g = 0.0;
    double sigma = 0.0;
    double delta = 0.0;
    cplx lambda;
    double gamma = 0.0;
    double sup_error = 0.0;
    double alpha_hat_running = 0.0;  // slope of log E vs log g over the rows so far (NaN for the first)
    double envelope_error = 0.0;     // max | |a(t)| e^{gamma t} - 1 | over t in [0.2, 1]/gamma
    double removed_weight = 0.0;     // |(1 - f(H)) Psi_j|^2 with the sigma(g) schedule
    bool resolvable = true;          // 2/gamma below the recurrence time of the discretized continuum
    SurvivalTrace trace;
};

struct MetastabilityReport {
    std::vector<MetastabilityRow> rows;
    double alpha_hat = 0.0;
    double alpha_predicted = 0.0;
    std::vector<double> residuals;  // of the log-log fit
};

MetastabilityReport metastability_report(const model::ModelPtr& model, std::size_t j,
                                         const std::vector<double>& g_list,
                                         const MetastabilityOptions& options = {});

std::vector<std::string> trace_csv_header();
std::vector<std::vector<std::string>> trace_csv_rows(const SurvivalTrace& t);
std::vector<std::string> report_csv_header();
std::vector<std::vector<std::string>> report_csv_rows(const MetastabilityReport& r);

} // namespace reslab::dynamics
