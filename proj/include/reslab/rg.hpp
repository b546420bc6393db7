#pragma once

// Infrared-cutoff comparisons, the scaling transformation and one Feshbach
// decimation step onto low field energies.

#include "reslab/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace reslab::rg {

using fock::SparseOperator;

struct IrGapRow {
    double sigma = 0.0;  // snapped cutoff
    cplx lambda_full;
    cplx lambda_cut;
    double diff_abs = 0.0;
    double gap_over_sigma = 0.0;    // distance from lambda_cut to the rest of spec(H^sigma), over sigma
    double slope_running = 0.0;     // log-log slope over the rows so far (NaN for the first)
    bool resolvable = true;         // difference above the eigensolver residual
};

struct IrGapResult {
    std::vector<IrGapRow> rows;
    double slope = 0.0;
    double predicted_slope = 0.0;  // 1 + mu
    bool monotone = true;
};

IrGapResult ir_gap_experiment(const model::ModelPtr& model, cplx theta, double g, std::size_t j,
                              const std::vector<double>& sigma_list, int jobs = 1);

struct ScaledOperator {
    SparseOperator matrix;
    fock::ModeGrid grid;
};

// A_rho(S_rho(H)) for H on the Fock space over the geometric `grid`: modes relabeled to k/rho,
// every entry multiplied by 1/rho. rho must be an integer power of the grid ratio.
ScaledOperator scale_transform(const SparseOperator& h, const fock::ModeGrid& grid, double rho);

struct DecimationResult {
    double rho = 0.0;
    double sigma = 0.0;  // snapped cutoff
    cplx z;
    cplx lambda_cut;     // lambda^{>=sigma}_{j,g}
    CMat h_eff;          // F_P(H - z) in the basis (cutoff resonance) x (low field states)
    std::vector<fock::OccupationState> low_states;
    std::vector<double> field_energies;
    cplx e_z;            // vacuum entry of h_eff
    CVec t_diag;         // diagonal minus e_z
    double w_norm = 0.0; // spectral norm of the off-diagonal part
    double complement_cond = 0.0;
};

// First Feshbach step with P = (cutoff resonance projection) x chi(H_f^{<sigma} <= rho0).
DecimationResult decimate(const model::ModelPtr& model, cplx theta, double g, cplx z, double sigma, double rho0,
                          std::size_t j);
// Same, with z = lambda^{>=sigma}_{j,g}.
DecimationResult decimate_at_cutoff_resonance(const model::ModelPtr& model, cplx theta, double g, double sigma,
                                              double rho0, std::size_t j);

struct EzRoot {
    cplx lambda1;
    cplx lambda_cut;
    int iterations = 0;
    double residual = 0.0;  // |E_z| at the root
};

// Newton on z -> E_z starting from lambda^{>=sigma}_{j,g}.
EzRoot ez_root(const model::ModelPtr& model, cplx theta, double g, double sigma, double rho0, std::size_t j);

std::vector<std::string> ir_gap_csv_header();
std::vector<std::vector<std::string>> ir_gap_csv_rows(const IrGapResult& r);

} // namespace reslab::rg
