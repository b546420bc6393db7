#pragma once

// Feshbach-Schur reduction, the scalar resonance equation b(z) = 0 and the
// second-order (Fermi Golden Rule) coefficients.

#include "reslab/spectral.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace reslab::feshbach {

struct ReducedOperator {
    CMat matrix;                // F_P(H) in the chosen basis of Ran P
    double complement_cond = 0; // condition estimate of the decimated block
};

inline constexpr double kMaxComplementCond = 1e12;

// F_P(H) = PHP - PH Pbar [Pbar H Pbar]^{-1} Pbar H P for a (possibly oblique) projection P,
// expressed in an orthonormal basis of Ran P. Throws NumericalError when Pbar H Pbar is singular.
ReducedOperator feshbach_map(const CMat& h, const CMat& p);

// Same map with explicit bases: the columns of `range` span Ran P, the columns of
// `complement` span Ran(1 - P). The result is the matrix of F_P(H) in the `range` basis.
ReducedOperator feshbach_map(const CMat& h, const CMat& range, const CMat& complement);

// Rank-one reduction onto a single product basis vector (P = |e_i><e_i|), evaluated
// with sparse solves: b(z) = F_P(H - z) and its z-derivative.
class SchurReduction {
public:
    SchurReduction(fock::SparseOperator h, long pivot);

    long pivot() const { return pivot_; }
    long ran_dim() const { return 1; }
    // F_P(H - z) as a scalar.
    cplx b_of(cplx z) const;
    // b(z) and db/dz.
    std::pair<cplx, cplx> b_and_derivative(cplx z) const;

private:
    SpMat block_;   // Pbar H Pbar with the pivot row/column removed
    CVec row_;      // <e_i| H Pbar
    CVec col_;      // Pbar H |e_i>
    cplx diag_;     // <e_i| H |e_i>
    long pivot_;
};

inline constexpr double kWeakCouplingGate = 0.05;  // g^2 / sigma

struct NewtonOptions {
    int max_iterations = 50;
    double tolerance = 1e-12;
};

// Cutoff resonance lambda^{>=sigma}_{j,g} as the root of b(z) = lambda_j - z + a(z), Newton from lambda_j.
spectral::ResonanceEstimate schur_resonance(const model::ModelPtr& model, cplx theta, double g, std::size_t j,
                                            double sigma, const NewtonOptions& options = {});

struct Channel {
    std::size_t level = 0;
    double k_star = 0.0;    // resonant momentum (NaN for closed channels)
    double width = 0.0;     // contribution to Im Z_od
    cplx z_od{0.0, 0.0};    // this channel's contribution to Z_od
};

struct FGRCoefficients {
    cplx z_od{0.0, 0.0};
    double z_d = 0.0;
    cplx z{0.0, 0.0};
    std::vector<Channel> channels;
    bool stable = false;  // no open decay channel

    // Predicted half-width g^2 Im Z_od.
    double width(double g) const { return g * g * z_od.imag(); }
};

struct QuadratureOptions {
    int pv_nodes = 400;  // symmetric principal-value nodes around each pole
};

// lambda_{j,g} ~ lambda_j - g^2 (Z_od + Z_d).
FGRCoefficients fgr(const model::ModelSpec& spec, std::size_t j, const QuadratureOptions& options = {});

// Principal value of int_a^b f(k)/(k - pole) dk for a < pole < b, symmetric midpoint nodes around the pole
// (which is never a node) with one Richardson step, plus adaptive quadrature on the remainder.
double principal_value(const std::function<double(double)>& f, double a, double b, double pole, int nodes);

std::vector<std::string> channel_csv_header();
std::vector<std::vector<std::string>> channel_csv_rows(const FGRCoefficients& c);

} // namespace reslab::feshbach
