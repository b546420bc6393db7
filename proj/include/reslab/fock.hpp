#pragma once

// Truncated bosonic Fock space over a discretized radial momentum axis.
//
// Modes are radial shells k_n with quadrature weights w_n; the normalized mode
// operators a_n stand for a(1_{shell n})/sqrt(w_n). Basis states are
// occupation-number vectors with total boson number <= n_max, ordered by total
// number and then lexicographically (first mode most significant, descending).

#include "reslab/types.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace reslab::fock {

enum class GridKind { Geometric, Linear };

std::string to_string(GridKind kind);
GridKind grid_kind_from_string(const std::string& name);

class ModeGrid {
public:
    // Geometric: cell edges kmin*r^i, nodes at geometric cell midpoints.
    // Linear: uniform cells, nodes at arithmetic midpoints.
    // Weights are cell widths in both cases, so they sum to kmax - kmin.
    static ModeGrid geometric(double kmin, double kmax, std::size_t count);
    static ModeGrid linear(double kmin, double kmax, std::size_t count);
    static ModeGrid make(GridKind kind, double kmin, double kmax, std::size_t count);

    // Grid with every node and weight scaled by `factor` (> 0).
    ModeGrid scaled(double factor) const;
    // Sub-grid of the cells lying entirely below `edge` (edge must be a cell edge).
    ModeGrid below(double edge) const;

    GridKind kind() const { return kind_; }
    double kmin() const { return edges_.front(); }
    double kmax() const { return edges_.back(); }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& edges() const { return edges_; }
    double node(std::size_t n) const { return nodes_[n]; }
    double weight(std::size_t n) const { return weights_[n]; }

    // Ratio of consecutive edges (geometric grids only).
    double ratio() const;
    // The cell edge closest to k.
    double snap_to_edge(double k) const;
    // Number of nodes strictly below k.
    std::size_t count_below(double k) const;

    // omega(k_n) = k_n for the massless field.
    double omega(std::size_t n) const { return nodes_[n]; }

private:
    ModeGrid(GridKind kind, std::vector<double> edges, std::vector<double> nodes);

    GridKind kind_;
    std::vector<double> edges_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

using OccupationState = std::vector<int>;

inline constexpr std::size_t kDefaultDimensionCap = 200000;

// C(modes + n_max, n_max), saturating at SIZE_MAX.
std::size_t fock_dimension(std::size_t modes, int n_max);

class FockBasis {
public:
    FockBasis(ModeGrid grid, int n_max, std::size_t dimension_cap = kDefaultDimensionCap);

    const ModeGrid& grid() const { return grid_; }
    int n_max() const { return n_max_; }
    std::size_t modes() const { return grid_.size(); }
    std::size_t size() const { return states_.size(); }
    const std::vector<OccupationState>& states() const { return states_; }
    const OccupationState& state(std::size_t i) const { return states_[i]; }
    int total(std::size_t i) const { return totals_[i]; }
    // Free field energy sum_n omega_n m_n of basis state i.
    double field_energy(std::size_t i) const { return energies_[i]; }

    // Position of a state, or -1 if it is not in the truncated basis.
    long index_of(const OccupationState& state) const;

private:
    ModeGrid grid_;
    int n_max_;
    std::vector<OccupationState> states_;
    std::vector<int> totals_;
    std::vector<double> energies_;
    std::map<OccupationState, std::size_t> index_;
};

FockBasis enumerate_basis(const ModeGrid& grid, int n_max,
                          std::size_t dimension_cap = kDefaultDimensionCap);

struct SparseOperator {
    SpMat matrix;
    bool hermitian_hint = false;

    SparseOperator() = default;
    explicit SparseOperator(SpMat m, bool hermitian = false);

    long dim() const { return matrix.rows(); }
    CMat dense() const { return CMat(matrix); }
    SparseOperator adjoint() const;

    static SparseOperator from_triplets(long dim, const std::vector<Triplet>& entries,
                                        bool hermitian = false);
    static SparseOperator identity(long dim);
    static SparseOperator diagonal(const CVec& diag);
};

SparseOperator operator+(const SparseOperator& a, const SparseOperator& b);
SparseOperator operator-(const SparseOperator& a, const SparseOperator& b);
SparseOperator operator*(const SparseOperator& a, const SparseOperator& b);
SparseOperator operator*(cplx s, const SparseOperator& a);

// Drop stored entries with |value| <= kDropTolerance.
void prune(SpMat& m);

// A (x) B for sparse operands.
SparseOperator kron(const SparseOperator& a, const SparseOperator& b);
SparseOperator kron(const CMat& a, const SparseOperator& b);

enum class LadderKind { Annihilate, Create };

SparseOperator ladder(const FockBasis& basis, std::size_t mode, LadderKind kind);

// scale * sum_n omega_n m_n.
SparseOperator field_energy(const FockBasis& basis, cplx scale = 1.0);

// sum_n (c_n^* a_n^dag + c_n a_n) if conjugate_on_create, else sum_n c_n (a_n^dag + a_n).
SparseOperator field_phi(const FockBasis& basis, std::span<const cplx> couplings,
                         bool conjugate_on_create);

// dGamma(omega^s) = sum_n omega_n^s m_n.
SparseOperator dgamma_power(const FockBasis& basis, double exponent);

SparseOperator number_operator(const FockBasis& basis);

} // namespace reslab::fock
