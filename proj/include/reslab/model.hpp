#pragma once

// Finite-level particle systems coupled to the truncated boson field:
// Nelson-type linear coupling and a scalar minimal-coupling (QED) toy,
// in undeformed, complex-dilated and infrared-split forms.
//
// The product space is ordered level-major: index = level * dim(Fock) + fock index.

#include "reslab/fock.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace reslab::model {

enum class ModelKind { Nelson, QedToy };
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ParticleSystem {
    std::vector<double> levels;  // strictly increasing
    CMat coupling;               // hermitian, stands in for <psi_i| e^{-ik.x} |psi_j>
    CMat momentum;               // hermitian, used by the QED toy only (may be empty for Nelson)

    std::size_t size() const { return levels.size(); }
    void validate() const;
};

// Gaussian form factor chi(k) = exp(-k^2 / Lambda^2) with infrared exponent mu.
struct FormFactor {
    double lambda = 2.0;
    double mu = 0.5;

    cplx chi(cplx k) const { return std::exp(-(k * k) / (lambda * lambda)); }
    void validate() const;
};

struct GridSpec {
    fock::GridKind kind = fock::GridKind::Geometric;
    double kmin = 2e-4;
    double kmax = 12.0;
    std::size_t count = 24;

    fock::ModeGrid build() const { return fock::ModeGrid::make(kind, kmin, kmax, count); }
};

struct ModelSpec {
    ParticleSystem particle;
    FormFactor form;
    GridSpec grid;
    int n_max = 2;
    ModelKind kind = ModelKind::Nelson;
    double sigma_threshold = 2.0;  // informational ionization threshold
    std::size_t dimension_cap = fock::kDefaultDimensionCap;

    void validate() const;
};

// 2 levels (0, 1), C = [[1,1],[1,1]], 24 geometric modes on [1e-4, 6]*Lambda,
// n_max = 2, Lambda = 2, mu = 1/2.
ModelSpec default_spec();
// Same particle/grid layout, QED toy with P = [[0,-i],[i,0]] and mu = 0.
ModelSpec default_qed_spec();

// Config-document serialization. Parsing rejects unknown keys and reports the key path.
nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& doc, const std::string& path = "model");

// A validated spec with its grid and Fock basis materialized.
class Model {
public:
    explicit Model(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    const fock::ModeGrid& grid() const { return basis_.grid(); }
    const fock::FockBasis& basis() const { return basis_; }
    std::size_t levels() const { return spec_.particle.size(); }
    long dim() const { return static_cast<long>(levels() * basis_.size()); }
    long fock_dim() const { return static_cast<long>(basis_.size()); }

    // Product-space index of (level, fock state i).
    long index(std::size_t level, std::size_t fock_index) const {
        return static_cast<long>(level * basis_.size() + fock_index);
    }
    // Psi_j = psi_j (x) Omega, normalized.
    CVec unperturbed_state(std::size_t level) const;
    // Field energy of the Fock part of product index i.
    double field_energy(long i) const { return basis_.field_energy(static_cast<std::size_t>(i % fock_dim())); }
    std::size_t level_of(long i) const { return static_cast<std::size_t>(i / fock_dim()); }

    // The IR cutoff actually used for a requested sigma: the nearest cell edge.
    double snap_sigma(double sigma) const;

private:
    ModelSpec spec_;
    fock::FockBasis basis_;
};

using ModelPtr = std::shared_ptr<const Model>;
ModelPtr make_model(const ModelSpec& spec);

enum class Window { All, Above, Below };

// Coupling profile h_theta(k) before quadrature weighting (continuum density).
cplx coupling_profile(const ModelSpec& spec, cplx theta, double k);

// h_theta(k_n) * sqrt(w_n), multiplied by the sharp window indicator at k_n.
std::vector<cplx> radial_coupling(const Model& model, cplx theta, Window window = Window::All,
                                  std::optional<double> sigma = std::nullopt);

enum class Part { Full, Cutoff, BelowInteraction };
std::string to_string(Part part);

struct DeformedHamiltonian {
    ModelPtr model;
    cplx theta;
    double g = 0.0;
    std::optional<double> sigma;  // snapped cutoff, if any
    Part part = Part::Full;
    fock::SparseOperator matrix;
};

inline constexpr double kThetaRadius = 0.5;

// H_p (x) I + e^{-theta} I (x) H_f + W, with W selected by `part`:
// Full uses every mode, Cutoff only k >= sigma, BelowInteraction is W^{<=sigma} alone.
DeformedHamiltonian build_hamiltonian(const ModelPtr& model, cplx theta, double g,
                                      std::optional<double> sigma = std::nullopt,
                                      Part part = Part::Full);

// H^sigma + shift * projector.
DeformedHamiltonian renormalized_cutoff_hamiltonian(const ModelPtr& model, cplx theta, double g,
                                                    double sigma, cplx shift,
                                                    const fock::SparseOperator& projector);

// Dilation of a real grid by theta = s * ln(ratio): mode n -> mode n + s.
// Returns the relabeled vector; components pushed off the grid are dropped.
CVec relabel_modes(const Model& model, const CVec& psi, int shift);

} // namespace reslab::model
