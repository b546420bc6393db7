#include "reslab/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace reslab::model {

using nlohmann::json;

std::string to_string(ModelKind kind) { return kind == ModelKind::Nelson ? "nelson" : "qed-toy"; }

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "nelson") return ModelKind::Nelson;
    if (name == "qed-toy") return ModelKind::QedToy;
    throw ValidationError("unknown model kind '" + name + "' (expected nelson|qed-toy)");
}

std::string to_string(Part part) {
    switch (part) {
    case Part::Full: return "full";
    case Part::Cutoff: return "cutoff";
    case Part::BelowInteraction: return "below";
    }
    return "full";
}

void ParticleSystem::validate() const {
    const auto n = static_cast<long>(levels.size());
    if (n < 1) throw ValidationError("particle.levels: at least one level required");
    for (long i = 1; i < n; ++i)
        if (!(levels[static_cast<std::size_t>(i)] > levels[static_cast<std::size_t>(i - 1)]))
            throw ValidationError("particle.levels: must be strictly increasing");
    if (coupling.rows() != n || coupling.cols() != n)
        throw ValidationError("particle.coupling: must be " + std::to_string(n) + "x" + std::to_string(n));
    if ((coupling - coupling.adjoint()).cwiseAbs().maxCoeff() != 0.0)
        throw ValidationError("particle.coupling: must be hermitian");
    if (momentum.size() != 0) {
        if (momentum.rows() != n || momentum.cols() != n)
            throw ValidationError("particle.momentum: must be " + std::to_string(n) + "x" + std::to_string(n));
        if ((momentum - momentum.adjoint()).cwiseAbs().maxCoeff() != 0.0)
            throw ValidationError("particle.momentum: must be hermitian");
    }
}

void FormFactor::validate() const {
    if (!(lambda > 0.0)) throw ValidationError("form.lambda: must be > 0");
    if (!(mu >= 0.0)) throw ValidationError("form.mu: must be >= 0");
}

void ModelSpec::validate() const {
    particle.validate();
    form.validate();
    if (n_max < 0) throw ValidationError("nmax: must be >= 0");
    if (kind == ModelKind::Nelson && !(form.mu > 0.0))
        throw ValidationError("form.mu: the Nelson model needs mu > 0");
    if (kind == ModelKind::QedToy && particle.momentum.size() == 0)
        throw ValidationError("particle.momentum: required for the qed-toy model");
    if (!(grid.kmin > 0.0) || !(grid.kmax > grid.kmin) || grid.count == 0)
        throw ValidationError("grid: need 0 < kmin < kmax and count >= 1");
}

ModelSpec default_spec() {
    ModelSpec s;
    s.particle.levels = {0.0, 1.0};
    s.particle.coupling = CMat::Ones(2, 2);
    s.form = {2.0, 0.5};
    s.grid = {fock::GridKind::Geometric, 1e-4 * 2.0, 6.0 * 2.0, 24};
    s.n_max = 2;
    s.kind = ModelKind::Nelson;
    return s;
}

ModelSpec default_qed_spec() {
    ModelSpec s = default_spec();
    s.kind = ModelKind::QedToy;
    s.form.mu = 0.0;
    s.particle.momentum = CMat::Zero(2, 2);
    s.particle.momentum(0, 1) = -kI;
    s.particle.momentum(1, 0) = kI;
    return s;
}

// ---------------------------------------------------------------------------
// Config document

namespace {

json matrix_to_json(const CMat& m) {
    json re = json::array(), im = json::array();
    for (long i = 0; i < m.rows(); ++i) {
        json rr = json::array(), ri = json::array();
        for (long j = 0; j < m.cols(); ++j) {
            rr.push_back(m(i, j).real());
            ri.push_back(m(i, j).imag());
        }
        re.push_back(rr);
        im.push_back(ri);
    }
    return json{{"re", re}, {"im", im}};
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ValidationError(path + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key())) throw ValidationError(path + "." + it.key() + ": unknown key");
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) throw ValidationError(path + "." + key + ": missing");
    return obj.at(key);
}

double as_double(const json& v, const std::string& path) {
    if (!v.is_number()) throw ValidationError(path + ": expected a number");
    return v.get<double>();
}

long as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ValidationError(path + ": expected an integer");
    return v.get<long>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ValidationError(path + ": expected a string");
    return v.get<std::string>();
}

std::vector<std::vector<double>> as_rows(const json& v, const std::string& path) {
    if (!v.is_array()) throw ValidationError(path + ": expected an array of rows");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        if (!v[i].is_array()) throw ValidationError(p + ": expected an array");
        std::vector<double> row;
        for (std::size_t j = 0; j < v[i].size(); ++j)
            row.push_back(as_double(v[i][j], p + "[" + std::to_string(j) + "]"));
        rows.push_back(std::move(row));
    }
    return rows;
}

CMat matrix_from_json(const json& v, const std::string& path) {
    reject_unknown(v, path, {"re", "im"});
    auto re = as_rows(require(v, "re", path), path + ".re");
    auto im = v.contains("im") ? as_rows(v.at("im"), path + ".im") : re;
    if (!v.contains("im"))
        for (auto& r : im) std::fill(r.begin(), r.end(), 0.0);
    const auto n = static_cast<long>(re.size());
    if (static_cast<long>(im.size()) != n) throw ValidationError(path + ": re/im shape mismatch");
    CMat m(n, n);
    for (long i = 0; i < n; ++i) {
        const auto& rr = re[static_cast<std::size_t>(i)];
        const auto& ri = im[static_cast<std::size_t>(i)];
        if (static_cast<long>(rr.size()) != n || static_cast<long>(ri.size()) != n)
            throw ValidationError(path + ": matrix must be square");
        for (long j = 0; j < n; ++j)
            m(i, j) = cplx(rr[static_cast<std::size_t>(j)], ri[static_cast<std::size_t>(j)]);
    }
    return m;
}

} // namespace

json to_json(const ModelSpec& spec) {
    json particle{{"levels", spec.particle.levels}, {"coupling", matrix_to_json(spec.particle.coupling)}};
    if (spec.particle.momentum.size() != 0) particle["momentum"] = matrix_to_json(spec.particle.momentum);
    return json{
        {"particle", particle},
        {"form", {{"lambda", spec.form.lambda}, {"mu", spec.form.mu}}},
        {"grid",
         {{"kind", fock::to_string(spec.grid.kind)},
          {"kmin", spec.grid.kmin},
          {"kmax", spec.grid.kmax},
          {"count", spec.grid.count}}},
        {"nmax", spec.n_max},
        {"kind", to_string(spec.kind)},
        {"sigma_threshold", spec.sigma_threshold},
        {"dimension_cap", spec.dimension_cap},
    };
}

ModelSpec model_spec_from_json(const json& doc, const std::string& path) {
    reject_unknown(doc, path, {"particle", "form", "grid", "nmax", "kind", "sigma_threshold", "dimension_cap"});
    ModelSpec s;

    const std::string pp = path + ".particle";
    const json& particle = require(doc, "particle", path);
    reject_unknown(particle, pp, {"levels", "coupling", "momentum"});
    const json& levels = require(particle, "levels", pp);
    if (!levels.is_array()) throw ValidationError(pp + ".levels: expected an array");
    for (std::size_t i = 0; i < levels.size(); ++i)
        s.particle.levels.push_back(as_double(levels[i], pp + ".levels[" + std::to_string(i) + "]"));
    s.particle.coupling = matrix_from_json(require(particle, "coupling", pp), pp + ".coupling");
    if (particle.contains("momentum"))
        s.particle.momentum = matrix_from_json(particle.at("momentum"), pp + ".momentum");

    const std::string fp = path + ".form";
    const json& form = require(doc, "form", path);
    reject_unknown(form, fp, {"lambda", "mu"});
    s.form.lambda = as_double(require(form, "lambda", fp), fp + ".lambda");
    s.form.mu = as_double(require(form, "mu", fp), fp + ".mu");

    const std::string gp = path + ".grid";
    const json& grid = require(doc, "grid", path);
    reject_unknown(grid, gp, {"kind", "kmin", "kmax", "count"});
    s.grid.kind = fock::grid_kind_from_string(as_string(require(grid, "kind", gp), gp + ".kind"));
    s.grid.kmin = as_double(require(grid, "kmin", gp), gp + ".kmin");
    s.grid.kmax = as_double(require(grid, "kmax", gp), gp + ".kmax");
    const long count = as_int(require(grid, "count", gp), gp + ".count");
    if (count < 1) throw ValidationError(gp + ".count: must be >= 1");
    s.grid.count = static_cast<std::size_t>(count);

    s.n_max = static_cast<int>(as_int(require(doc, "nmax", path), path + ".nmax"));
    s.kind = model_kind_from_string(as_string(require(doc, "kind", path), path + ".kind"));
    if (doc.contains("sigma_threshold"))
        s.sigma_threshold = as_double(doc.at("sigma_threshold"), path + ".sigma_threshold");
    if (doc.contains("dimension_cap")) {
        const long cap = as_int(doc.at("dimension_cap"), path + ".dimension_cap");
        if (cap < 1) throw ValidationError(path + ".dimension_cap: must be >= 1");
        s.dimension_cap = static_cast<std::size_t>(cap);
    }
    try {
        s.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + "." + e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Model

static ModelSpec validated(ModelSpec spec) {
    spec.validate();
    return spec;
}

Model::Model(ModelSpec spec)
    : spec_(validated(std::move(spec))),
      basis_(spec_.grid.build(), spec_.n_max, spec_.dimension_cap) {
    const std::size_t total = spec_.particle.size() * basis_.size();
    if (total > spec_.dimension_cap)
        throw CapacityError("model: product dimension " + std::to_string(total) + " exceeds cap " +
                            std::to_string(spec_.dimension_cap));
}

ModelPtr make_model(const ModelSpec& spec) { return std::make_shared<const Model>(spec); }

CVec Model::unperturbed_state(std::size_t level) const {
    if (level >= levels()) throw ValidationError("model: level index out of range");
    CVec v = CVec::Zero(dim());
    v[index(level, 0)] = 1.0;
    return v;
}

double Model::snap_sigma(double sigma) const {
    if (!(sigma > grid().kmin() && sigma < grid().kmax()))
        throw ValidationError("model: sigma " + std::to_string(sigma) + " outside the grid range (" +
                              std::to_string(grid().kmin()) + ", " + std::to_string(grid().kmax()) + ")");
    return grid().snap_to_edge(sigma);
}

cplx coupling_profile(const ModelSpec& spec, cplx theta, double k) {
    const double mu = spec.form.mu;
    const cplx scaled_k = std::exp(-theta) * k;
    const double angular = std::sqrt(4.0 * kPi);
    if (spec.kind == ModelKind::Nelson)
        return angular * std::exp(-(1.0 + mu) * theta) * spec.form.chi(scaled_k) * std::pow(k, 0.5 + mu);
    // 1/sqrt(2|k|) photon normalization; the form factor exponent enters only through chi.
    return angular * std::exp(-theta) * spec.form.chi(scaled_k) * std::sqrt(k) / std::sqrt(2.0);
}

std::vector<cplx> radial_coupling(const Model& model, cplx theta, Window window, std::optional<double> sigma) {
    const auto& grid = model.grid();
    double cut = 0.0;
    if (window != Window::All) {
        if (!sigma) throw ValidationError("model: a windowed coupling needs sigma");
        cut = *sigma;
    }
    std::vector<cplx> out(grid.size());
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const double k = grid.node(n);
        const bool keep = window == Window::All || (window == Window::Above ? k >= cut : k < cut);
        out[n] = keep ? coupling_profile(model.spec(), theta, k) * std::sqrt(grid.weight(n)) : cplx(0.0);
    }
    return out;
}

namespace {

using fock::SparseOperator;

SparseOperator free_part(const Model& model, cplx theta) {
    CVec d(model.dim());
    const cplx scale = std::exp(-theta);
    for (long i = 0; i < model.dim(); ++i)
        d[i] = model.spec().particle.levels[model.level_of(i)] + scale * model.field_energy(i);
    return SparseOperator::diagonal(d);
}

// Interaction built from the coupling vector `f` (already windowed).
SparseOperator interaction(const Model& model, cplx theta, double g, const std::vector<cplx>& f) {
    const auto& spec = model.spec();
    const auto& basis = model.basis();
    const SparseOperator phi = fock::field_phi(basis, f, false);
    if (spec.kind == ModelKind::Nelson) return cplx(g) * fock::kron(spec.particle.coupling, phi);

    double vacuum_constant = 0.0;  // sum_n |f_0(k_n)|^2 over the same window
    const auto f0 = radial_coupling(model, 0.0);
    for (std::size_t n = 0; n < f.size(); ++n)
        if (f[n] != 0.0) vacuum_constant += std::norm(f0[n]);
    const SparseOperator id_p = SparseOperator::identity(static_cast<long>(model.levels()));
    const SparseOperator linear = cplx(g) * std::exp(-theta) * fock::kron(spec.particle.momentum, phi);
    const SparseOperator quad = phi * phi - cplx(vacuum_constant) * SparseOperator::identity(model.fock_dim());
    return linear + cplx(0.5 * g * g) * fock::kron(id_p, quad);
}

} // namespace

DeformedHamiltonian build_hamiltonian(const ModelPtr& model, cplx theta, double g,
                                      std::optional<double> sigma, Part part) {
    if (!model) throw ValidationError("model: null model");
    if (std::abs(theta) >= kThetaRadius + 1e-12)
        throw ValidationError("model: |theta| must be below " + std::to_string(kThetaRadius));
    if (g < 0.0) throw ValidationError("model: coupling g must be >= 0");
    if (part != Part::Full && !sigma) throw ValidationError("model: cutoff parts need sigma");

    DeformedHamiltonian out{model, theta, g, std::nullopt, part, {}};
    if (sigma) out.sigma = model->snap_sigma(*sigma);

    const SparseOperator h0 = free_part(*model, theta);
    const bool real_theta = theta.imag() == 0.0;

    if (model->spec().kind == ModelKind::Nelson) {
        const Window window = part == Part::Full ? Window::All : part == Part::Cutoff ? Window::Above : Window::Below;
        const auto f = radial_coupling(*model, theta, window, out.sigma);
        SparseOperator w = interaction(*model, theta, g, f);
        out.matrix = part == Part::BelowInteraction ? w : h0 + w;
    } else {
        const auto f_all = radial_coupling(*model, theta, Window::All);
        if (part == Part::Full) {
            out.matrix = h0 + interaction(*model, theta, g, f_all);
        } else {
            const auto f_above = radial_coupling(*model, theta, Window::Above, out.sigma);
            const SparseOperator w_above = interaction(*model, theta, g, f_above);
            if (part == Part::Cutoff) {
                out.matrix = h0 + w_above;
            } else {
                out.matrix = interaction(*model, theta, g, f_all) - w_above;
            }
        }
    }
    out.matrix.hermitian_hint = real_theta;
    return out;
}

DeformedHamiltonian renormalized_cutoff_hamiltonian(const ModelPtr& model, cplx theta, double g, double sigma,
                                                    cplx shift, const fock::SparseOperator& projector) {
    DeformedHamiltonian h = build_hamiltonian(model, theta, g, sigma, Part::Cutoff);
    if (projector.dim() != h.matrix.dim())
        throw ValidationError("model: projector dimension mismatch");
    const SpMat sq = projector.matrix * projector.matrix;
    const SpMat diff = sq - projector.matrix;
    double err = 0.0, scale = 1.0;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (SpMat::InnerIterator it(diff, k); it; ++it) err = std::max(err, std::abs(it.value()));
    for (int k = 0; k < projector.matrix.outerSize(); ++k)
        for (SpMat::InnerIterator it(projector.matrix, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
    if (err > 1e-8 * scale) throw ValidationError("model: projector is not idempotent (|P^2 - P| = " +
                                                  std::to_string(err) + ")");
    h.matrix = h.matrix + shift * projector;
    h.matrix.hermitian_hint = false;
    return h;
}

CVec relabel_modes(const Model& model, const CVec& psi, int shift) {
    const auto& basis = model.basis();
    const long fd = model.fock_dim();
    const auto modes = static_cast<long>(basis.modes());
    CVec out = CVec::Zero(psi.size());
    fock::OccupationState target(basis.modes());
    for (long i = 0; i < psi.size(); ++i) {
        if (psi[i] == 0.0) continue;
        const auto& s = basis.state(static_cast<std::size_t>(i % fd));
        std::fill(target.begin(), target.end(), 0);
        bool inside = true;
        for (long n = 0; n < modes && inside; ++n) {
            if (s[static_cast<std::size_t>(n)] == 0) continue;
            const long m = n + shift;
            if (m < 0 || m >= modes) inside = false;
            else target[static_cast<std::size_t>(m)] = s[static_cast<std::size_t>(n)];
        }
        if (!inside) continue;
        const long j = basis.index_of(target);
        out[(i / fd) * fd + j] = psi[i];
    }
    return out;
}

} // namespace reslab::model
