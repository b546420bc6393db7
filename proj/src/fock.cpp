#include "reslab/fock.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reslab::fock {

std::string to_string(GridKind kind) {
    return kind == GridKind::Geometric ? "geometric" : "linear";
}

GridKind grid_kind_from_string(const std::string& name) {
    if (name == "geometric") return GridKind::Geometric;
    if (name == "linear") return GridKind::Linear;
    throw ValidationError("unknown grid kind '" + name + "' (expected geometric|linear)");
}

ModeGrid::ModeGrid(GridKind kind, std::vector<double> edges, std::vector<double> nodes)
    : kind_(kind), edges_(std::move(edges)), nodes_(std::move(nodes)) {
    weights_.resize(nodes_.size());
    for (std::size_t n = 0; n < nodes_.size(); ++n) weights_[n] = edges_[n + 1] - edges_[n];
}

static void check_grid_args(double kmin, double kmax, std::size_t count) {
    if (!(kmin > 0.0)) throw ValidationError("grid: kmin must be > 0 (k = 0 is excluded)");
    if (!(kmax > kmin)) throw ValidationError("grid: kmax must exceed kmin");
    if (count == 0) throw ValidationError("grid: count must be >= 1");
}

ModeGrid ModeGrid::geometric(double kmin, double kmax, std::size_t count) {
    check_grid_args(kmin, kmax, count);
    std::vector<double> edges(count + 1), nodes(count);
    const double log_ratio = std::log(kmax / kmin) / static_cast<double>(count);
    for (std::size_t i = 0; i <= count; ++i)
        edges[i] = kmin * std::exp(log_ratio * static_cast<double>(i));
    edges.front() = kmin;
    edges.back() = kmax;
    for (std::size_t n = 0; n < count; ++n) nodes[n] = std::sqrt(edges[n] * edges[n + 1]);
    return ModeGrid(GridKind::Geometric, std::move(edges), std::move(nodes));
}

ModeGrid ModeGrid::linear(double kmin, double kmax, std::size_t count) {
    check_grid_args(kmin, kmax, count);
    std::vector<double> edges(count + 1), nodes(count);
    const double h = (kmax - kmin) / static_cast<double>(count);
    for (std::size_t i = 0; i <= count; ++i) edges[i] = kmin + h * static_cast<double>(i);
    edges.back() = kmax;
    for (std::size_t n = 0; n < count; ++n) nodes[n] = 0.5 * (edges[n] + edges[n + 1]);
    return ModeGrid(GridKind::Linear, std::move(edges), std::move(nodes));
}

ModeGrid ModeGrid::make(GridKind kind, double kmin, double kmax, std::size_t count) {
    return kind == GridKind::Geometric ? geometric(kmin, kmax, count) : linear(kmin, kmax, count);
}

ModeGrid ModeGrid::scaled(double factor) const {
    if (!(factor > 0.0)) throw ValidationError("grid: scale factor must be > 0");
    std::vector<double> edges = edges_, nodes = nodes_;
    for (auto& e : edges) e *= factor;
    for (auto& k : nodes) k *= factor;
    ModeGrid out(kind_, std::move(edges), std::move(nodes));
    // keep weights bit-consistent with the original cells
    for (std::size_t n = 0; n < out.weights_.size(); ++n) out.weights_[n] = weights_[n] * factor;
    return out;
}

ModeGrid ModeGrid::below(double edge) const {
    const std::size_t n = count_below(edge);
    if (n == 0) throw ValidationError("grid: no cells below the requested edge");
    std::vector<double> edges(edges_.begin(), edges_.begin() + static_cast<long>(n) + 1);
    std::vector<double> nodes(nodes_.begin(), nodes_.begin() + static_cast<long>(n));
    return ModeGrid(kind_, std::move(edges), std::move(nodes));
}

double ModeGrid::ratio() const {
    if (kind_ != GridKind::Geometric) throw ValidationError("grid: ratio() needs a geometric grid");
    return edges_.size() > 1 ? edges_[1] / edges_[0] : 1.0;
}

double ModeGrid::snap_to_edge(double k) const {
    auto it = std::min_element(edges_.begin(), edges_.end(), [k](double a, double b) {
        return std::abs(a - k) < std::abs(b - k);
    });
    return *it;
}

std::size_t ModeGrid::count_below(double k) const {
    return static_cast<std::size_t>(std::lower_bound(nodes_.begin(), nodes_.end(), k) - nodes_.begin());
}

std::size_t fock_dimension(std::size_t modes, int n_max) {
    // C(M + N, N) computed incrementally; each partial product is itself a binomial.
    long double acc = 1.0L;
    for (int i = 1; i <= n_max; ++i) {
        acc = acc * static_cast<long double>(modes + static_cast<std::size_t>(i)) / i;
        if (acc > static_cast<long double>(std::numeric_limits<std::size_t>::max() / 2))
            return std::numeric_limits<std::size_t>::max();
    }
    return static_cast<std::size_t>(std::llround(acc));
}

namespace {

// Compositions of `remaining` into modes [pos, M) in descending lexicographic order.
void compose(std::size_t pos, int remaining, OccupationState& current,
             std::vector<OccupationState>& out) {
    const std::size_t modes = current.size();
    if (pos + 1 == modes) {
        current[pos] = remaining;
        out.push_back(current);
        current[pos] = 0;
        return;
    }
    for (int m = remaining; m >= 0; --m) {
        current[pos] = m;
        compose(pos + 1, remaining - m, current, out);
    }
    current[pos] = 0;
}

} // namespace

FockBasis::FockBasis(ModeGrid grid, int n_max, std::size_t dimension_cap)
    : grid_(std::move(grid)), n_max_(n_max) {
    if (n_max < 0) throw ValidationError("fock: n_max must be >= 0");
    if (grid_.size() == 0) throw ValidationError("fock: empty mode grid");
    const std::size_t dim = fock_dimension(grid_.size(), n_max);
    if (dim > dimension_cap)
        throw CapacityError("fock: basis dimension " + std::to_string(dim) +
                            " exceeds cap " + std::to_string(dimension_cap));
    states_.reserve(dim);
    OccupationState current(grid_.size(), 0);
    for (int total = 0; total <= n_max; ++total) compose(0, total, current, states_);

    totals_.resize(states_.size());
    energies_.resize(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) {
        int t = 0;
        double e = 0.0;
        for (std::size_t n = 0; n < states_[i].size(); ++n) {
            t += states_[i][n];
            e += grid_.omega(n) * states_[i][n];
        }
        totals_[i] = t;
        energies_[i] = e;
        index_.emplace(states_[i], i);
    }
}

long FockBasis::index_of(const OccupationState& state) const {
    auto it = index_.find(state);
    return it == index_.end() ? -1 : static_cast<long>(it->second);
}

FockBasis enumerate_basis(const ModeGrid& grid, int n_max, std::size_t dimension_cap) {
    return FockBasis(grid, n_max, dimension_cap);
}

// ---------------------------------------------------------------------------
// SparseOperator

void prune(SpMat& m) {
    m.prune([](const int&, const int&, const cplx& v) { return std::abs(v) > kDropTolerance; });
    m.makeCompressed();
}

SparseOperator::SparseOperator(SpMat m, bool hermitian) : matrix(std::move(m)), hermitian_hint(hermitian) {
    prune(matrix);
}

SparseOperator SparseOperator::adjoint() const {
    SpMat adj = matrix.adjoint();
    return SparseOperator(std::move(adj), hermitian_hint);
}

SparseOperator SparseOperator::from_triplets(long dim, const std::vector<Triplet>& entries, bool hermitian) {
    SpMat m(dim, dim);
    m.setFromTriplets(entries.begin(), entries.end());
    return SparseOperator(std::move(m), hermitian);
}

SparseOperator SparseOperator::identity(long dim) {
    SpMat m(dim, dim);
    m.setIdentity();
    return SparseOperator(std::move(m), true);
}

SparseOperator SparseOperator::diagonal(const CVec& diag) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(diag.size()));
    bool real = true;
    for (long i = 0; i < diag.size(); ++i) {
        t.emplace_back(static_cast<int>(i), static_cast<int>(i), diag[i]);
        real = real && diag[i].imag() == 0.0;
    }
    return from_triplets(diag.size(), t, real);
}

SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
    return SparseOperator(SpMat(a.matrix + b.matrix), a.hermitian_hint && b.hermitian_hint);
}

SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) {
    return SparseOperator(SpMat(a.matrix - b.matrix), a.hermitian_hint && b.hermitian_hint);
}

SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
    return SparseOperator(SpMat(a.matrix * b.matrix), false);
}

SparseOperator operator*(cplx s, const SparseOperator& a) {
    return SparseOperator(SpMat(s * a.matrix), a.hermitian_hint && s.imag() == 0.0);
}

SparseOperator kron(const SparseOperator& a, const SparseOperator& b) {
    const long nb = b.dim();
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(a.matrix.nonZeros() * b.matrix.nonZeros()));
    for (int ka = 0; ka < a.matrix.outerSize(); ++ka)
        for (SpMat::InnerIterator ia(a.matrix, ka); ia; ++ia)
            for (int kb = 0; kb < b.matrix.outerSize(); ++kb)
                for (SpMat::InnerIterator ib(b.matrix, kb); ib; ++ib)
                    t.emplace_back(static_cast<int>(ia.row() * nb + ib.row()),
                                   static_cast<int>(ia.col() * nb + ib.col()), ia.value() * ib.value());
    return SparseOperator::from_triplets(a.dim() * nb, t, a.hermitian_hint && b.hermitian_hint);
}

SparseOperator kron(const CMat& a, const SparseOperator& b) {
    SpMat as = a.sparseView(0.0, 0.0);
    const bool herm = a.isApprox(a.adjoint(), 0.0);
    return kron(SparseOperator(std::move(as), herm), b);
}

// ---------------------------------------------------------------------------
// Second quantization

SparseOperator ladder(const FockBasis& basis, std::size_t mode, LadderKind kind) {
    if (mode >= basis.modes()) throw ValidationError("fock: ladder mode index out of range");
    std::vector<Triplet> t;
    OccupationState scratch;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto& s = basis.state(i);
        if (s[mode] == 0) continue;
        scratch = s;
        scratch[mode] -= 1;
        const long j = basis.index_of(scratch);
        const double amp = std::sqrt(static_cast<double>(s[mode]));
        // a |s> = sqrt(m) |s - e_n>: column i, row j. a^dag is the transpose.
        if (kind == LadderKind::Annihilate)
            t.emplace_back(static_cast<int>(j), static_cast<int>(i), amp);
        else
            t.emplace_back(static_cast<int>(i), static_cast<int>(j), amp);
    }
    return SparseOperator::from_triplets(static_cast<long>(basis.size()), t, false);
}

SparseOperator field_energy(const FockBasis& basis, cplx scale) {
    CVec d(static_cast<long>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i) d[static_cast<long>(i)] = scale * basis.field_energy(i);
    return SparseOperator::diagonal(d);
}

SparseOperator field_phi(const FockBasis& basis, std::span<const cplx> couplings, bool conjugate_on_create) {
    if (couplings.size() != basis.modes())
        throw ValidationError("fock: field_phi couplings length " + std::to_string(couplings.size()) +
                              " does not match mode count " + std::to_string(basis.modes()));
    std::vector<Triplet> t;
    OccupationState scratch;
    bool real = true;
    for (auto c : couplings) real = real && c.imag() == 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto& s = basis.state(i);
        for (std::size_t n = 0; n < s.size(); ++n) {
            if (s[n] == 0 || couplings[n] == 0.0) continue;
            scratch = s;
            scratch[n] -= 1;
            const auto j = static_cast<int>(basis.index_of(scratch));
            const double amp = std::sqrt(static_cast<double>(s[n]));
            const cplx c = couplings[n];
            t.emplace_back(j, static_cast<int>(i), c * amp);                                   // c a_n
            t.emplace_back(static_cast<int>(i), j, (conjugate_on_create ? std::conj(c) : c) * amp); // a_n^dag
        }
    }
    return SparseOperator::from_triplets(static_cast<long>(basis.size()), t, conjugate_on_create || real);
}

SparseOperator dgamma_power(const FockBasis& basis, double exponent) {
    CVec d(static_cast<long>(basis.size()));
    std::vector<double> w(basis.modes());
    for (std::size_t n = 0; n < basis.modes(); ++n) w[n] = std::pow(basis.grid().omega(n), exponent);
    for (std::size_t i = 0; i < basis.size(); ++i) {
        double acc = 0.0;
        const auto& s = basis.state(i);
        for (std::size_t n = 0; n < s.size(); ++n)
            if (s[n] != 0) acc += w[n] * s[n];
        d[static_cast<long>(i)] = acc;
    }
    return SparseOperator::diagonal(d);
}

SparseOperator number_operator(const FockBasis& basis) {
    CVec d(static_cast<long>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i) d[static_cast<long>(i)] = basis.total(i);
    return SparseOperator::diagonal(d);
}

} // namespace reslab::fock
