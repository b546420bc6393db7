#include "reslab/fock.hpp"

#include <catch_amalgamated.hpp>

#include <numeric>

using namespace reslab;
using namespace reslab::fock;
using Catch::Approx;

TEST_CASE("fock dimension is the binomial count") {
    CHECK(fock_dimension(4, 2) == 15);
    CHECK(fock_dimension(24, 2) == 325);
    CHECK(fock_dimension(3, 0) == 1);
    const FockBasis b(ModeGrid::geometric(0.1, 2.0, 5), 3);
    CHECK(b.size() == fock_dimension(5, 3));
}

TEST_CASE("basis ordering: vacuum first, totals non-decreasing, index round trip") {
    const FockBasis b(ModeGrid::geometric(0.1, 2.0, 4), 2);
    CHECK(b.total(0) == 0);
    for (std::size_t i = 1; i < b.size(); ++i) {
        CHECK(b.total(i) >= b.total(i - 1));
        if (b.total(i) == b.total(i - 1)) CHECK(b.state(i - 1) > b.state(i));
    }
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.index_of(b.state(i)) == static_cast<long>(i));
    CHECK(b.index_of({3, 0, 0, 0}) == -1);
}

TEST_CASE("dimension cap is enforced") {
    CHECK_THROWS_AS(FockBasis(ModeGrid::geometric(0.1, 2.0, 40), 3, 100), CapacityError);
}

TEST_CASE("geometric grid weights sum to the window and the ratio is constant") {
    const auto g = ModeGrid::geometric(2e-4, 12.0, 24);
    const double sum = std::accumulate(g.weights().begin(), g.weights().end(), 0.0);
    CHECK(sum == Approx(12.0 - 2e-4).epsilon(1e-13));
    for (std::size_t n = 0; n + 1 < g.size(); ++n) CHECK(g.node(n + 1) / g.node(n) == Approx(g.ratio()).epsilon(1e-12));
    CHECK(g.snap_to_edge(g.edges()[5] * 1.01) == g.edges()[5]);
    const auto lin = ModeGrid::linear(0.1, 1.1, 10);
    CHECK(lin.node(0) == Approx(0.15));
}

TEST_CASE("ladder operators: adjoint pair and CCR below the top shell") {
    const FockBasis b(ModeGrid::geometric(0.1, 3.0, 3), 3);
    for (std::size_t n = 0; n < b.modes(); ++n) {
        const auto a = ladder(b, n, LadderKind::Annihilate);
        const auto ad = ladder(b, n, LadderKind::Create);
        CHECK((a.dense().adjoint() - ad.dense()).norm() < 1e-15);
        const CMat comm = (a * ad - ad * a).dense();
        for (std::size_t i = 0; i < b.size(); ++i)
            if (b.total(i) < b.n_max()) CHECK(std::abs(comm(static_cast<long>(i), static_cast<long>(i)) - 1.0) < 1e-14);
    }
}

TEST_CASE("field energy and number operator are diagonal with the expected entries") {
    const FockBasis b(ModeGrid::geometric(0.1, 3.0, 3), 2);
    const CMat hf = field_energy(b).dense();
    const CMat nn = number_operator(b).dense();
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(hf(static_cast<long>(i), static_cast<long>(i)).real() == Approx(b.field_energy(i)));
        CHECK(nn(static_cast<long>(i), static_cast<long>(i)).real() == Approx(b.total(i)));
    }
    CHECK((hf - CMat(hf.diagonal().asDiagonal())).norm() == 0.0);
}

TEST_CASE("kron matches the dense Kronecker product") {
    CMat a(2, 2);
    a << 1.0, 2.0, cplx(0, 1), 3.0;
    const FockBasis b(ModeGrid::geometric(0.1, 3.0, 2), 1);
    const auto f = field_energy(b);
    const CMat k = kron(a, f).dense();
    const CMat fd = f.dense();
    const long n = fd.rows();
    for (long i = 0; i < 2; ++i)
        for (long j = 0; j < 2; ++j) CHECK((k.block(i * n, j * n, n, n) - a(i, j) * fd).norm() < 1e-15);
}
