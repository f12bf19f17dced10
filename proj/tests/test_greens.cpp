#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kam/errors.hpp"
#include "kam/greens.hpp"
#include "support.hpp"

using namespace kam;
using namespace kamtest;

namespace {

LatticeMatrix sample_operator(std::uint64_t seed, int d, int N, int n, double eps) {
    std::mt19937_64 rng(seed);
    RealVec offsets;
    for (int j = 0; j < n; ++j) offsets.push_back(0.31 + 0.57 * j);
    return random_operator(rng, cube_region(d, N), golden_omega(d), offsets, eps, 3.0, 4);
}

}  // namespace

TEST_CASE("direct inversion yields the inverse and a sound certificate") {
    for (int d : {1, 2}) {
        LatticeMatrix T = sample_operator(11 + d, d, d == 1 ? 10 : 4, 2, 1e-2);
        DirectInverse di = invert_direct(T, 1);
        const Eigen::MatrixXcd I = di.G * T.dense();
        CHECK((I - Eigen::MatrixXcd::Identity(I.rows(), I.cols())).norm() < 1e-10);
        SoundnessReport s = check_certificate(di.cert, di.G, T.region, T.block);
        CHECK(s.sound);
        CHECK(s.worst_ratio <= 1.0 + 1e-9);
        CHECK(di.cert.provenance == Provenance::Direct);
        CHECK(di.cert.region.sites == T.sites());
    }
}

TEST_CASE("an exactly resonant diagonal is refused as near singular") {
    LatticeMatrix T = sample_operator(3, 1, 5, 1, 0.0);
    T.sigma = -T.diag(0, Index{2});  // zero diagonal entry at k = 2
    CHECK_THROWS_AS(invert_direct(T, 1), NearSingular);
}

TEST_CASE("certify reports the worst offenders and the norm target") {
    LatticeMatrix T = sample_operator(5, 1, 8, 1, 1e-3);
    DirectInverse di = invert_direct(T, 1);
    CertifyResult ok = certify(di.G, T.region, 1, 0.5, 1, 1e6);
    CHECK(ok.pass);
    CHECK(ok.worst.size() <= 10);
    for (std::size_t i = 1; i < ok.worst.size(); ++i) CHECK(ok.worst[i - 1].ratio >= ok.worst[i].ratio);
    CertifyResult small_norm = certify(di.G, T.region, 1, 0.5, 1, 1e-3);
    CHECK_FALSE(small_norm.pass);
    CHECK_FALSE(small_norm.norm_ok);
    CertifyResult fast = certify(di.G, T.region, 1, 100.0, 1, 1e6);
    CHECK_FALSE(fast.pass);
}

TEST_CASE("check_certificate detects overstated certificates") {
    LatticeMatrix T = sample_operator(9, 2, 3, 1, 1e-2);
    DirectInverse di = invert_direct(T, 1);
    DecayCertificate bad = di.cert;
    bad.alpha += 1.0;
    CHECK_FALSE(check_certificate(bad, di.G, T.region, 1).sound);
    DecayCertificate small = di.cert;
    small.norm_bound *= 0.5;
    CHECK_FALSE(check_certificate(small, di.G, T.region, 1).sound);
}

TEST_CASE("Neumann transfer is sound for small perturbations and refuses large ones") {
    for (int trial = 0; trial < 6; ++trial) {
        const int d = 1 + trial % 2;
        LatticeMatrix T = sample_operator(100 + trial, d, d == 1 ? 8 : 3, 1, 1e-3);
        DirectInverse di = invert_direct(T, 1);
        std::mt19937_64 rng(500 + trial);
        LatticeMatrix Tp = T;
        FourierSeries dS = random_series(rng, d, 3, 1e-10, 3.0, 1, 1);
        Tp.symbol = T.symbol + dS + adjoint(dS);
        Perturbation p = variation_delta(T, Tp);
        CHECK(p.bound_eps > 0);
        DecayCertificate c = neumann_transfer(di.cert, p);
        CHECK(c.provenance == Provenance::Neumann);
        CHECK(c.norm_bound == doctest::Approx(2 * di.cert.norm_bound));
        DirectInverse dp = invert_direct(Tp, 1);
        CHECK(check_certificate(c, dp.G, Tp.region, 1).sound);
    }
    LatticeMatrix T = sample_operator(1, 1, 8, 1, 1e-3);
    DirectInverse di = invert_direct(T, 2);
    CHECK_THROWS_AS(neumann_transfer(di.cert, Perturbation{1e-2, 3.0}), CertificateRefused);
    // the explicit series bound refuses on its own as well
    CHECK_THROWS_AS(neumann_transfer(di.cert, Perturbation{1e-2, 3.0}, NeumannOptions{false}), CertificateRefused);
}

TEST_CASE("variation of a pure diagonal shift") {
    LatticeMatrix T = sample_operator(2, 1, 4, 2, 1e-3);
    LatticeMatrix Tp = T;
    Tp.offsets[1] += 2.5e-4;
    Perturbation p = variation_delta(T, Tp);
    CHECK(p.bound_eps == doctest::Approx(2.5e-4));
}
