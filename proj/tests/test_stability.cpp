#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "kam/stability.hpp"
#include "support.hpp"

using namespace kam;
using namespace kamtest;

namespace {

/// Self-adjoint x-dependent n x n series.
FourierSeries hermitian_series(int d, int n, int N, double amp, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    FourierSeries A = random_series(rng, d, N, amp, 1.0, n, n);
    FourierSeries B = A + adjoint(A);
    B *= cplx(0.5, 0.0);
    return B;
}

const RealVec kOmega{1.0, 1.6180339887498949};

}  // namespace

TEST_CASE("series evaluator matches direct evaluation") {
    FourierSeries B = hermitian_series(2, 2, 3, 0.3, 1);
    SeriesEvaluator ev(B);
    std::vector<cplx> out;
    const RealVec x{0.3, -1.7};
    ev.eval(x, out);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) CHECK(std::abs(out[r * 2 + c] - B.evaluate(x, r, c)) < 1e-13);
}

TEST_CASE("free flow matches the closed form") {
    const RealVec Omega{1.3, 2.9};
    FourierSeries B(2, 0, 2, 2);
    const CVec z0{cplx(1.0, 0.5), cplx(-0.3, 0.2)};
    LinearTrajectory tr = integrate_linearized(kOmega, Omega, B, z0, 10.0, 1e-3);
    CHECK(tr.times.size() == 10001);
    CHECK(tr.times.back() == doctest::Approx(10.0));
    CHECK(max_free_error(tr, Omega) <= 1e-8);
    CHECK(l2_drift(tr) <= 1e-10);
    CHECK(std::abs(lyapunov_estimate(tr)) <= 1e-10);
}

TEST_CASE("dt halving shows fourth-order convergence") {
    const RealVec Omega{1.3, 2.9};
    SUBCASE("free flow") {
        FourierSeries B(2, 0, 2, 2);
        OrderStudy st = order_study(kOmega, Omega, B, {1.0, 0.5}, 10.0, 0.08, 4);
        CHECK(st.order == doctest::Approx(4.0).epsilon(0.125));
        for (double s : st.slopes) CHECK(std::abs(std::pow(2.0, s) - 16.0) < 8.0);
    }
    SUBCASE("x-dependent symmetric B") {
        FourierSeries B = hermitian_series(2, 2, 3, 0.2, 3);
        OrderStudy st = order_study(kOmega, Omega, B, {1.0, 0.5}, 10.0, 0.08, 4);
        CHECK(std::abs(st.order - 4.0) <= 0.5);
    }
}

TEST_CASE("self-adjoint generators conserve the L2 norm") {
    FourierSeries B = hermitian_series(2, 2, 3, 0.2, 5);
    LinearTrajectory tr = integrate_linearized(kOmega, {1.3, 2.9}, B, {1.0, cplx(0, 1)}, 10.0, 1e-3, {0.4, 0.1});
    ConservationVerdict v = check_conservation(tr, 1e-8);
    CHECK(v.conserved);
    CHECK(std::abs(v.lyapunov) < 1e-10);
}

TEST_CASE("sentinels are detected") {
    SUBCASE("non-symmetric coupling breaks conservation") {
        FourierSeries B = nonsymmetric_sentinel(2, 2, 0.05);
        LinearTrajectory tr = integrate_linearized(kOmega, {1.3, 2.9}, B, {1.0, 1.0}, 10.0, 1e-3);
        CHECK_FALSE(check_conservation(tr, 1e-8).conserved);
    }
    SUBCASE("planted gain gives its exponent") {
        const RealVec Omega{1.3, 2.9};
        LinearTrajectory tr = integrate_generator(gain_sentinel(Omega, 0.01), 2, {1.0, 1.0}, 100.0, 1e-3, 100);
        CHECK(lyapunov_estimate(tr) == doctest::Approx(0.01).epsilon(1e-6));
        LyapunovHalves h = lyapunov_halves(tr);
        CHECK(h.first == doctest::Approx(0.01).epsilon(1e-6));
        CHECK(h.second == doctest::Approx(0.01).epsilon(1e-6));
    }
}

TEST_CASE("trajectory CSV layout") {
    FourierSeries B(1, 0, 1, 1);
    LinearTrajectory tr = integrate_linearized({1.0}, {2.0}, B, {1.0}, 0.01, 1e-3, {}, 5);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    const std::string s = os.str();
    CHECK(s.rfind("t,re_z0,im_z0,norm2\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 3);
}
