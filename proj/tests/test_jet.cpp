#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kam/jet.hpp"
#include "support.hpp"

using namespace kam;
using namespace kamtest;

namespace {
double jet_diff(const HamiltonianJet& a, const HamiltonianJet& b) {
    HamiltonianJet c = a - b;
    double m = 0.0;
    for (const auto& [s, f] : c.terms()) m = std::max(m, f.max_abs());
    return m;
}
}  // namespace

TEST_CASE("canonical brackets") {
    const int d = 2, n = 1;
    HamiltonianJet y(d, n), e(d, n), z(d, n), zb(d, n);
    y.add(sig_y(d, n, 0), constant_series(d, 1.0));
    e.add(make_signature(d, n), mode_series(d, Index{1, 0}, 1.0));
    z.add(sig_z(d, n, 0), constant_series(d, 1.0));
    zb.add(sig_zbar(d, n, 0), constant_series(d, 1.0));
    // {y1, e^{i x1}} = -<d_y y1, d_x e^{ix1}> = -i e^{ix1}
    auto b1 = poisson_bracket(y, e);
    CHECK(std::abs(b1.coeff(make_signature(d, n)).get(Index{1, 0}) - cplx(0.0, -1.0)) < 1e-15);
    // {z, zbar} = i
    auto b2 = poisson_bracket(z, zb);
    CHECK(std::abs(b2.coeff(make_signature(d, n)).get(Index{0, 0}) - cplx(0.0, 1.0)) < 1e-15);
}

TEST_CASE("bracket is antisymmetric and satisfies the Jacobi identity") {
    std::mt19937_64 rng(5);
    auto F = random_jet(rng, 1, 1, 2, 1.0, 0.5, 3);
    auto G = random_jet(rng, 1, 1, 2, 1.0, 0.5, 3);
    auto K = random_jet(rng, 1, 1, 2, 1.0, 0.5, 2);
    // enough degree room for the double brackets
    auto lift = [](const HamiltonianJet& J) {
        HamiltonianJet L(J.d(), J.n(), 12, -1);
        for (const auto& [s, f] : J.terms()) L.add(s, f);
        return L;
    };
    HamiltonianJet F8 = lift(F), G8 = lift(G), K8 = lift(K);
    HamiltonianJet GF = poisson_bracket(G8, F8);
    GF *= cplx(-1.0, 0.0);
    CHECK(jet_diff(poisson_bracket(F8, G8), GF) < 1e-12);
    auto jac = poisson_bracket(F8, poisson_bracket(G8, K8)) + poisson_bracket(G8, poisson_bracket(K8, F8)) +
               poisson_bracket(K8, poisson_bracket(F8, G8));
    double m = 0.0;
    for (const auto& [s, f] : jac.terms()) m = std::max(m, f.max_abs());
    CHECK(m < 1e-10);
}

TEST_CASE("degree truncation charges the remainder") {
    HamiltonianJet J(1, 1, 2, -1);
    J.set_norm_weights(0.5, 0.1);
    Signature s = make_signature(1, 1);
    s.b[0] = 3;  // degree 3 > 2
    J.add(s, constant_series(1, 1.0));
    CHECK(J.terms().empty());
    // -i H_z = 3 z^2: sup 3 r^2, divided by r in the norm
    CHECK(J.remainder() == doctest::Approx(3 * 0.1 * 0.1 / 0.1));
}

TEST_CASE("weighted vector-field norm of monomials") {
    const int d = 1, n = 1;
    const double s = 0.3, r = 0.2;
    HamiltonianJet J(d, n);
    J.add(sig_y(d, n, 0), mode_series(d, Index{2}, 0.5));
    // X = 0.5 e^{2s}; Y = |d_x| = 2*0.5 e^{2s} * r^2 / r^2
    CHECK(vf_norm(J, s, r) == doctest::Approx(0.5 * std::exp(2 * s) + 1.0 * std::exp(2 * s)));
    HamiltonianJet Z(d, n);
    Z.add(sig_zzbar(d, n, 0, 0), constant_series(d, 2.0));
    // i H_zbar = 2i z and -i H_z = -2i zbar: each 2r, divided by r
    CHECK(vf_norm(Z, s, r) == doctest::Approx(4.0));
}

TEST_CASE("split and reality") {
    std::mt19937_64 rng(6);
    auto P = random_jet(rng, 2, 1, 2, 1.0, 0.5);
    CHECK(check_reality(P).ok);
    auto sp = split_low_high(P);
    for (const auto& [s, f] : sp.low.terms()) CHECK(s.weighted_degree() <= 2);
    for (const auto& [s, f] : sp.high.terms()) CHECK(s.weighted_degree() > 2);
    CHECK(jet_diff(sp.low + sp.high, P) < 1e-15);
    HamiltonianJet Q(2, 1);
    Q.add(make_signature(2, 1), mode_series(2, Index{1, 0}, 1.0));
    CHECK_FALSE(check_reality(Q).ok);
    CHECK(check_reality(symmetrize_reality(Q)).ok);
}

TEST_CASE("Lie series of a linear Hamiltonian terminates") {
    const int d = 1, n = 1;
    std::mt19937_64 rng(8);
    HamiltonianJet H(d, n), F(d, n);
    H.add(sig_y(d, n, 0), constant_series(d, 1.0));
    auto f = random_series(rng, d, 3, 0.01, 0.5);
    f = f + conj_reflect(f);
    F.add(make_signature(d, n), f);
    auto L = lie_transform(H, F, 3, 0.1, 0.5);
    // H o X_F^1 = y + {y, f} = y - f'
    HamiltonianJet expect = H;
    expect.add(make_signature(d, n), -1.0 * partial(f, 0));
    CHECK(jet_diff(L.value, expect) < 1e-15);
    CHECK(L.tail_bound == doctest::Approx(0.0));
}

TEST_CASE("component extraction round-trips") {
    std::mt19937_64 rng(9);
    const int d = 1, n = 2;
    auto M = random_series(rng, d, 1, 1.0, 0.5, n, n);
    auto S = random_series(rng, d, 1, 1.0, 0.5, n, n);
    HamiltonianJet J(d, n);
    add_comp_zzbar(J, M);
    add_comp_zz(J, S);
    CHECK((comp_zzbar(J) - M).max_abs() < 1e-15);
    auto Ssym = 0.5 * (S + transpose(S));
    CHECK((comp_zz(J) - Ssym).max_abs() < 1e-15);
}
