#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "kam/errors.hpp"
#include "kam/multiscale.hpp"
#include "support.hpp"

using namespace kam;
using namespace kamtest;

namespace {

/// |R| - |R cap (R + z)| for a box with the given half-widths.
int l_shape_count(const std::vector<int>& h, const Index& z) {
    int full = 1, overlap = 1;
    for (std::size_t i = 0; i < h.size(); ++i) {
        full *= 2 * h[i] + 1;
        overlap *= std::max(0, 2 * h[i] + 1 - std::abs(z[i]));
    }
    return full - overlap;
}

LatticeMatrix operator_on(const std::vector<Index>& region, std::uint64_t seed, double eps, int n = 1) {
    std::mt19937_64 rng(seed);
    const int d = static_cast<int>(region.front().size());
    RealVec offsets;
    for (int j = 0; j < n; ++j) offsets.push_back(0.37 + 0.61 * j);
    return random_operator(rng, region, golden_omega(d), offsets, eps, 3.0, 4);
}

}  // namespace

TEST_CASE("elementary regions: rectangles, L-shapes and clipping") {
    ElementaryRegion R = make_elementary_region({0, 0}, {3, 2});
    CHECK(R.sites.size() == 35);
    CHECK(R.shape == RegionShape::FullRectangle);
    CHECK(R.diameter == 6);
    CHECK(R.contains({3, -2}));
    CHECK_FALSE(R.contains({4, 0}));

    ElementaryRegion L = make_elementary_region({0, 0}, {3, 3}, Index{2, -3});
    CHECK(static_cast<int>(L.sites.size()) == l_shape_count({3, 3}, {2, -3}));
    CHECK(L.shape == RegionShape::LShaped);
    REQUIRE(L.interior_corner);
    CHECK(*L.interior_corner == Index{-1, 0});
    CHECK_FALSE(L.contains(*L.interior_corner));

    ElementaryRegion S = make_elementary_region({0, 0}, {3, 3}, Index{2, 0});
    CHECK(S.shape == RegionShape::FullRectangle);  // a strip is still a rectangle
    CHECK(S.sites.size() == 14);

    ElementaryRegion flat = make_elementary_region({0, 0}, {3, 0});
    CHECK(flat.shape == RegionShape::LowerDimensional);

    ElementaryRegion clip = make_elementary_region({0, 0}, {3, 3}, std::nullopt, std::make_pair(Index{-1, -5}, Index{5, 1}));
    CHECK(clip.sites.size() == 5 * 5);
}

TEST_CASE("exhaustions partition the region into nested shells") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> hw(2, 7), Md(1, 3);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<int> h{hw(rng), hw(rng)};
        std::uniform_int_distribution<int> zx(-h[0], h[0]), zy(-h[1], h[1]);
        std::optional<Index> z;
        if (trial % 2) z = Index{zx(rng), zy(rng)};
        if (z && (*z)[0] == 0 && (*z)[1] == 0) z.reset();
        ElementaryRegion R = make_elementary_region({0, 0}, h, z);
        const Index m = R.sites[std::uniform_int_distribution<std::size_t>(0, R.sites.size() - 1)(rng)];
        const int M = Md(rng);
        Exhaustion ex = build_exhaustion(R, m, M);
        ExhaustionCheck c = check_exhaustion(ex, R);
        CHECK(c.partition);
        CHECK(c.nested);
        CHECK(c.nonadjacent_disjoint);
        // annuli + remainder cover Lambda exactly
        std::size_t total = ex.remainder.size();
        for (const auto& a : ex.annuli) total += a.size();
        CHECK(total == R.sites.size());
        if (R.shape == RegionShape::LShaped && R.interior_corner && !ex.annuli.empty())
            CHECK(ex.exceptional >= 0);
        if (R.shape == RegionShape::FullRectangle) CHECK(ex.exceptional == -1);
    }
}

TEST_CASE("the exhaustion check rejects a broken partition") {
    ElementaryRegion R = make_elementary_region({0, 0}, {6, 6});
    Exhaustion ex = build_exhaustion(R, {0, 0}, 1);
    REQUIRE(ex.annuli.size() >= 3);
    ex.annuli[2].push_back(ex.annuli[0].front());
    CHECK_FALSE(check_exhaustion(ex, R).partition);
    CHECK_FALSE(check_exhaustion(ex, R).nonadjacent_disjoint);
}

TEST_CASE("single-scale coupling is sound against the direct inverse") {
    for (int trial = 0; trial < 6; ++trial) {
        const int d = 1 + trial % 2;
        const int N = d == 1 ? 15 : 6, M = 3;
        ElementaryRegion R = make_elementary_region(Index(d, 0), std::vector<int>(d, N));
        LatticeMatrix T = operator_on(R.sites, 40 + trial, 1e-5, 1 + trial % 3 / 2);
        std::map<Index, SiteCert> certs;
        for (const auto& x : R.sites) {
            const auto W = cube_intersect(x, M, R);
            certs[x] = SiteCert{W, invert_direct(T.on_region(W), 1).cert};
        }
        CouplingResult r = cl1_couple(T, certs, M);
        CHECK(r.cert.provenance == Provenance::CL1);
        CHECK(r.diag.q <= 0.1);
        DirectInverse di = invert_direct(T, M);
        SoundnessReport s = check_certificate(r.cert, di.G, T.region, T.block);
        CHECK(s.sound);
        CHECK(r.cert.alpha > 0.0);
    }
}

TEST_CASE("single-scale coupling refuses missing certificates and strong coupling") {
    ElementaryRegion R = make_elementary_region({0}, {8});
    LatticeMatrix T = operator_on(R.sites, 5, 1e-5);
    std::map<Index, SiteCert> certs;
    for (const auto& x : R.sites) {
        const auto W = cube_intersect(x, 2, R);
        certs[x] = SiteCert{W, invert_direct(T.on_region(W), 1).cert};
    }
    auto missing = certs;
    missing.erase(Index{3});
    CHECK_THROWS_AS(cl1_couple(T, missing, 2), CertificateRefused);
    LatticeMatrix strong = operator_on(R.sites, 5, 50.0);
    CHECK_THROWS_AS(cl1_couple(strong, certs, 2), CertificateRefused);
}

TEST_CASE("two-scale coupling is sound and degenerates at N = K") {
    for (int d : {1, 2}) {
        const int N = d == 1 ? 20 : 7, K = d == 1 ? 8 : 4, M0 = 1;
        LatticeMatrix T = operator_on(cube_region(d, N), 70 + d, 1e-5);
        const ElementaryRegion Lam = region_from_sites(T.region);
        DecayCertificate certK = invert_direct(T.on_region(cube_region(d, K)), 1).cert;
        std::map<Index, DecayCertificate> small;
        for (const auto& x : T.region)
            if (2 * norm_inf(x) > K) small[x] = invert_direct(T.on_region(cube_intersect(x, M0, Lam)), 1).cert;
        CouplingResult r = two_scale_couple(T, certK, small, TwoScaleConfig{N, K, M0, 2});
        DirectInverse di = invert_direct(T, 2);
        CHECK(check_certificate(r.cert, di.G, T.region, 1).sound);
        small.erase(small.begin());
        CHECK_THROWS_AS(two_scale_couple(T, certK, small, TwoScaleConfig{N, K, M0, 2}), CertificateRefused);
    }
    LatticeMatrix T = operator_on(cube_region(1, 5), 3, 1e-5);
    DecayCertificate certK = invert_direct(T, 1).cert;
    CouplingResult r = two_scale_couple(T, certK, {}, TwoScaleConfig{5, 5, 1, 0});
    CHECK(r.cert.norm_bound == certK.norm_bound);
    CHECK(r.cert.provenance == Provenance::TwoScale);
}

TEST_CASE("good/bad-annulus coupling handles a planted near-resonance") {
    ScaleConfig cfg;
    cfg.bad_annuli_allowance = 3;
    ElementaryRegion R = make_elementary_region({0}, {12});
    LatticeMatrix T = operator_on(R.sites, 17, 1e-5);
    // plant |D| = 0.01 at k = 5
    T.sigma = -T.diag(0, Index{5}) + 0.01;
    CL2Report rep = cl2_couple(T, cfg, R, 2, 1.0);
    DirectInverse di = invert_direct(T, rep.result.cert.threshold);
    CHECK(check_certificate(rep.result.cert, di.G, T.region, 1).sound);
    CHECK(rep.worst_center_bad >= 1);
    CHECK(rep.result.cert.provenance == Provenance::CL2);
    CHECK_FALSE(rep.nominal_phi.empty());

    ScaleConfig strict = cfg;
    strict.bad_annuli_allowance = 0;
    CHECK_THROWS_AS(cl2_couple(T, strict, R, 2, 1.0), CertificateRefused);

    ScaleConfig broken = cfg;
    broken.theta = 0.99;  // now b > theta
    CHECK(broken.violations().size() == 1);
    CHECK_THROWS_AS(cl2_couple(T, broken, R, 2, 1.0), ConfigError);
}

TEST_CASE("clean rectangles need no bad-annulus allowance") {
    ElementaryRegion R = make_elementary_region({0, 0}, {4, 4});
    LatticeMatrix T = operator_on(R.sites, 23, 1e-6);
    // rational frequencies keep every |D| >= 1/4 on the region
    T.omega = {1.0, 0.5};
    T.sigma = 0.25 - T.offsets[0];
    ScaleConfig cfg;
    CL2Report rep = cl2_couple(T, cfg, R, 2, 1.0);
    CHECK(rep.worst_center_bad == 0);
    DirectInverse di = invert_direct(T, rep.result.cert.threshold);
    CHECK(check_certificate(rep.result.cert, di.G, T.region, 1).sound);
}

TEST_CASE("sigma scan of a diagonal operator matches the exact bad set") {
    LatticeMatrix T = operator_on(cube_region(1, 4), 1, 0.0);
    const double target = 20.0;
    SigmaScanReport rep = sigma_scan(T, -3.0, 3.0, SigmaTargets{0.0, 1, target}, 2e3, 1e-10);
    const auto exact = diagonal_bad_intervals(T, -3.0, 3.0, target);
    REQUIRE(rep.bad_intervals.size() == exact.size());
    for (std::size_t i = 0; i < exact.size(); ++i) {
        CHECK(rep.bad_intervals[i].first == doctest::Approx(exact[i].first).epsilon(1e-8));
        CHECK(rep.bad_intervals[i].second == doctest::Approx(exact[i].second).epsilon(1e-8));
    }
    CHECK(std::abs(rep.bad_measure - interval_measure(exact)) < 1e-8);
}
