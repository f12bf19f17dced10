#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kam/atlas.hpp"

using namespace kam;

TEST_CASE("omega map evaluation and Lipschitz bound") {
    OmegaMap id = OmegaMap::identity(2);
    CHECK(id({0.3, -1.0}) == RealVec{0.3, -1.0});
    CHECK(id.lipschitz({0, 0}, {1, 1}) == doctest::Approx(1.0));
    OmegaMap q;
    q.dim = 1;
    q.components = {{{2.0, {2}}, {1.0, {0}}}};  // 2 xi^2 + 1
    CHECK(q({3.0})[0] == doctest::Approx(19.0));
    CHECK(q.lipschitz({-1.0}, {2.0}) >= 8.0);
}

TEST_CASE("divisor predicates find the worst small divisor") {
    const double phi = 0.5 * (1 + std::sqrt(5.0));
    DivisorReport r = diophantine_ok({1.0, phi}, 8, 1e-2, 2.0);
    CHECK(r.ok);
    CHECK(r.worst_margin > 1.0);
    DivisorReport bad = diophantine_ok({1.0, 1.5}, 4, 1e-3, 2.0);  // k = (3, -2) resonant
    CHECK_FALSE(bad.ok);
    CHECK(std::abs(bad.worst_value) < 1e-12);
    DivisorReport m = melnikov1_ok({1.0, phi}, {0.5}, 4, 1e-3, 2.0, false);
    CHECK(m.ok);
    DivisorReport mb = melnikov1_ok({1.0, phi}, {1.0 - phi}, 4, 1e-3, 2.0, false);  // k = (0, 1)
    CHECK_FALSE(mb.ok);
    CHECK(mb.j1 == 0);
    DivisorReport dd = melnikov1_ok({1.0, phi}, {0.5, 0.25}, 4, 1e-3, 2.0, true);  // 0.5 + 0.5 - 1 = 0
    CHECK_FALSE(dd.ok);
    CHECK(divisor_floor(Index{0, 0}, 0.1, 3.0) == 0.1);
    CHECK(divisor_floor(Index{2, -1}, 0.1, 3.0) == doctest::Approx(0.1 / 8));
}

TEST_CASE("paving tiles, filters and nests") {
    ParameterAtlas root = root_atlas({0.0, 0.0}, {1.0, 1.0});
    CHECK(root.volume() == doctest::Approx(1.0));
    PavingResult all = pave_and_filter(root, 1, 0.125, [](const RealVec&) { return true; });
    CHECK(all.children_per_axis == 4);
    CHECK(all.atlas.boxes.size() == 16);
    CHECK(measure_fraction(all.atlas, root) == doctest::Approx(1.0));
    // drop everything touching the disc of radius 0.3 around the origin
    PavingResult cut = pave_and_filter(all.atlas, 2, 0.0625, [](const RealVec& x) {
        return x[0] * x[0] + x[1] * x[1] > 0.09;
    });
    CHECK(cut.dropped > 0);
    CHECK(cut.kept + cut.dropped == 64);
    CHECK(measure_fraction(cut.atlas, root) < 1.0);
    CHECK(cut.removed_measure == doctest::Approx(cut.dropped * 0.125 * 0.125));
    AtlasCheck chk = check_atlas(cut.atlas, all.atlas);
    CHECK(chk.disjoint);
    CHECK(chk.nested);
    CHECK(level_half_width(10.0, 4.0, 1) == doctest::Approx(0.05));
}

TEST_CASE("Monte Carlo exclusion is seeded and unbiased on a known set") {
    auto keep = [](const RealVec& x) { return x[0] > 0.25; };
    MonteCarloEstimate a = monte_carlo_excluded({0.0}, {1.0}, keep, 20000, 7);
    MonteCarloEstimate b = monte_carlo_excluded({0.0}, {1.0}, keep, 20000, 7);
    CHECK(a.excluded_fraction == b.excluded_fraction);
    CHECK(std::abs(a.excluded_fraction - 0.25) < 5 * a.std_error);
}

TEST_CASE("exclusion predicate combines all three conditions") {
    ExclusionSpec spec;
    spec.omega_map = OmegaMap::identity(1);
    spec.Omega = {1.7071067811865475};
    spec.N = 8;
    spec.gamma = 1e-3;
    spec.tau = 3.0;
    CHECK(exclusion_keep(spec, {1.6180339887498949}));
    DivisorReport why;
    CHECK_FALSE(exclusion_keep(spec, {-spec.Omega[0]}, &why));
    CHECK_FALSE(why.ok);
}
