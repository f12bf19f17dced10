#pragma once
/// \file atlas.hpp
/// Parameter-space bookkeeping: Diophantine and first-Melnikov predicates,
/// nested box pavings of the parameter domain and measure estimates.

#include <cstdint>
#include <functional>
#include <vector>

#include "kam/fourier.hpp"

namespace kam {

/// Polynomial map xi -> omega(xi).  Each output component is a sum of
/// monomials coeff * prod_j xi_j^{exponent_j}.
struct OmegaMap {
    struct Term {
        double coeff = 0.0;
        std::vector<int> exponents;
    };
    int dim = 0;
    std::vector<std::vector<Term>> components;

    /// omega(xi) = xi.
    static OmegaMap identity(int d);
    RealVec operator()(const RealVec& xi) const;
    /// Bound on sup |d omega_i / d xi_j| (l1 over j, max over i) on the box [lo, hi].
    double lipschitz(const RealVec& lo, const RealVec& hi) const;
};

struct DivisorReport {
    bool ok = true;
    Index worst_k;          ///< lattice vector of the smallest margin
    int j1 = -1, j2 = -1;   ///< normal indices of the worst combination (Melnikov)
    double worst_value = 0.0;   ///< |divisor| at the worst k
    double worst_margin = 0.0;  ///< |divisor| / floor at the worst k (ok iff > 1)
};

/// Floor gamma |k|_inf^{-tau}, with the k = 0 convention floor = gamma.
double divisor_floor(const Index& k, double gamma, double tau);

/// |<k,w>| > gamma |k|^{-tau} for all 0 < |k|_inf <= N (exhaustive scan).
DivisorReport diophantine_ok(const RealVec& omega, int N, double gamma, double tau);
/// |<k,w> + Omega_j| (or + Omega_j1 + Omega_j2 when doubled) > gamma |k|^{-tau} for all |k|_inf <= N.
DivisorReport melnikov1_ok(const RealVec& omega, const RealVec& Omega, int N, double gamma, double tau,
                           bool doubled);

struct ParameterBox {
    RealVec center;
    double half_width = 0.0;
    int level = 0;
    int parent = -1;  ///< index into the previous level's boxes (-1 at the root)
};

struct ParameterAtlas {
    int level = 0;
    RealVec lo, hi;  ///< ambient box
    double half_width = 0.0;
    std::vector<ParameterBox> boxes;

    double ambient_volume() const;
    double volume() const;
};

/// Box half-width A^{-l^{C3}} / 2 at level l.
double level_half_width(double A, double C3, int level);

/// Root atlas: a single box covering [lo, hi] (must be a cube).
ParameterAtlas root_atlas(const RealVec& lo, const RealVec& hi);

using BoxPredicate = std::function<bool(const RealVec&)>;

struct PavingResult {
    ParameterAtlas atlas;
    double removed_measure = 0.0;
    std::size_t kept = 0, dropped = 0;
    int children_per_axis = 0;
};

/// Tiles every box of `atlas` into children of half-width `child_half_width`
/// (rounded so that the children exactly tile the parent) and keeps a child
/// iff `keep` holds at its center and all 2^d corners.
PavingResult pave_and_filter(const ParameterAtlas& atlas, int next_level, double child_half_width,
                             const BoxPredicate& keep);

/// Surviving volume of `atlas` relative to the ambient volume of `root`.
double measure_fraction(const ParameterAtlas& atlas, const ParameterAtlas& root);

/// Structural checks: pairwise disjointness and parent containment.
struct AtlasCheck {
    bool disjoint = true;
    bool nested = true;
};
AtlasCheck check_atlas(const ParameterAtlas& child, const ParameterAtlas& parent);

struct MonteCarloEstimate {
    double excluded_fraction = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};
/// Fraction of uniformly sampled points of the ambient box of `atlas`
/// failing `keep` (seeded, deterministic).
MonteCarloEstimate monte_carlo_excluded(const RealVec& lo, const RealVec& hi, const BoxPredicate& keep,
                                        std::size_t samples, std::uint64_t seed);

/// The three exclusion predicates of the initial step at parameter xi:
/// Diophantine, first Melnikov and doubled Melnikov.
struct ExclusionSpec {
    OmegaMap omega_map;
    RealVec Omega;
    int N = 10;
    double gamma = 1e-3;
    double tau = 4.0;
    bool diophantine = true, melnikov = true, doubled = true;
};
bool exclusion_keep(const ExclusionSpec& spec, const RealVec& xi, DivisorReport* why = nullptr);

}  // namespace kam
