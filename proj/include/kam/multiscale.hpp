#pragma once
/// \file multiscale.hpp
/// Multiscale machinery: elementary regions, exhaustions and annuli, the
/// resolvent-identity coupling algorithms (single-scale, two-scale and the
/// good/bad-annulus coupling), and sigma-scans of shifted operators.
///
/// All couplers share one engine.  Every site x receives a window W(x) with a
/// bound |G_W(x,w)| <= b_x(w); with |S(w,u)| <= eps_S e^{-rho|w-u|} and a path
/// pseudo-metric D on the region, the resolvent identity
///   G(x,y) = G_W(x,y) 1_W(y) - sum_{w in W, u notin W} G_W(x,w) S(w,u) G(u,y)
/// gives F <= A + q F for F = max |G(x,y)| e^{beta D(x,y)}, hence the
/// rigorous bound |G(x,y)| <= A/(1-q) e^{-beta D(x,y)} whenever q < 1.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kam/greens.hpp"

namespace kam {

// ---- elementary regions -------------------------------------------------

enum class RegionShape { FullRectangle, LShaped, LowerDimensional, Other };
const char* shape_name(RegionShape s);

/// R \ (R + z) for a block R = center + prod [-h_i, h_i], optionally clipped to an ambient box.
struct ElementaryRegion {
    Index center;
    std::vector<int> half_widths;
    std::optional<Index> shift;           ///< nullopt: the full block
    std::optional<std::pair<Index, Index>> ambient;  ///< inclusive box clip
    std::vector<Index> sites;             ///< realised set, lexicographic
    RegionShape shape = RegionShape::FullRectangle;
    int diameter = 0;
    /// Vertex of R + z lying inside R (L-shaped regions only).
    std::optional<Index> interior_corner;

    bool contains(const Index& k) const;
    int index_of(const Index& k) const;  ///< -1 if absent
};

ElementaryRegion make_elementary_region(const Index& center, const std::vector<int>& half_widths,
                                        std::optional<Index> shift = std::nullopt,
                                        std::optional<std::pair<Index, Index>> ambient = std::nullopt);
/// Region from an explicit site list (shape classified from the geometry).
ElementaryRegion region_from_sites(std::vector<Index> sites);

/// Q_M(m) intersected with a site set.
std::vector<Index> cube_intersect(const Index& m, int M, const ElementaryRegion& R);

// ---- exhaustions --------------------------------------------------------

struct Exhaustion {
    Index center;
    int M = 1;
    std::vector<std::vector<Index>> S;        ///< S_0 subset ... subset S_l (all != Lambda)
    std::vector<std::vector<Index>> annuli;   ///< A_0 = S_0, A_j = S_j \ S_{j-1}
    std::vector<Index> remainder;             ///< Lambda \ S_l
    int exceptional = -1;                     ///< annulus holding the interior corner (-1: none)
};

/// S_0 = Q_M(m) cap Lambda, S_j = union_{n in S_{j-1}} Q_{2M}(n) cap Lambda, l maximal with S_l != Lambda.
Exhaustion build_exhaustion(const ElementaryRegion& region, const Index& m, int M);

struct ExhaustionCheck {
    bool partition = true;        ///< annuli disjoint, union = S_l
    bool nested = true;           ///< S_{j-1} subset S_j
    bool nonadjacent_disjoint = true;  ///< Q_M(n), Q_M(n') disjoint for n in A_i, n' in A_j, |i-j| >= 2
};
/// Enumeration check of the exhaustion properties.
ExhaustionCheck check_exhaustion(const Exhaustion& ex, const ElementaryRegion& region);

// ---- scale configuration ----------------------------------------------------

struct ScaleConfig {
    double beta = 0.05;
    double b = 0.996;
    double theta = 0.997;
    double lambda = 1.002;
    double kappa = 0.005;
    double tau = 4.0;
    double rho = 3.0;
    double alpha0 = 1.0;
    /// Floor on the number of bad annuli tolerated per center; the asymptotic
    /// budget kappa M_t^theta / M is below one at desk scale.
    double bad_annuli_allowance = 0.0;
    /// Named violations of 0<b<theta<1, 1<lambda<2-theta, kappa<1e-2.
    std::vector<std::string> violations() const;
};

// ---- annulus classification ----------------------------------------------------

struct AnnulusClass {
    std::vector<bool> good;        ///< per annulus (remainder excluded)
    int bad_count = 0;
    std::vector<Index> bad_sites;  ///< sites whose cubes fail certification
};

/// Annulus A_j is good iff every n in it has Q_M(n) cap A_j and Q_M(n) cap Lambda
/// passing certify at (alpha_target, M^theta, e^{M^b}); the exceptional annulus is bad.
AnnulusClass classify_annuli(const LatticeMatrix& T, const ElementaryRegion& region, const Exhaustion& ex,
                             double alpha_target, double b, double theta, const GreensConfig& gcfg = {});

/// Site-level certification memo: whether Q_M(n) cap X passes, per window.
struct CubeVerdict {
    bool pass = false;
    double norm = 0.0;
    double alpha = 0.0;
};

// ---- coupling engine ----------------------------------------------------------

/// A window with its bound for one site.
struct SiteWindow {
    std::vector<Index> sites;  ///< W(x), contains x
    /// Bound on |G_W(x, w)|: either a certificate (norm, alpha beyond threshold)
    /// or explicit per-site values aligned with `sites`.
    std::optional<DecayCertificate> cert;
    std::vector<double> explicit_bound;
};

struct CouplingDiagnostics {
    double beta = 0.0;          ///< decay rate in the engine metric
    double q = 0.0;             ///< contraction factor at beta
    double A = 0.0;             ///< max window constant
    double C_hat = 0.0;         ///< A / (1 - q)
    double metric_deficit = 0.0;  ///< max (|x-y| - D(x,y))
    double eps_S = 0.0;         ///< off-diagonal size
    double rho = 0.0;
    // predictions of the asymptotic statements, for the report
    double nominal_alpha = 0.0;
    double nominal_norm = 0.0;
    bool nominal_alpha_met = false;
    bool nominal_norm_met = false;
    std::vector<std::string> notes;
};

struct CouplingResult {
    DecayCertificate cert;
    CouplingDiagnostics diag;
};

/// Runs the engine with the l-inf metric (zero-cost sites empty) or a path
/// metric in which steps into `free_sites` cost nothing.  Throws
/// CertificateRefused if no beta >= 0 gives q <= q_max.
CouplingResult couple_windows(const LatticeMatrix& T, const std::vector<SiteWindow>& windows, int threshold_out,
                              double beta_max, Provenance prov, const std::vector<Index>& free_sites = {},
                              double q_max = 0.1);

/// Single-scale coupling: windows U(m) with certificates for every site.
struct SiteCert {
    std::vector<Index> window;
    DecayCertificate cert;
};
CouplingResult cl1_couple(const LatticeMatrix& T, const std::map<Index, SiteCert>& site_certs, int M);

/// Two-scale coupling on [-N, N]^d: the central window [-K, K]^d for |x| <= K/2,
/// translated cubes (x + [-M0, M0]^d) cap Lambda elsewhere.
struct TwoScaleConfig {
    int N = 0, K = 0, M0 = 0;
    int threshold_out = 0;  ///< 0: use M0
};
CouplingResult two_scale_couple(const LatticeMatrix& T, const DecayCertificate& certK,
                                const std::map<Index, DecayCertificate>& certsM0, const TwoScaleConfig& cfg);

/// Good/bad-annulus coupling at scale M_t (region diameter) from scale M.
struct CL2Report {
    CouplingResult result;
    int worst_center_bad = 0;       ///< most bad annuli over centers
    double bad_budget = 0.0;        ///< max(kappa M_t^theta / M, allowance)
    std::vector<std::pair<bool, int>> runs;  ///< (good?, annuli) runs of the worst center
    std::vector<double> nominal_phi;  ///< multiplier recursion of the worst center
    double nominal_alpha = 0.0;       ///< beta (1 - 15 kappa) times the previous rate
};
CL2Report cl2_couple(const LatticeMatrix& T, const ScaleConfig& cfg, const ElementaryRegion& region, int M,
                     double alpha_prev, const GreensConfig& gcfg = {});

// ---- sigma scan ---------------------------------------------------------------

struct SigmaTargets {
    double alpha_target = 0.0;
    int threshold = 0;
    double norm_target = 1.0;
};

struct SigmaSample {
    double sigma = 0.0;
    bool pass = true;
    double norm = 0.0;
    double alpha = 0.0;
};

struct SigmaScanReport {
    double lo = 0.0, hi = 0.0, step = 0.0;
    std::vector<SigmaSample> samples;
    std::vector<std::pair<double, double>> bad_intervals;  ///< refined endpoints
    double bad_measure = 0.0;
    double bad_fraction = 0.0;
    double resolution = 0.0;  ///< endpoint accuracy after refinement
};

/// Scans sigma over [lo, hi] with `points_per_unit` samples per unit length,
/// certifying G of T with diagonal shift sigma; failing runs are refined by
/// bisection to `refine_tol`.
SigmaScanReport sigma_scan(const LatticeMatrix& T, double lo, double hi, const SigmaTargets& targets,
                           double points_per_unit = 1e4, double refine_tol = 1e-9, const GreensConfig& gcfg = {});

/// Exact bad set of a pure-diagonal operator: union of |sigma + D_i| < 1/norm_target.
std::vector<std::pair<double, double>> diagonal_bad_intervals(const LatticeMatrix& T, double lo, double hi,
                                                              double norm_target);
double interval_measure(const std::vector<std::pair<double, double>>& iv);

}  // namespace kam
