#pragma once
/// \file greens.hpp
/// Green's functions of truncated lattice operators: direct inversion with
/// measured decay certificates, certificate checking, the Neumann
/// perturbation transfer, and the level-to-level variation bound.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "kam/homological.hpp"

namespace kam {

struct KamState;

enum class Provenance { Direct, Neumann, CL1, CL2, TwoScale };
const char* provenance_name(Provenance p);

/// Which matrix a certificate talks about.
struct RegionDescriptor {
    std::string label;
    int sites = 0;
    int block = 1;
    int diameter = 0;  ///< largest l-inf distance between two sites
};
RegionDescriptor describe_region(const LatticeMatrix& T, std::string label = {});

/// ||G|| <= norm_bound and |G(x,y)| <= e^{-alpha |x-y|} whenever |x-y| > threshold,
/// where |G(x,y)| is the largest entry of the block between sites x and y and
/// |x-y| the l-inf lattice distance.
struct DecayCertificate {
    double norm_bound = 0.0;
    double alpha = 0.0;
    int threshold = 0;
    double b_exponent = 0.0;        ///< exponent b of the e^{N^b} norm envelope (recorded only)
    RegionDescriptor region;
    Provenance provenance = Provenance::Direct;
    double compounded_constant = 1.0;  ///< product of perturbative prefactors absorbed so far
    std::vector<std::string> notes;
};

struct GreensConfig {
    double alpha_cap = 50.0;        ///< decay rate stored when no pair lies beyond the threshold
    double rcond_floor = 1e-13;     ///< reciprocal condition number below which inversion is refused
    double norm_margin = 1e-6;      ///< norm_bound = measured norm * (1 + margin)
    double alpha_guard = 1e-9;      ///< subtracted from the fitted rate
};

struct DirectInverse {
    Eigen::MatrixXcd G;
    DecayCertificate cert;
    double rcond = 0.0;
    double measured_norm = 0.0;
};

/// Block maximum |G(x,y)| for sites a, b.
double block_abs(const Eigen::MatrixXcd& G, int block, int a, int b);
/// Spectral norm of a dense matrix.
double spectral_norm(const Eigen::MatrixXcd& G);
/// Largest l-inf distance between sites.
int region_diameter(const std::vector<Index>& sites);

/// Dense inverse of T on its region plus the certificate measured from it.
DirectInverse invert_direct(const LatticeMatrix& T, int threshold, const GreensConfig& cfg = {});

/// Rate fitted from an inverse: inf over pairs beyond `threshold` of -log|G|/|x-y|.
double fit_decay_rate(const Eigen::MatrixXcd& G, const std::vector<Index>& sites, int block, int threshold,
                      const GreensConfig& cfg = {});

struct Offender {
    Index x, y;
    double ratio = 0.0;  ///< |G(x,y)| e^{alpha |x-y|}
};

struct CertifyResult {
    bool pass = true;
    bool norm_ok = true;
    double measured_norm = 0.0;
    std::vector<Offender> worst;  ///< up to 10, worst first
};

/// Checks |G(x,y)| <= e^{-alpha_target |x-y|} beyond `threshold` and ||G|| <= norm_target.
CertifyResult certify(const Eigen::MatrixXcd& G, const std::vector<Index>& sites, int block, double alpha_target,
                      int threshold, double norm_target);

struct SoundnessReport {
    bool sound = true;
    int violations = 0;
    double worst_ratio = 0.0;      ///< max |G| e^{alpha d} beyond the threshold (sound iff <= 1)
    double norm_ratio = 0.0;       ///< measured norm / norm_bound
};
/// Validates a certificate against the true inverse (tolerance 1e-9 relative).
SoundnessReport check_certificate(const DecayCertificate& cert, const Eigen::MatrixXcd& G,
                                  const std::vector<Index>& sites, int block);

/// Bound |(T' - T)(x,y)| <= bound_eps e^{-rho |x-y|}.
struct Perturbation {
    double bound_eps = 0.0;
    double rho = 0.0;
};

struct NeumannOptions {
    bool smallness_gate = true;   ///< also require bound_eps < e^{-4 rho threshold}
};

/// Certificate for T' = T + Delta on the same region from one for T.
/// Output: norm doubled, rate min(alpha, rho) - 2 ln 2 / threshold.
/// Throws CertificateRefused when a smallness gate fails.
DecayCertificate neumann_transfer(const DecayCertificate& cert, const Perturbation& delta,
                                  const NeumannOptions& opt = {});

/// max over region pairs of |(T' - T)(x,y)| e^{s|x-y|} (s = T'.decay_s).
Perturbation variation_delta(const LatticeMatrix& T, const LatticeMatrix& Tprime);

struct VariationReport {
    Perturbation delta;
    double envelope = 0.0;          ///< A^{l'} eps_l^{1/10}
    double measured_constant = 0.0; ///< bound_eps / envelope
};
/// Variation between the operators of two iteration levels on the cube [-N, N]^d.
VariationReport variation_delta(const KamState& state_l, const KamState& state_lp, int N, double s_lp, double A,
                                double eps_l);

}  // namespace kam
