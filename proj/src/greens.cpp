#include "kam/greens.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "kam/driver.hpp"
#include "kam/errors.hpp"

namespace kam {

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Direct: return "direct";
        case Provenance::Neumann: return "neumann";
        case Provenance::CL1: return "cl1";
        case Provenance::CL2: return "cl2";
        case Provenance::TwoScale: return "two_scale";
    }
    return "unknown";
}

int region_diameter(const std::vector<Index>& sites) {
    if (sites.empty()) return 0;
    // l-inf diameter = max over axes of the coordinate spread.
    const std::size_t d = sites.front().size();
    int diam = 0;
    for (std::size_t i = 0; i < d; ++i) {
        int lo = sites.front()[i], hi = lo;
        for (const auto& k : sites) lo = std::min(lo, k[i]), hi = std::max(hi, k[i]);
        diam = std::max(diam, hi - lo);
    }
    return diam;
}

RegionDescriptor describe_region(const LatticeMatrix& T, std::string label) {
    RegionDescriptor r;
    r.label = std::move(label);
    r.sites = T.sites();
    r.block = T.block;
    r.diameter = region_diameter(T.region);
    return r;
}

double block_abs(const Eigen::MatrixXcd& G, int block, int a, int b) {
    double m = 0.0;
    for (int i = 0; i < block; ++i)
        for (int j = 0; j < block; ++j) m = std::max(m, std::abs(G(a * block + i, b * block + j)));
    return m;
}

double spectral_norm(const Eigen::MatrixXcd& G) {
    if (G.size() == 0) return 0.0;
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(G);
    return svd.singularValues()(0);
}

double fit_decay_rate(const Eigen::MatrixXcd& G, const std::vector<Index>& sites, int block, int threshold,
                      const GreensConfig& cfg) {
    double rate = std::numeric_limits<double>::infinity();
    const int S = static_cast<int>(sites.size());
    for (int a = 0; a < S; ++a)
        for (int b = 0; b < S; ++b) {
            const int dist = norm_inf(sub(sites[a], sites[b]));
            if (dist <= threshold) continue;
            const double g = block_abs(G, block, a, b);
            if (g == 0.0) continue;
            rate = std::min(rate, -std::log(g) / dist);
        }
    if (!std::isfinite(rate)) return cfg.alpha_cap;
    return std::min(cfg.alpha_cap, rate - cfg.alpha_guard);
}

DirectInverse invert_direct(const LatticeMatrix& T, int threshold, const GreensConfig& cfg) {
    const Eigen::MatrixXcd A = T.dense();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
    double rc = lu.rcond();
    if (A.rows() > 0) {
        const auto piv = lu.matrixLU().diagonal().cwiseAbs();
        rc = std::min(rc, piv.minCoeff() / std::max(piv.maxCoeff(), 1e-300));
    }
    if (!(rc >= cfg.rcond_floor)) {
        std::ostringstream os;
        os << "invert_direct: reciprocal condition estimate " << rc << " below " << cfg.rcond_floor;
        throw NearSingular(os.str(), rc);
    }
    DirectInverse out;
    out.G = lu.inverse();
    out.rcond = rc;
    out.measured_norm = spectral_norm(out.G);
    DecayCertificate& c = out.cert;
    c.norm_bound = out.measured_norm * (1.0 + cfg.norm_margin);
    c.alpha = fit_decay_rate(out.G, T.region, T.block, threshold, cfg);
    c.threshold = threshold;
    c.region = describe_region(T, "direct");
    c.provenance = Provenance::Direct;
    return out;
}

CertifyResult certify(const Eigen::MatrixXcd& G, const std::vector<Index>& sites, int block, double alpha_target,
                      int threshold, double norm_target) {
    CertifyResult r;
    r.measured_norm = spectral_norm(G);
    r.norm_ok = r.measured_norm <= norm_target;
    r.pass = r.norm_ok;
    const int S = static_cast<int>(sites.size());
    std::vector<Offender> all;
    for (int a = 0; a < S; ++a)
        for (int b = 0; b < S; ++b) {
            const int dist = norm_inf(sub(sites[a], sites[b]));
            if (dist <= threshold) continue;
            const double ratio = block_abs(G, block, a, b) * std::exp(alpha_target * dist);
            if (ratio > 1.0) r.pass = false;
            all.push_back(Offender{sites[a], sites[b], ratio});
        }
    const std::size_t keep = std::min<std::size_t>(10, all.size());
    std::partial_sort(all.begin(), all.begin() + keep, all.end(),
                      [](const Offender& p, const Offender& q) { return p.ratio > q.ratio; });
    all.resize(keep);
    r.worst = std::move(all);
    return r;
}

SoundnessReport check_certificate(const DecayCertificate& cert, const Eigen::MatrixXcd& G,
                                  const std::vector<Index>& sites, int block) {
    constexpr double tol = 1e-9;
    SoundnessReport r;
    const double nrm = spectral_norm(G);
    r.norm_ratio = cert.norm_bound > 0 ? nrm / cert.norm_bound : std::numeric_limits<double>::infinity();
    if (r.norm_ratio > 1.0 + tol) {
        r.sound = false;
        ++r.violations;
    }
    const int S = static_cast<int>(sites.size());
    for (int a = 0; a < S; ++a)
        for (int b = 0; b < S; ++b) {
            const int dist = norm_inf(sub(sites[a], sites[b]));
            if (dist <= cert.threshold) continue;
            const double ratio = block_abs(G, block, a, b) * std::exp(cert.alpha * dist);
            r.worst_ratio = std::max(r.worst_ratio, ratio);
            if (ratio > 1.0 + tol) {
                r.sound = false;
                ++r.violations;
            }
        }
    return r;
}

DecayCertificate neumann_transfer(const DecayCertificate& cert, const Perturbation& delta, const NeumannOptions& opt) {
    if (cert.threshold < 1) throw CertificateRefused("neumann_transfer: threshold must be >= 1");
    const double thr = cert.threshold;
    const double eps = delta.bound_eps;
    if (opt.smallness_gate && !(eps < std::exp(-4.0 * delta.rho * thr))) {
        std::ostringstream os;
        os << "neumann_transfer: smallness gate eps < e^{-4 rho threshold} fails (eps=" << eps
           << ", bound=" << std::exp(-4.0 * delta.rho * thr) << ")";
        throw CertificateRefused(os.str());
    }
    // Explicit Neumann-series bound: with gamma = min(alpha, rho),
    // |G(x,y)| <= C_G e^{-gamma|x-y|} for all pairs, and each further factor
    // of Delta G costs kappa = C_G eps (n|U|)^2.
    const double gamma = std::min(cert.alpha, delta.rho);
    const double CG = std::max(1.0, cert.norm_bound * std::exp(gamma * thr));
    const double nU = static_cast<double>(cert.region.block) * cert.region.sites;
    const double kappa = CG * eps * nU * nU;
    if (!(kappa < 1.0) || !(CG * kappa / (1.0 - kappa) <= 1.0)) {
        std::ostringstream os;
        os << "neumann_transfer: series bound C_G kappa/(1-kappa) = "
           << (kappa < 1 ? CG * kappa / (1 - kappa) : std::numeric_limits<double>::infinity())
           << " exceeds 1 (C_G=" << CG << ", kappa=" << kappa << ")";
        throw CertificateRefused(os.str());
    }
    DecayCertificate out = cert;
    out.norm_bound = 2.0 * cert.norm_bound;
    out.alpha = gamma - 2.0 * std::log(2.0) / thr;
    out.provenance = Provenance::Neumann;
    out.compounded_constant = 2.0 * cert.compounded_constant;
    return out;
}

Perturbation variation_delta(const LatticeMatrix& T, const LatticeMatrix& Tp) {
    if (T.block != Tp.block || T.d != Tp.d) throw std::invalid_argument("variation_delta: operator shapes differ");
    Perturbation p;
    p.rho = Tp.decay_s;
    const int n = T.block;
    // Diagonal part of the difference on the region (k = k').
    const Index zero(T.d, 0);
    for (const auto& k : T.region)
        for (int j = 0; j < n; ++j)
            for (int jj = 0; jj < n; ++jj) {
                cplx v = Tp.symbol.get(zero, j, jj) - T.symbol.get(zero, j, jj);
                if (j == jj) v += Tp.diag(j, k) - T.diag(j, k);
                p.bound_eps = std::max(p.bound_eps, std::abs(v));
            }
    // Off-diagonal part: symbol difference at kappa = k - k' != 0 realised in the region.
    const int diam = region_diameter(T.region);
    const int N = std::min(diam, std::max(T.symbol.cutoff(), Tp.symbol.cutoff()));
    FourierSeries shape(T.d, N);
    for (std::size_t q = 0; q < shape.num_modes(); ++q) {
        const Index kap = shape.mode(q);
        if (norm_inf(kap) == 0) continue;
        const double w = std::exp(p.rho * norm_inf(kap));
        for (int j = 0; j < n; ++j)
            for (int jj = 0; jj < n; ++jj)
                p.bound_eps = std::max(p.bound_eps, std::abs(Tp.symbol.get(kap, j, jj) - T.symbol.get(kap, j, jj)) * w);
    }
    return p;
}

VariationReport variation_delta(const KamState& a, const KamState& b, int N, double s_lp, double A, double eps_l) {
    if (!(a.level < b.level)) throw std::invalid_argument("variation_delta: levels must increase");
    const int n = static_cast<int>(a.Omega.size());
    const FourierSeries zero(static_cast<int>(a.omega.size()), 0, n, n);
    const LatticeMatrix Ta = build_T(a.omega, a.Omega, a.B, zero, N, s_lp);
    const LatticeMatrix Tb = build_T(b.omega, b.Omega, b.B, zero, N, s_lp);
    VariationReport r;
    r.delta = variation_delta(Ta, Tb);
    r.envelope = std::pow(A, b.level) * std::pow(eps_l, 0.1);
    r.measured_constant = r.delta.bound_eps / r.envelope;
    return r;
}

}  // namespace kam
