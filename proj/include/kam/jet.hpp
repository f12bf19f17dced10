#pragma once
/// \file jet.hpp
/// Taylor-Fourier polynomials in (y, z, zbar) with Fourier-series
/// coefficients in x: Poisson brackets, weighted vector-field norms,
/// low/high splitting, reality checks and the time-1 Lie series.
///
/// Conventions.  A monomial signature (a, b, c) stands for
/// y^a z^b zbar^c; its weighted degree is 2|a| + |b| + |c|.  The Poisson
/// bracket is {F,G} = <F_x,G_y> - <F_y,G_x> + i<F_z,G_zbar> - i<F_zbar,G_z>
/// and the Hamiltonian vector field is X_H = (H_y, -H_x, i H_zbar, -i H_z).

#include <map>
#include <vector>

#include "kam/fourier.hpp"

namespace kam {

/// Monomial exponents (a in N^d, b in N^n, c in N^n).
struct Signature {
    std::vector<int> a, b, c;
    auto operator<=>(const Signature&) const = default;
    int weighted_degree() const;
};

Signature make_signature(int d, int n);

class HamiltonianJet {
public:
    HamiltonianJet() = default;
    /// Empty jet; `cap` bounds the Fourier cutoff of stored coefficients
    /// (negative = unbounded).
    HamiltonianJet(int d, int n, int max_degree = 4, int cap = -1);

    int d() const { return d_; }
    int n() const { return n_; }
    int max_degree() const { return max_degree_; }
    int cap() const { return cap_; }
    void set_cap(int cap) { cap_ = cap; }

    /// Norm weights (s, r) at which discarded content is charged to the remainder.
    void set_norm_weights(double s, double r) { ref_s_ = s, ref_r_ = r; }
    double ref_s() const { return ref_s_; }
    double ref_r() const { return ref_r_; }

    /// Scalar "unrepresented norm": a vector-field norm bound of content
    /// dropped by degree or cutoff truncation; added to every vf_norm.
    double remainder() const { return remainder_; }
    void add_remainder(double v) { remainder_ += v; }
    void set_remainder(double v) { remainder_ = v; }

    const std::map<Signature, FourierSeries>& terms() const { return terms_; }
    /// Coefficient of a monomial; nullptr if absent.
    const FourierSeries* find(const Signature& s) const;
    /// Coefficient of a monomial (zero series of cutoff 0 if absent).
    FourierSeries coeff(const Signature& s) const;
    /// Add a coefficient to a monomial (degree and cutoff caps enforced,
    /// dropped content charged to the remainder).
    void add(const Signature& s, const FourierSeries& f);
    /// Replace a monomial coefficient.
    void set(const Signature& s, const FourierSeries& f);
    void erase(const Signature& s) { terms_.erase(s); }
    /// Remove monomials whose coefficients are identically zero.
    void prune();

    HamiltonianJet& operator+=(const HamiltonianJet& o);
    HamiltonianJet& operator-=(const HamiltonianJet& o);
    HamiltonianJet& operator*=(cplx a);

private:
    int d_ = 0;
    int n_ = 0;
    int max_degree_ = 4;
    int cap_ = -1;
    double ref_s_ = 0.0;
    double ref_r_ = 1.0;
    double remainder_ = 0.0;
    std::map<Signature, FourierSeries> terms_;
};

HamiltonianJet operator+(HamiltonianJet a, const HamiltonianJet& b);
HamiltonianJet operator-(HamiltonianJet a, const HamiltonianJet& b);

/// Monomial builders.
Signature sig_y(int d, int n, int i);            ///< y_i
Signature sig_z(int d, int n, int j);            ///< z_j
Signature sig_zbar(int d, int n, int j);         ///< zbar_j
Signature sig_zzbar(int d, int n, int j, int k); ///< z_j zbar_k

struct JetSplit {
    HamiltonianJet low;
    HamiltonianJet high;
};

/// {F, G} with symbolic differentiation in (y, z, zbar) and Fourier differentiation in x.
HamiltonianJet poisson_bracket(const HamiltonianJet& F, const HamiltonianJet& G);
/// Upper bound for the weighted norm of X_P on D(s, r), including the remainder.
double vf_norm(const HamiltonianJet& P, double s, double r);
/// Low part: weighted degree <= 2.  High part: the rest.
JetSplit split_low_high(const HamiltonianJet& P);

struct RealityReport {
    bool ok = true;
    double worst = 0.0;
};
/// Checks conj(coeff(a,b,c)(k)) = coeff(a,c,b)(-k) within `tol`.
RealityReport check_reality(const HamiltonianJet& P, double tol = 1e-12);
/// Average of P with its conjugate image; passes check_reality exactly.
HamiltonianJet symmetrize_reality(const HamiltonianJet& P);

struct LieResult {
    HamiltonianJet value;              ///< sum_{j<=order} ad_F^j H / j!
    std::vector<HamiltonianJet> terms; ///< the individual terms ad_F^j H / j!, j = 0..order
    double tail_bound = 0.0;           ///< vf_norm of the first omitted term
    std::vector<double> term_norms;    ///< vf_norm of each term (at the jet weights)
};

/// Time-1 Lie series H o X_F^1 = sum_j ad_F^j H / j! with ad_F H = {H, F}.
/// Throws std::runtime_error when successive term norms grow (non-convergence).
LieResult lie_transform(const HamiltonianJet& H, const HamiltonianJet& F, int order, double s, double r);

// ---- coefficient extraction (components at y = z = zbar = 0) ----------

/// R^x: the coefficient of the constant monomial (scalar series).
FourierSeries comp_x(const HamiltonianJet& P);
/// R^y: d x 1 series of y_i coefficients.
FourierSeries comp_y(const HamiltonianJet& P);
/// R^z: n x 1 series of z_j coefficients.
FourierSeries comp_z(const HamiltonianJet& P);
/// R^zbar: n x 1 series of zbar_j coefficients.
FourierSeries comp_zbar(const HamiltonianJet& P);
/// Symmetric n x n matrix S with <S z, z> equal to the zz part.
FourierSeries comp_zz(const HamiltonianJet& P);
/// Symmetric n x n matrix with <S zbar, zbar> equal to the zbar zbar part.
FourierSeries comp_zbzb(const HamiltonianJet& P);
/// n x n matrix M with M_{jk} the coefficient of z_j zbar_k.
FourierSeries comp_zzbar(const HamiltonianJet& P);

/// Jet builders from component series (inverse of the extractors).
void add_comp_x(HamiltonianJet& J, const FourierSeries& f);
void add_comp_y(HamiltonianJet& J, const FourierSeries& v);
void add_comp_z(HamiltonianJet& J, const FourierSeries& v);
void add_comp_zbar(HamiltonianJet& J, const FourierSeries& v);
/// Adds <S z, z> for a (not necessarily symmetric) matrix S.
void add_comp_zz(HamiltonianJet& J, const FourierSeries& S);
/// Adds <S zbar, zbar>.
void add_comp_zbzb(HamiltonianJet& J, const FourierSeries& S);
/// Adds sum_{jk} M_{jk} z_j zbar_k.
void add_comp_zzbar(HamiltonianJet& J, const FourierSeries& M);

}  // namespace kam
