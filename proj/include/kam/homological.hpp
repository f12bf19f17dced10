#pragma once
/// \file homological.hpp
/// Lattice operators T = D + S on {1..block} x Lambda and the four classes of
/// homological equations of one KAM step.
///
/// Matrix convention: the normal-form matrix M(x) is stored so that the
/// quadratic term reads sum_{jk} M_{jk} z_j zbar_k.  With this convention the
/// operator acting on F^z has symbol M and the operator acting on the
/// vectorised F^{zz} (index (i,j) -> i*n + j) has symbol
/// M_{ii'} delta_{jj'} + delta_{ii'} M_{jj'}.

#include <Eigen/Dense>
#include <vector>

#include "kam/errors.hpp"
#include "kam/fourier.hpp"
#include "kam/jet.hpp"

namespace kam {

/// Lattice points of a cube center + [-M, M]^d, enumerated in the same
/// lexicographic order as FourierSeries modes.
std::vector<Index> cube_region(const Index& center, int M);
/// [-N, N]^d.
std::vector<Index> cube_region(int d, int N);

struct LatticeMatrix {
    int d = 1;
    int block = 1;               ///< n for T, n^2 for the bold operator
    std::vector<Index> region;   ///< lattice sites
    RealVec omega;               ///< tangent frequency in the diagonal
    RealVec offsets;             ///< Omega_j (or Omega_i + Omega_j), length block
    double sigma = 0.0;          ///< extra diagonal shift
    FourierSeries symbol;        ///< block x block Toeplitz symbol
    double decay_c = 0.0;        ///< measured: |S(x,y)| <= decay_c e^{-decay_s |x-y|}
    double decay_s = 1.0;

    int sites() const { return static_cast<int>(region.size()); }
    int size() const { return block * sites(); }
    /// D(j, k) = offsets_j + <k, omega> + sigma.
    double diag(int j, const Index& k) const { return offsets[j] + dot(k, omega) + sigma; }
    /// Matrix entry between (site a, component j) and (site b, component jj).
    cplx entry(int a, int j, int b, int jj) const;
    /// Dense realisation, row index site * block + component.
    Eigen::MatrixXcd dense() const;
    /// Same operator restricted to a subset of its sites (indices into region).
    LatticeMatrix restrict_to(const std::vector<Index>& sub) const;
    /// Same operator with a different site set (Toeplitz extension).
    LatticeMatrix on_region(std::vector<Index> sites) const;
};

/// Largest |symbol(k)| e^{s|k|_inf} over k != 0 (the off-diagonal constant c).
double symbol_decay_constant(const FourierSeries& symbol, double s);

/// T = D + S with D(j,k) = Omega_j + <k,w> and symbol B + Rzz on [-N,N]^d.
LatticeMatrix build_T(const RealVec& omega, const RealVec& Omega, const FourierSeries& B,
                      const FourierSeries& Rzz, int N, double decay_s = 1.0);
/// Bold operator on the vectorised n x n unknown.
LatticeMatrix build_boldT(const RealVec& omega, const RealVec& Omega, const FourierSeries& B,
                          const FourierSeries& Rzz, int N, double decay_s = 1.0);

/// Divisor floor gamma * |k|_inf^{-tau} for k != 0.
struct DivisorFloor {
    double gamma = 0.0;
    double tau = 0.0;
    double at(const Index& k) const;
};

struct HomologicalSolution {
    FourierSeries Fx, Fy, Fz, Fzbar, Fzz, Fzbzb;
    RealVec freq_shift;          ///< hat R(0): the tangent frequency shift
    FourierSeries B_update;      ///< B_+ - B
    bool has_x = false, has_y = false, has_z = false, has_zz = false;
    bool mean_dropped = false;   ///< R^x had a nonzero mean that was removed
    int N = 0;
};

/// F^x with dir_derivative(F^x, w) = truncate(R^x, N) - mean.
FourierSeries solve_hx(const FourierSeries& Rx, const RealVec& omega, int N, const DivisorFloor& floor,
                       bool* mean_dropped = nullptr);
/// Solves T F = -i E on the cube of T; returns the n x 1 series F^z.
FourierSeries solve_hz(const LatticeMatrix& T, const FourierSeries& E, double rcond_floor = 1e-13);
/// Returns (F^y, hat R(0)).
std::pair<FourierSeries, RealVec> solve_hy(const FourierSeries& R, const RealVec& omega, int N,
                                           const DivisorFloor& floor);
/// Solves the bold system for the symmetric n x n series F^{zz}.
FourierSeries solve_hzz(const LatticeMatrix& boldT, const FourierSeries& S, double rcond_floor = 1e-13);

enum class RhsStage { E, Ebar, R, S, Sbar };

/// Right-hand sides of the z, zbar, y, zz and zbar-zbar equations, assembled
/// from the low part of P (R^z, ...) and the y/z-derivatives of its high part.
FourierSeries assemble_rhs(RhsStage stage, const HamiltonianJet& P, const HomologicalSolution& partial);

/// The generating function F as a jet.
HamiltonianJet solution_to_jet(const HomologicalSolution& sol, int d, int n, int max_degree, int cap);

/// Relative residuals of the truncated equations, evaluated with series
/// arithmetic (independent of the dense operator assembly).
struct HomologicalResiduals {
    double hx = 0, hz = 0, hzbar = 0, hy = 0, hzz = 0, hzbzb = 0;
    double max() const;
};
HomologicalResiduals homological_residuals(const HomologicalSolution& sol, const RealVec& omega,
                                           const RealVec& Omega, const FourierSeries& Mtot,
                                           const FourierSeries& Rx, const FourierSeries& E,
                                           const FourierSeries& Ebar, const FourierSeries& R,
                                           const FourierSeries& S, const FourierSeries& Sbar);

}  // namespace kam
