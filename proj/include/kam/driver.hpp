#pragma once
/// \file driver.hpp
/// The KAM iteration: constant schedule, initial step, one full step per
/// level (homological solves, normal-form update, Lie transform) and the
/// run loop with contraction monitoring and torus extraction.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kam/atlas.hpp"
#include "kam/homological.hpp"
#include "kam/jet.hpp"

namespace kam {

struct ScheduleConfig {
    double A = 10.0;
    std::array<double, 9> C{2, 3, 17, 4, 5, 14, 11, 16, 12};
    double s0 = 0.5;
    double r0 = 1.0;
    double tau = 4.0;  ///< Diophantine exponent (default d + 2)
    double eps = 1e-6;
    int N_max = 16;
};

/// Named violations of the constant ordering C1>C0, C2>2C1+10, C4>C3>C1,
/// C5>C6+2, C6>2C4, C7>max(C4+10, C5).  Empty when all hold.
std::vector<std::string> constant_ordering_violations(const std::array<double, 9>& C);

class KamSchedule {
public:
    /// Throws ConfigError when the constant ordering is violated.
    explicit KamSchedule(const ScheduleConfig& cfg);

    const ScheduleConfig& config() const { return cfg_; }
    int l_star() const { return l_star_; }
    /// eps_l = A^{-(4/3)^l}.
    double eps(int l) const;
    /// e_l = (sum_{k<=l} k^{-2}) / (2 zeta(2)), so 0 <= e_l < 1/2.
    double e(int l) const;
    double s(int l) const { return cfg_.s0 * (1.0 - e(l)); }
    double r(int l) const { return cfg_.r0 * (1.0 - e(l)); }
    /// Intermediate widths s_l^{(j)}, r_l^{(j)}, j = 0..100, interpolating level l to l+1.
    double s_mid(int l, int j) const;
    double r_mid(int l, int j) const;
    /// N_l = A^{l+1} (uncapped, may be huge) and its capped version.
    double N_schedule(int l) const;
    int N_capped(int l) const;
    /// M_0 = (log N)^{C0}.
    double M0(double N) const;
    /// K with log K = (log M0)^{C7}.
    double log_K(double N) const;
    /// l0 = C8 log M0.
    double l0(double N) const;

private:
    ScheduleConfig cfg_;
    int l_star_ = 1;
};

/// One rung of the iteration.
struct KamState {
    int level = 0;
    RealVec xi;
    RealVec omega;
    RealVec Omega;
    FourierSeries B;     ///< n x n normal-form matrix, M_{jk} multiplies z_j zbar_k
    HamiltonianJet P;    ///< perturbation
    double eps_low = 0.0;   ///< vf_norm(P^low, s_l, r_l)
    double eps_high = 0.0;  ///< vf_norm(P^high, s_l, r_l)
    int N_used = 0;
    std::optional<ParameterAtlas> atlas;
};

/// The normal form <w,y> + sum Omega_j |z_j|^2 + sum B_jk z_j zbar_k as a jet.
HamiltonianJet normal_form_jet(const RealVec& omega, const RealVec& Omega, const FourierSeries& B, int max_degree,
                               int cap);

struct StepOptions {
    int cap = 20;                 ///< Fourier cutoff of stored coefficients
    int lie_order = 3;            ///< Lie-series terms kept
    double contraction_power = 4.0 / 3.0;  ///< adaptive N aims at a tail <= eps^power
    bool adaptive_N = true;
    DivisorFloor floor{};         ///< small-divisor floor for the angle equations
    double rcond_floor = 1e-13;
    bool strict = true;           ///< schedule assertion hard (true) or warning
};

struct StepDiagnostics {
    int N = 0;
    HomologicalResiduals residuals;
    double omega_shift = 0.0;         ///< |omega_+ - omega|
    double B_change = 0.0;            ///< sup |B_+ - B| (coefficient l1)
    double B_symmetry = 0.0;          ///< self-adjointness violation of B_+
    double reality = 0.0;             ///< worst reality violation of P_+
    double eps_low_next = 0.0;        ///< vf_norm(P_+^low, s_{l+1}, r_{l+1})
    double eps_high_next = 0.0;
    double eps_sched_next = 0.0;
    double lie_tail = 0.0;
    double truncation_tail = 0.0;     ///< weighted tail of P^low above N
    std::vector<std::string> warnings;
};

struct StepResult {
    KamState next;
    HomologicalSolution solution;
    StepDiagnostics diag;
};

/// Smallest N <= N_cap whose weighted tail of P^low at (s_next, r_next) is
/// at most `target` (returns N_cap if none qualifies).
int choose_truncation(const HamiltonianJet& P_low, double s_next, double r_next, double target, int N_cap);

/// One KAM step from level l to l+1.
StepResult kam_step(const KamState& state, const KamSchedule& schedule, const StepOptions& opt);

/// Initial Hamiltonian H0 = <w(xi),y> + sum Omega_j |z_j|^2 + P0.
struct InitialData {
    RealVec xi;
    RealVec Omega;
    OmegaMap omega_map;
    HamiltonianJet P0;
    RealVec box_lo, box_hi;   ///< parameter box (empty = no atlas)
    double gamma = 1e-3;      ///< exclusion floor constant
    double box_half_width = 0.0;  ///< 0 = schedule value A^{-l*^{C3}}/2
};

struct InitialReport {
    DivisorReport diophantine, melnikov, doubled;
    double surviving_fraction = 1.0;
    double smallness = 0.0;  ///< vf_norm(P0, s0, r0)
};

/// Builds the state at level l*: B = 0, the atlas Pi_{l*} from the three
/// exclusion predicates, and checks the active xi against them.
KamState initial_step(const InitialData& data, const KamSchedule& schedule, InitialReport* report = nullptr);

struct LevelLog {
    int level = 0;
    int N = 0;
    double eps_meas = 0.0;
    double eps_sched = 0.0;
    double omega_shift = 0.0;
    double B_symmetry = 0.0;
    double reality = 0.0;
    double residual = 0.0;  ///< max relative homological residual of the step
    double eps_high = 0.0;
};

struct TorusResult {
    RealVec omega_star;
    FourierSeries B_final;
    std::vector<HomologicalSolution> transformations;
    double invariance_residual = 0.0;
    double final_eps = 0.0;
    std::vector<LevelLog> log;
    std::vector<double> contraction_exponents;  ///< log eps_{l+1} / log eps_l
    KamState final_state;
    std::vector<std::string> warnings;
};

struct RunOptions {
    StepOptions step;
    int max_levels = 6;
    double stop_threshold = 1e-14;
};

/// Iterates kam_step from `state` until eps_low < stop_threshold or max_levels.
TorusResult run(const KamState& state, const KamSchedule& schedule, const RunOptions& opt);

/// Residual of the torus x = w t under the Hamiltonian E(omega, B) + P at
/// y = z = zbar = 0: unweighted |P_y| + |d_x P| + |P_z| + |P_zbar| of the
/// low part (sup bound via coefficient sums).
double torus_invariance_residual(const HamiltonianJet& P);

}  // namespace kam

namespace kam {

/// Real perturbation with every monomial of weighted degree <= max_degree and
/// coefficients eps * u * e^{-rho |k|_1}, |k|_inf <= cutoff, where u is a
/// seeded uniform complex number in the unit square (then made real).
HamiltonianJet decaying_perturbation(int d, int n, double eps, double rho, int cutoff, int max_degree,
                                     std::uint64_t seed);

}  // namespace kam
