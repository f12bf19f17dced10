#pragma once
/// \file stability.hpp
/// Linear stability of the torus: fixed-step classical Runge-Kutta
/// integration of the linearised normal flow z' = i(Omega + B(omega t + x0)) z,
/// L2-conservation and Lyapunov diagnostics, convergence-order studies and a
/// non-conservative sentinel.

#include <functional>
#include <iosfwd>
#include <vector>

#include "kam/fourier.hpp"

namespace kam {

using CVec = std::vector<cplx>;

/// Samples of a linear trajectory; x(t) = omega t + x0 (not reduced mod 2 pi).
struct LinearTrajectory {
    std::vector<double> times;
    std::vector<CVec> z;
    std::vector<RealVec> x;
};

/// Generator A(t) of z' = A(t) z, written into a row-major n x n buffer.
using Generator = std::function<void(double t, std::vector<cplx>& A)>;

/// Fixed-step classical RK4 for z' = A(t) z.  Every `stride`-th step is stored
/// (the final time always is); the step count is round(T / dt).
LinearTrajectory integrate_generator(const Generator& A, int n, const CVec& z0, double T, double dt,
                                     int stride = 1, const RealVec& omega = {}, const RealVec& x0 = {});

/// Linearised normal flow z' = i(diag(Omega) + B(omega t + x0)) z with B the
/// matrix-valued series acting on z (B z, B(k) of size n x n).
LinearTrajectory integrate_linearized(const RealVec& omega, const RealVec& Omega, const FourierSeries& B,
                                      const CVec& z0, double T, double dt, const RealVec& x0 = {}, int stride = 1);

/// Fast evaluation of a matrix-valued series at a point (per-axis phase tables).
class SeriesEvaluator {
public:
    explicit SeriesEvaluator(const FourierSeries& f);
    /// Writes f(x) row-major into out (rows x cols).
    void eval(const RealVec& x, std::vector<cplx>& out) const;

private:
    const FourierSeries* f_;
    std::vector<std::size_t> active_;  ///< modes with a nonzero coefficient
    std::vector<Index> modes_;
    mutable std::vector<std::vector<cplx>> phase_;
};

double squared_norm(const CVec& z);
/// max over stored t of | |z(t)|^2 - |z(0)|^2 |.
double l2_drift(const LinearTrajectory& traj);
/// log(|z(T)| / |z(0)|) / T.
double lyapunov_estimate(const LinearTrajectory& traj);
/// Estimates over the first and second halves of the trajectory.
struct LyapunovHalves {
    double first = 0.0, second = 0.0;
};
LyapunovHalves lyapunov_halves(const LinearTrajectory& traj);

/// Closed-form solution for B = 0: z_j(t) = e^{i Omega_j t} z0_j.
CVec free_solution(const RealVec& Omega, const CVec& z0, double t);
/// max over stored times of |z(t) - free_solution(t)|.
double max_free_error(const LinearTrajectory& traj, const RealVec& Omega);

/// Endpoint error of a dt-halving sequence against a fine reference.
struct OrderStudy {
    std::vector<double> dts;
    std::vector<double> errors;
    std::vector<double> slopes;  ///< log2(e(dt) / e(dt/2))
    double order = 0.0;          ///< least-squares log-log slope
};
/// `levels` step sizes dt0, dt0/2, ...; the reference uses dt_min / ref_factor.
OrderStudy order_study(const RealVec& omega, const RealVec& Omega, const FourierSeries& B, const CVec& z0,
                       double T, double dt0, int levels = 4, int ref_factor = 8, const RealVec& x0 = {});

/// Verdict on conservation: fires when the drift exceeds `tol`.
struct ConservationVerdict {
    double drift = 0.0;
    double lyapunov = 0.0;
    bool conserved = true;
};
ConservationVerdict check_conservation(const LinearTrajectory& traj, double tol);

/// Non-self-adjoint constant coupling of size `size`: B_{01} != B_{10}^* for n >= 2,
/// a non-real diagonal entry for n = 1.
FourierSeries nonsymmetric_sentinel(int d, int n, double size);
/// Gain generator i diag(Omega) + g I (planted Lyapunov exponent g).
Generator gain_sentinel(const RealVec& Omega, double g);

/// CSV with columns t, Re z_j, Im z_j (per j), |z|^2.
void write_trajectory_csv(std::ostream& os, const LinearTrajectory& traj);

}  // namespace kam
