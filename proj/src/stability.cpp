#include "kam/stability.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace kam {

SeriesEvaluator::SeriesEvaluator(const FourierSeries& f) : f_(&f) {
    for (std::size_t q = 0; q < f.num_modes(); ++q) {
        bool nz = false;
        for (int e = 0; e < f.entries() && !nz; ++e) nz = f.data()[q * f.entries() + e] != cplx(0.0, 0.0);
        if (!nz) continue;
        active_.push_back(q);
        modes_.push_back(f.mode(q));
    }
    phase_.assign(f.dim(), std::vector<cplx>(2 * f.cutoff() + 1));
}

void SeriesEvaluator::eval(const RealVec& x, std::vector<cplx>& out) const {
    const FourierSeries& f = *f_;
    const int d = f.dim(), N = f.cutoff(), E = f.entries();
    out.assign(E, cplx(0.0, 0.0));
    for (int a = 0; a < d; ++a) {
        // e^{i m x_a} for m = -N..N by repeated multiplication from m = 0
        const cplx w(std::cos(x[a]), std::sin(x[a]));
        auto& ph = phase_[a];
        ph[N] = 1.0;
        for (int m = 1; m <= N; ++m) {
            ph[N + m] = ph[N + m - 1] * w;
            ph[N - m] = std::conj(ph[N + m]);
        }
    }
    for (std::size_t t = 0; t < active_.size(); ++t) {
        cplx e(1.0, 0.0);
        for (int a = 0; a < d; ++a) e *= phase_[a][N + modes_[t][a]];
        const cplx* c = &f.data()[active_[t] * E];
        for (int i = 0; i < E; ++i) out[i] += c[i] * e;
    }
}

namespace {

void matvec(const std::vector<cplx>& A, int n, const CVec& z, CVec& out) {
    for (int i = 0; i < n; ++i) {
        cplx s(0.0, 0.0);
        for (int j = 0; j < n; ++j) s += A[i * n + j] * z[j];
        out[i] = s;
    }
}

}  // namespace

LinearTrajectory integrate_generator(const Generator& A, int n, const CVec& z0, double T, double dt, int stride,
                                     const RealVec& omega, const RealVec& x0) {
    if (!(dt > 0) || !(T >= 0)) throw std::invalid_argument("integrate_generator: need dt > 0 and T >= 0");
    if (static_cast<int>(z0.size()) != n) throw std::invalid_argument("integrate_generator: z0 has wrong size");
    stride = std::max(1, stride);
    const long steps = std::lround(T / dt);
    LinearTrajectory tr;
    auto record = [&](double t, const CVec& z) {
        tr.times.push_back(t);
        tr.z.push_back(z);
        RealVec x(omega.size());
        for (std::size_t a = 0; a < omega.size(); ++a) x[a] = omega[a] * t + (a < x0.size() ? x0[a] : 0.0);
        tr.x.push_back(std::move(x));
    };
    CVec z = z0, k1(n), k2(n), k3(n), k4(n), tmp(n);
    std::vector<cplx> A0(n * n), Ah(n * n), A1(n * n);
    A(0.0, A0);
    record(0.0, z);
    for (long s = 0; s < steps; ++s) {
        const double t = s * dt;
        A(t + 0.5 * dt, Ah);
        A(t + dt, A1);
        matvec(A0, n, z, k1);
        for (int i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * dt * k1[i];
        matvec(Ah, n, tmp, k2);
        for (int i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * dt * k2[i];
        matvec(Ah, n, tmp, k3);
        for (int i = 0; i < n; ++i) tmp[i] = z[i] + dt * k3[i];
        matvec(A1, n, tmp, k4);
        for (int i = 0; i < n; ++i) z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        std::swap(A0, A1);
        if ((s + 1) % stride == 0 || s + 1 == steps) record((s + 1) * dt, z);
    }
    return tr;
}

LinearTrajectory integrate_linearized(const RealVec& omega, const RealVec& Omega, const FourierSeries& B,
                                      const CVec& z0, double T, double dt, const RealVec& x0, int stride) {
    const int n = static_cast<int>(Omega.size());
    if (B.rows() != n || B.cols() != n) throw std::invalid_argument("integrate_linearized: B must be n x n");
    if (static_cast<int>(omega.size()) != B.dim()) throw std::invalid_argument("integrate_linearized: omega dimension");
    SeriesEvaluator ev(B);
    RealVec x(omega.size());
    Generator gen = [&](double t, std::vector<cplx>& A) {
        for (std::size_t a = 0; a < omega.size(); ++a) x[a] = omega[a] * t + (a < x0.size() ? x0[a] : 0.0);
        ev.eval(x, A);
        for (auto& v : A) v *= cplx(0.0, 1.0);
        for (int j = 0; j < n; ++j) A[j * n + j] += cplx(0.0, Omega[j]);
    };
    return integrate_generator(gen, n, z0, T, dt, stride, omega, x0);
}

double squared_norm(const CVec& z) {
    double s = 0.0;
    for (const auto& v : z) s += std::norm(v);
    return s;
}

double l2_drift(const LinearTrajectory& traj) {
    if (traj.z.empty()) return 0.0;
    const double n0 = squared_norm(traj.z.front());
    double m = 0.0;
    for (const auto& z : traj.z) m = std::max(m, std::abs(squared_norm(z) - n0));
    return m;
}

double lyapunov_estimate(const LinearTrajectory& traj) {
    if (traj.z.size() < 2 || traj.times.back() <= traj.times.front()) return 0.0;
    return 0.5 * std::log(squared_norm(traj.z.back()) / squared_norm(traj.z.front())) /
           (traj.times.back() - traj.times.front());
}

LyapunovHalves lyapunov_halves(const LinearTrajectory& traj) {
    LyapunovHalves h;
    if (traj.z.size() < 3) return h;
    const std::size_t mid = traj.z.size() / 2;
    auto rate = [&](std::size_t a, std::size_t b) {
        return 0.5 * std::log(squared_norm(traj.z[b]) / squared_norm(traj.z[a])) / (traj.times[b] - traj.times[a]);
    };
    h.first = rate(0, mid);
    h.second = rate(mid, traj.z.size() - 1);
    return h;
}

CVec free_solution(const RealVec& Omega, const CVec& z0, double t) {
    CVec z(z0.size());
    for (std::size_t j = 0; j < z0.size(); ++j) z[j] = std::polar(1.0, Omega[j] * t) * z0[j];
    return z;
}

double max_free_error(const LinearTrajectory& traj, const RealVec& Omega) {
    double m = 0.0;
    for (std::size_t s = 0; s < traj.z.size(); ++s) {
        const CVec ref = free_solution(Omega, traj.z.front(), traj.times[s]);
        for (std::size_t j = 0; j < ref.size(); ++j) m = std::max(m, std::abs(traj.z[s][j] - ref[j]));
    }
    return m;
}

OrderStudy order_study(const RealVec& omega, const RealVec& Omega, const FourierSeries& B, const CVec& z0, double T,
                       double dt0, int levels, int ref_factor, const RealVec& x0) {
    OrderStudy st;
    const double dt_min = dt0 / std::pow(2.0, levels - 1);
    const long ref_steps = std::lround(T / dt_min) * ref_factor;
    const LinearTrajectory ref =
        integrate_linearized(omega, Omega, B, z0, T, T / ref_steps, x0, static_cast<int>(ref_steps));
    for (int l = 0; l < levels; ++l) {
        const double dt = dt0 / std::pow(2.0, l);
        const long steps = std::lround(T / dt);
        const LinearTrajectory tr = integrate_linearized(omega, Omega, B, z0, T, T / steps, x0, static_cast<int>(steps));
        double e = 0.0;
        for (std::size_t j = 0; j < z0.size(); ++j) e = std::max(e, std::abs(tr.z.back()[j] - ref.z.back()[j]));
        st.dts.push_back(T / steps);
        st.errors.push_back(e);
    }
    for (int l = 0; l + 1 < levels; ++l) st.slopes.push_back(std::log2(st.errors[l] / st.errors[l + 1]));
    // least-squares slope of log e against log dt
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int l = 0; l < levels; ++l) {
        const double lx = std::log(st.dts[l]), ly = std::log(st.errors[l]);
        sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    }
    const double m = levels;
    st.order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return st;
}

ConservationVerdict check_conservation(const LinearTrajectory& traj, double tol) {
    ConservationVerdict v;
    v.drift = l2_drift(traj);
    v.lyapunov = lyapunov_estimate(traj);
    v.conserved = v.drift <= tol;
    return v;
}

FourierSeries nonsymmetric_sentinel(int d, int n, double size) {
    FourierSeries B(d, 0, n, n);
    if (n == 1)
        B.at(Index(d, 0), 0, 0) = cplx(0.0, size);  // non-real diagonal entry
    else
        B.at(Index(d, 0), 0, 1) = size;  // B_01 = size, B_10 = 0
    return B;
}

Generator gain_sentinel(const RealVec& Omega, double g) {
    const int n = static_cast<int>(Omega.size());
    return [Omega, g, n](double, std::vector<cplx>& A) {
        A.assign(n * n, cplx(0.0, 0.0));
        for (int j = 0; j < n; ++j) A[j * n + j] = cplx(g, Omega[j]);
    };
}

void write_trajectory_csv(std::ostream& os, const LinearTrajectory& traj) {
    const std::size_t n = traj.z.empty() ? 0 : traj.z.front().size();
    os << "t";
    for (std::size_t j = 0; j < n; ++j) os << ",re_z" << j << ",im_z" << j;
    os << ",norm2\n";
    os << std::setprecision(17);
    for (std::size_t s = 0; s < traj.z.size(); ++s) {
        os << traj.times[s];
        for (std::size_t j = 0; j < n; ++j) os << ',' << traj.z[s][j].real() << ',' << traj.z[s][j].imag();
        os << ',' << squared_norm(traj.z[s]) << '\n';
    }
}

}  // namespace kam
