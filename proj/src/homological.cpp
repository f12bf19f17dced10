#include "kam/homological.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kam {

SmallDivisor::SmallDivisor(const Index& k_, double value_, double floor_)
    : KamError(ErrorClass::Exclusion,
               [&] {
                   std::ostringstream os;
                   os << "small divisor at k=(";
                   for (std::size_t i = 0; i < k_.size(); ++i) os << (i ? "," : "") << k_[i];
                   os << "): |divisor|=" << std::abs(value_) << " below floor " << floor_;
                   return os.str();
               }()),
      k(k_),
      value(value_),
      floor(floor_) {}

std::vector<Index> cube_region(const Index& center, int M) {
    const int d = static_cast<int>(center.size());
    FourierSeries shape(d, M);
    std::vector<Index> out;
    out.reserve(shape.num_modes());
    for (std::size_t q = 0; q < shape.num_modes(); ++q) out.push_back(add(center, shape.mode(q)));
    return out;
}

std::vector<Index> cube_region(int d, int N) { return cube_region(Index(d, 0), N); }

cplx LatticeMatrix::entry(int a, int j, int b, int jj) const {
    cplx v = symbol.get(sub(region[a], region[b]), j, jj);
    if (a == b && j == jj) v += diag(j, region[a]);
    return v;
}

Eigen::MatrixXcd LatticeMatrix::dense() const {
    const int S = sites(), n = block;
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(size(), size());
    for (int a = 0; a < S; ++a) {
        for (int b = 0; b < S; ++b) {
            auto pos = symbol.flat(sub(region[a], region[b]));
            if (!pos) continue;
            for (int j = 0; j < n; ++j)
                for (int jj = 0; jj < n; ++jj) A(a * n + j, b * n + jj) = symbol.raw(*pos, j, jj);
        }
        for (int j = 0; j < n; ++j) A(a * n + j, a * n + j) += diag(j, region[a]);
    }
    return A;
}

LatticeMatrix LatticeMatrix::restrict_to(const std::vector<Index>& sub) const { return on_region(sub); }

LatticeMatrix LatticeMatrix::on_region(std::vector<Index> sites_) const {
    LatticeMatrix T = *this;
    T.region = std::move(sites_);
    return T;
}

double symbol_decay_constant(const FourierSeries& symbol, double s) {
    double c = 0.0;
    const std::size_t zero = *symbol.flat(Index(symbol.dim(), 0));
    for (std::size_t q = 0; q < symbol.num_modes(); ++q) {
        if (q == zero) continue;
        const double w = std::exp(s * norm_inf(symbol.mode(q)));
        for (int r = 0; r < symbol.entries(); ++r) c = std::max(c, std::abs(symbol.data()[q * symbol.entries() + r]) * w);
    }
    return c;
}

namespace {

FourierSeries matrix_sum(const FourierSeries& B, const FourierSeries& R) {
    if (B.rows() != B.cols() || R.rows() != R.cols() || B.rows() != R.rows())
        throw std::invalid_argument("build_T: B and Rzz must be n x n");
    return B + R;
}

}  // namespace

LatticeMatrix build_T(const RealVec& omega, const RealVec& Omega, const FourierSeries& B, const FourierSeries& Rzz,
                      int N, double decay_s) {
    LatticeMatrix T;
    T.d = static_cast<int>(omega.size());
    T.block = static_cast<int>(Omega.size());
    T.region = cube_region(T.d, N);
    T.omega = omega;
    T.offsets = Omega;
    T.symbol = matrix_sum(B, Rzz);
    if (T.symbol.rows() != T.block) throw std::invalid_argument("build_T: symbol size differs from Omega length");
    T.decay_s = decay_s;
    T.decay_c = symbol_decay_constant(T.symbol, decay_s);
    return T;
}

LatticeMatrix build_boldT(const RealVec& omega, const RealVec& Omega, const FourierSeries& B, const FourierSeries& Rzz,
                          int N, double decay_s) {
    const FourierSeries M = matrix_sum(B, Rzz);
    const int n = static_cast<int>(Omega.size());
    if (M.rows() != n) throw std::invalid_argument("build_boldT: symbol size differs from Omega length");
    LatticeMatrix T;
    T.d = static_cast<int>(omega.size());
    T.block = n * n;
    T.region = cube_region(T.d, N);
    T.omega = omega;
    T.offsets.resize(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) T.offsets[i * n + j] = Omega[i] + Omega[j];
    // Row action M_{ii'} (same column j) plus column action M_{jj'} (same row i).
    T.symbol = FourierSeries(M.dim(), M.cutoff(), n * n, n * n);
    for (std::size_t q = 0; q < M.num_modes(); ++q)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int ip = 0; ip < n; ++ip)
                    for (int jp = 0; jp < n; ++jp) {
                        cplx v(0.0, 0.0);
                        if (j == jp) v += M.raw(q, i, ip);
                        if (i == ip) v += M.raw(q, j, jp);
                        T.symbol.raw(q, i * n + j, ip * n + jp) = v;
                    }
    T.decay_s = decay_s;
    T.decay_c = symbol_decay_constant(T.symbol, decay_s);
    return T;
}

double DivisorFloor::at(const Index& k) const {
    const int m = norm_inf(k);
    if (m == 0 || tau == 0.0) return gamma;
    return gamma * std::pow(static_cast<double>(m), -tau);
}

namespace {

/// Divides every coefficient 0 < |k| <= N by i<k,w>, zeroing the mean and
/// the modes above N.  Entry-shape agnostic.
FourierSeries divide_by_derivative(const FourierSeries& R, const RealVec& omega, int N, const DivisorFloor& floor) {
    const FourierSeries Rt = truncate(R, N).with_cutoff(N);
    FourierSeries F(Rt.dim(), N, Rt.rows(), Rt.cols());
    const std::size_t zero = *F.flat(Index(F.dim(), 0));
    for (std::size_t q = 0; q < F.num_modes(); ++q) {
        if (q == zero) continue;
        const Index k = F.mode(q);
        const double w = dot(k, omega);
        if (std::abs(w) < floor.at(k)) throw SmallDivisor(k, w, floor.at(k));
        for (int r = 0; r < F.entries(); ++r) F.data()[q * F.entries() + r] = Rt.data()[q * F.entries() + r] / cplx(0.0, w);
    }
    return F;
}

void solve_checked(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& b, Eigen::VectorXcd& x, double rcond_floor,
                   const char* what) {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
    double rc = lu.rcond();
    const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
    if (pivots.size() > 0) rc = std::min(rc, pivots.minCoeff() / std::max(pivots.maxCoeff(), 1e-300));
    if (!(rc >= rcond_floor)) {
        std::ostringstream os;
        os << what << ": reciprocal condition estimate " << rc << " below " << rcond_floor;
        throw NearSingular(os.str(), rc);
    }
    x = lu.solve(b);
    const double bn = b.norm();
    const double res = (A * x - b).norm();
    if (!std::isfinite(res) || (bn > 0 && res > 1e-10 * bn)) {
        std::ostringstream os;
        os << what << ": relative solve residual " << res / bn << " exceeds 1e-10";
        throw NearSingular(os.str(), rc);
    }
}

int cube_cutoff(const LatticeMatrix& T) {
    int N = 0;
    for (const auto& k : T.region) N = std::max(N, norm_inf(k));
    return N;
}

}  // namespace

FourierSeries solve_hx(const FourierSeries& Rx, const RealVec& omega, int N, const DivisorFloor& floor,
                       bool* mean_dropped) {
    if (Rx.entries() != 1) throw std::invalid_argument("solve_hx: R^x must be scalar");
    const cplx mean = Rx.get(Index(Rx.dim(), 0));
    if (mean_dropped) *mean_dropped = std::abs(mean) > 0.0;
    return divide_by_derivative(Rx, omega, N, floor);
}

FourierSeries solve_hz(const LatticeMatrix& T, const FourierSeries& E, double rcond_floor) {
    if (E.rows() != T.block || E.cols() != 1) throw std::invalid_argument("solve_hz: right-hand side shape mismatch");
    const int n = T.block, S = T.sites();
    Eigen::VectorXcd b(T.size());
    for (int a = 0; a < S; ++a)
        for (int j = 0; j < n; ++j) b(a * n + j) = cplx(0.0, -1.0) * E.get(T.region[a], j, 0);
    Eigen::VectorXcd x;
    solve_checked(T.dense(), b, x, rcond_floor, "solve_hz");
    FourierSeries F(T.d, cube_cutoff(T), n, 1);
    for (int a = 0; a < S; ++a)
        for (int j = 0; j < n; ++j) F.at(T.region[a], j, 0) = x(a * n + j);
    return F;
}

std::pair<FourierSeries, RealVec> solve_hy(const FourierSeries& R, const RealVec& omega, int N,
                                           const DivisorFloor& floor) {
    RealVec shift(R.rows(), 0.0);
    const Index zero(R.dim(), 0);
    for (int a = 0; a < R.rows(); ++a) shift[a] = R.get(zero, a, 0).real();
    return {divide_by_derivative(R, omega, N, floor), shift};
}

FourierSeries solve_hzz(const LatticeMatrix& boldT, const FourierSeries& S, double rcond_floor) {
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(boldT.block))));
    if (n * n != boldT.block || S.rows() != n || S.cols() != n)
        throw std::invalid_argument("solve_hzz: shape mismatch");
    const int sites = boldT.sites(), nb = boldT.block;
    Eigen::VectorXcd b(boldT.size());
    for (int a = 0; a < sites; ++a)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) b(a * nb + i * n + j) = cplx(0.0, -1.0) * S.get(boldT.region[a], i, j);
    Eigen::VectorXcd x;
    solve_checked(boldT.dense(), b, x, rcond_floor, "solve_hzz");
    FourierSeries F(boldT.d, cube_cutoff(boldT), n, n);
    for (int a = 0; a < sites; ++a)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) F.at(boldT.region[a], i, j) = x(a * nb + i * n + j);
    // The solution is symmetric by uniqueness; remove round-off asymmetry.
    FourierSeries Ft = transpose(F);
    F += Ft;
    F *= cplx(0.5, 0.0);
    return F;
}

// ---- right-hand sides ---------------------------------------------------

namespace {

/// Coefficient of y_a z_j (or y_a zbar_j when bar).
FourierSeries coeff_yz(const HamiltonianJet& P, int a, int j, bool bar) {
    auto s = make_signature(P.d(), P.n());
    s.a[a] = 1;
    (bar ? s.c : s.b)[j] = 1;
    return P.coeff(s);
}

/// Hessian entry d^2 P / dy_a dy_b at y = 0.
FourierSeries hess_yy(const HamiltonianJet& P, int a, int b) {
    auto s = make_signature(P.d(), P.n());
    s.a[a] += 1;
    s.a[b] += 1;
    FourierSeries f = P.coeff(s);
    if (a == b) f *= cplx(2.0, 0.0);
    return f;
}

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("assemble_rhs: missing prerequisite ") + what);
}

FourierSeries scalar_zero(int d) { return FourierSeries(d, 0); }

/// Quadratic-form accumulator: coefficient of z_i z_j (i <= j) -> series.
struct QuadForm {
    int d, n;
    std::vector<FourierSeries> c;  // index i*n + j with i <= j
    QuadForm(int d_, int n_) : d(d_), n(n_), c(static_cast<std::size_t>(n_ * n_), FourierSeries(d_, 0)) {}
    void add_pair(int i, int j, const FourierSeries& f) {
        if (i > j) std::swap(i, j);
        c[i * n + j] += f;
    }
    /// Symmetric matrix S with <S z, z> equal to the form.
    FourierSeries matrix() const {
        int N = 0;
        for (const auto& f : c) N = std::max(N, f.cutoff());
        FourierSeries S(d, N, n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                FourierSeries f = c[i * n + j];
                if (i != j) f *= cplx(0.5, 0.0);
                S.set_entry(i, j, f);
                S.set_entry(j, i, f);
            }
        return S;
    }
};

/// Exponents b (length n) as the pair (i, j) when |b| = 2.
std::pair<int, int> pair_of(const std::vector<int>& b) {
    int i = -1, j = -1;
    for (int t = 0; t < static_cast<int>(b.size()); ++t)
        for (int m = 0; m < b[t]; ++m) (i < 0 ? i : j) = t;
    return {i, j};
}

int total(const std::vector<int>& v) {
    int s = 0;
    for (int x : v) s += x;
    return s;
}

/// The zz (bar = false) or zbar-zbar (bar = true) right-hand side.
FourierSeries assemble_quadratic(const HamiltonianJet& low, const HamiltonianJet& high, const HomologicalSolution& F,
                                 bool bar, int cap) {
    const int d = high.d(), n = high.n();
    QuadForm Q(d, n);
    // Low-order part R^{zz} (resp. R^{zbar zbar}).
    const FourierSeries R = bar ? comp_zbzb(low) : comp_zz(low);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            FourierSeries f = R.entry(i, j);
            if (i != j) f *= cplx(2.0, 0.0);
            Q.add_pair(i, j, f);
        }
    const FourierSeries& Fz = F.Fz;
    const FourierSeries& Fzb = F.Fzbar;
    for (const auto& [s, p] : high.terms()) {
        const int A = total(s.a), B = total(s.b), C = total(s.c);
        const int own = bar ? C : B;    // exponent count of the surviving variable
        const int other = bar ? B : C;
        // i P^{zzz} F^zbar  (resp. i P^{z zbar zbar} F^zbar): contract one z with F^zbar.
        if (A == 0 && B + C == 3) {
            for (int m = 0; m < n; ++m) {
                // term i * d/dz_m P * F^zbar_m, keep monomials quadratic in the surviving variable
                if (s.b[m] > 0) {
                    auto e = s.b;
                    e[m] -= 1;
                    const bool lands = bar ? (total(e) == 0 && C == 2) : (total(e) == 2 && C == 0);
                    if (lands) {
                        auto [i, j] = pair_of(bar ? s.c : e);
                        Q.add_pair(i, j, cplx(0.0, s.b[m]) * product(p, Fzb.entry(m, 0), cap));
                    }
                }
                // term -i d/dzbar_m P * F^z_m
                if (s.c[m] > 0) {
                    auto e = s.c;
                    e[m] -= 1;
                    const bool lands = bar ? (total(e) == 2 && B == 0) : (total(e) == 0 && B == 2);
                    if (lands) {
                        auto [i, j] = pair_of(bar ? e : s.b);
                        Q.add_pair(i, j, cplx(0.0, -s.c[m]) * product(p, Fz.entry(m, 0), cap));
                    }
                }
            }
        }
        // -P^{yz} d_x F^z (resp. -P^{yzbar} d_x F^zbar): monomials y_a z_j.
        if (A == 1 && own == 1 && other == 0) {
            int a = 0;
            while (s.a[a] == 0) ++a;
            int j = 0;
            const auto& e = bar ? s.c : s.b;
            while (e[j] == 0) ++j;
            const FourierSeries& G = bar ? Fzb : Fz;
            for (int i = 0; i < n; ++i)
                Q.add_pair(i, j, cplx(-1.0, 0.0) * product(p, partial(G.entry(i, 0), a), cap));
        }
        // -P^{yzz} d_x F^x (resp. -P^{y zbar zbar} d_x F^x).
        if (A == 1 && own == 2 && other == 0) {
            int a = 0;
            while (s.a[a] == 0) ++a;
            auto [i, j] = pair_of(bar ? s.c : s.b);
            Q.add_pair(i, j, cplx(-1.0, 0.0) * product(p, partial(F.Fx, a), cap));
        }
    }
    return Q.matrix();
}

}  // namespace

FourierSeries assemble_rhs(RhsStage stage, const HamiltonianJet& P, const HomologicalSolution& F) {
    const int d = P.d(), n = P.n();
    const JetSplit sp = split_low_high(P);
    const int cap = P.cap();
    switch (stage) {
        case RhsStage::E:
        case RhsStage::Ebar: {
            require(F.has_x, "F^x");
            const bool bar = stage == RhsStage::Ebar;
            FourierSeries out = bar ? comp_zbar(sp.low) : comp_z(sp.low);
            for (int j = 0; j < n; ++j) {
                FourierSeries acc = scalar_zero(d);
                for (int a = 0; a < d; ++a) acc += product(coeff_yz(sp.high, a, j, bar), partial(F.Fx, a), cap);
                acc *= cplx(-1.0, 0.0);
                FourierSeries col = out.entry(j, 0) + acc;
                if (col.cutoff() > out.cutoff()) out = out.with_cutoff(col.cutoff());
                out.set_entry(j, 0, col);
            }
            return out;
        }
        case RhsStage::R: {
            require(F.has_x && F.has_z, "F^x, F^z, F^zbar");
            FourierSeries out = comp_y(sp.low);
            for (int a = 0; a < d; ++a) {
                FourierSeries acc = out.entry(a, 0);
                for (int j = 0; j < n; ++j) {
                    acc += cplx(0.0, 1.0) * product(coeff_yz(sp.high, a, j, false), F.Fzbar.entry(j, 0), cap);
                    acc += cplx(0.0, -1.0) * product(coeff_yz(sp.high, a, j, true), F.Fz.entry(j, 0), cap);
                }
                for (int b = 0; b < d; ++b) acc += cplx(-1.0, 0.0) * product(hess_yy(sp.high, a, b), partial(F.Fx, b), cap);
                if (acc.cutoff() > out.cutoff()) out = out.with_cutoff(acc.cutoff());
                out.set_entry(a, 0, acc);
            }
            return out;
        }
        case RhsStage::S:
        case RhsStage::Sbar:
            require(F.has_x && F.has_z, "F^x, F^z, F^zbar");
            return assemble_quadratic(sp.low, sp.high, F, stage == RhsStage::Sbar, cap);
    }
    throw std::logic_error("assemble_rhs: unknown stage");
}

HamiltonianJet solution_to_jet(const HomologicalSolution& sol, int d, int n, int max_degree, int cap) {
    HamiltonianJet F(d, n, max_degree, cap);
    if (sol.has_x) add_comp_x(F, sol.Fx);
    if (sol.has_y) add_comp_y(F, sol.Fy);
    if (sol.has_z && n > 0) {
        add_comp_z(F, sol.Fz);
        add_comp_zbar(F, sol.Fzbar);
    }
    if (sol.has_zz && n > 0) {
        add_comp_zz(F, sol.Fzz);
        add_comp_zbzb(F, sol.Fzbzb);
    }
    F.prune();
    return F;
}

// ---- residuals ----------------------------------------------------------

double HomologicalResiduals::max() const { return std::max({hx, hz, hzbar, hy, hzz, hzbzb}); }

namespace {

double rel(const FourierSeries& r, const FourierSeries& rhs) {
    const double scale = std::max(rhs.max_abs(), 1e-300);
    return r.max_abs() / scale;
}

FourierSeries diag_matrix(int d, const RealVec& Omega) {
    const int n = static_cast<int>(Omega.size());
    FourierSeries D(d, 0, n, n);
    for (int j = 0; j < n; ++j) D.raw(0, j, j) = Omega[j];
    return D;
}

}  // namespace

HomologicalResiduals homological_residuals(const HomologicalSolution& sol, const RealVec& omega,
                                           const RealVec& Omega, const FourierSeries& Mtot, const FourierSeries& Rx,
                                           const FourierSeries& E, const FourierSeries& Ebar, const FourierSeries& R,
                                           const FourierSeries& S, const FourierSeries& Sbar) {
    HomologicalResiduals out;
    const int N = sol.N;
    const int d = static_cast<int>(omega.size());
    const cplx I(0.0, 1.0);
    if (sol.has_x) {
        FourierSeries rhs = truncate(Rx, N);
        if (auto z = rhs.flat(Index(d, 0))) rhs.raw(*z) = 0.0;
        out.hx = rel(truncate(dir_derivative(sol.Fx, omega) - rhs, N), rhs);
    }
    const FourierSeries L = diag_matrix(d, Omega) + Mtot;  // Omega + M
    const FourierSeries Lt = transpose(L);
    if (sol.has_z) {
        FourierSeries rz = dir_derivative(sol.Fz, omega) + I * truncate(product(L, sol.Fz), N) - truncate(E, N);
        out.hz = rel(truncate(rz, N), truncate(E, N));
        FourierSeries rzb =
            dir_derivative(sol.Fzbar, omega) - I * truncate(product(Lt, sol.Fzbar), N) - truncate(Ebar, N);
        out.hzbar = rel(truncate(rzb, N), truncate(Ebar, N));
    }
    if (sol.has_y) {
        FourierSeries rhs = truncate(R, N);
        if (auto z = rhs.flat(Index(d, 0)))
            for (int a = 0; a < rhs.rows(); ++a) rhs.raw(*z, a, 0) = 0.0;
        out.hy = rel(truncate(dir_derivative(sol.Fy, omega) - rhs, N), rhs);
    }
    if (sol.has_zz) {
        FourierSeries lhs = dir_derivative(sol.Fzz, omega) +
                            I * truncate(product(L, sol.Fzz) + product(sol.Fzz, Lt), N);
        out.hzz = rel(truncate(lhs - truncate(S, N), N), truncate(S, N));
        FourierSeries lhsb = dir_derivative(sol.Fzbzb, omega) -
                             I * truncate(product(Lt, sol.Fzbzb) + product(sol.Fzbzb, L), N);
        out.hzbzb = rel(truncate(lhsb - truncate(Sbar, N), N), truncate(Sbar, N));
    }
    return out;
}

}  // namespace kam
