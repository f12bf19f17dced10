#include "kam/driver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "kam/errors.hpp"

namespace kam {

std::vector<std::string> constant_ordering_violations(const std::array<double, 9>& C) {
    std::vector<std::string> v;
    auto need = [&](bool ok, const char* what) {
        if (!ok) v.emplace_back(what);
    };
    need(C[1] > C[0], "C1 > C0");
    need(C[2] > 2 * C[1] + 10, "C2 > 2*C1 + 10");
    need(C[4] > C[3], "C4 > C3");
    need(C[3] > C[1], "C3 > C1");
    need(C[5] > C[6] + 2, "C5 > C6 + 2");
    need(C[6] > 2 * C[4], "C6 > 2*C4");
    need(C[7] > std::max(C[4] + 10, C[5]), "C7 > max(C4 + 10, C5)");
    return v;
}

KamSchedule::KamSchedule(const ScheduleConfig& cfg) : cfg_(cfg) {
    std::vector<std::string> bad = constant_ordering_violations(cfg.C);
    if (!(cfg.A > 1.0)) bad.emplace_back("A > 1");
    if (!(cfg.s0 > 0.0)) bad.emplace_back("s0 > 0");
    if (!(cfg.r0 > 0.0)) bad.emplace_back("r0 > 0");
    if (!(cfg.tau > 0.0)) bad.emplace_back("tau > 0");
    if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) bad.emplace_back("0 < eps < 1");
    if (cfg.N_max < 1) bad.emplace_back("N_max >= 1");
    if (!bad.empty()) {
        std::ostringstream os;
        os << "schedule constants violate:";
        for (const auto& b : bad) os << " [" << b << "]";
        throw ConfigError(os.str());
    }
    // A^{tau l*} = eps^{-1/3}, rounded up.
    const double x = std::log(std::pow(cfg.eps, -1.0 / 3.0)) / (cfg.tau * std::log(cfg.A));
    l_star_ = std::max(1, static_cast<int>(std::ceil(x - 1e-12)));
}

double KamSchedule::eps(int l) const { return std::pow(cfg_.A, -std::pow(4.0 / 3.0, l)); }

double KamSchedule::e(int l) const {
    double s = 0.0;
    for (int k = l; k >= 1; --k) s += 1.0 / (static_cast<double>(k) * k);
    return s / (2.0 * std::numbers::pi * std::numbers::pi / 6.0);
}

double KamSchedule::s_mid(int l, int j) const {
    const double t = std::clamp(j, 0, 100) / 100.0;
    return s(l) + t * (s(l + 1) - s(l));
}

double KamSchedule::r_mid(int l, int j) const {
    const double t = std::clamp(j, 0, 100) / 100.0;
    return r(l) + t * (r(l + 1) - r(l));
}

double KamSchedule::N_schedule(int l) const { return std::pow(cfg_.A, l + 1); }

int KamSchedule::N_capped(int l) const {
    const double N = N_schedule(l);
    return N >= cfg_.N_max ? cfg_.N_max : std::max(1, static_cast<int>(std::floor(N)));
}

double KamSchedule::M0(double N) const { return std::pow(std::log(N), cfg_.C[0]); }

double KamSchedule::log_K(double N) const { return std::pow(std::log(M0(N)), cfg_.C[7]); }

double KamSchedule::l0(double N) const { return cfg_.C[8] * std::log(M0(N)); }

HamiltonianJet normal_form_jet(const RealVec& omega, const RealVec& Omega, const FourierSeries& B, int max_degree,
                               int cap) {
    const int d = static_cast<int>(omega.size()), n = static_cast<int>(Omega.size());
    HamiltonianJet E(d, n, max_degree, cap);
    for (int a = 0; a < d; ++a) E.add(sig_y(d, n, a), constant_series(d, omega[a]));
    for (int j = 0; j < n; ++j) E.add(sig_zzbar(d, n, j, j), constant_series(d, Omega[j]));
    if (n > 0) add_comp_zzbar(E, B);
    E.prune();
    return E;
}

int choose_truncation(const HamiltonianJet& P_low, double s_next, double r_next, double target, int N_cap) {
    for (int N = 1; N < N_cap; ++N) {
        HamiltonianJet t(P_low.d(), P_low.n(), P_low.max_degree(), -1);
        for (const auto& [s, f] : P_low.terms())
            if (f.cutoff() > N) t.add(s, tail(f, N));
        if (vf_norm(t, s_next, r_next) <= target) return N;
    }
    return N_cap;
}

namespace {

double coeff_l1(const FourierSeries& f) {
    double m = 0.0;
    for (int r = 0; r < f.rows(); ++r)
        for (int c = 0; c < f.cols(); ++c) m = std::max(m, strip_norm(f.entry(r, c), 0.0));
    return m;
}

double vec_norm(const RealVec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Low-order content above the cutoff N, weighted at (s, r).
double low_tail(const HamiltonianJet& low, int N, double s, double r) {
    HamiltonianJet t(low.d(), low.n(), low.max_degree(), -1);
    for (const auto& [sig, f] : low.terms())
        if (f.cutoff() > N) t.add(sig, tail(f, N));
    return vf_norm(t, s, r);
}

}  // namespace

StepResult kam_step(const KamState& state, const KamSchedule& schedule, const StepOptions& opt) {
    const int l = state.level;
    const int d = state.P.d(), n = state.P.n();
    if (n < 1) throw std::invalid_argument("kam_step: at least one normal direction is required");
    const double s1 = schedule.s(l + 1), r1 = schedule.r(l + 1);

    HamiltonianJet P = state.P;
    P.set_cap(opt.cap);
    P.set_norm_weights(s1, r1);
    const JetSplit sp = split_low_high(P);

    StepResult out;
    StepDiagnostics& dg = out.diag;
    const double eps_now = vf_norm(sp.low, schedule.s(l), schedule.r(l));
    const int N_cap = schedule.N_capped(l);
    const int N = opt.adaptive_N ? choose_truncation(sp.low, s1, r1, std::pow(eps_now, opt.contraction_power), N_cap)
                                 : N_cap;
    dg.N = N;
    dg.truncation_tail = low_tail(sp.low, N, s1, r1);

    // ---- homological equations -----------------------------------------
    HomologicalSolution& sol = out.solution;
    sol.N = N;
    const FourierSeries Rx = comp_x(sp.low);
    sol.Fx = solve_hx(Rx, state.omega, N, opt.floor, &sol.mean_dropped);
    sol.has_x = true;

    const FourierSeries Rzzbar = comp_zzbar(sp.low);
    const FourierSeries E = assemble_rhs(RhsStage::E, P, sol);
    const FourierSeries Ebar = assemble_rhs(RhsStage::Ebar, P, sol);
    const LatticeMatrix T = build_T(state.omega, state.Omega, state.B, Rzzbar, N, s1);
    sol.Fz = solve_hz(T, E, opt.rcond_floor);
    sol.Fzbar = conj_reflect(sol.Fz);
    sol.has_z = true;

    const FourierSeries R = assemble_rhs(RhsStage::R, P, sol);
    auto [Fy, shift] = solve_hy(R, state.omega, N, opt.floor);
    sol.Fy = std::move(Fy);
    sol.freq_shift = shift;
    sol.has_y = true;

    const FourierSeries S = assemble_rhs(RhsStage::S, P, sol);
    const FourierSeries Sbar = assemble_rhs(RhsStage::Sbar, P, sol);
    const LatticeMatrix BT = build_boldT(state.omega, state.Omega, state.B, Rzzbar, N, s1);
    sol.Fzz = solve_hzz(BT, S, opt.rcond_floor);
    sol.Fzbzb = conj_reflect(sol.Fzz);
    sol.has_zz = true;

    const FourierSeries Mtot = state.B + Rzzbar;
    dg.residuals = homological_residuals(sol, state.omega, state.Omega, Mtot, Rx, E, Ebar, R, S, Sbar);

    // ---- normal-form update ------------------------------------------------
    HamiltonianJet F = solution_to_jet(sol, d, n, P.max_degree(), opt.cap);
    F.set_norm_weights(s1, r1);
    const HamiltonianJet Ebar_nf = normal_form_jet(state.omega, state.Omega, Mtot, P.max_degree(), opt.cap);
    const FourierSeries B_extra = comp_zzbar(poisson_bracket(Ebar_nf, F) + poisson_bracket(sp.high, F));
    FourierSeries B_plus = Mtot + B_extra;
    sol.B_update = B_plus - state.B;
    RealVec omega_plus = state.omega;
    for (int a = 0; a < d; ++a) omega_plus[a] += shift[a];

    // ---- new perturbation ----------------------------------------------------
    // P_+ = H o X_F^1 - E_+ with H = E + P, accumulated as P + sum_{j>=1} ad^j H / j! - (E_+ - E).
    HamiltonianJet H = normal_form_jet(state.omega, state.Omega, state.B, P.max_degree(), opt.cap);
    H.set_norm_weights(s1, r1);
    H += P;
    const LieResult lie = lie_transform(H, F, opt.lie_order, s1, r1);
    HamiltonianJet P_plus = P;
    for (std::size_t j = 1; j < lie.terms.size(); ++j) P_plus += lie.terms[j];
    HamiltonianJet dE(d, n, P.max_degree(), opt.cap);
    for (int a = 0; a < d; ++a) dE.add(sig_y(d, n, a), constant_series(d, shift[a]));
    add_comp_zzbar(dE, sol.B_update);
    P_plus -= dE;
    P_plus.add_remainder(lie.tail_bound);
    dg.lie_tail = lie.tail_bound;
    // The energy constant does not affect the dynamics.
    {
        const Signature s0 = make_signature(d, n);
        if (const FourierSeries* c = P_plus.find(s0)) {
            FourierSeries f = *c;
            f.at(Index(d, 0)) = 0.0;
            P_plus.set(s0, f);
        }
    }
    P_plus.prune();

    // ---- measurements ---------------------------------------------------------
    KamState& nx = out.next;
    nx.level = l + 1;
    nx.xi = state.xi;
    nx.omega = omega_plus;
    nx.Omega = state.Omega;
    nx.B = B_plus;
    nx.P = P_plus;
    nx.atlas = state.atlas;
    nx.N_used = N;
    const JetSplit sp1 = split_low_high(P_plus);
    nx.eps_low = vf_norm(sp1.low, s1, r1);
    nx.eps_high = vf_norm(sp1.high, s1, r1);

    dg.omega_shift = vec_norm(shift);
    dg.B_change = coeff_l1(sol.B_update);
    dg.B_symmetry = self_adjoint_violation(B_plus);
    dg.reality = check_reality(P_plus).worst;
    // The exact P_+ is real; project out the round-off drift measured above.
    nx.P = symmetrize_reality(P_plus);
    dg.eps_low_next = nx.eps_low;
    dg.eps_high_next = nx.eps_high;
    dg.eps_sched_next = schedule.eps(l + 1);

    auto assertion = [&](bool ok, const std::string& what) {
        if (ok) return;
        if (opt.strict) throw KamError(ErrorClass::Numeric, "kam_step: " + what);
        dg.warnings.push_back(what);
    };
    {
        std::ostringstream os;
        os << "low norm " << nx.eps_low << " exceeds scheduled eps_{l+1} = " << dg.eps_sched_next;
        assertion(nx.eps_low <= dg.eps_sched_next, os.str());
    }
    {
        std::ostringstream os;
        os << "frequency drift " << dg.omega_shift << " exceeds eps^{1/2} = " << std::sqrt(eps_now);
        assertion(dg.omega_shift <= std::sqrt(eps_now), os.str());
    }
    if (N < static_cast<int>(std::min(schedule.N_schedule(l), 1e9)) && !opt.adaptive_N)
        dg.warnings.push_back("truncation capped at N_max below the schedule value");
    return out;
}

KamState initial_step(const InitialData& data, const KamSchedule& schedule, InitialReport* report) {
    const int d = data.P0.d(), n = data.P0.n();
    if (static_cast<int>(data.xi.size()) != data.omega_map.dim && data.omega_map.dim != 0)
        throw ConfigError("initial_step: xi dimension differs from the omega map");
    if (static_cast<int>(data.Omega.size()) != n) throw ConfigError("initial_step: Omega length differs from n");
    for (double w : data.Omega)
        if (!(w > 0.0)) throw ConfigError("initial_step: normal frequencies must be positive");
    const auto real = check_reality(data.P0);
    if (!real.ok) {
        std::ostringstream os;
        os << "initial perturbation is not real (violation " << real.worst << ")";
        throw ConfigError(os.str());
    }
    const int ls = schedule.l_star();
    KamState st;
    st.level = ls;
    st.xi = data.xi;
    st.omega = data.omega_map(data.xi);
    if (static_cast<int>(st.omega.size()) != d) throw ConfigError("initial_step: omega map output differs from d");
    st.Omega = data.Omega;
    st.B = FourierSeries(d, 0, n, n);
    st.P = data.P0;
    const JetSplit sp = split_low_high(st.P);
    st.eps_low = vf_norm(sp.low, schedule.s(ls), schedule.r(ls));
    st.eps_high = vf_norm(sp.high, schedule.s(ls), schedule.r(ls));

    ExclusionSpec ex;
    ex.omega_map = data.omega_map;
    ex.Omega = data.Omega;
    ex.N = static_cast<int>(std::min<double>(schedule.N_schedule(ls - 1), schedule.config().N_max));
    ex.gamma = data.gamma;
    ex.tau = schedule.config().tau;

    InitialReport rep;
    rep.smallness = vf_norm(st.P, schedule.config().s0, schedule.config().r0);
    rep.diophantine = diophantine_ok(st.omega, ex.N, ex.gamma, ex.tau);
    rep.melnikov = melnikov1_ok(st.omega, data.Omega, ex.N, ex.gamma, ex.tau, false);
    rep.doubled = melnikov1_ok(st.omega, data.Omega, ex.N, ex.gamma, ex.tau, true);

    if (!data.box_lo.empty()) {
        const ParameterAtlas root = root_atlas(data.box_lo, data.box_hi);
        const double hw = data.box_half_width > 0 ? data.box_half_width
                                                  : level_half_width(schedule.config().A, schedule.config().C[3], ls);
        PavingResult pv = pave_and_filter(root, ls, hw, [&](const RealVec& xi) { return exclusion_keep(ex, xi); });
        rep.surviving_fraction = measure_fraction(pv.atlas, root);
        if (pv.atlas.boxes.empty()) throw KamError(ErrorClass::Exclusion, "initial_step: every parameter box excluded");
        st.atlas = std::move(pv.atlas);
    }
    if (report) *report = rep;

    auto refuse = [&](const char* what, const DivisorReport& r) {
        std::ostringstream os;
        os << "initial_step: active parameter fails the " << what << " condition at k=(";
        for (std::size_t i = 0; i < r.worst_k.size(); ++i) os << (i ? "," : "") << r.worst_k[i];
        os << "), |divisor|=" << r.worst_value << ", margin " << r.worst_margin;
        throw KamError(ErrorClass::Exclusion, os.str());
    };
    if (!rep.diophantine.ok) refuse("Diophantine", rep.diophantine);
    if (!rep.melnikov.ok) refuse("first Melnikov", rep.melnikov);
    if (!rep.doubled.ok) refuse("doubled Melnikov", rep.doubled);
    return st;
}

double torus_invariance_residual(const HamiltonianJet& P) {
    const JetSplit sp = split_low_high(P);
    const HamiltonianJet& L = sp.low;
    double res = 0.0;
    const FourierSeries y = comp_y(L);
    for (int a = 0; a < y.rows(); ++a) res += strip_norm(y.entry(a, 0), 0.0);
    const FourierSeries x = comp_x(L);
    for (int a = 0; a < P.d(); ++a) res += strip_norm(partial(x, a), 0.0);
    if (P.n() > 0) {
        const FourierSeries z = comp_z(L), zb = comp_zbar(L);
        for (int j = 0; j < P.n(); ++j) res += strip_norm(z.entry(j, 0), 0.0) + strip_norm(zb.entry(j, 0), 0.0);
    }
    return res;
}

TorusResult run(const KamState& initial, const KamSchedule& schedule, const RunOptions& opt) {
    TorusResult res;
    KamState st = initial;
    std::vector<double> eps_seq{st.eps_low};
    for (int it = 0; it < opt.max_levels && st.eps_low >= opt.stop_threshold; ++it) {
        StepResult step = kam_step(st, schedule, opt.step);
        LevelLog lg;
        lg.level = step.next.level;
        lg.N = step.diag.N;
        lg.eps_meas = step.diag.eps_low_next;
        lg.eps_sched = step.diag.eps_sched_next;
        lg.omega_shift = step.diag.omega_shift;
        lg.B_symmetry = step.diag.B_symmetry;
        lg.reality = step.diag.reality;
        lg.residual = step.diag.residuals.max();
        lg.eps_high = step.diag.eps_high_next;
        res.log.push_back(lg);
        for (const auto& w : step.diag.warnings) res.warnings.push_back("level " + std::to_string(lg.level) + ": " + w);
        res.transformations.push_back(std::move(step.solution));
        st = std::move(step.next);
        eps_seq.push_back(st.eps_low);
    }
    for (std::size_t i = 1; i < eps_seq.size(); ++i)
        if (eps_seq[i - 1] > 0 && eps_seq[i - 1] < 1 && eps_seq[i] > 0)
            res.contraction_exponents.push_back(std::log(eps_seq[i]) / std::log(eps_seq[i - 1]));
    res.omega_star = st.omega;
    res.B_final = st.B;
    res.final_eps = st.eps_low;
    res.invariance_residual = torus_invariance_residual(st.P);
    res.final_state = std::move(st);
    return res;
}

}  // namespace kam

namespace kam {

HamiltonianJet decaying_perturbation(int d, int n, double eps, double rho, int cutoff, int max_degree,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    HamiltonianJet P(d, n, 4, -1);
    const int m = d + 2 * n;
    std::vector<int> e(m, 0);
    // Enumerate exponent vectors in lexicographic order (deterministic draws).
    std::function<void(int, int)> rec = [&](int pos, int budget) {
        if (pos == m) {
            Signature s = make_signature(d, n);
            for (int i = 0; i < d; ++i) s.a[i] = e[i];
            for (int j = 0; j < n; ++j) s.b[j] = e[d + j], s.c[j] = e[d + n + j];
            FourierSeries f(d, cutoff);
            for (std::size_t q = 0; q < f.num_modes(); ++q) {
                const double a = u(rng), b = u(rng);
                f.raw(q) = eps * cplx(a, b) * std::exp(-rho * norm_l1(f.mode(q)));
            }
            P.add(s, f);
            return;
        }
        const int cost = pos < d ? 2 : 1;
        for (int v = 0; v * cost <= budget; ++v) {
            e[pos] = v;
            rec(pos + 1, budget - v * cost);
        }
        e[pos] = 0;
    };
    rec(0, max_degree);
    HamiltonianJet R = symmetrize_reality(P);
    // no energy constant
    const Signature s0 = make_signature(d, n);
    if (const FourierSeries* c = R.find(s0)) {
        FourierSeries f = *c;
        f.at(Index(d, 0)) = 0.0;
        R.set(s0, f);
    }
    return R;
}

}  // namespace kam
