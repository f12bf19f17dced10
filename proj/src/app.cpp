#include "kam/app.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "kam/atlas.hpp"
#include "kam/driver.hpp"
#include "kam/multiscale.hpp"
#include "kam/stability.hpp"

namespace kam {

int exit_code_for(ErrorClass c) {
    switch (c) {
        case ErrorClass::Config: return 2;
        case ErrorClass::Exclusion: return 3;
        case ErrorClass::Numeric: return 4;
    }
    return 4;
}

namespace {

const char* class_name(ErrorClass c) {
    switch (c) {
        case ErrorClass::Config: return "config";
        case ErrorClass::Exclusion: return "exclusion";
        case ErrorClass::Numeric: return "numeric";
    }
    return "numeric";
}

/// Fixed-format number for CSV cells.
std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

ojson index_json(const Index& k) { return ojson(std::vector<int>(k.begin(), k.end())); }

ojson divisor_json(const DivisorReport& r) {
    return {{"ok", r.ok},
            {"worst_k", index_json(r.worst_k)},
            {"j1", r.j1},
            {"j2", r.j2},
            {"worst_value", r.worst_value},
            {"worst_margin", r.worst_margin}};
}

ojson cert_json(const DecayCertificate& c) {
    return {{"provenance", provenance_name(c.provenance)},
            {"norm_bound", c.norm_bound},
            {"alpha", c.alpha},
            {"threshold", c.threshold},
            {"sites", c.region.sites},
            {"block", c.region.block},
            {"diameter", c.region.diameter},
            {"compounded_constant", c.compounded_constant},
            {"notes", c.notes}};
}

/// Collects assertion verdicts for the report.
struct Checks {
    std::vector<Assertion> list;
    void at_most(const std::string& name, double value, double limit) {
        list.push_back({name, value, limit, value <= limit});
    }
    void at_least(const std::string& name, double value, double limit) {
        list.push_back({name, value, limit, value >= limit});
    }
    void truth(const std::string& name, bool ok) { list.push_back({name, ok ? 1.0 : 0.0, 1.0, ok}); }
    bool all() const {
        for (const auto& a : list)
            if (!a.passed) return false;
        return true;
    }
    ojson json() const {
        ojson arr = ojson::array();
        for (const auto& a : list)
            arr.push_back({{"name", a.name}, {"value", a.value}, {"limit", a.limit}, {"passed", a.passed}});
        return arr;
    }
};

struct ModeResult {
    ojson results = ojson::object();
    Checks checks;
    std::vector<std::pair<std::string, std::string>> sidecars;
    std::vector<std::string> summary;
};

// ---- run -------------------------------------------------------------------

HamiltonianJet build_perturbation(const RunConfig& c) {
    const auto& P = c.perturbation;
    if (P.terms.empty())
        return decaying_perturbation(c.d, c.n, P.amplitude, P.rho, P.cutoff, P.max_degree, c.seed);
    int cutoff = 0;
    for (const auto& t : P.terms) cutoff = std::max(cutoff, norm_inf(t.k));
    HamiltonianJet J(c.d, c.n, 4, -1);
    for (const auto& t : P.terms) {
        Signature s = make_signature(c.d, c.n);
        s.a = t.y;
        s.b = t.z;
        s.c = t.zbar;
        if (s.weighted_degree() > 4) throw ConfigError("perturbation.terms: weighted degree above 4");
        FourierSeries f(c.d, cutoff);
        f.at(t.k) = cplx(t.re, t.im) * P.amplitude;
        J.add(s, f);
    }
    return symmetrize_reality(J);
}

ScheduleConfig schedule_config(const RunConfig& c) {
    ScheduleConfig s;
    s.A = c.A;
    s.C = c.C;
    s.s0 = c.s0;
    s.r0 = c.r0;
    s.tau = c.tau;
    s.eps = c.perturbation.amplitude;
    s.N_max = c.N_max;
    return s;
}

OmegaMap omega_map_of(const RunConfig& c) { return c.omega_map.dim ? c.omega_map : OmegaMap::identity(c.d); }

struct RunBundle {
    KamState initial;
    InitialReport irep;
    TorusResult torus;
    int l_star = 0;
};

RunBundle execute_run(const RunConfig& c, ModeResult& mr) {
    KamSchedule sched(schedule_config(c));
    InitialData D;
    D.xi = c.xi;
    D.Omega = c.Omega;
    D.omega_map = omega_map_of(c);
    D.P0 = build_perturbation(c);
    D.box_lo = c.box_lo;
    D.box_hi = c.box_hi;
    D.gamma = c.gamma;
    D.box_half_width = c.box_half_width;
    RunBundle rb;
    rb.l_star = sched.l_star();
    rb.initial = initial_step(D, sched, &rb.irep);
    RunOptions ro;
    ro.max_levels = c.run.levels;
    ro.stop_threshold = c.run.stop_threshold;
    ro.step.cap = c.run.cap;
    ro.step.lie_order = c.run.lie_order;
    ro.step.strict = c.run.strict;
    rb.torus = run(rb.initial, sched, ro);

    const auto& T = rb.torus;
    ojson init = {{"l_star", rb.l_star},
                  {"eps_low", rb.initial.eps_low},
                  {"eps_high", rb.initial.eps_high},
                  {"smallness", rb.irep.smallness},
                  {"omega", rb.initial.omega},
                  {"diophantine", divisor_json(rb.irep.diophantine)},
                  {"melnikov", divisor_json(rb.irep.melnikov)},
                  {"doubled_melnikov", divisor_json(rb.irep.doubled)},
                  {"surviving_fraction", rb.irep.surviving_fraction},
                  {"atlas_boxes", rb.initial.atlas ? rb.initial.atlas->boxes.size() : 0},
                  {"box_sampling", c.box_lo.empty() ? "none" : "box centers and corners"}};
    ojson levels = ojson::array();
    std::ostringstream csv;
    csv << "level,N,eps_meas,eps_sched,eps_high,omega_shift,B_symmetry,reality,residual\n";
    for (const auto& lg : T.log) {
        levels.push_back({{"level", lg.level},
                          {"N", lg.N},
                          {"eps_meas", lg.eps_meas},
                          {"eps_sched", lg.eps_sched},
                          {"eps_high", lg.eps_high},
                          {"omega_shift", lg.omega_shift},
                          {"B_symmetry", lg.B_symmetry},
                          {"reality", lg.reality},
                          {"residual", lg.residual}});
        csv << lg.level << ',' << lg.N << ',' << num(lg.eps_meas) << ',' << num(lg.eps_sched) << ','
            << num(lg.eps_high) << ',' << num(lg.omega_shift) << ',' << num(lg.B_symmetry) << ','
            << num(lg.reality) << ',' << num(lg.residual) << '\n';
        const std::string tag = "level " + std::to_string(lg.level) + " ";
        mr.checks.at_most(tag + "B symmetry", lg.B_symmetry, c.tol.symmetry);
        mr.checks.at_most(tag + "reality of P", lg.reality, c.tol.reality);
        mr.checks.at_most(tag + "homological residual", lg.residual, c.tol.residual);
    }
    mr.checks.at_most("torus invariance residual / final eps", T.invariance_residual,
                      10.0 * std::max(T.final_eps, 1e-300));
    mr.results["initial"] = init;
    mr.results["levels"] = levels;
    mr.results["contraction_exponents"] = T.contraction_exponents;
    mr.results["omega_star"] = T.omega_star;
    mr.results["B_final_self_adjoint_violation"] = self_adjoint_violation(T.B_final);
    mr.results["B_final_max_abs"] = T.B_final.max_abs();
    mr.results["final_eps"] = T.final_eps;
    mr.results["invariance_residual"] = T.invariance_residual;
    mr.results["warnings"] = T.warnings;
    mr.sidecars.emplace_back("levels.csv", csv.str());
    std::ostringstream s;
    s << "levels run: " << T.log.size() << ", final eps " << num(T.final_eps) << ", invariance residual "
      << num(T.invariance_residual);
    mr.summary.push_back(s.str());
    for (std::size_t i = 0; i < T.contraction_exponents.size(); ++i)
        mr.summary.push_back("contraction exponent " + std::to_string(i + 1) + ": " + num(T.contraction_exponents[i]));
    return rb;
}

// ---- stability ---------------------------------------------------------------

void execute_stability(const RunConfig& c, ModeResult& mr) {
    RealVec omega;
    FourierSeries B;
    if (c.stability.source == "run") {
        RunBundle rb = execute_run(c, mr);
        omega = rb.torus.omega_star;
        B = transpose(rb.torus.B_final);  // generator acts on z with the transposed coefficient matrix
    } else {
        omega = omega_map_of(c)(c.xi);
        B = FourierSeries(c.d, 0, c.n, c.n);
    }
    const auto& S = c.stability;
    CVec z0(c.n);
    for (int j = 0; j < c.n; ++j) z0[j] = cplx(1.0 / (j + 1), 0.5 / (j + 1));
    std::vector<RealVec> phases = S.x0.empty() ? std::vector<RealVec>{RealVec(c.d, 0.0)} : S.x0;
    ojson per_phase = ojson::array();
    double worst_drift = 0.0, worst_lyap = 0.0, worst_free = 0.0;
    for (std::size_t p = 0; p < phases.size(); ++p) {
        const LinearTrajectory tr = integrate_linearized(omega, c.Omega, B, z0, S.T, S.dt, phases[p]);
        const double drift = l2_drift(tr);
        const LinearTrajectory lt =
            integrate_linearized(omega, c.Omega, B, z0, S.T_lyapunov, S.dt, phases[p], S.stride);
        const double ly = lyapunov_estimate(lt);
        const LyapunovHalves h = lyapunov_halves(lt);
        ojson row = {{"x0", phases[p]}, {"drift", drift}, {"lyapunov", ly}, {"lyapunov_first_half", h.first},
                     {"lyapunov_second_half", h.second}};
        if (c.stability.source == "zero") {
            const double fe = max_free_error(tr, c.Omega);
            row["closed_form_error"] = fe;
            worst_free = std::max(worst_free, fe);
        }
        per_phase.push_back(row);
        worst_drift = std::max(worst_drift, drift);
        worst_lyap = std::max(worst_lyap, std::abs(ly));
        if (p == 0) {
            std::ostringstream os;
            LinearTrajectory sampled;
            for (std::size_t s = 0; s < tr.z.size(); s += S.stride) {
                sampled.times.push_back(tr.times[s]);
                sampled.z.push_back(tr.z[s]);
            }
            write_trajectory_csv(os, sampled);
            mr.sidecars.emplace_back("trajectory.csv", os.str());
        }
    }
    const OrderStudy st = order_study(omega, c.Omega, B, z0, S.T, S.order_dt0, S.order_levels, 8, phases[0]);
    // Sentinels: a non-self-adjoint coupling must break conservation and a planted gain must be measured.
    FourierSeries Bs = B.with_cutoff(std::max(B.cutoff(), 0)) + nonsymmetric_sentinel(c.d, c.n, 0.05);
    const LinearTrajectory sent = integrate_linearized(omega, c.Omega, Bs, z0, S.T, S.dt, phases[0], S.stride);
    const ConservationVerdict sv = check_conservation(sent, c.tol.drift);
    const LinearTrajectory gain =
        integrate_generator(gain_sentinel(c.Omega, 0.01), c.n, z0, S.T_lyapunov, S.dt, S.stride);
    const double gain_rate = lyapunov_estimate(gain);

    mr.results["stability"] = {{"source", S.source},
                               {"omega", omega},
                               {"phases", per_phase},
                               {"max_drift", worst_drift},
                               {"max_abs_lyapunov", worst_lyap},
                               {"order_study", {{"dts", st.dts}, {"errors", st.errors}, {"slopes", st.slopes},
                                                {"order", st.order}}},
                               {"sentinel_drift", sv.drift},
                               {"sentinel_detected", !sv.conserved},
                               {"gain_sentinel_exponent", gain_rate}};
    mr.checks.at_most("L2 drift", worst_drift, c.tol.drift);
    mr.checks.at_most("|Lyapunov estimate|", worst_lyap, c.tol.lyapunov);
    mr.checks.at_most("|integrator order - 4|", std::abs(st.order - 4.0), 0.5);
    mr.checks.truth("non-self-adjoint sentinel detected", !sv.conserved);
    mr.checks.at_most("|gain sentinel exponent - 0.01|", std::abs(gain_rate - 0.01), 1e-4);
    if (c.stability.source == "zero") mr.checks.at_most("closed-form error", worst_free, 1e-8);
    mr.summary.push_back("max L2 drift " + num(worst_drift) + ", max |Lyapunov| " + num(worst_lyap) +
                         ", integrator order " + num(st.order));
}

// ---- atlas ---------------------------------------------------------------------

void execute_atlas(const RunConfig& c, ModeResult& mr) {
    const auto& A = c.atlas;
    ojson rows = ojson::array();
    std::ostringstream csv;
    csv << "eps,gamma,excluded_fraction,std_error,paving_excluded\n";
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < A.eps_values.size(); ++i) {
        const double eps = A.eps_values[i];
        ExclusionSpec spec;
        spec.omega_map = omega_map_of(c);
        spec.Omega = c.Omega;
        spec.N = A.N;
        spec.gamma = A.gamma_scale * std::sqrt(eps);
        spec.tau = c.tau;
        auto keep = [&](const RealVec& xi) { return exclusion_keep(spec, xi); };
        const MonteCarloEstimate mc = monte_carlo_excluded(c.box_lo, c.box_hi, keep, A.samples, c.seed + i);
        double paving = -1.0;
        if (A.paving_half_width > 0) {
            const ParameterAtlas root = root_atlas(c.box_lo, c.box_hi);
            const PavingResult pv = pave_and_filter(root, 1, A.paving_half_width, keep);
            paving = 1.0 - measure_fraction(pv.atlas, root);
        }
        rows.push_back({{"eps", eps},
                        {"gamma", spec.gamma},
                        {"excluded_fraction", mc.excluded_fraction},
                        {"std_error", mc.std_error},
                        {"samples", mc.samples},
                        {"paving_excluded", paving}});
        csv << num(eps) << ',' << num(spec.gamma) << ',' << num(mc.excluded_fraction) << ',' << num(mc.std_error)
            << ',' << num(paving) << '\n';
        if (mc.excluded_fraction > 0) {
            lx.push_back(std::log(eps));
            ly.push_back(std::log(mc.excluded_fraction));
        }
    }
    double slope = std::nan(""), C = std::nan(""), worst_ratio = std::nan("");
    if (lx.size() >= 2) {
        const double m = static_cast<double>(lx.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) sx += lx[i], sy += ly[i], sxx += lx[i] * lx[i], sxy += lx[i] * ly[i];
        slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        // C from the geometric mean of fraction / sqrt(eps); worst multiplicative deviation from C sqrt(eps)
        double lc = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) lc += ly[i] - 0.5 * lx[i];
        lc /= m;
        C = std::exp(lc);
        worst_ratio = 1.0;
        for (std::size_t i = 0; i < lx.size(); ++i)
            worst_ratio = std::max(worst_ratio, std::exp(std::abs(ly[i] - 0.5 * lx[i] - lc)));
    }
    mr.results["atlas"] = {{"rows", rows}, {"loglog_slope", slope}, {"sqrt_eps_constant", C},
                           {"worst_ratio_to_fit", worst_ratio}};
    mr.sidecars.emplace_back("atlas.csv", csv.str());
    const bool have = std::isfinite(slope);
    mr.checks.truth("excluded fraction positive at two or more eps", have);
    if (have) {
        mr.checks.at_most("slope / (1/2) factor", std::max(slope / 0.5, 0.5 / std::max(slope, 1e-300)), 3.0);
        mr.checks.at_most("fraction vs C sqrt(eps) factor", worst_ratio, 3.0);
    }
    mr.summary.push_back("log-log slope of excluded fraction vs eps: " + num(slope));
}

// ---- greens ----------------------------------------------------------------------

LatticeMatrix random_operator(std::mt19937_64& rng, std::vector<Index> region, int d, int n, double eps, double rho) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    LatticeMatrix T;
    T.d = d;
    T.block = n;
    T.region = std::move(region);
    T.omega = d == 1 ? RealVec{phi} : RealVec{1.0, phi};
    for (int j = 0; j < n; ++j) T.offsets.push_back(u01(rng) + j);
    const int cutoff = 3;
    FourierSeries S(d, cutoff, n, n);
    for (std::size_t q = 0; q < S.num_modes(); ++q) {
        const double w = eps * std::exp(-rho * norm_l1(S.mode(q)));
        for (int r = 0; r < n; ++r)
            for (int cc = 0; cc < n; ++cc) S.raw(q, r, cc) = cplx(u(rng), u(rng)) * w;
    }
    T.symbol = S + adjoint(S);
    T.symbol *= cplx(0.5, 0.0);
    T.sigma = 0.5 * u(rng);
    T.decay_s = rho;
    T.decay_c = symbol_decay_constant(T.symbol, rho);
    return T;
}

}  // namespace

GreensInstance make_greens_instance(const GreensSection& g, std::uint64_t seed, int index) {
    static const char* methods[] = {"neumann", "cl1", "two_scale", "cl2"};
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(index));
    GreensInstance in;
    in.index = index;
    in.method = methods[index % 4];
    in.d = g.dims[(index / 4) % g.dims.size()];
    const int hmax = (g.max_side - 1) / 2;
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, std::max(lo, hi))(rng); };
    const int d = in.d, n = g.block;
    if (in.method == "neumann") {
        const int h = pick(1, hmax);
        in.half_widths.assign(d, h);
        in.T0 = random_operator(rng, cube_region(d, h), d, n, g.symbol_eps, g.rho);
        // A perturbation small enough for the explicit series bound, with a random scale.
        const DirectInverse di = invert_direct(in.T0, 1);
        const double gamma = std::min(di.cert.alpha, g.rho);
        const double CG = std::max(1.0, di.cert.norm_bound * std::exp(gamma));
        const double nU = static_cast<double>(n) * in.T0.sites();
        const double size = std::min(1e-7, 0.2 / (CG * CG * nU * nU)) * std::uniform_real_distribution<double>(0.1, 1.0)(rng);
        FourierSeries dS(d, 2, n, n);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (std::size_t q = 0; q < dS.num_modes(); ++q)
            for (int r = 0; r < n; ++r)
                for (int cc = 0; cc < n; ++cc)
                    dS.raw(q, r, cc) = cplx(u(rng), u(rng)) * size * 0.5 * std::exp(-g.rho * norm_l1(dS.mode(q)));
        in.T = in.T0;
        in.T.symbol = in.T0.symbol + dS + adjoint(dS);
    } else if (in.method == "cl1") {
        const int h = pick(3, hmax);
        in.half_widths.assign(d, h);
        in.M = pick(2, 3);
        in.T = random_operator(rng, cube_region(d, h), d, n, g.symbol_eps, g.rho);
    } else if (in.method == "two_scale") {
        const int h = pick(4, hmax);
        in.half_widths.assign(d, h);
        in.M = 1;
        in.K = pick(3, h - 1);
        in.T = random_operator(rng, cube_region(d, h), d, n, g.symbol_eps, g.rho);
    } else {
        const int h = d == 1 ? pick(4, std::min(hmax, 10)) : pick(3, std::min(hmax, 4));
        in.half_widths.assign(d, h);
        in.M = 2;
        if (d == 2 && pick(0, 1)) in.shift = Index{pick(1, h) * (pick(0, 1) ? 1 : -1), pick(1, h) * (pick(0, 1) ? 1 : -1)};
        const ElementaryRegion R = make_elementary_region(Index(d, 0), in.half_widths, in.shift);
        in.T = random_operator(rng, R.sites, d, n, g.symbol_eps, g.rho);
        if (pick(0, 1)) {
            // plant a near-resonant site
            const Index& k = R.sites[std::uniform_int_distribution<std::size_t>(0, R.sites.size() - 1)(rng)];
            in.T.sigma = 0.0;
            in.T.sigma = -in.T.diag(0, k) + (pick(0, 1) ? 0.01 : -0.01);
        }
    }
    return in;
}

GreensOutcome run_greens_instance(const GreensInstance& in) {
    GreensOutcome out;
    try {
        const int d = in.d;
        if (in.method == "neumann") {
            const DirectInverse base = invert_direct(in.T0, 1);
            out.cert = neumann_transfer(base.cert, variation_delta(in.T0, in.T));
        } else if (in.method == "cl1") {
            const ElementaryRegion R = region_from_sites(in.T.region);
            std::map<Index, SiteCert> certs;
            for (const auto& x : R.sites) {
                const auto W = cube_intersect(x, in.M, R);
                certs[x] = SiteCert{W, invert_direct(in.T.on_region(W), 1).cert};
            }
            out.cert = cl1_couple(in.T, certs, in.M).cert;
        } else if (in.method == "two_scale") {
            const ElementaryRegion R = region_from_sites(in.T.region);
            const DecayCertificate certK = invert_direct(in.T.on_region(cube_region(d, in.K)), 1).cert;
            std::map<Index, DecayCertificate> small;
            for (const auto& x : R.sites)
                if (2 * norm_inf(x) > in.K) small[x] = invert_direct(in.T.on_region(cube_intersect(x, in.M, R)), 1).cert;
            TwoScaleConfig tc{in.half_widths[0], in.K, in.M, 2};
            out.cert = two_scale_couple(in.T, certK, small, tc).cert;
        } else {
            const ElementaryRegion R = make_elementary_region(Index(d, 0), in.half_widths, in.shift);
            ScaleConfig sc;
            sc.rho = in.T.decay_s;
            sc.bad_annuli_allowance = 3;
            out.cert = cl2_couple(in.T, sc, R, in.M, 1.0).result.cert;
        }
        out.certified = true;
    } catch (const KamError& e) {
        out.refusal = e.what();
        return out;
    }
    const DirectInverse truth = invert_direct(in.T, out.cert.threshold);
    out.soundness = check_certificate(out.cert, truth.G, in.T.region, in.T.block);
    return out;
}

namespace {

void execute_greens(const RunConfig& c, ModeResult& mr) {
    const auto& g = c.greens;
    ojson certs = ojson::array();
    std::ostringstream csv;
    csv << "instance,method,d,sites,certified,norm_bound,alpha,threshold,worst_ratio,norm_ratio,violations,refusal\n";
    std::map<std::string, std::array<int, 3>> tally;  // certified, refused, violations
    int violations = 0, certified = 0;
    for (int i = 0; i < g.instances; ++i) {
        const GreensInstance in = make_greens_instance(g, c.seed, i);
        const GreensOutcome o = run_greens_instance(in);
        auto& t = tally[in.method];
        if (o.certified) {
            ++t[0];
            ++certified;
            t[2] += o.soundness.violations;
            violations += o.soundness.violations;
            ojson cj = cert_json(o.cert);
            cj["instance"] = i;
            cj["method"] = in.method;
            certs.push_back(cj);
        } else {
            ++t[1];
        }
        std::string why = o.refusal;
        std::replace(why.begin(), why.end(), ',', ';');
        std::replace(why.begin(), why.end(), '\n', ' ');
        csv << i << ',' << in.method << ',' << in.d << ',' << in.T.sites() << ',' << (o.certified ? 1 : 0) << ','
            << num(o.cert.norm_bound) << ',' << num(o.cert.alpha) << ',' << o.cert.threshold << ','
            << num(o.soundness.worst_ratio) << ',' << num(o.soundness.norm_ratio) << ',' << o.soundness.violations
            << ',' << why << '\n';
    }
    ojson per = ojson::object();
    for (const auto& [m, t] : tally) per[m] = {{"certified", t[0]}, {"refused", t[1]}, {"violations", t[2]}};
    mr.results["greens"] = {{"instances", g.instances}, {"certified", certified}, {"violations", violations},
                            {"per_method", per}, {"certificates", certs}};
    mr.sidecars.emplace_back("greens.csv", csv.str());
    mr.checks.at_most("certificate violations", violations, 0);
    mr.checks.at_least("certificates issued", certified, 1);
    mr.summary.push_back(std::to_string(certified) + " certificates over " + std::to_string(g.instances) +
                         " instances, " + std::to_string(violations) + " violations");
}

// ---- sigma scan -------------------------------------------------------------------

void execute_sigma(const RunConfig& c, ModeResult& mr) {
    const auto& S = c.sigma;
    std::mt19937_64 rng(c.seed);
    LatticeMatrix T = random_operator(rng, cube_region(S.d, S.half_width), S.d, 1, S.symbol_eps, S.rho);
    T.sigma = 0.0;
    LatticeMatrix Tdiag = T;
    Tdiag.symbol = FourierSeries(S.d, 0, 1, 1);
    Tdiag.decay_c = 0.0;
    const SigmaTargets tg{S.alpha_target, S.threshold, S.norm_target};
    const SigmaScanReport diag = sigma_scan(Tdiag, S.lo, S.hi, tg, S.points_per_unit, 1e-10);
    const auto exact = diagonal_bad_intervals(Tdiag, S.lo, S.hi, S.norm_target);
    const double exact_measure = interval_measure(exact);
    ojson ivs = ojson::array();
    for (const auto& [a, b] : diag.bad_intervals) ivs.push_back({a, b});
    ojson res = {{"sites", T.sites()},
                 {"step", diag.step},
                 {"diagonal_measure", diag.bad_measure},
                 {"exact_measure", exact_measure},
                 {"diagonal_intervals", ivs},
                 {"exact_interval_count", exact.size()}};
    // Grid resolution: one step per interval endpoint.
    const double resolution = 2.0 * diag.step * std::max<std::size_t>(1, exact.size());
    mr.checks.at_most("|scan - exact| diagonal measure", std::abs(diag.bad_measure - exact_measure), resolution);
    std::ostringstream csv;
    csv << "sigma,diag_pass,diag_norm" << (S.symbol_eps > 0 ? ",sym_pass,sym_norm" : "") << '\n';
    if (S.symbol_eps > 0) {
        const SigmaScanReport sym = sigma_scan(T, S.lo, S.hi, tg, S.points_per_unit, 1e-10);
        const double gate = std::exp(-4.0 * S.rho * std::max(1, S.threshold));
        const double ratio = exact_measure > 0 ? sym.bad_measure / exact_measure : std::nan("");
        res["symbol_size"] = T.decay_c;
        res["small_symbol_gate"] = gate;
        res["symbol_measure"] = sym.bad_measure;
        res["measure_ratio"] = ratio;
        if (T.decay_c <= gate)
            mr.checks.at_most("symbol measure change factor", std::max(ratio, 1.0 / ratio), 2.0);
        else
            res["note"] = "symbol above the small-symbol gate: measure change not asserted";
        for (std::size_t i = 0; i < diag.samples.size(); ++i)
            csv << num(diag.samples[i].sigma) << ',' << diag.samples[i].pass << ',' << num(diag.samples[i].norm) << ','
                << sym.samples[i].pass << ',' << num(sym.samples[i].norm) << '\n';
    } else {
        for (const auto& s : diag.samples) csv << num(s.sigma) << ',' << s.pass << ',' << num(s.norm) << '\n';
    }
    mr.results["sigma_scan"] = res;
    mr.sidecars.emplace_back("sigma.csv", csv.str());
    mr.summary.push_back("bad-set measure: scan " + num(diag.bad_measure) + ", exact " + num(exact_measure));
}

// ---- verify ------------------------------------------------------------------------

ojson load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("verify: cannot read report '" + path + "'");
    try {
        return ojson::parse(in);
    } catch (const ojson::parse_error& e) {
        throw ConfigError("verify: report '" + path + "' is not valid JSON: " + e.what());
    }
}

void execute_verify(const RunConfig& c, const std::string& base_dir, ModeResult& mr) {
    std::filesystem::path p(c.verify_report);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    const ojson saved = load_json(p.string());
    if (!saved.contains("schema") || saved["schema"] != kReportSchema || !saved.contains("config"))
        throw ConfigError("verify: '" + p.string() + "' is not a report of schema " + kReportSchema);
    const RunConfig replay = config_from_json(saved["config"]);
    if (replay.mode == Mode::Verify) throw ConfigError("verify: cannot replay a verify report");
    const Outcome again = dispatch(replay, p.parent_path().string());
    const bool same_results = again.report["results"] == saved["results"];
    const bool same_status = again.report["status"] == saved["status"];
    mr.checks.truth("replayed results identical", same_results);
    mr.checks.truth("replayed status identical", same_status);
    int checked = 0, bad = 0;
    if (replay.mode == Mode::Greens && saved["results"].contains("greens")) {
        for (const auto& cj : saved["results"]["greens"]["certificates"]) {
            const GreensInstance in = make_greens_instance(replay.greens, replay.seed, cj["instance"].get<int>());
            DecayCertificate cert;
            cert.norm_bound = cj["norm_bound"].get<double>();
            cert.alpha = cj["alpha"].get<double>();
            cert.threshold = cj["threshold"].get<int>();
            const DirectInverse truth = invert_direct(in.T, cert.threshold);
            const SoundnessReport s = check_certificate(cert, truth.G, in.T.region, in.T.block);
            ++checked;
            if (!s.sound) ++bad;
        }
        mr.checks.at_most("re-checked certificate violations", bad, 0);
    }
    mr.results["verify"] = {{"report", c.verify_report},
                            {"replayed_mode", mode_name(replay.mode)},
                            {"results_identical", same_results},
                            {"status_identical", same_status},
                            {"certificates_checked", checked},
                            {"certificate_violations", bad}};
    mr.summary.push_back(std::string("replay of ") + mode_name(replay.mode) + " report: " +
                         (same_results ? "identical" : "DIFFERENT") + ", " + std::to_string(checked) +
                         " certificates re-checked");
}

}  // namespace

Outcome dispatch(const RunConfig& cfg, const std::string& base_dir) {
    Outcome out;
    ModeResult mr;
    ojson status;
    std::string error;
    ErrorClass cls = ErrorClass::Numeric;
    bool failed = false;
    try {
        if (auto v = config_violations(cfg); !v.empty()) {
            std::string msg = "invalid configuration:";
            for (const auto& s : v) msg += "\n  - " + s;
            throw ConfigError(msg);
        }
        switch (cfg.mode) {
            case Mode::Run: execute_run(cfg, mr); break;
            case Mode::Stability: execute_stability(cfg, mr); break;
            case Mode::Atlas: execute_atlas(cfg, mr); break;
            case Mode::Greens: execute_greens(cfg, mr); break;
            case Mode::SigmaScan: execute_sigma(cfg, mr); break;
            case Mode::Verify: execute_verify(cfg, base_dir, mr); break;
        }
    } catch (const KamError& e) {
        failed = true;
        cls = e.error_class();
        error = e.what();
    } catch (const std::exception& e) {
        failed = true;
        cls = ErrorClass::Numeric;
        error = e.what();
    }
    const bool assertions_ok = mr.checks.all();
    if (failed) {
        out.exit_code = exit_code_for(cls);
        status = {{"exit_code", out.exit_code}, {"class", class_name(cls)}, {"message", error}};
    } else if (!assertions_ok && cfg.run.strict) {
        out.exit_code = exit_code_for(ErrorClass::Numeric);
        status = {{"exit_code", out.exit_code}, {"class", "numeric"}, {"message", "hard assertion failed"}};
    } else {
        out.exit_code = 0;
        status = {{"exit_code", 0},
                  {"class", "ok"},
                  {"message", assertions_ok ? "all assertions passed" : "assertions failed (warnings only)"}};
    }
    out.report["schema"] = kReportSchema;
    out.report["mode"] = mode_name(cfg.mode);
    out.report["seed"] = cfg.seed;
    out.report["config"] = config_to_json(cfg);
    out.report["results"] = mr.results;
    out.report["assertions"] = mr.checks.json();
    out.report["status"] = status;
    out.sidecars = std::move(mr.sidecars);

    std::ostringstream s;
    s << "mode: " << mode_name(cfg.mode) << "  seed: " << cfg.seed << '\n';
    for (const auto& line : mr.summary) s << line << '\n';
    for (const auto& a : mr.checks.list)
        s << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << num(a.value) << " (limit " << num(a.limit) << ")\n";
    if (failed) s << "error (" << class_name(cls) << "): " << error << '\n';
    s << "exit code: " << out.exit_code << '\n';
    out.summary = s.str();
    return out;
}

std::string dump_report(const ojson& report) { return report.dump(2) + "\n"; }

void write_outcome(const Outcome& out, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto put = [&](const std::string& name, const std::string& text) {
        std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
        if (!f) throw KamError(ErrorClass::Numeric, "cannot write " + (fs::path(out_dir) / name).string());
        f << text;
    };
    put("report.json", dump_report(out.report));
    put("summary.txt", out.summary);
    for (const auto& [name, text] : out.sidecars) put(name, text);
}

}  // namespace kam
