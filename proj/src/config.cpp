#include "kam/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "kam/driver.hpp"
#include "kam/errors.hpp"

namespace kam {

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::Run: return "run";
        case Mode::Atlas: return "atlas";
        case Mode::Greens: return "greens";
        case Mode::SigmaScan: return "sigma-scan";
        case Mode::Stability: return "stability";
        case Mode::Verify: return "verify";
    }
    return "unknown";
}

std::optional<Mode> parse_mode(const std::string& s) {
    for (Mode m : {Mode::Run, Mode::Atlas, Mode::Greens, Mode::SigmaScan, Mode::Stability, Mode::Verify})
        if (s == mode_name(m)) return m;
    return std::nullopt;
}

namespace {

/// Collects violations while reading typed fields out of nested objects.
class Reader {
public:
    explicit Reader(const std::string& text) : text_(text) {}
    std::vector<std::string> errors;

    /// Rejects keys of `obj` outside `allowed`.
    void keys(const ojson& obj, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!obj.is_object()) {
            errors.push_back(path + ": expected an object");
            return;
        }
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!ok.count(it.key())) errors.push_back("unknown key '" + join(path, it.key()) + "'" + where(it.key()));
    }

    template <class T>
    void get(const ojson& obj, const std::string& path, const char* key, T& out) {
        if (!obj.is_object() || !obj.contains(key)) return;
        const ojson& v = obj.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw std::runtime_error("expected a boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw std::runtime_error("expected an integer");
                if constexpr (std::is_unsigned_v<T>)
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                        throw std::runtime_error("expected a non-negative integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw std::runtime_error("expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::runtime_error("expected a string");
            } else {
                if (!v.is_array()) throw std::runtime_error("expected a list");
            }
            out = v.get<T>();
        } catch (const std::exception& e) {
            errors.push_back(join(path, key) + ": " + e.what() + where(key));
        }
    }

    void need(bool ok, const std::string& what) {
        if (!ok) errors.push_back(what);
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

private:
    /// Line of the first occurrence of "key" in the source text.
    std::string where(const std::string& key) const {
        const auto pos = text_.find("\"" + key + "\"");
        if (pos == std::string::npos) return {};
        const auto line = 1 + std::count(text_.begin(), text_.begin() + static_cast<long>(pos), '\n');
        return " (line " + std::to_string(line) + ")";
    }
    const std::string& text_;
};

RunConfig read(const ojson& j, const std::string& text) {
    Reader r(text);
    RunConfig c;
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    r.keys(j, "", {"mode", "seed", "d", "n", "schedule", "Omega", "xi", "omega_map", "box", "gamma", "perturbation",
                   "run", "tolerances", "greens", "sigma_scan", "stability", "atlas", "verify"});
    std::string mode = mode_name(c.mode);
    r.get(j, "", "mode", mode);
    if (auto m = parse_mode(mode)) c.mode = *m;
    else r.errors.push_back("mode: unknown mode '" + mode + "' (run, atlas, greens, sigma-scan, stability, verify)");
    r.get(j, "", "seed", c.seed);
    r.get(j, "", "d", c.d);
    r.get(j, "", "n", c.n);
    c.tau = c.d + 2.0;  // Diophantine exponent default d + 2, overridable in schedule.tau
    r.get(j, "", "Omega", c.Omega);
    r.get(j, "", "xi", c.xi);
    r.get(j, "", "gamma", c.gamma);
    if (j.contains("schedule")) {
        const ojson& s = j["schedule"];
        r.keys(s, "schedule", {"A", "s0", "r0", "tau", "N_max", "C"});
        r.get(s, "schedule", "A", c.A);
        r.get(s, "schedule", "s0", c.s0);
        r.get(s, "schedule", "r0", c.r0);
        r.get(s, "schedule", "tau", c.tau);
        r.get(s, "schedule", "N_max", c.N_max);
        std::vector<double> C(c.C.begin(), c.C.end());
        r.get(s, "schedule", "C", C);
        if (C.size() == 9) std::copy(C.begin(), C.end(), c.C.begin());
        else r.errors.push_back("schedule.C: expected 9 constants C0..C8");
    }
    if (j.contains("omega_map")) {
        const ojson& m = j["omega_map"];
        if (m.is_string()) {
            if (m.get<std::string>() != "identity") r.errors.push_back("omega_map: only \"identity\" or {components}");
        } else {
            r.keys(m, "omega_map", {"components"});
            if (m.is_object() && m.contains("components") && m["components"].is_array()) {
                c.omega_map.dim = 0;
                for (const auto& comp : m["components"]) {
                    std::vector<OmegaMap::Term> terms;
                    if (!comp.is_array()) {
                        r.errors.push_back("omega_map.components: each component is a list of terms");
                        continue;
                    }
                    for (const auto& t : comp) {
                        r.keys(t, "omega_map.components[]", {"coeff", "exponents"});
                        OmegaMap::Term term;
                        r.get(t, "omega_map.components[]", "coeff", term.coeff);
                        r.get(t, "omega_map.components[]", "exponents", term.exponents);
                        terms.push_back(term);
                    }
                    c.omega_map.components.push_back(terms);
                }
                c.omega_map.dim = c.d;
            } else {
                r.errors.push_back("omega_map: expected \"identity\" or {\"components\": [...]}");
            }
        }
    }
    if (j.contains("box")) {
        const ojson& b = j["box"];
        r.keys(b, "box", {"lo", "hi", "half_width"});
        r.get(b, "box", "lo", c.box_lo);
        r.get(b, "box", "hi", c.box_hi);
        r.get(b, "box", "half_width", c.box_half_width);
    }
    if (j.contains("perturbation")) {
        const ojson& p = j["perturbation"];
        auto& P = c.perturbation;
        r.keys(p, "perturbation", {"amplitude", "rho", "cutoff", "max_degree", "terms"});
        r.get(p, "perturbation", "amplitude", P.amplitude);
        r.get(p, "perturbation", "rho", P.rho);
        r.get(p, "perturbation", "cutoff", P.cutoff);
        r.get(p, "perturbation", "max_degree", P.max_degree);
        if (p.is_object() && p.contains("terms")) {
            if (!p["terms"].is_array()) r.errors.push_back("perturbation.terms: expected a list");
            else
                for (const auto& t : p["terms"]) {
                    r.keys(t, "perturbation.terms[]", {"y", "z", "zbar", "k", "re", "im"});
                    TermLiteral L;
                    r.get(t, "perturbation.terms[]", "y", L.y);
                    r.get(t, "perturbation.terms[]", "z", L.z);
                    r.get(t, "perturbation.terms[]", "zbar", L.zbar);
                    r.get(t, "perturbation.terms[]", "k", L.k);
                    r.get(t, "perturbation.terms[]", "re", L.re);
                    r.get(t, "perturbation.terms[]", "im", L.im);
                    P.terms.push_back(L);
                }
        }
    }
    if (j.contains("run")) {
        const ojson& s = j["run"];
        r.keys(s, "run", {"levels", "strict", "stop_threshold", "cap", "lie_order"});
        r.get(s, "run", "levels", c.run.levels);
        r.get(s, "run", "strict", c.run.strict);
        r.get(s, "run", "stop_threshold", c.run.stop_threshold);
        r.get(s, "run", "cap", c.run.cap);
        r.get(s, "run", "lie_order", c.run.lie_order);
    }
    if (j.contains("tolerances")) {
        const ojson& s = j["tolerances"];
        r.keys(s, "tolerances", {"symmetry", "reality", "residual", "drift", "lyapunov"});
        r.get(s, "tolerances", "symmetry", c.tol.symmetry);
        r.get(s, "tolerances", "reality", c.tol.reality);
        r.get(s, "tolerances", "residual", c.tol.residual);
        r.get(s, "tolerances", "drift", c.tol.drift);
        r.get(s, "tolerances", "lyapunov", c.tol.lyapunov);
    }
    if (j.contains("greens")) {
        const ojson& s = j["greens"];
        r.keys(s, "greens", {"instances", "dims", "max_side", "symbol_eps", "rho", "block"});
        r.get(s, "greens", "instances", c.greens.instances);
        r.get(s, "greens", "dims", c.greens.dims);
        r.get(s, "greens", "max_side", c.greens.max_side);
        r.get(s, "greens", "symbol_eps", c.greens.symbol_eps);
        r.get(s, "greens", "rho", c.greens.rho);
        r.get(s, "greens", "block", c.greens.block);
    }
    if (j.contains("sigma_scan")) {
        const ojson& s = j["sigma_scan"];
        auto& S = c.sigma;
        r.keys(s, "sigma_scan", {"d", "half_width", "lo", "hi", "points_per_unit", "norm_target", "alpha_target",
                                 "threshold", "symbol_eps", "rho"});
        r.get(s, "sigma_scan", "d", S.d);
        r.get(s, "sigma_scan", "half_width", S.half_width);
        r.get(s, "sigma_scan", "lo", S.lo);
        r.get(s, "sigma_scan", "hi", S.hi);
        r.get(s, "sigma_scan", "points_per_unit", S.points_per_unit);
        r.get(s, "sigma_scan", "norm_target", S.norm_target);
        r.get(s, "sigma_scan", "alpha_target", S.alpha_target);
        r.get(s, "sigma_scan", "threshold", S.threshold);
        r.get(s, "sigma_scan", "symbol_eps", S.symbol_eps);
        r.get(s, "sigma_scan", "rho", S.rho);
    }
    if (j.contains("stability")) {
        const ojson& s = j["stability"];
        auto& S = c.stability;
        r.keys(s, "stability", {"source", "T", "dt", "T_lyapunov", "x0", "order_dt0", "order_levels", "stride"});
        r.get(s, "stability", "source", S.source);
        r.get(s, "stability", "T", S.T);
        r.get(s, "stability", "dt", S.dt);
        r.get(s, "stability", "T_lyapunov", S.T_lyapunov);
        r.get(s, "stability", "x0", S.x0);
        r.get(s, "stability", "order_dt0", S.order_dt0);
        r.get(s, "stability", "order_levels", S.order_levels);
        r.get(s, "stability", "stride", S.stride);
    }
    if (j.contains("atlas")) {
        const ojson& s = j["atlas"];
        auto& S = c.atlas;
        r.keys(s, "atlas", {"eps_values", "gamma_scale", "samples", "N", "paving_half_width"});
        r.get(s, "atlas", "eps_values", S.eps_values);
        r.get(s, "atlas", "gamma_scale", S.gamma_scale);
        r.get(s, "atlas", "samples", S.samples);
        r.get(s, "atlas", "N", S.N);
        r.get(s, "atlas", "paving_half_width", S.paving_half_width);
    }
    if (j.contains("verify")) {
        const ojson& s = j["verify"];
        r.keys(s, "verify", {"report"});
        r.get(s, "verify", "report", c.verify_report);
    }
    for (auto& e : config_violations(c)) r.errors.push_back(std::move(e));
    if (!r.errors.empty()) {
        std::ostringstream os;
        os << "invalid configuration (" << r.errors.size() << " problem" << (r.errors.size() > 1 ? "s" : "") << "):";
        for (const auto& e : r.errors) os << "\n  - " << e;
        throw ConfigError(os.str());
    }
    return c;
}

bool finite_all(const RealVec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

std::vector<std::string> config_violations(const RunConfig& c) {
    std::vector<std::string> v;
    auto need = [&](bool ok, const std::string& what) {
        if (!ok) v.push_back(what);
    };
    need(c.d >= 1 && c.d <= 3, "d: 1 <= d <= 3");
    need(c.n >= 1 && c.n <= 3, "n: 1 <= n <= 3");
    for (auto& s : constant_ordering_violations(c.C)) v.push_back("schedule.C: " + s);
    need(c.A > 1, "schedule.A: A > 1");
    need(c.s0 > 0, "schedule.s0: s0 > 0");
    need(c.r0 > 0, "schedule.r0: r0 > 0");
    need(c.tau > 0, "schedule.tau: tau > 0");
    need(c.N_max >= 1, "schedule.N_max: N_max >= 1");
    need(static_cast<int>(c.Omega.size()) == c.n, "Omega: length must equal n");
    for (double w : c.Omega) need(w > 0 && std::isfinite(w), "Omega: entries must be positive");
    need(static_cast<int>(c.xi.size()) == (c.omega_map.dim ? c.omega_map.dim : c.d) && finite_all(c.xi),
         "xi: length must equal d");
    if (c.omega_map.dim) need(static_cast<int>(c.omega_map.components.size()) == c.d, "omega_map: d components needed");
    need(c.box_lo.size() == c.box_hi.size(), "box: lo and hi must have equal length");
    if (!c.box_lo.empty()) {
        need(static_cast<int>(c.box_lo.size()) == c.d, "box: dimension must equal d");
        for (std::size_t i = 0; i < c.box_lo.size() && i < c.box_hi.size(); ++i)
            need(c.box_hi[i] > c.box_lo[i], "box: hi > lo on every axis");
    }
    need(c.box_half_width >= 0, "box.half_width: >= 0");
    need(c.gamma > 0, "gamma: gamma > 0");
    const auto& P = c.perturbation;
    need(P.amplitude > 0 && P.amplitude < 1, "perturbation.amplitude: 0 < eps < 1");
    need(P.rho > 0, "perturbation.rho: rho > 0");
    need(P.cutoff >= 0, "perturbation.cutoff: >= 0");
    need(P.max_degree >= 0 && P.max_degree <= 4, "perturbation.max_degree: 0..4");
    for (const auto& t : P.terms) {
        need(static_cast<int>(t.y.size()) == c.d && static_cast<int>(t.k.size()) == c.d,
             "perturbation.terms: y and k need d entries");
        need(static_cast<int>(t.z.size()) == c.n && static_cast<int>(t.zbar.size()) == c.n,
             "perturbation.terms: z and zbar need n entries");
    }
    need(c.run.levels >= 1, "run.levels: >= 1");
    need(c.run.stop_threshold >= 0, "run.stop_threshold: >= 0");
    need(c.run.cap >= 1, "run.cap: >= 1");
    need(c.run.lie_order >= 1, "run.lie_order: >= 1");
    for (double t : {c.tol.symmetry, c.tol.reality, c.tol.residual, c.tol.drift, c.tol.lyapunov})
        need(t > 0, "tolerances: all tolerances > 0");
    need(c.greens.instances >= 1, "greens.instances: >= 1");
    for (int d : c.greens.dims) need(d == 1 || d == 2, "greens.dims: entries 1 or 2");
    need(c.greens.max_side >= 3 && c.greens.max_side <= 41, "greens.max_side: 3..41");
    need(c.greens.symbol_eps >= 0, "greens.symbol_eps: >= 0");
    need(c.greens.rho > 0, "greens.rho: > 0");
    need(c.greens.block >= 1 && c.greens.block <= 3, "greens.block: 1..3");
    need(c.sigma.d == 1 || c.sigma.d == 2, "sigma_scan.d: 1 or 2");
    need(c.sigma.half_width >= 0, "sigma_scan.half_width: >= 0");
    need(c.sigma.hi > c.sigma.lo, "sigma_scan: hi > lo");
    need(c.sigma.points_per_unit > 0, "sigma_scan.points_per_unit: > 0");
    need(c.sigma.norm_target > 0, "sigma_scan.norm_target: > 0");
    need(c.sigma.threshold >= 0, "sigma_scan.threshold: >= 0");
    need(c.sigma.symbol_eps >= 0, "sigma_scan.symbol_eps: >= 0");
    need(c.sigma.rho > 0, "sigma_scan.rho: > 0");
    need(c.stability.source == "run" || c.stability.source == "zero", "stability.source: \"run\" or \"zero\"");
    need(c.stability.T > 0 && c.stability.T_lyapunov > 0, "stability: T > 0");
    need(c.stability.dt > 0 && c.stability.dt <= c.stability.T, "stability.dt: 0 < dt <= T");
    need(c.stability.order_dt0 > 0, "stability.order_dt0: > 0");
    need(c.stability.order_levels >= 2, "stability.order_levels: >= 2");
    need(c.stability.stride >= 1, "stability.stride: >= 1");
    for (const auto& x : c.stability.x0) need(static_cast<int>(x.size()) == c.d, "stability.x0: phases need d entries");
    need(!c.atlas.eps_values.empty(), "atlas.eps_values: non-empty");
    for (double e : c.atlas.eps_values) need(e > 0 && e < 1, "atlas.eps_values: 0 < eps < 1");
    need(c.atlas.gamma_scale > 0, "atlas.gamma_scale: > 0");
    need(c.atlas.samples >= 1, "atlas.samples: >= 1");
    need(c.atlas.N >= 1, "atlas.N: >= 1");
    need(c.atlas.paving_half_width >= 0, "atlas.paving_half_width: >= 0");
    if (c.mode == Mode::Atlas) need(!c.box_lo.empty(), "atlas mode requires box.lo/box.hi");
    if (c.mode == Mode::Verify) need(!c.verify_report.empty(), "verify mode requires verify.report");
    return v;
}

ojson config_to_json(const RunConfig& c) {
    ojson j;
    j["mode"] = mode_name(c.mode);
    j["seed"] = c.seed;
    j["d"] = c.d;
    j["n"] = c.n;
    j["schedule"] = {{"A", c.A}, {"s0", c.s0}, {"r0", c.r0}, {"tau", c.tau}, {"N_max", c.N_max},
                     {"C", std::vector<double>(c.C.begin(), c.C.end())}};
    j["Omega"] = c.Omega;
    j["xi"] = c.xi;
    if (c.omega_map.dim == 0) {
        j["omega_map"] = "identity";
    } else {
        ojson comps = ojson::array();
        for (const auto& comp : c.omega_map.components) {
            ojson terms = ojson::array();
            for (const auto& t : comp) terms.push_back({{"coeff", t.coeff}, {"exponents", t.exponents}});
            comps.push_back(terms);
        }
        j["omega_map"] = {{"components", comps}};
    }
    j["box"] = {{"lo", c.box_lo}, {"hi", c.box_hi}, {"half_width", c.box_half_width}};
    j["gamma"] = c.gamma;
    ojson terms = ojson::array();
    for (const auto& t : c.perturbation.terms)
        terms.push_back({{"y", t.y}, {"z", t.z}, {"zbar", t.zbar}, {"k", t.k}, {"re", t.re}, {"im", t.im}});
    j["perturbation"] = {{"amplitude", c.perturbation.amplitude}, {"rho", c.perturbation.rho},
                         {"cutoff", c.perturbation.cutoff},       {"max_degree", c.perturbation.max_degree},
                         {"terms", terms}};
    j["run"] = {{"levels", c.run.levels}, {"strict", c.run.strict}, {"stop_threshold", c.run.stop_threshold},
                {"cap", c.run.cap},       {"lie_order", c.run.lie_order}};
    j["tolerances"] = {{"symmetry", c.tol.symmetry}, {"reality", c.tol.reality}, {"residual", c.tol.residual},
                       {"drift", c.tol.drift},       {"lyapunov", c.tol.lyapunov}};
    j["greens"] = {{"instances", c.greens.instances}, {"dims", c.greens.dims},   {"max_side", c.greens.max_side},
                   {"symbol_eps", c.greens.symbol_eps}, {"rho", c.greens.rho}, {"block", c.greens.block}};
    j["sigma_scan"] = {{"d", c.sigma.d},
                       {"half_width", c.sigma.half_width},
                       {"lo", c.sigma.lo},
                       {"hi", c.sigma.hi},
                       {"points_per_unit", c.sigma.points_per_unit},
                       {"norm_target", c.sigma.norm_target},
                       {"alpha_target", c.sigma.alpha_target},
                       {"threshold", c.sigma.threshold},
                       {"symbol_eps", c.sigma.symbol_eps},
                       {"rho", c.sigma.rho}};
    j["stability"] = {{"source", c.stability.source},         {"T", c.stability.T},
                      {"dt", c.stability.dt},                 {"T_lyapunov", c.stability.T_lyapunov},
                      {"x0", c.stability.x0},                 {"order_dt0", c.stability.order_dt0},
                      {"order_levels", c.stability.order_levels}, {"stride", c.stability.stride}};
    j["atlas"] = {{"eps_values", c.atlas.eps_values},
                  {"gamma_scale", c.atlas.gamma_scale},
                  {"samples", c.atlas.samples},
                  {"N", c.atlas.N},
                  {"paving_half_width", c.atlas.paving_half_width}};
    j["verify"] = {{"report", c.verify_report}};
    return j;
}

RunConfig config_from_json(const ojson& j) { return read(j, std::string{}); }

RunConfig parse_config_text(const std::string& text, const std::string& source) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        const std::size_t pos = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(pos ? pos - 1 : 0), '\n');
        const auto nl = text.rfind('\n', pos ? pos - 1 : 0);
        const std::size_t col = nl == std::string::npos ? pos : pos - nl - 1;
        std::ostringstream os;
        os << source << ":" << line << ":" << col << ": JSON syntax error: " << e.what();
        throw ConfigError(os.str());
    }
    return read(j, text);
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

}  // namespace kam
