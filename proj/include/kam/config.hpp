#pragma once
/// \file config.hpp
/// Run configuration: a JSON document with nested sections.  Parsing fills
/// defaults, rejects unknown keys and reports every violation at once.
/// The grammar is documented in README.md.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kam/atlas.hpp"

namespace kam {

using ojson = nlohmann::ordered_json;

enum class Mode { Run, Atlas, Greens, SigmaScan, Stability, Verify };
const char* mode_name(Mode m);
std::optional<Mode> parse_mode(const std::string& s);

/// One monomial coefficient * y^y z^z zbar^zbar e^{i<k,x>} of a jet literal.
struct TermLiteral {
    std::vector<int> y, z, zbar;
    Index k;
    double re = 0.0, im = 0.0;
};

struct PerturbationConfig {
    double amplitude = 1e-6;  ///< epsilon: overall size of the perturbation
    double rho = 2.0;         ///< decay rate of generated coefficients
    int cutoff = 16;          ///< Fourier cutoff of generated coefficients
    int max_degree = 4;       ///< weighted degree of generated monomials
    std::vector<TermLiteral> terms;  ///< explicit literal (replaces the generator when non-empty)
};

struct RunSection {
    int levels = 3;
    bool strict = true;
    double stop_threshold = 1e-14;
    int cap = 20;
    int lie_order = 3;
};

struct Tolerances {
    double symmetry = 1e-12;
    double reality = 1e-12;
    double residual = 1e-10;
    double drift = 1e-8;
    double lyapunov = 1e-6;
};

struct GreensSection {
    int instances = 40;
    std::vector<int> dims{1, 2};
    int max_side = 21;
    double symbol_eps = 1e-5;
    double rho = 3.0;
    int block = 1;
};

struct SigmaSection {
    int d = 1;
    int half_width = 5;
    double lo = -1.0, hi = 1.0;
    double points_per_unit = 1e4;
    double norm_target = 20.0;
    double alpha_target = 0.0;
    int threshold = 1;
    double symbol_eps = 0.0;  ///< 0: pure diagonal only
    double rho = 3.0;
};

struct StabilitySection {
    std::string source = "run";  ///< "run" (linearisation of a run) or "zero" (B = 0)
    double T = 10.0;
    double dt = 1e-3;
    double T_lyapunov = 100.0;
    std::vector<RealVec> x0;  ///< phases; empty = origin only
    double order_dt0 = 0.08;
    int order_levels = 4;
    int stride = 100;         ///< CSV sampling stride
};

struct AtlasSection {
    std::vector<double> eps_values{1e-4, 1e-5, 1e-6};
    double gamma_scale = 1.0;  ///< gamma = gamma_scale * sqrt(eps)
    std::size_t samples = 20000;
    int N = 10;
    double paving_half_width = 0.0;  ///< > 0: also pave the box at this half-width
};

struct RunConfig {
    Mode mode = Mode::Run;
    std::uint64_t seed = 42;
    int d = 2;
    int n = 1;
    double A = 10.0, s0 = 0.5, r0 = 1.0, tau = 4.0;
    int N_max = 16;
    std::array<double, 9> C{2, 3, 17, 4, 5, 14, 11, 16, 12};
    RealVec Omega{1.7071067811865475};
    RealVec xi{1.2, 1.9416407864998738};
    OmegaMap omega_map;  ///< dim 0 = identity
    RealVec box_lo, box_hi;
    double box_half_width = 0.0;
    double gamma = 1e-3;
    PerturbationConfig perturbation;
    RunSection run;
    Tolerances tol;
    GreensSection greens;
    SigmaSection sigma;
    StabilitySection stability;
    AtlasSection atlas;
    std::string verify_report;  ///< path of a saved report (verify mode)
};

/// Parses JSON text.  Throws ConfigError listing every violation; JSON
/// syntax errors carry the line and column.
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
/// Reads and parses a file.
RunConfig parse_config_file(const std::string& path);
/// Every constraint violation of an in-memory config (empty = valid).
std::vector<std::string> config_violations(const RunConfig& c);
/// Normalised document with every field (defaults filled); re-parses to an equal config.
ojson config_to_json(const RunConfig& c);
/// Parses an already-decoded document.
RunConfig config_from_json(const ojson& j);

}  // namespace kam
