#pragma once
/// \file app.hpp
/// Scenario execution for every mode of the command-line tool: builds the
/// problem from a RunConfig, runs it, evaluates the hard assertions and
/// assembles the report document, the CSV sidecars and a human summary.
/// Everything here is deterministic given the config (no clocks, no
/// unseeded randomness), so identical configs give byte-identical reports.

#include <string>
#include <utility>
#include <vector>

#include "kam/config.hpp"
#include "kam/errors.hpp"
#include "kam/greens.hpp"

namespace kam {

inline constexpr const char* kReportSchema = "kam-report/1";

/// Exit status for each failure class: config 2, exclusion 3, numeric 4.
int exit_code_for(ErrorClass c);

struct Assertion {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    bool passed = true;
};

struct Outcome {
    int exit_code = 0;
    ojson report;
    std::vector<std::pair<std::string, std::string>> sidecars;  ///< (file name, contents)
    std::string summary;
};

/// Runs the configured mode.  `base_dir` resolves relative paths (verify mode).
/// Never throws for KamError: failures become the report's status and exit code.
Outcome dispatch(const RunConfig& cfg, const std::string& base_dir = ".");

/// report.json (pretty, trailing newline) as written to disk.
std::string dump_report(const ojson& report);
/// Writes report.json, summary.txt and the sidecars into `out_dir` (created).
void write_outcome(const Outcome& out, const std::string& out_dir);

// ---- Green's-function soundness campaign ------------------------------------

/// One randomized instance: the operator a certificate talks about plus the
/// ingredients each method needs.  Regenerated bit-for-bit from (seed, index).
struct GreensInstance {
    int index = 0;
    std::string method;  ///< neumann, cl1, two_scale, cl2
    int d = 1;
    LatticeMatrix T;     ///< target operator
    LatticeMatrix T0;    ///< unperturbed operator (neumann)
    int M = 2;           ///< window scale (cl1, cl2) or M0 (two_scale)
    int K = 0;           ///< central window (two_scale)
    std::vector<int> half_widths;
    std::optional<Index> shift;  ///< L-shape shift (cl2)
};
GreensInstance make_greens_instance(const GreensSection& g, std::uint64_t seed, int index);

struct GreensOutcome {
    bool certified = false;
    std::string refusal;
    DecayCertificate cert;
    SoundnessReport soundness;
};
/// Produces the certificate with the instance's method and checks it against the direct inverse.
GreensOutcome run_greens_instance(const GreensInstance& inst);

}  // namespace kam
