#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "kam/app.hpp"
#include "kam/config.hpp"
#include "kam/errors.hpp"

using namespace kam;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config_text(text, "cfg.json");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("kam_config_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("a minimal config is completed with defaults and echoed in normalized form") {
    const RunConfig c = parse_config_text(R"({"mode": "run"})");
    const RunConfig def;
    CHECK(c.d == def.d);
    CHECK(c.C == def.C);
    CHECK(c.perturbation.amplitude == def.perturbation.amplitude);
    const ojson j = config_to_json(c);
    CHECK(j["schedule"]["C"].size() == 9);
    CHECK(j["run"]["levels"] == def.run.levels);
    CHECK(j["mode"] == "run");
}

TEST_CASE("constant ordering violations are rejected with the named inequality") {
    const std::string msg = error_of(R"({"schedule": {"C": [2, 3, 6, 4, 5, 14, 11, 16, 12]}})");
    CHECK(msg.find("C2 > 2*C1 + 10") != std::string::npos);
}

TEST_CASE("every violation is listed, not just the first") {
    const std::string msg = error_of(R"({"d": 0, "gamma": -1, "schedule": {"A": 0.5}})");
    CHECK(msg.find("d:") != std::string::npos);
    CHECK(msg.find("gamma") != std::string::npos);
    CHECK(msg.find("schedule.A") != std::string::npos);
}

TEST_CASE("unknown keys and syntax errors carry a location") {
    const std::string unk = error_of("{\n  \"mode\": \"run\",\n  \"levelz\": 3\n}");
    CHECK(unk.find("unknown key 'levelz'") != std::string::npos);
    CHECK(unk.find("line 3") != std::string::npos);
    const std::string nested = error_of("{\"run\": {\"levels\": 2, \"bogus\": 1}}");
    CHECK(nested.find("run.bogus") != std::string::npos);
    const std::string syn = error_of("{\n  \"mode\": \"run\",\n  \"seed\": ,\n}");
    CHECK(syn.find("cfg.json:3:") != std::string::npos);
    const std::string type = error_of(R"({"seed": "abc"})");
    CHECK(type.find("seed") != std::string::npos);
}

TEST_CASE("normalized config round-trips to an equal config") {
    const std::string text = R"({
      "mode": "greens", "seed": 7, "d": 1, "xi": [1.3], "n": 2, "Omega": [1.5, 2.25],
      "box": {"lo": [1.0], "hi": [1.5], "half_width": 0.1},
      "perturbation": {"amplitude": 1e-5, "terms": [{"y": [1], "z": [1, 0], "zbar": [1, 0], "k": [2], "re": 0.5, "im": 0.25}]},
      "omega_map": {"components": [[{"coeff": 1.0, "exponents": [1]}, {"coeff": 0.1, "exponents": [2]}]]},
      "stability": {"source": "zero", "x0": [[0.5]]},
      "greens": {"instances": 12, "dims": [1]}
    })";
    const RunConfig a = parse_config_text(text);
    const ojson ja = config_to_json(a);
    const RunConfig b = parse_config_text(ja.dump(2));
    CHECK(config_to_json(b) == ja);
    CHECK(b.n == 2);
    CHECK(b.perturbation.terms.size() == 1);
    CHECK(b.omega_map.components.size() == 1);
}

TEST_CASE("stability with zero coupling exits 0 with tiny drift") {
    RunConfig c;
    c.mode = Mode::Stability;
    c.stability.source = "zero";
    c.stability.T_lyapunov = 20.0;
    const Outcome o = dispatch(c);
    INFO(o.summary);
    CHECK(o.exit_code == 0);
    CHECK(o.report["results"]["stability"]["max_drift"].get<double>() <= 1e-10);
}

TEST_CASE("a resonant frequency is excluded with exit code 3") {
    RunConfig c;
    c.d = 1;
    c.xi = {-c.Omega[0] + 1e-8};
    c.perturbation.cutoff = 8;
    const Outcome o = dispatch(c);
    CHECK(o.exit_code == 3);
    CHECK(o.report["status"]["class"] == "exclusion");
}

TEST_CASE("an invalid in-memory config exits 2") {
    RunConfig c;
    c.C[2] = 2 * c.C[1];
    CHECK(dispatch(c).exit_code == 2);
}

TEST_CASE("greens reports are deterministic and verify replays them") {
    RunConfig c;
    c.mode = Mode::Greens;
    c.greens.instances = 8;
    c.greens.max_side = 9;
    const Outcome a = dispatch(c), b = dispatch(c);
    INFO(a.summary);
    CHECK(a.exit_code == 0);
    CHECK(dump_report(a.report) == dump_report(b.report));

    const auto dir = scratch("verify");
    write_outcome(a, dir.string());
    RunConfig v;
    v.mode = Mode::Verify;
    v.verify_report = "report.json";
    const Outcome r = dispatch(v, dir.string());
    INFO(r.summary);
    CHECK(r.exit_code == 0);
    CHECK(r.report["results"]["verify"]["certificates_checked"].get<int>() > 0);

    // a tampered certificate is caught
    ojson bad = a.report;
    for (auto& cert : bad["results"]["greens"]["certificates"]) cert["norm_bound"] = 1e-6;
    std::ofstream(dir / "report.json") << dump_report(bad);
    CHECK(dispatch(v, dir.string()).exit_code == 4);
}

TEST_CASE("sigma scan of a diagonal operator matches the exact intervals") {
    RunConfig c;
    c.mode = Mode::SigmaScan;
    c.sigma.points_per_unit = 2000;
    const Outcome o = dispatch(c);
    INFO(o.summary);
    CHECK(o.exit_code == 0);
}

TEST_CASE("non-strict mode turns assertion failures into warnings") {
    RunConfig c;
    c.mode = Mode::Stability;
    c.stability.source = "zero";
    c.stability.T_lyapunov = 20.0;
    c.tol.drift = 1e-300;  // unattainable
    CHECK(dispatch(c).exit_code == 4);
    c.run.strict = false;
    CHECK(dispatch(c).exit_code == 0);
}
