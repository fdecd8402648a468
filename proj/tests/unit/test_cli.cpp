#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "gcps/analysis.hpp"
#include "gcps/dsl.hpp"
#include "helpers.hpp"

using namespace gcps;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "gcps");
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

std::vector<double> csv_column(const std::string& text, std::size_t col) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string f;
        for (std::size_t c = 0; c <= col; ++c) std::getline(fields, f, ',');
        out.push_back(std::stod(f));
    }
    return out;
}

}  // namespace

TEST_CASE("exit codes") {
    CHECK(invoke({"--help"}).code == cli::kOk);
    CHECK(invoke({}).code == cli::kUsage);
    CHECK(invoke({"frobnicate"}).code == cli::kUsage);
    CHECK(invoke({"run", model_path("sqrt2.gcps"), "--max-steps", "1", "--max-time", "1"}).code == cli::kUsage);

    auto missing = invoke({"run", "no-such-model.gcps", "--max-steps", "1"});
    CHECK(missing.code == cli::kModelError);
    CHECK(missing.err.rfind("error: ", 0) == 0);

    auto capacity = invoke({"graph", model_path("lotka-renewable.gcps"), "--max-nodes", "50"});
    CHECK(capacity.code == cli::kRuntimeError);
    CHECK(capacity.out.empty());
}

TEST_CASE("every subcommand has help") {
    for (std::string sub : {"run", "ensemble", "graph", "ode", "synth", "compare", "convert"}) {
        auto r = invoke({sub, "--help"});
        CHECK(r.code == cli::kOk);
        CHECK(r.out.find("Usage: " + sub) != std::string::npos);
    }
}

TEST_CASE("run writes a trajectory with increasing times") {
    auto r = invoke({"run", model_path("lotka-renewable.gcps"), "--mode", "ssa", "--max-time", "10", "--seed", "42",
                  "--out", "cli_run.csv"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.empty());
    const auto text = slurp("cli_run.csv");
    CHECK(text.rfind("time,rule,", 0) == 0);
    const auto times = csv_column(text, 0);
    REQUIRE(times.size() > 100);
    CHECK(times.front() == 0.0);
    for (std::size_t k = 1; k < times.size(); ++k) CHECK(times[k] > times[k - 1]);
    CHECK(times.back() <= 10.0);
}

TEST_CASE("repeated runs are byte-identical") {
    const std::vector<std::vector<std::string>> commands{
        {"run", model_path("lotka-renewable.gcps"), "--max-time", "2", "--seed", "7"},
        {"run", model_path("sqrt2.gcps"), "--mode", "seq", "--max-steps", "500", "--record", "stride=10"},
        {"run", model_path("lotka-finite.gcps"), "--mode", "maxpar", "--max-steps", "20", "--format", "json"},
        {"ensemble", model_path("pure-death.gcps"), "--runs", "10", "--grid-dt", "0.5", "--max-time", "2"},
        {"graph", model_path("sqrt2.gcps"), "--agents", "4", "--fair-steps", "1000"},
        {"ode", model_path("lotka-renewable.gcps"), "--t-end", "1", "--stride", "100"},
    };
    for (const auto& c : commands) {
        auto a = invoke(c);
        auto b = invoke(c);
        REQUIRE(a.code == cli::kOk);
        CHECK(!a.out.empty());
        CHECK(a.out == b.out);
    }
    auto x = invoke({"run", model_path("lotka-renewable.gcps"), "--max-time", "2", "--seed", "7"});
    auto y = invoke({"run", model_path("lotka-renewable.gcps"), "--max-time", "2", "--seed", "8"});
    CHECK(x.out != y.out);
}

TEST_CASE("start options") {
    auto r = invoke({"run", model_path("sqrt2.gcps"), "--agents", "10", "--record", "final", "--max-steps", "0"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.find("0,-,5,5,0") != std::string::npos);

    r = invoke({"run", model_path("sqrt2.gcps"), "--set", "p=3", "--set", "2=1", "--max-steps", "0"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.find("0,-,3,1,0") != std::string::npos);

    CHECK(invoke({"run", model_path("sqrt2.gcps"), "--set", "nowhere=1", "--max-steps", "0"}).code == cli::kModelError);
}

TEST_CASE("graph marks the terminal component") {
    auto r = invoke({"graph", model_path("sqrt2.gcps"), "--agents", "2", "--dot", "cli_graph.dot"});
    REQUIRE(r.code == cli::kOk);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["nodes"] == 2);
    REQUIRE(doc["components"].size() == 1);
    CHECK(doc["components"][0]["terminal"] == true);
    CHECK(doc["components"][0]["states"] == nlohmann::json::array({"(1,1)", "(2,0)"}));

    const auto dot = slurp("cli_graph.dot");
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(dot.find("terminal SCC") != std::string::npos);
    CHECK(dot.find("(1,1)") != std::string::npos);
    CHECK(dot.find("(2,0)") != std::string::npos);

    r = invoke({"graph", model_path("sqrt2.gcps"), "--agents", "2", "--fair-steps", "5000", "--k-min", "50"});
    CHECK(nlohmann::json::parse(r.out)["fairness"]["passed"] == true);
}

TEST_CASE("ode and fixed points") {
    auto r = invoke({"ode", model_path("sqrt2.gcps"), "--fixed-point"});
    REQUIRE(r.code == cli::kOk);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(std::abs(doc["fractions"][0].get<double>() - 1.0 / std::sqrt(2.0)) < 1e-6);

    r = invoke({"ode", model_path("sqrt2.ode.json"), "--y0", "1,1", "--fixed-point"});
    REQUIRE(r.code == cli::kOk);
    CHECK(std::abs(nlohmann::json::parse(r.out)["fractions"][0].get<double>() - 1.0 / std::sqrt(2.0)) < 1e-6);

    CHECK(invoke({"ode", model_path("sqrt2.ode.json"), "--t-end", "1"}).code == cli::kModelError);
    CHECK(invoke({"ode", model_path("sqrt2.gcps")}).code == cli::kModelError);

    r = invoke({"ode", model_path("sqrt2.gcps"), "--t-end", "0.001", "--dt", "1e-6", "--emit-system", "cli_sys.json"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.rfind("time,Y_1,Y_2\n0,5000,5000\n", 0) == 0);
    CHECK(same_coefficients(parse_ode_system(slurp("cli_sys.json")), derive_odes(preset("sqrt2.gcps"))));
}

TEST_CASE("synth builds a protocol from an ODE system") {
    auto r = invoke({"synth", model_path("sqrt2.ode.json"), "--init", "3,4", "--name", "s"});
    REQUIRE(r.code == cli::kOk);
    auto m = parse_model(r.out);
    CHECK(m.name == "s");
    CHECK(m.rules.size() == 4);
    CHECK(m.initial_configuration() == cells({3, 4}));
    CHECK(same_coefficients(derive_odes(m), parse_ode_system(slurp(model_path("sqrt2.ode.json")))));
    CHECK(invoke({"synth", model_path("sqrt2.ode.json"), "--init", "1.5,2"}).code == cli::kModelError);
}

TEST_CASE("convert in both directions") {
    auto r = invoke({"convert", model_path("sqrt2.pp.json")});
    REQUIRE(r.code == cli::kOk);
    auto m = parse_model(r.out);
    CHECK(m.rules == preset("sqrt2.gcps").rules);
    CHECK(m.initial_configuration() == cells({5000, 5000}));

    r = invoke({"convert", model_path("sqrt2.pp.json"), "--input", "x=2", "--input", "y=1"});
    REQUIRE(r.code == cli::kOk);
    CHECK(parse_model(r.out).initial_configuration() == cells({2, 1}));

    r = invoke({"convert", model_path("sqrt2.gcps"), "--out", "cli_pp.json"});
    REQUIRE(r.code == cli::kOk);
    r = invoke({"convert", "cli_pp.json"});
    REQUIRE(r.code == cli::kOk);
    CHECK(parse_model(r.out).rules == preset("sqrt2.gcps").rules);

    auto lv = invoke({"convert", model_path("lotka-renewable.gcps")});
    CHECK(lv.code == cli::kModelError);
    CHECK(lv.err.find("not expressible") != std::string::npos);
}

TEST_CASE("compare reads ensemble and ODE CSV files") {
    REQUIRE(invoke({"ensemble", model_path("pure-death.gcps"), "--runs", "100", "--grid-dt", "0.25", "--max-time", "3",
                 "--out", "cli_ens.csv"})
                .code == cli::kOk);
    REQUIRE(invoke({"ode", model_path("pure-death.gcps"), "--t-end", "3", "--stride", "250", "--out", "cli_ode.csv"})
                .code == cli::kOk);
    auto r = invoke({"compare", "cli_ens.csv", "cli_ode.csv"});
    REQUIRE(r.code == cli::kOk);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["grid"] == 13);
    CHECK(doc["max_rel_dev"][1].get<double>() < 0.05);

    r = invoke({"compare", "cli_ens.csv", "cli_ode.csv", "--from", "1.5"});
    CHECK(nlohmann::json::parse(r.out)["grid"] == 7);

    REQUIRE(invoke({"ode", model_path("pure-death.gcps"), "--t-end", "3", "--stride", "100", "--out", "cli_ode2.csv"})
                .code == cli::kOk);
    r = invoke({"compare", "cli_ens.csv", "cli_ode2.csv"});
    CHECK(r.code == cli::kRuntimeError);
    CHECK(r.err.find("grid mismatch") != std::string::npos);
}

TEST_CASE("ensemble options") {
    CHECK(invoke({"ensemble", model_path("pure-death.gcps"), "--grid-dt", "0.5"}).code == cli::kModelError);
    CHECK(invoke({"ensemble", model_path("sqrt2.gcps"), "--mode", "seq", "--grid-dt", "1", "--max-time", "3"}).code ==
          cli::kModelError);
    auto a = invoke({"ensemble", model_path("pure-death.gcps"), "--runs", "6", "--grid-dt", "0.5", "--max-time", "1",
                  "--jobs", "1"});
    auto b = invoke({"ensemble", model_path("pure-death.gcps"), "--runs", "6", "--grid-dt", "0.5", "--max-time", "1",
                  "--jobs", "4"});
    CHECK(a.out == b.out);
    auto j = invoke({"--format", "json", "ensemble", model_path("pure-death.gcps"), "--runs", "3", "--grid-dt", "0.5",
                  "--max-time", "1"});
    REQUIRE(j.code == cli::kOk);
    CHECK(nlohmann::json::parse(j.out)["runs"] == 3);
}
