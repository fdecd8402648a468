#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gcps/analysis.hpp"
#include "gcps/dsl.hpp"
#include "gcps/engine.hpp"
#include "gcps/error.hpp"
#include "gcps/odelimit.hpp"
#include "gcps/stategraph.hpp"

namespace gcps::cli {

namespace {

using nlohmann::json;
__extension__ typedef __int128 Wide;

struct Globals {
    std::uint64_t seed = kDefaultSeed;
    std::string out = "-";
    std::string format = "csv";
};

/// Options shared by every subcommand that loads a model and a start state.
struct StartOptions {
    std::vector<std::string> set;
    std::optional<std::int64_t> agents;

    void add_to(CLI::App* app) {
        app->add_option("--set", set,
                        "Override an initial count: CELL=N (one-symbol) or CELL:OBJ=N; repeatable");
        app->add_option("--agents", agents,
                        "Rescale a one-symbol initial configuration to N tokens, keeping proportions");
    }
};

std::int64_t parse_count(const std::string& s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 0)
        throw ModelError("'" + s + "' is not a non-negative integer");
    return v;
}

std::size_t resolve_cell(const GcpsModel& m, const std::string& name) {
    if (auto c = m.cell_index(name)) return *c;
    const auto v = static_cast<std::size_t>(parse_count(name));
    if (v < 1 || v > m.n_cells) throw ModelError("cell '" + name + "' outside 1.." + std::to_string(m.n_cells));
    return v;
}

Configuration start_configuration(const GcpsModel& m, const StartOptions& opts) {
    Configuration u = m.initial_configuration();
    if (opts.agents) {
        if (!m.is_one_symbol()) throw ModelError("--agents needs a one-symbol model");
        const auto n = *opts.agents;
        if (n < 0) throw ModelError("--agents must be >= 0");
        const auto weight = total_in_cells(u);
        if (weight == 0) throw ModelError("--agents needs a non-empty initial configuration");
        // largest-remainder apportionment, ties to the lower cell
        std::vector<std::pair<Wide, std::size_t>> remainders;
        std::int64_t placed = 0;
        for (std::size_t c = 1; c <= m.n_cells; ++c) {
            const Wide share = static_cast<Wide>(n) * u.count(c, 0);
            const auto whole = static_cast<std::int64_t>(share / weight);
            remainders.emplace_back(share % weight, c);
            u.set(c, 0, whole);
            placed += whole;
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& x, const auto& y) { return x.first > y.first; });
        for (std::size_t k = 0; placed < n; ++k, ++placed) u.add(remainders[k].second, 0, 1);
    }
    for (const auto& item : opts.set) {
        const auto eq = item.rfind('=');
        if (eq == std::string::npos) throw ModelError("--set expects CELL=N or CELL:OBJ=N, got '" + item + "'");
        auto target = item.substr(0, eq);
        std::size_t object = 0;
        if (auto colon = target.find(':'); colon != std::string::npos) {
            auto o = m.object_index(target.substr(colon + 1));
            if (!o) throw ModelError("unknown object in --set '" + item + "'");
            object = *o;
            target = target.substr(0, colon);
        } else if (!m.is_one_symbol()) {
            throw ModelError("--set on a multi-symbol model must name the object (CELL:OBJ=N)");
        }
        u.set(resolve_cell(m, target), object, parse_count(item.substr(eq + 1)));
    }
    return u;
}

void emit(const Globals& g, const std::string& text, std::ostream& out) {
    if (g.out == "-") {
        out << text;
        return;
    }
    std::ofstream f(g.out, std::ios::binary);
    if (!f) throw Error("cannot write '" + g.out + "'");
    f << text;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
}

bool has_suffix(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

RecordPolicy parse_record(const std::string& s) {
    if (s == "all") return RecordPolicy::all();
    if (s == "final") return RecordPolicy::final_only();
    if (s.rfind("stride=", 0) == 0) {
        const auto k = parse_count(s.substr(7));
        if (k == 0) throw ModelError("record stride must be positive");
        return RecordPolicy::every(static_cast<std::uint64_t>(k));
    }
    throw ModelError("--record expects all, final or stride=K");
}

std::vector<std::int64_t> cell_counts(const Configuration& u) {
    std::vector<std::int64_t> out;
    for (std::size_t c = 1; c <= u.n_cells(); ++c) out.push_back(u.cell_total(c));
    return out;
}

std::string trajectory_json(const Trajectory& t) {
    json doc;
    doc["mode"] = std::string(mode_name(t.mode));
    doc["seed"] = t.seed;
    doc["halted"] = t.halted;
    doc["steps"] = t.steps;
    doc["end_time"] = t.end_time;
    doc["initial"] = {{"cells", cell_counts(t.initial)}, {"envfin_total", t.initial.cell_total(0)}};
    doc["events"] = json::array();
    for (const auto& e : t.events)
        doc["events"].push_back({{"time", e.time},
                                 {"rule", e.rule == kParallelStep ? json(nullptr) : json(e.rule + 1)},
                                 {"cells", cell_counts(e.state)},
                                 {"envfin_total", e.state.cell_total(0)}});
    return doc.dump(2) + "\n";
}

/// Columns of a CSV file written by this tool: the time column and the value
/// columns (means of an ensemble, cells of a trajectory, or all others).
struct CsvSeries {
    std::vector<double> grid;
    std::vector<std::vector<double>> values;
};

CsvSeries read_csv_series(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ModelError(path + ": empty CSV file");
    std::vector<std::string> header;
    for (std::stringstream ss(line); std::getline(ss, line, ',');) header.push_back(line);
    if (header.empty() || header[0] != "time") throw ModelError(path + ": first column must be 'time'");

    auto pick = [&](std::string_view prefix) {
        std::vector<std::size_t> cols;
        for (std::size_t c = 1; c < header.size(); ++c)
            if (header[c].rfind(prefix, 0) == 0) cols.push_back(c);
        return cols;
    };
    auto cols = pick("mean_");
    if (cols.empty()) cols = pick("cell_");
    if (cols.empty())
        for (std::size_t c = 1; c < header.size(); ++c)
            if (header[c] != "rule" && header[c] != "envfin_total") cols.push_back(c);

    CsvSeries s;
    s.values.resize(cols.size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        for (std::stringstream ss(line); std::getline(ss, line, ',');) fields.push_back(line);
        if (fields.size() != header.size())
            throw ModelError(path + ": line " + std::to_string(line_no) + " has the wrong number of fields");
        auto number = [&](const std::string& f) {
            double v = 0;
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || p != f.data() + f.size())
                throw ModelError(path + ": line " + std::to_string(line_no) + ": '" + f + "' is not a number");
            return v;
        };
        s.grid.push_back(number(fields[0]));
        for (std::size_t k = 0; k < cols.size(); ++k) s.values[k].push_back(number(fields[cols[k]]));
    }
    return s;
}

std::vector<double> parse_vector(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        double v = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || p != item.data() + item.size())
            throw ModelError("'" + item + "' is not a number");
        out.push_back(v);
    }
    return out;
}

std::map<std::string, std::int64_t> parse_multiset(const std::vector<std::string>& items) {
    std::map<std::string, std::int64_t> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ModelError("expected SYMBOL=N, got '" + item + "'");
        out[item.substr(0, eq)] += parse_count(item.substr(eq + 1));
    }
    return out;
}

// -- subcommands --------------------------------------------------------------

struct RunArgs {
    std::string model;
    std::string mode = "ssa";
    std::optional<std::uint64_t> max_steps;
    std::optional<double> max_time;
    bool until_halt = false;
    std::string record = "all";
    StartOptions start;
};

int cmd_run(const Globals& g, const RunArgs& a, std::ostream& out) {
    const auto m = load_model(a.model);
    const auto u0 = start_configuration(m, a.start);
    RunSpec spec;
    auto mode = parse_mode(a.mode);
    if (!mode) throw ModelError("unknown mode '" + a.mode + "'");
    spec.mode = *mode;
    spec.max_steps = a.max_steps;
    spec.max_time = a.max_time;
    spec.until_halt = a.until_halt;
    spec.seed = g.seed;
    spec.record = parse_record(a.record);
    const auto t = run(m, u0, spec);
    emit(g, g.format == "json" ? trajectory_json(t) : trajectory_csv(m, t), out);
    return kOk;
}

struct EnsembleArgs {
    std::string model;
    std::string mode = "ssa";
    std::size_t runs = 100;
    double grid_dt = 0.0;
    std::optional<double> max_time;
    std::optional<std::uint64_t> max_steps;
    std::size_t jobs = 1;
    StartOptions start;
};

int cmd_ensemble(const Globals& g, const EnsembleArgs& a, std::ostream& out) {
    const auto m = load_model(a.model);
    const auto u0 = start_configuration(m, a.start);
    RunSpec spec;
    auto mode = parse_mode(a.mode);
    if (!mode) throw ModelError("unknown mode '" + a.mode + "'");
    spec.mode = *mode;
    spec.seed = g.seed;
    double horizon = 0.0;
    if (has_continuous_time(spec.mode)) {
        if (!a.max_time) throw ModelError("stochastic-time ensembles need --max-time");
        spec.max_time = horizon = *a.max_time;
    } else {
        if (!a.max_steps) throw ModelError("discrete-step ensembles need --max-steps");
        spec.max_steps = a.max_steps;
        horizon = static_cast<double>(*a.max_steps);
    }
    const auto grid = uniform_grid(a.grid_dt, horizon);
    const auto e = ensemble(m, u0, spec, a.runs, grid, a.jobs);
    if (g.format == "json") {
        json doc;
        doc["runs"] = e.runs;
        doc["seed"] = e.master_seed;
        doc["grid"] = e.grid;
        doc["mean"] = e.mean;
        doc["std"] = e.stddev;
        emit(g, doc.dump(2) + "\n", out);
    } else {
        emit(g, ensemble_csv(e), out);
    }
    return kOk;
}

struct GraphArgs {
    std::string model;
    std::size_t max_nodes = kDefaultMaxNodes;
    std::string dot;
    std::string condensation_dot;
    std::optional<std::uint64_t> fair_steps;
    std::uint64_t k_min = 1;
    std::string mode = "ssa";
    StartOptions start;
};

int cmd_graph(const Globals& g, const GraphArgs& a, std::ostream& out) {
    const auto m = load_model(a.model);
    const auto u0 = start_configuration(m, a.start);
    const auto graph = build_state_graph(m, u0, a.max_nodes);
    const auto scc = terminal_sccs(graph);

    json doc;
    doc["nodes"] = graph.size();
    doc["edges"] = graph.edge_count();
    doc["components"] = json::array();
    for (std::size_t c = 0; c < scc.components.size(); ++c) {
        json states = json::array();
        for (auto n : scc.components[c]) states.push_back(configuration_label(m, graph.node(n)));
        doc["components"].push_back({{"states", states}, {"terminal", static_cast<bool>(scc.terminal[c])}});
    }
    json halting = json::array();
    std::set<std::int64_t> generated;
    for (std::size_t n = 0; n < graph.size(); ++n)
        if (graph.out_edges(n).empty()) {
            halting.push_back(configuration_label(m, graph.node(n)));
            generated.insert(graph.node(n).cell_total(m.output_cell));
        }
    doc["halting"] = halting;
    doc["generated_set"] = generated;

    if (a.fair_steps) {
        RunSpec spec;
        auto mode = parse_mode(a.mode);
        if (!mode) throw ModelError("unknown mode '" + a.mode + "'");
        spec.mode = *mode;
        spec.max_steps = a.fair_steps;
        spec.seed = g.seed;
        const auto t = run(m, u0, spec);
        const auto rep = fairness_report(graph, scc, t, a.k_min);
        json visits = json::array();
        for (const auto& [node, count] : rep.visits)
            visits.push_back({{"state", configuration_label(m, graph.node(node))}, {"visits", count}});
        doc["fairness"] = {{"passed", rep.passed},
                           {"entered", rep.entered},
                           {"entry_step", rep.entry_step},
                           {"visits", visits},
                           {"message", rep.message}};
    }

    if (!a.dot.empty()) write_file(a.dot, state_graph_dot(m, graph, scc));
    if (!a.condensation_dot.empty()) write_file(a.condensation_dot, condensation_dot(m, graph, scc));
    emit(g, doc.dump(2) + "\n", out);
    return kOk;
}

struct OdeArgs {
    std::string input;
    double dt = 1e-3;
    std::optional<double> t_end;
    std::size_t stride = 1;
    std::string y0;
    bool fixed_point = false;
    double tol = 1e-10;
    std::string emit_system;
    StartOptions start;
};

int cmd_ode(const Globals& g, const OdeArgs& a, std::ostream& out, std::ostream& err) {
    OdeSystem s;
    std::vector<double> y0;
    if (has_suffix(a.input, ".json")) {
        s = parse_ode_system(read_text_file(a.input));
        if (a.y0.empty()) throw ModelError("an ODE system file needs --y0");
    } else {
        const auto m = load_model(a.input);
        s = derive_odes(m);
        const auto u0 = start_configuration(m, a.start);
        for (std::size_t c = 1; c <= m.n_cells; ++c) y0.push_back(static_cast<double>(u0.cell_total(c)));
    }
    if (!a.y0.empty()) y0 = parse_vector(a.y0);
    if (!a.emit_system.empty()) write_file(a.emit_system, serialize_ode_system(s));

    if (a.fixed_point) {
        FixedPointOptions opts;
        opts.tol = a.tol;
        if (a.t_end) opts.max_time = *a.t_end;
        const auto fp = find_fixed_point(s, y0, opts);
        double total = 0.0;
        for (auto v : fp.point) total += v;
        json fractions = json::array();
        for (auto v : fp.point) fractions.push_back(total > 0.0 ? v / total : 0.0);
        json doc{{"point", fp.point},
                 {"fractions", fractions},
                 {"time", fp.time},
                 {"steps", fp.steps},
                 {"residual", fp.residual}};
        emit(g, doc.dump(2) + "\n", out);
        return kOk;
    }
    if (!a.t_end) throw ModelError("ode needs --t-end (or --fixed-point)");
    const auto traj = integrate(s, y0, a.dt, *a.t_end, a.stride);
    if (traj.clipped) err << "warning: negative values were clipped to 0\n";
    if (g.format == "json") {
        json doc{{"times", traj.times}, {"values", traj.values}, {"clipped", traj.clipped}};
        emit(g, doc.dump(2) + "\n", out);
    } else {
        emit(g, ode_csv(traj), out);
    }
    return kOk;
}

struct SynthArgs {
    std::string input;
    std::string init;
    std::string name;
};

int cmd_synth(const Globals& g, const SynthArgs& a, std::ostream& out) {
    const auto s = parse_ode_system(read_text_file(a.input));
    std::vector<std::int64_t> init;
    if (!a.init.empty())
        for (auto v : parse_vector(a.init)) {
            if (v < 0 || v != std::floor(v)) throw ModelError("--init takes non-negative integers");
            init.push_back(static_cast<std::int64_t>(v));
        }
    auto m = odes_to_gcps(s, init);
    m.name = a.name;
    emit(g, serialize_model(m), out);
    return kOk;
}

struct CompareArgs {
    std::string first;
    std::string second;
    double from = -std::numeric_limits<double>::infinity();
};

int cmd_compare(const Globals& g, const CompareArgs& a, std::ostream& out) {
    const auto x = read_csv_series(a.first);
    const auto ref = read_csv_series(a.second);
    const auto c = compare_series(x.grid, x.values, ref.grid, ref.values, a.from);
    emit(g, comparison_json(c), out);
    return kOk;
}

struct ConvertArgs {
    std::string input;
    std::vector<std::string> input_multiset;
};

int cmd_convert(const Globals& g, const ConvertArgs& a, std::ostream& out) {
    if (has_suffix(a.input, ".json")) {
        auto doc = parse_protocol(read_text_file(a.input));
        auto input = a.input_multiset.empty() ? doc.input : parse_multiset(a.input_multiset);
        emit(g, serialize_model(pp_to_gcps(doc.protocol, input)), out);
        return kOk;
    }
    const auto m = load_model(a.input);
    ProtocolDocument doc;
    doc.protocol = gcps_to_pp(m);
    const auto u = m.initial_configuration();
    for (std::size_t c = 1; c <= m.n_cells; ++c)
        if (auto v = u.count(c, 0); v != 0) doc.input[doc.protocol.inputs[c - 1]] = v;
    emit(g, serialize_protocol(doc), out);
    return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Generalized communicating P systems and population protocols: simulation, "
                 "state graphs and mass-action ODE limits"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Random seed (default 42)");
    app.add_option("--out", g.out, "Output file ('-' = standard output)");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));

    const std::vector<std::string> modes{"seq", "maxpar", "equi", "ssa", "ssa-fr"};

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Simulate one run and write its trajectory");
    run_cmd->add_option("model", run_args.model, "Model file")->required();
    run_cmd->add_option("--mode", run_args.mode, "Derivation mode")->check(CLI::IsMember(modes));
    auto* steps_opt = run_cmd->add_option("--max-steps", run_args.max_steps, "Stop after N events");
    auto* time_opt = run_cmd->add_option("--max-time", run_args.max_time, "Stop at time T (ssa modes)");
    auto* halt_opt = run_cmd->add_flag("--until-halt", run_args.until_halt, "Run until no rule applies");
    steps_opt->excludes(time_opt)->excludes(halt_opt);
    time_opt->excludes(halt_opt);
    run_cmd->add_option("--record", run_args.record, "Recorded events: all, stride=K or final");
    run_args.start.add_to(run_cmd);

    EnsembleArgs ens_args;
    auto* ens_cmd = app.add_subcommand("ensemble", "Mean and deviation over independent runs");
    ens_cmd->add_option("model", ens_args.model, "Model file")->required();
    ens_cmd->add_option("--mode", ens_args.mode, "Derivation mode")->check(CLI::IsMember(modes));
    ens_cmd->add_option("--runs", ens_args.runs, "Number of runs")->check(CLI::PositiveNumber);
    ens_cmd->add_option("--grid-dt", ens_args.grid_dt, "Sampling grid step")->required();
    ens_cmd->add_option("--max-time", ens_args.max_time, "Horizon for ssa modes");
    ens_cmd->add_option("--max-steps", ens_args.max_steps, "Horizon for discrete modes");
    ens_cmd->add_option("--jobs", ens_args.jobs, "Worker threads")->check(CLI::PositiveNumber);
    ens_args.start.add_to(ens_cmd);

    GraphArgs graph_args;
    auto* graph_cmd = app.add_subcommand("graph", "Explore the state graph and its terminal SCCs");
    graph_cmd->add_option("model", graph_args.model, "Model file")->required();
    graph_cmd->add_option("--max-nodes", graph_args.max_nodes, "Node cap (0 = none)");
    graph_cmd->add_option("--dot", graph_args.dot, "Write the state graph as DOT");
    graph_cmd->add_option("--condensation-dot", graph_args.condensation_dot,
                          "Write the SCC condensation as DOT");
    graph_cmd->add_option("--fair-steps", graph_args.fair_steps,
                          "Also run N events and check the fairness surrogate");
    graph_cmd->add_option("--k-min", graph_args.k_min, "Visits required per terminal-SCC state");
    graph_cmd->add_option("--mode", graph_args.mode, "Mode of the fairness run")->check(CLI::IsMember(modes));
    graph_args.start.add_to(graph_cmd);

    OdeArgs ode_args;
    auto* ode_cmd = app.add_subcommand("ode", "Derive and integrate the mass-action ODE limit");
    ode_cmd->add_option("input", ode_args.input, "Model file or ODE system JSON")->required();
    ode_cmd->add_option("--dt", ode_args.dt, "RK4 step")->check(CLI::PositiveNumber);
    ode_cmd->add_option("--t-end", ode_args.t_end, "End time (max time with --fixed-point)");
    ode_cmd->add_option("--stride", ode_args.stride, "Write every K-th step")->check(CLI::PositiveNumber);
    ode_cmd->add_option("--y0", ode_args.y0, "Initial values, comma separated");
    ode_cmd->add_flag("--fixed-point", ode_args.fixed_point, "Integrate to a stationary point");
    ode_cmd->add_option("--tol", ode_args.tol, "Fixed-point residual tolerance");
    ode_cmd->add_option("--emit-system", ode_args.emit_system, "Write the ODE system as JSON");
    ode_args.start.add_to(ode_cmd);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Build a population protocol from an ODE system");
    synth_cmd->add_option("input", synth_args.input, "ODE system JSON")->required();
    synth_cmd->add_option("--init", synth_args.init, "Initial cell counts, comma separated");
    synth_cmd->add_option("--name", synth_args.name, "Model name");

    CompareArgs cmp_args;
    auto* cmp_cmd = app.add_subcommand("compare", "Compare two series on a shared grid");
    cmp_cmd->add_option("first", cmp_args.first, "Series CSV (ensemble, trajectory or ODE)")->required();
    cmp_cmd->add_option("reference", cmp_args.second, "Reference CSV")->required();
    cmp_cmd->add_option("--from", cmp_args.from, "Ignore grid points before this time");

    ConvertArgs conv_args;
    auto* conv_cmd = app.add_subcommand("convert", "Convert between protocol JSON and model files");
    conv_cmd->add_option("file", conv_args.input, "Protocol JSON (.json) or model file")->required();
    conv_cmd->add_option("--input", conv_args.input_multiset,
                         "Protocol input multiset SYMBOL=N; repeatable (overrides the file)");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            const auto subs = app.get_subcommands();
            out << (subs.empty() ? app.help() : subs.front()->help());
            return kOk;
        }
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (*run_cmd) return cmd_run(g, run_args, out);
        if (*ens_cmd) return cmd_ensemble(g, ens_args, out);
        if (*graph_cmd) return cmd_graph(g, graph_args, out);
        if (*ode_cmd) return cmd_ode(g, ode_args, out, err);
        if (*synth_cmd) return cmd_synth(g, synth_args, out);
        if (*cmp_cmd) return cmd_compare(g, cmp_args, out);
        if (*conv_cmd) return cmd_convert(g, conv_args, out);
    } catch (const ModelError& e) {
        err << "error: " << e.what() << "\n";
        return kModelError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsage;
}

}  // namespace gcps::cli
