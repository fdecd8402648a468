#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gcps/analysis.hpp"
#include "gcps/dsl.hpp"
#include "gcps/engine.hpp"
#include "gcps/error.hpp"
#include "gcps/odelimit.hpp"
#include "gcps/stategraph.hpp"

namespace py = pybind11;
using namespace gcps;

namespace {

using Rows = std::vector<std::vector<std::int64_t>>;

// Configurations cross the boundary as rows: row 0 is the finite part of the
// environment, row c is cell c; columns follow the alphabet.
Rows to_rows(const Configuration& u) {
    Rows out(u.n_cells() + 1, std::vector<std::int64_t>(u.n_objects()));
    for (std::size_t c = 0; c <= u.n_cells(); ++c)
        for (std::size_t o = 0; o < u.n_objects(); ++o) out[c][o] = u.count(c, o);
    return out;
}

Configuration from_rows(const GcpsModel& m, const Rows& rows) {
    if (rows.size() != m.n_cells + 1) throw ModelError("expected one row per cell plus the environment row");
    Configuration u(m.n_cells, m.n_objects());
    for (std::size_t c = 0; c <= m.n_cells; ++c) {
        if (rows[c].size() != m.n_objects()) throw ModelError("row length must match the alphabet");
        for (std::size_t o = 0; o < m.n_objects(); ++o) u.set(c, o, rows[c][o]);
    }
    return u;
}

Configuration start(const GcpsModel& m, const std::optional<Rows>& rows) {
    return rows ? from_rows(m, *rows) : m.initial_configuration();
}

Mode mode_of(const std::string& name) {
    auto mode = parse_mode(name);
    if (!mode) throw ModelError("unknown mode '" + name + "'");
    return *mode;
}

RunSpec make_spec(const std::string& mode, std::optional<std::uint64_t> max_steps,
                  std::optional<double> max_time, bool until_halt, std::uint64_t seed,
                  const std::string& record) {
    RunSpec spec;
    spec.mode = mode_of(mode);
    spec.max_steps = max_steps;
    spec.max_time = max_time;
    spec.until_halt = until_halt;
    spec.seed = seed;
    if (record == "all") spec.record = RecordPolicy::all();
    else if (record == "final") spec.record = RecordPolicy::final_only();
    else if (record.rfind("stride=", 0) == 0) spec.record = RecordPolicy::every(std::stoull(record.substr(7)));
    else throw ModelError("record must be all, final or stride=K");
    return spec;
}

py::dict ode_dict(const OdeSystem& s) {
    py::dict a, b, linear;
    for (const auto& [key, v] : s.a) a[py::make_tuple(key[0], key[1], key[2])] = v;
    for (const auto& [key, v] : s.b) b[py::make_tuple(key.first, key.second)] = v;
    for (const auto& [key, v] : s.linear) linear[py::make_tuple(key.first, key.second)] = v;
    py::dict d;
    d["n"] = s.n_vars;
    d["a"] = a;
    d["b"] = b;
    d["linear"] = linear;
    return d;
}

OdeSystem ode_from_dict(const py::dict& d) {
    OdeSystem s;
    s.n_vars = d["n"].cast<std::size_t>();
    for (auto [key, v] : d["a"].cast<py::dict>()) {
        auto t = key.cast<std::array<std::size_t, 3>>();
        s.a[t] = v.cast<double>();
    }
    for (auto [key, v] : d["b"].cast<py::dict>()) s.b[key.cast<OdeSystem::Pair>()] = v.cast<double>();
    if (d.contains("linear"))
        for (auto [key, v] : d["linear"].cast<py::dict>()) s.linear[key.cast<OdeSystem::Pair>()] = v.cast<double>();
    // round-trip through the JSON reader so that validation is shared
    return parse_ode_system(serialize_ode_system(s));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Generalized communicating P systems: simulation, state graphs and ODE limits";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    auto model_error = py::register_exception<ModelError>(m, "ModelError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", model_error.ptr());
    py::register_exception<RuleNotApplicable>(m, "RuleNotApplicable", base.ptr());
    py::register_exception<HaltedError>(m, "HaltedError", base.ptr());
    py::register_exception<CapacityError>(m, "CapacityError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception<IntegrationError>(m, "IntegrationError", base.ptr());

    py::class_<Rule>(m, "Rule")
        .def(py::init<>())
        .def_readwrite("id", &Rule::id)
        .def_readwrite("a", &Rule::a)
        .def_readwrite("i", &Rule::i)
        .def_readwrite("k", &Rule::k)
        .def_readwrite("b", &Rule::b)
        .def_readwrite("j", &Rule::j)
        .def_readwrite("l", &Rule::l)
        .def_readwrite("constant", &Rule::constant)
        .def("__repr__", [](const Rule& r) {
            return "<Rule " + r.id + " (" + std::to_string(r.a) + "," + std::to_string(r.i) + ")(" +
                   std::to_string(r.b) + "," + std::to_string(r.j) + ") -> (" + std::to_string(r.k) + "," +
                   std::to_string(r.l) + ") @" + format_double(r.constant) + ">";
        });

    py::class_<GcpsModel>(m, "Model")
        .def(py::init<>())
        .def_static("parse", &parse_model, py::arg("text"))
        .def_static("load", [](const std::string& path) { return load_model(path); }, py::arg("path"))
        .def_static("one_symbol", &make_one_symbol_model, py::arg("n_cells"))
        .def("serialize", py::overload_cast<const GcpsModel&>(&serialize_model))
        .def("validate", [](const GcpsModel& g) {
            std::vector<std::pair<std::optional<std::size_t>, std::string>> out;
            for (const auto& v : validate_model(g)) out.emplace_back(v.rule, v.reason);
            return out;
        })
        .def_readwrite("name", &GcpsModel::name)
        .def_readwrite("description", &GcpsModel::description)
        .def_readwrite("alphabet", &GcpsModel::alphabet)
        .def_readwrite("env", &GcpsModel::env)
        .def_readwrite("n_cells", &GcpsModel::n_cells)
        .def_readwrite("cell_labels", &GcpsModel::cell_labels)
        .def_readwrite("initial", &GcpsModel::initial)
        .def_readwrite("rules", &GcpsModel::rules)
        .def_readwrite("output_cell", &GcpsModel::output_cell)
        .def("initial_configuration", [](const GcpsModel& g) { return to_rows(g.initial_configuration()); })
        .def("__eq__", [](const GcpsModel& x, const GcpsModel& y) { return x == y; });

    m.def("applicable_rules", [](const GcpsModel& g, const Rows& u) { return applicable_rules(g, from_rows(g, u)); },
          py::arg("model"), py::arg("config"));
    m.def("apply_rule",
          [](const GcpsModel& g, const Rows& u, std::size_t r) { return to_rows(apply_rule(g, from_rows(g, u), r)); },
          py::arg("model"), py::arg("config"), py::arg("rule"));
    m.def("propensities", [](const GcpsModel& g, const Rows& u) { return propensities(g, from_rows(g, u)); },
          py::arg("model"), py::arg("config"));

    m.def(
        "run",
        [](const GcpsModel& g, const std::optional<Rows>& u0, const std::string& mode,
           std::optional<std::uint64_t> max_steps, std::optional<double> max_time, bool until_halt,
           std::uint64_t seed, const std::string& record) {
            const auto t = run(g, start(g, u0), make_spec(mode, max_steps, max_time, until_halt, seed, record));
            py::list events;
            for (const auto& e : t.events)
                events.append(py::make_tuple(e.time, e.rule == kParallelStep ? py::object(py::none())
                                                                              : py::object(py::int_(e.rule)),
                                             to_rows(e.state)));
            py::dict d;
            d["initial"] = to_rows(t.initial);
            d["events"] = events;
            d["halted"] = t.halted;
            d["steps"] = t.steps;
            d["end_time"] = t.end_time;
            d["seed"] = t.seed;
            d["csv"] = trajectory_csv(g, t);
            return d;
        },
        py::arg("model"), py::arg("initial") = py::none(), py::arg("mode") = "ssa",
        py::arg("max_steps") = py::none(), py::arg("max_time") = py::none(), py::arg("until_halt") = false,
        py::arg("seed") = 42, py::arg("record") = "all",
        "Simulate one run. Events are (time, rule index or None for a parallel step, config rows).");

    m.def(
        "ensemble",
        [](const GcpsModel& g, std::size_t runs, double grid_dt, const std::optional<Rows>& u0,
           const std::string& mode, std::optional<std::uint64_t> max_steps, std::optional<double> max_time,
           std::uint64_t seed, std::size_t jobs) {
            auto spec = make_spec(mode, max_steps, max_time, false, seed, "final");
            const double horizon = max_time ? *max_time : static_cast<double>(max_steps.value_or(0));
            const auto grid = uniform_grid(grid_dt, horizon);
            py::gil_scoped_release release;
            auto e = ensemble(g, start(g, u0), spec, runs, grid, jobs);
            py::gil_scoped_acquire acquire;
            py::dict d;
            d["grid"] = e.grid;
            d["mean"] = e.mean;
            d["std"] = e.stddev;
            d["runs"] = e.runs;
            return d;
        },
        py::arg("model"), py::arg("runs"), py::arg("grid_dt"), py::arg("initial") = py::none(),
        py::arg("mode") = "ssa", py::arg("max_steps") = py::none(), py::arg("max_time") = py::none(),
        py::arg("seed") = 42, py::arg("jobs") = 1);

    m.def(
        "state_graph",
        [](const GcpsModel& g, const std::optional<Rows>& u0, std::size_t max_nodes) {
            const auto graph = build_state_graph(g, start(g, u0), max_nodes);
            const auto scc = terminal_sccs(graph);
            std::vector<Rows> nodes;
            std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> edges;
            for (std::size_t n = 0; n < graph.size(); ++n) {
                nodes.push_back(to_rows(graph.node(n)));
                for (const auto& e : graph.out_edges(n)) edges.emplace_back(e.from, e.to, e.rule);
            }
            py::dict d;
            d["nodes"] = nodes;
            d["labels"] = [&] {
                std::vector<std::string> out;
                for (std::size_t n = 0; n < graph.size(); ++n) out.push_back(configuration_label(g, graph.node(n)));
                return out;
            }();
            d["edges"] = edges;
            d["components"] = scc.components;
            d["terminal"] = scc.terminal_components();
            d["dot"] = state_graph_dot(g, graph, scc);
            return d;
        },
        py::arg("model"), py::arg("initial") = py::none(), py::arg("max_nodes") = kDefaultMaxNodes);

    m.def(
        "generated_set",
        [](const GcpsModel& g, const std::optional<Rows>& u0, std::size_t max_nodes) {
            return generated_set(g, start(g, u0), max_nodes);
        },
        py::arg("model"), py::arg("initial") = py::none(), py::arg("max_nodes") = kDefaultMaxNodes);

    m.def("derive_odes", [](const GcpsModel& g) { return ode_dict(derive_odes(g)); }, py::arg("model"),
          "ODE limit as {'n', 'a': {(i,j,k): v}, 'b': {(i,j): v}, 'linear': {(i,j): v}}, 1-based.");
    m.def("parse_ode_system", [](const std::string& text) { return ode_dict(parse_ode_system(text)); });
    m.def("serialize_ode_system", [](const py::dict& d) { return serialize_ode_system(ode_from_dict(d)); });
    m.def("ode_rhs", [](const py::dict& d, const std::vector<double>& y) { return ode_from_dict(d).rhs(y); });
    m.def(
        "validate_ode",
        [](const py::dict& d) {
            OdeSystem s;
            s.n_vars = d["n"].cast<std::size_t>();
            for (auto [key, v] : d["a"].cast<py::dict>()) s.a[key.cast<OdeSystem::Triple>()] = v.cast<double>();
            for (auto [key, v] : d["b"].cast<py::dict>()) s.b[key.cast<OdeSystem::Pair>()] = v.cast<double>();
            auto r = validate_population_ode(s);
            return py::make_tuple(r.valid, r.conserves_total, r.violations);
        },
        py::arg("system"), "(valid, conserves_total, violations)");
    m.def(
        "odes_to_gcps",
        [](const py::dict& d, const std::vector<std::int64_t>& initial) {
            return odes_to_gcps(ode_from_dict(d), initial);
        },
        py::arg("system"), py::arg("initial") = std::vector<std::int64_t>{});
    m.def(
        "integrate",
        [](const py::dict& d, const std::vector<double>& y0, double dt, double t_end, std::size_t stride) {
            auto t = integrate(ode_from_dict(d), y0, dt, t_end, stride);
            return py::make_tuple(t.times, t.values, t.clipped);
        },
        py::arg("system"), py::arg("y0"), py::arg("dt"), py::arg("t_end"), py::arg("stride") = 1,
        "(times, values[t][i], clipped)");
    m.def(
        "find_fixed_point",
        [](const py::dict& d, const std::vector<double>& y0, double tol) {
            FixedPointOptions o;
            o.tol = tol;
            auto fp = find_fixed_point(ode_from_dict(d), y0, o);
            py::dict r;
            r["point"] = fp.point;
            r["time"] = fp.time;
            r["steps"] = fp.steps;
            r["residual"] = fp.residual;
            return r;
        },
        py::arg("system"), py::arg("y0"), py::arg("tol") = 1e-10);

    m.def(
        "protocol_to_model",
        [](const std::string& json_text, const std::optional<std::map<std::string, std::int64_t>>& input) {
            auto doc = parse_protocol(json_text);
            return pp_to_gcps(doc.protocol, input ? *input : doc.input);
        },
        py::arg("json_text"), py::arg("input") = py::none());
    m.def(
        "model_to_protocol",
        [](const GcpsModel& g) {
            ProtocolDocument doc;
            doc.protocol = gcps_to_pp(g);
            const auto u = g.initial_configuration();
            for (std::size_t c = 1; c <= g.n_cells; ++c)
                if (auto v = u.count(c, 0); v != 0) doc.input[doc.protocol.inputs[c - 1]] = v;
            return serialize_protocol(doc);
        },
        py::arg("model"));
}
