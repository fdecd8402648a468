#include <doctest.h>

#include <set>

#include "../oracles.hpp"
#include "gcps/engine.hpp"
#include "gcps/error.hpp"
#include "gcps/stategraph.hpp"
#include "helpers.hpp"

using namespace gcps;

namespace {

std::set<std::string> labels(const GcpsModel& m, const StateGraph& g, const std::vector<std::size_t>& nodes) {
    std::set<std::string> out;
    for (auto n : nodes) out.insert(configuration_label(m, g.node(n)));
    return out;
}

// Condensation acyclicity by Kahn's algorithm.
bool acyclic(const SccReport& scc) {
    const auto n = scc.components.size();
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<std::size_t>> out(n);
    for (auto [a, b] : scc.condensation_edges) {
        out[a].push_back(b);
        ++indeg[b];
    }
    std::vector<std::size_t> ready;
    for (std::size_t c = 0; c < n; ++c)
        if (indeg[c] == 0) ready.push_back(c);
    std::size_t seen = 0;
    while (!ready.empty()) {
        auto c = ready.back();
        ready.pop_back();
        ++seen;
        for (auto d : out[c])
            if (--indeg[d] == 0) ready.push_back(d);
    }
    return seen == n;
}

}  // namespace

TEST_CASE("sqrt2 protocol with two agents") {
    auto m = preset("sqrt2.gcps");
    auto g = build_state_graph(m, cells({2, 0}));
    CHECK(g.size() == 2);
    CHECK_FALSE(g.find(cells({0, 2})));
    CHECK(g.find(cells({1, 1})));

    auto from = build_state_graph(m, cells({0, 2}));
    CHECK(from.size() == 3);
    auto scc = terminal_sccs(from);
    const auto terminal = scc.terminal_components();
    REQUIRE(terminal.size() == 1);
    CHECK(labels(m, from, scc.components[terminal[0]]) == std::set<std::string>{"(1,1)", "(2,0)"});
    CHECK(scc.components.size() == 2);
    CHECK(acyclic(scc));
}

TEST_CASE("graph without rules") {
    auto m = make_one_symbol_model(2);
    auto g = build_state_graph(m, cells({1, 2}));
    CHECK(g.size() == 1);
    CHECK(g.edge_count() == 0);
    auto scc = terminal_sccs(g);
    REQUIRE(scc.components.size() == 1);
    CHECK(scc.terminal[0]);
}

TEST_CASE("directed 3-cycle") {
    auto m = make_one_symbol_model(3);
    m.rules = {move(1, 0, 2, 0), move(2, 0, 3, 0), move(3, 0, 1, 0)};
    auto g = build_state_graph(m, cells({1, 0, 0}));
    CHECK(g.size() == 3);
    auto scc = terminal_sccs(g);
    REQUIRE(scc.components.size() == 1);
    CHECK(scc.components[0].size() == 3);
    CHECK(scc.terminal[0]);
}

TEST_CASE("unbounded growth hits the node cap") {
    auto m = preset("lotka-renewable.gcps");
    CHECK_THROWS_AS(build_state_graph(m, m.initial_configuration(), 100), CapacityError);
    CHECK_THROWS_AS(build_state_graph(m, m.initial_configuration(), 0), Error);
}

TEST_CASE("edges mirror the successor relation") {
    auto m = preset("lotka-finite.gcps");
    auto g = build_state_graph(m, cells({2, 2, 2}));
    for (std::size_t n = 0; n < g.size(); ++n) {
        std::set<std::pair<std::size_t, std::size_t>> edges, expected;
        for (const auto& e : g.out_edges(n)) edges.insert({e.to, e.rule});
        for (auto r : applicable_rules(m, g.node(n)))
            expected.insert({*g.find(apply_rule(m, g.node(n), r)), r});
        CHECK(edges == expected);
    }
}

TEST_CASE("property: halting nodes, acyclic condensation and constant totals") {
    Rng rng(17);
    for (int trial = 0; trial < 150; ++trial) {
        auto m = oracle::random_closed_model(rng, 4, 5, 3);
        const auto u0 = m.initial_configuration();
        auto g = build_state_graph(m, u0);
        auto scc = terminal_sccs(g);
        CHECK(acyclic(scc));
        for (std::size_t n = 0; n < g.size(); ++n) {
            CHECK(total_in_cells(g.node(n)) == total_in_cells(u0));
            CHECK(g.out_edges(n).empty() == applicable_rules(m, g.node(n)).empty());
        }
        // a component is terminal iff nothing leaves it
        for (std::size_t c = 0; c < scc.components.size(); ++c) {
            bool leaves = false;
            for (auto n : scc.components[c])
                for (const auto& e : g.out_edges(n)) leaves = leaves || scc.component_of[e.to] != c;
            CHECK(scc.terminal[c] == !leaves);
        }
        // mutual reachability inside components
        auto adj = g.adjacency();
        auto reach = [&](std::size_t from) {
            std::vector<bool> seen(g.size(), false);
            std::vector<std::size_t> stack{from};
            seen[from] = true;
            while (!stack.empty()) {
                auto x = stack.back();
                stack.pop_back();
                for (auto y : adj[x])
                    if (!seen[y]) stack.push_back(y), seen[y] = true;
            }
            return seen;
        };
        for (std::size_t x = 0; x < g.size(); ++x) {
            auto rx = reach(x);
            for (std::size_t y = 0; y < g.size(); ++y) {
                const bool same = scc.component_of[x] == scc.component_of[y];
                if (same) CHECK(rx[y]);
                if (rx[y] && reach(y)[x]) CHECK(same);
            }
        }
    }
}

TEST_CASE("fairness surrogate on the two-agent protocol") {
    auto m = preset("sqrt2.gcps");
    auto g = build_state_graph(m, cells({2, 0}));
    auto scc = terminal_sccs(g);
    RunSpec spec;
    spec.max_steps = 10000;
    auto t = run(m, cells({2, 0}), spec);
    auto rep = fairness_report(g, scc, t, 100);
    CHECK(rep.passed);
    CHECK(rep.entered);
    CHECK(rep.entry_step == 0);
    REQUIRE(rep.visits.size() == 2);
    for (std::size_t k = 1; k < t.events.size(); ++k) CHECK(t.events[k].state != t.events[k - 1].state);
}

TEST_CASE("fairness surrogate on a halting configuration") {
    auto m = make_one_symbol_model(2);
    auto g = build_state_graph(m, cells({1, 1}));
    auto scc = terminal_sccs(g);
    RunSpec spec;
    spec.until_halt = true;
    auto t = run(m, cells({1, 1}), spec);
    CHECK(t.events.empty());
    CHECK(fairness_report(g, scc, t, 1).passed);
}

TEST_CASE("fairness surrogate fails before any terminal component") {
    auto m = preset("sqrt2.gcps");
    auto g = build_state_graph(m, cells({0, 2}));
    auto scc = terminal_sccs(g);
    Trajectory t;
    t.initial = cells({0, 2});
    auto rep = fairness_report(g, scc, t, 1);
    CHECK_FALSE(rep.passed);
    CHECK_FALSE(rep.entered);
    CHECK(rep.message == "no terminal SCC entered");

    t.initial = cells({5, 5});
    CHECK_THROWS_AS(fairness_report(g, scc, t, 1), Error);
}

TEST_CASE("fairness needs enough visits") {
    auto m = preset("sqrt2.gcps");
    auto g = build_state_graph(m, cells({2, 0}));
    auto scc = terminal_sccs(g);
    RunSpec spec;
    spec.max_steps = 10;
    auto t = run(m, cells({2, 0}), spec);
    CHECK_FALSE(fairness_report(g, scc, t, 100).passed);
}

TEST_CASE("generated sets") {
    auto m = make_one_symbol_model(2);
    m.output_cell = 2;
    m.rules = {move(1, 1, 2, 2)};
    CHECK(generated_set(m, cells({3, 0})) == std::set<std::int64_t>{2});
    CHECK(generated_set(m, cells({4, 0})) == std::set<std::int64_t>{4});
    CHECK(build_state_graph(m, cells({4, 0})).size() == 3);

    auto empty = make_one_symbol_model(2);
    empty.output_cell = 2;
    CHECK(generated_set(empty, cells({0, 5})) == std::set<std::int64_t>{5});

    // two different halting outcomes
    auto branch = make_one_symbol_model(3);
    branch.output_cell = 2;
    branch.rules = {move(1, 1, 2, 2), move(1, 1, 3, 3)};
    CHECK(generated_set(branch, cells({4, 0, 0})) == std::set<std::int64_t>{0, 2, 4});
}

TEST_CASE("labels and DOT export") {
    auto m = preset("sqrt2.gcps");
    auto g = build_state_graph(m, cells({2, 0}));
    auto scc = terminal_sccs(g);
    CHECK(configuration_label(m, cells({1, 1})) == "(1,1)");
    auto dot = state_graph_dot(m, g, scc);
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(dot.find("\"(1,1)\"") != std::string::npos);
    CHECK(dot.find("\"(2,0)\"") != std::string::npos);
    CHECK(dot.find("lightblue") != std::string::npos);
    auto cdot = condensation_dot(m, g, scc);
    CHECK(cdot.rfind("digraph", 0) == 0);

    GcpsModel w;
    w.alphabet = {"x", "y"};
    w.env = {true, false};
    w.n_cells = 1;
    w.cell_labels.assign(2, "");
    Configuration u(1, 2);
    u.set(1, 0, 2);
    u.set(0, 1, 1);
    CHECK(configuration_label(w, u).find("env") != std::string::npos);
}
