#include "gcps/stategraph.hpp"

#include <algorithm>
#include <deque>

#include "gcps/error.hpp"

namespace gcps {

std::size_t StateGraph::edge_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : out_) n += e.size();
    return n;
}

std::optional<std::size_t> StateGraph::find(const Configuration& c) const {
    auto it = index_.find(c);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::vector<std::size_t>> StateGraph::adjacency() const {
    std::vector<std::vector<std::size_t>> adj(nodes_.size());
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
        for (const auto& e : out_[n]) adj[n].push_back(e.to);
        std::sort(adj[n].begin(), adj[n].end());
        adj[n].erase(std::unique(adj[n].begin(), adj[n].end()), adj[n].end());
    }
    return adj;
}

std::size_t StateGraph::add(Configuration c) {
    const auto id = nodes_.size();
    index_.emplace(c, id);
    nodes_.push_back(std::move(c));
    out_.emplace_back();
    return id;
}

StateGraph build_state_graph(const GcpsModel& m, const Configuration& u0, std::size_t max_nodes) {
    require_valid(m);
    check_dimensions(m, u0);
    if (max_nodes == 0)
        for (const auto& r : m.rules)
            if (imports_from_environment(m, r))
                throw CapacityError(
                    "refusing uncapped exploration: rules import objects from the environment");

    StateGraph g;
    g.add(u0);
    std::deque<std::size_t> queue{0};
    while (!queue.empty()) {
        const auto n = queue.front();
        queue.pop_front();
        for (std::size_t r = 0; r < m.rules.size(); ++r) {
            if (!is_applicable(m, g.nodes_[n], r)) continue;
            Configuration next = g.nodes_[n];
            apply_rule_in_place(m, next, m.rules[r]);
            auto found = g.find(next);
            std::size_t to = 0;
            if (found) {
                to = *found;
            } else {
                if (max_nodes != 0 && g.size() >= max_nodes)
                    throw CapacityError("state graph exceeds the cap of " + std::to_string(max_nodes) +
                                        " nodes");
                to = g.add(std::move(next));
                queue.push_back(to);
            }
            g.out_[n].push_back({n, to, r});
        }
    }
    return g;
}

std::vector<std::size_t> SccReport::terminal_components() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < terminal.size(); ++c)
        if (terminal[c]) out.push_back(c);
    return out;
}

SccReport terminal_sccs(const StateGraph& g) {
    const auto adj = g.adjacency();
    const auto n = adj.size();
    constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::size_t counter = 0;

    SccReport report;
    report.component_of.assign(n, 0);

    // explicit DFS stack of (node, next child position)
    std::vector<std::pair<std::size_t, std::size_t>> work;
    for (std::size_t start = 0; start < n; ++start) {
        if (index[start] != kUnvisited) continue;
        work.emplace_back(start, 0);
        index[start] = low[start] = counter++;
        stack.push_back(start);
        on_stack[start] = true;
        while (!work.empty()) {
            auto& [v, pos] = work.back();
            if (pos < adj[v].size()) {
                const auto w = adj[v][pos++];
                if (index[w] == kUnvisited) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    work.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            const auto node = v;
            work.pop_back();
            if (!work.empty()) {
                auto parent = work.back().first;
                low[parent] = std::min(low[parent], low[node]);
            }
            if (low[node] == index[node]) {
                std::vector<std::size_t> comp;
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    report.component_of[w] = report.components.size();
                    comp.push_back(w);
                } while (w != node);
                std::sort(comp.begin(), comp.end());
                report.components.push_back(std::move(comp));
            }
        }
    }

    report.terminal.assign(report.components.size(), true);
    for (std::size_t v = 0; v < n; ++v)
        for (auto w : adj[v]) {
            const auto cv = report.component_of[v], cw = report.component_of[w];
            if (cv != cw) {
                report.condensation_edges.emplace_back(cv, cw);
                report.terminal[cv] = false;
            }
        }
    auto& ce = report.condensation_edges;
    std::sort(ce.begin(), ce.end());
    ce.erase(std::unique(ce.begin(), ce.end()), ce.end());
    return report;
}

FairnessReport fairness_report(const StateGraph& g, const SccReport& scc, const Trajectory& t,
                               std::uint64_t k_min) {
    std::vector<const Configuration*> states{&t.initial};
    for (const auto& e : t.events) states.push_back(&e.state);

    FairnessReport rep;
    std::vector<std::uint64_t> visits;
    for (std::size_t s = 0; s < states.size(); ++s) {
        auto node = g.find(*states[s]);
        if (!node) throw Error("trajectory step " + std::to_string(s) + " is not in the state graph");
        const auto comp = scc.component_of[*node];
        if (!rep.entered && scc.terminal[comp]) {
            rep.entered = true;
            rep.entry_step = s;
            rep.component = comp;
            visits.assign(scc.components[comp].size(), 0);
        }
        if (rep.entered) {
            if (comp != rep.component)
                throw Error("trajectory left a terminal component at step " + std::to_string(s));
            const auto& members = scc.components[comp];
            auto it = std::lower_bound(members.begin(), members.end(), *node);
            ++visits[static_cast<std::size_t>(it - members.begin())];
        }
    }
    if (!rep.entered) {
        rep.message = "no terminal SCC entered";
        return rep;
    }
    const auto& members = scc.components[rep.component];
    rep.passed = true;
    for (std::size_t i = 0; i < members.size(); ++i) {
        rep.visits.emplace_back(members[i], visits[i]);
        if (visits[i] < k_min) rep.passed = false;
    }
    rep.message = rep.passed ? "every terminal-SCC state visited at least " + std::to_string(k_min) + " times"
                             : "some terminal-SCC state visited fewer than " + std::to_string(k_min) + " times";
    return rep;
}

std::set<std::int64_t> generated_set(const GcpsModel& m, const Configuration& u0, std::size_t max_nodes) {
    const auto g = build_state_graph(m, u0, max_nodes);
    std::set<std::int64_t> out;
    for (std::size_t n = 0; n < g.size(); ++n)
        if (g.out_edges(n).empty()) out.insert(g.node(n).cell_total(m.output_cell));
    return out;
}

std::string configuration_label(const GcpsModel& m, const Configuration& c) {
    std::string out = "(";
    for (std::size_t cell = 1; cell <= m.n_cells; ++cell) {
        if (cell > 1) out += ',';
        if (m.is_one_symbol()) {
            out += std::to_string(c.count(cell, 0));
            continue;
        }
        out += '[';
        for (std::size_t o = 0; o < m.n_objects(); ++o) {
            if (o > 0) out += ' ';
            out += std::to_string(c.count(cell, o));
        }
        out += ']';
    }
    out += ')';
    bool finite_env = false;
    for (std::size_t o = 0; o < m.n_objects(); ++o) finite_env |= c.count(kEnvironment, o) != 0;
    if (finite_env) out += " env=" + std::to_string(c.cell_total(kEnvironment));
    return out;
}

std::string state_graph_dot(const GcpsModel& m, const StateGraph& g, const SccReport& scc) {
    std::string out = "digraph state_graph {\n  node [shape=box];\n";
    for (std::size_t c = 0; c < scc.components.size(); ++c) {
        out += "  subgraph cluster_" + std::to_string(c) + " {\n";
        out += scc.terminal[c] ? "    label=\"terminal SCC " + std::to_string(c) + "\";\n    style=bold;\n"
                               : "    label=\"SCC " + std::to_string(c) + "\";\n    style=dashed;\n";
        for (auto n : scc.components[c]) {
            out += "    n" + std::to_string(n) + " [label=\"" + configuration_label(m, g.node(n)) + "\"";
            if (scc.terminal[c]) out += ", style=filled, fillcolor=lightblue";
            if (n == g.root()) out += ", peripheries=2";
            out += "];\n";
        }
        out += "  }\n";
    }
    for (std::size_t n = 0; n < g.size(); ++n)
        for (const auto& e : g.out_edges(n)) {
            const auto& r = m.rules[e.rule];
            out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) + " [label=\"" +
                   (r.id.empty() ? "r" + std::to_string(e.rule + 1) : r.id) + "\"];\n";
        }
    out += "}\n";
    return out;
}

std::string condensation_dot(const GcpsModel& m, const StateGraph& g, const SccReport& scc) {
    std::string out = "digraph condensation {\n  node [shape=box];\n";
    for (std::size_t c = 0; c < scc.components.size(); ++c) {
        std::string label;
        for (auto n : scc.components[c]) {
            if (!label.empty()) label += "\\n";
            label += configuration_label(m, g.node(n));
        }
        out += "  c" + std::to_string(c) + " [label=\"" + label + "\"";
        if (scc.terminal[c]) out += ", style=filled, fillcolor=lightblue";
        out += "];\n";
    }
    for (const auto& [from, to] : scc.condensation_edges)
        out += "  c" + std::to_string(from) + " -> c" + std::to_string(to) + ";\n";
    out += "}\n";
    return out;
}

}  // namespace gcps
