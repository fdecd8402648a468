#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcps/engine.hpp"
#include "gcps/model.hpp"

namespace gcps {

inline constexpr std::size_t kDefaultMaxNodes = 1'000'000;

struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;
    std::size_t rule = 0;
};

/// Configurations reachable from a root, one edge per (node, applicable rule).
class StateGraph {
public:
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t root() const noexcept { return 0; }
    const Configuration& node(std::size_t n) const { return nodes_.at(n); }
    const std::vector<Edge>& out_edges(std::size_t n) const { return out_.at(n); }
    std::size_t edge_count() const noexcept;
    std::optional<std::size_t> find(const Configuration& c) const;

    /// Node indices with distinct successor nodes, self-loops included.
    std::vector<std::vector<std::size_t>> adjacency() const;

private:
    friend StateGraph build_state_graph(const GcpsModel&, const Configuration&, std::size_t);

    std::size_t add(Configuration c);

    std::vector<Configuration> nodes_;
    std::vector<std::vector<Edge>> out_;
    std::unordered_map<Configuration, std::size_t, ConfigurationHash> index_;
};

/// Breadth-first closure under single-rule steps. max_nodes = 0 means no cap,
/// which is refused for models that import objects from the environment.
/// Throws CapacityError when the cap is exceeded.
StateGraph build_state_graph(const GcpsModel& m, const Configuration& u0,
                             std::size_t max_nodes = kDefaultMaxNodes);

struct SccReport {
    std::vector<std::vector<std::size_t>> components;  // node indices, sorted
    std::vector<std::size_t> component_of;             // node -> component
    std::vector<bool> terminal;
    std::vector<std::pair<std::size_t, std::size_t>> condensation_edges;  // sorted, unique

    std::vector<std::size_t> terminal_components() const;
};

/// Tarjan's algorithm (iterative); a component is terminal iff no
/// condensation edge leaves it.
SccReport terminal_sccs(const StateGraph& g);

struct FairnessReport {
    bool entered = false;
    std::size_t entry_step = 0;   // index into the trajectory's state sequence
    std::size_t component = 0;
    std::vector<std::pair<std::size_t, std::uint64_t>> visits;  // (node, count) from entry on
    bool passed = false;
    std::string message;
};

/// Finite-run fairness surrogate: the run must reach a terminal component and
/// then visit each of its states at least k_min times. The state sequence is
/// the initial state followed by every recorded event. Throws Error when a
/// state is missing from the graph.
FairnessReport fairness_report(const StateGraph& g, const SccReport& scc, const Trajectory& t,
                               std::uint64_t k_min);

/// Output-cell sizes over all reachable halting configurations.
std::set<std::int64_t> generated_set(const GcpsModel& m, const Configuration& u0,
                                     std::size_t max_nodes = kDefaultMaxNodes);

/// Node label: per-cell counts, e.g. "(1,1)" for one-symbol systems.
std::string configuration_label(const GcpsModel& m, const Configuration& c);

/// State graph with one cluster per component; terminal components are filled.
std::string state_graph_dot(const GcpsModel& m, const StateGraph& g, const SccReport& scc);

/// Condensation DAG; nodes list their member configurations.
std::string condensation_dot(const GcpsModel& m, const StateGraph& g, const SccReport& scc);

}  // namespace gcps
