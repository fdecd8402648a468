#include "gcps/model.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "gcps/error.hpp"

namespace gcps {

Configuration::Configuration(std::size_t n_cells, std::size_t n_objects)
    : n_cells_(n_cells), n_objects_(n_objects), counts_((n_cells + 1) * n_objects, 0) {}

void Configuration::set(std::size_t cell, std::size_t object, std::int64_t value) {
    if (value < 0) throw ModelError("negative object count");
    counts_[cell * n_objects_ + object] = value;
}

void Configuration::add(std::size_t cell, std::size_t object, std::int64_t delta) {
    auto& slot = counts_[cell * n_objects_ + object];
    if (delta > 0 && slot > std::numeric_limits<std::int64_t>::max() - delta)
        throw Error("object count overflow");
    slot += delta;
    if (slot < 0) throw Error("object count became negative");
}

std::int64_t Configuration::cell_total(std::size_t cell) const {
    auto first = counts_.begin() + static_cast<std::ptrdiff_t>(cell * n_objects_);
    return std::accumulate(first, first + static_cast<std::ptrdiff_t>(n_objects_), std::int64_t{0});
}

std::size_t ConfigurationHash::operator()(const Configuration& c) const noexcept {
    // FNV-1a over the count words
    std::uint64_t h = 1469598103934665603ULL;
    for (auto v : c.raw()) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
}

std::optional<std::size_t> GcpsModel::object_index(std::string_view name) const {
    auto it = std::find(alphabet.begin(), alphabet.end(), name);
    if (it == alphabet.end()) return std::nullopt;
    return static_cast<std::size_t>(it - alphabet.begin());
}

std::optional<std::size_t> GcpsModel::cell_index(std::string_view label) const {
    for (std::size_t c = 0; c < cell_labels.size(); ++c)
        if (!cell_labels[c].empty() && cell_labels[c] == label) return c;
    return std::nullopt;
}

std::string GcpsModel::cell_name(std::size_t cell) const {
    if (cell < cell_labels.size() && !cell_labels[cell].empty()) return cell_labels[cell];
    return std::to_string(cell);
}

Configuration GcpsModel::initial_configuration() const {
    Configuration u(n_cells, n_objects());
    for (std::size_t c = 1; c <= n_cells && c - 1 < initial.size(); ++c)
        for (std::size_t o = 0; o < n_objects() && o < initial[c - 1].size(); ++o)
            u.set(c, o, initial[c - 1][o]);
    return u;
}

void GcpsModel::set_initial(const Configuration& u) {
    check_dimensions(*this, u);
    initial.assign(n_cells, std::vector<std::int64_t>(n_objects(), 0));
    for (std::size_t c = 1; c <= n_cells; ++c)
        for (std::size_t o = 0; o < n_objects(); ++o) initial[c - 1][o] = u.count(c, o);
}

GcpsModel make_one_symbol_model(std::size_t n_cells) {
    GcpsModel m;
    m.alphabet = {"tok"};
    m.env = {true};
    m.n_cells = n_cells;
    m.cell_labels.assign(n_cells + 1, "");
    m.initial.assign(n_cells, std::vector<std::int64_t>(1, 0));
    return m;
}

std::vector<Violation> validate_model(const GcpsModel& m) {
    std::vector<Violation> out;
    const auto n_obj = m.n_objects();
    if (n_obj == 0) out.push_back({std::nullopt, "alphabet is empty"});
    if (m.env.size() != n_obj)
        out.push_back({std::nullopt, "environment mask does not match the alphabet"});
    if (m.n_cells < 1) out.push_back({std::nullopt, "degree must be at least 1"});
    if (m.output_cell < 1 || m.output_cell > m.n_cells)
        out.push_back({std::nullopt, "output cell " + std::to_string(m.output_cell) +
                                         " outside 1.." + std::to_string(m.n_cells)});
    if (!m.cell_labels.empty() && m.cell_labels.size() != m.n_cells + 1)
        out.push_back({std::nullopt, "cell label table has the wrong size"});
    if (m.initial.size() > m.n_cells)
        out.push_back({std::nullopt, "more initial multisets than cells"});
    for (const auto& w : m.initial) {
        if (w.size() > n_obj) out.push_back({std::nullopt, "initial multiset names unknown objects"});
        for (auto v : w)
            if (v < 0) out.push_back({std::nullopt, "negative initial count"});
    }

    for (std::size_t r = 0; r < m.rules.size(); ++r) {
        const auto& rule = m.rules[r];
        for (auto cell : {rule.i, rule.j, rule.k, rule.l})
            if (cell > m.n_cells)
                out.push_back({r, "cell index " + std::to_string(cell) + " outside 0.." +
                                      std::to_string(m.n_cells)});
        if (rule.a >= n_obj || rule.b >= n_obj) out.push_back({r, "unknown object"});
        if (!(rule.constant >= 0.0))
            out.push_back({r, "stochastic constant must be non-negative"});
        if (rule.i == kEnvironment && rule.j == kEnvironment && rule.a < n_obj && rule.b < n_obj &&
            m.is_env(rule.a) && m.is_env(rule.b))
            out.push_back({r, "both objects are taken from the environment and both are environmental "
                              "(at least one must not be)"});
    }
    return out;
}

void require_valid(const GcpsModel& m) {
    auto violations = validate_model(m);
    if (violations.empty()) return;
    std::string msg = "invalid model:";
    for (const auto& v : violations) {
        msg += "\n  ";
        if (v.rule) msg += "rule " + std::to_string(*v.rule + 1) + ": ";
        msg += v.reason;
    }
    throw ModelError(msg);
}

void check_dimensions(const GcpsModel& m, const Configuration& u) {
    if (u.n_cells() != m.n_cells || u.n_objects() != m.n_objects())
        throw ModelError("configuration shape does not match the model");
}

bool is_infinite_source(const GcpsModel& m, std::size_t object, std::size_t cell) {
    return cell == kEnvironment && m.is_env(object);
}

bool imports_from_environment(const GcpsModel& m, const Rule& r) {
    return (is_infinite_source(m, r.a, r.i) && r.k != kEnvironment) ||
           (is_infinite_source(m, r.b, r.j) && r.l != kEnvironment);
}

namespace {

bool available(const GcpsModel& m, const Configuration& u, const Rule& r) {
    const bool inf_a = is_infinite_source(m, r.a, r.i);
    const bool inf_b = is_infinite_source(m, r.b, r.j);
    if (r.a == r.b && r.i == r.j) return inf_a || u.count(r.i, r.a) >= 2;
    return (inf_a || u.count(r.i, r.a) >= 1) && (inf_b || u.count(r.j, r.b) >= 1);
}

}  // namespace

bool is_applicable(const GcpsModel& m, const Configuration& u, std::size_t rule) {
    return available(m, u, m.rules.at(rule));
}

std::vector<std::size_t> applicable_rules(const GcpsModel& m, const Configuration& u) {
    check_dimensions(m, u);
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < m.rules.size(); ++r)
        if (available(m, u, m.rules[r])) out.push_back(r);
    return out;
}

void apply_rule_in_place(const GcpsModel& m, Configuration& u, const Rule& r) {
    // Both sources are removed before anything is added, which matters when a
    // destination of one object is the source cell of the other.
    if (!is_infinite_source(m, r.a, r.i)) u.add(r.i, r.a, -1);
    if (!is_infinite_source(m, r.b, r.j)) u.add(r.j, r.b, -1);
    if (!is_infinite_source(m, r.a, r.k)) u.add(r.k, r.a, +1);
    if (!is_infinite_source(m, r.b, r.l)) u.add(r.l, r.b, +1);
}

Configuration apply_rule(const GcpsModel& m, const Configuration& u, std::size_t rule) {
    check_dimensions(m, u);
    if (rule >= m.rules.size()) throw RuleNotApplicable("rule index out of range");
    const auto& r = m.rules[rule];
    if (!available(m, u, r))
        throw RuleNotApplicable("rule " + std::to_string(rule + 1) + " is not applicable");
    Configuration out = u;
    apply_rule_in_place(m, out, r);
    return out;
}

std::int64_t total_in_cells(const Configuration& u) {
    std::int64_t total = 0;
    for (std::size_t c = 1; c <= u.n_cells(); ++c) total += u.cell_total(c);
    return total;
}

// -- population protocols -----------------------------------------------------

std::optional<std::size_t> PopulationProtocol::state_index(std::string_view name) const {
    auto it = std::find(states.begin(), states.end(), name);
    if (it == states.end()) return std::nullopt;
    return static_cast<std::size_t>(it - states.begin());
}

std::optional<std::size_t> PopulationProtocol::input_index(std::string_view name) const {
    auto it = std::find(inputs.begin(), inputs.end(), name);
    if (it == inputs.end()) return std::nullopt;
    return static_cast<std::size_t>(it - inputs.begin());
}

void require_valid(const PopulationProtocol& p) {
    const auto nq = p.states.size();
    if (nq == 0) throw ModelError("protocol has no states");
    if (p.init_map.size() != p.inputs.size())
        throw ModelError("initial state mapping must be total on the input alphabet");
    for (auto q : p.init_map)
        if (q >= nq) throw ModelError("initial state mapping names an unknown state");
    if (p.output_map.size() != nq) throw ModelError("output mapping must be total on the states");
    for (auto v : p.output_map)
        if (v != 0 && v != 1) throw ModelError("output mapping values must be 0 or 1");
    for (const auto& t : p.delta) {
        if (t.q1 >= nq || t.q2 >= nq || t.q1p >= nq || t.q2p >= nq)
            throw ModelError("transition names an unknown state");
        if (!(t.rate >= 0.0)) throw ModelError("transition rate must be non-negative");
    }
}

GcpsModel pp_to_gcps(const PopulationProtocol& p,
                     const std::map<std::string, std::int64_t>& input) {
    require_valid(p);
    GcpsModel m = make_one_symbol_model(p.states.size());
    for (std::size_t q = 0; q < p.states.size(); ++q) m.cell_labels[q + 1] = p.states[q];

    std::int64_t agents = 0;
    for (const auto& [symbol, count] : input) {
        auto s = p.input_index(symbol);
        if (!s) throw ModelError("input symbol '" + symbol + "' is not in the input alphabet");
        if (count < 0) throw ModelError("negative input count for '" + symbol + "'");
        m.initial[p.init_map[*s]][0] += count;
        agents += count;
    }
    if (agents < 2) throw ModelError("a population protocol needs at least 2 agents");

    for (const auto& t : p.delta) {
        Rule r;
        r.i = t.q1 + 1;
        r.j = t.q2 + 1;
        r.k = t.q1p + 1;
        r.l = t.q2p + 1;
        r.constant = t.rate;
        m.rules.push_back(r);
    }
    return m;
}

PopulationProtocol gcps_to_pp(const GcpsModel& m) {
    if (!m.is_one_symbol())
        throw ModelError("only one-symbol systems translate to population protocols");
    for (std::size_t r = 0; r < m.rules.size(); ++r) {
        const auto& rule = m.rules[r];
        if (rule.i == kEnvironment || rule.j == kEnvironment || rule.k == kEnvironment ||
            rule.l == kEnvironment)
            throw ModelError("rule " + std::to_string(r + 1) +
                             ": environment rule not expressible in PP");
    }
    PopulationProtocol p;
    for (std::size_t c = 1; c <= m.n_cells; ++c) p.states.push_back(m.cell_name(c));
    p.inputs = p.states;
    p.init_map.resize(m.n_cells);
    std::iota(p.init_map.begin(), p.init_map.end(), std::size_t{0});
    p.output_map.assign(m.n_cells, 1);
    for (const auto& rule : m.rules)
        p.delta.push_back({rule.i - 1, rule.j - 1, rule.k - 1, rule.l - 1, rule.constant});
    return p;
}

}  // namespace gcps
