#include "gcps/engine.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <unordered_map>

#include "gcps/error.hpp"

namespace gcps {

bool has_continuous_time(Mode mode) noexcept {
    return mode == Mode::FsDirect || mode == Mode::FsFirstReaction;
}

std::string_view mode_name(Mode mode) noexcept {
    switch (mode) {
        case Mode::Sequential: return "seq";
        case Mode::MaximallyParallel: return "maxpar";
        case Mode::FsEquiprobable: return "equi";
        case Mode::FsDirect: return "ssa";
        case Mode::FsFirstReaction: return "ssa-fr";
    }
    return "?";
}

std::optional<Mode> parse_mode(std::string_view name) noexcept {
    for (auto m : {Mode::Sequential, Mode::MaximallyParallel, Mode::FsEquiprobable, Mode::FsDirect,
                   Mode::FsFirstReaction})
        if (mode_name(m) == name) return m;
    return std::nullopt;
}

double propensity(const GcpsModel& m, const Configuration& u, std::size_t rule) {
    const auto& r = m.rules.at(rule);
    const bool inf_a = is_infinite_source(m, r.a, r.i);
    const bool inf_b = is_infinite_source(m, r.b, r.j);
    double h = 0.0;
    if (r.a == r.b && r.i == r.j) {
        if (inf_a) {
            h = 1.0;  // excluded by validation; kept total for robustness
        } else {
            const auto n = static_cast<double>(u.count(r.i, r.a));
            h = n * (n - 1.0);
        }
    } else {
        const double fa = inf_a ? 1.0 : static_cast<double>(u.count(r.i, r.a));
        const double fb = inf_b ? 1.0 : static_cast<double>(u.count(r.j, r.b));
        h = fa * fb;
    }
    return r.constant * h;
}

std::vector<double> propensities(const GcpsModel& m, const Configuration& u) {
    check_dimensions(m, u);
    std::vector<double> out(m.rules.size());
    for (std::size_t r = 0; r < m.rules.size(); ++r) out[r] = propensity(m, u, r);
    return out;
}

std::vector<Successor> successors(const GcpsModel& m, const Configuration& u) {
    std::vector<Successor> out;
    std::unordered_map<Configuration, std::size_t, ConfigurationHash> seen;
    for (auto r : applicable_rules(m, u)) {
        Configuration next = u;
        apply_rule_in_place(m, next, m.rules[r]);
        auto [it, inserted] = seen.try_emplace(next, out.size());
        if (inserted)
            out.push_back({std::move(next), {r}});
        else
            out[it->second].rules.push_back(r);
    }
    return out;
}

Step step_equiprobable(const GcpsModel& m, const Configuration& u, Rng& rng) {
    auto succ = successors(m, u);
    if (succ.empty()) throw HaltedError("halting configuration: no successor");
    auto& pick = succ[rng.index(succ.size())];
    const auto rule = pick.rules[rng.index(pick.rules.size())];
    return {std::move(pick.config), rule};
}

Step step_sequential(const GcpsModel& m, const Configuration& u, Rng& rng) {
    auto app = applicable_rules(m, u);
    if (app.empty()) throw HaltedError("halting configuration: no applicable rule");
    const auto rule = app[rng.index(app.size())];
    Configuration next = u;
    apply_rule_in_place(m, next, m.rules[rule]);
    return {std::move(next), rule};
}

std::optional<Reaction> select_direct(std::span<const double> props, double a0, Rng& rng) {
    if (!(a0 > 0.0)) return std::nullopt;
    const double tau = rng.exponential(a0);
    const double target = rng.uniform() * a0;
    double cumulative = 0.0;
    std::optional<std::size_t> last_positive;
    for (std::size_t r = 0; r < props.size(); ++r) {
        if (!(props[r] > 0.0)) continue;
        last_positive = r;
        cumulative += props[r];
        if (target < cumulative) return Reaction{tau, r};
    }
    // rounding can leave target just above the accumulated sum
    if (last_positive) return Reaction{tau, *last_positive};
    return std::nullopt;
}

std::optional<Reaction> select_direct(std::span<const double> props, Rng& rng) {
    double a0 = 0.0;
    for (auto p : props) a0 += p > 0.0 ? p : 0.0;
    return select_direct(props, a0, rng);
}

std::optional<Reaction> select_first_reaction(std::span<const double> props, Rng& rng) {
    std::optional<Reaction> best;
    for (std::size_t r = 0; r < props.size(); ++r) {
        if (!(props[r] > 0.0)) continue;
        const double tau = rng.exponential(props[r]);
        if (!best || tau < best->tau) best = Reaction{tau, r};
    }
    return best;
}

std::optional<Reaction> step_gillespie_direct(const GcpsModel& m, const Configuration& u, Rng& rng) {
    const auto props = propensities(m, u);
    return select_direct(props, rng);
}

std::optional<Reaction> step_gillespie_first_reaction(const GcpsModel& m, const Configuration& u,
                                                      Rng& rng) {
    const auto props = propensities(m, u);
    return select_first_reaction(props, rng);
}

ParallelStep step_maximally_parallel(const GcpsModel& m, const Configuration& u, Rng& rng) {
    check_dimensions(m, u);
    // `left` holds resources not yet claimed; products go to `gained` and are
    // only merged once the multiset is complete.
    Configuration left = u;
    Configuration gained(m.n_cells, m.n_objects());
    ParallelStep out;
    std::vector<std::size_t> app;
    for (;;) {
        app.clear();
        for (std::size_t r = 0; r < m.rules.size(); ++r)
            if (is_applicable(m, left, r)) app.push_back(r);
        if (app.empty()) break;
        const auto r = app[rng.index(app.size())];
        const auto& rule = m.rules[r];
        if (!is_infinite_source(m, rule.a, rule.i)) left.add(rule.i, rule.a, -1);
        if (!is_infinite_source(m, rule.b, rule.j)) left.add(rule.j, rule.b, -1);
        if (!is_infinite_source(m, rule.a, rule.k)) gained.add(rule.k, rule.a, +1);
        if (!is_infinite_source(m, rule.b, rule.l)) gained.add(rule.l, rule.b, +1);
        out.fired.push_back(r);
    }
    if (out.fired.empty()) throw HaltedError("halting configuration: no applicable rule");
    for (std::size_t c = 0; c <= m.n_cells; ++c)
        for (std::size_t o = 0; o < m.n_objects(); ++o)
            if (auto g = gained.count(c, o); g != 0) left.add(c, o, g);
    out.config = std::move(left);
    return out;
}

namespace {

/// Propensity vector kept current by recomputing only the rules whose source
/// species were touched by the last event. a_0 is refreshed exactly every
/// kRefreshInterval events so the running sum cannot drift.
class PropensityCache {
public:
    static constexpr std::uint64_t kRefreshInterval = std::uint64_t{1} << 16;

    PropensityCache(const GcpsModel& m, const Configuration& u) : m_(m) {
        const auto n_obj = m.n_objects();
        auto species = [n_obj](std::size_t obj, std::size_t cell) { return cell * n_obj + obj; };
        std::vector<std::vector<std::size_t>> readers((m.n_cells + 1) * n_obj);
        for (std::size_t r = 0; r < m.rules.size(); ++r) {
            const auto& rule = m.rules[r];
            readers[species(rule.a, rule.i)].push_back(r);
            readers[species(rule.b, rule.j)].push_back(r);
        }
        dependents_.resize(m.rules.size());
        for (std::size_t r = 0; r < m.rules.size(); ++r) {
            const auto& rule = m.rules[r];
            auto& deps = dependents_[r];
            for (auto s : {species(rule.a, rule.i), species(rule.a, rule.k),
                           species(rule.b, rule.j), species(rule.b, rule.l)})
                deps.insert(deps.end(), readers[s].begin(), readers[s].end());
            std::sort(deps.begin(), deps.end());
            deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
        }
        refresh(u);
    }

    std::span<const double> values() const { return props_; }
    double total() const { return a0_; }

    void refresh(const Configuration& u) {
        props_.resize(m_.rules.size());
        a0_ = 0.0;
        for (std::size_t r = 0; r < props_.size(); ++r) {
            props_[r] = propensity(m_, u, r);
            a0_ += props_[r];
        }
        since_refresh_ = 0;
    }

    void after_firing(const Configuration& u, std::size_t fired) {
        if (++since_refresh_ >= kRefreshInterval) {
            refresh(u);
            return;
        }
        for (auto r : dependents_[fired]) {
            const double p = propensity(m_, u, r);
            a0_ += p - props_[r];
            props_[r] = p;
        }
        if (!(a0_ > 0.0)) {
            // decide halting on an exact sum, not on an accumulated one
            refresh(u);
        }
    }

private:
    const GcpsModel& m_;
    std::vector<std::vector<std::size_t>> dependents_;
    std::vector<double> props_;
    double a0_ = 0.0;
    std::uint64_t since_refresh_ = 0;
};

void check_run_spec(const RunSpec& spec) {
    const int stops = (spec.max_steps ? 1 : 0) + (spec.max_time ? 1 : 0) + (spec.until_halt ? 1 : 0);
    if (stops != 1)
        throw ModelError("a run needs exactly one stop condition (max steps, max time or halt)");
    if (spec.max_time && !has_continuous_time(spec.mode))
        throw ModelError("max time applies only to stochastic-time modes");
    if (spec.max_time && !(*spec.max_time >= 0.0)) throw ModelError("max time must be >= 0");
    if (spec.record.kind == RecordPolicy::Kind::Stride && spec.record.stride == 0)
        throw ModelError("record stride must be positive");
}

}  // namespace

Trajectory run(const GcpsModel& m, const Configuration& u0, const RunSpec& spec,
               const EventObserver& observer) {
    require_valid(m);
    check_dimensions(m, u0);
    check_run_spec(spec);

    Trajectory traj;
    traj.initial = u0;
    traj.mode = spec.mode;
    traj.seed = spec.seed;

    Rng rng(spec.seed);
    Configuration u = u0;
    double t = 0.0;
    bool last_recorded = true;
    double last_time = 0.0;
    std::int64_t last_rule = 0;
    const bool continuous = has_continuous_time(spec.mode);
    std::optional<PropensityCache> cache;
    if (continuous) cache.emplace(m, u);

    for (;;) {
        if (spec.max_steps && traj.steps >= *spec.max_steps) break;

        std::int64_t fired = 0;
        if (continuous) {
            auto reaction = spec.mode == Mode::FsDirect
                                ? select_direct(cache->values(), cache->total(), rng)
                                : select_first_reaction(cache->values(), rng);
            if (!reaction) {
                traj.halted = true;
                break;
            }
            if (spec.max_time && t + reaction->tau > *spec.max_time) {
                t = *spec.max_time;
                break;
            }
            t += reaction->tau;
            apply_rule_in_place(m, u, m.rules[reaction->rule]);
            cache->after_firing(u, reaction->rule);
            fired = static_cast<std::int64_t>(reaction->rule);
        } else {
            try {
                switch (spec.mode) {
                    case Mode::Sequential: {
                        auto s = step_sequential(m, u, rng);
                        u = std::move(s.config);
                        fired = static_cast<std::int64_t>(s.rule);
                        break;
                    }
                    case Mode::FsEquiprobable: {
                        auto s = step_equiprobable(m, u, rng);
                        u = std::move(s.config);
                        fired = static_cast<std::int64_t>(s.rule);
                        break;
                    }
                    default: {
                        auto s = step_maximally_parallel(m, u, rng);
                        u = std::move(s.config);
                        fired = kParallelStep;
                        break;
                    }
                }
            } catch (const HaltedError&) {
                traj.halted = true;
                break;
            }
        }

        ++traj.steps;
        const double time = continuous ? t : static_cast<double>(traj.steps);
        if (observer) observer(time, fired, u);
        bool keep = false;
        switch (spec.record.kind) {
            case RecordPolicy::Kind::All: keep = true; break;
            case RecordPolicy::Kind::Stride: keep = traj.steps % spec.record.stride == 0; break;
            case RecordPolicy::Kind::FinalOnly: keep = false; break;
        }
        if (keep) traj.events.push_back({time, fired, u});
        last_recorded = keep;
        last_time = time;
        last_rule = fired;
    }
    // the final state is always part of the record
    if (!last_recorded) traj.events.push_back({last_time, last_rule, u});
    traj.end_time = continuous ? t : static_cast<double>(traj.steps);
    return traj;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string trajectory_csv(const GcpsModel& m, const Trajectory& t) {
    std::string out = "time,rule";
    for (std::size_t c = 1; c <= m.n_cells; ++c) out += ",cell_" + std::to_string(c);
    out += ",envfin_total\n";
    const bool continuous = has_continuous_time(t.mode);
    auto row = [&](double time, std::string_view rule, const Configuration& u) {
        out += continuous ? format_double(time) : std::to_string(static_cast<std::uint64_t>(time));
        out += ',';
        out += rule;
        for (std::size_t c = 1; c <= u.n_cells(); ++c) out += ',' + std::to_string(u.cell_total(c));
        out += ',' + std::to_string(u.cell_total(kEnvironment));
        out += '\n';
    };
    row(0.0, "-", t.initial);
    for (const auto& e : t.events)
        row(e.time, e.rule == kParallelStep ? std::string("*") : std::to_string(e.rule + 1), e.state);
    return out;
}

}  // namespace gcps
