#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gcps/model.hpp"
#include "gcps/rng.hpp"

namespace gcps {

/// Derivation modes.
///
/// Sequential picks a uniformly random applicable rule. FsEquiprobable picks a
/// uniformly random distinct successor configuration. FsDirect and
/// FsFirstReaction are the concentration-dependent (Gillespie) modes and the
/// only ones whose event times are continuous.
enum class Mode { Sequential, MaximallyParallel, FsEquiprobable, FsDirect, FsFirstReaction };

bool has_continuous_time(Mode mode) noexcept;
std::string_view mode_name(Mode mode) noexcept;
std::optional<Mode> parse_mode(std::string_view name) noexcept;

/// c_r * h_r, where h_r counts the distinct token combinations that activate r.
///
/// A species is an (object, cell) pair. Two slots naming the same species give
/// n(n-1); an environmental object drawn from cell 0 contributes a factor 1.
/// For one-symbol systems this is exactly the per-cell token formula.
double propensity(const GcpsModel& m, const Configuration& u, std::size_t rule);
std::vector<double> propensities(const GcpsModel& m, const Configuration& u);

struct Successor {
    Configuration config;
    std::vector<std::size_t> rules;  // every rule producing `config`
};

/// Distinct single-rule successors in order of first appearance.
std::vector<Successor> successors(const GcpsModel& m, const Configuration& u);

struct Step {
    Configuration config;
    std::size_t rule = 0;
};

struct Reaction {
    double tau = 0.0;
    std::size_t rule = 0;
};

/// Uniform over distinct successors. Throws HaltedError when none exist.
Step step_equiprobable(const GcpsModel& m, const Configuration& u, Rng& rng);

/// Uniform over applicable rules. Throws HaltedError when none exist.
Step step_sequential(const GcpsModel& m, const Configuration& u, Rng& rng);

/// Gillespie direct method; nullopt when a_0 = 0 (halting).
std::optional<Reaction> step_gillespie_direct(const GcpsModel& m, const Configuration& u, Rng& rng);

/// Gillespie first-reaction method; nullopt when a_0 = 0 (halting).
std::optional<Reaction> step_gillespie_first_reaction(const GcpsModel& m, const Configuration& u,
                                                      Rng& rng);

/// Direct-method draw from a propensity vector with precomputed sum `a0`.
std::optional<Reaction> select_direct(std::span<const double> props, double a0, Rng& rng);
std::optional<Reaction> select_direct(std::span<const double> props, Rng& rng);

/// First-reaction draw: one exponential clock per positive propensity.
std::optional<Reaction> select_first_reaction(std::span<const double> props, Rng& rng);

struct ParallelStep {
    Configuration config;
    std::vector<std::size_t> fired;  // the chosen rule multiset, in pick order
};

/// Non-extensible rule multiset by uniform greedy saturation, applied atomically.
/// Throws HaltedError when no rule is applicable.
ParallelStep step_maximally_parallel(const GcpsModel& m, const Configuration& u, Rng& rng);

struct RecordPolicy {
    enum class Kind { All, Stride, FinalOnly };
    Kind kind = Kind::All;
    std::uint64_t stride = 1;

    static RecordPolicy all() { return {}; }
    static RecordPolicy every(std::uint64_t k) { return {Kind::Stride, k}; }
    static RecordPolicy final_only() { return {Kind::FinalOnly, 1}; }
};

struct RunSpec {
    Mode mode = Mode::FsDirect;
    std::optional<std::uint64_t> max_steps;
    std::optional<double> max_time;  // continuous-time modes only
    bool until_halt = false;
    std::uint64_t seed = 42;
    RecordPolicy record;
};

/// Rule value recorded for a maximally parallel step (several rules fire).
inline constexpr std::int64_t kParallelStep = -1;

struct Event {
    double time = 0.0;
    std::int64_t rule = 0;
    Configuration state;
};

struct Trajectory {
    Configuration initial;
    std::vector<Event> events;
    bool halted = false;
    Mode mode = Mode::FsDirect;
    std::uint64_t seed = 0;
    std::uint64_t steps = 0;   // events executed, recorded or not
    double end_time = 0.0;     // stop time (max_time when it was the stop reason)
};

/// Called for every executed event, before record-policy filtering.
using EventObserver = std::function<void(double time, std::int64_t rule, const Configuration&)>;

/// Runs from u0 until halting or the stop condition. Deterministic in
/// (model, u0, spec). Recording keeps the last event under Stride policies.
Trajectory run(const GcpsModel& m, const Configuration& u0, const RunSpec& spec,
               const EventObserver& observer = {});

/// `time,rule,cell_1,...,cell_n,envfin_total`; rules are 1-based, `-` marks the
/// initial row and `*` a maximally parallel step.
std::string trajectory_csv(const GcpsModel& m, const Trajectory& t);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace gcps
