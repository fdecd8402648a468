#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gcps {

/// Cell index 0 is the environment; cells 1..n are the membranes.
inline constexpr std::size_t kEnvironment = 0;

/// Object counts for the environment's finite part and for every cell.
///
/// Storage is a dense (n_cells + 1) x n_objects matrix. Row 0 holds z_0, the
/// finitely many copies of non-environmental objects living in the
/// environment; environmental objects are never counted there.
class Configuration {
public:
    Configuration() = default;
    Configuration(std::size_t n_cells, std::size_t n_objects);

    std::size_t n_cells() const noexcept { return n_cells_; }
    std::size_t n_objects() const noexcept { return n_objects_; }

    std::int64_t count(std::size_t cell, std::size_t object) const {
        return counts_[cell * n_objects_ + object];
    }
    void set(std::size_t cell, std::size_t object, std::int64_t value);

    /// Overflow-checked increment (delta may be negative; result must stay >= 0).
    void add(std::size_t cell, std::size_t object, std::int64_t delta);

    /// Size of the multiset held by `cell` (cell 0 = env_finite).
    std::int64_t cell_total(std::size_t cell) const;

    std::span<const std::int64_t> raw() const noexcept { return counts_; }

    bool operator==(const Configuration&) const = default;

private:
    std::size_t n_cells_ = 0;
    std::size_t n_objects_ = 0;
    std::vector<std::int64_t> counts_;
};

struct ConfigurationHash {
    std::size_t operator()(const Configuration& c) const noexcept;
};

/// Synchronized move rule (a, i)(b, j) -> (a, k)(b, l).
struct Rule {
    std::string id;
    std::size_t a = 0;
    std::size_t i = 0;
    std::size_t k = 0;
    std::size_t b = 0;
    std::size_t j = 0;
    std::size_t l = 0;
    double constant = 1.0;

    bool operator==(const Rule&) const = default;
};

struct GcpsModel {
    std::string name;
    std::string description;
    std::vector<std::string> alphabet;
    /// env[o] is true when object o exists in infinitely many copies in cell 0.
    std::vector<bool> env;
    std::size_t n_cells = 1;
    /// Optional cell names, indexed 0..n_cells; empty string = unlabeled.
    std::vector<std::string> cell_labels;
    /// initial[c - 1][o] is the count of object o in cell c.
    std::vector<std::vector<std::int64_t>> initial;
    std::vector<Rule> rules;
    std::size_t output_cell = 1;

    bool operator==(const GcpsModel&) const = default;

    std::size_t n_objects() const noexcept { return alphabet.size(); }
    bool is_env(std::size_t object) const { return object < env.size() && env[object]; }
    bool is_one_symbol() const noexcept { return alphabet.size() == 1; }

    std::optional<std::size_t> object_index(std::string_view name) const;
    std::optional<std::size_t> cell_index(std::string_view label) const;
    /// Label when present, else the decimal index.
    std::string cell_name(std::size_t cell) const;

    /// (lambda, w_1, ..., w_n)
    Configuration initial_configuration() const;
    /// Replace the initial multisets with the cell contents of `u` (z_0 is dropped).
    void set_initial(const Configuration& u);
};

/// Builds an empty one-symbol model (alphabet {tok}, env {tok}) with n cells.
GcpsModel make_one_symbol_model(std::size_t n_cells);

struct Violation {
    std::optional<std::size_t> rule;
    std::string reason;
};

std::vector<Violation> validate_model(const GcpsModel& m);
/// Throws ModelError listing every violation when the model is invalid.
void require_valid(const GcpsModel& m);

/// Throws ModelError when `u` does not have the model's shape.
void check_dimensions(const GcpsModel& m, const Configuration& u);

/// True when (object, cell) is inexhaustible: an environmental object in cell 0.
bool is_infinite_source(const GcpsModel& m, std::size_t object, std::size_t cell);

/// True when the rule pulls an environmental object out of cell 0 into a cell.
bool imports_from_environment(const GcpsModel& m, const Rule& r);

bool is_applicable(const GcpsModel& m, const Configuration& u, std::size_t rule);
std::vector<std::size_t> applicable_rules(const GcpsModel& m, const Configuration& u);

/// Throws RuleNotApplicable if the sources are missing.
Configuration apply_rule(const GcpsModel& m, const Configuration& u, std::size_t rule);

/// Moves the rule's objects in place; the caller guarantees applicability.
void apply_rule_in_place(const GcpsModel& m, Configuration& u, const Rule& r);

/// Sum of objects over cells 1..n.
std::int64_t total_in_cells(const Configuration& u);

// -- population protocols -----------------------------------------------------

struct Interaction {
    std::size_t q1 = 0;
    std::size_t q2 = 0;
    std::size_t q1p = 0;
    std::size_t q2p = 0;
    double rate = 1.0;

    bool operator==(const Interaction&) const = default;
};

/// (Q, Sigma, iota, omega, delta). States and inputs are named; maps hold indices.
struct PopulationProtocol {
    std::vector<std::string> states;
    std::vector<std::string> inputs;
    std::vector<std::size_t> init_map;  // input index -> state index
    std::vector<int> output_map;        // state index -> 0 or 1
    std::vector<Interaction> delta;

    bool operator==(const PopulationProtocol&) const = default;

    std::optional<std::size_t> state_index(std::string_view name) const;
    std::optional<std::size_t> input_index(std::string_view name) const;
};

void require_valid(const PopulationProtocol& p);

/// One-symbol GCPS with one cell per state; the initial configuration counts
/// iota applied to `input`. Cells are labelled with the state names.
GcpsModel pp_to_gcps(const PopulationProtocol& p, const std::map<std::string, std::int64_t>& input);

/// Inverse of pp_to_gcps on environment-free one-symbol models. States are the
/// cell names, iota is the identity on them and omega is constantly 1.
PopulationProtocol gcps_to_pp(const GcpsModel& m);

}  // namespace gcps
