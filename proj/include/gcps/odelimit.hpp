#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gcps/model.hpp"

namespace gcps {

/// Quadratic population dynamics with optional first-order terms:
///
///   dY_i/dt = sum_{j,k} a[i][j][k] Y_j Y_k - sum_j (b[i][j] + b[j][i]) Y_i Y_j
///             + sum_j linear[i][j] Y_j
///
/// Indices are 1-based variable numbers; absent keys are zero. `linear` only
/// appears for systems derived from rules that draw on the environment.
struct OdeSystem {
    using Triple = std::array<std::size_t, 3>;  // (i, j, k)
    using Pair = std::pair<std::size_t, std::size_t>;

    std::size_t n_vars = 0;
    std::map<Triple, double> a;
    std::map<Pair, double> b;
    std::map<Pair, double> linear;
    /// Rule indices (0-based) that produced each b / linear term, when derived.
    std::map<Pair, std::vector<std::size_t>> b_provenance;
    std::map<Pair, std::vector<std::size_t>> linear_provenance;

    /// Right-hand side at y (size n_vars).
    void rhs(std::span<const double> y, std::span<double> dy) const;
    std::vector<double> rhs(std::span<const double> y) const;
};

/// Coefficient equality on the a, b and linear maps, ignoring explicit zeros
/// and provenance.
bool same_coefficients(const OdeSystem& x, const OdeSystem& y);

/// Collapsed polynomial view: for each variable, the coefficient of each
/// monomial. Monomial {j, k} with j <= k is Y_j Y_k; {0, j} is the linear Y_j.
using Monomial = std::pair<std::size_t, std::size_t>;
std::vector<std::map<Monomial, double>> polynomial_form(const OdeSystem& s);

/// Mass-action limit of a one-symbol model. Cells become variables; h_r uses
/// Y_q^2 for same-cell pairs; environment-sourced rules become linear terms
/// keyed to the cell-side participant. Throws ModelError for multi-symbol
/// models and for rules whose ODE limit is undefined.
OdeSystem derive_odes(const GcpsModel& m);

struct OdeValidation {
    bool valid = true;
    bool conserves_total = true;  // sum_i dY_i/dt == 0 as a coefficient identity
    std::vector<std::string> violations;
};

/// Checks non-negativity and the pairing condition linking b_{jk} to a^i_{jk}.
OdeValidation validate_population_ode(const OdeSystem& s);

/// Environment-free one-symbol model (one rule per nonzero b_{jk}, constant
/// b_{jk}). `initial` gives cell counts; zero when empty. Throws ModelError on
/// an invalid system.
GcpsModel odes_to_gcps(const OdeSystem& s, std::span<const std::int64_t> initial = {});

struct OdeTrajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> values;  // values[t][i]
    bool clipped = false;                     // a negative excursion was reset to 0
};

/// Fixed-step classical RK4 from 0 to t_end. Every `stride`-th step is
/// recorded, plus the final point. Throws IntegrationError on non-finite state.
OdeTrajectory integrate(const OdeSystem& s, std::span<const double> y0, double dt, double t_end,
                        std::size_t stride = 1);

struct FixedPointOptions {
    double tol = 1e-10;
    double dt = 0.0;        // <= 0: chosen from the coefficient scale
    double max_time = 0.0;  // <= 0: chosen from the step count limit
    std::size_t max_steps = 20'000'000;
};

struct FixedPoint {
    std::vector<double> point;
    double time = 0.0;
    std::size_t steps = 0;
    double residual = 0.0;  // max_i |dY_i/dt| / (1 + sum of |terms| of dY_i/dt)
};

/// Integrates until the scaled residual drops below tol. Throws
/// ConvergenceError when max_time passes first.
FixedPoint find_fixed_point(const OdeSystem& s, std::span<const double> y0,
                            const FixedPointOptions& options = {});

/// `time,Y_1,...,Y_N`
std::string ode_csv(const OdeTrajectory& t);

}  // namespace gcps
