#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gcps/engine.hpp"
#include "gcps/model.hpp"
#include "gcps/odelimit.hpp"

namespace gcps {

/// values[v][g]: variable v (cell v + 1) at grid point g.
struct Series {
    std::vector<double> grid;
    std::vector<std::vector<double>> values;
};

/// Piecewise-constant sampling: the value at g is the state of the last event
/// with time <= g. Points past the last event hold its value.
Series resample_trajectory(const Trajectory& t, std::span<const double> grid);

/// Evenly spaced grid 0, h, 2h, ... up to t_end (inclusive within rounding).
std::vector<double> uniform_grid(double h, double t_end);

struct EnsembleSeries {
    std::vector<double> grid;
    std::vector<std::vector<double>> mean;    // [cell - 1][g]
    std::vector<std::vector<double>> stddev;  // sample deviation; 0 for a single run
    std::size_t runs = 0;
    std::uint64_t master_seed = 0;

    Series mean_series() const { return {grid, mean}; }
};

/// `runs` independent runs (seed of run r = Rng::derive(spec.seed, r)),
/// resampled on `grid`. Runs are spread over `jobs` threads; the reduction
/// happens in run order, so the result does not depend on `jobs`.
EnsembleSeries ensemble(const GcpsModel& m, const Configuration& u0, const RunSpec& spec,
                        std::size_t runs, std::span<const double> grid, std::size_t jobs = 1);

struct RatioSeries {
    std::vector<double> grid;
    std::vector<double> values;  // NaN where flagged
    std::vector<bool> flagged;   // denominator was zero
};

/// sum(numerator cells) / sum(denominator cells), cells 1-based.
RatioSeries ratio_series(const Series& s, std::span<const std::size_t> numerator,
                         std::span<const std::size_t> denominator);

struct Comparison {
    std::vector<double> rmse;
    std::vector<double> max_rel_dev;
    std::size_t grid_points = 0;
};

/// Per-variable RMSE and max |x - ref| / |ref| over grid points >= from_time.
/// Every grid point of `x` must appear in `ref_grid`; throws Error otherwise.
Comparison compare_series(std::span<const double> grid, const std::vector<std::vector<double>>& x,
                          std::span<const double> ref_grid,
                          const std::vector<std::vector<double>>& ref,
                          double from_time = -std::numeric_limits<double>::infinity());

/// Ensemble mean against an ODE solution (cell i <-> Y_i).
Comparison compare_to_ode(const EnsembleSeries& e, const OdeTrajectory& o,
                          double from_time = -std::numeric_limits<double>::infinity());

/// Transposes an ODE trajectory into per-variable series.
Series ode_series(const OdeTrajectory& o);

/// `time,mean_cell_1,std_cell_1,...`
std::string ensemble_csv(const EnsembleSeries& e);

/// {"rmse": [...], "max_rel_dev": [...], "grid": n}
std::string comparison_json(const Comparison& c);

}  // namespace gcps
