#include "gcps/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include <json.hpp>

#include "gcps/error.hpp"

namespace gcps {

namespace {

/// Fills grid points as events stream past them.
class GridSampler {
public:
    GridSampler(std::span<const double> grid, const Configuration& u0, std::size_t n_cells)
        : grid_(grid), values_(n_cells, std::vector<double>(grid.size(), 0.0)), current_(u0) {}

    void on_event(double time, const Configuration& u) {
        fill_before(time);
        current_ = u;
    }

    std::vector<std::vector<double>> finish() {
        fill_before(std::numeric_limits<double>::infinity());
        return std::move(values_);
    }

private:
    void fill_before(double time) {
        while (next_ < grid_.size() && grid_[next_] < time) {
            for (std::size_t c = 0; c < values_.size(); ++c)
                values_[c][next_] = static_cast<double>(current_.cell_total(c + 1));
            ++next_;
        }
    }

    std::span<const double> grid_;
    std::vector<std::vector<double>> values_;
    Configuration current_;
    std::size_t next_ = 0;
};

}  // namespace

Series resample_trajectory(const Trajectory& t, std::span<const double> grid) {
    if (t.initial.n_cells() == 0) throw Error("empty trajectory");
    GridSampler sampler(grid, t.initial, t.initial.n_cells());
    for (const auto& e : t.events) sampler.on_event(e.time, e.state);
    return {std::vector<double>(grid.begin(), grid.end()), sampler.finish()};
}

std::vector<double> uniform_grid(double h, double t_end) {
    if (!(h > 0.0) || !(t_end >= 0.0)) throw ModelError("grid step must be > 0 and end time >= 0");
    const auto n = static_cast<std::size_t>(std::floor(t_end / h + 1e-9));
    std::vector<double> grid(n + 1);
    for (std::size_t g = 0; g <= n; ++g) grid[g] = static_cast<double>(g) * h;
    return grid;
}

EnsembleSeries ensemble(const GcpsModel& m, const Configuration& u0, const RunSpec& spec,
                        std::size_t runs, std::span<const double> grid, std::size_t jobs) {
    if (runs < 1) throw ModelError("an ensemble needs at least one run");
    require_valid(m);
    check_dimensions(m, u0);

    std::vector<std::vector<std::vector<double>>> per_run(runs);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(std::max<std::size_t>(jobs, 1));

    auto worker = [&](std::size_t job) {
        try {
            for (std::size_t r = next++; r < runs; r = next++) {
                RunSpec s = spec;
                s.seed = Rng::derive(spec.seed, r);
                s.record = RecordPolicy::final_only();
                GridSampler sampler(grid, u0, m.n_cells);
                run(m, u0, s, [&](double time, std::int64_t, const Configuration& u) {
                    sampler.on_event(time, u);
                });
                per_run[r] = sampler.finish();
            }
        } catch (...) {
            errors[job] = std::current_exception();
        }
    };
    if (jobs <= 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker, j);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    EnsembleSeries out;
    out.grid.assign(grid.begin(), grid.end());
    out.runs = runs;
    out.master_seed = spec.seed;
    out.mean.assign(m.n_cells, std::vector<double>(grid.size(), 0.0));
    out.stddev.assign(m.n_cells, std::vector<double>(grid.size(), 0.0));
    // Welford accumulation in run order
    for (std::size_t c = 0; c < m.n_cells; ++c)
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double mean = 0.0, m2 = 0.0;
            for (std::size_t r = 0; r < runs; ++r) {
                const double x = per_run[r][c][g];
                const double delta = x - mean;
                mean += delta / static_cast<double>(r + 1);
                m2 += delta * (x - mean);
            }
            out.mean[c][g] = mean;
            out.stddev[c][g] = runs > 1 ? std::sqrt(m2 / static_cast<double>(runs - 1)) : 0.0;
        }
    return out;
}

RatioSeries ratio_series(const Series& s, std::span<const std::size_t> numerator,
                         std::span<const std::size_t> denominator) {
    auto check = [&](std::span<const std::size_t> cells) {
        for (auto c : cells)
            if (c < 1 || c > s.values.size()) throw ModelError("ratio cell index out of range");
    };
    check(numerator);
    check(denominator);
    RatioSeries out;
    out.grid = s.grid;
    for (std::size_t g = 0; g < s.grid.size(); ++g) {
        double num = 0.0, den = 0.0;
        for (auto c : numerator) num += s.values[c - 1][g];
        for (auto c : denominator) den += s.values[c - 1][g];
        const bool bad = den == 0.0;
        out.flagged.push_back(bad);
        out.values.push_back(bad ? std::numeric_limits<double>::quiet_NaN() : num / den);
    }
    return out;
}

Comparison compare_series(std::span<const double> grid, const std::vector<std::vector<double>>& x,
                          std::span<const double> ref_grid,
                          const std::vector<std::vector<double>>& ref, double from_time) {
    if (x.size() != ref.size()) throw Error("series have different numbers of variables");
    std::vector<std::pair<std::size_t, std::size_t>> matched;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (grid[g] < from_time) continue;
        const double t = grid[g];
        const double tol = 1e-9 * std::max(1.0, std::abs(t));
        auto it = std::lower_bound(ref_grid.begin(), ref_grid.end(), t - tol);
        if (it == ref_grid.end() || std::abs(*it - t) > tol)
            throw Error("grid mismatch: time " + format_double(t) + " missing from the reference");
        matched.emplace_back(g, static_cast<std::size_t>(it - ref_grid.begin()));
    }

    Comparison out;
    out.grid_points = matched.size();
    for (std::size_t v = 0; v < x.size(); ++v) {
        double sq = 0.0, worst = 0.0;
        for (const auto& [g, h] : matched) {
            const double d = x[v][g] - ref[v][h];
            sq += d * d;
            const double scale = std::abs(ref[v][h]);
            const double rel = scale > 0.0 ? std::abs(d) / scale
                                           : (d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
            worst = std::max(worst, rel);
        }
        out.rmse.push_back(matched.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(matched.size())));
        out.max_rel_dev.push_back(worst);
    }
    return out;
}

Series ode_series(const OdeTrajectory& o) {
    Series s;
    s.grid = o.times;
    const auto n = o.values.empty() ? 0 : o.values.front().size();
    s.values.assign(n, std::vector<double>(o.times.size()));
    for (std::size_t t = 0; t < o.times.size(); ++t)
        for (std::size_t v = 0; v < n; ++v) s.values[v][t] = o.values[t][v];
    return s;
}

Comparison compare_to_ode(const EnsembleSeries& e, const OdeTrajectory& o, double from_time) {
    const auto ref = ode_series(o);
    return compare_series(e.grid, e.mean, ref.grid, ref.values, from_time);
}

std::string ensemble_csv(const EnsembleSeries& e) {
    std::string out = "time";
    for (std::size_t c = 1; c <= e.mean.size(); ++c) {
        const auto n = std::to_string(c);
        out += ",mean_cell_" + n + ",std_cell_" + n;
    }
    out += '\n';
    for (std::size_t g = 0; g < e.grid.size(); ++g) {
        out += format_double(e.grid[g]);
        for (std::size_t c = 0; c < e.mean.size(); ++c)
            out += ',' + format_double(e.mean[c][g]) + ',' + format_double(e.stddev[c][g]);
        out += '\n';
    }
    return out;
}

std::string comparison_json(const Comparison& c) {
    nlohmann::json doc;
    doc["rmse"] = c.rmse;
    doc["max_rel_dev"] = c.max_rel_dev;
    doc["grid"] = c.grid_points;
    return doc.dump(2) + "\n";
}

}  // namespace gcps
