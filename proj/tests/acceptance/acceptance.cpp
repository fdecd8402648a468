// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "../oracles.hpp"
#include "../unit/helpers.hpp"
#include "cli.hpp"
#include "gcps/analysis.hpp"
#include "gcps/engine.hpp"
#include "gcps/odelimit.hpp"
#include "gcps/stategraph.hpp"

using namespace gcps;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (ok) return;
        pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.7g", v);
    return buf;
}

Outcome propensity_cases() {
    Outcome o;
    auto m = make_one_symbol_model(2);
    m.rules = {move(1, 2, 2, 1, 0.5), move(1, 1, 2, 2, 1.0), move(2, 0, 0, 0, 3.0), move(0, 2, 0, 0, 2.0)};
    struct Case {
        std::size_t rule;
        Configuration u;
        double h;
    };
    const std::vector<Case> cases{{0, cells({3, 4}), 12}, {1, cells({5, 0}), 20}, {2, cells({0, 7}), 7},
                                  {3, cells({0, 7}), 7}};
    for (const auto& c : cases) {
        const double a = propensity(m, c.u, c.rule);
        o.require(a == m.rules[c.rule].constant * c.h, "rule " + std::to_string(c.rule) + " gave a=" + fmt(a));
        o.require(static_cast<double>(oracle::token_pairs(m, c.u, c.rule)) == c.h,
                  "oracle disagrees on rule " + std::to_string(c.rule));
    }
    for (std::int64_t x = 0; x <= 3; ++x)
        for (std::int64_t y = 0; y <= 3; ++y) {
            const auto u = cells({x, y});
            const auto app = applicable_rules(m, u);
            for (std::size_t r = 0; r < m.rules.size(); ++r) {
                const bool listed = std::find(app.begin(), app.end(), r) != app.end();
                o.require((propensity(m, u, r) > 0.0) == listed, "zero/inapplicable mismatch");
            }
        }
    o.detail = o.pass ? "h = 12, 20, 7, 7" : o.detail;
    return o;
}

Outcome sqrt2_fixed_point() {
    Outcome o;
    auto s = derive_odes(preset("sqrt2.gcps"));
    const std::vector<double> y0{500.0, 500.0};
    const auto fp = find_fixed_point(s, y0);
    const double ratio = fp.point[0] / (fp.point[0] + fp.point[1]);
    o.require(std::abs(ratio - 0.7071068) <= 1e-6, "ratio " + fmt(ratio));
    o.detail = o.pass ? "ratio " + fmt(ratio) : o.detail;
    return o;
}

Outcome sqrt2_ssa() {
    Outcome o;
    auto m = preset("sqrt2.gcps");
    const auto u0 = m.initial_configuration();
    o.require(total_in_cells(u0) == 10000, "preset does not hold 10^4 agents");
    RunSpec spec;
    spec.mode = Mode::FsDirect;
    spec.max_steps = 1'000'000;
    spec.seed = 42;
    spec.record = RecordPolicy::final_only();

    const std::uint64_t half = *spec.max_steps / 2;
    std::uint64_t k = 0;
    double t_prev = 0.0, ratio_prev = 0.5, weighted = 0.0, span = 0.0;
    run(m, u0, spec, [&](double t, std::int64_t, const Configuration& u) {
        if (++k > half) {
            weighted += ratio_prev * (t - t_prev);
            span += t - t_prev;
        }
        t_prev = t;
        ratio_prev = static_cast<double>(u.cell_total(1)) / static_cast<double>(total_in_cells(u));
    });
    const double avg = weighted / span;
    o.require(avg >= 0.687 && avg <= 0.727, "time-averaged ratio " + fmt(avg));
    o.detail = o.pass ? "time-averaged ratio " + fmt(avg) : o.detail;
    return o;
}

Outcome derivation_exactness() {
    Outcome o;
    using Poly = std::vector<std::map<Monomial, double>>;
    // dYp = Ym^2 + 2 Yp Ym - Yp^2, dYm = -Ym^2 - 2 Yp Ym + Yp^2
    Poly sqrt2(2);
    sqrt2[0] = {{{2, 2}, 1.0}, {{1, 2}, 2.0}, {{1, 1}, -1.0}};
    sqrt2[1] = {{{2, 2}, -1.0}, {{1, 2}, -2.0}, {{1, 1}, 1.0}};
    o.require(polynomial_form(derive_odes(preset("sqrt2.gcps"))) == sqrt2, "sqrt2 system differs");

    // dY1 = (c1 - c2 Y2) Y1, dY2 = (c2 Y1 - c3) Y2 with c1 = 1, c2 = 0.001, c3 = 1
    Poly lv(2);
    lv[0] = {{{0, 1}, 1.0}, {{1, 2}, -0.001}};
    lv[1] = {{{0, 2}, -1.0}, {{1, 2}, 0.001}};
    o.require(polynomial_form(derive_odes(preset("lotka-renewable.gcps"))) == lv, "Lotka-Volterra system differs");
    o.detail = o.pass ? "both systems match term for term" : o.detail;
    return o;
}

Outcome round_trip() {
    Outcome o;
    Rng rng(2024);
    int checked = 0;
    while (checked < 50) {
        auto s = oracle::random_population_ode(rng, 6);
        if (!validate_population_ode(s).valid) {
            o.require(false, "generator produced an invalid system");
            break;
        }
        o.require(same_coefficients(derive_odes(odes_to_gcps(s)), s), "system " + std::to_string(checked));
        ++checked;
    }
    o.detail = o.pass ? std::to_string(checked) + " systems" : o.detail;
    return o;
}

Outcome ssa_exactness() {
    Outcome o;
    // three rules with propensities 6, 2, 2 (each draws two tokens from its own cell)
    auto m = make_one_symbol_model(4);
    m.rules = {move(1, 1, 4, 4, 3.0), move(2, 2, 4, 4, 1.0), move(3, 3, 4, 4, 1.0)};
    const auto u = cells({2, 2, 2, 0});
    const double a0 = 10.0;
    Rng rng_d(101), rng_f(202);
    const int n = 100000;
    std::vector<std::uint64_t> direct(3, 0), first(3, 0);
    double tau_d = 0.0, tau_f = 0.0;
    for (int k = 0; k < n; ++k) {
        const auto d = step_gillespie_direct(m, u, rng_d);
        const auto f = step_gillespie_first_reaction(m, u, rng_f);
        ++direct[d->rule];
        ++first[f->rule];
        tau_d += d->tau;
        tau_f += f->tau;
    }
    const double p = oracle::chi_square_homogeneity_p(direct, first);
    const double md = tau_d / n, mf = tau_f / n;
    o.require(p > 0.01, "chi-square p " + fmt(p));
    o.require(std::abs(md * a0 - 1.0) < 0.02, "direct mean tau " + fmt(md));
    o.require(std::abs(mf * a0 - 1.0) < 0.02, "first-reaction mean tau " + fmt(mf));
    o.detail = o.pass ? "p " + fmt(p) + ", mean tau " + fmt(md) + " / " + fmt(mf) : o.detail;
    return o;
}

Outcome conservation() {
    // models that halt early are checked too, but only full-length runs count
    Outcome o;
    Rng rng(7);
    const Mode modes[] = {Mode::Sequential, Mode::MaximallyParallel, Mode::FsEquiprobable, Mode::FsDirect,
                          Mode::FsFirstReaction};
    int full = 0, drawn = 0;
    std::uint64_t events = 0;
    while (full < 100 && drawn < 10000) {
        auto m = oracle::random_closed_model(rng, 5, 8, 40);
        const auto u0 = m.initial_configuration();
        const auto total = total_in_cells(u0);
        RunSpec spec;
        spec.mode = modes[drawn % 5];
        spec.max_steps = 10000;
        spec.seed = static_cast<std::uint64_t>(drawn);
        spec.record = RecordPolicy::final_only();
        bool ok = true;
        const auto t = run(m, u0, spec, [&](double, std::int64_t, const Configuration& u) {
            ok = ok && total_in_cells(u) == total;
            ++events;
        });
        o.require(ok, "model " + std::to_string(drawn) + " changed its total");
        if (t.steps == 10000) ++full;
        ++drawn;
    }
    o.require(full == 100, "only " + std::to_string(full) + " models ran 10^4 events");
    o.detail = o.pass ? std::to_string(full) + " models x 10^4 events (" + std::to_string(drawn) + " drawn, " +
                            std::to_string(events) + " events checked)"
                      : o.detail;
    return o;
}

Outcome fairness() {
    Outcome o;
    auto m = preset("sqrt2.gcps");
    const auto u0 = cells({2, 2});
    const auto g = build_state_graph(m, u0);
    const auto scc = terminal_sccs(g);
    const auto terminal = scc.terminal_components();
    o.require(terminal.size() == 1, std::to_string(terminal.size()) + " terminal SCCs");
    RunSpec spec;
    spec.mode = Mode::FsDirect;
    spec.max_steps = 100000;
    spec.seed = 42;
    const auto t = run(m, u0, spec);
    const auto rep = fairness_report(g, scc, t, 100);
    o.require(rep.passed, rep.message);
    std::uint64_t fewest = rep.visits.empty() ? 0 : rep.visits.front().second;
    for (const auto& [node, count] : rep.visits) fewest = std::min(fewest, count);
    o.detail = o.pass ? std::to_string(g.size()) + " states, fewest visits " + std::to_string(fewest) : o.detail;
    return o;
}

Outcome renewable_vs_finite() {
    Outcome o;
    // renewable food, no predators: the prey explode
    auto lv = preset("lotka-renewable.gcps");
    auto u = lv.initial_configuration();
    u.set(2, 0, 0);
    const auto prey0 = u.cell_total(1);
    RunSpec spec;
    spec.mode = Mode::FsDirect;
    spec.max_time = 5.0;
    spec.seed = 42;
    spec.record = RecordPolicy::final_only();
    double crossed = -1.0;
    run(lv, u, spec, [&](double t, std::int64_t, const Configuration& v) {
        if (crossed < 0.0 && v.cell_total(1) > 10 * prey0) crossed = t;
    });
    o.require(crossed >= 0.0 && crossed < 5.0, "prey never exceeded 10x their initial count");

    const std::vector<double> y0{static_cast<double>(prey0), 0.0};
    const auto ode = integrate(derive_odes(lv), y0, 1e-3, 5.0, 1000);
    const double exact = y0[0] * std::exp(5.0);
    const double rel = std::abs(ode.values.back()[0] - exact) / exact;
    o.require(rel < 1e-6, "ODE growth off by " + fmt(rel));

    // finite food, no predators: prey are bounded by prey + food and settle
    auto fin = preset("lotka-finite.gcps");
    auto w = fin.initial_configuration();
    w.set(2, 0, 0);
    const auto bound = w.cell_total(1) + w.cell_total(3);
    RunSpec halt;
    halt.mode = Mode::FsDirect;
    halt.until_halt = true;
    halt.seed = 42;
    halt.record = RecordPolicy::final_only();
    std::int64_t peak = 0;
    const auto t = run(fin, w, halt, [&](double, std::int64_t, const Configuration& v) {
        peak = std::max(peak, v.cell_total(1));
    });
    o.require(peak <= bound, "prey reached " + std::to_string(peak));
    o.require(t.halted, "finite model did not stabilize");
    const auto final_prey = t.events.empty() ? w.cell_total(1) : t.events.back().state.cell_total(1);
    o.require(final_prey == bound, "settled at " + std::to_string(final_prey));
    o.detail = o.pass ? "renewable crossed 10x at t=" + fmt(crossed) + ", ODE rel err " + fmt(rel) +
                            ", finite settled at " + std::to_string(final_prey)
                      : o.detail;
    return o;
}

Outcome ode_limit() {
    Outcome o;
    auto m = preset("pure-death.gcps");
    RunSpec spec;
    spec.max_time = 3.0;
    spec.seed = 42;
    const auto grid = uniform_grid(0.05, 3.0);
    const auto e = ensemble(m, m.initial_configuration(), spec, 200, grid);
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double expected = 1000.0 * std::exp(-grid[k]);
        worst = std::max(worst, std::abs(e.mean[1][k] - expected) / expected);
    }
    o.require(worst < 0.03, "pure-death mean off by " + fmt(worst));

    OdeSystem lv;
    lv.n_vars = 2;
    lv.linear[{1, 1}] = 1.0;
    lv.linear[{2, 2}] = -1.0;
    lv.b[{1, 2}] = 0.001;
    lv.a[{2, 1, 2}] = 0.002;
    auto first_integral = [](double y1, double y2) { return 0.001 * y1 - std::log(y1) + 0.001 * y2 - std::log(y2); };
    const std::vector<double> y0{1500.0, 800.0};
    const auto traj = integrate(lv, y0, 1e-3, 20.0, 10);
    const double v0 = first_integral(y0[0], y0[1]);
    double drift = 0.0;
    for (const auto& y : traj.values) drift = std::max(drift, std::abs(first_integral(y[0], y[1]) - v0) / std::abs(v0));
    o.require(drift < 1e-5, "first integral drifted by " + fmt(drift));
    o.detail = o.pass ? "pure-death max rel dev " + fmt(worst) + ", V drift " + fmt(drift) : o.detail;
    return o;
}

Outcome determinism() {
    Outcome o;
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / ("gcps-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const auto path = [&](const char* name) { return (dir / name).string(); };
    auto invoke = [](std::vector<std::string> args) {
        args.insert(args.begin(), "gcps");
        std::ostringstream out, err;
        const int code = cli::run_cli(args, out, err);
        return std::make_pair(code, out.str());
    };
    const std::vector<std::vector<std::string>> commands{
        {"run", model_path("lotka-renewable.gcps"), "--max-time", "5"},
        {"run", model_path("lotka-finite.gcps"), "--mode", "ssa-fr", "--max-steps", "2000", "--seed", "3"},
        {"run", model_path("sqrt2.gcps"), "--mode", "equi", "--max-steps", "1000", "--format", "json"},
        {"run", model_path("sqrt2.gcps"), "--mode", "maxpar", "--agents", "50", "--max-steps", "100"},
        {"ensemble", model_path("pure-death.gcps"), "--runs", "20", "--grid-dt", "0.1", "--max-time", "3",
         "--jobs", "2", "--out", path("ens.csv")},
        {"graph", model_path("sqrt2.gcps"), "--agents", "6", "--fair-steps", "10000", "--dot", path("g.dot")},
        {"ode", model_path("pure-death.gcps"), "--t-end", "3", "--stride", "100", "--out", path("ode.csv")},
        {"ode", model_path("sqrt2.gcps"), "--fixed-point"},
        {"synth", model_path("sqrt2.ode.json"), "--init", "10,10"},
        {"convert", model_path("sqrt2.pp.json")},
        {"compare", path("ens.csv"), path("ode.csv")},
    };
    auto snapshot = [&](const std::vector<std::string>& c) {
        auto [code, out] = invoke(c);
        for (const auto& arg : c)
            if (arg.rfind(dir.string(), 0) == 0 && c.front() != "compare") {
                std::ifstream f(arg, std::ios::binary);
                std::stringstream s;
                s << f.rdbuf();
                out += s.str();
            }
        return std::make_pair(code, out);
    };
    for (const auto& c : commands) {
        const auto a = snapshot(c);
        const auto b = snapshot(c);
        o.require(a.first == cli::kOk, c.front() + " exited with " + std::to_string(a.first));
        o.require(!a.second.empty() && a.second == b.second, c.front() + " output differs between runs");
    }
    fs::remove_all(dir);
    o.detail = o.pass ? std::to_string(commands.size()) + " invocations repeated" : o.detail;
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget;  // seconds
        std::function<Outcome()> check;
    };
    const std::vector<Criterion> criteria{
        {"propensity cases", 1, propensity_cases},
        {"sqrt2 convergence (ODE)", 1, sqrt2_fixed_point},
        {"sqrt2 convergence (SSA)", 30, sqrt2_ssa},
        {"ODE derivation exactness", 0, derivation_exactness},
        {"ODE/GCPS round trip", 5, round_trip},
        {"SSA exactness", 10, ssa_exactness},
        {"conservation", 20, conservation},
        {"fairness surrogate", 10, fairness},
        {"renewable vs finite food", 30, renewable_vs_finite},
        {"SSA to ODE limit", 60, ode_limit},
        {"CLI determinism", 0, determinism},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto& c = criteria[k];
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget > 0 && secs >= c.budget) o.require(false, "over the " + fmt(c.budget) + " s budget");
        if (!o.pass) ++failures;
        std::printf("%s %2zu %-26s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", k + 1, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
