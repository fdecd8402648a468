#include "gcps/odelimit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gcps/engine.hpp"
#include "gcps/error.hpp"

namespace gcps {

void OdeSystem::rhs(std::span<const double> y, std::span<double> dy) const {
    std::fill(dy.begin(), dy.end(), 0.0);
    for (const auto& [key, v] : a) dy[key[0] - 1] += v * y[key[1] - 1] * y[key[2] - 1];
    for (const auto& [key, v] : b) {
        const double flux = v * y[key.first - 1] * y[key.second - 1];
        dy[key.first - 1] -= flux;
        dy[key.second - 1] -= flux;
    }
    for (const auto& [key, v] : linear) dy[key.first - 1] += v * y[key.second - 1];
}

std::vector<double> OdeSystem::rhs(std::span<const double> y) const {
    std::vector<double> dy(n_vars);
    rhs(y, dy);
    return dy;
}

namespace {

template <typename Map>
bool same_nonzero(const Map& x, const Map& y) {
    auto nonzero = [](const Map& m) {
        Map out;
        for (const auto& [k, v] : m)
            if (v != 0.0) out.emplace(k, v);
        return out;
    };
    return nonzero(x) == nonzero(y);
}

}  // namespace

bool same_coefficients(const OdeSystem& x, const OdeSystem& y) {
    return x.n_vars == y.n_vars && same_nonzero(x.a, y.a) && same_nonzero(x.b, y.b) &&
           same_nonzero(x.linear, y.linear);
}

std::vector<std::map<Monomial, double>> polynomial_form(const OdeSystem& s) {
    std::vector<std::map<Monomial, double>> out(s.n_vars);
    auto mono = [](std::size_t p, std::size_t q) { return Monomial{std::min(p, q), std::max(p, q)}; };
    for (const auto& [key, v] : s.a) out[key[0] - 1][mono(key[1], key[2])] += v;
    for (const auto& [key, v] : s.b) {
        out[key.first - 1][mono(key.first, key.second)] -= v;
        out[key.second - 1][mono(key.first, key.second)] -= v;
    }
    for (const auto& [key, v] : s.linear) out[key.first - 1][Monomial{0, key.second}] += v;
    for (auto& row : out) std::erase_if(row, [](const auto& kv) { return kv.second == 0.0; });
    return out;
}

OdeSystem derive_odes(const GcpsModel& m) {
    require_valid(m);
    if (!m.is_one_symbol()) throw ModelError("ODE limits are defined for one-symbol systems only");
    const bool env_token = m.is_env(0);

    OdeSystem s;
    s.n_vars = m.n_cells;
    for (std::size_t r = 0; r < m.rules.size(); ++r) {
        const auto& rule = m.rules[r];
        const double c = rule.constant;
        if (c == 0.0) continue;
        const bool from_env_i = rule.i == kEnvironment;
        const bool from_env_j = rule.j == kEnvironment;

        if (!from_env_i && !from_env_j) {
            const OdeSystem::Pair key{rule.i, rule.j};
            s.b[key] += c;
            s.b_provenance[key].push_back(r);
            if (rule.k != kEnvironment) s.a[{rule.k, rule.i, rule.j}] += c;
            if (rule.l != kEnvironment) s.a[{rule.l, rule.i, rule.j}] += c;
            continue;
        }
        if ((from_env_i && from_env_j) || !env_token)
            throw ModelError("rule " + std::to_string(r + 1) +
                             ": no ODE limit for rules drawing finite objects from the environment");

        // one slot is the inexhaustible environment: a first-order term in the
        // cell-side participant
        const std::size_t q = from_env_i ? rule.j : rule.i;
        std::vector<double> net(m.n_cells + 1, 0.0);
        net[q] -= 1.0;
        net[rule.k] += 1.0;
        net[rule.l] += 1.0;
        for (std::size_t x = 1; x <= m.n_cells; ++x) {
            if (net[x] == 0.0) continue;
            const OdeSystem::Pair key{x, q};
            s.linear[key] += c * net[x];
            s.linear_provenance[key].push_back(r);
        }
    }
    std::erase_if(s.linear, [](const auto& kv) { return kv.second == 0.0; });
    return s;
}

OdeValidation validate_population_ode(const OdeSystem& s) {
    OdeValidation out;
    auto fail = [&](std::string msg) {
        out.valid = false;
        out.violations.push_back(std::move(msg));
    };
    auto in_range = [&](std::size_t i) { return i >= 1 && i <= s.n_vars; };

    if (!s.linear.empty()) fail("first-order terms present: not a population system");
    for (const auto& [key, v] : s.a) {
        if (!in_range(key[0]) || !in_range(key[1]) || !in_range(key[2]))
            fail("a coefficient index out of range");
        if (v < 0.0) fail("negative a coefficient");
    }
    for (const auto& [key, v] : s.b) {
        if (!in_range(key.first) || !in_range(key.second)) fail("b coefficient index out of range");
        if (v < 0.0) fail("negative b coefficient");
    }
    if (!out.valid) {
        out.conserves_total = false;
        return out;
    }

    // gains grouped by their source pair (j, k)
    std::map<OdeSystem::Pair, std::vector<std::pair<std::size_t, double>>> gains;
    for (const auto& [key, v] : s.a)
        if (v != 0.0) gains[{key[1], key[2]}].emplace_back(key[0], v);

    auto pair_name = [](const OdeSystem::Pair& p) {
        return "(" + std::to_string(p.first) + "," + std::to_string(p.second) + ")";
    };
    for (const auto& [pair, list] : gains) {
        auto it = s.b.find(pair);
        if (it == s.b.end() || it->second == 0.0)
            fail("gain terms for pair " + pair_name(pair) + " without a matching b");
    }
    for (const auto& [pair, bv] : s.b) {
        if (bv == 0.0) continue;
        auto it = gains.find(pair);
        const auto count = it == gains.end() ? 0 : it->second.size();
        bool ok = false;
        if (count == 1) ok = it->second[0].second == 2.0 * bv;
        if (count == 2) ok = it->second[0].second == bv && it->second[1].second == bv;
        if (!ok)
            fail("unbalanced pair " + pair_name(pair) +
                 " needs one a equal to 2b or two distinct a equal to b, all others zero");
    }

    // sum_i dY_i/dt per monomial
    // tolerance relative to the raw coefficients, which cancel in the sum
    std::map<Monomial, double> total;
    std::map<Monomial, double> scale;
    for (const auto& row : polynomial_form(s))
        for (const auto& [mono, v] : row) total[mono] += v;
    auto mono_of = [](std::size_t j, std::size_t k) { return Monomial{std::min(j, k), std::max(j, k)}; };
    for (const auto& [key, v] : s.a) scale[mono_of(key[1], key[2])] += std::abs(v);
    for (const auto& [key, v] : s.b) scale[mono_of(key.first, key.second)] += 2.0 * std::abs(v);
    for (const auto& [mono, v] : total)
        if (std::abs(v) > 1e-12 * scale[mono]) out.conserves_total = false;
    return out;
}

GcpsModel odes_to_gcps(const OdeSystem& s, std::span<const std::int64_t> initial) {
    const auto check = validate_population_ode(s);
    if (!check.valid) {
        std::string msg = "ODE system is not a population system:";
        for (const auto& v : check.violations) msg += "\n  " + v;
        throw ModelError(msg);
    }
    if (!initial.empty() && initial.size() != s.n_vars)
        throw ModelError("initial counts must have one entry per variable");
    if (s.n_vars == 0) throw ModelError("ODE system has no variables");

    GcpsModel m = make_one_symbol_model(s.n_vars);
    for (std::size_t c = 0; c < initial.size(); ++c) m.initial[c][0] = initial[c];
    for (const auto& [pair, bv] : s.b) {
        if (bv == 0.0) continue;
        std::vector<std::size_t> targets;
        for (const auto& [key, v] : s.a)
            if (v != 0.0 && key[1] == pair.first && key[2] == pair.second) targets.push_back(key[0]);
        Rule r;
        r.i = pair.first;
        r.j = pair.second;
        r.k = targets[0];
        r.l = targets.size() == 2 ? targets[1] : targets[0];
        r.constant = bv;
        m.rules.push_back(r);
    }
    require_valid(m);
    return m;
}

namespace {

void check_finite(std::span<const double> y, double t) {
    for (auto v : y)
        if (!std::isfinite(v))
            throw IntegrationError("integration diverged (non-finite state)", t);
}

/// One RK4 step of size h; k1 = f(y) is supplied by the caller.
void rk4_step(const OdeSystem& s, std::vector<double>& y, const std::vector<double>& k1, double h,
              std::vector<double>& k2, std::vector<double>& k3, std::vector<double>& k4,
              std::vector<double>& tmp) {
    const auto n = y.size();
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    s.rhs(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    s.rhs(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    s.rhs(tmp, k4);
    for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

bool clip_negative(std::vector<double>& y) {
    bool clipped = false;
    for (auto& v : y)
        if (v < 0.0) {
            v = 0.0;
            clipped = true;
        }
    return clipped;
}

void check_initial(const OdeSystem& s, std::span<const double> y0) {
    if (y0.size() != s.n_vars) throw ModelError("initial state must have one value per variable");
    for (auto v : y0)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ModelError("initial state must be finite and >= 0");
}

}  // namespace

OdeTrajectory integrate(const OdeSystem& s, std::span<const double> y0, double dt, double t_end,
                        std::size_t stride) {
    check_initial(s, y0);
    if (!(dt > 0.0)) throw ModelError("time step must be positive");
    if (!(t_end >= 0.0)) throw ModelError("end time must be >= 0");
    if (stride == 0) throw ModelError("output stride must be positive");

    const auto n = s.n_vars;
    std::vector<double> y(y0.begin(), y0.end()), k1(n), k2(n), k3(n), k4(n), tmp(n);
    OdeTrajectory out;
    out.times.push_back(0.0);
    out.values.push_back(y);

    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    double t = 0.0;
    for (std::size_t step = 1; step <= steps; ++step) {
        const double next_t = step == steps ? t_end : static_cast<double>(step) * dt;
        s.rhs(y, k1);
        rk4_step(s, y, k1, next_t - t, k2, k3, k4, tmp);
        check_finite(y, t);
        out.clipped |= clip_negative(y);
        t = next_t;
        if (step % stride == 0 || step == steps) {
            out.times.push_back(t);
            out.values.push_back(y);
        }
    }
    return out;
}

FixedPoint find_fixed_point(const OdeSystem& s, std::span<const double> y0,
                            const FixedPointOptions& options) {
    check_initial(s, y0);
    const auto n = s.n_vars;
    std::vector<double> y(y0.begin(), y0.end()), k1(n), k2(n), k3(n), k4(n), tmp(n);

    // |f_i| relative to the summed size of the terms that cancel in it
    std::vector<double> size(n);
    auto residual = [&](const std::vector<double>& f) {
        std::fill(size.begin(), size.end(), 0.0);
        for (const auto& [key, v] : s.a) size[key[0] - 1] += std::abs(v * y[key[1] - 1] * y[key[2] - 1]);
        for (const auto& [key, v] : s.b) {
            const double flux = std::abs(v * y[key.first - 1] * y[key.second - 1]);
            size[key.first - 1] += flux;
            size[key.second - 1] += flux;
        }
        for (const auto& [key, v] : s.linear) size[key.first - 1] += std::abs(v * y[key.second - 1]);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(f[i]) / (1.0 + size[i]));
        return worst;
    };

    double dt = options.dt;
    if (!(dt > 0.0)) {
        double y_max = 1.0;
        for (auto v : y0) y_max = std::max(y_max, v);
        double rate = 0.0;
        for (const auto& [key, v] : s.a) rate += std::abs(v) * y_max;
        for (const auto& [key, v] : s.b) rate += 2.0 * std::abs(v) * y_max;
        for (const auto& [key, v] : s.linear) rate += std::abs(v);
        dt = rate > 0.0 ? 0.01 / rate : 1.0;
    }
    const double max_time =
        options.max_time > 0.0 ? options.max_time : dt * static_cast<double>(options.max_steps);

    FixedPoint fp;
    double t = 0.0;
    for (std::size_t step = 0;; ++step) {
        s.rhs(y, k1);
        fp.residual = residual(k1);
        if (fp.residual < options.tol) {
            fp.point = y;
            fp.time = t;
            fp.steps = step;
            return fp;
        }
        if (t >= max_time || step >= options.max_steps)
            throw ConvergenceError("no fixed point reached by t = " + format_double(t) +
                                   " (residual " + format_double(fp.residual) + ")");
        rk4_step(s, y, k1, dt, k2, k3, k4, tmp);
        check_finite(y, t);
        clip_negative(y);
        t += dt;
    }
}

std::string ode_csv(const OdeTrajectory& t) {
    std::string out = "time";
    const auto n = t.values.empty() ? 0 : t.values.front().size();
    for (std::size_t i = 1; i <= n; ++i) out += ",Y_" + std::to_string(i);
    out += '\n';
    for (std::size_t r = 0; r < t.times.size(); ++r) {
        out += format_double(t.times[r]);
        for (auto v : t.values[r]) out += ',' + format_double(v);
        out += '\n';
    }
    return out;
}

}  // namespace gcps
