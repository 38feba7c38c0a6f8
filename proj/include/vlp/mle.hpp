#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "vlp/bounds.hpp"
#include "vlp/channel.hpp"
#include "vlp/scenario.hpp"

namespace vlp {

struct MlConfig {
    int num_starts = 100;
    Vec3 lower{0.0, 0.0, 0.0};   // axis-aligned search box, meters
    Vec3 upper{10.0, 10.0, 5.0};
    int max_iters = 300;
    double grad_tol = 1e-10;     // relative projected-gradient tolerance
    std::uint64_t seed = 1;
    bool cooperative = true;     // include measurements among the VLC units
    int threads = 1;
};

struct MlEstimate {
    std::vector<Vec3> positions;
    double objective = 0.0;
    int start_index = -1;
    bool converged = false;
};

namespace detail {

inline double alpha_for(const Scenario& s, const RssMeasurement& m, std::span<const Vec3> x) {
    if (m.source.kind == SourceRef::Kind::Anchor) {
        return alpha_anchor(s, m.unit, m.pd, m.source.index, x[static_cast<std::size_t>(m.unit)]);
    }
    return alpha_coop(s, m.unit, m.pd, m.source.unit, m.source.index,
                      x[static_cast<std::size_t>(m.unit)], x[static_cast<std::size_t>(m.source.unit)]);
}

inline bool measurement_enabled(const RssMeasurement& m, bool cooperative) {
    return cooperative || m.source.kind == SourceRef::Kind::Anchor;
}

}  // namespace detail

/// Sum of squared residuals over the links of PD (j,k), evaluated at the
/// stacked unit positions x.
inline double cost_h(const Scenario& s, const MeasurementSet& ms, int j, int k,
                     std::span<const Vec3> x) {
    check_pd_index(s, j, k);
    double acc = 0.0;
    for (const auto& m : ms.measurements) {
        if (m.unit != j || m.pd != k) continue;
        const double r = m.value - detail::alpha_for(s, m, x);
        acc += r * r;
    }
    return acc;
}

/// Negative log-likelihood up to constants: sum over PDs of cost_h weighted
/// by 1/sigma^2.
inline double ml_objective(const Scenario& s, const MeasurementSet& ms, std::span<const Vec3> x,
                           bool cooperative = true) {
    double acc = 0.0;
    for (const auto& m : ms.measurements) {
        if (!detail::measurement_enabled(m, cooperative)) continue;
        const double r = m.value - detail::alpha_for(s, m, x);
        acc += r * r / (m.sigma * m.sigma);
    }
    return acc;
}

/// Objective with its analytic gradient (per-unit, z components zeroed in
/// 2-D mode). Links outside their FOV contribute a locally constant zero
/// alpha and hence no gradient.
inline double ml_objective_gradient(const Scenario& s, const MeasurementSet& ms,
                                    std::span<const Vec3> x, std::vector<Vec3>& grad,
                                    bool cooperative = true) {
    grad.assign(x.size(), Vec3{});
    double acc = 0.0;
    for (const auto& m : ms.measurements) {
        if (!detail::measurement_enabled(m, cooperative)) continue;
        const std::size_t j = static_cast<std::size_t>(m.unit);
        const double sig2 = m.sigma * m.sigma;
        if (m.source.kind == SourceRef::Kind::Anchor) {
            const double a = alpha_anchor(s, m.unit, m.pd, m.source.index, x[j]);
            const double r = m.value - a;
            acc += r * r / sig2;
            if (a > 0.0) {
                const Vec3 g = grad_alpha_anchor(s, m.unit, m.pd, m.source.index, x[j]);
                grad[j] += (-2.0 * r / sig2) * g;
            }
        } else {
            const std::size_t i = static_cast<std::size_t>(m.source.unit);
            const double a = alpha_coop(s, m.unit, m.pd, m.source.unit, m.source.index, x[j], x[i]);
            const double r = m.value - a;
            acc += r * r / sig2;
            if (a > 0.0) {
                const auto [gj, gi] =
                    grad_alpha_coop(s, m.unit, m.pd, m.source.unit, m.source.index, x[j], x[i]);
                grad[j] += (-2.0 * r / sig2) * gj;
                grad[i] += (-2.0 * r / sig2) * gi;
            }
        }
    }
    if (s.dimension == 2) {
        for (auto& g : grad) g.z = 0.0;
    }
    return acc;
}

namespace detail {

struct LocalFit {
    std::vector<Vec3> positions;
    double objective = std::numeric_limits<double>::infinity();
    bool converged = false;
};

/// Projected L-BFGS with Armijo backtracking over the box. Variables are the
/// stacked unit positions; in 2-D mode z stays pinned to the known heights.
inline LocalFit lbfgs_descend(const Scenario& s, const MeasurementSet& ms, const MlConfig& cfg,
                              std::vector<Vec3> x) {
    const int dim = s.dimension;
    const std::size_t nv = x.size();
    auto project = [&](std::vector<Vec3>& p) {
        for (std::size_t j = 0; j < nv; ++j) {
            p[j].x = std::clamp(p[j].x, cfg.lower.x, cfg.upper.x);
            p[j].y = std::clamp(p[j].y, cfg.lower.y, cfg.upper.y);
            if (dim == 3) p[j].z = std::clamp(p[j].z, cfg.lower.z, cfg.upper.z);
        }
    };
    project(x);

    std::vector<Vec3> g;
    double f = ml_objective_gradient(s, ms, x, g, cfg.cooperative);
    if (!std::isfinite(f)) return {};

    auto projected_grad_norm = [&](const std::vector<Vec3>& p, const std::vector<Vec3>& gr) {
        double m = 0.0;
        for (std::size_t j = 0; j < nv; ++j) {
            for (int t = 0; t < dim; ++t) {
                const double lo = t == 0 ? cfg.lower.x : (t == 1 ? cfg.lower.y : cfg.lower.z);
                const double hi = t == 0 ? cfg.upper.x : (t == 1 ? cfg.upper.y : cfg.upper.z);
                const double stepped = std::clamp(p[j][t] - gr[j][t], lo, hi);
                m = std::max(m, std::abs(p[j][t] - stepped));
            }
        }
        return m;
    };

    const double pg0 = projected_grad_norm(x, g);
    const double tol = cfg.grad_tol * std::max(1.0, pg0);

    // L-BFGS memory
    constexpr int kMem = 8;
    std::vector<std::vector<Vec3>> s_hist, y_hist;
    std::vector<double> rho_hist;

    auto dot_all = [&](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
        double acc = 0.0;
        for (std::size_t j = 0; j < nv; ++j) acc += dot(a[j], b[j]);
        return acc;
    };

    LocalFit fit;
    fit.positions = x;
    fit.objective = f;

    for (int it = 0; it < cfg.max_iters; ++it) {
        if (projected_grad_norm(x, g) <= tol) {
            fit.converged = true;
            break;
        }
        // two-loop recursion
        std::vector<Vec3> d = g;
        const int h = static_cast<int>(s_hist.size());
        std::vector<double> alpha_c(static_cast<std::size_t>(h));
        for (int idx = h - 1; idx >= 0; --idx) {
            const std::size_t ui = static_cast<std::size_t>(idx);
            alpha_c[ui] = rho_hist[ui] * dot_all(s_hist[ui], d);
            for (std::size_t j = 0; j < nv; ++j) d[j] -= alpha_c[ui] * y_hist[ui][j];
        }
        if (h > 0) {
            const std::size_t last = static_cast<std::size_t>(h - 1);
            const double gamma = dot_all(s_hist[last], y_hist[last]) / dot_all(y_hist[last], y_hist[last]);
            for (auto& dj : d) dj = dj * gamma;
        }
        for (int idx = 0; idx < h; ++idx) {
            const std::size_t ui = static_cast<std::size_t>(idx);
            const double beta = rho_hist[ui] * dot_all(y_hist[ui], d);
            for (std::size_t j = 0; j < nv; ++j) d[j] += (alpha_c[ui] - beta) * s_hist[ui][j];
        }
        for (auto& dj : d) dj = -dj;
        if (dot_all(d, g) > -1e-18) {
            for (std::size_t j = 0; j < nv; ++j) d[j] = -g[j];
        }

        // Armijo backtracking along the projected path
        double t = 1.0;
        std::vector<Vec3> x_new;
        std::vector<Vec3> g_new;
        double f_new = f;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            x_new = x;
            for (std::size_t j = 0; j < nv; ++j) x_new[j] += t * d[j];
            project(x_new);
            std::vector<Vec3> diff(nv);
            for (std::size_t j = 0; j < nv; ++j) diff[j] = x_new[j] - x[j];
            f_new = ml_objective_gradient(s, ms, x_new, g_new, cfg.cooperative);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * dot_all(g, diff)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            fit.converged = projected_grad_norm(x, g) <= tol * 10.0;
            break;
        }
        std::vector<Vec3> s_vec(nv), y_vec(nv);
        double sy = 0.0, ss = 0.0, yy = 0.0;
        for (std::size_t j = 0; j < nv; ++j) {
            s_vec[j] = x_new[j] - x[j];
            y_vec[j] = g_new[j] - g[j];
            sy += dot(s_vec[j], y_vec[j]);
            ss += norm_sq(s_vec[j]);
            yy += norm_sq(y_vec[j]);
        }
        if (sy > 1e-10 * std::sqrt(ss * yy)) {
            s_hist.push_back(std::move(s_vec));
            y_hist.push_back(std::move(y_vec));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > kMem) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }
        x = std::move(x_new);
        g = std::move(g_new);
        f = f_new;
        fit.positions = x;
        fit.objective = f;
    }
    return fit;
}

}  // namespace detail

/// Multi-start ML estimate. Starts are sampled uniformly over the box from
/// per-start seed streams; the winner is the lowest objective, ties broken by
/// the lowest start index, so the result is deterministic regardless of the
/// thread count.
inline MlEstimate estimate_ml(const Scenario& s, const MeasurementSet& ms, const MlConfig& cfg) {
    if (cfg.num_starts < 1) throw std::invalid_argument("num_starts must be >= 1");
    if (!(cfg.lower.x < cfg.upper.x) || !(cfg.lower.y < cfg.upper.y) ||
        (s.dimension == 3 && !(cfg.lower.z < cfg.upper.z))) {
        throw std::invalid_argument("degenerate search box");
    }
    const int dim = s.dimension;
    const std::size_t nv = static_cast<std::size_t>(s.num_units());

    auto sample_start = [&](int idx) {
        SplitMix64 g(derive_seed(cfg.seed, static_cast<std::uint64_t>(idx)));
        std::vector<Vec3> x(nv);
        for (std::size_t j = 0; j < nv; ++j) {
            x[j].x = cfg.lower.x + (cfg.upper.x - cfg.lower.x) * g.next_open_unit();
            x[j].y = cfg.lower.y + (cfg.upper.y - cfg.lower.y) * g.next_open_unit();
            x[j].z = dim == 2 ? s.unit_height(static_cast<int>(j))
                              : cfg.lower.z + (cfg.upper.z - cfg.lower.z) * g.next_open_unit();
        }
        return x;
    };

    std::vector<detail::LocalFit> fits(static_cast<std::size_t>(cfg.num_starts));
    auto worker = [&](int begin, int end) {
        for (int idx = begin; idx < end; ++idx) {
            fits[static_cast<std::size_t>(idx)] = detail::lbfgs_descend(s, ms, cfg, sample_start(idx));
        }
    };
    const int threads = std::max(1, std::min(cfg.threads, cfg.num_starts));
    if (threads == 1) {
        worker(0, cfg.num_starts);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (cfg.num_starts + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int b = t * chunk;
            const int e = std::min(cfg.num_starts, b + chunk);
            if (b < e) pool.emplace_back(worker, b, e);
        }
        for (auto& th : pool) th.join();
    }

    MlEstimate best;
    best.objective = std::numeric_limits<double>::infinity();
    for (int idx = 0; idx < cfg.num_starts; ++idx) {
        const auto& fit = fits[static_cast<std::size_t>(idx)];
        if (std::isfinite(fit.objective) && fit.objective < best.objective) {
            best.positions = fit.positions;
            best.objective = fit.objective;
            best.start_index = idx;
            best.converged = fit.converged;
        }
    }
    if (best.start_index < 0) {
        throw std::runtime_error("all multi-start descents diverged");
    }
    return best;
}

}  // namespace vlp
