#pragma once

#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlp/channel.hpp"
#include "vlp/feasibility.hpp"
#include "vlp/scenario.hpp"

namespace vlp {

// ---------------------------------------------------------------------------
// Constraint bundles
// ---------------------------------------------------------------------------

/// A cooperative Lambertian set before the partner position is known. The
/// actual constraint is materialized from the partner's latest estimate each
/// time it is needed.
struct CoopTemplate {
    int pd = 0;       // receiving PD k at the owning unit
    int partner = 0;  // source unit i
    int led = 0;      // LED index at the partner
    double gamma = 0.0;
    double epsilon = 1e-6;
    Vec3 n_r;         // receiver orientation
    Vec3 n_t;         // partner LED orientation (reporting only; Case1 drops it)
    double order = 1.0;
    Vec3 offset;      // b_{i,led} - a_{j,pd}; source point = x_i + offset
    int dim = 3;
};

struct CoopConstraint {
    LambertianConstraint set;
    Halfspace region;  // the dynamic halfspace where the set's g is quasiconvex
};

inline CoopConstraint materialize_coop(const CoopTemplate& t, const Vec3& partner_position) {
    CoopConstraint c;
    c.set.source = partner_position + t.offset;
    c.set.n_t = t.n_t;
    c.set.n_r = t.n_r;
    c.set.order = t.order;
    c.set.gamma = t.gamma;
    c.set.epsilon = t.epsilon;
    c.set.variant = ConstraintVariant::Case1Expanded;
    c.set.dim = t.dim;
    c.region = Halfspace{c.set.source, t.n_r, t.dim};
    return c;
}

struct UnitProblem {
    std::vector<Halfspace> gamma_region;         // Gamma_j, from anchor links
    std::vector<LambertianConstraint> noncoop;   // static anchor constraints
    std::vector<CoopTemplate> coop_templates;
    std::vector<CoopConstraint> coop;            // materialized at build-time estimates
    int dropped_constraints = 0;                 // nonpositive-gamma measurements
};

struct SolverProblem {
    int dim = 3;
    std::vector<UnitProblem> units;
    std::vector<double> lift_z;  // per-unit fixed z in 2-D mode
};

namespace detail {

inline bool perpendicular_down(const Vec3& n, double tol = 1e-12) {
    return std::abs(n.x) <= tol && std::abs(n.y) <= tol && std::abs(n.z + 1.0) <= tol;
}

inline double gamma_from_measurement(double value, double tx_power, double order, double area) {
    return value / tx_power * 2.0 * std::numbers::pi / ((order + 1.0) * area);
}

}  // namespace detail

/// Builds per-unit constraint bundles from a measurement set: anchor
/// halfspaces Gamma_j, noncooperative Lambertian sets (Case 2 when the
/// scenario is 2-D with perpendicular anchors, Case 1 expanded otherwise),
/// and cooperative Case-1 sets anchored at the supplied estimates.
/// Measurements with nonpositive gamma are dropped and counted.
inline SolverProblem build_constraints(const Scenario& s, const MeasurementSet& ms,
                                       std::span<const Vec3> estimates, double epsilon = 1e-6) {
    if (estimates.size() != static_cast<std::size_t>(s.num_units())) {
        throw std::invalid_argument("one position estimate per VLC unit is required");
    }
    SolverProblem pb;
    pb.dim = s.dimension;
    pb.units.resize(static_cast<std::size_t>(s.num_units()));
    for (int j = 0; j < s.num_units(); ++j) pb.lift_z.push_back(s.unit_height(j));

    for (const auto& m : ms.measurements) {
        const std::size_t j = static_cast<std::size_t>(m.unit);
        const auto& u = s.vlc_units[j];
        const Vec3 a_off = u.pd_offsets[static_cast<std::size_t>(m.pd)];
        const Vec3 n_r = u.pd_orientations[static_cast<std::size_t>(m.pd)];
        const double area = u.pd_areas[static_cast<std::size_t>(m.pd)];
        auto& unit = pb.units[j];

        if (m.source.kind == SourceRef::Kind::Anchor) {
            const auto& an = s.anchors[static_cast<std::size_t>(m.source.index)];
            const Vec3 source = an.position - a_off;
            unit.gamma_region.push_back(Halfspace{source, n_r, pb.dim});
            const double gamma =
                detail::gamma_from_measurement(m.value, an.transmit_power, an.lambertian_order, area);
            if (gamma <= 0.0) {
                ++unit.dropped_constraints;
                continue;
            }
            LambertianConstraint c;
            c.source = source;
            c.n_t = an.orientation;
            c.n_r = n_r;
            c.order = an.lambertian_order;
            c.epsilon = epsilon;
            c.dim = pb.dim;
            const double h = source.z - pb.lift_z[j];
            if (pb.dim == 2 && detail::perpendicular_down(an.orientation) && h > 0.0) {
                c.variant = ConstraintVariant::Case2KnownHeight;
                c.case2_height = h;
                c.gamma = gamma / std::pow(h, an.lambertian_order);
            } else {
                c.variant = ConstraintVariant::Case1Expanded;
                c.gamma = gamma;
            }
            unit.noncoop.push_back(c);
        } else {
            const auto& ui = s.vlc_units[static_cast<std::size_t>(m.source.unit)];
            const double gamma = detail::gamma_from_measurement(
                m.value, ui.led_powers[static_cast<std::size_t>(m.source.index)],
                ui.led_orders[static_cast<std::size_t>(m.source.index)], area);
            if (gamma <= 0.0) {
                ++unit.dropped_constraints;
                continue;
            }
            CoopTemplate t;
            t.pd = m.pd;
            t.partner = m.source.unit;
            t.led = m.source.index;
            t.gamma = gamma;
            t.epsilon = epsilon;
            t.n_r = n_r;
            t.n_t = ui.led_orientations[static_cast<std::size_t>(m.source.index)];
            t.order = ui.led_orders[static_cast<std::size_t>(m.source.index)];
            t.offset = ui.led_offsets[static_cast<std::size_t>(m.source.index)] - a_off;
            t.dim = pb.dim;
            unit.coop_templates.push_back(t);
            unit.coop.push_back(
                materialize_coop(t, estimates[static_cast<std::size_t>(m.source.unit)]));
        }
    }

    for (std::size_t j = 0; j < pb.units.size(); ++j) {
        if (pb.units[j].noncoop.empty() && pb.units[j].coop_templates.empty()) {
            throw std::runtime_error("unit " + std::to_string(j + 1) + " has no links");
        }
    }
    return pb;
}

// ---------------------------------------------------------------------------
// Solver configuration and traces
// ---------------------------------------------------------------------------

enum class SolverAlgorithm { Ccgp, Csgp };
enum class ExecutionMode { Centralized, DistributedSequential, DistributedParallel };
enum class StopReason { Converged, MaxIters };
enum class InitPolicy { ClosestAnchor, Explicit };

struct CsgpWeights {
    enum class Kind { Equal, Custom } kind = Kind::Equal;
    /// custom[j] lists one weight per constraint of unit j, noncooperative
    /// constraints first (build order) then cooperative templates; each
    /// unit's weights must be nonnegative and sum to 1.
    std::vector<std::vector<double>> custom;
};

struct SolverConfig {
    SolverAlgorithm algorithm = SolverAlgorithm::Ccgp;
    bool cooperative = true;
    double lambda0 = 1.0;
    double beta = 1e-3;
    double xi = 0.5;
    double delta = 1e-6;     // stopping threshold on summed squared steps, m^2
    int max_iters = 10000;
    double theta_nc = 0.5;   // CCGP averaging weights, must sum to 1
    double theta_c = 0.5;
    CsgpWeights csgp_weights;
    ExecutionMode mode = ExecutionMode::Centralized;
    InitPolicy init = InitPolicy::ClosestAnchor;
    std::vector<Vec3> init_points;
    double constraint_epsilon = 1e-6;
    double tol_feas = 1e-9;
    double alg1_delta = 1e-10;
    int alg1_max_sweeps = 1000;
    int armijo_cap = 60;
    bool record_iterates = true;
};

inline void validate_config(const SolverConfig& cfg) {
    if (!(cfg.lambda0 > 0.0)) throw std::invalid_argument("lambda0 must be positive");
    if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) throw std::invalid_argument("beta must be in (0,1)");
    if (!(cfg.xi > 0.0 && cfg.xi < 1.0)) throw std::invalid_argument("xi must be in (0,1)");
    if (!(cfg.delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (cfg.theta_nc < 0.0 || cfg.theta_c < 0.0 || std::abs(cfg.theta_nc + cfg.theta_c - 1.0) > 1e-12) {
        throw std::invalid_argument("ccgp weights must be nonnegative and sum to 1");
    }
    if (cfg.init == InitPolicy::Explicit && cfg.init_points.empty()) {
        throw std::invalid_argument("explicit initialization requires init_points");
    }
}

struct SolverState {
    std::vector<Vec3> positions;
    std::vector<double> lambda_nc;  // CSGP keeps its single step size here
    std::vector<double> lambda_c;
    int iteration = 0;
};

struct IterationStats {
    double step_sq = 0.0;              // sum_j |x_j^{n+1} - x_j^n|^2
    double max_gamma_violation = 0.0;  // worst post-projection halfspace violation
    std::vector<double> fejer_slack;   // per unit |x^{n+1} - x~|^2 (the eps_n allowance)
};

struct SolverTrace {
    std::vector<std::vector<Vec3>> iterates;  // [iteration][unit]; entry 0 is the start
    std::vector<double> residual_path;        // step_sq per executed iteration
    std::vector<std::vector<double>> step_sizes_nc;  // [unit][iteration]
    std::vector<std::vector<double>> step_sizes_c;
    std::vector<std::vector<double>> fejer_slack;    // [unit][iteration]
    double max_gamma_violation = 0.0;
    StopReason stop_reason = StopReason::MaxIters;
    int iterations = 0;
    std::vector<Vec3> final_positions;
    int num_units = 0;
};

namespace detail {

/// One CCGP update of unit j reading partner estimates from `view` (which
/// also carries x_j itself). Returns the new position; adjusts the unit's
/// step sizes in place.
inline Vec3 ccgp_update_unit(const SolverProblem& pb, const SolverConfig& cfg, int j,
                             const std::vector<Vec3>& view, double& lambda_nc, double& lambda_c,
                             IterationStats& stats) {
    const auto& unit = pb.units[static_cast<std::size_t>(j)];
    const auto proj =
        project_halfspace_intersection(unit.gamma_region, view[static_cast<std::size_t>(j)],
                                       cfg.alg1_delta, cfg.alg1_max_sweeps);
    const Vec3 xt = proj.point;
    for (const auto& h : unit.gamma_region) {
        stats.max_gamma_violation = std::max(stats.max_gamma_violation, halfspace_violation(h, xt));
    }

    // most violated noncooperative constraint
    const LambertianConstraint* worst_nc = nullptr;
    double worst_nc_val = -std::numeric_limits<double>::infinity();
    for (const auto& c : unit.noncoop) {
        const double v = g_value(c, xt);
        if (v > worst_nc_val) {
            worst_nc_val = v;
            worst_nc = &c;
        }
    }

    // most violated cooperative constraint among those whose halfspace holds xt
    std::optional<CoopConstraint> worst_c;
    double worst_c_val = -std::numeric_limits<double>::infinity();
    if (cfg.cooperative) {
        for (const auto& t : unit.coop_templates) {
            const CoopConstraint cc =
                materialize_coop(t, view[static_cast<std::size_t>(t.partner)]);
            if (halfspace_violation(cc.region, xt) > 0.0) continue;
            const double v = g_value(cc.set, xt);
            if (v > worst_c_val) {
                worst_c_val = v;
                worst_c = cc;
            }
        }
    }

    Vec3 next = xt;
    if (worst_nc && worst_c) {
        lambda_nc = armijo_step({worst_nc, 1}, lambda_nc, cfg.beta, cfg.xi, xt, cfg.armijo_cap);
        lambda_c = armijo_step({&worst_c->set, 1}, lambda_c, cfg.beta, cfg.xi, xt, cfg.armijo_cap);
        next = cfg.theta_nc * gradient_project(*worst_nc, lambda_nc, xt) +
               cfg.theta_c * gradient_project(worst_c->set, lambda_c, xt);
    } else if (worst_nc) {
        // empty cooperative candidate set: full weight on the noncooperative
        // projection, cooperative step size carried over
        lambda_nc = armijo_step({worst_nc, 1}, lambda_nc, cfg.beta, cfg.xi, xt, cfg.armijo_cap);
        next = gradient_project(*worst_nc, lambda_nc, xt);
    } else if (worst_c) {
        lambda_c = armijo_step({&worst_c->set, 1}, lambda_c, cfg.beta, cfg.xi, xt, cfg.armijo_cap);
        next = gradient_project(worst_c->set, lambda_c, xt);
    }
    stats.fejer_slack[static_cast<std::size_t>(j)] = norm_sq(next - xt);
    return next;
}

/// One CSGP update of unit j: parallel projection onto every Lambertian set
/// with kappa weights, single Armijo step size shared across projectors.
inline Vec3 csgp_update_unit(const SolverProblem& pb, const SolverConfig& cfg, int j,
                             const std::vector<Vec3>& view, double& lambda, IterationStats& stats) {
    const auto& unit = pb.units[static_cast<std::size_t>(j)];
    const auto proj =
        project_halfspace_intersection(unit.gamma_region, view[static_cast<std::size_t>(j)],
                                       cfg.alg1_delta, cfg.alg1_max_sweeps);
    const Vec3 xt = proj.point;
    for (const auto& h : unit.gamma_region) {
        stats.max_gamma_violation = std::max(stats.max_gamma_violation, halfspace_violation(h, xt));
    }

    std::vector<CoopConstraint> coop;
    if (cfg.cooperative) {
        coop.reserve(unit.coop_templates.size());
        for (const auto& t : unit.coop_templates) {
            coop.push_back(materialize_coop(t, view[static_cast<std::size_t>(t.partner)]));
        }
    }

    const std::size_t n_total = unit.noncoop.size() + coop.size();
    std::vector<double> weights;
    if (cfg.csgp_weights.kind == CsgpWeights::Kind::Equal) {
        weights.assign(n_total, 1.0 / static_cast<double>(n_total));
    } else {
        weights = cfg.csgp_weights.custom.at(static_cast<std::size_t>(j));
        if (weights.size() != n_total) {
            throw std::invalid_argument("custom weight count does not match the constraint count");
        }
        double sum = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("weights must be nonnegative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("weights must sum to 1");
    }

    // Armijo over the noncooperative functions plus the cooperative functions
    // whose value at xt does not exceed gamma (equivalently, whose halfspace
    // contains xt).
    std::vector<LambertianConstraint> armijo_set(unit.noncoop.begin(), unit.noncoop.end());
    for (const auto& cc : coop) {
        if (g_value(cc.set, xt) <= cc.set.gamma) armijo_set.push_back(cc.set);
    }
    if (!armijo_set.empty()) {
        lambda = armijo_step(armijo_set, lambda, cfg.beta, cfg.xi, xt, cfg.armijo_cap);
    }

    Vec3 next{};
    std::size_t slot = 0;
    for (const auto& c : unit.noncoop) {
        next += weights[slot++] * gradient_project(c, lambda, xt);
    }
    for (const auto& cc : coop) {
        next += weights[slot++] * gradient_project(cc.set, lambda, xt);
    }
    if (n_total == 0) next = xt;
    stats.fejer_slack[static_cast<std::size_t>(j)] = norm_sq(next - xt);
    return next;
}

}  // namespace detail

/// One outer iteration over all units in ascending order. Partner estimates
/// use the value already updated this iteration for smaller indices and the
/// previous iterate for larger ones; DistributedParallel instead freezes all
/// partners at the iteration start.
inline IterationStats solver_iterate(const SolverProblem& pb, const SolverConfig& cfg,
                                     SolverState& st) {
    const int nv = static_cast<int>(pb.units.size());
    IterationStats stats;
    stats.fejer_slack.assign(static_cast<std::size_t>(nv), 0.0);
    const std::vector<Vec3> snapshot =
        cfg.mode == ExecutionMode::DistributedParallel ? st.positions : std::vector<Vec3>{};
    for (int j = 0; j < nv; ++j) {
        const std::vector<Vec3>& view =
            cfg.mode == ExecutionMode::DistributedParallel ? snapshot : st.positions;
        Vec3 next;
        if (cfg.algorithm == SolverAlgorithm::Ccgp) {
            next = detail::ccgp_update_unit(pb, cfg, j, view, st.lambda_nc[static_cast<std::size_t>(j)],
                                            st.lambda_c[static_cast<std::size_t>(j)], stats);
        } else {
            next = detail::csgp_update_unit(pb, cfg, j, view, st.lambda_nc[static_cast<std::size_t>(j)],
                                            stats);
            st.lambda_c[static_cast<std::size_t>(j)] = st.lambda_nc[static_cast<std::size_t>(j)];
        }
        stats.step_sq += norm_sq(next - st.positions[static_cast<std::size_t>(j)]);
        st.positions[static_cast<std::size_t>(j)] = next;
    }
    ++st.iteration;
    return stats;
}

/// CCGP single iteration (Algorithm-level entry point).
inline IterationStats ccgp_iterate(const SolverProblem& pb, const SolverConfig& cfg, SolverState& st) {
    SolverConfig c = cfg;
    c.algorithm = SolverAlgorithm::Ccgp;
    return solver_iterate(pb, c, st);
}

/// CSGP single iteration.
inline IterationStats csgp_iterate(const SolverProblem& pb, const SolverConfig& cfg, SolverState& st) {
    SolverConfig c = cfg;
    c.algorithm = SolverAlgorithm::Csgp;
    return solver_iterate(pb, c, st);
}

/// Starting points: each unit at its nearest measured ceiling anchor (ties to
/// the lowest index), planar coordinates only in 2-D mode. Units without
/// anchor links start at the anchor centroid.
inline std::vector<Vec3> closest_anchor_init(const Scenario& s, const MeasurementSet& ms) {
    const int nv = s.num_units();
    std::vector<Vec3> init(static_cast<std::size_t>(nv));
    Vec3 centroid{};
    for (const auto& a : s.anchors) centroid += a.position;
    if (!s.anchors.empty()) centroid = centroid / static_cast<double>(s.num_anchors());
    for (int j = 0; j < nv; ++j) {
        const Vec3 truth = s.vlc_units[static_cast<std::size_t>(j)].position;
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& m : ms.measurements) {
            if (m.unit != j || m.source.kind != SourceRef::Kind::Anchor) continue;
            const double d = norm(s.anchors[static_cast<std::size_t>(m.source.index)].position - truth);
            if (d < best_d || (d == best_d && m.source.index < best)) {
                best_d = d;
                best = m.source.index;
            }
        }
        Vec3 p = best >= 0 ? s.anchors[static_cast<std::size_t>(best)].position : centroid;
        if (s.dimension == 2) p.z = s.unit_height(j);
        init[static_cast<std::size_t>(j)] = p;
    }
    return init;
}

/// Runs the configured algorithm until the summed squared step drops below
/// delta or max_iters is reached. DistributedSequential routes partner
/// estimates through an explicit broadcast log and produces bit-identical
/// iterates to Centralized.
inline SolverTrace solve(const Scenario& s, const MeasurementSet& ms, const SolverConfig& cfg) {
    validate_config(cfg);
    const int nv = s.num_units();
    std::vector<Vec3> init = cfg.init == InitPolicy::Explicit ? cfg.init_points
                                                              : closest_anchor_init(s, ms);
    if (static_cast<int>(init.size()) != nv) {
        throw std::invalid_argument("one initial point per unit is required");
    }
    if (s.dimension == 2) {
        for (int j = 0; j < nv; ++j) init[static_cast<std::size_t>(j)].z = s.unit_height(j);
    }
    const SolverProblem pb = build_constraints(s, ms, init, cfg.constraint_epsilon);

    SolverTrace trace;
    trace.num_units = nv;
    trace.step_sizes_nc.assign(static_cast<std::size_t>(nv), {});
    trace.step_sizes_c.assign(static_cast<std::size_t>(nv), {});
    trace.fejer_slack.assign(static_cast<std::size_t>(nv), {});

    SolverState st;
    st.positions = init;
    st.lambda_nc.assign(static_cast<std::size_t>(nv), cfg.lambda0);
    st.lambda_c.assign(static_cast<std::size_t>(nv), cfg.lambda0);
    if (cfg.record_iterates) trace.iterates.push_back(st.positions);

    // Broadcast plumbing for the distributed-sequential mode: every unit keeps
    // a local copy of all estimates, refreshed from the message log before its
    // own update.
    std::vector<std::vector<Vec3>> local;
    std::vector<std::size_t> cursor;
    std::vector<std::pair<int, Vec3>> log;
    const bool mailbox = cfg.mode == ExecutionMode::DistributedSequential;
    if (mailbox) {
        local.assign(static_cast<std::size_t>(nv), st.positions);
        cursor.assign(static_cast<std::size_t>(nv), 0);
    }

    for (int n = 0; n < cfg.max_iters; ++n) {
        IterationStats stats;
        if (!mailbox) {
            stats = solver_iterate(pb, cfg, st);
        } else {
            stats.fejer_slack.assign(static_cast<std::size_t>(nv), 0.0);
            for (int j = 0; j < nv; ++j) {
                auto& mine = local[static_cast<std::size_t>(j)];
                auto& cur = cursor[static_cast<std::size_t>(j)];
                for (; cur < log.size(); ++cur) {
                    mine[static_cast<std::size_t>(log[cur].first)] = log[cur].second;
                }
                Vec3 next;
                if (cfg.algorithm == SolverAlgorithm::Ccgp) {
                    next = detail::ccgp_update_unit(pb, cfg, j, mine,
                                                    st.lambda_nc[static_cast<std::size_t>(j)],
                                                    st.lambda_c[static_cast<std::size_t>(j)], stats);
                } else {
                    next = detail::csgp_update_unit(pb, cfg, j, mine,
                                                    st.lambda_nc[static_cast<std::size_t>(j)], stats);
                    st.lambda_c[static_cast<std::size_t>(j)] = st.lambda_nc[static_cast<std::size_t>(j)];
                }
                stats.step_sq += norm_sq(next - st.positions[static_cast<std::size_t>(j)]);
                st.positions[static_cast<std::size_t>(j)] = next;
                mine[static_cast<std::size_t>(j)] = next;
                ++cur;  // own broadcast needs no redelivery
                log.emplace_back(j, next);
            }
            ++st.iteration;
        }

        trace.residual_path.push_back(stats.step_sq);
        trace.max_gamma_violation = std::max(trace.max_gamma_violation, stats.max_gamma_violation);
        for (int j = 0; j < nv; ++j) {
            trace.step_sizes_nc[static_cast<std::size_t>(j)].push_back(st.lambda_nc[static_cast<std::size_t>(j)]);
            trace.step_sizes_c[static_cast<std::size_t>(j)].push_back(st.lambda_c[static_cast<std::size_t>(j)]);
            trace.fejer_slack[static_cast<std::size_t>(j)].push_back(stats.fejer_slack[static_cast<std::size_t>(j)]);
        }
        if (cfg.record_iterates) trace.iterates.push_back(st.positions);
        ++trace.iterations;
        if (stats.step_sq < cfg.delta) {
            trace.stop_reason = StopReason::Converged;
            break;
        }
    }
    trace.final_positions = st.positions;
    return trace;
}

/// Average residuals across Monte Carlo traces: for iteration n,
/// (1/(M*N_V)) * sum_m |x^(n,m) - x^(n-1,m)| with converged traces padded by
/// zero steps.
inline std::vector<double> average_residuals(std::span<const SolverTrace> traces) {
    if (traces.empty()) throw std::invalid_argument("no traces to average");
    std::size_t longest = 0;
    for (const auto& t : traces) {
        longest = std::max(longest, t.residual_path.size());
    }
    const double m = static_cast<double>(traces.size());
    const double nv = static_cast<double>(traces.front().num_units);
    std::vector<double> out(longest, 0.0);
    for (const auto& t : traces) {
        if (!t.iterates.empty()) {
            for (std::size_t n = 1; n < t.iterates.size(); ++n) {
                double acc = 0.0;
                for (std::size_t j = 0; j < t.iterates[n].size(); ++j) {
                    acc += norm_sq(t.iterates[n][j] - t.iterates[n - 1][j]);
                }
                out[n - 1] += std::sqrt(acc);
            }
        } else {
            for (std::size_t n = 0; n < t.residual_path.size(); ++n) {
                out[n] += std::sqrt(t.residual_path[n]);
            }
        }
    }
    for (auto& v : out) v /= m * nv;
    return out;
}

/// Worst positive constraint value over all of a unit's sets with cooperative
/// sets materialized at the given positions; the empirical feasibility check
/// for the consistent case.
inline double max_constraint_violation(const SolverProblem& pb, std::span<const Vec3> positions) {
    double worst = 0.0;
    for (std::size_t j = 0; j < pb.units.size(); ++j) {
        const Vec3& x = positions[j];
        for (const auto& c : pb.units[j].noncoop) {
            worst = std::max(worst, g_value(c, x));
        }
        for (const auto& t : pb.units[j].coop_templates) {
            const auto cc = materialize_coop(t, positions[static_cast<std::size_t>(t.partner)]);
            worst = std::max(worst, g_value(cc.set, x));
        }
    }
    return worst;
}

}  // namespace vlp
