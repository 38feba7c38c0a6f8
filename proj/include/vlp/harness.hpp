#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vlp/bounds.hpp"
#include "vlp/channel.hpp"
#include "vlp/mle.hpp"
#include "vlp/scenario.hpp"
#include "vlp/solvers.hpp"
#include "vlp/version.hpp"

namespace vlp {

// ---------------------------------------------------------------------------
// Scenario validation
// ---------------------------------------------------------------------------

struct ValidationReport {
    std::vector<std::string> issues;
    bool ok() const { return issues.empty(); }
    std::string text() const {
        if (ok()) return "scenario valid\n";
        std::string out;
        for (const auto& i : issues) out += "violation: " + i + "\n";
        return out;
    }
};

/// Checks every type invariant on an in-memory scenario. Messages use
/// 1-based indices to match the file format.
inline ValidationReport validate_scenario_data(const Scenario& s) {
    ValidationReport rep;
    auto issue = [&](const std::string& m) { rep.issues.push_back(m); };
    char buf[160];

    if (s.dimension != 2 && s.dimension != 3) issue("dimension must be 2 or 3");
    if (s.dimension == 2 && s.known_heights.size() != static_cast<std::size_t>(s.num_units())) {
        issue("dimension 2 requires known_heights with one entry per VLC unit");
    }
    for (int l = 0; l < s.num_anchors(); ++l) {
        const auto& a = s.anchors[static_cast<std::size_t>(l)];
        if (!is_finite(a.position)) issue("anchor " + std::to_string(l + 1) + ": position not finite");
        if (!is_unit(a.orientation)) issue("anchor " + std::to_string(l + 1) + ": orientation not unit-norm");
        if (!(a.lambertian_order >= 1.0)) issue("anchor " + std::to_string(l + 1) + ": lambertian_order must be >= 1");
        if (!(a.transmit_power > 0.0)) issue("anchor " + std::to_string(l + 1) + ": transmit_power must be > 0");
    }
    for (int j = 0; j < s.num_units(); ++j) {
        const auto& u = s.vlc_units[static_cast<std::size_t>(j)];
        const std::string tag = "vlc unit " + std::to_string(j + 1);
        const std::size_t kj = u.pd_offsets.size();
        if (u.pd_orientations.size() != kj || u.pd_areas.size() != kj || u.noise_sigmas.size() != kj) {
            issue(tag + ": PD attribute sequences have mismatched lengths");
        }
        const std::size_t lj = u.led_offsets.size();
        if (u.led_orientations.size() != lj || u.led_orders.size() != lj || u.led_powers.size() != lj) {
            issue(tag + ": LED attribute sequences have mismatched lengths");
        }
        for (std::size_t k = 0; k < u.pd_orientations.size(); ++k) {
            if (!is_unit(u.pd_orientations[k])) {
                std::snprintf(buf, sizeof(buf), "%s: pd %zu orientation not unit-norm", tag.c_str(), k + 1);
                issue(buf);
            }
        }
        for (std::size_t k = 0; k < u.pd_areas.size(); ++k) {
            if (!(u.pd_areas[k] > 0.0)) issue(tag + ": pd area must be > 0");
        }
        for (std::size_t k = 0; k < u.noise_sigmas.size(); ++k) {
            if (!(u.noise_sigmas[k] > 0.0)) issue(tag + ": noise sigma must be > 0");
        }
        for (std::size_t k = 0; k < u.led_orientations.size(); ++k) {
            if (!is_unit(u.led_orientations[k])) {
                std::snprintf(buf, sizeof(buf), "%s: led %zu orientation not unit-norm", tag.c_str(), k + 1);
                issue(buf);
            }
        }
        for (std::size_t k = 0; k < u.led_orders.size(); ++k) {
            if (!(u.led_orders[k] >= 1.0)) issue(tag + ": led order must be >= 1");
        }
        for (std::size_t k = 0; k < u.led_powers.size(); ++k) {
            if (!(u.led_powers[k] > 0.0)) issue(tag + ": led power must be > 0");
        }
    }
    const auto& conn = s.connectivity;
    if (conn.anchor_links.size() != static_cast<std::size_t>(s.num_units()) ||
        conn.coop_links.size() != static_cast<std::size_t>(s.num_units())) {
        issue("connectivity tables must cover every VLC unit");
        return rep;
    }
    for (int j = 0; j < s.num_units(); ++j) {
        const auto ju = static_cast<std::size_t>(j);
        for (std::size_t k = 0; k < conn.anchor_links[ju].size(); ++k) {
            for (int l : conn.anchor_links[ju][k]) {
                if (l < 0 || l >= s.num_anchors()) {
                    std::snprintf(buf, sizeof(buf), "connectivity: anchor index %d out of range (vlc %d pd %zu)",
                                  l + 1, j + 1, k + 1);
                    issue(buf);
                }
            }
        }
        for (std::size_t k = 0; k < conn.coop_links[ju].size(); ++k) {
            for (const auto& cl : conn.coop_links[ju][k]) {
                if (cl.unit == j) {
                    std::snprintf(buf, sizeof(buf), "connectivity: self-link at vlc %d pd %zu", j + 1, k + 1);
                    issue(buf);
                    continue;
                }
                if (cl.unit < 0 || cl.unit >= s.num_units()) {
                    issue("connectivity: partner unit index out of range");
                    continue;
                }
                const auto& ui = s.vlc_units[static_cast<std::size_t>(cl.unit)];
                for (int l : cl.leds) {
                    if (l < 0 || l >= ui.num_leds()) {
                        std::snprintf(buf, sizeof(buf), "connectivity: led index %d out of range (vlc %d pd %zu partner %d)",
                                      l + 1, j + 1, k + 1, cl.unit + 1);
                        issue(buf);
                    }
                }
            }
        }
    }
    return rep;
}

/// Parses and validates a scenario file; parse failures become report issues
/// with whatever position context the parser provides.
inline ValidationReport validate_scenario(const std::string& path) {
    ValidationReport rep;
    std::ifstream in(path);
    if (!in) {
        rep.issues.push_back("cannot open file: " + path);
        return rep;
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        rep.issues.push_back(std::string("parse failure: ") + e.what());
        return rep;
    }
    // name zero orientations before typed loading normalizes (and throws)
    auto check_orients = [&rep](const nlohmann::json& arr, const std::string& where, const char* key) {
        int idx = 0;
        for (const auto& e : arr) {
            ++idx;
            if (!e.contains(key)) continue;
            const auto& o = e[key];
            auto flag = [&](const nlohmann::json& v, const std::string& ctx) {
                if (v.is_array() && v.size() == 3) {
                    const double n2 = v[0].get<double>() * v[0].get<double>() +
                                      v[1].get<double>() * v[1].get<double>() +
                                      v[2].get<double>() * v[2].get<double>();
                    if (n2 == 0.0) rep.issues.push_back(ctx + ": zero orientation cannot be normalized");
                }
            };
            if (o.is_array() && !o.empty() && o[0].is_array()) {
                int sub = 0;
                for (const auto& v : o) flag(v, where + " " + std::to_string(idx) + " " + key + "[" + std::to_string(++sub) + "]");
            } else {
                flag(o, where + " " + std::to_string(idx) + " " + key);
            }
        }
    };
    try {
        if (j.contains("anchors")) check_orients(j["anchors"], "anchor", "orientation");
        if (j.contains("vlc_units")) {
            check_orients(j["vlc_units"], "vlc unit", "pd_orientations");
            check_orients(j["vlc_units"], "vlc unit", "led_orientations");
        }
        if (!rep.ok()) return rep;
        const Scenario s = scenario_from_json(j);
        return validate_scenario_data(s);
    } catch (const std::exception& e) {
        rep.issues.push_back(std::string("invalid scenario: ") + e.what());
        return rep;
    }
}

// ---------------------------------------------------------------------------
// Experiment plans
// ---------------------------------------------------------------------------

enum class SweepVariable { AnchorPower, VlcPower };
enum class AlgorithmKind { Crlb, Mle, Ccgp, Csgp };

struct AlgorithmSpec {
    AlgorithmKind kind = AlgorithmKind::Ccgp;
    bool cooperative = true;
};

struct ExperimentPlan {
    std::string scenario_path;
    SweepVariable sweep_variable = SweepVariable::AnchorPower;
    std::vector<double> sweep_values;  // watts
    NoiseModel noise;
    int monte_carlo_runs = 1;
    std::vector<AlgorithmSpec> algorithms;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    SolverConfig solver;
    MlConfig mle;
};

/// The default power grid: logarithmic, 0.1 W to 10 W, 10 points.
inline std::vector<double> default_power_grid() {
    std::vector<double> g;
    for (int i = 0; i < 10; ++i) g.push_back(std::pow(10.0, -1.0 + 2.0 * i / 9.0));
    return g;
}

inline ExperimentPlan plan_from_json(const nlohmann::json& j) {
    ExperimentPlan p;
    p.scenario_path = j.at("scenario").get<std::string>();
    if (j.contains("sweep")) {
        const auto& sw = j["sweep"];
        const std::string var = sw.value("variable", "anchor_power");
        if (var == "anchor_power") p.sweep_variable = SweepVariable::AnchorPower;
        else if (var == "vlc_power") p.sweep_variable = SweepVariable::VlcPower;
        else throw std::invalid_argument("unknown sweep variable: " + var);
        if (sw.contains("values")) p.sweep_values = sw["values"].get<std::vector<double>>();
    }
    if (p.sweep_values.empty()) p.sweep_values = default_power_grid();
    for (double v : p.sweep_values) {
        if (!(v > 0.0)) throw std::invalid_argument("sweep values must be positive");
    }
    if (j.contains("noise")) {
        const auto& nz = j["noise"];
        const std::string kind = nz.value("kind", "gaussian");
        if (kind == "gaussian") p.noise.kind = NoiseModel::Kind::Gaussian;
        else if (kind == "exponential") p.noise.kind = NoiseModel::Kind::ExponentialSubtractive;
        else throw std::invalid_argument("unknown noise kind: " + kind);
        p.noise.scale = nz.value("scale", 1.0);
        if (nz.contains("mean")) p.noise.exponential_mean = nz["mean"].get<double>();
    }
    p.monte_carlo_runs = j.value("monte_carlo_runs", 1);
    if (p.monte_carlo_runs < 1) throw std::invalid_argument("monte_carlo_runs must be >= 1");
    for (const auto& a : j.at("algorithms")) {
        AlgorithmSpec spec;
        const std::string name = a.at("name").get<std::string>();
        if (name == "CRLB") spec.kind = AlgorithmKind::Crlb;
        else if (name == "MLE") spec.kind = AlgorithmKind::Mle;
        else if (name == "CCGP") spec.kind = AlgorithmKind::Ccgp;
        else if (name == "CSGP") spec.kind = AlgorithmKind::Csgp;
        else throw std::invalid_argument("unknown algorithm: " + name);
        spec.cooperative = a.value("cooperative", true);
        p.algorithms.push_back(spec);
    }
    p.seed = j.value("seed", std::uint64_t{1});
    p.output_dir = j.value("output_dir", "out");
    if (j.contains("solver")) {
        const auto& sv = j["solver"];
        p.solver.lambda0 = sv.value("lambda0", p.solver.lambda0);
        p.solver.beta = sv.value("beta", p.solver.beta);
        p.solver.xi = sv.value("xi", p.solver.xi);
        p.solver.delta = sv.value("delta", p.solver.delta);
        p.solver.max_iters = sv.value("max_iters", p.solver.max_iters);
        p.solver.theta_nc = sv.value("theta_nc", p.solver.theta_nc);
        p.solver.theta_c = sv.value("theta_c", p.solver.theta_c);
        p.solver.constraint_epsilon = sv.value("epsilon", p.solver.constraint_epsilon);
    }
    if (j.contains("mle")) {
        const auto& ml = j["mle"];
        p.mle.num_starts = ml.value("num_starts", p.mle.num_starts);
        p.mle.max_iters = ml.value("max_iters", p.mle.max_iters);
        p.mle.grad_tol = ml.value("grad_tol", p.mle.grad_tol);
        if (ml.contains("lower")) p.mle.lower = detail::vec_from_json(ml["lower"]);
        if (ml.contains("upper")) p.mle.upper = detail::vec_from_json(ml["upper"]);
    }
    return p;
}

inline ExperimentPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open plan file: " + path);
    nlohmann::json j;
    in >> j;
    return plan_from_json(j);
}

inline nlohmann::json plan_to_json(const ExperimentPlan& p) {
    nlohmann::json j;
    j["scenario"] = p.scenario_path;
    j["sweep"] = {{"variable", p.sweep_variable == SweepVariable::AnchorPower ? "anchor_power" : "vlc_power"},
                  {"values", p.sweep_values}};
    nlohmann::json nz;
    nz["kind"] = p.noise.kind == NoiseModel::Kind::Gaussian ? "gaussian" : "exponential";
    nz["scale"] = p.noise.scale;
    if (p.noise.exponential_mean) nz["mean"] = *p.noise.exponential_mean;
    j["noise"] = nz;
    j["monte_carlo_runs"] = p.monte_carlo_runs;
    j["algorithms"] = nlohmann::json::array();
    for (const auto& a : p.algorithms) {
        const char* name = a.kind == AlgorithmKind::Crlb ? "CRLB"
                          : a.kind == AlgorithmKind::Mle ? "MLE"
                          : a.kind == AlgorithmKind::Ccgp ? "CCGP" : "CSGP";
        j["algorithms"].push_back({{"name", name}, {"cooperative", a.cooperative}});
    }
    j["seed"] = p.seed;
    j["output_dir"] = p.output_dir;
    j["solver"] = {{"lambda0", p.solver.lambda0}, {"beta", p.solver.beta}, {"xi", p.solver.xi},
                   {"delta", p.solver.delta}, {"max_iters", p.solver.max_iters},
                   {"theta_nc", p.solver.theta_nc}, {"theta_c", p.solver.theta_c},
                   {"epsilon", p.solver.constraint_epsilon}};
    j["mle"] = {{"num_starts", p.mle.num_starts}, {"max_iters", p.mle.max_iters},
                {"grad_tol", p.mle.grad_tol}, {"lower", detail::vec_to_json(p.mle.lower)},
                {"upper", detail::vec_to_json(p.mle.upper)}};
    return j;
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_power(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

inline Scenario scenario_at_power(const Scenario& base, SweepVariable var, double power) {
    Scenario s = base;
    if (var == SweepVariable::AnchorPower) {
        for (auto& a : s.anchors) a.transmit_power = power;
    } else {
        for (auto& u : s.vlc_units) {
            for (auto& p : u.led_powers) p = power;
        }
    }
    return s;
}

inline const char* algorithm_name(AlgorithmKind k) {
    switch (k) {
        case AlgorithmKind::Crlb: return "CRLB";
        case AlgorithmKind::Mle: return "MLE";
        case AlgorithmKind::Ccgp: return "CCGP";
        case AlgorithmKind::Csgp: return "CSGP";
    }
    return "?";
}

struct RunRecord {
    std::vector<Vec3> estimates;
    std::vector<double> errors;        // per unit, meters
    std::vector<double> residual_path; // stacked step norms (solvers only)
    bool converged = false;
};

inline double position_error(const Scenario& s, int j, const Vec3& est) {
    const Vec3 truth = s.vlc_units[static_cast<std::size_t>(j)].position;
    Vec3 d = est - truth;
    if (s.dimension == 2) d.z = 0.0;
    return norm(d);
}

}  // namespace detail

struct ExperimentResult {
    std::vector<std::string> files_written;
};

/// Runs the plan: per sweep value, the CRLB in both modes and M Monte Carlo
/// replications of every enabled estimator on shared synthesized
/// measurements. Writes crlb_sweep.csv, rmse_sweep.csv, runs.csv,
/// residuals_p<power>.csv and manifest.json into the output directory. Every
/// byte of output is a pure function of (scenario, plan, seed).
inline ExperimentResult run_experiment(const ExperimentPlan& plan, int threads = 1,
                                       bool residuals_only = false) {
    const Scenario base = load_scenario(plan.scenario_path);
    {
        const auto rep = validate_scenario_data(base);
        if (!rep.ok()) throw std::invalid_argument("invalid scenario: " + rep.text());
    }
    namespace fs = std::filesystem;
    fs::create_directories(plan.output_dir);

    const int nv = base.num_units();
    const int m_runs = plan.monte_carlo_runs;

    std::string crlb_csv = "mode,power,total_m2";
    for (int u = 1; u <= nv; ++u) crlb_csv += ",per_unit_" + std::to_string(u) + "_m2";
    crlb_csv += "\n";

    std::string rmse_csv = "algorithm,cooperative,power,runs,avg_error_m,rmse_m";
    for (int u = 1; u <= nv; ++u) rmse_csv += ",avg_error_unit_" + std::to_string(u) + "_m";
    for (int u = 1; u <= nv; ++u) rmse_csv += ",rmse_unit_" + std::to_string(u) + "_m";
    rmse_csv += "\n";

    std::string runs_csv = "algorithm,cooperative,power,run,unit,est_x,est_y,est_z,error_m,converged\n";

    ExperimentResult result;
    bool any_crlb = false, any_solver = false, any_estimator = false;
    for (const auto& a : plan.algorithms) {
        any_crlb |= a.kind == AlgorithmKind::Crlb;
        any_solver |= a.kind == AlgorithmKind::Ccgp || a.kind == AlgorithmKind::Csgp;
        any_estimator |= a.kind != AlgorithmKind::Crlb;
    }

    for (std::size_t pi = 0; pi < plan.sweep_values.size(); ++pi) {
        const double power = plan.sweep_values[pi];
        const Scenario s = detail::scenario_at_power(base, plan.sweep_variable, power);

        if (any_crlb && !residuals_only) {
            for (FimMode mode : {FimMode::Noncooperative, FimMode::Cooperative}) {
                const auto rep = crlb(fisher_matrix(s, mode));
                crlb_csv += mode == FimMode::Noncooperative ? "noncooperative," : "cooperative,";
                crlb_csv += detail::fmt_power(power) + std::string(",") + detail::fmt_double(rep.total);
                for (double v : rep.per_unit) crlb_csv += "," + detail::fmt_double(v);
                crlb_csv += "\n";
            }
        }

        // Per-run measurement sets are shared across the estimators.
        struct PerAlgorithm {
            std::vector<detail::RunRecord> runs;
        };
        std::map<std::size_t, PerAlgorithm> by_alg;  // index into plan.algorithms
        for (std::size_t ai = 0; ai < plan.algorithms.size(); ++ai) {
            if (plan.algorithms[ai].kind == AlgorithmKind::Crlb) continue;
            by_alg[ai].runs.resize(static_cast<std::size_t>(m_runs));
        }
        if (!by_alg.empty()) {
            std::atomic<int> next_run{0};
            auto work = [&]() {
                for (;;) {
                    const int run = next_run.fetch_add(1);
                    if (run >= m_runs) return;
                    const std::uint64_t run_seed =
                        derive_seed(derive_seed(plan.seed, pi), static_cast<std::uint64_t>(run));
                    const MeasurementSet ms = synthesize(s, plan.noise, run_seed);
                    for (auto& [ai, slot] : by_alg) {
                        const auto& spec = plan.algorithms[ai];
                        detail::RunRecord rec;
                        if (spec.kind == AlgorithmKind::Mle) {
                            MlConfig mc = plan.mle;
                            mc.cooperative = spec.cooperative;
                            mc.seed = derive_seed(run_seed, 0x4D4C45ULL);
                            const MlEstimate est = estimate_ml(s, ms, mc);
                            rec.estimates = est.positions;
                            rec.converged = est.converged;
                        } else {
                            SolverConfig sc = plan.solver;
                            sc.algorithm = spec.kind == AlgorithmKind::Ccgp ? SolverAlgorithm::Ccgp
                                                                            : SolverAlgorithm::Csgp;
                            sc.cooperative = spec.cooperative;
                            sc.record_iterates = false;
                            const SolverTrace tr = solve(s, ms, sc);
                            rec.estimates = tr.final_positions;
                            rec.converged = tr.stop_reason == StopReason::Converged;
                            rec.residual_path.reserve(tr.residual_path.size());
                            for (double r2 : tr.residual_path) rec.residual_path.push_back(std::sqrt(r2));
                        }
                        for (int j = 0; j < nv; ++j) {
                            rec.errors.push_back(detail::position_error(s, j, rec.estimates[static_cast<std::size_t>(j)]));
                        }
                        slot.runs[static_cast<std::size_t>(run)] = std::move(rec);
                    }
                }
            };
            const int nthreads = std::max(1, std::min(threads, m_runs));
            if (nthreads == 1) {
                work();
            } else {
                std::vector<std::thread> pool;
                for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
                for (auto& th : pool) th.join();
            }
        }

        // aggregate deterministically in run order
        std::string residuals_csv;
        std::vector<std::pair<std::string, std::vector<double>>> residual_columns;
        for (const auto& [ai, slot] : by_alg) {
            const auto& spec = plan.algorithms[ai];
            const std::string name = detail::algorithm_name(spec.kind);
            const std::string coop = spec.cooperative ? "true" : "false";
            double sum_err = 0.0, sum_sq = 0.0;
            std::vector<double> unit_sum(static_cast<std::size_t>(nv), 0.0);
            std::vector<double> unit_sq(static_cast<std::size_t>(nv), 0.0);
            for (int run = 0; run < m_runs; ++run) {
                const auto& rec = slot.runs[static_cast<std::size_t>(run)];
                for (int j = 0; j < nv; ++j) {
                    const double e = rec.errors[static_cast<std::size_t>(j)];
                    sum_err += e;
                    sum_sq += e * e;
                    unit_sum[static_cast<std::size_t>(j)] += e;
                    unit_sq[static_cast<std::size_t>(j)] += e * e;
                    if (!residuals_only) {
                        const Vec3& p = rec.estimates[static_cast<std::size_t>(j)];
                        runs_csv += name + "," + coop + "," + detail::fmt_power(power) + "," +
                                    std::to_string(run + 1) + "," + std::to_string(j + 1) + "," +
                                    detail::fmt_double(p.x) + "," + detail::fmt_double(p.y) + "," +
                                    detail::fmt_double(p.z) + "," + detail::fmt_double(e) + "," +
                                    (rec.converged ? "true" : "false") + "\n";
                    }
                }
            }
            const double n_total = static_cast<double>(m_runs * nv);
            if (!residuals_only) {
                rmse_csv += name + "," + coop + "," + detail::fmt_power(power) + "," +
                            std::to_string(m_runs) + "," + detail::fmt_double(sum_err / n_total) + "," +
                            detail::fmt_double(std::sqrt(sum_sq / n_total));
                for (int j = 0; j < nv; ++j) {
                    rmse_csv += "," + detail::fmt_double(unit_sum[static_cast<std::size_t>(j)] / m_runs);
                }
                for (int j = 0; j < nv; ++j) {
                    rmse_csv += "," + detail::fmt_double(std::sqrt(unit_sq[static_cast<std::size_t>(j)] / m_runs));
                }
                rmse_csv += "\n";
            }
            if (spec.kind == AlgorithmKind::Ccgp || spec.kind == AlgorithmKind::Csgp) {
                std::size_t longest = 0;
                for (const auto& rec : slot.runs) longest = std::max(longest, rec.residual_path.size());
                std::vector<double> avg(longest, 0.0);
                for (const auto& rec : slot.runs) {
                    for (std::size_t n = 0; n < rec.residual_path.size(); ++n) avg[n] += rec.residual_path[n];
                }
                for (auto& v : avg) v /= static_cast<double>(m_runs) * nv;
                residual_columns.emplace_back(name + "_" + (spec.cooperative ? "coop" : "noncoop"), std::move(avg));
            }
        }
        if (any_solver && !residual_columns.empty()) {
            std::size_t longest = 0;
            for (const auto& [_, col] : residual_columns) longest = std::max(longest, col.size());
            residuals_csv = "iteration";
            for (const auto& [label, _] : residual_columns) residuals_csv += "," + label;
            residuals_csv += "\n";
            for (std::size_t n = 0; n < longest; ++n) {
                residuals_csv += std::to_string(n + 1);
                for (const auto& [_, col] : residual_columns) {
                    residuals_csv += "," + detail::fmt_double(n < col.size() ? col[n] : 0.0);
                }
                residuals_csv += "\n";
            }
            const std::string fname = "residuals_p" + detail::fmt_power(power) + ".csv";
            std::ofstream out(fs::path(plan.output_dir) / fname, std::ios::binary);
            out << residuals_csv;
            result.files_written.push_back(fname);
        }
    }

    auto write = [&](const std::string& fname, const std::string& content) {
        std::ofstream out(fs::path(plan.output_dir) / fname, std::ios::binary);
        out << content;
        result.files_written.push_back(fname);
    };
    if (!residuals_only) {
        if (any_crlb) write("crlb_sweep.csv", crlb_csv);
        if (any_estimator) write("rmse_sweep.csv", rmse_csv);
        if (any_estimator) write("runs.csv", runs_csv);
        nlohmann::json manifest;
        manifest["library_version"] = kVersion;
        manifest["plan"] = plan_to_json(plan);
        manifest["master_seed"] = plan.seed;
        manifest["files"] = result.files_written;
        write("manifest.json", manifest.dump(2) + "\n");
    }
    return result;
}

}  // namespace vlp
