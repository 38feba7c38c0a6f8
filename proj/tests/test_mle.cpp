#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "vlp/mle.hpp"

using namespace vlp;

namespace {

/// Single-unit 2-D instance: unit 1 of the bundled scenario with its three
/// anchor links and no cooperation.
Scenario single_unit_sec6() {
    Scenario s = vlptest::load_sec6();
    s.vlc_units.resize(1);
    s.known_heights.resize(1);
    s.connectivity.anchor_links.resize(1);
    s.connectivity.coop_links.resize(1);
    s.connectivity.coop_links[0][1].clear();
    return s;
}

}  // namespace

TEST_CASE("cost_h vanishes at the truth under zero noise", "[mle]") {
    const Scenario s = vlptest::load_sec6();
    const MeasurementSet ms = synthesize(s, {NoiseModel::Kind::Gaussian, 0.0, std::nullopt}, 1);
    std::vector<Vec3> truth;
    for (const auto& u : s.vlc_units) truth.push_back(u.position);
    CHECK(cost_h(s, ms, 0, 0, truth) == 0.0);
    CHECK(cost_h(s, ms, 0, 1, truth) == 0.0);
    CHECK(ml_objective(s, ms, truth) == 0.0);
}

TEST_CASE("cost_h of a single residual is its square", "[mle]") {
    const Scenario s = single_unit_sec6();
    MeasurementSet ms = synthesize(s, {NoiseModel::Kind::Gaussian, 0.0, std::nullopt}, 1);
    ms.measurements.resize(1);
    const double r = 2.5e-9;
    ms.measurements[0].value += r;
    std::vector<Vec3> truth{s.vlc_units[0].position};
    CHECK(cost_h(s, ms, 0, 0, truth) == Catch::Approx(r * r).epsilon(1e-12));
}

TEST_CASE("cost_h equals an independent term-by-term summation", "[mle]") {
    const Scenario s = vlptest::load_sec6();
    const MeasurementSet ms = synthesize(s, {NoiseModel::Kind::Gaussian, 1.0, std::nullopt}, 9);
    SplitMix64 rng(123);
    const std::vector<Vec3> x{{rng.next_open_unit() * 10.0, rng.next_open_unit() * 10.0, 1.0},
                              {rng.next_open_unit() * 10.0, rng.next_open_unit() * 10.0, 1.5}};
    for (int j = 0; j < 2; ++j) {
        for (int k = 0; k < 2; ++k) {
            double expected = 0.0;
            for (const auto& m : ms.measurements) {
                if (m.unit != j || m.pd != k) continue;
                double a;
                if (m.source.kind == SourceRef::Kind::Anchor) {
                    const auto& u = s.vlc_units[j];
                    a = vlptest::alpha_oracle(x[j] + u.pd_offsets[k], s.anchors[m.source.index].position,
                                              s.anchors[m.source.index].orientation, u.pd_orientations[k],
                                              s.anchors[m.source.index].lambertian_order,
                                              s.anchors[m.source.index].transmit_power, u.pd_areas[k]);
                } else {
                    const auto& uj = s.vlc_units[j];
                    const auto& ui = s.vlc_units[m.source.unit];
                    a = vlptest::alpha_oracle(x[j] + uj.pd_offsets[k],
                                              x[m.source.unit] + ui.led_offsets[m.source.index],
                                              ui.led_orientations[m.source.index], uj.pd_orientations[k],
                                              ui.led_orders[m.source.index], ui.led_powers[m.source.index],
                                              uj.pd_areas[k]);
                }
                expected += (m.value - a) * (m.value - a);
            }
            CHECK(vlptest::rel_err(cost_h(s, ms, j, k, x), expected) < 1e-13);
        }
    }
}

TEST_CASE("objective gradient matches finite differences", "[mle]") {
    const Scenario s = vlptest::load_sec6();
    const MeasurementSet ms = synthesize(s, {NoiseModel::Kind::Gaussian, 1.0, std::nullopt}, 21);
    SplitMix64 rng(22);
    int checked = 0;
    while (checked < 20) {
        std::vector<Vec3> x{{rng.next_open_unit() * 6.0 + 2.0, rng.next_open_unit() * 6.0 + 2.0, 1.0},
                            {rng.next_open_unit() * 6.0 + 2.0, rng.next_open_unit() * 6.0 + 2.0, 1.5}};
        std::vector<Vec3> g;
        ml_objective_gradient(s, ms, x, g);
        bool ok = true;
        for (int j = 0; j < 2 && ok; ++j) {
            const Vec3 fd = vlptest::fd_gradient(
                [&](const Vec3& p) {
                    std::vector<Vec3> xx = x;
                    xx[j] = p;
                    if (s.dimension == 2) xx[j].z = x[j].z;
                    return ml_objective(s, ms, xx);
                },
                x[j], 1e-5);
            if (norm(fd) < 1e-12) { ok = false; continue; }
            REQUIRE(vlptest::rel_err(g[j], Vec3{fd.x, fd.y, 0.0}) < 1e-5);
        }
        if (ok) ++checked;
    }
}

TEST_CASE("sigma scaling shifts the objective but not the argmin", "[mle]") {
    Scenario s = single_unit_sec6();
    const MeasurementSet ms = synthesize(s, {NoiseModel::Kind::Gaussian, 1.0, std::nullopt}, 5);
    Scenario scaled = s;
    for (auto& sg : scaled.vlc_units[0].noise_sigmas) sg *= 4.0;
    MeasurementSet ms_scaled = ms;
    for (auto& m : ms_scaled.measurements) m.sigma *= 4.0;

    // coarse grid: the argmin cell must agree
    double best = 1e300, best_s = 1e300;
    int arg = -1, arg_s = -1;
    int cell = 0;
    for (int ix = 0; ix <= 40; ++ix) {
        for (int iy = 0; iy <= 40; ++iy, ++cell) {
            const std::vector<Vec3> x{{ix * 0.25, iy * 0.25, 1.0}};
            const double f = ml_objective(s, ms, x);
            const double fs = ml_objective(scaled, ms_scaled, x);
            CHECK(vlptest::rel_err(fs, f / 16.0) < 1e-12);
            if (f < best) { best = f; arg = cell; }
            if (fs < best_s) { best_s = fs; arg_s = cell; }
        }
    }
    CHECK(arg == arg_s);
}

TEST_CASE("zero-noise multi-start recovers the truth", "[mle]") {
    const Scenario s = vlptest::load_sec6();
    const MeasurementSet ms = synthesize(s, {NoiseModel::Kind::Gaussian, 0.0, std::nullopt}, 2);
    MlConfig cfg;
    cfg.num_starts = 24;
    cfg.seed = 3;
    const MlEstimate est = estimate_ml(s, ms, cfg);
    REQUIRE(est.positions.size() == 2);
    for (int j = 0; j < 2; ++j) {
        CHECK(norm(est.positions[j] - s.vlc_units[j].position) < 1e-6);
    }
    CHECK(est.objective < 1e-12);
    // the reported objective is the cost re-evaluated at the positions
    CHECK(std::abs(est.objective - ml_objective(s, ms, est.positions)) <=
          1e-9 * std::max(1.0, std::abs(est.objective)));
}

TEST_CASE("estimate is deterministic in the seed and respects the box", "[mle]") {
    const Scenario s = vlptest::load_sec6();
    const MeasurementSet ms = synthesize(s, {NoiseModel::Kind::Gaussian, 1.0, std::nullopt}, 77);
    MlConfig cfg;
    cfg.num_starts = 16;
    cfg.seed = 5;
    const MlEstimate a = estimate_ml(s, ms, cfg);
    const MlEstimate b = estimate_ml(s, ms, cfg);
    REQUIRE(a.positions.size() == b.positions.size());
    for (std::size_t j = 0; j < a.positions.size(); ++j) CHECK(a.positions[j] == b.positions[j]);
    CHECK(a.objective == b.objective);
    CHECK(a.start_index == b.start_index);
    cfg.threads = 2;
    const MlEstimate c = estimate_ml(s, ms, cfg);
    CHECK(c.objective == a.objective);
    CHECK(c.start_index == a.start_index);
    for (const auto& p : a.positions) {
        CHECK(p.x >= cfg.lower.x);
        CHECK(p.x <= cfg.upper.x);
        CHECK(p.y >= cfg.lower.y);
        CHECK(p.y <= cfg.upper.y);
    }
}

TEST_CASE("multi-start beats a coarse grid oracle on a single-unit instance", "[mle]") {
    const Scenario s = single_unit_sec6();
    for (std::uint64_t seed : {101, 202, 303}) {
        const MeasurementSet ms = synthesize(s, {NoiseModel::Kind::Gaussian, 1.0, std::nullopt}, seed);
        MlConfig cfg;
        cfg.num_starts = 40;
        cfg.seed = seed;
        const MlEstimate est = estimate_ml(s, ms, cfg);
        double grid_best = 1e300;
        for (int ix = 0; ix <= 100; ++ix) {
            for (int iy = 0; iy <= 100; ++iy) {
                const std::vector<Vec3> x{{ix * 0.1, iy * 0.1, s.known_heights[0]}};
                grid_best = std::min(grid_best, ml_objective(s, ms, x));
            }
        }
        CHECK(est.objective <= grid_best + 1e-12);
    }
}

TEST_CASE("config validation rejects degenerate boxes", "[mle]") {
    const Scenario s = vlptest::load_sec6();
    const MeasurementSet ms = synthesize(s, {NoiseModel::Kind::Gaussian, 0.0, std::nullopt}, 1);
    MlConfig cfg;
    cfg.num_starts = 0;
    CHECK_THROWS_AS(estimate_ml(s, ms, cfg), std::invalid_argument);
    cfg.num_starts = 1;
    cfg.lower = cfg.upper = Vec3{1, 1, 1};
    CHECK_THROWS_AS(estimate_ml(s, ms, cfg), std::invalid_argument);
}
