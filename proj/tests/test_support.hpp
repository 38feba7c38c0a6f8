#pragma once

// Shared fixtures and independent oracles for the test suites. Everything in
// here deliberately re-derives values through its own arithmetic instead of
// calling the library paths under test.

#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "vlp/channel.hpp"
#include "vlp/scenario.hpp"

namespace vlptest {

inline std::string data_file(const std::string& name) {
    return std::string(VLP_DATA_DIR) + "/" + name;
}

inline vlp::Scenario load_sec6() { return vlp::load_scenario(data_file("scenario_paper_sec6.json")); }

/// Received-power oracle: a from-scratch evaluation of the Lambertian formula
/// written with explicit loops and pow, independent of lambertian_rss.
inline double alpha_oracle(const vlp::Vec3& pd_pos, const vlp::Vec3& led_pos,
                           const vlp::Vec3& n_t, const vlp::Vec3& n_r, double m, double power,
                           double area) {
    const double dx = pd_pos.x - led_pos.x;
    const double dy = pd_pos.y - led_pos.y;
    const double dz = pd_pos.z - led_pos.z;
    const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
    const double irr = dx * n_t.x + dy * n_t.y + dz * n_t.z;          // (x-y)'n_t
    const double inc = -(dx * n_r.x + dy * n_r.y + dz * n_r.z);       // (y-x)'n_r
    if (irr < 0.0 || inc < 0.0) return 0.0;
    const double pi = 3.14159265358979323846;
    return -((m + 1.0) / (2.0 * pi)) * power * area * std::pow(irr, m) * (-inc) /
           std::pow(dist, m + 3.0);
}

/// Central finite differences for scalar fields over Vec3.
inline vlp::Vec3 fd_gradient(const std::function<double(const vlp::Vec3&)>& f, const vlp::Vec3& x,
                             double h = 1e-6) {
    vlp::Vec3 g;
    for (int t = 0; t < 3; ++t) {
        vlp::Vec3 hi = x, lo = x;
        hi[t] += h;
        lo[t] -= h;
        g[t] = (f(hi) - f(lo)) / (2.0 * h);
    }
    return g;
}

inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline double rel_err(const vlp::Vec3& a, const vlp::Vec3& b) {
    const double scale = std::max(vlp::norm(a), vlp::norm(b));
    return scale == 0.0 ? 0.0 : vlp::norm(a - b) / scale;
}

/// Random but valid cooperative scenarios: ceiling anchors pointing down,
/// units with one up-tilted PD hearing all anchors and one side PD per
/// partner unit hearing that partner's LED. Used by the solver equivalence
/// and property suites.
inline vlp::Scenario random_scenario(std::uint64_t seed, int dimension) {
    vlp::SplitMix64 rng(seed);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.next_open_unit(); };

    vlp::Scenario s;
    s.dimension = dimension;
    const int n_anchors = 3 + static_cast<int>(rng.next() % 3);
    for (int l = 0; l < n_anchors; ++l) {
        vlp::LedAnchor a;
        a.position = {uni(1.0, 9.0), uni(1.0, 9.0), 5.0};
        a.orientation = {0.0, 0.0, -1.0};
        a.lambertian_order = 1.0;
        a.transmit_power = 1.0;
        s.anchors.push_back(a);
    }
    const int n_units = 2 + static_cast<int>(rng.next() % 2);
    for (int j = 0; j < n_units; ++j) {
        vlp::VlcUnit u;
        u.position = {uni(2.0, 8.0), uni(2.0, 8.0), uni(0.8, 1.8)};
        u.pd_offsets = {{0.0, -0.1, 0.0}, {0.0, 0.1, 0.0}};
        u.pd_orientations = {vlp::normalized({uni(-0.2, 0.2), uni(-0.2, 0.2), 1.0}),
                             vlp::normalized({uni(-1.0, 1.0), uni(-1.0, 1.0), 0.15})};
        u.pd_areas = {1e-4, 1e-4};
        u.noise_sigmas = {3e-9, 1.5e-9};
        u.led_offsets = {{0.1, 0.0, 0.0}};
        u.led_orientations = {vlp::normalized({uni(-1.0, 1.0), uni(-1.0, 1.0), 0.1})};
        u.led_orders = {1.0};
        u.led_powers = {1.0};
        s.vlc_units.push_back(u);
        if (dimension == 2) s.known_heights.push_back(u.position.z);
    }
    s.connectivity.anchor_links.assign(static_cast<std::size_t>(n_units), {{}, {}});
    s.connectivity.coop_links.assign(static_cast<std::size_t>(n_units), {{}, {}});
    for (int j = 0; j < n_units; ++j) {
        auto& al = s.connectivity.anchor_links[static_cast<std::size_t>(j)][0];
        for (int l = 0; l < n_anchors; ++l) al.push_back(l);
        auto& cl = s.connectivity.coop_links[static_cast<std::size_t>(j)][1];
        for (int i = 0; i < n_units; ++i) {
            if (i == j) continue;
            cl.push_back(vlp::CoopLink{i, {0}});
        }
    }
    return s;
}

}  // namespace vlptest
