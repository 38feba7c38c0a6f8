#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "vlp/scenario.hpp"
#include "vlp/vec3.hpp"

namespace vlp {

// ---------------------------------------------------------------------------
// Portable seeded randomness. Every measurement draws from its own splitmix64
// stream keyed by (seed, stream index), so synthesis is pure, order-free and
// reproducible across platforms. Stream index = position of the measurement
// in the canonical ordering (ascending unit, pd, anchors by led, coop by
// partner then led).
// ---------------------------------------------------------------------------

struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in (0, 1].
    double next_open_unit() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (platform-independent, unlike
    /// std::normal_distribution).
    double next_gaussian() {
        const double u1 = next_open_unit();
        const double u2 = next_open_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Exponential with the given mean, by inverse CDF.
    double next_exponential(double mean) {
        return -mean * std::log(next_open_unit());
    }
};

/// Derives a child seed from (seed, index); also used for per-run and
/// per-start seeds in the Monte Carlo layers.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 g(seed ^ (0xA5A5A5A5DEADBEEFULL + index * 0x9E3779B97F4A7C15ULL));
    return g.next();
}

// ---------------------------------------------------------------------------
// Lambertian received-power model
// ---------------------------------------------------------------------------

/// Received power for a source->receiver displacement d (from LED to PD),
/// transmitter orientation n_t, receiver orientation n_r, Lambertian order m,
/// transmit power and PD area. Returns 0 outside the 90-degree field of view
/// of either device.
inline double lambertian_rss(const Vec3& d, const Vec3& n_t, const Vec3& n_r,
                             double order, double tx_power, double pd_area) {
    const double r2 = norm_sq(d);
    if (r2 == 0.0) return 0.0;
    const double proj_tx = dot(d, n_t);    // irradiation-side projection
    const double proj_rx = -dot(d, n_r);   // incidence-side projection
    if (proj_tx < 0.0 || proj_rx < 0.0) return 0.0;
    const double r = std::sqrt(r2);
    return (order + 1.0) / (2.0 * std::numbers::pi) * tx_power * pd_area *
           std::pow(proj_tx, order) * proj_rx / std::pow(r, order + 3.0);
}

/// True if both field-of-view projections are nonnegative for displacement d.
inline bool fov_ok(const Vec3& d, const Vec3& n_t, const Vec3& n_r) {
    return dot(d, n_t) >= 0.0 && -dot(d, n_r) >= 0.0;
}

/// Noiseless RSS at PD k of unit j (placed at x_j) from ceiling anchor l.
inline double alpha_anchor(const Scenario& s, int j, int k, int l, const Vec3& x_j) {
    check_pd_index(s, j, k);
    check_anchor_index(s, l);
    const auto& u = s.vlc_units[static_cast<std::size_t>(j)];
    const auto& a = s.anchors[static_cast<std::size_t>(l)];
    const Vec3 d = displacement(a.position, x_j + u.pd_offsets[static_cast<std::size_t>(k)]);
    return lambertian_rss(d, a.orientation, u.pd_orientations[static_cast<std::size_t>(k)],
                          a.lambertian_order, a.transmit_power, u.pd_areas[static_cast<std::size_t>(k)]);
}

/// Noiseless RSS at PD k of unit j (at x_j) from LED l of unit i (at x_i).
inline double alpha_coop(const Scenario& s, int j, int k, int i, int l,
                         const Vec3& x_j, const Vec3& x_i) {
    check_pd_index(s, j, k);
    check_led_index(s, i, l);
    if (i == j) throw std::invalid_argument("cooperative link cannot be a self-link");
    const auto& uj = s.vlc_units[static_cast<std::size_t>(j)];
    const auto& ui = s.vlc_units[static_cast<std::size_t>(i)];
    const Vec3 d = displacement(x_i + ui.led_offsets[static_cast<std::size_t>(l)],
                                x_j + uj.pd_offsets[static_cast<std::size_t>(k)]);
    return lambertian_rss(d, ui.led_orientations[static_cast<std::size_t>(l)],
                          uj.pd_orientations[static_cast<std::size_t>(k)],
                          ui.led_orders[static_cast<std::size_t>(l)],
                          ui.led_powers[static_cast<std::size_t>(l)],
                          uj.pd_areas[static_cast<std::size_t>(k)]);
}

// ---------------------------------------------------------------------------
// Measurement synthesis
// ---------------------------------------------------------------------------

struct NoiseModel {
    enum class Kind { Gaussian, ExponentialSubtractive };
    Kind kind = Kind::Gaussian;
    /// Multiplies each PD's configured sigma. Gaussian: std dev = scale*sigma.
    /// Exponential: mean = scale*sigma unless a fixed mean is given.
    double scale = 1.0;
    std::optional<double> exponential_mean;  // absolute mean, overrides scale
};

struct SourceRef {
    enum class Kind { Anchor, Coop };
    Kind kind = Kind::Anchor;
    int unit = -1;  // source VLC unit for Coop, -1 for Anchor
    int index = 0;  // anchor index, or LED index at the source unit
};

struct RssMeasurement {
    int unit = 0;  // receiving VLC unit j
    int pd = 0;    // receiving PD k
    SourceRef source;
    double value = 0.0;  // watts
    double sigma = 0.0;  // watts
};

/// A connectivity-declared link omitted from synthesis because the true
/// geometry violates a field of view.
struct BrokenLink {
    int unit = 0;
    int pd = 0;
    SourceRef source;
};

struct MeasurementSet {
    std::vector<RssMeasurement> measurements;  // canonical order
    NoiseModel noise_model;
    std::uint64_t rng_seed = 0;
    std::vector<BrokenLink> broken_links;
};

/// Synthesizes one measurement per connectivity-declared link at the true
/// positions; FOV-broken links are omitted and recorded. Deterministic in
/// seed and independent across measurement indices.
inline MeasurementSet synthesize(const Scenario& s, const NoiseModel& model, std::uint64_t seed) {
    MeasurementSet out;
    out.noise_model = model;
    out.rng_seed = seed;
    std::uint64_t stream = 0;
    for (int j = 0; j < s.num_units(); ++j) {
        const auto& u = s.vlc_units[static_cast<std::size_t>(j)];
        for (int k = 0; k < u.num_pds(); ++k) {
            const double sigma = u.noise_sigmas[static_cast<std::size_t>(k)];
            auto draw = [&](double alpha) {
                SplitMix64 g(derive_seed(seed, stream));
                ++stream;
                if (model.kind == NoiseModel::Kind::Gaussian) {
                    return alpha + model.scale * sigma * g.next_gaussian();
                }
                const double mean = model.exponential_mean ? *model.exponential_mean
                                                           : model.scale * sigma;
                return alpha - g.next_exponential(mean);
            };
            for (int l : s.connectivity.anchor_links[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]) {
                const SourceRef src{SourceRef::Kind::Anchor, -1, l};
                const auto& a = s.anchors[static_cast<std::size_t>(l)];
                const Vec3 d = displacement(a.position, pd_position(s, j, k, u.position));
                if (!fov_ok(d, a.orientation, u.pd_orientations[static_cast<std::size_t>(k)])) {
                    out.broken_links.push_back({j, k, src});
                    ++stream;  // keep stream indices aligned with connectivity
                    continue;
                }
                const double alpha = alpha_anchor(s, j, k, l, u.position);
                out.measurements.push_back({j, k, src, draw(alpha), sigma});
            }
            for (const auto& cl : s.connectivity.coop_links[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]) {
                const auto& ui = s.vlc_units[static_cast<std::size_t>(cl.unit)];
                for (int l : cl.leds) {
                    const SourceRef src{SourceRef::Kind::Coop, cl.unit, l};
                    const Vec3 d = displacement(ui.position + ui.led_offsets[static_cast<std::size_t>(l)],
                                                pd_position(s, j, k, u.position));
                    if (!fov_ok(d, ui.led_orientations[static_cast<std::size_t>(l)],
                                u.pd_orientations[static_cast<std::size_t>(k)])) {
                        out.broken_links.push_back({j, k, src});
                        ++stream;
                        continue;
                    }
                    const double alpha = alpha_coop(s, j, k, cl.unit, l, u.position, ui.position);
                    out.measurements.push_back({j, k, src, draw(alpha), sigma});
                }
            }
        }
    }
    return out;
}

/// CSV export with columns j,k,source_kind,i,l,value,sigma (1-based indices).
inline std::string measurements_to_csv(const MeasurementSet& ms) {
    std::string out = "j,k,source_kind,i,l,value,sigma\n";
    char buf[128];
    for (const auto& m : ms.measurements) {
        const bool coop = m.source.kind == SourceRef::Kind::Coop;
        std::snprintf(buf, sizeof(buf), "%d,%d,%s,%d,%d,%.17g,%.17g\n", m.unit + 1, m.pd + 1,
                      coop ? "coop" : "anchor", coop ? m.source.unit + 1 : 0, m.source.index + 1,
                      m.value, m.sigma);
        out += buf;
    }
    return out;
}

}  // namespace vlp
