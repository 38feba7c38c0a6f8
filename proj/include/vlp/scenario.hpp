#pragma once

#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlp/vec3.hpp"

namespace vlp {

/// Fixed LED transmitter at a known position ("LED on the ceiling").
struct LedAnchor {
    Vec3 position;            // meters
    Vec3 orientation;         // unit vector
    double lambertian_order = 1.0;
    double transmit_power = 1.0;  // watts
};

/// Mobile node carrying PDs (for reception) and LEDs (for cooperation).
/// All per-PD sequences share length K_i and all per-LED sequences share
/// length L_i.
struct VlcUnit {
    Vec3 position;                       // ground truth in simulation
    std::vector<Vec3> pd_offsets;        // PD position = unit position + offset
    std::vector<Vec3> pd_orientations;   // unit vectors
    std::vector<double> pd_areas;        // m^2
    std::vector<Vec3> led_offsets;
    std::vector<Vec3> led_orientations;  // unit vectors
    std::vector<double> led_orders;
    std::vector<double> led_powers;      // watts
    std::vector<double> noise_sigmas;    // watts, one per PD

    int num_pds() const { return static_cast<int>(pd_offsets.size()); }
    int num_leds() const { return static_cast<int>(led_offsets.size()); }
};

/// One cooperative link group: the LEDs of `unit` heard by some PD.
struct CoopLink {
    int unit = 0;            // source VLC unit index
    std::vector<int> leds;   // ascending LED indices at that unit
};

/// Connectivity sets. anchor_links[j][k] lists the ceiling LEDs heard by
/// PD k of unit j (ascending); coop_links[j][k] lists per-partner LED sets
/// (ascending partner index, never the unit itself).
struct Connectivity {
    std::vector<std::vector<std::vector<int>>> anchor_links;
    std::vector<std::vector<std::vector<CoopLink>>> coop_links;
};

/// Full network description.
struct Scenario {
    std::vector<LedAnchor> anchors;
    std::vector<VlcUnit> vlc_units;
    Connectivity connectivity;
    int dimension = 3;  // localization dimension d: 2 or 3
    std::vector<double> known_heights;  // unit z, required when dimension == 2
    std::string notes;

    int num_units() const { return static_cast<int>(vlc_units.size()); }
    int num_anchors() const { return static_cast<int>(anchors.size()); }

    /// Unit z coordinate used to lift planar points in 2-D mode.
    double unit_height(int j) const {
        return dimension == 2 ? known_heights.at(static_cast<std::size_t>(j))
                              : vlc_units.at(static_cast<std::size_t>(j)).position.z;
    }
};

inline void check_unit_index(const Scenario& s, int j) {
    if (j < 0 || j >= s.num_units()) throw std::out_of_range("vlc unit index out of range");
}

inline void check_pd_index(const Scenario& s, int j, int k) {
    check_unit_index(s, j);
    if (k < 0 || k >= s.vlc_units[static_cast<std::size_t>(j)].num_pds())
        throw std::out_of_range("pd index out of range");
}

inline void check_anchor_index(const Scenario& s, int l) {
    if (l < 0 || l >= s.num_anchors()) throw std::out_of_range("anchor index out of range");
}

inline void check_led_index(const Scenario& s, int i, int l) {
    check_unit_index(s, i);
    if (l < 0 || l >= s.vlc_units[static_cast<std::size_t>(i)].num_leds())
        throw std::out_of_range("led index out of range");
}

/// Location of PD k at unit j when the unit sits at x_j.
inline Vec3 pd_position(const Scenario& s, int j, int k, const Vec3& x_j) {
    check_pd_index(s, j, k);
    return x_j + s.vlc_units[static_cast<std::size_t>(j)].pd_offsets[static_cast<std::size_t>(k)];
}

// ---------------------------------------------------------------------------
// Serialization. Indices are 1-based in files, 0-based in memory. Orientation
// vectors are normalized on load.
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json vec_to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline Vec3 vec_from_json(const nlohmann::json& a) {
    if (!a.is_array() || a.size() != 3) throw std::invalid_argument("expected a 3-element array");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

inline std::vector<Vec3> vecs_from_json(const nlohmann::json& a) {
    std::vector<Vec3> out;
    for (const auto& e : a) out.push_back(vec_from_json(e));
    return out;
}

inline nlohmann::json vecs_to_json(const std::vector<Vec3>& vs) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& v : vs) a.push_back(vec_to_json(v));
    return a;
}

}  // namespace detail

inline nlohmann::json scenario_to_json(const Scenario& s) {
    using nlohmann::json;
    json j;
    j["dimension"] = s.dimension;
    if (!s.known_heights.empty()) j["known_heights"] = s.known_heights;
    if (!s.notes.empty()) j["notes"] = s.notes;
    j["anchors"] = json::array();
    for (const auto& a : s.anchors) {
        j["anchors"].push_back({{"position", detail::vec_to_json(a.position)},
                                {"orientation", detail::vec_to_json(a.orientation)},
                                {"lambertian_order", a.lambertian_order},
                                {"transmit_power", a.transmit_power}});
    }
    j["vlc_units"] = json::array();
    for (const auto& u : s.vlc_units) {
        j["vlc_units"].push_back({{"position", detail::vec_to_json(u.position)},
                                  {"pd_offsets", detail::vecs_to_json(u.pd_offsets)},
                                  {"pd_orientations", detail::vecs_to_json(u.pd_orientations)},
                                  {"pd_areas", u.pd_areas},
                                  {"led_offsets", detail::vecs_to_json(u.led_offsets)},
                                  {"led_orientations", detail::vecs_to_json(u.led_orientations)},
                                  {"led_orders", u.led_orders},
                                  {"led_powers", u.led_powers},
                                  {"noise_sigmas", u.noise_sigmas}});
    }
    nlohmann::json anchor_links = json::array();
    nlohmann::json coop_links = json::array();
    for (std::size_t ju = 0; ju < s.connectivity.anchor_links.size(); ++ju) {
        for (std::size_t k = 0; k < s.connectivity.anchor_links[ju].size(); ++k) {
            const auto& ls = s.connectivity.anchor_links[ju][k];
            if (ls.empty()) continue;
            std::vector<int> ones;
            for (int l : ls) ones.push_back(l + 1);
            anchor_links.push_back({{"vlc", static_cast<int>(ju) + 1},
                                    {"pd", static_cast<int>(k) + 1},
                                    {"anchors", ones}});
        }
    }
    for (std::size_t ju = 0; ju < s.connectivity.coop_links.size(); ++ju) {
        for (std::size_t k = 0; k < s.connectivity.coop_links[ju].size(); ++k) {
            for (const auto& cl : s.connectivity.coop_links[ju][k]) {
                if (cl.leds.empty()) continue;
                std::vector<int> ones;
                for (int l : cl.leds) ones.push_back(l + 1);
                coop_links.push_back({{"vlc", static_cast<int>(ju) + 1},
                                      {"pd", static_cast<int>(k) + 1},
                                      {"partner", cl.unit + 1},
                                      {"leds", ones}});
            }
        }
    }
    j["connectivity"] = {{"anchor_links", anchor_links}, {"coop_links", coop_links}};
    return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    s.dimension = j.value("dimension", 3);
    if (j.contains("known_heights")) s.known_heights = j["known_heights"].get<std::vector<double>>();
    if (j.contains("notes")) s.notes = j["notes"].get<std::string>();
    for (const auto& a : j.at("anchors")) {
        LedAnchor an;
        an.position = detail::vec_from_json(a.at("position"));
        an.orientation = normalized(detail::vec_from_json(a.at("orientation")));
        an.lambertian_order = a.at("lambertian_order").get<double>();
        an.transmit_power = a.at("transmit_power").get<double>();
        s.anchors.push_back(an);
    }
    for (const auto& u : j.at("vlc_units")) {
        VlcUnit vu;
        vu.position = detail::vec_from_json(u.at("position"));
        vu.pd_offsets = detail::vecs_from_json(u.at("pd_offsets"));
        for (const auto& n : u.at("pd_orientations")) vu.pd_orientations.push_back(normalized(detail::vec_from_json(n)));
        vu.pd_areas = u.at("pd_areas").get<std::vector<double>>();
        vu.led_offsets = detail::vecs_from_json(u.at("led_offsets"));
        for (const auto& n : u.at("led_orientations")) vu.led_orientations.push_back(normalized(detail::vec_from_json(n)));
        vu.led_orders = u.at("led_orders").get<std::vector<double>>();
        vu.led_powers = u.at("led_powers").get<std::vector<double>>();
        vu.noise_sigmas = u.at("noise_sigmas").get<std::vector<double>>();
        s.vlc_units.push_back(vu);
    }
    const int nv = s.num_units();
    s.connectivity.anchor_links.assign(static_cast<std::size_t>(nv), {});
    s.connectivity.coop_links.assign(static_cast<std::size_t>(nv), {});
    for (int ju = 0; ju < nv; ++ju) {
        const auto kj = static_cast<std::size_t>(s.vlc_units[static_cast<std::size_t>(ju)].num_pds());
        s.connectivity.anchor_links[static_cast<std::size_t>(ju)].assign(kj, {});
        s.connectivity.coop_links[static_cast<std::size_t>(ju)].assign(kj, {});
    }
    const auto& conn = j.at("connectivity");
    if (conn.contains("anchor_links")) {
        for (const auto& e : conn["anchor_links"]) {
            const int ju = e.at("vlc").get<int>() - 1;
            const int k = e.at("pd").get<int>() - 1;
            auto& slot = s.connectivity.anchor_links.at(static_cast<std::size_t>(ju)).at(static_cast<std::size_t>(k));
            for (int l : e.at("anchors").get<std::vector<int>>()) slot.push_back(l - 1);
        }
    }
    if (conn.contains("coop_links")) {
        for (const auto& e : conn["coop_links"]) {
            const int ju = e.at("vlc").get<int>() - 1;
            const int k = e.at("pd").get<int>() - 1;
            CoopLink cl;
            cl.unit = e.at("partner").get<int>() - 1;
            for (int l : e.at("leds").get<std::vector<int>>()) cl.leds.push_back(l - 1);
            s.connectivity.coop_links.at(static_cast<std::size_t>(ju)).at(static_cast<std::size_t>(k)).push_back(cl);
        }
    }
    return s;
}

inline std::string scenario_to_string(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

inline Scenario scenario_from_string(const std::string& text) {
    return scenario_from_json(nlohmann::json::parse(text));
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    nlohmann::json j;
    in >> j;
    return scenario_from_json(j);
}

inline void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scenario file: " + path);
    out << scenario_to_string(s);
}

}  // namespace vlp
