#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "vlp/scenario.hpp"
#include "vlp/vec3.hpp"

using namespace vlp;

TEST_CASE("pd_position adds the PD offset", "[geometry]") {
    const Scenario s = vlptest::load_sec6();
    // paper setup: a_{j,1} = [0,-0.1,0], a_{j,2} = [0,0.1,0]
    const Vec3 p1 = pd_position(s, 0, 0, {2.0, 5.0, 1.0});
    CHECK(p1.x == 2.0);
    CHECK(p1.y == 4.9);
    CHECK(p1.z == 1.0);
    const Vec3 p2 = pd_position(s, 1, 1, {6.0, 6.0, 1.5});
    CHECK(p2.x == 6.0);
    CHECK(p2.y == 6.1);
    CHECK(p2.z == 1.5);

    Scenario zero = s;
    zero.vlc_units[0].pd_offsets[0] = {0.0, 0.0, 0.0};
    CHECK(pd_position(zero, 0, 0, {0.0, 0.0, 0.0}) == Vec3{0.0, 0.0, 0.0});

    CHECK_THROWS_AS(pd_position(s, 0, 5, {0, 0, 0}), std::out_of_range);
    CHECK_THROWS_AS(pd_position(s, 9, 0, {0, 0, 0}), std::out_of_range);
}

TEST_CASE("displacement is to minus from", "[geometry]") {
    const Vec3 d = displacement({1.0, 1.0, 5.0}, {2.0, 4.9, 1.0});
    CHECK(d.x == Catch::Approx(1.0));
    CHECK(d.y == Catch::Approx(3.9));
    CHECK(d.z == Catch::Approx(-4.0));
    const Vec3 p{3.0, -2.0, 7.0};
    CHECK(displacement(p, p) == Vec3{0.0, 0.0, 0.0});
    CHECK(displacement({0, 0, 0}, {1, 0, 0}) == Vec3{1.0, 0.0, 0.0});
}

TEST_CASE("orientations are unit-norm after construction", "[geometry]") {
    const Scenario s = vlptest::load_sec6();
    for (const auto& a : s.anchors) CHECK(is_unit(a.orientation));
    for (const auto& u : s.vlc_units) {
        for (const auto& n : u.pd_orientations) CHECK(is_unit(n));
        for (const auto& n : u.led_orientations) CHECK(is_unit(n));
    }
    // the paper's raw vectors are unnormalized; check one explicitly
    const Vec3 raw{0.3, -0.1, 1.0};
    const Vec3 n = s.vlc_units[0].pd_orientations[0];
    const Vec3 expect = raw / norm(raw);
    CHECK(norm(n - expect) < 1e-15);
}

TEST_CASE("normalization is idempotent and rejects zero vectors", "[geometry]") {
    const Vec3 v = normalized({0.2, 0.4, 1.0});
    CHECK(normalized(v) == v);  // bitwise stable on re-normalization
    CHECK_THROWS_AS(normalized({0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("scenario serialization round-trips bit-identically", "[geometry]") {
    vlp::SplitMix64 rng(20240811);
    for (int trial = 0; trial < 10; ++trial) {
        Scenario s = vlptest::random_scenario(rng.next(), trial % 2 == 0 ? 2 : 3);
        const Scenario back = scenario_from_string(scenario_to_string(s));
        REQUIRE(back.num_units() == s.num_units());
        REQUIRE(back.num_anchors() == s.num_anchors());
        CHECK(back.dimension == s.dimension);
        for (int l = 0; l < s.num_anchors(); ++l) {
            CHECK(back.anchors[l].position == s.anchors[l].position);
            CHECK(back.anchors[l].orientation == s.anchors[l].orientation);
            CHECK(back.anchors[l].transmit_power == s.anchors[l].transmit_power);
        }
        for (int j = 0; j < s.num_units(); ++j) {
            const auto& a = back.vlc_units[j];
            const auto& b = s.vlc_units[j];
            CHECK(a.position == b.position);
            CHECK(a.pd_offsets == b.pd_offsets);
            CHECK(a.pd_orientations == b.pd_orientations);
            CHECK(a.pd_areas == b.pd_areas);
            CHECK(a.led_orientations == b.led_orientations);
            CHECK(a.noise_sigmas == b.noise_sigmas);
        }
        CHECK(back.connectivity.anchor_links == s.connectivity.anchor_links);
        REQUIRE(back.connectivity.coop_links.size() == s.connectivity.coop_links.size());
        for (std::size_t j = 0; j < s.connectivity.coop_links.size(); ++j) {
            for (std::size_t k = 0; k < s.connectivity.coop_links[j].size(); ++k) {
                const auto& ca = back.connectivity.coop_links[j][k];
                const auto& cb = s.connectivity.coop_links[j][k];
                REQUIRE(ca.size() == cb.size());
                for (std::size_t t = 0; t < ca.size(); ++t) {
                    CHECK(ca[t].unit == cb[t].unit);
                    CHECK(ca[t].leds == cb[t].leds);
                }
            }
        }
        // double round trip yields the same bytes
        CHECK(scenario_to_string(back) == scenario_to_string(s));
    }
}

TEST_CASE("2-D scenarios carry known heights", "[geometry]") {
    const Scenario s = vlptest::load_sec6();
    REQUIRE(s.dimension == 2);
    REQUIRE(s.known_heights.size() == 2);
    CHECK(s.unit_height(0) == 1.0);
    CHECK(s.unit_height(1) == 1.5);
}
