#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "vlp/bounds.hpp"

using namespace vlp;

TEST_CASE("anchor gradient matches central finite differences", "[bounds]") {
    const Scenario s = vlptest::load_sec6();
    SplitMix64 rng(17);
    int tested = 0;
    while (tested < 50) {
        const Vec3 x{rng.next_open_unit() * 8.0 + 1.0, rng.next_open_unit() * 8.0 + 1.0,
                     rng.next_open_unit() * 2.0 + 0.3};
        const int l = static_cast<int>(rng.next() % 3);
        if (alpha_anchor(s, 0, 0, l, x) <= 1e-12) continue;
        const Vec3 g = grad_alpha_anchor(s, 0, 0, l, x);
        const Vec3 fd = vlptest::fd_gradient(
            [&](const Vec3& p) { return alpha_anchor(s, 0, 0, l, p); }, x);
        CHECK(vlptest::rel_err(g, fd) < 1e-5);
        ++tested;
    }
}

TEST_CASE("coop gradients match finite differences on both arguments", "[bounds]") {
    const Scenario s = vlptest::load_sec6();
    SplitMix64 rng(18);
    int tested = 0;
    while (tested < 50) {
        const Vec3 xj{rng.next_open_unit() * 8.0 + 1.0, rng.next_open_unit() * 8.0 + 1.0,
                      rng.next_open_unit() * 2.0 + 0.3};
        const Vec3 xi{rng.next_open_unit() * 8.0 + 1.0, rng.next_open_unit() * 8.0 + 1.0,
                      rng.next_open_unit() * 2.0 + 0.3};
        if (alpha_coop(s, 0, 1, 1, 0, xj, xi) <= 1e-12) continue;
        const auto [gj, gi] = grad_alpha_coop(s, 0, 1, 1, 0, xj, xi);
        const Vec3 fd_j = vlptest::fd_gradient(
            [&](const Vec3& p) { return alpha_coop(s, 0, 1, 1, 0, p, xi); }, xj);
        const Vec3 fd_i = vlptest::fd_gradient(
            [&](const Vec3& p) { return alpha_coop(s, 0, 1, 1, 0, xj, p); }, xi);
        CHECK(vlptest::rel_err(gj, fd_j) < 1e-5);
        CHECK(vlptest::rel_err(gi, fd_i) < 1e-5);
        CHECK(norm(gi + gj) < 1e-12 * norm(gj));  // exact negation
        ++tested;
    }
}

TEST_CASE("gradient errors on FOV-broken links", "[bounds]") {
    const Scenario s = vlptest::load_sec6();
    // directly above anchor 1 but with the PD looking away
    Scenario flipped = s;
    flipped.vlc_units[0].pd_orientations[0] = {0.0, 0.0, -1.0};
    CHECK_THROWS_AS(grad_alpha_anchor(flipped, 0, 0, 0, flipped.vlc_units[0].position),
                    std::domain_error);
}

TEST_CASE("lateral symmetry below a perpendicular anchor", "[bounds]") {
    Scenario s = vlptest::load_sec6();
    s.vlc_units[0].pd_orientations[0] = {0.0, 0.0, 1.0};
    s.vlc_units[0].pd_offsets[0] = {0.0, 0.0, 0.0};
    const Vec3 below{s.anchors[0].position.x, s.anchors[0].position.y, 1.0};
    const Vec3 g = grad_alpha_anchor(s, 0, 0, 0, below);
    CHECK(std::abs(g.x) < 1e-18);
    CHECK(std::abs(g.y) < 1e-18);
    CHECK(std::abs(g.z) > 0.0);
}

TEST_CASE("gradient scales linearly in transmit power", "[bounds]") {
    Scenario s = vlptest::load_sec6();
    const Vec3 x = s.vlc_units[0].position;
    const Vec3 g1 = grad_alpha_anchor(s, 0, 0, 0, x);
    s.anchors[0].transmit_power *= 5.0;
    const Vec3 g5 = grad_alpha_anchor(s, 0, 0, 0, x);
    CHECK(vlptest::rel_err(g5, 5.0 * g1) < 1e-15);
}

TEST_CASE("FIM is symmetric PSD and cooperation only adds information", "[bounds]") {
    const Scenario s = vlptest::load_sec6();
    const FisherMatrix jc = fisher_matrix(s, FimMode::Cooperative);
    const FisherMatrix jn = fisher_matrix(s, FimMode::Noncooperative);
    REQUIRE(jc.matrix.rows() == 4);  // 2-D scenario, two units
    CHECK((jc.matrix - jc.matrix.transpose()).norm() == 0.0);

    const Eigen::MatrixXd diff = jc.matrix - jn.matrix;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
    CHECK(es.eigenvalues()[0] >= -1e-10 * diff.norm());

    const CrlbReport rc = crlb(jc);
    const CrlbReport rn = crlb(jn);
    CHECK(rc.total <= rn.total);
    REQUIRE(rc.per_unit.size() == 2);
    CHECK(rc.per_unit[0] + rc.per_unit[1] == Catch::Approx(rc.total).epsilon(1e-12));
}

TEST_CASE("3-D FIM uses the full parameterization", "[bounds]") {
    Scenario s = vlptest::load_sec6();
    s.dimension = 3;
    const FisherMatrix j = fisher_matrix(s, FimMode::Cooperative);
    CHECK(j.matrix.rows() == 6);
    const CrlbReport r = crlb(j);
    CHECK(r.total > 0.0);
}

TEST_CASE("sigma scaling moves the FIM and CRLB quadratically", "[bounds]") {
    Scenario s = vlptest::load_sec6();
    const FisherMatrix j1 = fisher_matrix(s, FimMode::Cooperative);
    const double t1 = crlb(j1).total;
    for (auto& u : s.vlc_units) {
        for (auto& sg : u.noise_sigmas) sg *= 3.0;
    }
    const FisherMatrix j3 = fisher_matrix(s, FimMode::Cooperative);
    CHECK((j3.matrix * 9.0 - j1.matrix).norm() < 1e-12 * j1.matrix.norm());
    CHECK(vlptest::rel_err(crlb(j3).total, 9.0 * t1) < 1e-12);
}

TEST_CASE("CRLB decreases monotonically over the anchor power sweep", "[bounds]") {
    Scenario s = vlptest::load_sec6();
    s.dimension = 3;
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10; ++i) {
        const double p = std::pow(10.0, -1.0 + 2.0 * i / 9.0);
        for (auto& a : s.anchors) a.transmit_power = p;
        const double total = crlb(fisher_matrix(s, FimMode::Noncooperative)).total;
        CHECK(total < prev);
        prev = total;
    }
}

TEST_CASE("singular configurations raise an unlocalizable error", "[bounds]") {
    Scenario s = vlptest::load_sec6();
    s.dimension = 3;
    // strip unit 1 to a single anchor link and no cooperation: one
    // measurement cannot pin three coordinates
    s.connectivity.anchor_links[0][0] = {0};
    s.connectivity.coop_links[0][1].clear();
    s.connectivity.coop_links[1][1].clear();
    const FisherMatrix j = fisher_matrix(s, FimMode::Cooperative);
    CHECK_THROWS_AS(crlb(j), UnlocalizableError);
    try {
        crlb(j);
    } catch (const UnlocalizableError& e) {
        CHECK(!e.null_directions.empty());
        CHECK(std::string(e.what()).find("deficient") != std::string::npos);
    }
}

TEST_CASE("per-link FD property over random FOV-valid configurations", "[bounds]") {
    const Scenario s = vlptest::load_sec6();
    SplitMix64 rng(2024);
    int done = 0;
    while (done < 100) {
        const Vec3 xj{rng.next_open_unit() * 9.0 + 0.5, rng.next_open_unit() * 9.0 + 0.5,
                      rng.next_open_unit() * 2.0 + 0.3};
        const int l = static_cast<int>(rng.next() % s.num_anchors());
        Scenario one = s;
        one.connectivity.anchor_links[0][0] = {l};
        if (alpha_anchor(one, 0, 0, l, xj) <= 1e-10) continue;
        const Vec3 g = grad_alpha_anchor(one, 0, 0, l, xj);
        const Vec3 fd =
            vlptest::fd_gradient([&](const Vec3& p) { return alpha_anchor(one, 0, 0, l, p); }, xj);
        REQUIRE(vlptest::rel_err(g, fd) < 1e-5);
        ++done;
    }
}
