#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vlp/channel.hpp"
#include "vlp/scenario.hpp"

namespace vlp {

namespace detail {

/// Gradient of the Lambertian RSS with respect to the receiver-side position
/// (the PD end of d). Written by the product rule so the irradiation
/// projection is never divided by; equivalent to factoring it out as in the
/// closed-form partials.
inline Vec3 lambertian_rss_grad(const Vec3& d, const Vec3& n_t, const Vec3& n_r,
                                double order, double tx_power, double pd_area) {
    const double r2 = norm_sq(d);
    const double r = std::sqrt(r2);
    const double s = dot(d, n_t);
    const double w = -dot(d, n_r);
    if (s < 0.0 || w < 0.0 || r2 == 0.0) {
        throw std::domain_error("link outside field of view: gradient undefined");
    }
    const double c = (order + 1.0) / (2.0 * std::numbers::pi) * tx_power * pd_area /
                     std::pow(r, order + 3.0);
    const double sm1 = std::pow(s, order - 1.0);
    const double sm = sm1 * s;
    return c * (order * sm1 * w * n_t - sm * n_r - (order + 3.0) * sm * w / r2 * d);
}

}  // namespace detail

/// d(alpha_anchor)/d(x_j); zero for coordinates of other units. Throws when
/// the link violates a field of view (no information flows, gradient of the
/// active branch is undefined).
inline Vec3 grad_alpha_anchor(const Scenario& s, int j, int k, int l, const Vec3& x_j) {
    check_pd_index(s, j, k);
    check_anchor_index(s, l);
    const auto& u = s.vlc_units[static_cast<std::size_t>(j)];
    const auto& a = s.anchors[static_cast<std::size_t>(l)];
    const Vec3 d = displacement(a.position, x_j + u.pd_offsets[static_cast<std::size_t>(k)]);
    return detail::lambertian_rss_grad(d, a.orientation,
                                       u.pd_orientations[static_cast<std::size_t>(k)],
                                       a.lambertian_order, a.transmit_power,
                                       u.pd_areas[static_cast<std::size_t>(k)]);
}

/// d(alpha_coop)/d(x_j) and d(alpha_coop)/d(x_i). The x_i gradient is the
/// negation of the x_j gradient: the displacement depends on x_j - x_i.
inline std::pair<Vec3, Vec3> grad_alpha_coop(const Scenario& s, int j, int k, int i, int l,
                                             const Vec3& x_j, const Vec3& x_i) {
    check_pd_index(s, j, k);
    check_led_index(s, i, l);
    if (i == j) throw std::invalid_argument("cooperative link cannot be a self-link");
    const auto& uj = s.vlc_units[static_cast<std::size_t>(j)];
    const auto& ui = s.vlc_units[static_cast<std::size_t>(i)];
    const Vec3 d = displacement(x_i + ui.led_offsets[static_cast<std::size_t>(l)],
                                x_j + uj.pd_offsets[static_cast<std::size_t>(k)]);
    const Vec3 g = detail::lambertian_rss_grad(d, ui.led_orientations[static_cast<std::size_t>(l)],
                                               uj.pd_orientations[static_cast<std::size_t>(k)],
                                               ui.led_orders[static_cast<std::size_t>(l)],
                                               ui.led_powers[static_cast<std::size_t>(l)],
                                               uj.pd_areas[static_cast<std::size_t>(k)]);
    return {g, -g};
}

enum class FimMode { Noncooperative, Cooperative };

/// Fisher information for the stacked unit positions, d*N_V square where d is
/// the localization dimension (2-D mode drops the z rows of every per-link
/// gradient). Exactly symmetric by construction (sum of outer products).
struct FisherMatrix {
    Eigen::MatrixXd matrix;
    FimMode mode = FimMode::Cooperative;
    int dim = 3;
};

struct CrlbReport {
    double total = 0.0;              // trace of the FIM inverse, m^2
    std::vector<double> per_unit;    // block traces, m^2
    FimMode mode = FimMode::Cooperative;
};

/// Thrown when the FIM is too ill-conditioned to invert; names the deficient
/// directions (eigenvectors of the near-null space).
class UnlocalizableError : public std::runtime_error {
   public:
    UnlocalizableError(std::string msg, std::vector<Eigen::VectorXd> null_dirs)
        : std::runtime_error(std::move(msg)), null_directions(std::move(null_dirs)) {}
    std::vector<Eigen::VectorXd> null_directions;
};

/// FIM evaluated at the scenario's true positions. Links broken by FOV
/// contribute nothing.
inline FisherMatrix fisher_matrix(const Scenario& s, FimMode mode) {
    const int dim = s.dimension;
    const int nv = s.num_units();
    FisherMatrix out;
    out.mode = mode;
    out.dim = dim;
    out.matrix = Eigen::MatrixXd::Zero(dim * nv, dim * nv);

    auto add_outer = [&](const Eigen::VectorXd& g, double sigma) {
        out.matrix.noalias() += g * g.transpose() / (sigma * sigma);
    };

    for (int j = 0; j < nv; ++j) {
        const auto& u = s.vlc_units[static_cast<std::size_t>(j)];
        for (int k = 0; k < u.num_pds(); ++k) {
            const double sigma = u.noise_sigmas[static_cast<std::size_t>(k)];
            for (int l : s.connectivity.anchor_links[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]) {
                const auto& a = s.anchors[static_cast<std::size_t>(l)];
                const Vec3 d = displacement(a.position, pd_position(s, j, k, u.position));
                if (!fov_ok(d, a.orientation, u.pd_orientations[static_cast<std::size_t>(k)])) continue;
                const Vec3 g = grad_alpha_anchor(s, j, k, l, u.position);
                Eigen::VectorXd full = Eigen::VectorXd::Zero(dim * nv);
                for (int t = 0; t < dim; ++t) full[dim * j + t] = g[t];
                add_outer(full, sigma);
            }
            if (mode == FimMode::Noncooperative) continue;
            for (const auto& cl : s.connectivity.coop_links[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]) {
                const auto& ui = s.vlc_units[static_cast<std::size_t>(cl.unit)];
                for (int l : cl.leds) {
                    const Vec3 d = displacement(ui.position + ui.led_offsets[static_cast<std::size_t>(l)],
                                                pd_position(s, j, k, u.position));
                    if (!fov_ok(d, ui.led_orientations[static_cast<std::size_t>(l)],
                                u.pd_orientations[static_cast<std::size_t>(k)])) continue;
                    const auto [gj, gi] = grad_alpha_coop(s, j, k, cl.unit, l, u.position, ui.position);
                    Eigen::VectorXd full = Eigen::VectorXd::Zero(dim * nv);
                    for (int t = 0; t < dim; ++t) {
                        full[dim * j + t] = gj[t];
                        full[dim * cl.unit + t] = gi[t];
                    }
                    add_outer(full, sigma);
                }
            }
        }
    }
    return out;
}

/// Trace of the FIM inverse plus per-unit block traces. Refuses
/// ill-conditioned matrices instead of silently pseudo-inverting.
inline CrlbReport crlb(const FisherMatrix& fim, double condition_cap = 1e12) {
    const int n = static_cast<int>(fim.matrix.rows());
    const int dim = fim.dim;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fim.matrix);
    const Eigen::VectorXd& lam = es.eigenvalues();
    const double lam_max = lam[n - 1];
    const double floor = lam_max / condition_cap;
    if (lam_max <= 0.0 || lam[0] <= floor) {
        std::vector<Eigen::VectorXd> null_dirs;
        std::string msg = "unlocalizable configuration: information matrix is singular or "
                          "ill-conditioned; deficient directions:";
        char buf[256];
        for (int i = 0; i < n && lam[i] <= floor; ++i) {
            null_dirs.push_back(es.eigenvectors().col(i));
            std::string dir;
            for (int t = 0; t < n; ++t) {
                std::snprintf(buf, sizeof(buf), "%s%.3g", t ? "," : "", es.eigenvectors()(t, i));
                dir += buf;
            }
            std::snprintf(buf, sizeof(buf), " [eig %.3g: %s]", lam[i], dir.c_str());
            msg += buf;
        }
        throw UnlocalizableError(msg, std::move(null_dirs));
    }
    const Eigen::MatrixXd inv =
        es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    CrlbReport rep;
    rep.mode = fim.mode;
    rep.total = inv.trace();
    const int nv = n / dim;
    for (int u = 0; u < nv; ++u) {
        rep.per_unit.push_back(inv.block(dim * u, dim * u, dim, dim).trace());
    }
    return rep;
}

}  // namespace vlp
