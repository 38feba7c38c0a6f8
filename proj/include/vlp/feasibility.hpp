#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "vlp/vec3.hpp"

namespace vlp {

// ---------------------------------------------------------------------------
// Lambertian constraint sets. Each set is the zero-sublevel set of a function
// g built from one RSS measurement:
//
//   Original:        g(x) = gamma - [(x-y)'n_t]^m (y-x)'n_r / (|x-y|^{m+3} + eps)
//   Case1Expanded:   g(x) = gamma - (y-x)'n_r / (|x-y|^3 + eps)
//   Case2KnownHeight g(x) = gamma~ - (y-x)'n_r / (|x-y|^{m+3} + eps),
//                    gamma~ = gamma/h^m for perpendicular transmitters at
//                    height h above the receiver plane.
//
// y is the source point already adjusted by the receiver offset, so the free
// variable x is the VLC unit location. Case1/Case2 forms are quasiconvex on
// the halfspace {x : (y-x)'n_r >= 0}; outside it the gradient projector acts
// as the identity.
//
// In 2-D (known-height) mode, points carry a fixed z and constraint gradients
// and projection directions are restricted to the xy-plane, which evaluates
// the reduced planar functions exactly.
// ---------------------------------------------------------------------------

enum class ConstraintVariant { Original, Case1Expanded, Case2KnownHeight };

struct LambertianConstraint {
    Vec3 source;                 // y, meters
    Vec3 n_t;                    // transmitter orientation (Original only)
    Vec3 n_r;                    // receiver orientation, unit
    double order = 1.0;          // Lambertian order m
    double gamma = 0.0;          // Case2 stores gamma/h^m
    double epsilon = 1e-6;
    ConstraintVariant variant = ConstraintVariant::Case1Expanded;
    double case2_height = 0.0;   // h, kept for reporting
    int dim = 3;
};

/// (y - x)' n_r, nonnegative exactly on the quasiconvexity halfspace Omega.
inline double receiver_projection(const LambertianConstraint& c, const Vec3& x) {
    return dot(c.source - x, c.n_r);
}

inline bool in_quasiconvex_region(const LambertianConstraint& c, const Vec3& x) {
    return receiver_projection(c, x) >= 0.0;
}

inline double g_value(const LambertianConstraint& c, const Vec3& x) {
    const Vec3 u = c.source - x;
    const double w = dot(u, c.n_r);
    const double r = norm(u);
    switch (c.variant) {
        case ConstraintVariant::Case1Expanded:
            return c.gamma - w / (r * r * r + c.epsilon);
        case ConstraintVariant::Case2KnownHeight:
            return c.gamma - w / (std::pow(r, c.order + 3.0) + c.epsilon);
        case ConstraintVariant::Original: {
            const double s = -dot(u, c.n_t);  // (x - y)' n_t
            return c.gamma -
                   std::pow(s, c.order) * w / (std::pow(r, c.order + 3.0) + c.epsilon);
        }
    }
    return 0.0;
}

/// Analytic gradient of g; z component zeroed in 2-D mode (the gradient of
/// the reduced planar function).
inline Vec3 g_gradient(const LambertianConstraint& c, const Vec3& x) {
    const Vec3 u = c.source - x;
    const double w = dot(u, c.n_r);
    const double r2 = norm_sq(u);
    const double r = std::sqrt(r2);
    Vec3 grad;
    if (c.variant == ConstraintVariant::Original) {
        const double k = c.order + 3.0;
        const double d_pow = std::pow(r, k) + c.epsilon;
        const double s = -dot(u, c.n_t);
        const double sm1 = std::pow(s, c.order - 1.0);
        const double sm = sm1 * s;
        const double rk2 = r2 > 0.0 ? std::pow(r, k - 2.0) : 0.0;
        grad = (sm * c.n_r - c.order * sm1 * w * c.n_t) / d_pow +
               (sm * w * k * rk2 / (d_pow * d_pow)) * (x - c.source);
    } else {
        const double k = c.variant == ConstraintVariant::Case1Expanded ? 3.0 : c.order + 3.0;
        const double d_pow = std::pow(r, k) + c.epsilon;
        const double rk2 = r2 > 0.0 ? std::pow(r, k - 2.0) : 0.0;
        grad = c.n_r / d_pow + (w * k * rk2 / (d_pow * d_pow)) * (x - c.source);
    }
    return restrict_dim(grad, c.dim);
}

// ---------------------------------------------------------------------------
// Halfspaces {x : (c - x)' n >= 0} with unit normals; the receiver-FOV
// regions that keep iterates where the constraint functions are quasiconvex.
// ---------------------------------------------------------------------------

struct Halfspace {
    Vec3 anchor_point;  // c
    Vec3 normal;        // n, unit
    int dim = 3;
};

/// Positive part of the constraint violation (0 when satisfied).
inline double halfspace_violation(const Halfspace& h, const Vec3& x) {
    return std::max(0.0, -dot(h.anchor_point - x, h.normal));
}

/// Orthogonal projection onto the halfspace; in 2-D mode the motion is
/// confined to the xy-plane (projection within the slice).
inline Vec3 project_halfspace(const Halfspace& h, const Vec3& x) {
    const double v = dot(h.anchor_point - x, h.normal);
    if (v >= 0.0) return x;
    const Vec3 n_eff = restrict_dim(h.normal, h.dim);
    const double n2 = norm_sq(n_eff);
    if (n2 == 0.0) return x;  // constraint is constant along the movable coordinates
    return x + (v / n2) * n_eff;
}

struct ProjectionResult {
    Vec3 point;
    int sweeps = 0;
    bool converged = false;
};

/// Alternating (cyclic) projections onto an intersection of halfspaces.
/// Stops when a full sweep moves the point by less than delta; if max_sweeps
/// is exhausted first, returns the best iterate with converged = false.
inline ProjectionResult project_halfspace_intersection(std::span<const Halfspace> halfspaces,
                                                       Vec3 x, double delta = 1e-10,
                                                       int max_sweeps = 1000) {
    ProjectionResult res;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const Vec3 before = x;
        for (const auto& h : halfspaces) x = project_halfspace(h, x);
        ++res.sweeps;
        if (norm(x - before) < delta) {
            res.converged = true;
            break;
        }
    }
    res.point = x;
    return res;
}

// ---------------------------------------------------------------------------
// Gradient projector and Armijo step rule
// ---------------------------------------------------------------------------

/// Relaxed gradient projection toward the zero-sublevel set of g:
/// x - lambda * g+(x)/|grad g(x)|^2 * grad g(x). Identity when g(x) <= 0 or
/// when x lies outside the halfspace where g is quasiconvex.
inline Vec3 gradient_project(const LambertianConstraint& c, double lambda, const Vec3& x) {
    if (lambda < 0.0) throw std::invalid_argument("relaxation parameter must be nonnegative");
    const double g = g_value(c, x);
    if (g <= 0.0) return x;
    if (!in_quasiconvex_region(c, x)) return x;
    const Vec3 grad = g_gradient(c, x);
    const double n2 = norm_sq(grad);
    if (!(n2 > 0.0)) {
        throw std::runtime_error("stalled projector: zero gradient at a violated constraint");
    }
    return x - (lambda * g / n2) * grad;
}

/// Armijo rule: returns lambda * xi^m for the smallest m >= 0 such that every
/// function decreases by the prescribed fraction under its own projector at
/// that step size. Throws after max_halvings (stalled line search).
inline double armijo_step(std::span<const LambertianConstraint> functions, double lambda,
                          double beta, double xi, const Vec3& x, int max_halvings = 60) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must be in (0,1)");
    if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("xi must be in (0,1)");

    struct Prepared {
        double g0;
        Vec3 step;  // g+/|grad|^2 * grad, zero when the projector is the identity
    };
    std::vector<Prepared> prep;
    prep.reserve(functions.size());
    for (const auto& c : functions) {
        Prepared p;
        p.g0 = g_value(c, x);
        p.step = Vec3{};
        if (p.g0 > 0.0 && in_quasiconvex_region(c, x)) {
            const Vec3 grad = g_gradient(c, x);
            const double n2 = norm_sq(grad);
            if (!(n2 > 0.0)) {
                throw std::runtime_error("stalled projector: zero gradient at a violated constraint");
            }
            p.step = (p.g0 / n2) * grad;
        }
        prep.push_back(p);
    }

    double trial = lambda;
    for (int m = 0; m <= max_halvings; ++m, trial *= xi) {
        bool ok = true;
        for (std::size_t i = 0; i < functions.size(); ++i) {
            const Vec3 moved = x - trial * prep[i].step;
            if (g_value(functions[i], moved) > prep[i].g0 * (1.0 - beta * trial)) {
                ok = false;
                break;
            }
        }
        if (ok) return trial;
    }
    throw std::runtime_error("Armijo stall: no admissible step size within the halving cap");
}

}  // namespace vlp
