#pragma once

#include <cmath>
#include <stdexcept>

namespace vlp {

/// 3-component vector. Positions are in meters; orientation vectors are
/// unitless and stored with unit Euclidean norm.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double px, double py, double pz) : x(px), y(py), z(pz) {}

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr bool operator==(const Vec3& o) const = default;

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

constexpr double norm_sq(const Vec3& v) { return dot(v, v); }

inline double norm(const Vec3& v) { return std::sqrt(norm_sq(v)); }

/// Returns v scaled to unit norm. Vectors already unit-norm within a few ulp
/// are returned unchanged so that normalization is idempotent bit-for-bit.
inline Vec3 normalized(const Vec3& v) {
    const double n2 = norm_sq(v);
    if (n2 == 0.0) {
        throw std::invalid_argument("cannot normalize a zero vector");
    }
    if (std::abs(n2 - 1.0) <= 8.0 * 2.220446049250313e-16) {
        return v;
    }
    return v / std::sqrt(n2);
}

inline bool is_unit(const Vec3& v, double tol = 1e-12) {
    return std::abs(norm(v) - 1.0) <= tol;
}

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Vector from `from` to `to`; builds the d-vectors pointing from a source
/// LED toward a receiving PD.
constexpr Vec3 displacement(const Vec3& from, const Vec3& to) { return to - from; }

/// Restricts a direction to the first `dim` coordinates (zeroing z when
/// dim == 2). Used to confine gradients and projection directions to the
/// plane in known-height mode.
constexpr Vec3 restrict_dim(const Vec3& v, int dim) {
    return dim == 2 ? Vec3{v.x, v.y, 0.0} : v;
}

}  // namespace vlp
