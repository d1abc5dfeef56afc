#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace physmorph {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }

    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double squared_norm(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) {
    double n = norm(v);
    return n > 0.0 ? v / n : Vec3{0, 0, 0};
}
inline Vec3 cwise_mul(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
inline bool all_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{};

    Mat3() = default;
    explicit Mat3(const std::array<double, 9>& a) : m(a) {}

    static Mat3 zero() { return Mat3{}; }
    static Mat3 identity() { return diag(1.0, 1.0, 1.0); }
    static Mat3 diag(double a, double b, double c) {
        Mat3 r;
        r.m = {a, 0, 0, 0, b, 0, 0, 0, c};
        return r;
    }
    static Mat3 diag(const Vec3& d) { return diag(d.x, d.y, d.z); }
    // u v^T
    static Mat3 outer(const Vec3& u, const Vec3& v) {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i * 3 + j] = u[i] * v[j];
        return r;
    }

    double& operator()(int r, int c) { return m[r * 3 + c]; }
    double operator()(int r, int c) const { return m[r * 3 + c]; }

    Vec3 row(int r) const { return {m[r * 3], m[r * 3 + 1], m[r * 3 + 2]}; }
    Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }
    void set_col(int c, const Vec3& v) { m[c] = v.x; m[3 + c] = v.y; m[6 + c] = v.z; }

    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
        return r;
    }
    Mat3 operator-(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
        return r;
    }
    Mat3 operator-() const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = -m[i];
        return r;
    }
    Mat3 operator*(double s) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
        return r;
    }
    Mat3& operator+=(const Mat3& o) {
        for (int i = 0; i < 9; ++i) m[i] += o.m[i];
        return *this;
    }
    Mat3& operator-=(const Mat3& o) {
        for (int i = 0; i < 9; ++i) m[i] -= o.m[i];
        return *this;
    }
    Mat3& operator*=(double s) {
        for (int i = 0; i < 9; ++i) m[i] *= s;
        return *this;
    }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m[i * 3 + k] * o.m[k * 3 + j];
                r.m[i * 3 + j] = s;
            }
        return r;
    }

    bool operator==(const Mat3& o) const { return m == o.m; }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[j * 3 + i] = m[i * 3 + j];
        return r;
    }

    double trace() const { return m[0] + m[4] + m[8]; }

    double determinant() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    // Cofactor matrix; cofactor(F) = det(F) * F^{-T} for invertible F.
    Mat3 cofactor() const {
        Mat3 c;
        c.m[0] = m[4] * m[8] - m[5] * m[7];
        c.m[1] = m[5] * m[6] - m[3] * m[8];
        c.m[2] = m[3] * m[7] - m[4] * m[6];
        c.m[3] = m[2] * m[7] - m[1] * m[8];
        c.m[4] = m[0] * m[8] - m[2] * m[6];
        c.m[5] = m[1] * m[6] - m[0] * m[7];
        c.m[6] = m[1] * m[5] - m[2] * m[4];
        c.m[7] = m[2] * m[3] - m[0] * m[5];
        c.m[8] = m[0] * m[4] - m[1] * m[3];
        return c;
    }

    Mat3 inverse() const {
        Mat3 c = cofactor();
        double det = m[0] * c.m[0] + m[1] * c.m[1] + m[2] * c.m[2];
        return c.transposed() * (1.0 / det);
    }
};

inline Mat3 operator*(double s, const Mat3& a) { return a * s; }

inline double frobenius_dot(const Mat3& a, const Mat3& b) {
    double s = 0.0;
    for (int i = 0; i < 9; ++i) s += a.m[i] * b.m[i];
    return s;
}
inline double frobenius_norm(const Mat3& a) { return std::sqrt(frobenius_dot(a, a)); }

inline bool all_finite(const Mat3& a) {
    for (double v : a.m)
        if (!std::isfinite(v)) return false;
    return true;
}

// Rotation by angle (radians) about a coordinate axis, 0=x 1=y 2=z.
inline Mat3 axis_rotation(int axis, double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    switch (axis) {
        case 0: return Mat3{{1, 0, 0, 0, c, -s, 0, s, c}};
        case 1: return Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}};
        default: return Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}};
    }
}

struct Vec2 {
    double x = 0.0, y = 0.0;
    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}
    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
};

// Symmetric 2x2 matrix [[a, b], [b, c]].
struct SymMat2 {
    double a = 0.0, b = 0.0, c = 0.0;
    double determinant() const { return a * c - b * b; }
    // quadratic form v^T M v
    double quad(const Vec2& v) const { return a * v.x * v.x + 2.0 * b * v.x * v.y + c * v.y * v.y; }
    SymMat2 inverse() const {
        double det = determinant();
        double inv = 1.0 / det;
        return {c * inv, -b * inv, a * inv};
    }
    Vec2 operator*(const Vec2& v) const { return {a * v.x + b * v.y, b * v.x + c * v.y}; }
};

}  // namespace physmorph
