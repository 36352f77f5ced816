#pragma once

#include <array>
#include <cstddef>

namespace lunamap {

// Six-component state (x, y, z, xdot, ydot, zdot) in dimensionless rotating
// frame units, generic over the scalar ring so the same dynamics code runs on
// plain doubles and on truncated power series.
template <class S>
struct Vec6 {
    std::array<S, 6> c{};

    S& operator[](std::size_t i) { return c[i]; }
    const S& operator[](std::size_t i) const { return c[i]; }

    const S& x() const { return c[0]; }
    const S& y() const { return c[1]; }
    const S& z() const { return c[2]; }
    const S& vx() const { return c[3]; }
    const S& vy() const { return c[4]; }
    const S& vz() const { return c[5]; }
};

using State = Vec6<double>;

template <class S>
Vec6<S> operator+(const Vec6<S>& a, const Vec6<S>& b) {
    Vec6<S> r;
    for (std::size_t i = 0; i < 6; ++i) r[i] = a[i] + b[i];
    return r;
}

template <class S>
Vec6<S> operator-(const Vec6<S>& a, const Vec6<S>& b) {
    Vec6<S> r;
    for (std::size_t i = 0; i < 6; ++i) r[i] = a[i] - b[i];
    return r;
}

// Scalar times state; the scalar may be the ring element itself (a series
// step size) or a plain double.
template <class Sc, class S>
Vec6<S> operator*(const Sc& a, const Vec6<S>& v) {
    Vec6<S> r;
    for (std::size_t i = 0; i < 6; ++i) r[i] = a * v[i];
    return r;
}

} // namespace lunamap
