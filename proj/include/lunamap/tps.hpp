#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lunamap/errors.hpp"

namespace lunamap {

// Exponent multi-index of a monomial; one entry per independent variable.
using Exponents = std::vector<std::uint8_t>;

inline int total_degree(const Exponents& e) {
    int d = 0;
    for (auto k : e) d += k;
    return d;
}

// Graded lexicographic order: lower total degree first, ties broken
// lexicographically. Fixed so that serialized term order is deterministic.
struct GradedLex {
    bool operator()(const Exponents& a, const Exponents& b) const {
        const int da = total_degree(a);
        const int db = total_degree(b);
        if (da != db) return da < db;
        return a < b;
    }
};

// Multivariate truncated power series: a polynomial in `nvars` deviation
// variables with all terms of total degree > `order` dropped. Values are
// immutable after construction; every operation returns a new series.
// Two series interoperate only when their nvars and order agree.
class Tps {
public:
    using Terms = std::map<Exponents, double, GradedLex>;

    Tps() = default; // zero series in zero variables
    Tps(double value, std::size_t nvars, int order);

    // The identity series delta_index (single degree-one term, coefficient 1).
    static Tps variable(std::size_t index, std::size_t nvars, int order);

    std::size_t nvars() const { return nvars_; }
    int order() const { return order_; }
    const Terms& terms() const { return terms_; }

    bool is_zero() const { return terms_.empty(); }
    double constant_part() const;
    double coeff(const Exponents& e) const;

    Tps operator-() const;
    Tps operator+(const Tps& rhs) const;
    Tps operator-(const Tps& rhs) const;
    Tps operator*(const Tps& rhs) const;
    Tps operator+(double c) const;
    Tps operator-(double c) const;
    Tps operator*(double c) const;
    Tps operator/(double c) const;

    // Copy with all terms above new_order dropped.
    Tps truncated(int new_order) const;

    double evaluate(const std::vector<double>& point) const;

    bool same_shape(const Tps& other) const {
        return nvars_ == other.nvars_ && order_ == other.order_;
    }

    friend bool operator==(const Tps& a, const Tps& b) {
        return a.nvars_ == b.nvars_ && a.order_ == b.order_ && a.terms_ == b.terms_;
    }

    // JSON round trip; finite coefficients survive bit-exact.
    std::string to_json_string() const;
    static Tps from_json_string(const std::string& text);

private:
    std::size_t nvars_ = 0;
    int order_ = 0;
    Terms terms_;

    void require_shape(const Tps& other) const;
    void accumulate(const Exponents& e, double c);
    void drop_underflow();
};

Tps operator+(double c, const Tps& a);
Tps operator-(double c, const Tps& a);
Tps operator*(double c, const Tps& a);

// Real power a^p expanded about the constant part a0: factor a = a0(1 + u)
// with u nilpotent and apply the binomial series in u up to the order.
// The constant part must be strictly positive.
Tps rpow(const Tps& a, double p);

// Scalar overload so code generic over the ring works on plain doubles.
inline double rpow(double a, double p) {
    if (a <= 0.0) throw DomainError("rpow: non-positive base");
    return std::pow(a, p);
}

} // namespace lunamap
