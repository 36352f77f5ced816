#include "lunamap/tps.hpp"

#include <json.hpp>

namespace lunamap {

namespace {
// Coefficients below this are indistinguishable from underflow noise and are
// dropped on store. No other pruning: the algebra stays exact otherwise.
constexpr double kUnderflow = 1e-300;
} // namespace

Tps::Tps(double value, std::size_t nvars, int order)
    : nvars_(nvars), order_(order) {
    if (order < 0) throw std::invalid_argument("Tps: negative order");
    if (std::abs(value) >= kUnderflow) {
        terms_.emplace(Exponents(nvars, 0), value);
    }
}

Tps Tps::variable(std::size_t index, std::size_t nvars, int order) {
    if (index >= nvars) throw std::invalid_argument("Tps::variable: index out of range");
    if (order < 1) throw std::invalid_argument("Tps::variable: order must be >= 1");
    Tps t(0.0, nvars, order);
    Exponents e(nvars, 0);
    e[index] = 1;
    t.terms_.emplace(std::move(e), 1.0);
    return t;
}

double Tps::constant_part() const {
    auto it = terms_.find(Exponents(nvars_, 0));
    return it == terms_.end() ? 0.0 : it->second;
}

double Tps::coeff(const Exponents& e) const {
    if (e.size() != nvars_) throw ShapeError("Tps::coeff: exponent length mismatch");
    auto it = terms_.find(e);
    return it == terms_.end() ? 0.0 : it->second;
}

void Tps::require_shape(const Tps& other) const {
    if (!same_shape(other)) throw ShapeError("Tps: mismatched nvars/order");
}

void Tps::accumulate(const Exponents& e, double c) {
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) it->second += c;
}

void Tps::drop_underflow() {
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (std::abs(it->second) < kUnderflow) {
            it = terms_.erase(it);
        } else {
            ++it;
        }
    }
}

Tps Tps::operator-() const {
    Tps out(*this);
    for (auto& [e, c] : out.terms_) c = -c;
    return out;
}

Tps Tps::operator+(const Tps& rhs) const {
    require_shape(rhs);
    Tps out(*this);
    for (const auto& [e, c] : rhs.terms_) out.accumulate(e, c);
    out.drop_underflow();
    return out;
}

Tps Tps::operator-(const Tps& rhs) const {
    require_shape(rhs);
    Tps out(*this);
    for (const auto& [e, c] : rhs.terms_) out.accumulate(e, -c);
    out.drop_underflow();
    return out;
}

Tps Tps::operator*(const Tps& rhs) const {
    require_shape(rhs);
    Tps out(0.0, nvars_, order_);
    Exponents e(nvars_, 0);
    for (const auto& [ea, ca] : terms_) {
        const int da = total_degree(ea);
        for (const auto& [eb, cb] : rhs.terms_) {
            if (da + total_degree(eb) > order_) continue;
            for (std::size_t i = 0; i < nvars_; ++i) e[i] = ea[i] + eb[i];
            out.accumulate(e, ca * cb);
        }
    }
    out.drop_underflow();
    return out;
}

Tps Tps::operator+(double c) const {
    Tps out(*this);
    out.accumulate(Exponents(nvars_, 0), c);
    out.drop_underflow();
    return out;
}

Tps Tps::operator-(double c) const { return *this + (-c); }

Tps Tps::operator*(double c) const {
    Tps out(*this);
    for (auto& [e, v] : out.terms_) v *= c;
    out.drop_underflow();
    return out;
}

Tps Tps::operator/(double c) const { return *this * (1.0 / c); }

Tps operator+(double c, const Tps& a) { return a + c; }
Tps operator-(double c, const Tps& a) { return (-a) + c; }
Tps operator*(double c, const Tps& a) { return a * c; }

Tps Tps::truncated(int new_order) const {
    Tps out(0.0, nvars_, new_order);
    for (const auto& [e, c] : terms_) {
        if (total_degree(e) <= new_order) out.terms_.emplace(e, c);
    }
    return out;
}

double Tps::evaluate(const std::vector<double>& point) const {
    if (point.size() != nvars_) throw ShapeError("Tps::evaluate: point length mismatch");
    // Per-variable power table up to the truncation order.
    std::vector<std::vector<double>> pow_table(nvars_);
    for (std::size_t i = 0; i < nvars_; ++i) {
        pow_table[i].resize(static_cast<std::size_t>(order_) + 1);
        pow_table[i][0] = 1.0;
        for (int k = 1; k <= order_; ++k) pow_table[i][k] = pow_table[i][k - 1] * point[i];
    }
    double sum = 0.0;
    for (const auto& [e, c] : terms_) {
        double mono = c;
        for (std::size_t i = 0; i < nvars_; ++i) mono *= pow_table[i][e[i]];
        sum += mono;
    }
    return sum;
}

Tps rpow(const Tps& a, double p) {
    const double a0 = a.constant_part();
    if (a0 <= 0.0) throw DomainError("rpow: series constant part must be positive");
    const Tps u = a / a0 - 1.0; // nilpotent: no constant term
    Tps sum(1.0, a.nvars(), a.order());
    Tps upow(1.0, a.nvars(), a.order());
    double binom = 1.0;
    for (int k = 1; k <= a.order(); ++k) {
        binom *= (p - (k - 1)) / k;
        upow = upow * u;
        if (upow.is_zero()) break;
        sum = sum + upow * binom;
    }
    return sum * std::pow(a0, p);
}

std::string Tps::to_json_string() const {
    nlohmann::json j;
    j["nvars"] = nvars_;
    j["order"] = order_;
    auto& arr = j["terms"] = nlohmann::json::array();
    for (const auto& [e, c] : terms_) {
        nlohmann::json rec;
        rec["exponents"] = std::vector<int>(e.begin(), e.end());
        rec["coeff"] = c;
        arr.push_back(std::move(rec));
    }
    return j.dump();
}

Tps Tps::from_json_string(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const auto nvars = j.at("nvars").get<std::size_t>();
    const auto order = j.at("order").get<int>();
    Tps out(0.0, nvars, order);
    for (const auto& rec : j.at("terms")) {
        const auto exps = rec.at("exponents").get<std::vector<int>>();
        if (exps.size() != nvars) throw ShapeError("Tps::from_json_string: exponent length mismatch");
        Exponents e;
        e.reserve(exps.size());
        int deg = 0;
        for (int k : exps) {
            if (k < 0 || k > 255) throw std::invalid_argument("Tps::from_json_string: bad exponent");
            deg += k;
            e.push_back(static_cast<std::uint8_t>(k));
        }
        if (deg > order) throw std::invalid_argument("Tps::from_json_string: term above order");
        out.accumulate(e, rec.at("coeff").get<double>());
    }
    out.drop_underflow();
    return out;
}

} // namespace lunamap
