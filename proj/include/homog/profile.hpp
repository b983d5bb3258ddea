#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "homog/errors.hpp"

namespace homog {

/// Scalar nonlinearity sigma(u) multiplying a micro-structure factor.
///
///   linear               scale * u
///   tanh_saturating      scale * tanh(u / width)
///   rational_saturating  scale * u / sqrt(1 + (u / width)^2)
///   constant             scale            (noise offsets only; sigma(0) != 0)
///
/// All kinds have bounded derivative, and sigma'' decays at least like
/// 1 / (1 + |u|), so the strong Lipschitz condition on d_u g holds for each.
class ScalarProfile {
public:
    enum class Kind { linear, tanh_saturating, rational_saturating, constant };

    ScalarProfile() = default;
    ScalarProfile(Kind kind, double scale, double width = 1.0) : kind_(kind), scale_(scale), width_(width) {
        if (!std::isfinite(scale_) || !std::isfinite(width_) || width_ <= 0.0)
            throw InputError("scalar profile needs finite scale and positive width");
    }

    static ScalarProfile linear(double scale = 1.0) { return {Kind::linear, scale}; }
    static ScalarProfile tanh_saturating(double scale = 1.0, double width = 1.0) {
        return {Kind::tanh_saturating, scale, width};
    }
    static ScalarProfile rational_saturating(double scale = 1.0, double width = 1.0) {
        return {Kind::rational_saturating, scale, width};
    }
    static ScalarProfile constant(double value = 1.0) { return {Kind::constant, value}; }

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double scale() const { return scale_; }
    [[nodiscard]] double width() const { return width_; }

    [[nodiscard]] double operator()(double u) const {
        switch (kind_) {
            case Kind::linear: return scale_ * u;
            case Kind::tanh_saturating: return scale_ * std::tanh(u / width_);
            case Kind::rational_saturating: {
                const double s = u / width_;
                return scale_ * u / std::sqrt(1.0 + s * s);
            }
            case Kind::constant: return scale_;
        }
        return 0.0;
    }

    [[nodiscard]] double derivative(double u) const {
        switch (kind_) {
            case Kind::linear: return scale_;
            case Kind::tanh_saturating: {
                const double c = std::cosh(u / width_);
                return scale_ / (width_ * c * c);
            }
            case Kind::rational_saturating: {
                const double s = u / width_;
                return scale_ / std::pow(1.0 + s * s, 1.5);
            }
            case Kind::constant: return 0.0;
        }
        return 0.0;
    }

    /// sup_u |sigma'(u)|
    [[nodiscard]] double lipschitz() const {
        switch (kind_) {
            case Kind::linear: return std::abs(scale_);
            case Kind::tanh_saturating: return std::abs(scale_) / width_;
            case Kind::rational_saturating: return std::abs(scale_);
            case Kind::constant: return 0.0;
        }
        return 0.0;
    }

    [[nodiscard]] bool vanishes_at_zero() const { return kind_ != Kind::constant || scale_ == 0.0; }

    /// Whether |s'(u1) - s'(u2)| <= C |u1 - u2| / (1 + |u1| + |u2|) holds for
    /// some C. True for every built-in kind.
    [[nodiscard]] bool satisfies_strong_derivative_bound() const { return true; }

    [[nodiscard]] std::string_view name() const { return kind_name(kind_); }

    static std::string_view kind_name(Kind k) {
        switch (k) {
            case Kind::linear: return "linear";
            case Kind::tanh_saturating: return "tanh_saturating";
            case Kind::rational_saturating: return "rational_saturating";
            case Kind::constant: return "constant";
        }
        return "?";
    }
    static Kind parse_kind(std::string_view s) {
        if (s == "linear") return Kind::linear;
        if (s == "tanh_saturating" || s == "tanh") return Kind::tanh_saturating;
        if (s == "rational_saturating" || s == "rational") return Kind::rational_saturating;
        if (s == "constant") return Kind::constant;
        throw ConfigError("unknown scalar profile kind '" + std::string(s) + "'");
    }

    friend bool operator==(const ScalarProfile&, const ScalarProfile&) = default;

private:
    Kind kind_ = Kind::linear;
    double scale_ = 1.0;
    double width_ = 1.0;
};

}  // namespace homog
