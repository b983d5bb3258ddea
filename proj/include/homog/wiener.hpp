#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "homog/errors.hpp"

namespace homog {

/// Increments of an m-dimensional standard Wiener process on a uniform grid.
///
/// Increments are quantized to multiples of 2^-40, so that sums of them are
/// exact in double precision; a Brownian-bridge refinement therefore sums back
/// to the coarse increment bit for bit.
class WienerPath {
public:
    static constexpr double quantum = 0x1p-40;

    static WienerPath generate(std::size_t channels, std::uint64_t seed, double dt, std::size_t steps) {
        if (!(dt > 0.0)) throw InputError("Wiener path needs dt > 0");
        WienerPath w;
        w.channels_ = channels;
        w.seed_ = seed;
        w.dt_ = dt;
        w.steps_ = steps;
        w.factor_ = 1;
        w.inc_.resize(channels * steps);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x57a7u};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> nd(0.0, 1.0);
        const double s = std::sqrt(dt);
        for (std::size_t n = 0; n < steps; ++n)
            for (std::size_t l = 0; l < channels; ++l) w.inc_[n * channels + l] = quantize(s * nd(rng));
        return w;
    }

    /// Splits every increment into `factor` pieces by sampling the Brownian
    /// bridge. Deterministic in (seed, factor).
    [[nodiscard]] WienerPath refine(std::size_t factor) const {
        if (factor == 0) throw InputError("refinement factor must be positive");
        if (factor == 1) return *this;
        WienerPath w;
        w.channels_ = channels_;
        w.seed_ = seed_;
        w.dt_ = dt_ / static_cast<double>(factor);
        w.steps_ = steps_ * factor;
        w.factor_ = factor_ * factor;
        w.inc_.resize(w.steps_ * channels_);
        std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                          static_cast<std::uint32_t>(w.factor_), 0xb41du};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> nd(0.0, 1.0);
        for (std::size_t n = 0; n < steps_; ++n) {
            for (std::size_t l = 0; l < channels_; ++l) {
                double remaining = inc_[n * channels_ + l];
                for (std::size_t j = 0; j + 1 < factor; ++j) {
                    const auto left = static_cast<double>(factor - j);
                    const double mean = remaining / left;
                    const double var = w.dt_ * (left - 1.0) / left;
                    const double piece = quantize(mean + std::sqrt(var) * nd(rng));
                    w.inc_[(n * factor + j) * channels_ + l] = piece;
                    remaining -= piece;  // exact: both are multiples of the quantum
                }
                w.inc_[(n * factor + factor - 1) * channels_ + l] = remaining;
            }
        }
        return w;
    }

    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] std::size_t steps() const { return steps_; }
    [[nodiscard]] std::size_t channels() const { return channels_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    /// Cumulative refinement factor relative to the generated path.
    [[nodiscard]] std::size_t factor() const { return factor_; }
    [[nodiscard]] double increment(std::size_t step, std::size_t channel) const {
        return inc_[step * channels_ + channel];
    }

private:
    static double quantize(double x) { return std::nearbyint(x / quantum) * quantum; }

    std::size_t channels_ = 0;
    std::uint64_t seed_ = 0;
    double dt_ = 0.0;
    std::size_t steps_ = 0;
    std::size_t factor_ = 1;
    std::vector<double> inc_;
};

}  // namespace homog
