#include "linkagent/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace linkagent {

namespace {

constexpr double kMinNoiseVar = 1e-12;

} // namespace

Constellation::Constellation(Modulation m)
    : modulation_(m), bits_(linkagent::bits_per_symbol(m))
{
    axis_bits_ = m == Modulation::bpsk ? 1 : bits_ / 2;
    const int levels = 1 << axis_bits_;
    // E|s|^2 = 2 (L^2 - 1) / 3 per complex symbol before scaling; BPSK is real with energy 1.
    scale_ = m == Modulation::bpsk ? 1.0 : 1.0 / std::sqrt(2.0 * (levels * levels - 1) / 3.0);

    levels_.assign(static_cast<std::size_t>(levels), 0.0);
    for (int i = 0; i < levels; ++i) {
        const int gray = i ^ (i >> 1);
        levels_[static_cast<std::size_t>(gray)] = (2.0 * i - (levels - 1)) * scale_;
    }

    const int count = 1 << bits_;
    points_.resize(static_cast<std::size_t>(count));
    for (int v = 0; v < count; ++v) {
        if (m == Modulation::bpsk) {
            points_[static_cast<std::size_t>(v)] = {levels_[static_cast<std::size_t>(v)], 0.0};
        } else {
            const int gi = v >> axis_bits_;
            const int gq = v & (levels - 1);
            points_[static_cast<std::size_t>(v)] = {levels_[static_cast<std::size_t>(gi)],
                                                    levels_[static_cast<std::size_t>(gq)]};
        }
    }
}

std::vector<Symbol> Constellation::modulate(std::span<const std::uint8_t> bits) const
{
    if (bits.size() % static_cast<std::size_t>(bits_) != 0) {
        throw std::invalid_argument("modulate: bit count " + std::to_string(bits.size()) +
                                    " is not a multiple of " + std::to_string(bits_));
    }
    std::vector<Symbol> out;
    out.reserve(bits.size() / static_cast<std::size_t>(bits_));
    for (std::size_t i = 0; i < bits.size(); i += static_cast<std::size_t>(bits_)) {
        unsigned v = 0;
        for (int k = 0; k < bits_; ++k) {
            v = (v << 1) | (bits[i + static_cast<std::size_t>(k)] & 1U);
        }
        out.push_back(points_[v]);
    }
    return out;
}

void Constellation::demap_symbol(Symbol y, double noise_var, std::vector<double>& out) const
{
    const double inv = 1.0 / std::max(noise_var, kMinNoiseVar);
    const int levels = static_cast<int>(levels_.size());
    const int axes = modulation_ == Modulation::bpsk ? 1 : 2;
    for (int axis = 0; axis < axes; ++axis) {
        const double r = axis == 0 ? y.real() : y.imag();
        for (int k = axis_bits_ - 1; k >= 0; --k) {
            double d0 = std::numeric_limits<double>::infinity();
            double d1 = d0;
            for (int g = 0; g < levels; ++g) {
                const double diff = r - levels_[static_cast<std::size_t>(g)];
                const double d = diff * diff;
                if ((g >> k) & 1) {
                    d1 = std::min(d1, d);
                } else {
                    d0 = std::min(d0, d);
                }
            }
            out.push_back((d1 - d0) * inv);
        }
    }
}

std::vector<double> Constellation::demodulate_llr(std::span<const Symbol> symbols,
                                                  std::span<const double> noise_var) const
{
    if (noise_var.size() != 1 && noise_var.size() != symbols.size()) {
        throw std::invalid_argument("demodulate_llr: noise_var must have 1 or " +
                                    std::to_string(symbols.size()) + " entries");
    }
    std::vector<double> out;
    out.reserve(symbols.size() * static_cast<std::size_t>(bits_));
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        demap_symbol(symbols[i], noise_var.size() == 1 ? noise_var[0] : noise_var[i], out);
    }
    return out;
}

const Constellation& constellation(Modulation m)
{
    static const Constellation table[] = {
        Constellation(Modulation::bpsk), Constellation(Modulation::qpsk),
        Constellation(Modulation::qam16), Constellation(Modulation::qam64),
        Constellation(Modulation::qam256)};
    return table[static_cast<int>(m)];
}

} // namespace linkagent
