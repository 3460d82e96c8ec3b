#pragma once

#include "linkagent/coding.hpp"
#include "linkagent/strategy.hpp"

#include <complex>
#include <span>
#include <vector>

namespace linkagent {

using Symbol = std::complex<double>;

/// Gray-mapped square constellations with unit average energy.
///
/// Each axis carries m = bits/2 bits (BPSK: one bit on the real axis) mapped by
/// the binary-reflected Gray code onto levels -(L-1), ..., -1, +1, ..., +(L-1),
/// so for two bits per axis 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3. The first
/// half of a symbol's bits drive the in-phase axis, the second half quadrature.
/// Scale factors: QPSK 1/sqrt(2), 16-QAM 1/sqrt(10), 64-QAM 1/sqrt(42), 256-QAM 1/sqrt(170).
class Constellation {
public:
    explicit Constellation(Modulation m);

    Modulation modulation() const { return modulation_; }
    int bits_per_symbol() const { return bits_; }

    /// All 2^bits points, indexed by the bit pattern read MSB first.
    const std::vector<Symbol>& points() const { return points_; }

    std::vector<Symbol> modulate(std::span<const std::uint8_t> bits) const;

    /// Exact max-log LLRs, positive => bit 0 more likely. `noise_var` is the
    /// complex noise variance of each symbol (one entry per symbol, or a single
    /// entry applied to all).
    std::vector<double> demodulate_llr(std::span<const Symbol> symbols,
                                       std::span<const double> noise_var) const;

    /// Appends LLRs for one symbol to `out`.
    void demap_symbol(Symbol y, double noise_var, std::vector<double>& out) const;

private:
    Modulation modulation_;
    int bits_;
    int axis_bits_;   // bits on each axis (BPSK: 1 on I only)
    double scale_;
    std::vector<double> levels_;           // per-axis amplitude of Gray index g
    std::vector<Symbol> points_;
};

const Constellation& constellation(Modulation m);

} // namespace linkagent
