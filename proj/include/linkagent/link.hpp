#pragma once

#include "linkagent/channel_env.hpp"
#include "linkagent/rng.hpp"
#include "linkagent/strategy.hpp"

#include <cstdint>

namespace linkagent {

inline constexpr int kDefaultPayloadBits = 288;
inline constexpr int kDefaultFrames = 20;
inline constexpr int kCrcBits = 16;

/// End-to-end metrics for one evaluation call.
struct LinkReport {
    double ber = 0.0;                 // payload bit errors / payload bits sent
    std::int64_t bit_errors = 0;
    std::int64_t payload_bits = 0;    // attempted payload bits (CRC excluded)
    std::int64_t frames_total = 0;
    std::int64_t frames_accepted = 0; // CRC passed
    double goodput_ratio = 0.0;       // accepted payload bits / attempted payload bits
    double spectral_rate = 0.0;       // accepted payload bits / vector channel uses (pilots included)
    std::int64_t channel_uses = 0;    // data + pilot vector uses
    std::int64_t pilot_uses = 0;
    int streams = 1;
    double p_extra = 0.0;             // ln(tx_power_linear), nats
    double tx_power_linear = 1.0;

    bool operator==(const LinkReport&) const = default;
};

/// Upper bound on spectral_rate for a strategy: streams * bits/symbol * code rate.
double peak_spectral_rate(const LinkStrategy& s, int n_tx, int n_rx);

/// Runs `frames` independent frames over the channel instance `cs`:
///   payload + CRC -> encode -> modulate -> precode -> power -> transmit
///   -> estimate -> equalize -> demodulate -> decode -> CRC check.
///
/// Each frame spans all channel blocks: n_tx pilot uses per block (none for the
/// perfect estimator), then a contiguous share of the data uses. Coded bits are
/// zero-padded to fill whole vector uses. Pilots go out at reference power; the
/// power level scales data only, and the receiver folds it into H_eff. A ZF
/// failure on a block erases that block's LLRs, so the frame is counted as failed
/// rather than aborting the run. Deterministic given the rng state.
LinkReport run_link(const ChannelState& cs, const LinkStrategy& s, int payload_bits, int frames,
                    Rng& rng);

} // namespace linkagent
