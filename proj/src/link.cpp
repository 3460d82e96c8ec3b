#include "linkagent/link.hpp"

#include "linkagent/coding.hpp"
#include "linkagent/error.hpp"
#include "linkagent/mimo.hpp"
#include "linkagent/modulation.hpp"

#include <cmath>
#include <stdexcept>

namespace linkagent {

namespace {

Bits random_bits(std::size_t n, Rng& rng)
{
    Bits out(n);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) {
            word = rng.next_u64();
        }
        out[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
    }
    return out;
}

} // namespace

double peak_spectral_rate(const LinkStrategy& s, int n_tx, int n_rx)
{
    return stream_count(s.precoding, n_tx, n_rx) * bits_per_symbol(s.modulation) *
           code_rate_value(s.code_rate);
}

LinkReport run_link(const ChannelState& cs, const LinkStrategy& s, int payload_bits, int frames,
                    Rng& rng)
{
    validate_strategy(s);
    if (payload_bits < 1) {
        throw ConfigError("payload_bits must be >= 1", "payload_bits");
    }
    if (frames < 0) {
        throw ConfigError("frames must be >= 0", "frames");
    }
    if (cs.h.empty()) {
        throw ConfigError("channel state has no blocks");
    }

    const int n_tx = cs.n_tx();
    const int n_rx = cs.n_rx();
    const int blocks = cs.n_blocks();
    const int streams = stream_count(s.precoding, n_tx, n_rx);
    const Constellation& con = constellation(s.modulation);
    const int bps = con.bits_per_symbol();

    const std::size_t info_len = static_cast<std::size_t>(payload_bits) + kCrcBits;
    const std::size_t coded_len = coded_length(info_len, s.coding, s.code_rate);
    const std::size_t bits_per_use = static_cast<std::size_t>(streams * bps);
    const std::size_t data_uses = (coded_len + bits_per_use - 1) / bits_per_use;
    const std::size_t padded_len = data_uses * bits_per_use;
    const int pilots_per_block = pilot_uses(s.estimator, n_tx);
    const double nv = cs.noise_var;

    // Transmit-side precoders use the true channel (idealized feedback).
    std::vector<CMatrix> precoders;
    precoders.reserve(static_cast<std::size_t>(blocks));
    for (const auto& hb : cs.h) {
        precoders.push_back(precoder_matrix(s.precoding, hb));
    }
    const CMatrix pilots = pilot_matrix(n_tx);
    const double amp = std::sqrt(tx_power_linear(s.power_level_db));

    LinkReport rep;
    rep.streams = streams;
    rep.tx_power_linear = tx_power_linear(s.power_level_db);
    rep.p_extra = std::log(rep.tx_power_linear);

    std::vector<double> llrs;
    llrs.reserve(padded_len);

    for (int f = 0; f < frames; ++f) {
        const Bits payload = random_bits(static_cast<std::size_t>(payload_bits), rng);
        Bits coded = encode(append_crc(payload), s.coding, s.code_rate);
        coded.resize(padded_len, 0);
        const std::vector<Symbol> symbols = con.modulate(coded);

        llrs.clear();
        for (int b = 0; b < blocks; ++b) {
            const auto& hb = cs.h[static_cast<std::size_t>(b)];
            CMatrix h_hat;
            if (pilots_per_block > 0) {
                const CMatrix y_pilot = transmit(pilots, hb, nv, rng);
                h_hat = estimate_channel(s.estimator, y_pilot, hb, nv);
            } else {
                h_hat = hb;
            }

            const std::size_t u0 = data_uses * static_cast<std::size_t>(b) / blocks;
            const std::size_t u1 = data_uses * static_cast<std::size_t>(b + 1) / blocks;
            const auto n_uses = static_cast<Eigen::Index>(u1 - u0);
            if (n_uses == 0) {
                continue;
            }

            CMatrix sym(streams, n_uses);
            for (Eigen::Index j = 0; j < n_uses; ++j) {
                for (int k = 0; k < streams; ++k) {
                    sym(k, j) = symbols[(u0 + static_cast<std::size_t>(j)) * streams +
                                        static_cast<std::size_t>(k)];
                }
            }
            const CMatrix& precoder = precoders[static_cast<std::size_t>(b)];
            const PoweredVectors tx = apply_power(precode(sym, precoder), s.power_level_db);
            const CMatrix y = transmit(tx.vectors, hb, nv, rng);

            try {
                const Equalized eq = equalize(y, h_hat, s.equalizer, nv, precoder * amp);
                for (Eigen::Index j = 0; j < n_uses; ++j) {
                    for (int k = 0; k < streams; ++k) {
                        const double g = eq.gain(k);
                        if (!(std::abs(g) > 1e-300) || !std::isfinite(eq.noise_var(k))) {
                            llrs.insert(llrs.end(), static_cast<std::size_t>(bps), 0.0);
                            continue;
                        }
                        con.demap_symbol(eq.symbols(k, j) / g, eq.noise_var(k), llrs);
                    }
                }
            } catch (const NumericalSingularity&) {
                llrs.insert(llrs.end(), static_cast<std::size_t>(n_uses) * bits_per_use, 0.0);
            }
        }

        llrs.resize(coded_len);
        const Bits decoded = decode(llrs, info_len, s.coding, s.code_rate);

        std::int64_t errors = 0;
        for (std::size_t i = 0; i < payload.size(); ++i) {
            errors += decoded[i] != payload[i];
        }
        rep.bit_errors += errors;
        rep.payload_bits += payload_bits;
        rep.frames_total += 1;
        if (check_crc(decoded)) {
            rep.frames_accepted += 1;
        }
        rep.pilot_uses += static_cast<std::int64_t>(blocks) * pilots_per_block;
        rep.channel_uses +=
            static_cast<std::int64_t>(data_uses) + static_cast<std::int64_t>(blocks) * pilots_per_block;
    }

    if (rep.payload_bits > 0) {
        rep.ber = static_cast<double>(rep.bit_errors) / static_cast<double>(rep.payload_bits);
        rep.goodput_ratio = static_cast<double>(rep.frames_accepted) * payload_bits /
                            static_cast<double>(rep.payload_bits);
    }
    if (rep.channel_uses > 0) {
        rep.spectral_rate = static_cast<double>(rep.frames_accepted) * payload_bits /
                            static_cast<double>(rep.channel_uses);
    }
    return rep;
}

} // namespace linkagent
