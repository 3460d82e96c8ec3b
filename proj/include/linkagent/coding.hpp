#pragma once

#include "linkagent/strategy.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace linkagent {

/// Bits are stored one per byte, values 0 or 1.
using Bits = std::vector<std::uint8_t>;

/// CRC-16/CCITT-FALSE over a bit string: poly 0x1021, init 0xFFFF, MSB first,
/// no reflection, no final xor.
std::uint16_t crc16(std::span<const std::uint8_t> bits);

/// Appends the 16 CRC bits (MSB first).
Bits append_crc(std::span<const std::uint8_t> payload);

/// True iff the trailing 16 bits equal the CRC of the preceding bits.
bool check_crc(std::span<const std::uint8_t> framed);

/// Convolutional code parameters: K = 7, generators 171/133 octal.
inline constexpr int kConstraintLength = 7;
inline constexpr int kTailBits = kConstraintLength - 1;
inline constexpr unsigned kGen0 = 0171;
inline constexpr unsigned kGen1 = 0133;

/// Number of coded bits produced for `info_bits` input bits.
std::size_t coded_length(std::size_t info_bits, Coding coding, CodeRate rate);

/// uncoded: identity; repetition3: each bit three times; conv_k7: zero-terminated
/// mother code punctured to 2/3 or 3/4. Throws InvariantError for a mismatched pair.
Bits encode(std::span<const std::uint8_t> info, Coding coding, CodeRate rate);

/// Inverse of encode from LLRs (positive => bit 0). Soft Viterbi for conv_k7
/// with punctured positions depunctured as LLR 0. Throws std::invalid_argument
/// if llrs.size() != coded_length(info_bits, ...).
Bits decode(std::span<const double> llrs, std::size_t info_bits, Coding coding, CodeRate rate);

} // namespace linkagent
