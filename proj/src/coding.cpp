#include "linkagent/coding.hpp"

#include "linkagent/error.hpp"

#include <array>
#include <bit>
#include <limits>
#include <stdexcept>

namespace linkagent {

std::uint16_t crc16(std::span<const std::uint8_t> bits)
{
    std::uint16_t crc = 0xFFFF;
    for (std::uint8_t b : bits) {
        const bool feedback = ((crc >> 15) & 1U) ^ (b & 1U);
        crc = static_cast<std::uint16_t>(crc << 1);
        if (feedback) {
            crc ^= 0x1021;
        }
    }
    return crc;
}

Bits append_crc(std::span<const std::uint8_t> payload)
{
    Bits out(payload.begin(), payload.end());
    const std::uint16_t crc = crc16(payload);
    for (int i = 15; i >= 0; --i) {
        out.push_back(static_cast<std::uint8_t>((crc >> i) & 1U));
    }
    return out;
}

bool check_crc(std::span<const std::uint8_t> framed)
{
    if (framed.size() < 16) {
        return false;
    }
    const auto body = framed.first(framed.size() - 16);
    const std::uint16_t crc = crc16(body);
    for (int i = 0; i < 16; ++i) {
        if (framed[body.size() + static_cast<std::size_t>(i)] != ((crc >> (15 - i)) & 1U)) {
            return false;
        }
    }
    return true;
}

namespace {

// Keep-masks over the mother-code output sequence A1 B1 A2 B2 ... (IEEE 802.11 style).
constexpr std::array<std::uint8_t, 2> kPunct12{1, 1};
constexpr std::array<std::uint8_t, 4> kPunct23{1, 1, 1, 0};
constexpr std::array<std::uint8_t, 6> kPunct34{1, 1, 1, 0, 0, 1};

std::span<const std::uint8_t> puncture_pattern(CodeRate rate)
{
    switch (rate) {
    case CodeRate::r2_3: return kPunct23;
    case CodeRate::r3_4: return kPunct34;
    default: return kPunct12;
    }
}

constexpr int kStates = 1 << kTailBits;

struct Trellis {
    // out[state][input] = (A << 1) | B
    std::array<std::array<std::uint8_t, 2>, kStates> out{};

    constexpr Trellis()
    {
        for (unsigned p = 0; p < kStates; ++p) {
            for (unsigned u = 0; u < 2; ++u) {
                const unsigned sr = (u << kTailBits) | p;
                const unsigned a = static_cast<unsigned>(std::popcount(sr & kGen0)) & 1U;
                const unsigned b = static_cast<unsigned>(std::popcount(sr & kGen1)) & 1U;
                out[p][u] = static_cast<std::uint8_t>((a << 1) | b);
            }
        }
    }
};

constexpr Trellis kTrellis{};

void check_pair(Coding coding, CodeRate rate)
{
    if (!consistent(coding, rate)) {
        throw InvariantError("code rate " + std::string(to_string(rate)) +
                             " is inconsistent with coding " + std::string(to_string(coding)));
    }
}

std::size_t punctured_length(std::size_t mother_len, std::span<const std::uint8_t> pattern)
{
    std::size_t n = 0;
    for (std::size_t i = 0; i < mother_len; ++i) {
        n += pattern[i % pattern.size()];
    }
    return n;
}

Bits conv_encode(std::span<const std::uint8_t> info, CodeRate rate)
{
    const auto pattern = puncture_pattern(rate);
    const std::size_t steps = info.size() + kTailBits;
    Bits out;
    out.reserve(punctured_length(2 * steps, pattern));
    unsigned state = 0;
    std::size_t pos = 0;
    for (std::size_t t = 0; t < steps; ++t) {
        const unsigned u = t < info.size() ? (info[t] & 1U) : 0U;
        const std::uint8_t ab = kTrellis.out[state][u];
        if (pattern[pos++ % pattern.size()]) {
            out.push_back(static_cast<std::uint8_t>(ab >> 1));
        }
        if (pattern[pos++ % pattern.size()]) {
            out.push_back(static_cast<std::uint8_t>(ab & 1U));
        }
        state = (u << (kTailBits - 1)) | (state >> 1);
    }
    return out;
}

Bits viterbi_decode(std::span<const double> llrs, std::size_t info_bits, CodeRate rate)
{
    const auto pattern = puncture_pattern(rate);
    const std::size_t steps = info_bits + kTailBits;

    // Depuncture: punctured positions carry no information.
    std::vector<double> mother(2 * steps, 0.0);
    std::size_t k = 0;
    for (std::size_t i = 0; i < mother.size(); ++i) {
        if (pattern[i % pattern.size()]) {
            mother[i] = llrs[k++];
        }
    }

    // Both generators tap the newest and the oldest register bit, so predecessors
    // 2j and 2j+1 feed states j and j+32 with complementary branch outputs.
    static_assert((kGen0 & kGen1 & 1U) && ((kGen0 & kGen1) >> kTailBits & 1U));
    constexpr unsigned kHalf = kStates / 2;
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    std::array<double, kStates> metric;
    std::array<double, kStates> next;
    metric.fill(kNegInf);
    metric[0] = 0.0;
    // bit ns of survivor[t]: low bit of the predecessor of state ns
    std::vector<std::uint64_t> survivor(steps);

    for (std::size_t t = 0; t < steps; ++t) {
        const double la = mother[2 * t];
        const double lb = mother[2 * t + 1];
        // Correlation metric: +L for an expected 0, -L for an expected 1.
        const std::array<double, 4> branch{la + lb, la - lb, -la + lb, -la - lb};
        std::uint64_t surv = 0;
        for (unsigned j = 0; j < kHalf; ++j) {
            const double bm = branch[kTrellis.out[2 * j][0]];
            const double a = metric[2 * j];
            const double b = metric[2 * j + 1];
            const double up0 = a + bm;
            const double up1 = b - bm;
            const double lo0 = a - bm;
            const double lo1 = b + bm;
            const bool pick_up = up1 > up0;
            const bool pick_lo = lo1 > lo0;
            next[j] = pick_up ? up1 : up0;
            next[j + kHalf] = pick_lo ? lo1 : lo0;
            surv |= static_cast<std::uint64_t>(pick_up) << j;
            surv |= static_cast<std::uint64_t>(pick_lo) << (j + kHalf);
        }
        if (t >= info_bits) {
            // Tail steps feed zeros.
            std::fill(next.begin() + kHalf, next.end(), kNegInf);
        }
        survivor[t] = surv;
        metric = next;
    }

    Bits out(info_bits);
    unsigned state = 0; // zero-terminated
    for (std::size_t t = steps; t-- > 0;) {
        const unsigned u = state >> (kTailBits - 1);
        if (t < info_bits) {
            out[t] = static_cast<std::uint8_t>(u);
        }
        state = ((state << 1) & (kStates - 1)) | static_cast<unsigned>((survivor[t] >> state) & 1U);
    }
    return out;
}

} // namespace

std::size_t coded_length(std::size_t info_bits, Coding coding, CodeRate rate)
{
    check_pair(coding, rate);
    switch (coding) {
    case Coding::uncoded: return info_bits;
    case Coding::repetition3: return 3 * info_bits;
    case Coding::conv_k7:
        return punctured_length(2 * (info_bits + kTailBits), puncture_pattern(rate));
    }
    return info_bits;
}

Bits encode(std::span<const std::uint8_t> info, Coding coding, CodeRate rate)
{
    check_pair(coding, rate);
    switch (coding) {
    case Coding::uncoded: return Bits(info.begin(), info.end());
    case Coding::repetition3: {
        Bits out;
        out.reserve(3 * info.size());
        for (std::uint8_t b : info) {
            out.insert(out.end(), 3, b);
        }
        return out;
    }
    case Coding::conv_k7: return conv_encode(info, rate);
    }
    return {};
}

Bits decode(std::span<const double> llrs, std::size_t info_bits, Coding coding, CodeRate rate)
{
    const std::size_t expected = coded_length(info_bits, coding, rate);
    if (llrs.size() != expected) {
        throw std::invalid_argument("decode: expected " + std::to_string(expected) +
                                    " LLRs, got " + std::to_string(llrs.size()));
    }
    switch (coding) {
    case Coding::uncoded: {
        Bits out(info_bits);
        for (std::size_t i = 0; i < info_bits; ++i) {
            out[i] = llrs[i] < 0.0 ? 1 : 0;
        }
        return out;
    }
    case Coding::repetition3: {
        Bits out(info_bits);
        for (std::size_t i = 0; i < info_bits; ++i) {
            const double sum = llrs[3 * i] + llrs[3 * i + 1] + llrs[3 * i + 2];
            out[i] = sum < 0.0 ? 1 : 0;
        }
        return out;
    }
    case Coding::conv_k7: return viterbi_decode(llrs, info_bits, rate);
    }
    return {};
}

} // namespace linkagent
