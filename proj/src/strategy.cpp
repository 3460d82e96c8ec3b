#include "linkagent/strategy.hpp"

#include "linkagent/error.hpp"

#include <algorithm>

namespace linkagent {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(std::string_view s, const std::array<E, N>& all)
{
    for (E e : all) {
        if (to_string(e) == s) {
            return e;
        }
    }
    return std::nullopt;
}

} // namespace

int bits_per_symbol(Modulation m)
{
    switch (m) {
    case Modulation::bpsk: return 1;
    case Modulation::qpsk: return 2;
    case Modulation::qam16: return 4;
    case Modulation::qam64: return 6;
    case Modulation::qam256: return 8;
    }
    return 1;
}

std::pair<int, int> code_rate_fraction(CodeRate r)
{
    switch (r) {
    case CodeRate::r1: return {1, 1};
    case CodeRate::r1_3: return {1, 3};
    case CodeRate::r1_2: return {1, 2};
    case CodeRate::r2_3: return {2, 3};
    case CodeRate::r3_4: return {3, 4};
    }
    return {1, 1};
}

double code_rate_value(CodeRate r)
{
    const auto [num, den] = code_rate_fraction(r);
    return static_cast<double>(num) / den;
}

bool consistent(Coding c, CodeRate r)
{
    switch (c) {
    case Coding::uncoded: return r == CodeRate::r1;
    case Coding::repetition3: return r == CodeRate::r1_3;
    case Coding::conv_k7:
        return r == CodeRate::r1_2 || r == CodeRate::r2_3 || r == CodeRate::r3_4;
    }
    return false;
}

int stream_count(Precoding p, int n_tx, int n_rx)
{
    switch (p) {
    case Precoding::identity: return n_tx;
    case Precoding::svd_rank1: return 1;
    case Precoding::svd_full: return std::min(n_tx, n_rx);
    }
    return 1;
}

std::optional<std::string> strategy_violation(const LinkStrategy& s)
{
    if (!consistent(s.coding, s.code_rate)) {
        return "code_rate " + std::string(to_string(s.code_rate)) + " is not valid for coding " +
               std::string(to_string(s.coding));
    }
    if (std::find(kAllPowerLevelsDb.begin(), kAllPowerLevelsDb.end(), s.power_level_db) ==
        kAllPowerLevelsDb.end()) {
        return "power_level_db " + std::to_string(s.power_level_db) + " is not in {-3, 0, 3, 6}";
    }
    return std::nullopt;
}

void validate_strategy(const LinkStrategy& s)
{
    if (auto v = strategy_violation(s)) {
        throw InvariantError(*v);
    }
}

std::string_view to_string(Coding c)
{
    switch (c) {
    case Coding::uncoded: return "uncoded";
    case Coding::repetition3: return "repetition3";
    case Coding::conv_k7: return "conv_k7";
    }
    return "?";
}

std::string_view to_string(CodeRate r)
{
    switch (r) {
    case CodeRate::r1: return "1";
    case CodeRate::r1_3: return "1/3";
    case CodeRate::r1_2: return "1/2";
    case CodeRate::r2_3: return "2/3";
    case CodeRate::r3_4: return "3/4";
    }
    return "?";
}

std::string_view to_string(Modulation m)
{
    switch (m) {
    case Modulation::bpsk: return "BPSK";
    case Modulation::qpsk: return "QPSK";
    case Modulation::qam16: return "QAM16";
    case Modulation::qam64: return "QAM64";
    case Modulation::qam256: return "QAM256";
    }
    return "?";
}

std::string_view to_string(Precoding p)
{
    switch (p) {
    case Precoding::identity: return "identity";
    case Precoding::svd_rank1: return "svd_rank1";
    case Precoding::svd_full: return "svd_full";
    }
    return "?";
}

std::string_view to_string(Estimator e)
{
    switch (e) {
    case Estimator::perfect: return "perfect";
    case Estimator::ls: return "ls";
    case Estimator::lmmse: return "lmmse";
    }
    return "?";
}

std::string_view to_string(Equalizer e)
{
    switch (e) {
    case Equalizer::zf: return "zf";
    case Equalizer::mmse: return "mmse";
    }
    return "?";
}

std::optional<Coding> coding_from_string(std::string_view s) { return lookup(s, kAllCodings); }
std::optional<CodeRate> code_rate_from_string(std::string_view s) { return lookup(s, kAllCodeRates); }
std::optional<Modulation> modulation_from_string(std::string_view s)
{
    return lookup(s, kAllModulations);
}
std::optional<Precoding> precoding_from_string(std::string_view s)
{
    return lookup(s, kAllPrecodings);
}
std::optional<Estimator> estimator_from_string(std::string_view s)
{
    return lookup(s, kAllEstimators);
}
std::optional<Equalizer> equalizer_from_string(std::string_view s)
{
    return lookup(s, kAllEqualizers);
}

std::string describe(const LinkStrategy& s)
{
    std::string out;
    out += to_string(s.coding);
    out += ' ';
    out += to_string(s.code_rate);
    out += ' ';
    out += to_string(s.modulation);
    out += ' ';
    out += (s.power_level_db > 0 ? "+" : "") + std::to_string(s.power_level_db) + "dB ";
    out += to_string(s.precoding);
    out += ' ';
    out += to_string(s.estimator);
    out += ' ';
    out += to_string(s.equalizer);
    return out;
}

} // namespace linkagent
