#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace linkagent {

enum class Coding { uncoded, repetition3, conv_k7 };
enum class CodeRate { r1, r1_3, r1_2, r2_3, r3_4 };
enum class Modulation { bpsk, qpsk, qam16, qam64, qam256 };
enum class Precoding { identity, svd_rank1, svd_full };
enum class Estimator { perfect, ls, lmmse };
enum class Equalizer { zf, mmse };

inline constexpr std::array<Coding, 3> kAllCodings{Coding::uncoded, Coding::repetition3,
                                                   Coding::conv_k7};
inline constexpr std::array<CodeRate, 5> kAllCodeRates{CodeRate::r1, CodeRate::r1_3, CodeRate::r1_2,
                                                       CodeRate::r2_3, CodeRate::r3_4};
inline constexpr std::array<Modulation, 5> kAllModulations{
    Modulation::bpsk, Modulation::qpsk, Modulation::qam16, Modulation::qam64, Modulation::qam256};
inline constexpr std::array<int, 4> kAllPowerLevelsDb{-3, 0, 3, 6};
inline constexpr std::array<Precoding, 3> kAllPrecodings{Precoding::identity, Precoding::svd_rank1,
                                                         Precoding::svd_full};
inline constexpr std::array<Estimator, 3> kAllEstimators{Estimator::perfect, Estimator::ls,
                                                         Estimator::lmmse};
inline constexpr std::array<Equalizer, 2> kAllEqualizers{Equalizer::zf, Equalizer::mmse};

int bits_per_symbol(Modulation m);
double code_rate_value(CodeRate r);
/// Numerator/denominator of the rate, e.g. {2, 3}.
std::pair<int, int> code_rate_fraction(CodeRate r);

bool consistent(Coding c, CodeRate r);

/// One complete physical-layer configuration.
struct LinkStrategy {
    Coding coding = Coding::uncoded;
    CodeRate code_rate = CodeRate::r1;
    Modulation modulation = Modulation::bpsk;
    int power_level_db = 0;
    Precoding precoding = Precoding::identity;
    Estimator estimator = Estimator::lmmse;
    Equalizer equalizer = Equalizer::mmse;

    bool operator==(const LinkStrategy&) const = default;
};

/// Number of spatial streams the strategy's precoder carries on an n_tx x n_rx array.
int stream_count(Precoding p, int n_tx, int n_rx);

/// Empty when valid, otherwise a description of the first violated invariant.
std::optional<std::string> strategy_violation(const LinkStrategy& s);

/// Throws InvariantError if the strategy is invalid.
void validate_strategy(const LinkStrategy& s);

std::string_view to_string(Coding c);
std::string_view to_string(CodeRate r);
std::string_view to_string(Modulation m);
std::string_view to_string(Precoding p);
std::string_view to_string(Estimator e);
std::string_view to_string(Equalizer e);

/// Inverse of to_string; std::nullopt for unknown names.
std::optional<Coding> coding_from_string(std::string_view s);
std::optional<CodeRate> code_rate_from_string(std::string_view s);
std::optional<Modulation> modulation_from_string(std::string_view s);
std::optional<Precoding> precoding_from_string(std::string_view s);
std::optional<Estimator> estimator_from_string(std::string_view s);
std::optional<Equalizer> equalizer_from_string(std::string_view s);

/// Compact one-line rendering, e.g. "conv_k7 1/2 QAM16 +3dB svd_rank1 lmmse mmse".
std::string describe(const LinkStrategy& s);

} // namespace linkagent
