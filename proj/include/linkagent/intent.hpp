#pragma once

#include "linkagent/link.hpp"

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace linkagent {

enum class IntentClass { high_throughput, high_reliability, energy_aware };

inline constexpr std::array<IntentClass, 3> kAllIntentClasses{
    IntentClass::high_throughput, IntentClass::high_reliability, IntentClass::energy_aware};

/// "HighThroughput", "HighReliability", "EnergyAware".
std::string_view to_string(IntentClass c);
std::optional<IntentClass> intent_class_from_string(std::string_view s);

/// Preference weights on (rate, BER, power); nonnegative, not all zero.
struct IntentWeights {
    double rate = 0.0;
    double ber = 0.0;
    double power = 0.0;

    bool operator==(const IntentWeights&) const = default;
};

struct IntentSpec {
    IntentClass cls = IntentClass::high_throughput;
    IntentWeights weights;
    std::string raw_text;

    bool operator==(const IntentSpec&) const = default;
};

class IntentError : public std::runtime_error {
public:
    enum class Code { missing_intent, unrecognized_intent };

    IntentError(Code code, const std::string& msg) : std::runtime_error(msg), code_(code) {}

    Code code() const noexcept { return code_; }
    /// "MissingIntent" / "UnrecognizedIntent".
    std::string_view code_name() const noexcept;
    /// Short hint for a human on how to phrase a usable intent.
    static std::string_view guidance() noexcept;

private:
    Code code_;
};

/// Per-class weight triples. Defaults: HighThroughput (1.0, 0.4, 0.1),
/// HighReliability (0.2, 1.0, 0.1), EnergyAware (0.4, 0.4, 1.0).
class WeightTable {
public:
    WeightTable();

    const IntentWeights& get(IntentClass c) const { return table_[static_cast<std::size_t>(c)]; }
    /// Throws ConfigError if the weights are negative or all zero.
    void set(IntentClass c, const IntentWeights& w);

    bool operator==(const WeightTable&) const = default;

private:
    std::array<IntentWeights, 3> table_;
};

IntentWeights weights_for(IntentClass c, const WeightTable& table = WeightTable{});

void validate_weights(const IntentWeights& w);

/// Keyword classifier (case-insensitive, whole words and hyphen parts):
///   throughput/rate/fast/speed                              -> HighThroughput
///   reliable/reliability/robust/error-free/ultra-reliable   -> HighReliability
///   energy/power-saving/battery/green                       -> EnergyAware
/// The class with most hits wins; ties go Reliability > Energy > Throughput.
/// Throws IntentError (missing_intent for blank text, unrecognized_intent for no hits).
IntentSpec parse_intent(std::string_view text, const WeightTable& table = WeightTable{});

/// Bundled paraphrases used to generate training and evaluation intents.
std::span<const std::string_view> intent_templates(IntentClass c);

/// Normalization constants of the reward terms.
struct RewardConfig {
    double r_max = 12.0; // max streams * 8 bits * 3/4

    static RewardConfig for_array(int n_tx, int n_rx);
};

struct RewardBreakdown {
    double r_total = 0.0;
    double term_rate = 0.0;
    double term_ber = 0.0;
    double term_power = 0.0;
    IntentWeights weights;

    bool operator==(const RewardBreakdown&) const = default;
};

inline constexpr double kBerFloor = 1e-6;

/// r_total = w_rate * term_rate - w_ber * term_ber - w_power * term_power, with
///   term_rate  = spectral_rate / r_max
///   term_ber   = (log10(max(ber, 1e-6)) + 6) / 6
///   term_power = (p_extra - ln 10^-0.3) / (ln 10^0.6 - ln 10^-0.3)
/// each clamped to [0, 1].
RewardBreakdown compute_reward(const LinkReport& report, const IntentSpec& intent,
                               const RewardConfig& cfg = RewardConfig{});

RewardBreakdown compute_reward(const LinkReport& report, const IntentWeights& weights,
                               const RewardConfig& cfg = RewardConfig{});

} // namespace linkagent
