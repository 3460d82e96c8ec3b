#include "linkagent/intent.hpp"

#include "linkagent/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <vector>

namespace linkagent {

namespace {

constexpr std::array<std::string_view, 4> kThroughputWords{"throughput", "rate", "fast", "speed"};
constexpr std::array<std::string_view, 5> kReliabilityWords{"reliable", "reliability", "robust",
                                                            "error-free", "ultra-reliable"};
constexpr std::array<std::string_view, 4> kEnergyWords{"energy", "power-saving", "battery",
                                                       "green"};

constexpr std::array<std::string_view, 6> kThroughputTemplates{
    "maximize my data rate please",
    "I want the highest throughput you can give me",
    "stream this as fast as possible",
    "prioritize speed, I am downloading a large file",
    "push the rate up, a few errors are fine",
    "high throughput mode for video upload",
};
constexpr std::array<std::string_view, 6> kReliabilityTemplates{
    "I need a reliable link for control traffic",
    "make the connection as robust as possible",
    "error-free delivery matters most",
    "ultra-reliable operation, do not drop anything",
    "reliability first, rate is secondary",
    "keep this telemetry link reliable under fading",
};
constexpr std::array<std::string_view, 6> kEnergyTemplates{
    "save energy, my battery is low",
    "use a power-saving configuration",
    "keep transmit energy down",
    "go green and minimize power draw",
    "battery life is the priority for this sensor",
    "energy efficient mode please",
};

std::string lowercase(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Lowercased words of [a-z0-9-]. Each word is kept together with its hyphen
/// parts so "ultra-reliable" matches both itself and "reliable" as one hit.
std::vector<std::vector<std::string>> tokenize(std::string_view text)
{
    std::vector<std::vector<std::string>> words;
    std::string cur;
    auto flush = [&] {
        while (!cur.empty() && cur.front() == '-') {
            cur.erase(cur.begin());
        }
        while (!cur.empty() && cur.back() == '-') {
            cur.pop_back();
        }
        if (cur.empty()) {
            return;
        }
        std::vector<std::string> forms{cur};
        if (cur.find('-') != std::string::npos) {
            std::size_t start = 0;
            while (start <= cur.size()) {
                const std::size_t end = std::min(cur.find('-', start), cur.size());
                if (end > start) {
                    forms.push_back(cur.substr(start, end - start));
                }
                start = end + 1;
            }
        }
        words.push_back(std::move(forms));
        cur.clear();
    };
    for (char ch : lowercase(text)) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c == '-') {
            cur.push_back(static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return words;
}

template <std::size_t N>
int count_hits(const std::vector<std::vector<std::string>>& words,
               const std::array<std::string_view, N>& keywords)
{
    int hits = 0;
    for (const auto& forms : words) {
        const bool hit = std::any_of(forms.begin(), forms.end(), [&](const std::string& f) {
            return std::find(keywords.begin(), keywords.end(), f) != keywords.end();
        });
        hits += hit ? 1 : 0;
    }
    return hits;
}

} // namespace

std::string_view to_string(IntentClass c)
{
    switch (c) {
    case IntentClass::high_throughput: return "HighThroughput";
    case IntentClass::high_reliability: return "HighReliability";
    case IntentClass::energy_aware: return "EnergyAware";
    }
    return "?";
}

std::optional<IntentClass> intent_class_from_string(std::string_view s)
{
    for (auto c : kAllIntentClasses) {
        if (to_string(c) == s) {
            return c;
        }
    }
    return std::nullopt;
}

std::string_view IntentError::code_name() const noexcept
{
    return code_ == Code::missing_intent ? "MissingIntent" : "UnrecognizedIntent";
}

std::string_view IntentError::guidance() noexcept
{
    return "describe what matters most, e.g. 'maximize throughput', 'I need a reliable link', "
           "or 'save battery energy'";
}

WeightTable::WeightTable()
    : table_{IntentWeights{1.0, 0.4, 0.1}, IntentWeights{0.2, 1.0, 0.1},
             IntentWeights{0.4, 0.4, 1.0}}
{
}

void validate_weights(const IntentWeights& w)
{
    const bool finite = std::isfinite(w.rate) && std::isfinite(w.ber) && std::isfinite(w.power);
    if (!finite || w.rate < 0.0 || w.ber < 0.0 || w.power < 0.0) {
        throw ConfigError("intent weights must be finite and nonnegative", "intent_weights");
    }
    if (std::max({w.rate, w.ber, w.power}) <= 0.0) {
        throw ConfigError("intent weights must not all be zero", "intent_weights");
    }
}

void WeightTable::set(IntentClass c, const IntentWeights& w)
{
    validate_weights(w);
    table_[static_cast<std::size_t>(c)] = w;
}

IntentWeights weights_for(IntentClass c, const WeightTable& table)
{
    return table.get(c);
}

IntentSpec parse_intent(std::string_view text, const WeightTable& table)
{
    const bool blank = std::all_of(text.begin(), text.end(), [](char ch) {
        return std::isspace(static_cast<unsigned char>(ch)) != 0;
    });
    if (blank) {
        throw IntentError(IntentError::Code::missing_intent, "intent text is empty");
    }
    const auto tokens = tokenize(text);
    const int thr = count_hits(tokens, kThroughputWords);
    const int rel = count_hits(tokens, kReliabilityWords);
    const int eng = count_hits(tokens, kEnergyWords);
    if (thr + rel + eng == 0) {
        throw IntentError(IntentError::Code::unrecognized_intent,
                          "no intent keyword recognized in: \"" + std::string(text) + "\"");
    }

    // Priority order doubles as the tie-break.
    IntentClass cls = IntentClass::high_reliability;
    int best = rel;
    if (eng > best) {
        cls = IntentClass::energy_aware;
        best = eng;
    }
    if (thr > best) {
        cls = IntentClass::high_throughput;
    }
    return IntentSpec{cls, table.get(cls), std::string(text)};
}

std::span<const std::string_view> intent_templates(IntentClass c)
{
    switch (c) {
    case IntentClass::high_throughput: return kThroughputTemplates;
    case IntentClass::high_reliability: return kReliabilityTemplates;
    case IntentClass::energy_aware: return kEnergyTemplates;
    }
    return {};
}

RewardConfig RewardConfig::for_array(int n_tx, int n_rx)
{
    const int max_streams =
        std::max({stream_count(Precoding::identity, n_tx, n_rx),
                  stream_count(Precoding::svd_full, n_tx, n_rx), 1});
    return RewardConfig{max_streams * 8 * 0.75};
}

RewardBreakdown compute_reward(const LinkReport& report, const IntentWeights& weights,
                               const RewardConfig& cfg)
{
    static const double p_min = std::log(std::pow(10.0, -0.3));
    static const double p_max = std::log(std::pow(10.0, 0.6));

    RewardBreakdown r;
    r.weights = weights;
    r.term_rate = std::clamp(report.spectral_rate / cfg.r_max, 0.0, 1.0);
    r.term_ber =
        std::clamp((std::log10(std::max(report.ber, kBerFloor)) + 6.0) / 6.0, 0.0, 1.0);
    r.term_power = std::clamp((report.p_extra - p_min) / (p_max - p_min), 0.0, 1.0);
    r.r_total = weights.rate * r.term_rate - weights.ber * r.term_ber -
                weights.power * r.term_power;
    return r;
}

RewardBreakdown compute_reward(const LinkReport& report, const IntentSpec& intent,
                               const RewardConfig& cfg)
{
    return compute_reward(report, intent.weights, cfg);
}

} // namespace linkagent
