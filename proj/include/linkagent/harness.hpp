#pragma once

#include "linkagent/channel_env.hpp"
#include "linkagent/intent.hpp"
#include "linkagent/memory.hpp"
#include "linkagent/policy.hpp"
#include "linkagent/provider.hpp"

#include <array>
#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace linkagent {

enum class PolicyKind { lut, bandit, external, random };

std::string_view to_string(PolicyKind k);
std::optional<PolicyKind> policy_kind_from_string(std::string_view s);

struct TrainingConfig {
    int episodes_per_class = 5000;
    int eval_episodes = 68; // per (scenario, intent) pair
    int frames = kDefaultFrames;
    int payload_bits = kDefaultPayloadBits;
    bool use_memory = true;
    int curve_window = 100;
    BanditParams bandit;
    MemoryConfig memory;
    CalibrationConfig calibration;
};

struct AppConfig {
    std::vector<ScenarioSpec> grid;
    ActionSpaceConfig action_space;
    WeightTable weights;
    TrainingConfig training;
    ProviderEndpoint provider;

    RewardConfig reward() const;
};

/// Sections: scenario_grid (path relative to the config file, or an inline list),
/// action_space, intent_weights, training, provider_endpoint. Only scenario_grid is
/// required. Every error is a ConfigError naming the field.
AppConfig parse_app_config(const Json& j, const std::filesystem::path& base_dir);
AppConfig load_app_config(const std::filesystem::path& path);

/// Everything a policy needs to act inside the closed loop.
struct Agent {
    PolicyKind kind = PolicyKind::random;
    const ActionSpace* space = nullptr;
    WeightTable weights;
    RewardConfig reward;
    int frames = kDefaultFrames;
    int payload_bits = kDefaultPayloadBits;

    PolicyState* policy = nullptr;   // bandit
    MemoryStore* memory = nullptr;   // warm-start source; written to when learning
    const LutTable* lut = nullptr;   // lut, and the external fallback
    DecisionProvider* provider = nullptr;
    std::chrono::milliseconds provider_timeout{2000};

    bool learn = false;                    // update policy and memory after each episode
    std::optional<double> epsilon;         // overrides the policy's schedule (0 = greedy)
    std::uint64_t clock = 0;               // episode timestamps

    /// Throws ConfigError if the pieces the policy needs are missing.
    void check() const;
};

struct EpisodeResult {
    Episode episode;
    IntentSpec intent;
    RewardBreakdown reward;
    bool fallback = false;
    std::string fallback_cause;
    std::string rationale;
};

/// One closed-loop pass on a given channel: features -> parse intent -> decide ->
/// run_link -> reward -> (if learning) update policy and memory. The decision draws
/// from derive_stream(stream, 3, 0) and the link from derive_stream(stream, 2, 0).
/// Intent errors propagate to the caller.
EpisodeResult run_episode(const ChannelState& cs, std::string_view intent_text, Agent& agent,
                          std::uint64_t stream);

/// Channel of an episode stream: generate_channel(spec, derive_stream(stream, 1, 0)).
ChannelState episode_channel(const ScenarioSpec& spec, std::uint64_t stream);

/// Template paraphrase picked by the stream.
std::string episode_intent_text(IntentClass c, std::uint64_t stream);

struct TrainResult {
    PolicyState policy;
    MemoryStore memory;
    std::vector<Episode> log;
    std::vector<double> curve; // mean reward per window, in episode order
};

/// Trains the bandit for `episodes_per_class` episodes of each intent class. Rounds
/// visit every (scenario, class) pair in a seeded shuffled order; updates are applied
/// in episode order. Episode i uses stream derive_stream(master, train domain, i).
TrainResult train_policy(const AppConfig& cfg, std::uint64_t master_seed, int episodes_per_class,
                         bool use_memory);

/// Window means of the rewards in log order; the last window may be partial.
std::vector<double> learning_curve(const std::vector<Episode>& log, int window);

std::uint64_t eval_stream(std::uint64_t master_seed, const std::string& scenario_id,
                          IntentClass c, int rep);

/// Runs every (scenario, class, rep) with the agent, in grid order. Streams are
/// keyed by (scenario_id, class, rep), so results do not depend on the grid order,
/// and are disjoint from training streams.
std::vector<EpisodeResult> closed_loop_eval(const std::vector<ScenarioSpec>& grid,
                                            const std::vector<IntentClass>& intents, Agent& agent,
                                            std::uint64_t master_seed, int episodes_per_pair);

inline constexpr std::array<const char*, 4> kMetricNames{"ber", "spectral_rate", "goodput_ratio",
                                                         "p_extra"};

double metric_value(const Episode& e, std::size_t metric);

struct MetricSummary {
    double mean = 0.0;
    double ci95 = 0.0; // 1.96 * sample std / sqrt(n); 0 when n = 1
};

struct AggregateRow {
    IntentClass intent = IntentClass::high_throughput;
    double snr_db = 0.0;
    std::size_t n = 0;
    bool single = false; // n = 1, half-width undefined
    std::array<MetricSummary, 4> metrics{};
    double mean_reward = 0.0;
};

struct AggregateResults {
    std::string policy;
    std::vector<AggregateRow> rows; // sorted by (intent, snr_db)
};

/// Groups by (intent class, snr_db). Throws InvariantError on an empty log.
AggregateResults aggregate(const std::vector<Episode>& log, std::string policy = {});

std::string aggregates_csv(const AggregateResults& r);
std::string plot_csv(const AggregateResults& r, std::size_t metric);
std::string episodes_jsonl(const std::vector<Episode>& log);

/// Writes episodes.jsonl, aggregates.csv, plot_<metric>.csv and summary.json. All
/// content is rendered before the first write; an unusable directory fails first.
void export_results(const AggregateResults& r, const std::vector<Episode>& log,
                    const std::filesystem::path& outdir);

/// Throws ConfigError unless `dir` exists (or can be created) and is writable.
void ensure_writable_dir(const std::filesystem::path& dir);

std::string format_number(double v);

} // namespace linkagent
