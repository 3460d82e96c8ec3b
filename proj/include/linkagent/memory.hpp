#pragma once

#include "linkagent/channel_env.hpp"
#include "linkagent/intent.hpp"
#include "linkagent/json_util.hpp"
#include "linkagent/link.hpp"
#include "linkagent/strategy.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <string>
#include <vector>

namespace linkagent {

/// One closed-loop interaction as remembered by the agent.
struct Episode {
    CsiFeatures features;
    IntentClass intent = IntentClass::high_throughput;
    IntentWeights weights;
    LinkStrategy strategy;
    LinkReport report;
    double reward = 0.0;
    std::uint64_t seed = 0;      // rng stream id of the episode
    std::uint64_t timestamp = 0; // monotonic counter; larger is newer
    std::string scenario_id;
    std::string intent_text;

    bool operator==(const Episode&) const = default;
};

void to_json(Json& j, const Episode& e);
void from_json(const Json& j, Episode& e);

struct MemoryConfig {
    std::size_t capacity = 2000;       // total entries across all classes
    double quality_quantile = 0.5;     // gate: reward >= this quantile of recent class rewards
    std::size_t bootstrap = 20;        // first N episodes of a class bypass the gate
    std::size_t history_window = 200;  // rewards kept per class for the rolling quantile
    RewardConfig reward;               // used to recompute rewards on insert

    bool operator==(const MemoryConfig&) const = default;
};

/// Scaled Euclidean distance over (snr_db/4, cond_db/5, selectivity/0.3).
double feature_distance(const CsiFeatures& a, const CsiFeatures& b);

/// Store of high-quality episodes with nearest-neighbour retrieval per intent class.
///
/// Single writer; const members are safe to call concurrently.
class MemoryStore {
public:
    static constexpr int kFormatVersion = 1;

    explicit MemoryStore(MemoryConfig cfg = {});

    const MemoryConfig& config() const { return cfg_; }

    /// Quality-gated insert using config().capacity. Returns whether the episode was kept.
    /// Throws IntegrityError if e.reward differs from the reward recomputed from e.report.
    bool store(const Episode& e);
    bool store(const Episode& e, std::size_t capacity);

    /// Up to k same-class entries by ascending feature_distance, ties newest first.
    std::vector<Episode> retrieve(const CsiFeatures& f, IntentClass c, std::size_t k) const;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<Episode>& entries() const { return entries_; }

    /// Lowest stored reward of the class; +inf if the class has no entries.
    double class_min_reward(IntentClass c) const;

    Json to_json() const;
    /// Throws PersistenceError on malformed input or a version mismatch.
    static MemoryStore from_json(const Json& j);

    void save(const std::filesystem::path& path) const;
    /// Validates the whole file before returning; no partially loaded store is ever produced.
    static MemoryStore load(const std::filesystem::path& path);

private:
    bool passes_gate(IntentClass c, double reward) const;

    MemoryConfig cfg_;
    std::vector<Episode> entries_;
    std::array<std::deque<double>, 3> history_;
    std::array<std::uint64_t, 3> seen_{};
};

} // namespace linkagent
