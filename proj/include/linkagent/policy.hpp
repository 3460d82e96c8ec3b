#pragma once

#include "linkagent/channel_env.hpp"
#include "linkagent/intent.hpp"
#include "linkagent/json_util.hpp"
#include "linkagent/memory.hpp"
#include "linkagent/rng.hpp"
#include "linkagent/strategy.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace linkagent {

// Sub-actions are decided in this order. A strategy's "digits" are the enum
// indices of its sub-actions in this order (power: index into kAllPowerLevelsDb).
inline constexpr int kSubActions = 7;
using Digits = std::array<std::uint8_t, kSubActions>;

Digits strategy_digits(const LinkStrategy& s);
LinkStrategy strategy_from_digits(const Digits& d);
int power_index(int power_level_db); // -1 if not a known level

/// Allowed values per sub-action dimension.
struct ActionSpaceConfig {
    std::vector<Coding> codings{kAllCodings.begin(), kAllCodings.end()};
    std::vector<CodeRate> code_rates{kAllCodeRates.begin(), kAllCodeRates.end()};
    std::vector<Modulation> modulations{kAllModulations.begin(), kAllModulations.end()};
    std::vector<int> power_levels_db{kAllPowerLevelsDb.begin(), kAllPowerLevelsDb.end()};
    std::vector<Precoding> precodings{kAllPrecodings.begin(), kAllPrecodings.end()};
    std::vector<Estimator> estimators{Estimator::ls, Estimator::lmmse};
    std::vector<Equalizer> equalizers{kAllEqualizers.begin(), kAllEqualizers.end()};

    /// Throws ConfigError on an empty dimension, a duplicate or an unknown power level.
    void validate() const;
    bool operator==(const ActionSpaceConfig&) const = default;
};

void to_json(Json& j, const ActionSpaceConfig& c);
ActionSpaceConfig action_space_from_json(const Json& j, const std::string& context);

/// All invariant-satisfying joint assignments, ordered lexicographically by digits.
std::vector<LinkStrategy> enumerate_actions(const ActionSpaceConfig& cfg);

/// Enumerated action space with digit views for prefix matching.
class ActionSpace {
public:
    explicit ActionSpace(ActionSpaceConfig cfg = {});

    const ActionSpaceConfig& config() const { return cfg_; }
    const std::vector<LinkStrategy>& strategies() const { return strategies_; }
    const std::vector<Digits>& digits() const { return digits_; }
    std::size_t size() const { return strategies_.size(); }
    bool contains(const LinkStrategy& s) const;

private:
    ActionSpaceConfig cfg_;
    std::vector<LinkStrategy> strategies_;
    std::vector<Digits> digits_;
};

struct ContextKey {
    int snr_bin = 0;  // floor(snr_db / 2)
    int cond_bin = 0; // [0,5) [5,10) [10,inf) dB
    int sel_bin = 0;  // [0,0.05) [0.05,0.3) [0.3,1]
    IntentClass intent = IntentClass::high_throughput;

    std::uint32_t pack() const;
    static ContextKey unpack(std::uint32_t v);
    bool operator==(const ContextKey&) const = default;
};

ContextKey context_key(const CsiFeatures& f, IntentClass c);

struct ValueStat {
    double mean = 0.0;
    std::uint64_t count = 0;
    bool operator==(const ValueStat&) const = default;
};

struct BanditParams {
    double epsilon0 = 0.3;
    double decay = 0.999;
    double epsilon_min = 0.02;
    double initial_value = 1.0; // estimate of a never-tried candidate
    std::size_t memory_k = 16;  // episodes retrieved for a warm start
    bool operator==(const BanditParams&) const = default;
};

void to_json(Json& j, const BanditParams& p);
BanditParams bandit_params_from_json(const Json& j, const std::string& context);

/// Key of the value-table entry for the first depth+1 digits of a strategy.
std::uint64_t value_key(std::uint32_t ctx, int depth, const Digits& digits);

/// Prefix-conditioned value table of the sequential bandit.
class PolicyState {
public:
    static constexpr int kFormatVersion = 1;

    explicit PolicyState(BanditParams params = {});

    const BanditParams& params() const { return params_; }
    double epsilon() const { return epsilon_; }
    std::uint64_t step() const { return step_; }
    const std::map<std::uint64_t, ValueStat>& values() const { return values_; }

    const ValueStat* find(std::uint64_t key) const;
    bool visited(const ContextKey& ctx) const { return visited_.count(ctx.pack()) != 0; }

    /// Incremental-mean update of every prefix node of `s` under `ctx`, then one
    /// exploration decay step. Throws InvariantError on a non-finite reward.
    void update(const ContextKey& ctx, const LinkStrategy& s, double reward);

    /// Folds remembered episodes into the table of an unvisited context as ordinary
    /// observations, without touching the exploration schedule. Returns the number used.
    std::size_t warm_start(const ContextKey& ctx, const std::vector<Episode>& episodes,
                           const ActionSpace& space);

    Json to_json() const;
    static PolicyState from_json(const Json& j);
    void save(const std::filesystem::path& path) const;
    static PolicyState load(const std::filesystem::path& path);

    bool operator==(const PolicyState&) const = default;

private:
    void observe(std::uint32_t ctx, const Digits& d, double reward);

    BanditParams params_;
    double epsilon_;
    std::uint64_t step_ = 0;
    std::map<std::uint64_t, ValueStat> values_;
    std::set<std::uint32_t> visited_;
};

/// Sequential epsilon-greedy decision. Per sub-action: with probability epsilon, the
/// digit of a uniformly drawn valid strategy extending the current prefix (so
/// epsilon = 1 is uniform over the action space); otherwise the candidate with the
/// highest estimate, ties to the lowest digit. When `mem` is given and the context
/// has never been visited, estimates come from retrieved episodes instead.
///
/// Never-tried candidates are valued at params().initial_value while learning
/// (optimistic exploration). With `learning` false they rank below every tried
/// candidate, so a frozen table only exploits what it has seen.
/// Consumes a fixed number of draws per call.
LinkStrategy decide_bandit(const CsiFeatures& f, const IntentSpec& intent, const PolicyState& ps,
                           const MemoryStore* mem, const ActionSpace& space, Rng& rng,
                           double epsilon, bool learning = true);
LinkStrategy decide_bandit(const CsiFeatures& f, const IntentSpec& intent, const PolicyState& ps,
                           const MemoryStore* mem, const ActionSpace& space, Rng& rng);

void update_policy(PolicyState& ps, const ContextKey& ctx, const LinkStrategy& s, double reward);

LinkStrategy decide_random(const ActionSpace& space, Rng& rng);

// ---- Lookup-table baseline ----

struct LutBundle {
    Coding coding = Coding::uncoded;
    CodeRate code_rate = CodeRate::r1;
    Modulation modulation = Modulation::bpsk;
    std::optional<double> threshold_db; // empty: target never met in the sweep
    bool operator==(const LutBundle&) const = default;
};

double bundle_rate(const LutBundle& b); // bits/symbol * code rate

struct CalibrationConfig {
    double snr_min_db = -10.0;
    double snr_max_db = 40.0;
    double snr_step_db = 1.0;
    int draws = 40;   // channel instances per SNR point, cycling the grid's correlations
    int frames = 20;  // frames per draw
    int payload_bits = kDefaultPayloadBits;
    double target = 0.9; // frame acceptance rate
    bool operator==(const CalibrationConfig&) const = default;
};

void to_json(Json& j, const CalibrationConfig& c);
CalibrationConfig calibration_config_from_json(const Json& j, const std::string& context);

struct LutTable {
    static constexpr int kFormatVersion = 1;
    std::vector<LutBundle> bundles;
    CalibrationConfig calibration;
    int n_tx = 2;
    int n_rx = 2;
    std::uint64_t seed = 0;

    Json to_json() const;
    static LutTable from_json(const Json& j);
    void save(const std::filesystem::path& path) const;
    /// Missing file raises ConfigError telling the user to run `calibrate`.
    static LutTable load(const std::filesystem::path& path);
    bool operator==(const LutTable&) const = default;
};

/// Measures, per (coding/rate, modulation) bundle, the smallest SNR on the sweep where
/// the frame acceptance rate at 0 dB power, identity precoding, lmmse, mmse reaches the
/// target. Channels are drawn from `grid` (array size, blocks, correlations).
LutTable calibrate_lut(const CalibrationConfig& cfg, const std::vector<ScenarioSpec>& grid,
                       std::uint64_t seed);

double lut_offset_db(IntentClass c);

/// Throws ConfigError if `table` is null (no calibration available).
LinkStrategy decide_lut(const CsiFeatures& f, const IntentSpec& intent, const LutTable* table);

} // namespace linkagent
