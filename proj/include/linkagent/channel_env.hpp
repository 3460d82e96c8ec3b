#pragma once

#include "linkagent/json_util.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace linkagent {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// One point of the scenario grid.
struct ScenarioSpec {
    int n_tx = 2;
    int n_rx = 2;
    double snr_db = 10.0;           // per receive antenna, at reference power
    int n_blocks = 4;               // fading blocks per transmission instance
    double block_correlation = 0.9; // AR(1) coefficient between consecutive blocks
    std::string scenario_id;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    bool operator==(const ScenarioSpec&) const = default;
};

/// Channel state information for one transmission instance.
struct ChannelState {
    std::vector<CMatrix> h; // n_blocks matrices, each n_rx x n_tx
    double noise_var = 1.0; // 10^(-snr_db/10)
    ScenarioSpec scenario;
    std::uint64_t seed = 0;

    int n_tx() const { return scenario.n_tx; }
    int n_rx() const { return scenario.n_rx; }
    int n_blocks() const { return static_cast<int>(h.size()); }
};

/// Compact CSI summary consumed by policies.
struct CsiFeatures {
    double mean_gain_db = 0.0;
    double cond_db = 0.0;
    double selectivity = 0.0;
    double snr_db = 0.0;

    bool operator==(const CsiFeatures&) const = default;
};

double noise_var_from_snr_db(double snr_db);

/// Block-fading Rayleigh channel. Block 0 is i.i.d. CN(0,1); block b>0 is
/// rho*H_{b-1} + sqrt(1-rho^2)*W_b. Deterministic in (spec, seed).
ChannelState generate_channel(const ScenarioSpec& spec, std::uint64_t seed);

/// Every block set to the identity (AWGN reference channel).
ChannelState identity_channel(const ScenarioSpec& spec);

CsiFeatures extract_features(const ChannelState& cs);

/// Singular values in descending order.
Eigen::VectorXd singular_values(const CMatrix& h);

/// Strict reader: unknown keys, bad values and duplicate ids raise ConfigError.
std::vector<ScenarioSpec> parse_scenario_grid_text(std::string_view text);
std::vector<ScenarioSpec> parse_scenario_grid(const Json& j);
std::vector<ScenarioSpec> load_scenario_grid(const std::filesystem::path& path);

} // namespace linkagent
