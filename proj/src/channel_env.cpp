#include "linkagent/channel_env.hpp"

#include "linkagent/error.hpp"
#include "linkagent/json_util.hpp"
#include "linkagent/rng.hpp"

#include <cmath>
#include <limits>

namespace linkagent {

namespace {

// Cap on the per-block singular-value spread so cond_db stays finite for
// (numerically) rank-deficient draws.
constexpr double kMaxSingularRatio = 1e6;

int get_int_field(const Json& obj, std::string_view key, const std::string& ctx)
{
    const Json& v = require_member(obj, key, ctx);
    const std::string field = ctx + "." + std::string(key);
    if (!v.is_number_integer()) {
        throw ConfigError(field + ": expected an integer", field);
    }
    return v.get<int>();
}

double get_number_field(const Json& obj, std::string_view key, const std::string& ctx)
{
    const Json& v = require_member(obj, key, ctx);
    const std::string field = ctx + "." + std::string(key);
    if (!v.is_number()) {
        throw ConfigError(field + ": expected a number", field);
    }
    return v.get<double>();
}

ScenarioSpec scenario_from_json(const Json& j, const std::string& ctx)
{
    require_known_keys(j, {"n_tx", "n_rx", "snr_db", "n_blocks", "block_correlation", "scenario_id"},
                       ctx);
    ScenarioSpec s;
    s.n_tx = get_int_field(j, "n_tx", ctx);
    s.n_rx = get_int_field(j, "n_rx", ctx);
    s.snr_db = get_number_field(j, "snr_db", ctx);
    s.n_blocks = get_int_field(j, "n_blocks", ctx);
    s.block_correlation = get_number_field(j, "block_correlation", ctx);
    const Json& id = require_member(j, "scenario_id", ctx);
    if (!id.is_string()) {
        throw ConfigError(ctx + ".scenario_id: expected a string", ctx + ".scenario_id");
    }
    s.scenario_id = id.get<std::string>();
    s.validate();
    return s;
}

} // namespace

void ScenarioSpec::validate() const
{
    const std::string ctx = scenario_id.empty() ? "scenario" : "scenario '" + scenario_id + "'";
    if (n_tx < 1) {
        throw ConfigError(ctx + ": n_tx must be >= 1", "n_tx");
    }
    if (n_rx < 1) {
        throw ConfigError(ctx + ": n_rx must be >= 1", "n_rx");
    }
    if (n_blocks < 1) {
        throw ConfigError(ctx + ": n_blocks must be >= 1", "n_blocks");
    }
    if (!std::isfinite(snr_db)) {
        throw ConfigError(ctx + ": snr_db must be finite", "snr_db");
    }
    if (!(block_correlation >= 0.0 && block_correlation <= 1.0)) {
        throw ConfigError(ctx + ": block_correlation must lie in [0, 1]", "block_correlation");
    }
}

double noise_var_from_snr_db(double snr_db)
{
    return std::pow(10.0, -snr_db / 10.0);
}

ChannelState generate_channel(const ScenarioSpec& spec, std::uint64_t seed)
{
    spec.validate();
    Rng rng(seed);
    const double rho = spec.block_correlation;
    const double innov = std::sqrt(std::max(0.0, 1.0 - rho * rho));

    ChannelState cs;
    cs.scenario = spec;
    cs.seed = seed;
    cs.noise_var = noise_var_from_snr_db(spec.snr_db);
    cs.h.reserve(static_cast<std::size_t>(spec.n_blocks));

    CMatrix first(spec.n_rx, spec.n_tx);
    for (int c = 0; c < spec.n_tx; ++c) {
        for (int r = 0; r < spec.n_rx; ++r) {
            first(r, c) = rng.complex_gaussian(1.0);
        }
    }
    cs.h.push_back(std::move(first));

    for (int b = 1; b < spec.n_blocks; ++b) {
        CMatrix next(spec.n_rx, spec.n_tx);
        for (int c = 0; c < spec.n_tx; ++c) {
            for (int r = 0; r < spec.n_rx; ++r) {
                // Always draw, even when rho == 1, so the stream layout is independent of rho.
                const auto w = rng.complex_gaussian(1.0);
                next(r, c) = rho == 1.0 ? cs.h.back()(r, c) : rho * cs.h.back()(r, c) + innov * w;
            }
        }
        cs.h.push_back(std::move(next));
    }
    return cs;
}

ChannelState identity_channel(const ScenarioSpec& spec)
{
    spec.validate();
    ChannelState cs;
    cs.scenario = spec;
    cs.noise_var = noise_var_from_snr_db(spec.snr_db);
    for (int b = 0; b < spec.n_blocks; ++b) {
        cs.h.push_back(CMatrix::Identity(spec.n_rx, spec.n_tx));
    }
    return cs;
}

Eigen::VectorXd singular_values(const CMatrix& h)
{
    Eigen::JacobiSVD<CMatrix> svd(h);
    return svd.singularValues();
}

CsiFeatures extract_features(const ChannelState& cs)
{
    CsiFeatures f;
    f.snr_db = cs.scenario.snr_db;
    if (cs.h.empty()) {
        return f;
    }
    const double entries = static_cast<double>(cs.n_tx()) * cs.n_rx();

    double gain = 0.0;
    double ratio_sum = 0.0;
    for (const auto& hb : cs.h) {
        gain += hb.squaredNorm() / entries;
        const Eigen::VectorXd sv = singular_values(hb);
        const double smax = sv(0);
        const double smin = sv(sv.size() - 1);
        double ratio = kMaxSingularRatio;
        if (smin > 0.0 && smax / smin < kMaxSingularRatio) {
            ratio = smax / smin;
        }
        ratio_sum += ratio;
    }
    const double nb = static_cast<double>(cs.h.size());
    gain /= nb;
    f.mean_gain_db = 10.0 * std::log10(std::max(gain, std::numeric_limits<double>::min()));
    f.cond_db = std::max(0.0, 20.0 * std::log10(ratio_sum / nb));

    if (cs.h.size() > 1) {
        double cross = 0.0;
        double norm_a = 0.0;
        double norm_b = 0.0;
        for (std::size_t b = 0; b + 1 < cs.h.size(); ++b) {
            const auto& a = cs.h[b];
            const auto& n = cs.h[b + 1];
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                const auto x = a(i);
                const auto y = n(i);
                cross += x.real() * y.real() + x.imag() * y.imag();
                norm_a += x.real() * x.real() + x.imag() * x.imag();
                norm_b += y.real() * y.real() + y.imag() * y.imag();
            }
        }
        const double denom = std::sqrt(norm_a) * std::sqrt(norm_b);
        const double rho_hat = denom > 0.0 ? cross / denom : 0.0;
        f.selectivity = std::clamp(1.0 - rho_hat, 0.0, 1.0);
    }
    return f;
}

std::vector<ScenarioSpec> parse_scenario_grid(const Json& j)
{
    if (!j.is_array()) {
        throw ConfigError("scenario grid: expected a JSON array of scenario objects",
                          "scenario_grid");
    }
    if (j.empty()) {
        throw ConfigError("scenario grid: grid is empty", "scenario_grid");
    }
    std::vector<ScenarioSpec> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string ctx = "scenario[" + std::to_string(i) + "]";
        out.push_back(scenario_from_json(j[i], ctx));
        for (std::size_t k = 0; k < i; ++k) {
            if (out[k].scenario_id == out[i].scenario_id) {
                throw ConfigError(ctx + ".scenario_id: duplicate id '" + out[i].scenario_id + "'",
                                  ctx + ".scenario_id");
            }
        }
    }
    return out;
}

std::vector<ScenarioSpec> parse_scenario_grid_text(std::string_view text)
{
    return parse_scenario_grid(parse_json_text(text, "scenario grid"));
}

std::vector<ScenarioSpec> load_scenario_grid(const std::filesystem::path& path)
{
    return parse_scenario_grid_text(read_text_file(path));
}

} // namespace linkagent
