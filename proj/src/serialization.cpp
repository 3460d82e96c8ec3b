#include "linkagent/serialization.hpp"

#include "linkagent/error.hpp"

namespace linkagent {

namespace {

std::string field_name(const std::string& ctx, std::string_view key)
{
    return ctx.empty() ? std::string(key) : ctx + "." + std::string(key);
}

double number_at(const Json& j, std::string_view key, const std::string& ctx)
{
    const Json& v = require_member(j, key, ctx);
    if (!v.is_number()) {
        throw ConfigError(field_name(ctx, key) + ": expected a number", field_name(ctx, key));
    }
    return v.get<double>();
}

std::int64_t integer_at(const Json& j, std::string_view key, const std::string& ctx)
{
    const Json& v = require_member(j, key, ctx);
    if (!v.is_number_integer()) {
        throw ConfigError(field_name(ctx, key) + ": expected an integer", field_name(ctx, key));
    }
    return v.get<std::int64_t>();
}

std::string string_at(const Json& j, std::string_view key, const std::string& ctx)
{
    const Json& v = require_member(j, key, ctx);
    if (!v.is_string()) {
        throw ConfigError(field_name(ctx, key) + ": expected a string", field_name(ctx, key));
    }
    return v.get<std::string>();
}

template <typename E, typename Parse>
E enum_at(const Json& j, std::string_view key, const std::string& ctx, Parse parse)
{
    const std::string name = string_at(j, key, ctx);
    auto v = parse(name);
    if (!v) {
        throw ConfigError(field_name(ctx, key) + ": unknown value '" + name + "'",
                          field_name(ctx, key));
    }
    return *v;
}

} // namespace

void to_json(Json& j, const ScenarioSpec& s)
{
    j = Json{{"n_tx", s.n_tx},
             {"n_rx", s.n_rx},
             {"snr_db", s.snr_db},
             {"n_blocks", s.n_blocks},
             {"block_correlation", s.block_correlation},
             {"scenario_id", s.scenario_id}};
}

void to_json(Json& j, const CsiFeatures& f)
{
    j = Json{{"mean_gain_db", f.mean_gain_db},
             {"cond_db", f.cond_db},
             {"selectivity", f.selectivity},
             {"snr_db", f.snr_db}};
}

void from_json(const Json& j, CsiFeatures& f)
{
    const std::string ctx = "features";
    require_known_keys(j, {"mean_gain_db", "cond_db", "selectivity", "snr_db"}, ctx);
    f.mean_gain_db = number_at(j, "mean_gain_db", ctx);
    f.cond_db = number_at(j, "cond_db", ctx);
    f.selectivity = number_at(j, "selectivity", ctx);
    f.snr_db = number_at(j, "snr_db", ctx);
}

void to_json(Json& j, const LinkStrategy& s)
{
    j = Json{{"coding", to_string(s.coding)},
             {"code_rate", to_string(s.code_rate)},
             {"modulation", to_string(s.modulation)},
             {"power_level_db", s.power_level_db},
             {"precoding", to_string(s.precoding)},
             {"estimator", to_string(s.estimator)},
             {"equalizer", to_string(s.equalizer)}};
}

LinkStrategy strategy_from_json(const Json& j, const std::string& ctx)
{
    require_known_keys(j,
                       {"coding", "code_rate", "modulation", "power_level_db", "precoding",
                        "estimator", "equalizer"},
                       ctx);
    LinkStrategy s;
    s.coding = enum_at<Coding>(j, "coding", ctx, coding_from_string);
    s.code_rate = enum_at<CodeRate>(j, "code_rate", ctx, code_rate_from_string);
    s.modulation = enum_at<Modulation>(j, "modulation", ctx, modulation_from_string);
    s.power_level_db = static_cast<int>(integer_at(j, "power_level_db", ctx));
    s.precoding = enum_at<Precoding>(j, "precoding", ctx, precoding_from_string);
    s.estimator = enum_at<Estimator>(j, "estimator", ctx, estimator_from_string);
    s.equalizer = enum_at<Equalizer>(j, "equalizer", ctx, equalizer_from_string);
    return s;
}

void from_json(const Json& j, LinkStrategy& s)
{
    s = strategy_from_json(j, "strategy");
}

void to_json(Json& j, const LinkReport& r)
{
    j = Json{{"ber", r.ber},
             {"bit_errors", r.bit_errors},
             {"payload_bits", r.payload_bits},
             {"frames_total", r.frames_total},
             {"frames_accepted", r.frames_accepted},
             {"goodput_ratio", r.goodput_ratio},
             {"spectral_rate", r.spectral_rate},
             {"channel_uses", r.channel_uses},
             {"pilot_uses", r.pilot_uses},
             {"streams", r.streams},
             {"p_extra", r.p_extra},
             {"tx_power_linear", r.tx_power_linear}};
}

void from_json(const Json& j, LinkReport& r)
{
    const std::string ctx = "report";
    require_known_keys(j,
                       {"ber", "bit_errors", "payload_bits", "frames_total", "frames_accepted",
                        "goodput_ratio", "spectral_rate", "channel_uses", "pilot_uses", "streams",
                        "p_extra", "tx_power_linear"},
                       ctx);
    r.ber = number_at(j, "ber", ctx);
    r.bit_errors = integer_at(j, "bit_errors", ctx);
    r.payload_bits = integer_at(j, "payload_bits", ctx);
    r.frames_total = integer_at(j, "frames_total", ctx);
    r.frames_accepted = integer_at(j, "frames_accepted", ctx);
    r.goodput_ratio = number_at(j, "goodput_ratio", ctx);
    r.spectral_rate = number_at(j, "spectral_rate", ctx);
    r.channel_uses = integer_at(j, "channel_uses", ctx);
    r.pilot_uses = integer_at(j, "pilot_uses", ctx);
    r.streams = static_cast<int>(integer_at(j, "streams", ctx));
    r.p_extra = number_at(j, "p_extra", ctx);
    r.tx_power_linear = number_at(j, "tx_power_linear", ctx);
}

void to_json(Json& j, const IntentWeights& w)
{
    j = Json{{"rate", w.rate}, {"ber", w.ber}, {"power", w.power}};
}

void from_json(const Json& j, IntentWeights& w)
{
    const std::string ctx = "weights";
    require_known_keys(j, {"rate", "ber", "power"}, ctx);
    w.rate = number_at(j, "rate", ctx);
    w.ber = number_at(j, "ber", ctx);
    w.power = number_at(j, "power", ctx);
}

IntentClass intent_class_from_json(const Json& j, const std::string& ctx)
{
    if (!j.is_string()) {
        throw ConfigError(ctx + ": expected an intent class name", ctx);
    }
    auto c = intent_class_from_string(j.get<std::string>());
    if (!c) {
        throw ConfigError(ctx + ": unknown intent class '" + j.get<std::string>() + "'", ctx);
    }
    return *c;
}

void to_json(Json& j, const IntentSpec& s)
{
    j = Json{{"class", to_string(s.cls)}, {"weights", s.weights}, {"raw_text", s.raw_text}};
}

void from_json(const Json& j, IntentSpec& s)
{
    const std::string ctx = "intent";
    require_known_keys(j, {"class", "weights", "raw_text"}, ctx);
    s.cls = intent_class_from_json(require_member(j, "class", ctx), ctx + ".class");
    s.weights = require_member(j, "weights", ctx).get<IntentWeights>();
    s.raw_text = string_at(j, "raw_text", ctx);
}

void to_json(Json& j, const RewardBreakdown& r)
{
    j = Json{{"r_total", r.r_total},
             {"term_rate", r.term_rate},
             {"term_ber", r.term_ber},
             {"term_power", r.term_power},
             {"weights", r.weights}};
}

void from_json(const Json& j, RewardBreakdown& r)
{
    const std::string ctx = "reward";
    require_known_keys(j, {"r_total", "term_rate", "term_ber", "term_power", "weights"}, ctx);
    r.r_total = number_at(j, "r_total", ctx);
    r.term_rate = number_at(j, "term_rate", ctx);
    r.term_ber = number_at(j, "term_ber", ctx);
    r.term_power = number_at(j, "term_power", ctx);
    r.weights = require_member(j, "weights", ctx).get<IntentWeights>();
}

} // namespace linkagent
