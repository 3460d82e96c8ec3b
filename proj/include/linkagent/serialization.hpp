#pragma once

#include "linkagent/channel_env.hpp"
#include "linkagent/intent.hpp"
#include "linkagent/json_util.hpp"
#include "linkagent/link.hpp"
#include "linkagent/strategy.hpp"

// JSON mappings for the domain types. Readers are strict: unknown keys and
// unknown enum names raise ConfigError naming the field.

namespace linkagent {

void to_json(Json& j, const ScenarioSpec& s);
void to_json(Json& j, const CsiFeatures& f);
void from_json(const Json& j, CsiFeatures& f);

void to_json(Json& j, const LinkStrategy& s);
void from_json(const Json& j, LinkStrategy& s);

void to_json(Json& j, const LinkReport& r);
void from_json(const Json& j, LinkReport& r);

void to_json(Json& j, const IntentWeights& w);
void from_json(const Json& j, IntentWeights& w);

void to_json(Json& j, const IntentSpec& s);
void from_json(const Json& j, IntentSpec& s);

void to_json(Json& j, const RewardBreakdown& r);
void from_json(const Json& j, RewardBreakdown& r);

/// Strategy parse that reports which field is wrong; does not check invariants.
LinkStrategy strategy_from_json(const Json& j, const std::string& context);

IntentClass intent_class_from_json(const Json& j, const std::string& context);

} // namespace linkagent
