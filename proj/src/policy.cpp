#include "linkagent/policy.hpp"

#include "linkagent/error.hpp"
#include "linkagent/link.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace linkagent {

namespace {

// Stream domains used by the calibration sweep.
constexpr std::uint64_t kCalChannelDomain = 0x63616c2d6368ULL;
constexpr std::uint64_t kCalLinkDomain = 0x63616c2d6c6eULL;

template <typename E>
std::vector<E> sorted_unique_check(std::vector<E> v, const std::string& field)
{
    if (v.empty()) {
        throw ConfigError("action_space." + field + ": dimension is empty", "action_space." + field);
    }
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end()) {
        throw ConfigError("action_space." + field + ": duplicate value", "action_space." + field);
    }
    return v;
}

template <typename E, typename Parse>
std::vector<E> parse_enum_list(const Json& j, const std::string& field, Parse parse)
{
    if (!j.is_array()) {
        throw ConfigError(field + ": expected a list", field);
    }
    std::vector<E> out;
    for (const auto& item : j) {
        if (!item.is_string()) {
            throw ConfigError(field + ": expected names", field);
        }
        auto v = parse(item.get<std::string>());
        if (!v) {
            throw ConfigError(field + ": unknown value '" + item.get<std::string>() + "'", field);
        }
        out.push_back(*v);
    }
    return out;
}

template <typename E>
Json name_list(const std::vector<E>& v)
{
    Json out = Json::array();
    for (auto e : v) {
        out.push_back(std::string(to_string(e)));
    }
    return out;
}

double number_field(const Json& j, const char* key, const std::string& ctx, double fallback)
{
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j.at(key).is_number()) {
        throw ConfigError(ctx + "." + key + ": expected a number", ctx + "." + key);
    }
    return j.at(key).get<double>();
}

std::int64_t integer_field(const Json& j, const char* key, const std::string& ctx,
                           std::int64_t fallback)
{
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j.at(key).is_number_integer()) {
        throw ConfigError(ctx + "." + key + ": expected an integer", ctx + "." + key);
    }
    return j.at(key).get<std::int64_t>();
}

} // namespace

int power_index(int power_level_db)
{
    for (std::size_t i = 0; i < kAllPowerLevelsDb.size(); ++i) {
        if (kAllPowerLevelsDb[i] == power_level_db) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

Digits strategy_digits(const LinkStrategy& s)
{
    const int p = power_index(s.power_level_db);
    if (p < 0) {
        throw InvariantError("power_level_db " + std::to_string(s.power_level_db) +
                             " is not in {-3, 0, 3, 6}");
    }
    return {static_cast<std::uint8_t>(s.coding),    static_cast<std::uint8_t>(s.code_rate),
            static_cast<std::uint8_t>(s.modulation), static_cast<std::uint8_t>(p),
            static_cast<std::uint8_t>(s.precoding),  static_cast<std::uint8_t>(s.estimator),
            static_cast<std::uint8_t>(s.equalizer)};
}

LinkStrategy strategy_from_digits(const Digits& d)
{
    LinkStrategy s;
    s.coding = static_cast<Coding>(d[0]);
    s.code_rate = static_cast<CodeRate>(d[1]);
    s.modulation = static_cast<Modulation>(d[2]);
    s.power_level_db = kAllPowerLevelsDb.at(d[3]);
    s.precoding = static_cast<Precoding>(d[4]);
    s.estimator = static_cast<Estimator>(d[5]);
    s.equalizer = static_cast<Equalizer>(d[6]);
    return s;
}

void ActionSpaceConfig::validate() const
{
    sorted_unique_check(codings, "coding");
    sorted_unique_check(code_rates, "code_rate");
    sorted_unique_check(modulations, "modulation");
    sorted_unique_check(power_levels_db, "power_level_db");
    sorted_unique_check(precodings, "precoding");
    sorted_unique_check(estimators, "estimator");
    sorted_unique_check(equalizers, "equalizer");
    for (int p : power_levels_db) {
        if (power_index(p) < 0) {
            throw ConfigError("action_space.power_level_db: " + std::to_string(p) +
                                  " is not in {-3, 0, 3, 6}",
                              "action_space.power_level_db");
        }
    }
}

void to_json(Json& j, const ActionSpaceConfig& c)
{
    j = Json{{"coding", name_list(c.codings)},
             {"code_rate", name_list(c.code_rates)},
             {"modulation", name_list(c.modulations)},
             {"power_level_db", c.power_levels_db},
             {"precoding", name_list(c.precodings)},
             {"estimator", name_list(c.estimators)},
             {"equalizer", name_list(c.equalizers)}};
}

ActionSpaceConfig action_space_from_json(const Json& j, const std::string& ctx)
{
    if (!j.is_object()) {
        throw ConfigError(ctx + ": expected an object", ctx);
    }
    require_known_keys(j,
                       {"coding", "code_rate", "modulation", "power_level_db", "precoding",
                        "estimator", "equalizer"},
                       ctx);
    ActionSpaceConfig c;
    if (j.contains("coding")) {
        c.codings = parse_enum_list<Coding>(j["coding"], ctx + ".coding", coding_from_string);
    }
    if (j.contains("code_rate")) {
        c.code_rates =
            parse_enum_list<CodeRate>(j["code_rate"], ctx + ".code_rate", code_rate_from_string);
    }
    if (j.contains("modulation")) {
        c.modulations = parse_enum_list<Modulation>(j["modulation"], ctx + ".modulation",
                                                    modulation_from_string);
    }
    if (j.contains("power_level_db")) {
        const Json& p = j["power_level_db"];
        if (!p.is_array()) {
            throw ConfigError(ctx + ".power_level_db: expected a list", ctx + ".power_level_db");
        }
        c.power_levels_db.clear();
        for (const auto& v : p) {
            if (!v.is_number_integer()) {
                throw ConfigError(ctx + ".power_level_db: expected integers",
                                  ctx + ".power_level_db");
            }
            c.power_levels_db.push_back(v.get<int>());
        }
    }
    if (j.contains("precoding")) {
        c.precodings = parse_enum_list<Precoding>(j["precoding"], ctx + ".precoding",
                                                  precoding_from_string);
    }
    if (j.contains("estimator")) {
        c.estimators = parse_enum_list<Estimator>(j["estimator"], ctx + ".estimator",
                                                  estimator_from_string);
    }
    if (j.contains("equalizer")) {
        c.equalizers = parse_enum_list<Equalizer>(j["equalizer"], ctx + ".equalizer",
                                                  equalizer_from_string);
    }
    c.validate();
    return c;
}

std::vector<LinkStrategy> enumerate_actions(const ActionSpaceConfig& cfg)
{
    const auto codings = sorted_unique_check(cfg.codings, "coding");
    const auto rates = sorted_unique_check(cfg.code_rates, "code_rate");
    const auto mods = sorted_unique_check(cfg.modulations, "modulation");
    const auto powers = sorted_unique_check(cfg.power_levels_db, "power_level_db");
    const auto precs = sorted_unique_check(cfg.precodings, "precoding");
    const auto ests = sorted_unique_check(cfg.estimators, "estimator");
    const auto eqs = sorted_unique_check(cfg.equalizers, "equalizer");
    cfg.validate();

    std::vector<LinkStrategy> out;
    for (auto c : codings)
        for (auto r : rates)
            for (auto m : mods)
                for (int p : powers)
                    for (auto pr : precs)
                        for (auto e : ests)
                            for (auto q : eqs) {
                                LinkStrategy s{c, r, m, p, pr, e, q};
                                if (!strategy_violation(s)) {
                                    out.push_back(s);
                                }
                            }
    return out;
}

ActionSpace::ActionSpace(ActionSpaceConfig cfg) : cfg_(std::move(cfg))
{
    strategies_ = enumerate_actions(cfg_);
    if (strategies_.empty()) {
        throw ConfigError("action_space: no valid strategy (check coding/code_rate pairs)",
                          "action_space");
    }
    digits_.reserve(strategies_.size());
    for (const auto& s : strategies_) {
        digits_.push_back(strategy_digits(s));
    }
}

bool ActionSpace::contains(const LinkStrategy& s) const
{
    if (strategy_violation(s)) {
        return false;
    }
    const auto d = strategy_digits(s);
    return std::binary_search(digits_.begin(), digits_.end(), d);
}

std::uint32_t ContextKey::pack() const
{
    const int snr = std::clamp(snr_bin, -512, 511) + 512;
    return (static_cast<std::uint32_t>(snr) << 16) | (static_cast<std::uint32_t>(cond_bin) << 8) |
           (static_cast<std::uint32_t>(sel_bin) << 4) | static_cast<std::uint32_t>(intent);
}

ContextKey ContextKey::unpack(std::uint32_t v)
{
    ContextKey k;
    k.snr_bin = static_cast<int>((v >> 16) & 0x3ff) - 512;
    k.cond_bin = static_cast<int>((v >> 8) & 0xff);
    k.sel_bin = static_cast<int>((v >> 4) & 0xf);
    k.intent = static_cast<IntentClass>(v & 0xf);
    return k;
}

ContextKey context_key(const CsiFeatures& f, IntentClass c)
{
    ContextKey k;
    k.intent = c;
    if (std::isfinite(f.snr_db)) {
        k.snr_bin = static_cast<int>(std::clamp(std::floor(f.snr_db / 2.0), -512.0, 511.0));
    }
    k.cond_bin = f.cond_db < 5.0 ? 0 : (f.cond_db < 10.0 ? 1 : 2);
    k.sel_bin = f.selectivity < 0.05 ? 0 : (f.selectivity < 0.3 ? 1 : 2);
    return k;
}

void to_json(Json& j, const BanditParams& p)
{
    j = Json{{"epsilon0", p.epsilon0},
             {"decay", p.decay},
             {"epsilon_min", p.epsilon_min},
             {"initial_value", p.initial_value},
             {"memory_k", p.memory_k}};
}

BanditParams bandit_params_from_json(const Json& j, const std::string& ctx)
{
    if (!j.is_object()) {
        throw ConfigError(ctx + ": expected an object", ctx);
    }
    require_known_keys(j, {"epsilon0", "decay", "epsilon_min", "initial_value", "memory_k"}, ctx);
    BanditParams p;
    p.epsilon0 = number_field(j, "epsilon0", ctx, p.epsilon0);
    p.decay = number_field(j, "decay", ctx, p.decay);
    p.epsilon_min = number_field(j, "epsilon_min", ctx, p.epsilon_min);
    p.initial_value = number_field(j, "initial_value", ctx, p.initial_value);
    const auto k = integer_field(j, "memory_k", ctx, static_cast<std::int64_t>(p.memory_k));
    if (k < 1) {
        throw ConfigError(ctx + ".memory_k: must be >= 1", ctx + ".memory_k");
    }
    p.memory_k = static_cast<std::size_t>(k);
    const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(p.epsilon0)) {
        throw ConfigError(ctx + ".epsilon0: must lie in [0, 1]", ctx + ".epsilon0");
    }
    if (!in_unit(p.decay)) {
        throw ConfigError(ctx + ".decay: must lie in [0, 1]", ctx + ".decay");
    }
    if (!in_unit(p.epsilon_min)) {
        throw ConfigError(ctx + ".epsilon_min: must lie in [0, 1]", ctx + ".epsilon_min");
    }
    if (!std::isfinite(p.initial_value)) {
        throw ConfigError(ctx + ".initial_value: must be finite", ctx + ".initial_value");
    }
    return p;
}

std::uint64_t value_key(std::uint32_t ctx, int depth, const Digits& digits)
{
    std::uint64_t packed = 0;
    for (int i = 0; i <= depth; ++i) {
        packed |= static_cast<std::uint64_t>(digits[i] & 0x7) << (3 * i);
    }
    return (static_cast<std::uint64_t>(ctx) << 32) | (static_cast<std::uint64_t>(depth) << 24) |
           packed;
}

PolicyState::PolicyState(BanditParams params) : params_(params), epsilon_(params.epsilon0) {}

const ValueStat* PolicyState::find(std::uint64_t key) const
{
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

void PolicyState::observe(std::uint32_t ctx, const Digits& d, double reward)
{
    for (int depth = 0; depth < kSubActions; ++depth) {
        auto& v = values_[value_key(ctx, depth, d)];
        v.count += 1;
        v.mean += (reward - v.mean) / static_cast<double>(v.count);
    }
}

void PolicyState::update(const ContextKey& ctx, const LinkStrategy& s, double reward)
{
    if (!std::isfinite(reward)) {
        throw InvariantError("policy update with a non-finite reward");
    }
    const auto c = ctx.pack();
    observe(c, strategy_digits(s), reward);
    visited_.insert(c);
    step_ += 1;
    epsilon_ = std::max(params_.epsilon_min, epsilon_ * params_.decay);
}

std::size_t PolicyState::warm_start(const ContextKey& ctx, const std::vector<Episode>& episodes,
                                    const ActionSpace& space)
{
    const auto c = ctx.pack();
    if (visited_.count(c) != 0) {
        return 0;
    }
    std::size_t used = 0;
    for (const auto& e : episodes) {
        if (!space.contains(e.strategy) || !std::isfinite(e.reward)) {
            continue;
        }
        observe(c, strategy_digits(e.strategy), e.reward);
        ++used;
    }
    if (used > 0) {
        visited_.insert(c);
    }
    return used;
}

Json PolicyState::to_json() const
{
    Json values = Json::array();
    for (const auto& [key, v] : values_) {
        values.push_back(Json::array({key, v.mean, v.count}));
    }
    Json params;
    linkagent::to_json(params, params_);
    return Json{{"format_version", kFormatVersion},
                {"params", params},
                {"epsilon", epsilon_},
                {"step", step_},
                {"visited", visited_},
                {"values", values}};
}

PolicyState PolicyState::from_json(const Json& j)
{
    try {
        require_known_keys(j, {"format_version", "params", "epsilon", "step", "visited", "values"},
                           "policy_state");
        const int version = require_member(j, "format_version", "policy_state").get<int>();
        if (version != kFormatVersion) {
            throw PersistenceError("policy state format_version " + std::to_string(version) +
                                   " is not supported (expected " +
                                   std::to_string(kFormatVersion) + ")");
        }
        PolicyState ps(bandit_params_from_json(require_member(j, "params", "policy_state"),
                                               "policy_state.params"));
        ps.epsilon_ = require_member(j, "epsilon", "policy_state").get<double>();
        if (!(ps.epsilon_ >= 0.0 && ps.epsilon_ <= 1.0)) {
            throw PersistenceError("policy state epsilon outside [0, 1]");
        }
        ps.step_ = require_member(j, "step", "policy_state").get<std::uint64_t>();
        for (const auto& c : require_member(j, "visited", "policy_state")) {
            ps.visited_.insert(c.get<std::uint32_t>());
        }
        for (const auto& row : require_member(j, "values", "policy_state")) {
            if (!row.is_array() || row.size() != 3) {
                throw PersistenceError("policy state value rows must be [key, mean, count]");
            }
            const auto key = row[0].get<std::uint64_t>();
            ValueStat v{row[1].get<double>(), row[2].get<std::uint64_t>()};
            if (!std::isfinite(v.mean) || ((key >> 24) & 0xff) >= kSubActions) {
                throw PersistenceError("policy state holds an invalid value entry");
            }
            ps.values_.emplace(key, v);
        }
        return ps;
    } catch (const PersistenceError&) {
        throw;
    } catch (const std::exception& e) {
        throw PersistenceError(std::string("invalid policy state: ") + e.what());
    }
}

void PolicyState::save(const std::filesystem::path& path) const
{
    write_text_file_atomic(path, to_json().dump());
}

PolicyState PolicyState::load(const std::filesystem::path& path)
{
    Json j;
    try {
        j = read_json_file(path);
    } catch (const std::exception& e) {
        throw PersistenceError(std::string("cannot load policy state: ") + e.what());
    }
    return from_json(j);
}

LinkStrategy decide_bandit(const CsiFeatures& f, const IntentSpec& intent, const PolicyState& ps,
                           const MemoryStore* mem, const ActionSpace& space, Rng& rng,
                           double epsilon, bool learning)
{
    const ContextKey ctx = context_key(f, intent.cls);
    const std::uint32_t c = ctx.pack();

    // Warm start for a context the table has never seen: a throwaway state seeded
    // with the nearest remembered episodes supplies the estimates.
    std::optional<PolicyState> overlay;
    if (mem != nullptr && !ps.visited(ctx)) {
        const auto episodes = mem->retrieve(f, intent.cls, ps.params().memory_k);
        if (!episodes.empty()) {
            overlay.emplace(ps.params());
            overlay->warm_start(ctx, episodes, space);
        }
    }
    const PolicyState& table = overlay ? *overlay : ps;

    const auto& all = space.digits();
    std::vector<std::size_t> matching(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        matching[i] = i;
    }
    Digits chosen{};
    for (int depth = 0; depth < kSubActions; ++depth) {
        const double u = rng.uniform();
        const auto pick = rng.below(matching.size());
        std::uint8_t digit;
        if (u < epsilon) {
            digit = all[matching[pick]][depth];
        } else {
            // Matching strategies share the prefix and are sorted, so candidate digits
            // appear in ascending order.
            bool have = false;
            double best = 0.0;
            digit = 0;
            std::uint8_t last = 0xff;
            for (auto idx : matching) {
                const std::uint8_t cand = all[idx][depth];
                if (cand == last) {
                    continue;
                }
                last = cand;
                Digits probe = chosen;
                probe[depth] = cand;
                const ValueStat* v = table.find(value_key(c, depth, probe));
                const double value = v != nullptr ? v->mean
                                     : learning  ? ps.params().initial_value
                                                 : -std::numeric_limits<double>::infinity();
                if (!have || value > best) {
                    have = true;
                    best = value;
                    digit = cand;
                }
            }
        }
        chosen[depth] = digit;
        std::erase_if(matching, [&](std::size_t idx) { return all[idx][depth] != digit; });
    }
    return strategy_from_digits(chosen);
}

LinkStrategy decide_bandit(const CsiFeatures& f, const IntentSpec& intent, const PolicyState& ps,
                           const MemoryStore* mem, const ActionSpace& space, Rng& rng)
{
    return decide_bandit(f, intent, ps, mem, space, rng, ps.epsilon());
}

void update_policy(PolicyState& ps, const ContextKey& ctx, const LinkStrategy& s, double reward)
{
    ps.update(ctx, s, reward);
}

LinkStrategy decide_random(const ActionSpace& space, Rng& rng)
{
    return space.strategies()[rng.below(space.size())];
}

// ---- Lookup table ----

double bundle_rate(const LutBundle& b)
{
    return bits_per_symbol(b.modulation) * code_rate_value(b.code_rate);
}

void to_json(Json& j, const CalibrationConfig& c)
{
    j = Json{{"snr_min_db", c.snr_min_db},   {"snr_max_db", c.snr_max_db},
             {"snr_step_db", c.snr_step_db}, {"draws", c.draws},
             {"frames", c.frames},           {"payload_bits", c.payload_bits},
             {"target", c.target}};
}

CalibrationConfig calibration_config_from_json(const Json& j, const std::string& ctx)
{
    if (!j.is_object()) {
        throw ConfigError(ctx + ": expected an object", ctx);
    }
    require_known_keys(j,
                       {"snr_min_db", "snr_max_db", "snr_step_db", "draws", "frames",
                        "payload_bits", "target"},
                       ctx);
    CalibrationConfig c;
    c.snr_min_db = number_field(j, "snr_min_db", ctx, c.snr_min_db);
    c.snr_max_db = number_field(j, "snr_max_db", ctx, c.snr_max_db);
    c.snr_step_db = number_field(j, "snr_step_db", ctx, c.snr_step_db);
    c.draws = static_cast<int>(integer_field(j, "draws", ctx, c.draws));
    c.frames = static_cast<int>(integer_field(j, "frames", ctx, c.frames));
    c.payload_bits = static_cast<int>(integer_field(j, "payload_bits", ctx, c.payload_bits));
    c.target = number_field(j, "target", ctx, c.target);
    if (!(c.snr_step_db > 0.0) || !(c.snr_max_db >= c.snr_min_db)) {
        throw ConfigError(ctx + ": need snr_step_db > 0 and snr_max_db >= snr_min_db", ctx);
    }
    if (c.draws < 1 || c.frames < 1 || c.payload_bits < 1) {
        throw ConfigError(ctx + ": draws, frames and payload_bits must be >= 1", ctx);
    }
    if (!(c.target > 0.0 && c.target <= 1.0)) {
        throw ConfigError(ctx + ".target: must lie in (0, 1]", ctx + ".target");
    }
    return c;
}

Json LutTable::to_json() const
{
    Json rows = Json::array();
    for (const auto& b : bundles) {
        Json row{{"coding", to_string(b.coding)},
                 {"code_rate", to_string(b.code_rate)},
                 {"modulation", to_string(b.modulation)}};
        row["threshold_db"] = b.threshold_db ? Json(*b.threshold_db) : Json(nullptr);
        rows.push_back(row);
    }
    Json cal;
    linkagent::to_json(cal, calibration);
    return Json{{"format_version", kFormatVersion},
                {"n_tx", n_tx},
                {"n_rx", n_rx},
                {"seed", seed},
                {"calibration", cal},
                {"bundles", rows}};
}

LutTable LutTable::from_json(const Json& j)
{
    try {
        require_known_keys(j, {"format_version", "n_tx", "n_rx", "seed", "calibration", "bundles"},
                           "lut");
        const int version = require_member(j, "format_version", "lut").get<int>();
        if (version != kFormatVersion) {
            throw PersistenceError("LUT format_version " + std::to_string(version) +
                                   " is not supported");
        }
        LutTable t;
        t.n_tx = require_member(j, "n_tx", "lut").get<int>();
        t.n_rx = require_member(j, "n_rx", "lut").get<int>();
        t.seed = require_member(j, "seed", "lut").get<std::uint64_t>();
        t.calibration =
            calibration_config_from_json(require_member(j, "calibration", "lut"), "lut.calibration");
        for (const auto& row : require_member(j, "bundles", "lut")) {
            require_known_keys(row, {"coding", "code_rate", "modulation", "threshold_db"},
                               "lut.bundles");
            LutBundle b;
            auto c = coding_from_string(row.at("coding").get<std::string>());
            auto r = code_rate_from_string(row.at("code_rate").get<std::string>());
            auto m = modulation_from_string(row.at("modulation").get<std::string>());
            if (!c || !r || !m || !consistent(*c, *r)) {
                throw PersistenceError("LUT holds an invalid bundle");
            }
            b.coding = *c;
            b.code_rate = *r;
            b.modulation = *m;
            if (!row.at("threshold_db").is_null()) {
                b.threshold_db = row.at("threshold_db").get<double>();
            }
            t.bundles.push_back(b);
        }
        return t;
    } catch (const PersistenceError&) {
        throw;
    } catch (const std::exception& e) {
        throw PersistenceError(std::string("invalid LUT file: ") + e.what());
    }
}

void LutTable::save(const std::filesystem::path& path) const
{
    write_text_file_atomic(path, to_json().dump(2) + "\n");
}

LutTable LutTable::load(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) {
        throw ConfigError("LUT table '" + path.string() +
                              "' not found; run the `calibrate` subcommand first",
                          "lut");
    }
    Json j;
    try {
        j = read_json_file(path);
    } catch (const std::exception& e) {
        throw PersistenceError(std::string("cannot load LUT table: ") + e.what());
    }
    return from_json(j);
}

LutTable calibrate_lut(const CalibrationConfig& cfg, const std::vector<ScenarioSpec>& grid,
                       std::uint64_t seed)
{
    if (grid.empty()) {
        throw ConfigError("calibration needs a non-empty scenario grid", "scenario_grid");
    }
    LutTable table;
    table.calibration = cfg;
    table.n_tx = grid.front().n_tx;
    table.n_rx = grid.front().n_rx;
    table.seed = seed;

    // One set of channel draws shared by every bundle and SNR point.
    std::vector<ChannelState> draws;
    for (int d = 0; d < cfg.draws; ++d) {
        ScenarioSpec spec = grid[static_cast<std::size_t>(d) % grid.size()];
        spec.n_tx = table.n_tx;
        spec.n_rx = table.n_rx;
        draws.push_back(generate_channel(spec, derive_stream(seed, kCalChannelDomain,
                                                             static_cast<std::uint64_t>(d))));
    }

    const int points =
        static_cast<int>(std::floor((cfg.snr_max_db - cfg.snr_min_db) / cfg.snr_step_db + 1e-9)) + 1;
    std::uint64_t bundle_index = 0;
    for (auto coding : kAllCodings) {
        for (auto rate : kAllCodeRates) {
            if (!consistent(coding, rate)) {
                continue;
            }
            for (auto mod : kAllModulations) {
                LutBundle b{coding, rate, mod, std::nullopt};
                const LinkStrategy s{coding, rate, mod, 0, Precoding::identity, Estimator::lmmse,
                                     Equalizer::mmse};
                const std::uint64_t bundle_stream =
                    derive_stream(seed, kCalLinkDomain, bundle_index++);
                for (int k = 0; k < points; ++k) {
                    const double snr = cfg.snr_min_db + k * cfg.snr_step_db;
                    std::int64_t accepted = 0;
                    std::int64_t total = 0;
                    for (int d = 0; d < cfg.draws; ++d) {
                        ChannelState cs = draws[static_cast<std::size_t>(d)];
                        cs.noise_var = noise_var_from_snr_db(snr);
                        cs.scenario.snr_db = snr;
                        Rng rng(derive_stream(bundle_stream, static_cast<std::uint64_t>(k),
                                              static_cast<std::uint64_t>(d)));
                        const auto r = run_link(cs, s, cfg.payload_bits, cfg.frames, rng);
                        accepted += r.frames_accepted;
                        total += r.frames_total;
                    }
                    if (static_cast<double>(accepted) >= cfg.target * static_cast<double>(total)) {
                        b.threshold_db = snr;
                        break;
                    }
                }
                table.bundles.push_back(b);
            }
        }
    }
    return table;
}

double lut_offset_db(IntentClass c)
{
    switch (c) {
    case IntentClass::high_reliability: return -4.0;
    case IntentClass::high_throughput: return 0.0;
    case IntentClass::energy_aware: return -2.0;
    }
    return 0.0;
}

LinkStrategy decide_lut(const CsiFeatures& f, const IntentSpec& intent, const LutTable* table)
{
    if (table == nullptr) {
        throw ConfigError("no LUT calibration available; run the `calibrate` subcommand and pass "
                          "its table with --lut",
                          "lut");
    }
    const double offset = lut_offset_db(intent.cls);
    const double effective = f.snr_db + offset;

    const LutBundle* best = nullptr;
    for (const auto& b : table->bundles) {
        if (!b.threshold_db || *b.threshold_db > effective) {
            continue;
        }
        if (best == nullptr) {
            best = &b;
            continue;
        }
        const double rb = bundle_rate(b);
        const double rbest = bundle_rate(*best);
        if (rb > rbest || (rb == rbest && *b.threshold_db < *best->threshold_db)) {
            best = &b;
        }
        // Equal rate and threshold: keep the earlier (lexicographically first) bundle.
    }

    LinkStrategy s;
    s.estimator = Estimator::lmmse;
    s.equalizer = Equalizer::mmse;
    s.precoding = f.cond_db > 10.0 ? Precoding::svd_rank1 : Precoding::identity;
    s.power_level_db = 0;
    if (best == nullptr) {
        s.coding = Coding::repetition3;
        s.code_rate = CodeRate::r1_3;
        s.modulation = Modulation::bpsk;
        return s;
    }
    s.coding = best->coding;
    s.code_rate = best->code_rate;
    s.modulation = best->modulation;
    if (intent.cls == IntentClass::energy_aware && effective - *best->threshold_db > 3.0) {
        s.power_level_db = -3;
    }
    return s;
}

} // namespace linkagent
