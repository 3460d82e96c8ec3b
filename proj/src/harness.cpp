#include "linkagent/harness.hpp"

#include "linkagent/error.hpp"
#include "linkagent/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace linkagent {

namespace {

constexpr std::uint64_t kTrainDomain = hash_text("train");
constexpr std::uint64_t kOrderDomain = hash_text("train-order");
constexpr std::uint64_t kEvalDomain = hash_text("eval");

int int_field(const Json& j, const char* key, const std::string& ctx, int fallback, int min)
{
    if (!j.contains(key)) {
        return fallback;
    }
    const Json& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < min ||
        v.get<std::int64_t>() > std::numeric_limits<int>::max()) {
        throw ConfigError(ctx + "." + key + ": expected an integer >= " + std::to_string(min),
                          ctx + "." + key);
    }
    return v.get<int>();
}

double double_field(const Json& j, const char* key, const std::string& ctx, double fallback)
{
    if (!j.contains(key)) {
        return fallback;
    }
    const Json& v = j.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
        throw ConfigError(ctx + "." + key + ": expected a finite number", ctx + "." + key);
    }
    return v.get<double>();
}

MemoryConfig memory_config_from_json(const Json& j, const std::string& ctx, MemoryConfig m)
{
    if (!j.is_object()) {
        throw ConfigError(ctx + ": expected an object", ctx);
    }
    require_known_keys(j, {"capacity", "quality_quantile", "bootstrap", "history_window"}, ctx);
    m.capacity = static_cast<std::size_t>(
        int_field(j, "capacity", ctx, static_cast<int>(m.capacity), 0));
    m.quality_quantile = double_field(j, "quality_quantile", ctx, m.quality_quantile);
    if (!(m.quality_quantile >= 0.0 && m.quality_quantile <= 1.0)) {
        throw ConfigError(ctx + ".quality_quantile: must lie in [0, 1]", ctx + ".quality_quantile");
    }
    m.bootstrap = static_cast<std::size_t>(
        int_field(j, "bootstrap", ctx, static_cast<int>(m.bootstrap), 0));
    m.history_window = static_cast<std::size_t>(
        int_field(j, "history_window", ctx, static_cast<int>(m.history_window), 1));
    return m;
}

TrainingConfig training_from_json(const Json& j, const std::string& ctx)
{
    if (!j.is_object()) {
        throw ConfigError(ctx + ": expected an object", ctx);
    }
    require_known_keys(j,
                       {"episodes_per_class", "eval_episodes", "frames", "payload_bits",
                        "use_memory", "learning_curve_window", "bandit", "memory", "calibration"},
                       ctx);
    TrainingConfig t;
    t.episodes_per_class = int_field(j, "episodes_per_class", ctx, t.episodes_per_class, 0);
    t.eval_episodes = int_field(j, "eval_episodes", ctx, t.eval_episodes, 1);
    t.frames = int_field(j, "frames", ctx, t.frames, 1);
    t.payload_bits = int_field(j, "payload_bits", ctx, t.payload_bits, 1);
    t.curve_window = int_field(j, "learning_curve_window", ctx, t.curve_window, 1);
    if (j.contains("use_memory")) {
        if (!j["use_memory"].is_boolean()) {
            throw ConfigError(ctx + ".use_memory: expected true or false", ctx + ".use_memory");
        }
        t.use_memory = j["use_memory"].get<bool>();
    }
    if (j.contains("bandit")) {
        t.bandit = bandit_params_from_json(j["bandit"], ctx + ".bandit");
    }
    if (j.contains("memory")) {
        t.memory = memory_config_from_json(j["memory"], ctx + ".memory", t.memory);
    }
    if (j.contains("calibration")) {
        t.calibration = calibration_config_from_json(j["calibration"], ctx + ".calibration");
    }
    return t;
}

WeightTable weights_from_json(const Json& j, const std::string& ctx)
{
    if (!j.is_object()) {
        throw ConfigError(ctx + ": expected an object keyed by intent class", ctx);
    }
    WeightTable table;
    for (const auto& [name, value] : j.items()) {
        const auto cls = intent_class_from_string(name);
        if (!cls) {
            throw ConfigError(ctx + "." + name + ": unknown intent class", ctx + "." + name);
        }
        const std::string field = ctx + "." + name;
        if (!value.is_object()) {
            throw ConfigError(field + ": expected {rate, ber, power}", field);
        }
        require_known_keys(value, {"rate", "ber", "power"}, field);
        IntentWeights w;
        w.rate = double_field(value, "rate", field, 0.0);
        w.ber = double_field(value, "ber", field, 0.0);
        w.power = double_field(value, "power", field, 0.0);
        try {
            table.set(*cls, w);
        } catch (const ConfigError& e) {
            throw ConfigError(field + ": " + e.what(), field);
        }
    }
    return table;
}

double sorted_sum(std::vector<double>& v)
{
    // Summing in sorted order makes the result independent of log order.
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s;
}

MetricSummary summarize(std::vector<double> v)
{
    MetricSummary m;
    const double n = static_cast<double>(v.size());
    m.mean = sorted_sum(v) / n;
    if (v.size() > 1) {
        std::vector<double> dev;
        dev.reserve(v.size());
        for (double x : v) {
            dev.push_back((x - m.mean) * (x - m.mean));
        }
        const double var = sorted_sum(dev) / (n - 1.0);
        m.ci95 = 1.96 * std::sqrt(var) / std::sqrt(n);
    }
    return m;
}

} // namespace

std::string_view to_string(PolicyKind k)
{
    switch (k) {
    case PolicyKind::lut: return "lut";
    case PolicyKind::bandit: return "bandit";
    case PolicyKind::external: return "external";
    case PolicyKind::random: return "random";
    }
    return "?";
}

std::optional<PolicyKind> policy_kind_from_string(std::string_view s)
{
    for (auto k : {PolicyKind::lut, PolicyKind::bandit, PolicyKind::external, PolicyKind::random}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

RewardConfig AppConfig::reward() const
{
    if (grid.empty()) {
        return RewardConfig{};
    }
    return RewardConfig::for_array(grid.front().n_tx, grid.front().n_rx);
}

AppConfig parse_app_config(const Json& j, const std::filesystem::path& base_dir)
{
    if (!j.is_object()) {
        throw ConfigError("config: expected an object", "config");
    }
    require_known_keys(j,
                       {"scenario_grid", "action_space", "intent_weights", "training",
                        "provider_endpoint"},
                       "");
    AppConfig cfg;
    const Json& grid = require_member(j, "scenario_grid", "");
    if (grid.is_string()) {
        std::filesystem::path p = grid.get<std::string>();
        if (p.is_relative()) {
            p = base_dir / p;
        }
        cfg.grid = load_scenario_grid(p);
    } else {
        cfg.grid = parse_scenario_grid(grid);
    }
    for (const auto& s : cfg.grid) {
        if (s.n_tx != cfg.grid.front().n_tx || s.n_rx != cfg.grid.front().n_rx) {
            throw ConfigError("scenario_grid: all scenarios must share one antenna array size "
                              "(reward normalization depends on it)",
                              "scenario_grid");
        }
    }
    if (j.contains("action_space")) {
        cfg.action_space = action_space_from_json(j["action_space"], "action_space");
    }
    if (j.contains("intent_weights")) {
        cfg.weights = weights_from_json(j["intent_weights"], "intent_weights");
    }
    if (j.contains("training")) {
        cfg.training = training_from_json(j["training"], "training");
    }
    if (j.contains("provider_endpoint")) {
        cfg.provider = provider_endpoint_from_json(j["provider_endpoint"], "provider_endpoint");
    }
    cfg.training.memory.reward = cfg.reward();
    return cfg;
}

AppConfig load_app_config(const std::filesystem::path& path)
{
    return parse_app_config(read_json_file(path), path.parent_path());
}

void Agent::check() const
{
    if (space == nullptr) {
        throw ConfigError("agent has no action space");
    }
    switch (kind) {
    case PolicyKind::bandit:
        if (policy == nullptr) {
            throw ConfigError("bandit policy needs a policy state (train one first)", "policy");
        }
        break;
    case PolicyKind::lut:
        if (lut == nullptr) {
            throw ConfigError("lut policy needs a calibrated table; run `calibrate` and pass --lut",
                              "lut");
        }
        break;
    case PolicyKind::external:
        if (provider == nullptr) {
            throw ConfigError("external policy needs provider_endpoint in the config",
                              "provider_endpoint");
        }
        if (lut == nullptr) {
            throw ConfigError("external policy needs a LUT table for fallback; run `calibrate` "
                              "and pass --lut",
                              "lut");
        }
        break;
    case PolicyKind::random: break;
    }
}

ChannelState episode_channel(const ScenarioSpec& spec, std::uint64_t stream)
{
    return generate_channel(spec, derive_stream(stream, 1, 0));
}

std::string episode_intent_text(IntentClass c, std::uint64_t stream)
{
    const auto templates = intent_templates(c);
    Rng rng(derive_stream(stream, 4, 0));
    return std::string(templates[rng.below(templates.size())]);
}

EpisodeResult run_episode(const ChannelState& cs, std::string_view intent_text, Agent& agent,
                          std::uint64_t stream)
{
    agent.check();
    EpisodeResult out;
    const CsiFeatures f = extract_features(cs);
    out.intent = parse_intent(intent_text, agent.weights);

    Rng explore(derive_stream(stream, 3, 0));
    LinkStrategy s;
    switch (agent.kind) {
    case PolicyKind::bandit: {
        const double eps = agent.epsilon.value_or(agent.policy->epsilon());
        const MemoryStore* overlay = agent.memory;
        if (agent.learn && agent.memory != nullptr) {
            const ContextKey ctx = context_key(f, out.intent.cls);
            if (!agent.policy->visited(ctx)) {
                agent.policy->warm_start(
                    ctx, agent.memory->retrieve(f, out.intent.cls, agent.policy->params().memory_k),
                    *agent.space);
            }
            overlay = nullptr;
        }
        s = decide_bandit(f, out.intent, *agent.policy, overlay, *agent.space, explore, eps,
                          agent.learn);
        break;
    }
    case PolicyKind::lut: s = decide_lut(f, out.intent, agent.lut); break;
    case PolicyKind::random: s = decide_random(*agent.space, explore); break;
    case PolicyKind::external: {
        const auto d = decide_external(agent.provider, f, out.intent, *agent.space, agent.lut,
                                       agent.provider_timeout);
        s = d.strategy;
        out.fallback = d.fallback;
        out.fallback_cause = d.cause;
        out.rationale = d.rationale;
        break;
    }
    }

    Rng link_rng(derive_stream(stream, 2, 0));
    const LinkReport report = run_link(cs, s, agent.payload_bits, agent.frames, link_rng);
    out.reward = compute_reward(report, out.intent.weights, agent.reward);

    Episode& e = out.episode;
    e.features = f;
    e.intent = out.intent.cls;
    e.weights = out.intent.weights;
    e.strategy = s;
    e.report = report;
    e.reward = out.reward.r_total;
    e.seed = stream;
    e.timestamp = ++agent.clock;
    e.scenario_id = cs.scenario.scenario_id;
    e.intent_text = std::string(intent_text);

    if (agent.learn) {
        if (agent.policy != nullptr) {
            update_policy(*agent.policy, context_key(f, e.intent), s, e.reward);
        }
        if (agent.memory != nullptr) {
            agent.memory->store(e);
        }
    }
    return out;
}

TrainResult train_policy(const AppConfig& cfg, std::uint64_t master_seed, int episodes_per_class,
                         bool use_memory)
{
    if (episodes_per_class < 0) {
        throw ConfigError("episodes must be >= 0", "episodes");
    }
    const ActionSpace space(cfg.action_space);
    TrainResult out{PolicyState(cfg.training.bandit), MemoryStore(cfg.training.memory), {}, {}};

    Agent agent;
    agent.kind = PolicyKind::bandit;
    agent.space = &space;
    agent.weights = cfg.weights;
    agent.reward = cfg.reward();
    agent.frames = cfg.training.frames;
    agent.payload_bits = cfg.training.payload_bits;
    agent.policy = &out.policy;
    agent.memory = use_memory ? &out.memory : nullptr;
    agent.learn = true;

    std::vector<std::pair<std::size_t, IntentClass>> pairs;
    for (std::size_t s = 0; s < cfg.grid.size(); ++s) {
        for (auto c : kAllIntentClasses) {
            pairs.emplace_back(s, c);
        }
    }
    std::array<int, 3> done{};
    const std::uint64_t total = 3ULL * static_cast<std::uint64_t>(episodes_per_class);
    std::uint64_t i = 0;
    for (std::uint64_t round = 0; i < total; ++round) {
        auto order = pairs;
        Rng shuffle(derive_stream(master_seed, kOrderDomain, round));
        for (std::size_t k = order.size(); k > 1; --k) {
            std::swap(order[k - 1], order[shuffle.below(k)]);
        }
        for (const auto& [s, c] : order) {
            auto& count = done[static_cast<std::size_t>(c)];
            if (count >= episodes_per_class) {
                continue;
            }
            const std::uint64_t stream = derive_stream(master_seed, kTrainDomain, i);
            const ChannelState cs = episode_channel(cfg.grid[s], stream);
            auto r = run_episode(cs, episode_intent_text(c, stream), agent, stream);
            out.log.push_back(std::move(r.episode));
            ++count;
            ++i;
        }
    }
    out.curve = learning_curve(out.log, cfg.training.curve_window);
    return out;
}

std::vector<double> learning_curve(const std::vector<Episode>& log, int window)
{
    if (window < 1) {
        throw ConfigError("learning curve window must be >= 1", "learning_curve_window");
    }
    std::vector<double> out;
    const auto w = static_cast<std::size_t>(window);
    for (std::size_t start = 0; start < log.size(); start += w) {
        const std::size_t end = std::min(log.size(), start + w);
        double sum = 0.0;
        for (std::size_t k = start; k < end; ++k) {
            sum += log[k].reward;
        }
        out.push_back(sum / static_cast<double>(end - start));
    }
    return out;
}

std::uint64_t eval_stream(std::uint64_t master_seed, const std::string& scenario_id,
                          IntentClass c, int rep)
{
    const std::string key =
        scenario_id + '\x1f' + std::string(to_string(c)) + '\x1f' + std::to_string(rep);
    return derive_stream(master_seed, kEvalDomain, hash_text(key));
}

std::vector<EpisodeResult> closed_loop_eval(const std::vector<ScenarioSpec>& grid,
                                            const std::vector<IntentClass>& intents, Agent& agent,
                                            std::uint64_t master_seed, int episodes_per_pair)
{
    if (episodes_per_pair < 1) {
        throw ConfigError("episodes per (scenario, intent) must be >= 1", "episodes");
    }
    if (grid.empty()) {
        throw ConfigError("scenario grid is empty", "scenario_grid");
    }
    agent.check();
    std::vector<EpisodeResult> out;
    out.reserve(grid.size() * intents.size() * static_cast<std::size_t>(episodes_per_pair));
    for (const auto& spec : grid) {
        for (auto c : intents) {
            for (int rep = 0; rep < episodes_per_pair; ++rep) {
                const std::uint64_t stream = eval_stream(master_seed, spec.scenario_id, c, rep);
                const ChannelState cs = episode_channel(spec, stream);
                out.push_back(run_episode(cs, episode_intent_text(c, stream), agent, stream));
            }
        }
    }
    return out;
}

double metric_value(const Episode& e, std::size_t metric)
{
    switch (metric) {
    case 0: return e.report.ber;
    case 1: return e.report.spectral_rate;
    case 2: return e.report.goodput_ratio;
    case 3: return e.report.p_extra;
    }
    throw std::out_of_range("metric index");
}

AggregateResults aggregate(const std::vector<Episode>& log, std::string policy)
{
    if (log.empty()) {
        throw InvariantError("cannot aggregate an empty episode log");
    }
    std::map<std::pair<int, double>, std::vector<const Episode*>> groups;
    for (const auto& e : log) {
        groups[{static_cast<int>(e.intent), e.features.snr_db}].push_back(&e);
    }
    AggregateResults r;
    r.policy = std::move(policy);
    for (const auto& [key, members] : groups) {
        AggregateRow row;
        row.intent = static_cast<IntentClass>(key.first);
        row.snr_db = key.second;
        row.n = members.size();
        row.single = members.size() == 1;
        for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
            std::vector<double> v;
            for (const auto* e : members) {
                v.push_back(metric_value(*e, m));
            }
            row.metrics[m] = summarize(std::move(v));
        }
        std::vector<double> rewards;
        for (const auto* e : members) {
            rewards.push_back(e->reward);
        }
        row.mean_reward = summarize(std::move(rewards)).mean;
        r.rows.push_back(row);
    }
    return r;
}

std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string aggregates_csv(const AggregateResults& r)
{
    std::string out = "intent,snr_db,metric,mean,ci95,n\n";
    for (const auto& row : r.rows) {
        for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
            out += std::string(to_string(row.intent)) + "," + format_number(row.snr_db) + "," +
                   kMetricNames[m] + "," + format_number(row.metrics[m].mean) + "," +
                   format_number(row.metrics[m].ci95) + "," + std::to_string(row.n) + "\n";
        }
    }
    return out;
}

std::string plot_csv(const AggregateResults& r, std::size_t metric)
{
    std::vector<double> snrs;
    for (const auto& row : r.rows) {
        snrs.push_back(row.snr_db);
    }
    std::sort(snrs.begin(), snrs.end());
    snrs.erase(std::unique(snrs.begin(), snrs.end()), snrs.end());

    std::string out = "snr_db";
    for (auto c : kAllIntentClasses) {
        out += "," + std::string(to_string(c)) + "_mean," + std::string(to_string(c)) + "_ci95";
    }
    out += "\n";
    for (double snr : snrs) {
        out += format_number(snr);
        for (auto c : kAllIntentClasses) {
            const auto it = std::find_if(r.rows.begin(), r.rows.end(), [&](const AggregateRow& row) {
                return row.intent == c && row.snr_db == snr;
            });
            if (it == r.rows.end()) {
                out += ",,";
            } else {
                out += "," + format_number(it->metrics[metric].mean) + "," +
                       format_number(it->metrics[metric].ci95);
            }
        }
        out += "\n";
    }
    return out;
}

std::string episodes_jsonl(const std::vector<Episode>& log)
{
    std::string out;
    for (const auto& e : log) {
        out += Json(e).dump();
        out += "\n";
    }
    return out;
}

void ensure_writable_dir(const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw ConfigError("output directory '" + dir.string() + "' cannot be created", "out");
    }
    const auto probe = dir / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) {
            throw ConfigError("output directory '" + dir.string() + "' is not writable", "out");
        }
    }
    std::filesystem::remove(probe, ec);
}

void export_results(const AggregateResults& r, const std::vector<Episode>& log,
                    const std::filesystem::path& outdir)
{
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("episodes.jsonl", episodes_jsonl(log));
    files.emplace_back("aggregates.csv", aggregates_csv(r));
    for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
        files.emplace_back(std::string("plot_") + kMetricNames[m] + ".csv", plot_csv(r, m));
    }
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        Json metrics = Json::object();
        for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
            metrics[kMetricNames[m]] = {{"mean", row.metrics[m].mean}, {"ci95", row.metrics[m].ci95}};
        }
        rows.push_back({{"intent", to_string(row.intent)},
                        {"snr_db", row.snr_db},
                        {"n", row.n},
                        {"single", row.single},
                        {"mean_reward", row.mean_reward},
                        {"metrics", metrics}});
    }
    files.emplace_back("summary.json",
                       Json{{"policy", r.policy}, {"episodes", log.size()}, {"groups", rows}}.dump(2) +
                           "\n");

    ensure_writable_dir(outdir);
    for (const auto& [name, content] : files) {
        write_text_file_atomic(outdir / name, content);
    }
}

} // namespace linkagent
