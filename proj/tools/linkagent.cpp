// Command-line front end: calibrate, train, eval, sweep, serve.

#include "linkagent/error.hpp"
#include "linkagent/harness.hpp"
#include "linkagent/service.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace linkagent;

namespace {

struct Options {
    std::string config = "config/default.json";
    std::uint64_t seed = 1;
    std::string out = "out";
    std::string policy;
    int episodes = -1;
    std::string lut;
    std::string policy_state;
    std::string memory;
    bool no_memory = false;
    std::string host = "127.0.0.1";
    int port = 8080;
    bool cors = false;
};

void add_common(CLI::App* cmd, Options& o)
{
    cmd->add_option("--config", o.config, "Config file")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

std::string learning_curve_csv(const std::vector<double>& curve, int window)
{
    std::string out = "window,episodes,mean_reward\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        out += std::to_string(i) + "," + std::to_string((i + 1) * static_cast<std::size_t>(window)) +
               "," + format_number(curve[i]) + "\n";
    }
    return out;
}

PolicyKind parse_policy(const std::string& s, PolicyKind fallback)
{
    if (s.empty()) {
        return fallback;
    }
    auto k = policy_kind_from_string(s);
    if (!k) {
        throw ConfigError("--policy must be one of lut, bandit, external, random", "policy");
    }
    return *k;
}

void write_training(const TrainResult& t, const AppConfig& cfg, const std::filesystem::path& out)
{
    ensure_writable_dir(out);
    t.policy.save(out / "policy_state.json");
    t.memory.save(out / "memory.json");
    write_text_file_atomic(out / "learning_curve.csv",
                           learning_curve_csv(t.curve, cfg.training.curve_window));
    write_text_file_atomic(out / "train_episodes.jsonl", episodes_jsonl(t.log));
}

struct Loaded {
    std::optional<PolicyState> policy;
    std::optional<MemoryStore> memory;
    std::optional<LutTable> lut;
    std::unique_ptr<DecisionProvider> provider;
};

Loaded load_resources(const Options& o, const AppConfig& cfg, PolicyKind kind, bool need_policy)
{
    Loaded l;
    if (!o.lut.empty()) {
        l.lut = LutTable::load(o.lut);
    }
    if (!o.policy_state.empty()) {
        l.policy = PolicyState::load(o.policy_state);
    }
    if (!o.memory.empty()) {
        l.memory = MemoryStore::load(o.memory);
    }
    if (cfg.provider.kind.empty() == false) {
        l.provider = make_provider(cfg.provider);
    }
    if ((kind == PolicyKind::lut || kind == PolicyKind::external) && !l.lut) {
        throw ConfigError("policy '" + std::string(to_string(kind)) +
                              "' needs a calibrated LUT: run `calibrate` and pass --lut <file>",
                          "lut");
    }
    if (kind == PolicyKind::external && !l.provider) {
        throw ConfigError("policy 'external' needs provider_endpoint in the config",
                          "provider_endpoint");
    }
    if (need_policy && kind == PolicyKind::bandit && !l.policy) {
        throw ConfigError("policy 'bandit' needs --policy-state <file> (run `train` first)",
                          "policy_state");
    }
    return l;
}

std::vector<Episode> run_eval(const AppConfig& cfg, const Options& o, PolicyKind kind,
                              Loaded& l, int episodes)
{
    const ActionSpace space(cfg.action_space);
    Agent agent;
    agent.kind = kind;
    agent.space = &space;
    agent.weights = cfg.weights;
    agent.reward = cfg.reward();
    agent.frames = cfg.training.frames;
    agent.payload_bits = cfg.training.payload_bits;
    agent.policy = l.policy ? &*l.policy : nullptr;
    agent.memory = l.memory ? &*l.memory : nullptr;
    agent.lut = l.lut ? &*l.lut : nullptr;
    agent.provider = l.provider.get();
    agent.provider_timeout = cfg.provider.timeout;
    agent.epsilon = 0.0;
    const std::vector<IntentClass> intents(kAllIntentClasses.begin(), kAllIntentClasses.end());
    const auto results = closed_loop_eval(cfg.grid, intents, agent, o.seed, episodes);
    std::vector<Episode> log;
    log.reserve(results.size());
    std::size_t fallbacks = 0;
    for (const auto& r : results) {
        log.push_back(r.episode);
        fallbacks += r.fallback ? 1 : 0;
    }
    if (kind == PolicyKind::external) {
        std::fprintf(stderr, "external decisions: %zu of %zu fell back to the LUT\n", fallbacks,
                     results.size());
    }
    return log;
}

void print_summary(const AggregateResults& r)
{
    std::printf("%-16s %6s %6s %12s %14s %14s %10s\n", "intent", "snr_db", "n", "ber",
                "spectral_rate", "goodput_ratio", "p_extra");
    for (const auto& row : r.rows) {
        std::printf("%-16s %6g %6zu %12.4g %14.4g %14.4g %10.4g\n",
                    std::string(to_string(row.intent)).c_str(), row.snr_db, row.n,
                    row.metrics[0].mean, row.metrics[1].mean, row.metrics[2].mean,
                    row.metrics[3].mean);
    }
}

int cmd_calibrate(const Options& o)
{
    const AppConfig cfg = load_app_config(o.config);
    ensure_writable_dir(o.out);
    const LutTable table = calibrate_lut(cfg.training.calibration, cfg.grid, o.seed);
    const auto path = std::filesystem::path(o.out) / "lut.json";
    table.save(path);
    for (const auto& b : table.bundles) {
        std::printf("%-12s %-4s %-7s %s\n", std::string(to_string(b.coding)).c_str(),
                    std::string(to_string(b.code_rate)).c_str(),
                    std::string(to_string(b.modulation)).c_str(),
                    b.threshold_db ? format_number(*b.threshold_db).c_str() : "unreached");
    }
    std::printf("wrote %s\n", path.string().c_str());
    return 0;
}

int cmd_train(const Options& o)
{
    const AppConfig cfg = load_app_config(o.config);
    const int episodes = o.episodes >= 0 ? o.episodes : cfg.training.episodes_per_class;
    const bool memory = cfg.training.use_memory && !o.no_memory;
    ensure_writable_dir(o.out);
    const TrainResult t = train_policy(cfg, o.seed, episodes, memory);
    write_training(t, cfg, o.out);
    std::printf("trained %zu episodes (%d per class), %zu table entries, memory %zu\n", t.log.size(),
                episodes, t.policy.values().size(), t.memory.size());
    if (!t.curve.empty()) {
        std::printf("first window %.4f, last window %.4f\n", t.curve.front(), t.curve.back());
    }
    return 0;
}

int cmd_eval(const Options& o)
{
    const AppConfig cfg = load_app_config(o.config);
    const PolicyKind kind = parse_policy(o.policy, PolicyKind::bandit);
    const int episodes = o.episodes >= 0 ? o.episodes : cfg.training.eval_episodes;
    Loaded l = load_resources(o, cfg, kind, true);
    ensure_writable_dir(o.out);
    const auto log = run_eval(cfg, o, kind, l, episodes);
    const auto agg = aggregate(log, std::string(to_string(kind)));
    export_results(agg, log, o.out);
    print_summary(agg);
    return 0;
}

int cmd_sweep(const Options& o)
{
    const AppConfig cfg = load_app_config(o.config);
    const PolicyKind kind = parse_policy(o.policy, PolicyKind::bandit);
    const int episodes = o.episodes >= 0 ? o.episodes : cfg.training.eval_episodes;
    Loaded l = load_resources(o, cfg, kind, false);
    ensure_writable_dir(o.out);
    if (kind == PolicyKind::bandit && !l.policy) {
        const bool memory = cfg.training.use_memory && !o.no_memory;
        TrainResult t = train_policy(cfg, o.seed, cfg.training.episodes_per_class, memory);
        write_training(t, cfg, o.out);
        l.policy = std::move(t.policy);
        if (memory && !l.memory) {
            l.memory = std::move(t.memory);
        }
    }
    const auto log = run_eval(cfg, o, kind, l, episodes);
    const auto agg = aggregate(log, std::string(to_string(kind)));
    export_results(agg, log, o.out);
    print_summary(agg);
    return 0;
}

int cmd_serve(const Options& o)
{
    const AppConfig cfg = load_app_config(o.config);
    const PolicyKind kind = parse_policy(o.policy, PolicyKind::lut);
    Loaded l = load_resources(o, cfg, kind, true);
    LinkService::Resources res{cfg, std::move(l.policy), std::move(l.memory), std::move(l.lut),
                               std::move(l.provider), kind};
    LinkService service(std::move(res), o.seed);
    serve_http(service, o.host, o.port, o.cors);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Intent-driven MIMO link adaptation: simulation, training and evaluation"};
    app.require_subcommand(1);
    Options o;

    auto* calibrate = app.add_subcommand("calibrate", "Measure LUT SNR thresholds");
    add_common(calibrate, o);

    auto* train = app.add_subcommand("train", "Train the bandit policy");
    add_common(train, o);
    train->add_option("--episodes", o.episodes, "Episodes per intent class");
    train->add_flag("--no-memory", o.no_memory, "Disable memory warm start");

    auto* eval = app.add_subcommand("eval", "Evaluate a policy on held-out seeds");
    add_common(eval, o);
    eval->add_option("--policy", o.policy, "lut|bandit|external|random (default bandit)");
    eval->add_option("--episodes", o.episodes, "Episodes per (scenario, intent)");
    eval->add_option("--lut", o.lut, "LUT table from `calibrate`");
    eval->add_option("--policy-state", o.policy_state, "Policy state from `train`");
    eval->add_option("--memory", o.memory, "Memory store for warm starts");

    auto* sweep = app.add_subcommand("sweep", "Train if needed, then evaluate all intents over the grid");
    add_common(sweep, o);
    sweep->add_option("--policy", o.policy, "lut|bandit|external|random (default bandit)");
    sweep->add_option("--episodes", o.episodes, "Evaluation episodes per (scenario, intent)");
    sweep->add_option("--lut", o.lut, "LUT table from `calibrate`");
    sweep->add_option("--policy-state", o.policy_state, "Skip training and use this state");
    sweep->add_option("--memory", o.memory, "Memory store for warm starts");
    sweep->add_flag("--no-memory", o.no_memory, "Train without memory warm start");

    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    add_common(serve, o);
    serve->add_option("--policy", o.policy, "Default policy for new sessions (default lut)");
    serve->add_option("--lut", o.lut, "LUT table from `calibrate`");
    serve->add_option("--policy-state", o.policy_state, "Policy state from `train`");
    serve->add_option("--memory", o.memory, "Memory store for warm starts");
    serve->add_option("--host", o.host, "Bind address")->capture_default_str();
    serve->add_option("--port", o.port, "Bind port")->capture_default_str();
    serve->add_flag("--cors", o.cors, "Send permissive cross-origin headers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*calibrate) return cmd_calibrate(o);
        if (*train) return cmd_train(o);
        if (*eval) return cmd_eval(o);
        if (*sweep) return cmd_sweep(o);
        if (*serve) return cmd_serve(o);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error";
        if (!e.field().empty()) {
            std::cerr << " [" << e.field() << "]";
        }
        std::cerr << ": " << e.what() << "\n";
        return 2;
    } catch (const PersistenceError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const IntentError& e) {
        std::cerr << e.code_name() << ": " << e.what() << "\n" << IntentError::guidance() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
