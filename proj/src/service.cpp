#include "linkagent/service.hpp"

#include "linkagent/error.hpp"
#include "linkagent/serialization.hpp"

#include <httplib.h>

#include <cstdio>
#include <regex>

namespace linkagent {

namespace {

constexpr std::uint64_t kSessionDomain = hash_text("session");
constexpr std::uint64_t kRequestDomain = hash_text("session-request");
constexpr std::uint64_t kChannelDomain = hash_text("session-channel");

Json aggregate_rows(const AggregateResults& r)
{
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
    return rows;
}

} // namespace

ServiceResponse error_response(int status, const std::string& code, const std::string& message,
                               const std::string& field)
{
    Json body{{"code", code}, {"message", message}};
    if (!field.empty()) {
        body["field"] = field;
    }
    return {status, body};
}

LinkService::LinkService(Resources res, std::uint64_t seed)
    : res_(std::move(res)), space_(res_.config.action_space), seed_(seed)
{
}

std::uint64_t LinkService::request_stream(std::uint64_t session_seed, std::uint64_t n)
{
    return derive_stream(session_seed, kRequestDomain, n);
}

std::uint64_t LinkService::channel_seed(std::uint64_t session_seed, std::uint64_t k)
{
    return derive_stream(session_seed, kChannelDomain, k);
}

std::uint64_t LinkService::session_seed(std::uint64_t index) const
{
    return derive_stream(seed_, kSessionDomain, index);
}

bool LinkService::policy_available(PolicyKind k) const
{
    switch (k) {
    case PolicyKind::bandit: return res_.policy.has_value();
    case PolicyKind::lut: return res_.lut.has_value();
    case PolicyKind::external: return res_.provider != nullptr && res_.lut.has_value();
    case PolicyKind::random: return true;
    }
    return false;
}

std::shared_ptr<LinkService::Session> LinkService::find(const std::string& id) const
{
    std::shared_lock lock(sessions_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

ServiceResponse LinkService::create_session(const Json& body)
{
    if (!body.is_object()) {
        return error_response(400, "BadRequest", "request body must be a JSON object");
    }
    for (const auto& [key, _] : body.items()) {
        if (key != "scenario_id" && key != "policy") {
            return error_response(400, "BadRequest", "unknown field '" + key + "'", key);
        }
    }
    if (!body.contains("scenario_id") || !body["scenario_id"].is_string()) {
        return error_response(400, "BadRequest", "scenario_id (string) is required", "scenario_id");
    }
    const std::string sid = body["scenario_id"].get<std::string>();
    const auto spec = std::find_if(res_.config.grid.begin(), res_.config.grid.end(),
                                   [&](const ScenarioSpec& s) { return s.scenario_id == sid; });
    if (spec == res_.config.grid.end()) {
        return error_response(400, "UnknownScenario", "no scenario with id '" + sid + "'",
                              "scenario_id");
    }
    PolicyKind kind = res_.default_policy;
    if (body.contains("policy")) {
        const auto k = body["policy"].is_string()
                           ? policy_kind_from_string(body["policy"].get<std::string>())
                           : std::nullopt;
        if (!k) {
            return error_response(400, "UnknownPolicy",
                                  "policy must be one of lut, bandit, external, random", "policy");
        }
        kind = *k;
    }
    if (!policy_available(kind)) {
        return error_response(400, "PolicyUnavailable",
                              "policy '" + std::string(to_string(kind)) +
                                  "' is not loaded in this service",
                              "policy");
    }

    auto session = std::make_shared<Session>();
    session->scenario = *spec;
    session->policy = kind;
    {
        std::unique_lock lock(sessions_mu_);
        const std::uint64_t index = next_index_++;
        session->seed = session_seed(index);
        char buf[48];
        std::snprintf(buf, sizeof buf, "s%llu-%08llx", static_cast<unsigned long long>(index),
                      static_cast<unsigned long long>(session->seed & 0xffffffffULL));
        session->id = buf;
        session->channel = generate_channel(session->scenario, channel_seed(session->seed, 0));
        session->channel_draws = 1;
        sessions_[session->id] = session;
    }
    Json scenario;
    to_json(scenario, session->scenario);
    return {201, Json{{"session_id", session->id},
                      {"scenario", scenario},
                      {"policy", to_string(kind)},
                      {"features", extract_features(session->channel)}}};
}

ServiceResponse LinkService::submit_intent(const std::string& session_id, const Json& body)
{
    auto session = find(session_id);
    if (!session) {
        return error_response(404, "SessionNotFound", "no session '" + session_id + "'",
                              "session_id");
    }
    if (!body.is_object()) {
        return error_response(400, "BadRequest", "request body must be a JSON object");
    }
    for (const auto& [key, _] : body.items()) {
        if (key != "text" && key != "refresh_channel") {
            return error_response(400, "BadRequest", "unknown field '" + key + "'", key);
        }
    }
    std::string text;
    if (body.contains("text")) {
        if (!body["text"].is_string()) {
            return error_response(400, "BadRequest", "text must be a string", "text");
        }
        text = body["text"].get<std::string>();
    }
    bool refresh = false;
    if (body.contains("refresh_channel")) {
        if (!body["refresh_channel"].is_boolean()) {
            return error_response(400, "BadRequest", "refresh_channel must be true or false",
                                  "refresh_channel");
        }
        refresh = body["refresh_channel"].get<bool>();
    }

    std::lock_guard lock(session->mu);
    if (refresh) {
        session->channel = generate_channel(session->scenario,
                                            channel_seed(session->seed, session->channel_draws));
        session->channel_draws += 1;
    }

    Agent agent;
    agent.kind = session->policy;
    agent.space = &space_;
    agent.weights = res_.config.weights;
    agent.reward = res_.config.reward();
    agent.frames = res_.config.training.frames;
    agent.payload_bits = res_.config.training.payload_bits;
    // The service works on a read-only snapshot: learn stays false, so the policy
    // state and memory are never written.
    agent.policy = res_.policy ? &*res_.policy : nullptr;
    agent.memory = res_.memory ? &*res_.memory : nullptr;
    agent.lut = res_.lut ? &*res_.lut : nullptr;
    agent.provider = res_.provider.get();
    agent.provider_timeout = res_.config.provider.timeout;
    agent.learn = false;
    agent.epsilon = 0.0;
    agent.clock = session->clock;

    const std::uint64_t stream = request_stream(session->seed, session->requests);
    EpisodeResult r;
    try {
        std::unique_lock<std::mutex> plock(provider_mu_, std::defer_lock);
        if (agent.kind == PolicyKind::external) {
            plock.lock();
        }
        r = run_episode(session->channel, text, agent, stream);
    } catch (const IntentError& e) {
        auto resp = error_response(400, std::string(e.code_name()), e.what(), "text");
        resp.body["guidance"] = std::string(IntentError::guidance());
        return resp;
    }
    session->requests += 1;
    session->clock = agent.clock;

    Json entry{{"intent_text", text},
               {"intent", r.intent},
               {"strategy", r.episode.strategy},
               {"report", r.episode.report},
               {"reward", r.reward},
               {"features", r.episode.features},
               {"timestamp", r.episode.timestamp},
               {"channel_draw", session->channel_draws - 1}};
    if (agent.kind == PolicyKind::external) {
        entry["fallback"] = r.fallback;
        if (r.fallback) {
            entry["fallback_cause"] = r.fallback_cause;
        }
        if (!r.rationale.empty()) {
            entry["rationale"] = r.rationale;
        }
    }
    session->history.push_back(entry);
    session->log.push_back(r.episode);
    return {200, entry};
}

ServiceResponse LinkService::history(const std::string& session_id) const
{
    auto session = find(session_id);
    if (!session) {
        return error_response(404, "SessionNotFound", "no session '" + session_id + "'",
                              "session_id");
    }
    std::lock_guard lock(session->mu);
    return {200, Json{{"session_id", session->id}, {"history", session->history}}};
}

ServiceResponse LinkService::aggregates(const std::string& session_id) const
{
    auto session = find(session_id);
    if (!session) {
        return error_response(404, "SessionNotFound", "no session '" + session_id + "'",
                              "session_id");
    }
    std::lock_guard lock(session->mu);
    Json groups = Json::array();
    if (!session->log.empty()) {
        groups = aggregate_rows(aggregate(session->log, std::string(to_string(session->policy))));
    }
    return {200, Json{{"session_id", session->id}, {"groups", groups}}};
}

ServiceResponse LinkService::scenarios() const
{
    Json list = Json::array();
    for (const auto& s : res_.config.grid) {
        Json j;
        to_json(j, s);
        list.push_back(j);
    }
    return {200, Json{{"scenarios", list}}};
}

ServiceResponse LinkService::health() const
{
    Json policies = Json::array();
    for (auto k : {PolicyKind::lut, PolicyKind::bandit, PolicyKind::external, PolicyKind::random}) {
        if (policy_available(k)) {
            policies.push_back(std::string(to_string(k)));
        }
    }
    std::shared_lock lock(sessions_mu_);
    return {200, Json{{"status", "ok"},
                      {"policies", policies},
                      {"default_policy", to_string(res_.default_policy)},
                      {"sessions", sessions_.size()}}};
}

ServiceResponse LinkService::handle(const std::string& method, const std::string& path,
                                    const std::string& body)
{
    static const std::regex session_re(R"(^/sessions/([^/]+)/(intent|history|aggregates)$)");
    const auto parse_body = [&](Json& out) -> std::optional<ServiceResponse> {
        if (body.empty()) {
            out = Json::object();
            return std::nullopt;
        }
        try {
            out = Json::parse(body);
        } catch (const Json::parse_error& e) {
            return error_response(400, "BadRequest", std::string("malformed JSON body: ") + e.what());
        }
        return std::nullopt;
    };

    try {
        if (path == "/health" && method == "GET") {
            return health();
        }
        if (path == "/scenarios" && method == "GET") {
            return scenarios();
        }
        if (path == "/sessions" && method == "POST") {
            Json j;
            if (auto err = parse_body(j)) {
                return *err;
            }
            return create_session(j);
        }
        std::smatch m;
        if (std::regex_match(path, m, session_re)) {
            const std::string id = m[1];
            const std::string what = m[2];
            if (what == "intent" && method == "POST") {
                Json j;
                if (auto err = parse_body(j)) {
                    return *err;
                }
                return submit_intent(id, j);
            }
            if (what == "history" && method == "GET") {
                return history(id);
            }
            if (what == "aggregates" && method == "GET") {
                return aggregates(id);
            }
            return error_response(405, "MethodNotAllowed", method + " is not supported on " + path);
        }
        return error_response(404, "NotFound", "no route for " + method + " " + path);
    } catch (const std::exception& e) {
        return error_response(500, "InternalError", e.what());
    }
}

void serve_http(LinkService& service, const std::string& host, int port, bool cors)
{
    httplib::Server server;
    const auto reply = [cors](httplib::Response& res, const ServiceResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
        if (cors) {
            res.set_header("Access-Control-Allow-Origin", "*");
        }
    };
    const auto route = [&service, reply](const char* method) {
        return [&service, reply, method](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.handle(method, req.path, req.body));
        };
    };
    server.Get(R"(/.*)", route("GET"));
    server.Post(R"(/.*)", route("POST"));
    server.Options(R"(/.*)", [cors](const httplib::Request&, httplib::Response& res) {
        res.status = 204;
        if (cors) {
            res.set_header("Access-Control-Allow-Origin", "*");
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
        }
    });
    if (!server.bind_to_port(host, port)) {
        throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    }
    std::fprintf(stderr, "listening on http://%s:%d\n", host.c_str(), port);
    server.listen_after_bind();
}

} // namespace linkagent
