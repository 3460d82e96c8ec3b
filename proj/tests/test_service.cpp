#include "linkagent/serialization.hpp"
#include "linkagent/service.hpp"

#include <doctest.h>

#include <set>

using namespace linkagent;

namespace {

LutTable toy_lut()
{
    LutTable t;
    t.bundles.push_back({Coding::repetition3, CodeRate::r1_3, Modulation::bpsk, 0.0});
    t.bundles.push_back({Coding::conv_k7, CodeRate::r1_2, Modulation::qpsk, 5.0});
    t.bundles.push_back({Coding::uncoded, CodeRate::r1, Modulation::qpsk, 9.0});
    t.bundles.push_back({Coding::conv_k7, CodeRate::r3_4, Modulation::qam16, 13.0});
    t.bundles.push_back({Coding::conv_k7, CodeRate::r2_3, Modulation::qam64, 18.0});
    return t;
}

LinkService make_service(std::uint64_t seed = 42)
{
    LinkService::Resources res;
    res.config = load_app_config(LINKAGENT_SOURCE_DIR "/tests/data/small.json");
    res.lut = toy_lut();
    return LinkService(std::move(res), seed);
}

std::string create(LinkService& s, const std::string& scenario, const std::string& policy = "lut")
{
    const auto r = s.handle("POST", "/sessions",
                            Json{{"scenario_id", scenario}, {"policy", policy}}.dump());
    REQUIRE(r.status == 201);
    return r.body["session_id"].get<std::string>();
}

ServiceResponse intent(LinkService& s, const std::string& id, const std::string& text)
{
    return s.handle("POST", "/sessions/" + id + "/intent", Json{{"text", text}}.dump());
}

} // namespace

TEST_CASE("health and scenarios")
{
    auto s = make_service();
    const auto h = s.handle("GET", "/health", "");
    CHECK(h.status == 200);
    CHECK(h.body["policies"] == Json::array({"lut", "random"}));
    const auto sc = s.handle("GET", "/scenarios", "");
    CHECK(sc.status == 200);
    CHECK(sc.body["scenarios"].size() == 3);
    CHECK(sc.body["scenarios"][1]["scenario_id"] == "mid");
}

TEST_CASE("session creation")
{
    auto s = make_service();
    const auto r = s.handle("POST", "/sessions", R"({"scenario_id": "hi"})");
    CHECK(r.status == 201);
    CHECK(r.body["scenario"]["snr_db"] == 20.0);
    CHECK(r.body.contains("features"));

    std::set<std::string> ids;
    for (int i = 0; i < 5; ++i) {
        ids.insert(create(s, "lo"));
    }
    CHECK(ids.size() == 5);

    const auto code = [&](const std::string& body) {
        const auto resp = s.handle("POST", "/sessions", body);
        CHECK(resp.status == 400);
        return resp.body["code"].get<std::string>();
    };
    CHECK(code(R"({"scenario_id": "nowhere"})") == "UnknownScenario");
    CHECK(code(R"({})") == "BadRequest");
    CHECK(code(R"({"scenario_id": "lo", "colour": 1})") == "BadRequest");
    CHECK(code(R"({"scenario_id": "lo", "policy": "oracle"})") == "UnknownPolicy");
    CHECK(code(R"({"scenario_id": "lo", "policy": "bandit"})") == "PolicyUnavailable");
    CHECK(code(R"({"scenario_id": "lo", "policy": "external"})") == "PolicyUnavailable");
    CHECK(code("{not json") == "BadRequest");
    CHECK(code("[1]") == "BadRequest");
}

TEST_CASE("intent submission errors")
{
    auto s = make_service();
    const auto id = create(s, "mid");
    auto r = s.handle("POST", "/sessions/" + id + "/intent", R"({"text": "  "})");
    CHECK(r.status == 400);
    CHECK(r.body["code"] == "MissingIntent");
    CHECK(r.body["field"] == "text");
    CHECK_FALSE(r.body["guidance"].get<std::string>().empty());
    r = s.handle("POST", "/sessions/" + id + "/intent", "");
    CHECK(r.body["code"] == "MissingIntent");
    r = intent(s, id, "make me a sandwich");
    CHECK(r.status == 400);
    CHECK(r.body["code"] == "UnrecognizedIntent");
    r = s.handle("POST", "/sessions/" + id + "/intent", R"({"text": 3})");
    CHECK(r.status == 400);
    r = s.handle("POST", "/sessions/" + id + "/intent", R"({"text": "fast", "refresh_channel": "yes"})");
    CHECK(r.status == 400);
    CHECK(r.body["field"] == "refresh_channel");
    r = intent(s, "s-nope", "fast");
    CHECK(r.status == 404);
    CHECK(r.body["code"] == "SessionNotFound");
    // failed submissions leave no history
    CHECK(s.handle("GET", "/sessions/" + id + "/history", "").body["history"].empty());
}

TEST_CASE("history matches an offline replay")
{
    auto s = make_service(7);
    const auto id = create(s, "mid");
    const std::vector<std::string> texts{"maximize throughput", "keep it reliable",
                                         "save battery power"};
    for (const auto& t : texts) {
        CHECK(intent(s, id, t).status == 200);
    }
    const auto h = s.handle("GET", "/sessions/" + id + "/history", "");
    REQUIRE(h.status == 200);
    REQUIRE(h.body["history"].size() == 3);

    const auto cfg = load_app_config(LINKAGENT_SOURCE_DIR "/tests/data/small.json");
    const ActionSpace space(cfg.action_space);
    const auto lut = toy_lut();
    Agent agent;
    agent.kind = PolicyKind::lut;
    agent.space = &space;
    agent.weights = cfg.weights;
    agent.reward = cfg.reward();
    agent.frames = cfg.training.frames;
    agent.payload_bits = cfg.training.payload_bits;
    agent.lut = &lut;
    agent.epsilon = 0.0;
    const std::uint64_t seed = s.session_seed(0);
    const auto cs = generate_channel(cfg.grid[1], LinkService::channel_seed(seed, 0));
    for (std::size_t n = 0; n < texts.size(); ++n) {
        const auto r = run_episode(cs, texts[n], agent, LinkService::request_stream(seed, n));
        const Json& e = h.body["history"][n];
        Json strat, rep;
        to_json(strat, r.episode.strategy);
        to_json(rep, r.episode.report);
        CHECK(e["strategy"] == strat);
        CHECK(e["report"] == rep);
        CHECK(e["reward"]["r_total"].get<double>() == r.reward.r_total);
        CHECK(e["intent"]["class"] == std::string(to_string(r.intent.cls)));
        CHECK(e["channel_draw"] == 0);
    }
}

TEST_CASE("two services with the same seed answer identically")
{
    auto a = make_service(3);
    auto b = make_service(3);
    const auto ia = create(a, "hi");
    const auto ib = create(b, "hi");
    CHECK(ia == ib);
    for (const char* t : {"fast", "robust", "green"}) {
        CHECK(intent(a, ia, t).body == intent(b, ib, t).body);
    }
    const auto ra = a.handle("POST", "/sessions/" + ia + "/intent",
                             R"({"text": "fast", "refresh_channel": true})");
    CHECK(ra.body["channel_draw"] == 1);
}

TEST_CASE("aggregates")
{
    auto s = make_service();
    const auto id = create(s, "hi");
    auto r = s.handle("GET", "/sessions/" + id + "/aggregates", "");
    CHECK(r.status == 200);
    CHECK(r.body["groups"] == Json::array());

    for (int i = 0; i < 4; ++i) {
        intent(s, id, "maximize throughput");
        intent(s, id, "reliability first");
    }
    r = s.handle("GET", "/sessions/" + id + "/aggregates", "");
    REQUIRE(r.body["groups"].size() == 2);
    double rate_tp = 0, rate_rel = 0;
    for (const auto& g : r.body["groups"]) {
        CHECK(g["n"] == 4);
        const double rate = g["metrics"]["spectral_rate"]["mean"].get<double>();
        (g["intent"] == "HighThroughput" ? rate_tp : rate_rel) = rate;
    }
    CHECK(rate_rel <= rate_tp);
}

TEST_CASE("routing")
{
    auto s = make_service();
    const auto id = create(s, "lo");
    CHECK(s.handle("GET", "/nowhere", "").status == 404);
    CHECK(s.handle("DELETE", "/sessions/" + id + "/history", "").status == 405);
    CHECK(s.handle("GET", "/sessions/" + id + "/intent", "").status == 405);
    CHECK(s.handle("GET", "/sessions/unknown/history", "").status == 404);
    CHECK(s.handle("GET", "/sessions/unknown/aggregates", "").status == 404);
    CHECK(s.handle("POST", "/sessions/" + id + "/intent", "{oops").status == 400);
}

TEST_CASE("random policy sessions work without any loaded state")
{
    LinkService::Resources res;
    res.config = load_app_config(LINKAGENT_SOURCE_DIR "/tests/data/small.json");
    LinkService s(std::move(res), 1);
    CHECK(s.handle("POST", "/sessions", R"({"scenario_id": "lo"})").status == 400);
    const auto id = create(s, "lo", "random");
    CHECK(intent(s, id, "fast").status == 200);
}
