#pragma once

#include "linkagent/harness.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

namespace linkagent {

struct ServiceResponse {
    int status = 200;
    Json body;
};

/// Session-oriented front end for the closed loop. Holds read-only policy resources;
/// it never trains. Requests on one session are serialized; sessions are independent.
class LinkService {
public:
    struct Resources {
        AppConfig config;
        std::optional<PolicyState> policy;
        std::optional<MemoryStore> memory;
        std::optional<LutTable> lut;
        std::unique_ptr<DecisionProvider> provider;
        PolicyKind default_policy = PolicyKind::lut;
    };

    LinkService(Resources res, std::uint64_t seed);

    ServiceResponse create_session(const Json& body);
    ServiceResponse submit_intent(const std::string& session_id, const Json& body);
    ServiceResponse history(const std::string& session_id) const;
    ServiceResponse aggregates(const std::string& session_id) const;
    ServiceResponse scenarios() const;
    ServiceResponse health() const;

    /// Routes a request by method and path; body is the raw request text.
    ServiceResponse handle(const std::string& method, const std::string& path,
                           const std::string& body);

    /// Request stream of the n-th submission of a session (0-based), and the stream
    /// of its k-th channel draw. Exposed so callers can replay a session offline.
    static std::uint64_t request_stream(std::uint64_t session_seed, std::uint64_t n);
    static std::uint64_t channel_seed(std::uint64_t session_seed, std::uint64_t k);
    std::uint64_t session_seed(std::uint64_t index) const;

    bool policy_available(PolicyKind k) const;

private:
    struct Session {
        std::string id;
        std::uint64_t seed = 0;
        ScenarioSpec scenario;
        PolicyKind policy = PolicyKind::lut;
        ChannelState channel;
        std::uint64_t channel_draws = 0;
        std::uint64_t requests = 0;
        std::uint64_t clock = 0;
        Json history = Json::array();
        std::vector<Episode> log;
        mutable std::mutex mu;
    };

    std::shared_ptr<Session> find(const std::string& id) const;

    Resources res_;
    ActionSpace space_;
    std::uint64_t seed_;
    mutable std::shared_mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_index_ = 0;
    std::mutex provider_mu_;
};

ServiceResponse error_response(int status, const std::string& code, const std::string& message,
                               const std::string& field = {});

/// Blocks serving HTTP until the process is stopped. Throws std::runtime_error if
/// the address cannot be bound.
void serve_http(LinkService& service, const std::string& host, int port, bool cors);

} // namespace linkagent
