#pragma once

#include "linkagent/channel_env.hpp"
#include "linkagent/intent.hpp"
#include "linkagent/json_util.hpp"
#include "linkagent/policy.hpp"
#include "linkagent/strategy.hpp"

#include <chrono>
#include <memory>
#include <string>
#include <vector>

namespace linkagent {

/// Transport to an external decision maker. exchange() returns the raw response body
/// or throws std::runtime_error (unreachable, timeout, non-2xx).
class DecisionProvider {
public:
    virtual ~DecisionProvider() = default;
    virtual std::string exchange(const std::string& request_body,
                                 std::chrono::milliseconds timeout) = 0;
    virtual std::string describe() const = 0;
};

/// POST <base_url><path> with a JSON body.
class HttpDecisionProvider : public DecisionProvider {
public:
    explicit HttpDecisionProvider(std::string url);
    std::string exchange(const std::string& request_body, std::chrono::milliseconds timeout) override;
    std::string describe() const override { return base_ + path_; }

private:
    std::string base_;
    std::string path_;
};

/// Child process speaking one JSON document per line on stdin/stdout. A child that
/// times out or dies is killed and respawned on the next request.
class PipeDecisionProvider : public DecisionProvider {
public:
    explicit PipeDecisionProvider(std::vector<std::string> argv);
    ~PipeDecisionProvider() override;
    PipeDecisionProvider(const PipeDecisionProvider&) = delete;
    PipeDecisionProvider& operator=(const PipeDecisionProvider&) = delete;

    std::string exchange(const std::string& request_body, std::chrono::milliseconds timeout) override;
    std::string describe() const override;

private:
    void spawn();
    void stop();

    std::vector<std::string> argv_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string pending_;
};

struct ProviderEndpoint {
    std::string kind;                 // "http" or "pipe"
    std::string url;                  // http
    std::vector<std::string> command; // pipe
    std::chrono::milliseconds timeout{2000};
};

/// Parses the config's provider_endpoint section; null yields an empty kind.
ProviderEndpoint provider_endpoint_from_json(const Json& j, const std::string& context);
std::unique_ptr<DecisionProvider> make_provider(const ProviderEndpoint& ep);

struct ExternalDecision {
    LinkStrategy strategy;
    bool fallback = false;
    std::string cause;     // why the LUT was used instead
    std::string rationale; // provider's optional explanation
};

Json decision_request(const CsiFeatures& f, const IntentSpec& intent,
                      const ActionSpaceConfig& space);

/// Asks the provider for a strategy. Any failure (transport, timeout, malformed body,
/// invariant violation, strategy outside the action space) falls back to decide_lut
/// with the cause recorded and logged to stderr.
ExternalDecision decide_external(DecisionProvider* provider, const CsiFeatures& f,
                                 const IntentSpec& intent, const ActionSpace& space,
                                 const LutTable* lut, std::chrono::milliseconds timeout);

} // namespace linkagent
