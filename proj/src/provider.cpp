#include "linkagent/provider.hpp"

#include "linkagent/error.hpp"
#include "linkagent/serialization.hpp"

#include <httplib.h>

#include <csignal>
#include <cstring>
#include <iostream>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace linkagent {

namespace {

std::pair<std::string, std::string> split_url(const std::string& url)
{
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0) {
        throw ConfigError("provider_endpoint.url: expected http://host:port/path, got '" + url + "'",
                          "provider_endpoint.url");
    }
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) {
        return {url, "/decide"};
    }
    return {url.substr(0, slash), url.substr(slash)};
}

} // namespace

HttpDecisionProvider::HttpDecisionProvider(std::string url)
{
    std::tie(base_, path_) = split_url(url);
}

std::string HttpDecisionProvider::exchange(const std::string& request_body,
                                           std::chrono::milliseconds timeout)
{
    httplib::Client client(base_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(path_, request_body, "application/json");
    if (!res) {
        throw std::runtime_error("provider request failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw std::runtime_error("provider answered HTTP " + std::to_string(res->status));
    }
    return res->body;
}

PipeDecisionProvider::PipeDecisionProvider(std::vector<std::string> argv) : argv_(std::move(argv))
{
    if (argv_.empty()) {
        throw ConfigError("provider_endpoint.command: must name a program",
                          "provider_endpoint.command");
    }
}

PipeDecisionProvider::~PipeDecisionProvider()
{
    stop();
}

std::string PipeDecisionProvider::describe() const
{
    std::string out = "pipe:";
    for (const auto& a : argv_) {
        out += " " + a;
    }
    return out;
}

void PipeDecisionProvider::spawn()
{
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0) {
        throw std::runtime_error(std::string("pipe: ") + std::strerror(errno));
    }
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw std::runtime_error(std::string("pipe: ") + std::strerror(errno));
    }
    std::signal(SIGPIPE, SIG_IGN);
    const pid_t pid = fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
            close(fd);
        }
        throw std::runtime_error(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        setpgid(0, 0);
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
            close(fd);
        }
        std::vector<char*> args;
        for (auto& a : argv_) {
            args.push_back(a.data());
        }
        args.push_back(nullptr);
        execvp(args[0], args.data());
        _exit(127);
    }
    setpgid(pid, pid);
    close(in_pipe[0]);
    close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    pending_.clear();
}

void PipeDecisionProvider::stop()
{
    if (to_child_ >= 0) {
        close(to_child_);
        to_child_ = -1;
    }
    if (from_child_ >= 0) {
        close(from_child_);
        from_child_ = -1;
    }
    if (pid_ > 0) {
        // the whole group, so helpers the child started do not linger
        kill(-pid_, SIGKILL);
        waitpid(pid_, nullptr, 0);
        pid_ = -1;
    }
    pending_.clear();
}

std::string PipeDecisionProvider::exchange(const std::string& request_body,
                                           std::chrono::milliseconds timeout)
{
    if (pid_ <= 0) {
        spawn();
    }
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::string line = request_body;
    line.erase(std::remove(line.begin(), line.end(), '\n'), line.end());
    line.push_back('\n');
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
        if (n <= 0) {
            stop();
            throw std::runtime_error("provider process is not accepting input");
        }
        written += static_cast<std::size_t>(n);
    }

    while (true) {
        const auto nl = pending_.find('\n');
        if (nl != std::string::npos) {
            std::string out = pending_.substr(0, nl);
            pending_.erase(0, nl + 1);
            return out;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            stop();
            throw std::runtime_error("provider process timed out");
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
        if (ready < 0 && errno == EINTR) {
            continue;
        }
        if (ready <= 0) {
            stop();
            throw std::runtime_error("provider process timed out");
        }
        char buf[4096];
        const ssize_t n = read(from_child_, buf, sizeof buf);
        if (n <= 0) {
            stop();
            throw std::runtime_error("provider process exited");
        }
        pending_.append(buf, static_cast<std::size_t>(n));
    }
}

ProviderEndpoint provider_endpoint_from_json(const Json& j, const std::string& ctx)
{
    ProviderEndpoint ep;
    if (j.is_null()) {
        return ep;
    }
    if (!j.is_object()) {
        throw ConfigError(ctx + ": expected an object or null", ctx);
    }
    require_known_keys(j, {"kind", "url", "command", "timeout_ms"}, ctx);
    const Json& kind = require_member(j, "kind", ctx);
    if (!kind.is_string() || (kind != "http" && kind != "pipe")) {
        throw ConfigError(ctx + ".kind: expected \"http\" or \"pipe\"", ctx + ".kind");
    }
    ep.kind = kind.get<std::string>();
    if (ep.kind == "http") {
        const Json& url = require_member(j, "url", ctx);
        if (!url.is_string()) {
            throw ConfigError(ctx + ".url: expected a string", ctx + ".url");
        }
        ep.url = url.get<std::string>();
        split_url(ep.url);
    } else {
        const Json& cmd = require_member(j, "command", ctx);
        if (!cmd.is_array() || cmd.empty()) {
            throw ConfigError(ctx + ".command: expected a non-empty list of strings",
                              ctx + ".command");
        }
        for (const auto& a : cmd) {
            if (!a.is_string()) {
                throw ConfigError(ctx + ".command: expected strings", ctx + ".command");
            }
            ep.command.push_back(a.get<std::string>());
        }
    }
    if (j.contains("timeout_ms")) {
        const Json& t = j["timeout_ms"];
        if (!t.is_number_integer() || t.get<std::int64_t>() < 1) {
            throw ConfigError(ctx + ".timeout_ms: expected a positive integer",
                              ctx + ".timeout_ms");
        }
        ep.timeout = std::chrono::milliseconds(t.get<std::int64_t>());
    }
    return ep;
}

std::unique_ptr<DecisionProvider> make_provider(const ProviderEndpoint& ep)
{
    if (ep.kind == "http") {
        return std::make_unique<HttpDecisionProvider>(ep.url);
    }
    if (ep.kind == "pipe") {
        return std::make_unique<PipeDecisionProvider>(ep.command);
    }
    return nullptr;
}

Json decision_request(const CsiFeatures& f, const IntentSpec& intent,
                      const ActionSpaceConfig& space)
{
    return Json{{"features", f}, {"intent", intent}, {"action_space", space}};
}

ExternalDecision decide_external(DecisionProvider* provider, const CsiFeatures& f,
                                 const IntentSpec& intent, const ActionSpace& space,
                                 const LutTable* lut, std::chrono::milliseconds timeout)
{
    ExternalDecision out;
    try {
        if (provider == nullptr) {
            throw std::runtime_error("no decision provider configured");
        }
        const std::string body = decision_request(f, intent, space.config()).dump();
        const std::string reply = provider->exchange(body, timeout);
        Json j;
        try {
            j = Json::parse(reply);
        } catch (const Json::parse_error&) {
            throw std::runtime_error("provider response is not valid JSON");
        }
        if (!j.is_object()) {
            throw std::runtime_error("provider response is not an object");
        }
        require_known_keys(j, {"strategy", "rationale"}, "response");
        const LinkStrategy s = strategy_from_json(require_member(j, "strategy", "response"),
                                                  "response.strategy");
        if (auto v = strategy_violation(s)) {
            throw std::runtime_error("provider strategy violates an invariant: " + *v);
        }
        if (!space.contains(s)) {
            throw std::runtime_error("provider strategy is outside the action space: " +
                                     describe(s));
        }
        if (j.contains("rationale")) {
            if (!j["rationale"].is_string()) {
                throw std::runtime_error("provider rationale is not a string");
            }
            out.rationale = j["rationale"].get<std::string>();
        }
        out.strategy = s;
        return out;
    } catch (const std::exception& e) {
        out.fallback = true;
        out.cause = e.what();
        out.rationale.clear();
    }
    std::cerr << "external decision fell back to LUT: " << out.cause << "\n";
    out.strategy = decide_lut(f, intent, lut);
    return out;
}

} // namespace linkagent
