#include "linkagent/memory.hpp"

#include "linkagent/error.hpp"
#include "linkagent/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace linkagent {

namespace {

std::size_t class_index(IntentClass c)
{
    return static_cast<std::size_t>(c);
}

} // namespace

void to_json(Json& j, const Episode& e)
{
    j = Json{{"features", e.features},
             {"intent", to_string(e.intent)},
             {"weights", e.weights},
             {"strategy", e.strategy},
             {"report", e.report},
             {"reward", e.reward},
             {"seed", e.seed},
             {"timestamp", e.timestamp},
             {"scenario_id", e.scenario_id},
             {"intent_text", e.intent_text}};
}

void from_json(const Json& j, Episode& e)
{
    const std::string ctx = "episode";
    require_known_keys(j,
                       {"features", "intent", "weights", "strategy", "report", "reward", "seed",
                        "timestamp", "scenario_id", "intent_text"},
                       ctx);
    e.features = require_member(j, "features", ctx).get<CsiFeatures>();
    e.intent = intent_class_from_json(require_member(j, "intent", ctx), ctx + ".intent");
    e.weights = require_member(j, "weights", ctx).get<IntentWeights>();
    e.strategy = strategy_from_json(require_member(j, "strategy", ctx), ctx + ".strategy");
    e.report = require_member(j, "report", ctx).get<LinkReport>();
    e.reward = require_member(j, "reward", ctx).get<double>();
    e.seed = require_member(j, "seed", ctx).get<std::uint64_t>();
    e.timestamp = require_member(j, "timestamp", ctx).get<std::uint64_t>();
    e.scenario_id = j.value("scenario_id", std::string{});
    e.intent_text = j.value("intent_text", std::string{});
}

double feature_distance(const CsiFeatures& a, const CsiFeatures& b)
{
    const double ds = (a.snr_db - b.snr_db) / 4.0;
    const double dc = (a.cond_db - b.cond_db) / 5.0;
    const double dl = (a.selectivity - b.selectivity) / 0.3;
    return std::sqrt(ds * ds + dc * dc + dl * dl);
}

MemoryStore::MemoryStore(MemoryConfig cfg) : cfg_(cfg) {}

bool MemoryStore::passes_gate(IntentClass c, double reward) const
{
    const auto idx = class_index(c);
    if (seen_[idx] < cfg_.bootstrap || history_[idx].empty()) {
        return true;
    }
    std::vector<double> sorted(history_[idx].begin(), history_[idx].end());
    std::sort(sorted.begin(), sorted.end());
    const auto pos = static_cast<std::size_t>(
        std::floor(cfg_.quality_quantile * static_cast<double>(sorted.size() - 1)));
    return reward >= sorted[pos];
}

bool MemoryStore::store(const Episode& e)
{
    return store(e, cfg_.capacity);
}

bool MemoryStore::store(const Episode& e, std::size_t capacity)
{
    const double expected = compute_reward(e.report, e.weights, cfg_.reward).r_total;
    if (!(std::abs(expected - e.reward) <= 1e-9 * std::max(1.0, std::abs(expected)))) {
        throw IntegrityError("episode reward " + format_double(e.reward) +
                             " does not match recomputed reward " + format_double(expected));
    }

    const auto idx = class_index(e.intent);
    const bool accepted = passes_gate(e.intent, e.reward);
    seen_[idx] += 1;
    history_[idx].push_back(e.reward);
    while (history_[idx].size() > cfg_.history_window) {
        history_[idx].pop_front();
    }
    if (!accepted || capacity == 0) {
        return false;
    }

    if (entries_.size() >= capacity) {
        // Evict the lowest-reward entry of the same class (oldest on ties). A class with
        // no entries yet takes its slot from the most populated class instead.
        IntentClass victim_class = e.intent;
        const auto count_of = [&](IntentClass c) {
            return std::count_if(entries_.begin(), entries_.end(),
                                 [c](const Episode& x) { return x.intent == c; });
        };
        if (count_of(e.intent) == 0) {
            std::ptrdiff_t most = -1;
            for (auto c : kAllIntentClasses) {
                if (count_of(c) > most) {
                    most = count_of(c);
                    victim_class = c;
                }
            }
        }
        auto victim = entries_.end();
        for (auto it = entries_.begin(); it != entries_.end(); ++it) {
            if (it->intent != victim_class) {
                continue;
            }
            if (victim == entries_.end() || it->reward < victim->reward ||
                (it->reward == victim->reward && it->timestamp < victim->timestamp)) {
                victim = it;
            }
        }
        if (victim_class == e.intent && e.reward < victim->reward) {
            return false;
        }
        entries_.erase(victim);
        while (entries_.size() >= capacity) {
            entries_.erase(entries_.begin());
        }
    }
    entries_.push_back(e);
    return true;
}

std::vector<Episode> MemoryStore::retrieve(const CsiFeatures& f, IntentClass c,
                                           std::size_t k) const
{
    std::vector<std::pair<double, const Episode*>> ranked;
    for (const auto& e : entries_) {
        if (e.intent == c) {
            ranked.emplace_back(feature_distance(f, e.features), &e);
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) {
            return a.first < b.first;
        }
        return a.second->timestamp > b.second->timestamp;
    });
    std::vector<Episode> out;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
        out.push_back(*ranked[i].second);
    }
    return out;
}

double MemoryStore::class_min_reward(IntentClass c) const
{
    double m = std::numeric_limits<double>::infinity();
    for (const auto& e : entries_) {
        if (e.intent == c) {
            m = std::min(m, e.reward);
        }
    }
    return m;
}

Json MemoryStore::to_json() const
{
    Json hist = Json::object();
    Json seen = Json::object();
    for (auto c : kAllIntentClasses) {
        const auto idx = class_index(c);
        hist[std::string(to_string(c))] =
            std::vector<double>(history_[idx].begin(), history_[idx].end());
        seen[std::string(to_string(c))] = seen_[idx];
    }
    return Json{{"format_version", kFormatVersion},
                {"config",
                 {{"capacity", cfg_.capacity},
                  {"quality_quantile", cfg_.quality_quantile},
                  {"bootstrap", cfg_.bootstrap},
                  {"history_window", cfg_.history_window},
                  {"r_max", cfg_.reward.r_max}}},
                {"history", hist},
                {"seen", seen},
                {"entries", entries_}};
}

MemoryStore MemoryStore::from_json(const Json& j)
{
    try {
        require_known_keys(j, {"format_version", "config", "history", "seen", "entries"},
                           "memory");
        const int version = require_member(j, "format_version", "memory").get<int>();
        if (version != kFormatVersion) {
            throw PersistenceError("memory store format_version " + std::to_string(version) +
                                   " is not supported (expected " +
                                   std::to_string(kFormatVersion) + ")");
        }
        const Json& c = require_member(j, "config", "memory");
        require_known_keys(c, {"capacity", "quality_quantile", "bootstrap", "history_window", "r_max"},
                           "memory.config");
        MemoryConfig cfg;
        cfg.capacity = c.at("capacity").get<std::size_t>();
        cfg.quality_quantile = c.at("quality_quantile").get<double>();
        cfg.bootstrap = c.at("bootstrap").get<std::size_t>();
        cfg.history_window = c.at("history_window").get<std::size_t>();
        cfg.reward.r_max = c.at("r_max").get<double>();

        MemoryStore m(cfg);
        const Json& hist = require_member(j, "history", "memory");
        const Json& seen = require_member(j, "seen", "memory");
        for (auto cls : kAllIntentClasses) {
            const std::string key(to_string(cls));
            const auto values = hist.at(key).get<std::vector<double>>();
            m.history_[class_index(cls)] = std::deque<double>(values.begin(), values.end());
            m.seen_[class_index(cls)] = seen.at(key).get<std::uint64_t>();
        }
        m.entries_ = require_member(j, "entries", "memory").get<std::vector<Episode>>();
        if (m.entries_.size() > cfg.capacity) {
            throw PersistenceError("memory store holds more entries than its capacity");
        }
        for (const auto& e : m.entries_) {
            const double expected = compute_reward(e.report, e.weights, cfg.reward).r_total;
            if (!(std::abs(expected - e.reward) <= 1e-9 * std::max(1.0, std::abs(expected)))) {
                throw PersistenceError("memory store entry " + std::to_string(e.timestamp) +
                                       " has a reward that does not match its report");
            }
        }
        return m;
    } catch (const PersistenceError&) {
        throw;
    } catch (const std::exception& e) {
        throw PersistenceError(std::string("invalid memory store: ") + e.what());
    }
}

void MemoryStore::save(const std::filesystem::path& path) const
{
    write_text_file_atomic(path, to_json().dump());
}

MemoryStore MemoryStore::load(const std::filesystem::path& path)
{
    Json j;
    try {
        j = read_json_file(path);
    } catch (const std::exception& e) {
        throw PersistenceError(std::string("cannot load memory store: ") + e.what());
    }
    return from_json(j);
}

} // namespace linkagent
