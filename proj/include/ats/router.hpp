#pragma once

// Instruction routing: featurize -> scheduler probabilities -> argmax -> executor.
// Also the newline-delimited JSON request handler used by serve mode.

#include <chrono>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ats/model_library.hpp"
#include "ats/state_io.hpp"

namespace ats {

struct RouteResult {
    std::int64_t task_id = 0;
    int column = 0;
    RowVector probabilities;
    std::optional<std::string> executor_name;
    std::optional<ActionChunk> action_chunk;
    std::uint64_t latency_micros = 0;

    bool missing_executor() const { return !executor_name.has_value(); }
};

/// A loaded state and registry, treated as an immutable snapshot.
class Router {
public:
    Router(RouterState state, ExecutorRegistry registry)
        : state_(std::move(state)), registry_(std::move(registry)), featurizer_(state_.make_featurizer())
    {
        if (state_.scheduler.d_e() != featurizer_.config.d_e)
            throw FormatError("router: scheduler d_e differs from featurizer d_e");
    }

    RouteResult route(std::string_view text, const Observation& obs = {}) const
    {
        const auto start = std::chrono::steady_clock::now();
        RouteResult r;
        r.probabilities = state_.scheduler.predict_proba(featurizer_(text));
        r.column = SchedulerState::argmax(r.probabilities);
        r.task_id = state_.task_ids.at(static_cast<std::size_t>(r.column));
        if (const auto* spec = registry_.find(r.task_id)) {
            r.executor_name = spec->name;
            Observation o = obs;
            o.instruction = std::string(text);
            r.action_chunk = execute(*spec, o);
        }
        r.latency_micros = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start).count());
        return r;
    }

    const RouterState& state() const { return state_; }
    const ExecutorRegistry& registry() const { return registry_; }

private:
    RouterState state_;
    ExecutorRegistry registry_;
    Featurizer featurizer_;
};

inline nlohmann::json route_result_to_json(const RouteResult& r)
{
    nlohmann::json j;
    j["task_id"] = r.task_id;
    j["probabilities"] = std::vector<double>(r.probabilities.begin(), r.probabilities.end());
    j["missing_executor"] = r.missing_executor();
    j["executor_name"] = r.executor_name ? nlohmann::json(*r.executor_name) : nlohmann::json(nullptr);
    if (r.action_chunk) {
        auto rows = nlohmann::json::array();
        const auto& a = r.action_chunk->actions;
        for (Eigen::Index t = 0; t < a.rows(); ++t)
            rows.push_back(std::vector<double>(a.row(t).begin(), a.row(t).end()));
        j["action_chunk"] = std::move(rows);
    } else {
        j["action_chunk"] = nullptr;
    }
    j["latency_micros"] = r.latency_micros;
    return j;
}

/// Handles one request line; never throws.
inline std::string handle_request(const Router& router, std::string_view line)
{
    try {
        const auto req = nlohmann::json::parse(line);
        if (!req.is_object() || !req.contains("op") || !req["op"].is_string())
            return nlohmann::json{{"error", "request must be an object with a string \"op\""}}.dump();
        const auto op = req["op"].get<std::string>();
        if (op == "route") {
            if (!req.contains("text") || !req["text"].is_string())
                return nlohmann::json{{"error", "route request needs a string \"text\""}}.dump();
            Observation obs;
            if (req.contains("proprioception")) {
                const auto p = req["proprioception"].get<std::vector<double>>();
                obs.proprioception = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
            }
            return route_result_to_json(router.route(req["text"].get<std::string>(), obs)).dump();
        }
        if (op == "stats") {
            const auto& s = router.state().scheduler;
            return nlohmann::json{{"d_K", s.d_K()}, {"tasks_seen", s.tasks_seen()}, {"gamma", s.gamma()}}.dump();
        }
        return nlohmann::json{{"error", "unknown op \"" + op + "\""}}.dump();
    } catch (const std::exception& e) {
        return nlohmann::json{{"error", e.what()}}.dump();
    }
}

/// One response line per request line, in order, until end of input.
inline void serve_stream(const Router& router, std::istream& in, std::ostream& out)
{
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        out << handle_request(router, line) << '\n';
        out.flush();
    }
}

} // namespace ats
