#pragma once

// Registry of per-task executors. Executors are deterministic stub policies
// standing in for independently fine-tuned action models.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ats/errors.hpp"
#include "ats/feature_pipeline.hpp"

namespace ats {

struct ExecutorSpec {
    std::int64_t task_id = 0;
    std::string name;
    int action_dim = 7;
    int horizon = 8;
    std::uint64_t seed = 0;
    double amplitude = 1.0;

    bool operator==(const ExecutorSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const ExecutorSpec& s)
{
    j = nlohmann::json{{"task_id", s.task_id}, {"name", s.name},         {"action_dim", s.action_dim},
                       {"horizon", s.horizon}, {"seed", s.seed},         {"amplitude", s.amplitude}};
}

inline void from_json(const nlohmann::json& j, ExecutorSpec& s)
{
    j.at("task_id").get_to(s.task_id);
    j.at("name").get_to(s.name);
    j.at("action_dim").get_to(s.action_dim);
    j.at("horizon").get_to(s.horizon);
    j.at("seed").get_to(s.seed);
    j.at("amplitude").get_to(s.amplitude);
}

struct Observation {
    Vector proprioception;
    std::string image_digest; // opaque, never interpreted
    std::string instruction;
};

/// horizon x action_dim trajectory.
struct ActionChunk {
    Matrix actions;
};

class ExecutorRegistry {
public:
    /// Throws on duplicate task ids or non-positive shapes.
    void add(ExecutorSpec spec)
    {
        if (spec.horizon <= 0 || spec.action_dim <= 0)
            throw std::invalid_argument("executor " + std::to_string(spec.task_id) +
                                        ": horizon and action_dim must be positive");
        if (!std::isfinite(spec.amplitude))
            throw std::invalid_argument("executor " + std::to_string(spec.task_id) + ": non-finite amplitude");
        if (index_.contains(spec.task_id))
            throw std::invalid_argument("duplicate executor for task " + std::to_string(spec.task_id));
        index_.emplace(spec.task_id, specs_.size());
        specs_.push_back(std::move(spec));
    }

    /// nullptr when no executor is registered for the task.
    const ExecutorSpec* find(std::int64_t task_id) const
    {
        const auto it = index_.find(task_id);
        return it == index_.end() ? nullptr : &specs_[it->second];
    }

    std::optional<ExecutorSpec> lookup(std::int64_t task_id) const
    {
        if (const auto* s = find(task_id))
            return *s;
        return std::nullopt;
    }

    std::size_t size() const { return specs_.size(); }
    const std::vector<ExecutorSpec>& specs() const { return specs_; }

private:
    std::vector<ExecutorSpec> specs_;
    std::unordered_map<std::int64_t, std::size_t> index_;
};

/// Stub policy: per-joint sinusoids whose frequency and phase are drawn from
/// (seed, task_id), offset by the matching proprioceptive reading.
inline ActionChunk execute(const ExecutorSpec& spec, const Observation& obs)
{
    if (!obs.proprioception.allFinite())
        throw NumericalError("execute: non-finite proprioception");

    std::mt19937_64 rng(detail::splitmix64(spec.seed ^ detail::splitmix64(static_cast<std::uint64_t>(spec.task_id))));
    std::uniform_real_distribution<double> freq(0.5, 2.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    ActionChunk chunk;
    chunk.actions.resize(spec.horizon, spec.action_dim);
    for (int a = 0; a < spec.action_dim; ++a) {
        const double f = freq(rng);
        const double p = phase(rng);
        const double base = obs.proprioception.size() > 0 ? obs.proprioception[a % obs.proprioception.size()] : 0.0;
        for (int t = 0; t < spec.horizon; ++t) {
            const double s = static_cast<double>(t + 1) / spec.horizon;
            chunk.actions(t, a) = base + spec.amplitude * std::sin(2.0 * std::numbers::pi * f * s + p);
        }
    }
    return chunk;
}

inline nlohmann::json registry_to_json(const ExecutorRegistry& reg)
{
    return nlohmann::json(reg.specs());
}

inline ExecutorRegistry registry_from_json(const nlohmann::json& j)
{
    if (!j.is_array())
        throw FormatError("registry manifest must be a JSON array");
    ExecutorRegistry reg;
    for (std::size_t i = 0; i < j.size(); ++i) {
        try {
            reg.add(j[i].get<ExecutorSpec>());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("registry entry " + std::to_string(i) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw FormatError("registry entry " + std::to_string(i) + ": " + e.what());
        }
    }
    return reg;
}

inline ExecutorRegistry load_registry_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open registry manifest " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("registry manifest: " + std::string(e.what()));
    }
    return registry_from_json(j);
}

} // namespace ats
