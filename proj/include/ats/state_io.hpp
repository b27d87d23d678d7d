#pragma once

// Versioned JSON state document for a trained router.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ats/analytic_scheduler.hpp"
#include "ats/errors.hpp"
#include "ats/feature_pipeline.hpp"

namespace ats {

inline constexpr int kStateVersion = 1;
inline constexpr double kSymmetryTolerance = 1e-9;

/// Everything needed to route: featurizer settings, scheduler statistics and
/// the task id behind each label column.
struct RouterState {
    FeaturizerConfig featurizer;
    std::uint64_t expansion_seed = 0;
    std::vector<std::int64_t> task_ids;
    SchedulerState scheduler = SchedulerState::init(1, 1.0);

    Featurizer make_featurizer() const { return Featurizer::create(featurizer, expansion_seed); }

    /// Column index of a task id, or -1.
    int column_of(std::int64_t task_id) const
    {
        for (std::size_t i = 0; i < task_ids.size(); ++i)
            if (task_ids[i] == task_id)
                return static_cast<int>(i);
        return -1;
    }
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m)
{
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* name)
{
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw FormatError(std::string("state: ") + name + " must have " + std::to_string(rows) + " rows");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw FormatError(std::string("state: ") + name + " row " + std::to_string(i) + " must have " +
                              std::to_string(cols) + " entries");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number())
                throw FormatError(std::string("state: ") + name + " has a non-numeric entry");
            m(i, c) = v.get<double>();
        }
    }
    if (!m.allFinite())
        throw FormatError(std::string("state: ") + name + " has a non-finite entry");
    return m;
}

} // namespace detail

inline nlohmann::json state_to_json(const RouterState& st)
{
    const auto& s = st.scheduler;
    nlohmann::json j;
    j["version"] = kStateVersion;
    j["d_e"] = s.d_e();
    j["d_K"] = s.d_K();
    j["gamma"] = s.gamma();
    j["tasks_seen"] = s.tasks_seen();
    j["featurizer"] = st.featurizer;
    j["expansion_seed"] = st.expansion_seed;
    j["task_ids"] = st.task_ids;
    j["R"] = detail::matrix_to_json(s.R());
    j["Q"] = detail::matrix_to_json(s.Q());
    return j;
}

/// Doubles are written in shortest round-trip form, so load(save(s))
/// reproduces R and Q bit for bit.
inline void save_state(const RouterState& st, std::ostream& out)
{
    out << state_to_json(st).dump() << '\n';
    if (!out)
        throw std::runtime_error("save_state: write failed");
}

inline RouterState state_from_json(const nlohmann::json& j)
{
    try {
        if (!j.is_object())
            throw FormatError("state: document is not a JSON object");
        if (!j.contains("version") || j["version"] != kStateVersion)
            throw FormatError("state: unsupported version (expected " + std::to_string(kStateVersion) + ")");

        const auto d_e = j.at("d_e").get<Eigen::Index>();
        const auto d_K = j.at("d_K").get<Eigen::Index>();
        const auto gamma = j.at("gamma").get<double>();
        if (d_e <= 0 || d_K < 0)
            throw FormatError("state: invalid dimensions");
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw FormatError("state: gamma must be positive");

        RouterState st;
        st.featurizer = j.at("featurizer").get<FeaturizerConfig>();
        st.expansion_seed = j.at("expansion_seed").get<std::uint64_t>();
        if (st.featurizer.d_e != d_e)
            throw FormatError("state: featurizer d_e disagrees with document d_e");
        try {
            validate(st.featurizer);
        } catch (const std::invalid_argument& e) {
            throw FormatError(std::string("state: ") + e.what());
        }

        if (j.contains("task_ids")) {
            st.task_ids = j["task_ids"].get<std::vector<std::int64_t>>();
            if (static_cast<Eigen::Index>(st.task_ids.size()) != d_K)
                throw FormatError("state: task_ids length differs from d_K");
            if (std::set<std::int64_t>(st.task_ids.begin(), st.task_ids.end()).size() != st.task_ids.size())
                throw FormatError("state: duplicate task id");
        } else {
            st.task_ids.resize(static_cast<std::size_t>(d_K));
            std::iota(st.task_ids.begin(), st.task_ids.end(), std::int64_t{0});
        }

        Matrix R = detail::matrix_from_json(j.at("R"), d_e, d_e, "R");
        Matrix Q = detail::matrix_from_json(j.at("Q"), d_e, d_K, "Q");
        const double asym = (R - R.transpose()).cwiseAbs().maxCoeff();
        if (asym > kSymmetryTolerance)
            throw FormatError("state: R is not symmetric (max asymmetry " + std::to_string(asym) + ")");
        if (Eigen::LLT<Matrix>(R).info() != Eigen::Success)
            throw FormatError("state: R is not positive definite");

        st.scheduler = SchedulerState::from_statistics(std::move(R), std::move(Q), gamma,
                                                       j.at("tasks_seen").get<std::uint64_t>());
        return st;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("state: ") + e.what());
    }
}

inline RouterState load_state(std::istream& in)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("state: corrupted or truncated document: ") + e.what());
    }
    return state_from_json(j);
}

inline void save_state_file(const RouterState& st, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    save_state(st, out);
}

inline RouterState load_state_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open state file " + path.string());
    return load_state(in);
}

} // namespace ats
