#pragma once

// Instruction featurization: tokenize -> hashed pseudo-embeddings -> mean pool
// -> frozen random projection with ReLU.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ats/errors.hpp"

namespace ats {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr std::string_view kEmptySentinel = "<empty>";

struct FeaturizerConfig {
    std::uint64_t seed = 0;
    int d_f = 64;
    int d_e = 1024;
    std::uint64_t vocab_buckets = std::uint64_t{1} << 16;
    bool lowercase = true;

    bool operator==(const FeaturizerConfig&) const = default;
};

inline void validate(const FeaturizerConfig& cfg)
{
    if (cfg.d_f <= 0)
        throw std::invalid_argument("featurizer: d_f must be positive");
    if (cfg.d_e <= cfg.d_f)
        throw std::invalid_argument("featurizer: d_e must exceed d_f");
    if (cfg.vocab_buckets == 0)
        throw std::invalid_argument("featurizer: vocab_buckets must be positive");
}

inline void to_json(nlohmann::json& j, const FeaturizerConfig& c)
{
    j = nlohmann::json{{"seed", c.seed},
                       {"d_f", c.d_f},
                       {"d_e", c.d_e},
                       {"vocab_buckets", c.vocab_buckets},
                       {"lowercase", c.lowercase}};
}

inline void from_json(const nlohmann::json& j, FeaturizerConfig& c)
{
    j.at("seed").get_to(c.seed);
    j.at("d_f").get_to(c.d_f);
    j.at("d_e").get_to(c.d_e);
    j.at("vocab_buckets").get_to(c.vocab_buckets);
    j.at("lowercase").get_to(c.lowercase);
}

/// One row per token, width d_f.
struct SequenceFeatures {
    Matrix rows;

    Eigen::Index token_count() const { return rows.rows(); }
};

/// Frozen d_f x d_e projection. Entries are N(0, 1/d_f), no bias.
struct ExpansionParams {
    Matrix projection;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a with the seed folded into the offset basis.
inline std::uint64_t hash_token(std::string_view token, std::uint64_t seed)
{
    std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
    for (unsigned char c : token) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline bool is_token_char(unsigned char c)
{
    // bytes >= 0x80 belong to UTF-8 sequences and are kept intact
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

inline void require_finite(const Matrix& m, const char* what)
{
    if (!m.allFinite())
        throw NumericalError(std::string(what) + ": non-finite entry");
}

} // namespace detail

inline std::vector<std::string> tokenize(std::string_view text, const FeaturizerConfig& cfg)
{
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (detail::is_token_char(c)) {
            if (cfg.lowercase && c >= 'A' && c <= 'Z')
                cur.push_back(static_cast<char>(c - 'A' + 'a'));
            else
                cur.push_back(ch);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty())
        tokens.push_back(std::move(cur));
    if (tokens.empty())
        tokens.emplace_back(kEmptySentinel);
    return tokens;
}

inline std::uint64_t token_bucket(std::string_view token, const FeaturizerConfig& cfg)
{
    return detail::hash_token(token, cfg.seed) % cfg.vocab_buckets;
}

/// Deterministic d_f-vector for a hash bucket, entries N(0, 1/d_f).
inline RowVector bucket_embedding(std::uint64_t bucket, const FeaturizerConfig& cfg)
{
    std::mt19937_64 rng(detail::splitmix64(cfg.seed ^ detail::splitmix64(bucket + 1)));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.d_f)));
    RowVector row(cfg.d_f);
    for (int j = 0; j < cfg.d_f; ++j)
        row[j] = normal(rng);
    return row;
}

inline SequenceFeatures embed_sequence(std::span<const std::string> tokens, const FeaturizerConfig& cfg)
{
    if (tokens.empty())
        throw std::invalid_argument("embed_sequence: empty token sequence");
    SequenceFeatures seq;
    seq.rows.resize(static_cast<Eigen::Index>(tokens.size()), cfg.d_f);
    for (std::size_t i = 0; i < tokens.size(); ++i)
        seq.rows.row(static_cast<Eigen::Index>(i)) = bucket_embedding(token_bucket(tokens[i], cfg), cfg);
    return seq;
}

inline RowVector mean_pool(const SequenceFeatures& seq)
{
    if (seq.rows.rows() < 1)
        throw std::invalid_argument("mean_pool: sequence has no rows");
    return seq.rows.colwise().mean();
}

inline ExpansionParams make_expansion(std::uint64_t seed, int d_f, int d_e)
{
    if (d_f <= 0 || d_e <= 0)
        throw std::invalid_argument("make_expansion: dimensions must be positive");
    ExpansionParams p;
    p.seed = seed;
    p.projection.resize(d_f, d_e);
    std::mt19937_64 rng(detail::splitmix64(seed ^ 0x5eedf00dULL));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_f)));
    // row-major fill order pins the sequence independent of storage order
    for (int i = 0; i < d_f; ++i)
        for (int j = 0; j < d_e; ++j)
            p.projection(i, j) = normal(rng);
    return p;
}

inline RowVector expand(const RowVector& pooled, const ExpansionParams& params)
{
    if (pooled.size() != params.projection.rows())
        throw DimensionError("expand: pooled width " + std::to_string(pooled.size()) + " != d_f " +
                             std::to_string(params.projection.rows()));
    return (pooled * params.projection).cwiseMax(0.0);
}

/// Config plus its frozen expansion layer.
struct Featurizer {
    FeaturizerConfig config;
    ExpansionParams expansion;

    static Featurizer create(const FeaturizerConfig& cfg, std::uint64_t expansion_seed)
    {
        validate(cfg);
        return Featurizer{cfg, make_expansion(expansion_seed, cfg.d_f, cfg.d_e)};
    }

    std::uint64_t expansion_seed() const { return expansion.seed; }

    RowVector operator()(std::string_view text) const
    {
        const auto tokens = tokenize(text, config);
        return expand(mean_pool(embed_sequence(tokens, config)), expansion);
    }
};

inline Matrix featurize_batch(std::span<const std::string> texts, const FeaturizerConfig& cfg,
                              const ExpansionParams& params)
{
    if (texts.empty())
        throw std::invalid_argument("featurize_batch: no texts");
    Matrix out(static_cast<Eigen::Index>(texts.size()), params.projection.cols());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto tokens = tokenize(texts[i], cfg);
        out.row(static_cast<Eigen::Index>(i)) = expand(mean_pool(embed_sequence(tokens, cfg)), params);
    }
    return out;
}

inline Matrix featurize_batch(std::span<const std::string> texts, const Featurizer& f)
{
    return featurize_batch(texts, f.config, f.expansion);
}

/// Externally computed encoder output for one instruction.
struct EmbeddingRecord {
    SequenceFeatures features;
    std::int64_t task_id = 0;
};

/// Reads newline-delimited {"features": [[...],...], "task_id": int} records.
/// Blank lines are skipped; errors name the zero-based record index.
inline std::vector<EmbeddingRecord> ingest_external_embeddings(std::istream& in)
{
    std::vector<EmbeddingRecord> out;
    std::string line;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const std::string where = "embedding record " + std::to_string(index);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": " + e.what());
        }
        if (!j.is_object())
            throw FormatError(where + ": not a JSON object");
        if (!j.contains("task_id") || !j["task_id"].is_number_integer())
            throw FormatError(where + ": missing integer task_id");
        if (!j.contains("features") || !j["features"].is_array() || j["features"].empty())
            throw FormatError(where + ": empty or missing features");

        const auto& rows = j["features"];
        std::size_t width = 0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (!rows[r].is_array() || rows[r].empty())
                throw FormatError(where + ": feature row " + std::to_string(r) + " is not a non-empty array");
            if (r == 0)
                width = rows[r].size();
            else if (rows[r].size() != width)
                throw FormatError(where + ": ragged feature rows");
        }

        EmbeddingRecord rec;
        rec.task_id = j["task_id"].get<std::int64_t>();
        rec.features.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < width; ++c) {
                const auto& v = rows[r][c];
                if (!v.is_number())
                    throw FormatError(where + ": non-numeric feature value");
                const double x = v.get<double>();
                if (!std::isfinite(x))
                    throw FormatError(where + ": non-finite feature value");
                rec.features.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x;
            }
        }
        out.push_back(std::move(rec));
        ++index;
    }
    return out;
}

} // namespace ats
