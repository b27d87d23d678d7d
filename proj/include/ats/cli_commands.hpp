#pragma once

// File-level commands behind the ats_router tool. Each throws on failure;
// the tool turns exceptions into a one-line diagnostic and a nonzero exit.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ats/continual_eval.hpp"
#include "ats/corpus.hpp"
#include "ats/router.hpp"
#include "ats/state_io.hpp"

namespace ats::cli {

namespace fs = std::filesystem;

inline void refuse_overwrite(const fs::path& path, bool force)
{
    if (!force && fs::exists(path))
        throw std::runtime_error(path.string() + " already exists (pass --force to overwrite)");
}

struct GenCorpusOptions {
    fs::path out;
    int n_classes = 10;
    int per_class = 102;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    bool force = false;
};

inline Corpus cmd_gen_corpus(const GenCorpusOptions& o)
{
    refuse_overwrite(o.out, o.force);
    auto corpus = generate_synthetic_corpus(o.n_classes, o.per_class, o.seed, o.train_fraction);
    std::ofstream out(o.out, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open " + o.out.string() + " for writing");
    write_corpus(corpus, out);
    return corpus;
}

struct ModelOptions {
    double gamma = 1.0;
    int d_e = 1024;
    int d_f = 64;
    std::uint64_t seed = 0;

    FeaturizerConfig featurizer() const
    {
        FeaturizerConfig cfg;
        cfg.seed = seed;
        cfg.d_e = d_e;
        cfg.d_f = d_f;
        return cfg;
    }
};

/// Feature rows and label columns for the training rows of the listed classes.
struct TrainingBatch {
    Matrix features;
    std::vector<int> columns;
};

inline TrainingBatch training_batch(const Corpus& corpus, const std::vector<std::int64_t>& classes,
                                    const Featurizer& featurizer)
{
    std::vector<std::string> texts;
    TrainingBatch b;
    for (const auto& row : corpus) {
        if (row.split != Split::train)
            continue;
        const auto it = std::find(classes.begin(), classes.end(), row.task_id);
        if (it == classes.end())
            continue;
        texts.push_back(row.text);
        b.columns.push_back(static_cast<int>(it - classes.begin()));
    }
    if (texts.empty())
        throw std::invalid_argument("no training rows for the requested classes");
    b.features = featurize_batch(texts, featurizer);
    return b;
}

inline void require_classes_present(const Corpus& corpus, const std::vector<std::int64_t>& classes)
{
    for (auto c : classes) {
        const bool found = std::any_of(corpus.begin(), corpus.end(),
                                       [&](const auto& r) { return r.task_id == c && r.split == Split::train; });
        if (!found)
            throw std::invalid_argument("class " + std::to_string(c) + " has no training rows in the corpus");
    }
}

struct TrainBaseOptions {
    fs::path corpus;
    std::vector<std::int64_t> classes; // empty: every class in the corpus
    fs::path state_out;
    ModelOptions model;
};

inline RouterState cmd_train_base(const TrainBaseOptions& o)
{
    const auto corpus = read_corpus_file(o.corpus);
    auto classes = o.classes.empty() ? corpus_classes(corpus) : o.classes;
    if (std::set<std::int64_t>(classes.begin(), classes.end()).size() != classes.size())
        throw std::invalid_argument("duplicate class in --classes");
    require_classes_present(corpus, classes);

    RouterState st;
    st.featurizer = o.model.featurizer();
    st.expansion_seed = o.model.seed;
    st.task_ids = classes;
    const auto featurizer = st.make_featurizer();
    const auto batch = training_batch(corpus, classes, featurizer);
    st.scheduler = SchedulerState::fit_base(
        batch.features, TaskLabelMatrix::one_hot(batch.columns, static_cast<int>(classes.size())), o.model.gamma);
    save_state_file(st, o.state_out);
    return st;
}

struct UpdateOptions {
    fs::path state_in;
    fs::path corpus;
    std::int64_t new_class = 0;
    fs::path state_out;
};

inline RouterState cmd_update(const UpdateOptions& o)
{
    if (fs::exists(o.state_out) && fs::exists(o.state_in) && fs::equivalent(o.state_in, o.state_out))
        throw std::invalid_argument("--state-out must differ from --state; input state files are never modified");
    auto st = load_state_file(o.state_in);
    if (st.column_of(o.new_class) >= 0)
        throw std::invalid_argument("class " + std::to_string(o.new_class) + " is already known to the scheduler");
    const auto corpus = read_corpus_file(o.corpus);
    require_classes_present(corpus, {o.new_class});

    const auto featurizer = st.make_featurizer();
    const auto batch = training_batch(corpus, {o.new_class}, featurizer);
    const int col = static_cast<int>(st.scheduler.d_K());
    std::vector<int> columns(batch.columns.size(), col);
    st.scheduler.expand_label_space(col + 1);
    st.scheduler.update(batch.features, TaskLabelMatrix::one_hot(columns, col + 1));
    st.task_ids.push_back(o.new_class);
    save_state_file(st, o.state_out);
    return st;
}

struct RouteOptions {
    fs::path state;
    std::optional<fs::path> registry;
    std::string text;
    std::vector<double> proprioception;
};

inline RouteResult cmd_route(const RouteOptions& o)
{
    ExecutorRegistry reg;
    if (o.registry)
        reg = load_registry_file(*o.registry);
    const Router router(load_state_file(o.state), std::move(reg));
    Observation obs;
    obs.proprioception =
        Eigen::Map<const Vector>(o.proprioception.data(), static_cast<Eigen::Index>(o.proprioception.size()));
    return router.route(o.text, obs);
}

struct EvalOptions {
    fs::path corpus;
    std::optional<fs::path> plan;
    fs::path report_out;
    ModelOptions model;
    bool baseline = false;
    BaselineConfig baseline_cfg;
};

inline PhasePlan load_plan_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open plan " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("plan " + path.string() + ": " + e.what());
    }
    return j.get<PhasePlan>();
}

struct EvalOutcome {
    EvalReport scheduler;
    std::optional<EvalReport> baseline;
    nlohmann::json document;
    std::string table;
};

/// Writes the JSON report to report_out and the text table next to it (.txt).
inline EvalOutcome cmd_eval(const EvalOptions& o)
{
    const auto corpus = read_corpus_file(o.corpus);
    const auto plan = o.plan ? load_plan_file(*o.plan) : default_plan(corpus, 5);
    const auto featurizer = Featurizer::create(o.model.featurizer(), o.model.seed);
    const auto prepared = prepare_corpus(corpus, plan, featurizer);

    EvalOutcome out;
    auto run = run_protocol(prepared, plan, SchedulerConfig{o.model.gamma});
    out.scheduler = std::move(run.report);
    out.document = report_to_json(out.scheduler);
    out.document["training_rows_read_once"] = run.rows_read_once;
    out.table = report_table(out.scheduler);
    if (o.baseline) {
        out.baseline = baseline_sequential(prepared, plan, o.baseline_cfg);
        out.document["baseline"] = report_to_json(*out.baseline);
        out.table += "\n" + report_table(*out.baseline);
    }

    {
        std::ofstream js(o.report_out, std::ios::binary | std::ios::trunc);
        if (!js)
            throw std::runtime_error("cannot open " + o.report_out.string() + " for writing");
        js << out.document.dump(2) << '\n';
    }
    auto table_path = o.report_out;
    if (table_path.extension() == ".txt")
        table_path += ".table.txt";
    else
        table_path.replace_extension(".txt");
    std::ofstream tx(table_path, std::ios::binary | std::ios::trunc);
    tx << out.table;
    return out;
}

} // namespace ats::cli
