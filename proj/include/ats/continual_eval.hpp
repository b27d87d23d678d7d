#pragma once

// Phase-by-phase continual learning protocol and its metrics.
//
// A plan trains the scheduler jointly on a set of base classes, then adds one
// class per incremental phase using only that class's training rows. After
// every phase it reports accuracy on the cumulative test set of the classes
// seen so far and accuracy on the first class's test rows, from which the
// forgetting rate F_k = acc_1(base) - acc_1(phase k) follows.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ats/analytic_scheduler.hpp"
#include "ats/corpus.hpp"
#include "ats/feature_pipeline.hpp"

namespace ats {

struct PhasePlan {
    std::vector<std::int64_t> base_classes;
    std::vector<std::int64_t> incremental_classes;
    // When set, the corpus is re-split per class with this fraction and seed;
    // otherwise the corpus's own split labels are used.
    std::optional<double> train_fraction;
    std::uint64_t seed = 0;

    std::vector<std::int64_t> class_order() const
    {
        auto order = base_classes;
        order.insert(order.end(), incremental_classes.begin(), incremental_classes.end());
        return order;
    }

    std::size_t phase_count() const { return 1 + incremental_classes.size(); }
};

/// First `n_base` sorted classes form the base phase, the rest arrive one by one.
inline PhasePlan default_plan(const Corpus& corpus, std::size_t n_base)
{
    const auto classes = corpus_classes(corpus);
    if (classes.size() < 2)
        throw std::invalid_argument("default_plan: corpus needs at least two classes");
    n_base = std::clamp<std::size_t>(n_base, 1, classes.size());
    PhasePlan plan;
    plan.base_classes.assign(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(n_base));
    plan.incremental_classes.assign(classes.begin() + static_cast<std::ptrdiff_t>(n_base), classes.end());
    return plan;
}

inline void from_json(const nlohmann::json& j, PhasePlan& p)
{
    if (!j.is_object())
        throw FormatError("plan: expected a JSON object");
    auto field = [&](const char* name) -> const nlohmann::json& {
        if (!j.contains(name))
            throw FormatError(std::string("plan: missing field \"") + name + "\"");
        return j[name];
    };
    auto ids = [&](const char* name) {
        const auto& v = field(name);
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_number_integer(); }))
            throw FormatError(std::string("plan: field \"") + name + "\" must be an array of integers");
        return v.get<std::vector<std::int64_t>>();
    };
    p.base_classes = ids("base_classes");
    p.incremental_classes = ids("incremental_classes");
    if (j.contains("train_fraction")) {
        if (!j["train_fraction"].is_number())
            throw FormatError("plan: field \"train_fraction\" must be a number");
        p.train_fraction = j["train_fraction"].get<double>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned())
            throw FormatError("plan: field \"seed\" must be a non-negative integer");
        p.seed = j["seed"].get<std::uint64_t>();
    }
}

/// Checks disjointness and coverage of the corpus classes.
inline void validate_plan(const PhasePlan& plan, const Corpus& corpus)
{
    if (plan.base_classes.empty())
        throw std::invalid_argument("plan: base phase needs at least one class");
    if (plan.train_fraction && !(*plan.train_fraction > 0.0 && *plan.train_fraction < 1.0))
        throw std::invalid_argument("plan: train_fraction must lie in (0, 1)");
    const auto order = plan.class_order();
    const std::set<std::int64_t> planned(order.begin(), order.end());
    if (planned.size() != order.size())
        throw std::invalid_argument("plan: base and incremental classes must be disjoint and unique");
    const auto present = corpus_classes(corpus);
    const std::set<std::int64_t> in_corpus(present.begin(), present.end());
    if (planned != in_corpus)
        throw std::invalid_argument("plan: classes do not match the corpus classes");
}

struct EvalReport {
    std::string method;
    std::vector<std::int64_t> class_order;
    std::vector<std::string> phase_names;
    std::vector<double> per_phase_accuracy;   // percent, cumulative test set
    std::vector<double> task1_accuracy;       // percent, first class's test rows
    std::vector<double> per_phase_forgetting; // task1_accuracy[0] - task1_accuracy[k]
    double average_accuracy = 0.0;
    // confusion[k](true column, predicted column) over class_order
    std::vector<std::vector<std::vector<std::int64_t>>> confusion;
    std::vector<std::int64_t> task1_correct;
};

inline double average_accuracy(const std::vector<double>& per_phase)
{
    if (per_phase.empty())
        throw std::invalid_argument("average_accuracy: no phases");
    for (double a : per_phase)
        if (!(a >= 0.0 && a <= 100.0))
            throw std::invalid_argument("average_accuracy: accuracy outside [0, 100]");
    return std::accumulate(per_phase.begin(), per_phase.end(), 0.0) / static_cast<double>(per_phase.size());
}

inline double forgetting_rate(double acc_task1_initial, double acc_task1_now)
{
    if (!(acc_task1_initial >= 0.0 && acc_task1_initial <= 100.0) || !(acc_task1_now >= 0.0 && acc_task1_now <= 100.0))
        throw std::invalid_argument("forgetting_rate: accuracy outside [0, 100]");
    return acc_task1_initial - acc_task1_now;
}

/// Corpus featurized once, with per-row class column and split.
struct PreparedCorpus {
    Matrix features;
    std::vector<int> column; // index into class_order
    std::vector<Split> split;
    std::vector<std::int64_t> class_order;
};

inline PreparedCorpus prepare_corpus(Corpus corpus, const PhasePlan& plan, const Featurizer& featurizer)
{
    validate_plan(plan, corpus);
    if (plan.train_fraction)
        assign_splits(corpus, *plan.train_fraction, plan.seed);

    PreparedCorpus pc;
    pc.class_order = plan.class_order();
    std::vector<std::string> texts;
    texts.reserve(corpus.size());
    for (const auto& row : corpus) {
        texts.push_back(row.text);
        const auto it = std::find(pc.class_order.begin(), pc.class_order.end(), row.task_id);
        pc.column.push_back(static_cast<int>(it - pc.class_order.begin()));
        pc.split.push_back(row.split);
    }
    pc.features = featurize_batch(texts, featurizer);
    return pc;
}

namespace detail {

inline std::string phase_name(std::size_t k) { return k == 0 ? "Base training" : "IL Phase " + std::to_string(k); }

// Rows of the given split whose column lies in [lo, hi).
inline std::vector<Eigen::Index> rows_where(const PreparedCorpus& pc, Split s, int lo, int hi)
{
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < pc.column.size(); ++i)
        if (pc.split[i] == s && pc.column[i] >= lo && pc.column[i] < hi)
            out.push_back(static_cast<Eigen::Index>(i));
    return out;
}

template <class Predict>
void record_phase(EvalReport& rep, const PreparedCorpus& pc, int seen, Predict&& predict)
{
    const auto k = rep.per_phase_accuracy.size();
    const auto n_all = static_cast<int>(pc.class_order.size());
    const auto test = rows_where(pc, Split::test, 0, seen);
    if (test.empty())
        throw std::invalid_argument("protocol: no test rows for the classes seen by " + phase_name(k));
    const auto task1 = rows_where(pc, Split::test, 0, 1);
    if (task1.empty())
        throw std::invalid_argument("protocol: first class has no test rows");

    Matrix x(static_cast<Eigen::Index>(test.size()), pc.features.cols());
    for (std::size_t i = 0; i < test.size(); ++i)
        x.row(static_cast<Eigen::Index>(i)) = pc.features.row(test[i]);
    const std::vector<int> pred = predict(x);

    std::vector<std::vector<std::int64_t>> conf(static_cast<std::size_t>(n_all),
                                                std::vector<std::int64_t>(static_cast<std::size_t>(n_all), 0));
    std::int64_t correct = 0;
    std::int64_t correct1 = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const int truth = pc.column[static_cast<std::size_t>(test[i])];
        ++conf[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred[i])];
        if (pred[i] == truth) {
            ++correct;
            if (truth == 0)
                ++correct1;
        }
    }
    rep.phase_names.push_back(phase_name(k));
    rep.per_phase_accuracy.push_back(100.0 * static_cast<double>(correct) / static_cast<double>(test.size()));
    rep.task1_accuracy.push_back(100.0 * static_cast<double>(correct1) / static_cast<double>(task1.size()));
    rep.task1_correct.push_back(correct1);
    rep.per_phase_forgetting.push_back(forgetting_rate(rep.task1_accuracy.front(), rep.task1_accuracy.back()));
    rep.confusion.push_back(std::move(conf));
}

inline std::vector<int> column_labels(const PreparedCorpus& pc, const std::vector<Eigen::Index>& rows)
{
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows)
        out.push_back(pc.column[static_cast<std::size_t>(r)]);
    return out;
}

} // namespace detail

struct SchedulerConfig {
    double gamma = 1.0;
    Eigen::Index chunk_rows = kDefaultChunkRows;
};

struct ProtocolRun {
    EvalReport report;
    SchedulerState scheduler = SchedulerState::init(1, 1.0);
    std::vector<std::uint32_t> training_row_reads; // indexed like the prepared corpus
    bool rows_read_once = false;
};

/// Scheduler path: fit_base on the base classes, then one update per
/// incremental class. Each training row is gathered exactly once.
inline ProtocolRun run_protocol(const PreparedCorpus& pc, const PhasePlan& plan, const SchedulerConfig& cfg = {})
{
    ProtocolRun run;
    run.report.method = "analytic_scheduler";
    run.report.class_order = pc.class_order;
    run.training_row_reads.assign(pc.column.size(), 0);

    auto gather = [&](const std::vector<Eigen::Index>& rows) {
        Matrix x(static_cast<Eigen::Index>(rows.size()), pc.features.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = pc.features.row(rows[i]);
            ++run.training_row_reads[static_cast<std::size_t>(rows[i])];
        }
        return x;
    };
    auto predict = [&](const Matrix& x) { return run.scheduler.predict_batch(x); };

    const int n_base = static_cast<int>(plan.base_classes.size());
    const auto base_rows = detail::rows_where(pc, Split::train, 0, n_base);
    if (base_rows.empty())
        throw std::invalid_argument("protocol: base classes have no training rows");
    const auto base_labels = detail::column_labels(pc, base_rows);
    run.scheduler = SchedulerState::fit_base(gather(base_rows), TaskLabelMatrix::one_hot(base_labels, n_base), cfg.gamma);
    detail::record_phase(run.report, pc, n_base, predict);

    for (std::size_t k = 0; k < plan.incremental_classes.size(); ++k) {
        const int col = n_base + static_cast<int>(k);
        const auto rows = detail::rows_where(pc, Split::train, col, col + 1);
        if (rows.empty())
            throw std::invalid_argument("protocol: class " + std::to_string(plan.incremental_classes[k]) +
                                        " has no training rows");
        run.scheduler.expand_label_space(col + 1);
        run.scheduler.update(gather(rows), TaskLabelMatrix::one_hot(detail::column_labels(pc, rows), col + 1),
                             cfg.chunk_rows);
        detail::record_phase(run.report, pc, col + 1, predict);
    }

    run.report.average_accuracy = average_accuracy(run.report.per_phase_accuracy);
    run.rows_read_once = true;
    for (std::size_t i = 0; i < pc.column.size(); ++i) {
        const std::uint32_t expected = pc.split[i] == Split::train ? 1 : 0;
        if (run.training_row_reads[i] != expected)
            run.rows_read_once = false;
    }
    return run;
}

struct BaselineConfig {
    int steps = 200;
    double learning_rate = 0.1;
};

/// Softmax regression trained by full-batch gradient descent on each phase's
/// rows only. No replay and nothing anchoring the old weights.
inline EvalReport baseline_sequential(const PreparedCorpus& pc, const PhasePlan& plan, const BaselineConfig& cfg = {})
{
    if (cfg.steps < 0 || !(cfg.learning_rate >= 0.0))
        throw std::invalid_argument("baseline: steps and learning rate must be non-negative");
    EvalReport rep;
    rep.method = "sequential_gradient_baseline";
    rep.class_order = pc.class_order;

    Matrix w = Matrix::Zero(pc.features.cols(), 0);
    auto predict = [&](const Matrix& x) {
        const Matrix z = x * w;
        std::vector<int> out(static_cast<std::size_t>(z.rows()));
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            out[static_cast<std::size_t>(i)] = SchedulerState::argmax(z.row(i));
        return out;
    };
    auto train = [&](int lo, int hi) {
        const auto rows = detail::rows_where(pc, Split::train, lo, hi);
        if (rows.empty())
            throw std::invalid_argument("baseline: phase has no training rows");
        Matrix x(static_cast<Eigen::Index>(rows.size()), pc.features.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            x.row(static_cast<Eigen::Index>(i)) = pc.features.row(rows[i]);
        const Matrix y = TaskLabelMatrix::one_hot(detail::column_labels(pc, rows), hi).rows;
        const double inv_n = 1.0 / static_cast<double>(rows.size());

        const Eigen::Index old = w.cols();
        w.conservativeResize(Eigen::NoChange, hi);
        w.rightCols(hi - old).setZero();
        for (int step = 0; step < cfg.steps; ++step) {
            Matrix p = x * w;
            for (Eigen::Index i = 0; i < p.rows(); ++i)
                p.row(i) = SchedulerState::softmax(p.row(i));
            w.noalias() -= (cfg.learning_rate * inv_n) * (x.transpose() * (p - y));
        }
    };

    const int n_base = static_cast<int>(plan.base_classes.size());
    train(0, n_base);
    detail::record_phase(rep, pc, n_base, predict);
    for (std::size_t k = 0; k < plan.incremental_classes.size(); ++k) {
        const int col = n_base + static_cast<int>(k);
        train(col, col + 1);
        detail::record_phase(rep, pc, col + 1, predict);
    }
    rep.average_accuracy = average_accuracy(rep.per_phase_accuracy);
    return rep;
}

inline nlohmann::json report_to_json(const EvalReport& rep)
{
    auto phases = nlohmann::json::array();
    for (std::size_t k = 0; k < rep.per_phase_accuracy.size(); ++k)
        phases.push_back({{"phase", rep.phase_names[k]},
                          {"accuracy", rep.per_phase_accuracy[k]},
                          {"task1_accuracy", rep.task1_accuracy[k]},
                          {"forgetting", rep.per_phase_forgetting[k]}});
    return nlohmann::json{{"method", rep.method},
                          {"class_order", rep.class_order},
                          {"phases", phases},
                          {"average_accuracy", rep.average_accuracy},
                          {"forgetting", rep.per_phase_forgetting},
                          {"confusion", rep.confusion}};
}

/// Aligned table: phase, cumulative accuracy, forgetting rate.
inline std::string report_table(const EvalReport& rep)
{
    std::ostringstream os;
    os << rep.method << '\n';
    os << std::left << std::setw(16) << "" << std::right << std::setw(14) << "Accuracy (%)" << std::setw(24)
       << "Forgetting Rate (%)" << '\n';
    os << std::fixed << std::setprecision(2);
    for (std::size_t k = 0; k < rep.per_phase_accuracy.size(); ++k)
        os << std::left << std::setw(16) << rep.phase_names[k] << std::right << std::setw(14)
           << rep.per_phase_accuracy[k] << std::setw(24) << rep.per_phase_forgetting[k] << '\n';
    os << std::left << std::setw(16) << "Average" << std::right << std::setw(14) << rep.average_accuracy << '\n';
    return os.str();
}

} // namespace ats
