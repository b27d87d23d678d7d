// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ats/cli_commands.hpp"
#include "ats/continual_eval.hpp"
#include "ats/model_library.hpp"
#include "ats/router.hpp"
#include "ats/state_io.hpp"
#include "test_helpers.hpp"

namespace fs = std::filesystem;
using ats::Matrix;
using ats::SchedulerState;
using ats::TaskLabelMatrix;

namespace {

constexpr double kWeightTolerance = 1e-8;
constexpr double kSymmetryTolerance = 1e-9;
constexpr double kOracleSeconds = 10.0;
constexpr double kProtocolSeconds = 60.0;
constexpr double kMinFinalAccuracy = 95.0;
constexpr double kMaxForgetting = 5.0;
constexpr double kMinRoutingAccuracy = 95.0;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail)
{
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << std::endl;
    if (!ok)
        ++failures;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Trial {
    int d_e = 0;
    int d_K = 0;
    std::vector<Matrix> xs;
    std::vector<TaskLabelMatrix> ys;
};

std::vector<Trial> make_trials()
{
    std::vector<Trial> trials;
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<int> batches(2, 10);
    std::uniform_int_distribution<int> rows(10, 200);
    std::uniform_int_distribution<int> classes(2, 10);
    for (int d_e : {16, 64, 256}) {
        for (int t = 0; t < 8; ++t) {
            Trial tr;
            tr.d_e = d_e;
            tr.d_K = classes(rng);
            const int nb = batches(rng);
            for (int b = 0; b < nb; ++b) {
                const int n = rows(rng);
                tr.xs.push_back(ats_test::random_features(rng, n, d_e));
                tr.ys.push_back(TaskLabelMatrix::one_hot(ats_test::random_labels(rng, n, tr.d_K), tr.d_K));
            }
            trials.push_back(std::move(tr));
        }
    }
    return trials;
}

struct RecursiveRun {
    SchedulerState state = SchedulerState::init(1, 1.0);
    double eq18_gap = 0.0;
    double max_asymmetry = 0.0;
    double min_eigenvalue = 1e300;
};

RecursiveRun run_recursive(const Trial& tr, const std::vector<int>& order, Eigen::Index chunk, bool check_spd)
{
    RecursiveRun run;
    run.state = SchedulerState::init(tr.d_e, 1.0);
    run.state.expand_label_space(tr.d_K);
    for (int b : order) {
        const auto& x = tr.xs[static_cast<std::size_t>(b)];
        const auto& y = tr.ys[static_cast<std::size_t>(b)];
        const Matrix w_old = run.state.W();
        run.state.update(x, y, chunk);
        const Matrix& r = run.state.R();
        const Matrix w18 = (Matrix::Identity(tr.d_e, tr.d_e) - r * x.transpose() * x) * w_old +
                           r * x.transpose() * y.rows;
        run.eq18_gap = std::max(run.eq18_gap, ats_test::max_abs_diff(w18, run.state.W()));
        if (check_spd) {
            run.max_asymmetry = std::max(run.max_asymmetry, (r - r.transpose()).cwiseAbs().maxCoeff());
            Eigen::SelfAdjointEigenSolver<Matrix> eig(r, Eigen::EigenvaluesOnly);
            run.min_eigenvalue = std::min(run.min_eigenvalue, eig.eigenvalues().minCoeff());
        }
    }
    return run;
}

void recursive_criteria()
{
    const auto trials = make_trials();

    const auto t0 = std::chrono::steady_clock::now();
    double oracle_gap = 0.0;
    std::vector<RecursiveRun> forward;
    for (const auto& tr : trials) {
        std::vector<int> order(tr.xs.size());
        std::iota(order.begin(), order.end(), 0);
        forward.push_back(run_recursive(tr, order, ats::kDefaultChunkRows, false));
        std::vector<ats_oracle::Dense> xd, yd;
        for (std::size_t b = 0; b < tr.xs.size(); ++b) {
            xd.push_back(ats_test::to_dense(tr.xs[b]));
            yd.push_back(ats_test::to_dense(tr.ys[b].rows));
        }
        const auto w = ats_oracle::ridge_solve(ats_oracle::vstack(xd), ats_oracle::vstack(yd), 1.0);
        oracle_gap = std::max(oracle_gap, ats_test::max_abs_diff(forward.back().state.W(), w));
    }
    const double elapsed = seconds_since(t0);
    report(oracle_gap <= kWeightTolerance && elapsed < kOracleSeconds, "oracle equivalence",
           std::to_string(trials.size()) + " trials, max |W_rec - W_batch| = " + fmt(oracle_gap) + " (<= 1e-8), " +
               fmt(elapsed) + " s (< 10 s)");

    std::mt19937_64 rng(7);
    double order_gap = 0.0;
    double chunk_gap = 0.0;
    double eq18_gap = 0.0;
    double asym = 0.0;
    double min_eig = 1e300;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& tr = trials[i];
        std::vector<int> order(tr.xs.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const bool spd = tr.d_e <= 64;
        const auto permuted = run_recursive(tr, order, ats::kDefaultChunkRows, spd);
        std::uniform_int_distribution<int> chunk(1, 37);
        const auto rechunked = run_recursive(tr, order, chunk(rng), spd);
        order_gap = std::max(order_gap, ats_test::max_abs_diff(permuted.state.W(), forward[i].state.W()));
        chunk_gap = std::max(chunk_gap, ats_test::max_abs_diff(rechunked.state.W(), forward[i].state.W()));
        eq18_gap = std::max({eq18_gap, permuted.eq18_gap, rechunked.eq18_gap});
        if (spd) {
            asym = std::max({asym, permuted.max_asymmetry, rechunked.max_asymmetry});
            min_eig = std::min({min_eig, permuted.min_eigenvalue, rechunked.min_eigenvalue});
        }
    }
    report(order_gap <= kWeightTolerance && chunk_gap <= kWeightTolerance, "order and chunk invariance",
           "max |dW| permuted = " + fmt(order_gap) + ", re-chunked = " + fmt(chunk_gap) + " (<= 1e-8)");
    report(eq18_gap <= kWeightTolerance, "closed-form weight update cross-check",
           "max |W_closed_form - R Q| = " + fmt(eq18_gap) + " (<= 1e-8)");
    report(asym <= kSymmetryTolerance && min_eig > 0.0, "SPD invariant",
           "d_e <= 64: max |R - R^T| = " + fmt(asym) + " (<= 1e-9), min eigenvalue = " + fmt(min_eig) + " (> 0)");
}

void ridge_optimality()
{
    std::mt19937_64 rng(99);
    const Matrix x = ats_test::random_features(rng, 40, 10);
    const auto y = TaskLabelMatrix::one_hot(ats_test::random_labels(rng, 40, 3), 3);
    const auto s = SchedulerState::fit_base(x, y, 1.0);
    const auto xd = ats_test::to_dense(x);
    const auto yd = ats_test::to_dense(y.rows);
    const double best = ats_oracle::ridge_objective(xd, yd, ats_test::to_dense(s.W()), 1.0);
    std::normal_distribution<double> normal;
    int decreased = 0;
    double min_increase = 1e300;
    for (int i = 0; i < 100; ++i) {
        Matrix dir(10, 3);
        for (auto& v : dir.reshaped())
            v = normal(rng);
        dir.normalize();
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        const double obj = ats_oracle::ridge_objective(xd, yd, ats_test::to_dense(s.W() + sign * 1e-3 * dir), 1.0);
        min_increase = std::min(min_increase, obj - best);
        if (obj < best)
            ++decreased;
    }
    report(decreased == 0, "ridge optimality",
           "100 perturbations of size 1e-3, " + std::to_string(decreased) +
               " reduced the objective, smallest increase " + fmt(min_increase));
}

void protocol_criteria()
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto corpus = ats::generate_synthetic_corpus(10, 102, 0);
    const auto plan = ats::default_plan(corpus, 5);
    ats::FeaturizerConfig cfg; // d_f 64, d_e 1024
    const auto featurizer = ats::Featurizer::create(cfg, 0);
    const auto prepared = ats::prepare_corpus(corpus, plan, featurizer);
    const auto run = ats::run_protocol(prepared, plan, {1.0});
    const auto baseline = ats::baseline_sequential(prepared, plan);
    const double elapsed = seconds_since(t0);

    const auto& rep = run.report;
    const double final_acc = rep.per_phase_accuracy.back();
    const double max_f = *std::max_element(rep.per_phase_forgetting.begin(), rep.per_phase_forgetting.end());
    const double base_f = baseline.per_phase_forgetting.back();
    const bool ok = rep.per_phase_accuracy.size() == 6 && final_acc >= kMinFinalAccuracy && max_f <= kMaxForgetting &&
                    base_f > rep.per_phase_forgetting.back() && elapsed < kProtocolSeconds;
    report(ok, "protocol reproduction",
           "final accuracy " + fmt(final_acc) + "% (>= 95), max F_k " + fmt(max_f) + " (<= 5), baseline final F_k " +
               fmt(base_f) + " > " + fmt(rep.per_phase_forgetting.back()) + ", " + fmt(elapsed) + " s (< 60 s)");
    std::cout << ats::report_table(rep) << ats::report_table(baseline);

    std::vector<Eigen::Index> rows;
    std::vector<int> cols;
    for (std::size_t i = 0; i < prepared.column.size(); ++i)
        if (prepared.split[i] == ats::Split::train) {
            rows.push_back(static_cast<Eigen::Index>(i));
            cols.push_back(prepared.column[i]);
        }
    Matrix x(static_cast<Eigen::Index>(rows.size()), prepared.features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        x.row(static_cast<Eigen::Index>(i)) = prepared.features.row(rows[i]);
    const auto joint = SchedulerState::fit_base(x, TaskLabelMatrix::one_hot(cols, 10), 1.0);
    const double gap = ats_test::max_abs_diff(run.scheduler.W(), joint.W());
    std::size_t reads = 0;
    for (auto r : run.training_row_reads)
        reads += r;
    report(run.rows_read_once && gap <= kWeightTolerance, "zero replay and joint equality",
           std::to_string(reads) + " reads over " + std::to_string(rows.size()) +
               " training rows (each exactly once: " + (run.rows_read_once ? "yes" : "no") +
               "), max |W_protocol - W_joint| = " + fmt(gap) + " (<= 1e-8)");
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void persistence_and_routing()
{
    const fs::path dir = fs::temp_directory_path() / ("ats_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto corpus_path = dir / "corpus.jsonl";
    ats::cli::cmd_gen_corpus({corpus_path, 10, 102, 0, 0.8, false});

    ats::cli::ModelOptions model; // gamma 1, d_e 1024, d_f 64, seed 0
    auto prev = dir / "state_base.json";
    ats::cli::cmd_train_base({corpus_path, {0, 1, 2, 3, 4}, prev, model});

    const auto first = slurp(prev);
    const auto reloaded = ats::load_state_file(prev);
    ats::save_state_file(reloaded, dir / "resaved.json");
    const bool byte_identical = slurp(dir / "resaved.json") == first;

    for (int c = 5; c < 10; ++c) {
        const auto next = dir / ("state_" + std::to_string(c) + ".json");
        ats::cli::cmd_update({prev, corpus_path, c, next});
        prev = next;
    }
    const auto joint = ats::cli::cmd_train_base({corpus_path, {}, dir / "joint.json", model});
    const auto incremental = ats::load_state_file(prev);
    const double gap = ats_test::max_abs_diff(incremental.scheduler.W(), joint.scheduler.W());
    report(byte_identical && gap <= kWeightTolerance && incremental.task_ids == joint.task_ids, "persistence",
           std::string("save->load->save byte-identical: ") + (byte_identical ? "yes" : "no") +
               ", five updates vs joint train max |dW| = " + fmt(gap) + " (<= 1e-8)");

    ats::ExecutorRegistry registry;
    for (int c = 0; c < 10; ++c)
        registry.add({c, std::string(ats::task_lexicons()[static_cast<std::size_t>(c)].name), 7, 8,
                      static_cast<std::uint64_t>(c), 0.5});
    const ats::Router router(incremental, registry);
    const auto corpus = ats::read_corpus_file(corpus_path);
    std::vector<int> hits(10, 0), totals(10, 0);
    bool shapes_ok = true;
    for (const auto& row : corpus) {
        if (row.split != ats::Split::test)
            continue;
        const auto r = router.route(row.text);
        ++totals[static_cast<std::size_t>(row.task_id)];
        if (r.task_id == row.task_id && r.executor_name)
            ++hits[static_cast<std::size_t>(row.task_id)];
        const auto* spec = registry.find(r.task_id);
        shapes_ok = shapes_ok && spec && r.action_chunk && r.action_chunk->actions.rows() == spec->horizon &&
                    r.action_chunk->actions.cols() == spec->action_dim;
    }
    double worst = 100.0;
    for (int c = 0; c < 10; ++c)
        worst = std::min(worst, 100.0 * hits[static_cast<std::size_t>(c)] / totals[static_cast<std::size_t>(c)]);
    report(worst >= kMinRoutingAccuracy && shapes_ok, "end-to-end routing",
           "worst per-class held-out routing accuracy " + fmt(worst) + "% (>= 95), chunk shapes " +
               (shapes_ok ? "match" : "mismatch"));
    fs::remove_all(dir);
}

} // namespace

int main()
{
    try {
        recursive_criteria();
        ridge_optimality();
        protocol_criteria();
        persistence_and_routing();
    } catch (const std::exception& e) {
        std::cout << "[FAIL] acceptance aborted: " << e.what() << std::endl;
        return 1;
    }
    std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
