#pragma once

// Closed-form ridge regression with exact recursive updates.
//
// The scheduler keeps two sufficient statistics over all absorbed data:
//   R = (sum X^T X + gamma I)^{-1}   (d_e x d_e)
//   Q = sum X^T Y                    (d_e x d_K)
// and the weights W = R Q. A new batch X (N x d_e) updates R through the
// Woodbury identity, so earlier batches never have to be revisited:
//   R' = R - R X^T (I_N + X R X^T)^{-1} X R.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ats/errors.hpp"
#include "ats/feature_pipeline.hpp"

namespace ats {

inline constexpr Eigen::Index kDefaultChunkRows = 512;

/// One-hot label rows plus the class index of each row.
struct TaskLabelMatrix {
    Matrix rows;
    std::vector<int> class_ids;

    static TaskLabelMatrix one_hot(std::span<const int> ids, int d_K)
    {
        if (d_K <= 0)
            throw std::invalid_argument("one_hot: d_K must be positive");
        TaskLabelMatrix y;
        y.rows = Matrix::Zero(static_cast<Eigen::Index>(ids.size()), d_K);
        y.class_ids.assign(ids.begin(), ids.end());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || ids[i] >= d_K)
                throw std::out_of_range("one_hot: class " + std::to_string(ids[i]) + " outside [0, " +
                                        std::to_string(d_K) + ")");
            y.rows(static_cast<Eigen::Index>(i), ids[i]) = 1.0;
        }
        return y;
    }

    Eigen::Index size() const { return rows.rows(); }
    Eigen::Index width() const { return rows.cols(); }
};

class SchedulerState {
public:
    /// Untrained state: R = I / gamma, d_K = 0.
    static SchedulerState init(int d_e, double gamma)
    {
        if (d_e <= 0)
            throw std::invalid_argument("init: d_e must be positive");
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw std::invalid_argument("init: gamma must be positive and finite");
        SchedulerState s;
        s.gamma_ = gamma;
        s.R_ = Matrix::Identity(d_e, d_e) / gamma;
        s.Q_ = Matrix::Zero(d_e, 0);
        s.W_ = Matrix::Zero(d_e, 0);
        return s;
    }

    /// Joint ridge solution over one batch of features and labels.
    static SchedulerState fit_base(const Matrix& features, const TaskLabelMatrix& labels, double gamma)
    {
        if (features.cols() == 0)
            throw DimensionError("fit_base: zero-width features");
        if (features.rows() < 1 || features.rows() != labels.size())
            throw DimensionError("fit_base: " + std::to_string(features.rows()) + " feature rows vs " +
                                 std::to_string(labels.size()) + " label rows");
        detail::require_finite(features, "fit_base features");
        detail::require_finite(labels.rows, "fit_base labels");

        const Eigen::Index d_e = features.cols();
        SchedulerState s = init(static_cast<int>(d_e), gamma);
        Matrix gram = Matrix::Identity(d_e, d_e) * gamma;
        gram.selfadjointView<Eigen::Lower>().rankUpdate(features.transpose());
        gram = gram.selfadjointView<Eigen::Lower>();
        Eigen::LLT<Matrix> llt(gram);
        if (llt.info() != Eigen::Success)
            throw NumericalError("fit_base: regularized Gram matrix is not positive definite");
        s.R_ = llt.solve(Matrix::Identity(d_e, d_e));
        s.symmetrize();
        s.Q_ = features.transpose() * labels.rows;
        s.tasks_seen_ = 1;
        s.refresh_weights();
        return s;
    }

    /// Rebuilds a state from stored statistics; W is recomputed as R Q.
    static SchedulerState from_statistics(Matrix R, Matrix Q, double gamma, std::uint64_t tasks_seen)
    {
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw std::invalid_argument("from_statistics: gamma must be positive and finite");
        if (R.rows() != R.cols() || R.rows() == 0 || Q.rows() != R.rows())
            throw DimensionError("from_statistics: R must be d_e x d_e and Q d_e x d_K");
        SchedulerState s;
        s.gamma_ = gamma;
        s.R_ = std::move(R);
        s.Q_ = std::move(Q);
        s.tasks_seen_ = tasks_seen;
        s.refresh_weights();
        return s;
    }

    /// Absorbs one task batch. Labels narrower than d_K are zero-padded;
    /// batches above chunk_rows rows are applied as successive sub-updates.
    void update(const Matrix& features, const TaskLabelMatrix& labels, Eigen::Index chunk_rows = kDefaultChunkRows)
    {
        if (features.rows() < 1)
            throw DimensionError("update: empty batch");
        if (features.cols() != d_e())
            throw DimensionError("update: feature width " + std::to_string(features.cols()) + " != d_e " +
                                 std::to_string(d_e()));
        if (labels.size() != features.rows())
            throw DimensionError("update: label rows do not match feature rows");
        if (labels.width() > d_K())
            throw DimensionError("update: label width " + std::to_string(labels.width()) + " exceeds d_K " +
                                 std::to_string(d_K()) + "; expand the label space first");
        if (chunk_rows < 1)
            throw std::invalid_argument("update: chunk_rows must be positive");
        detail::require_finite(features, "update features");
        detail::require_finite(labels.rows, "update labels");

        Matrix y = Matrix::Zero(labels.size(), d_K());
        y.leftCols(labels.width()) = labels.rows;

        // work on copies so a failed factorization leaves the state untouched
        Matrix R = R_;
        Matrix Q = Q_;
        for (Eigen::Index start = 0; start < features.rows(); start += chunk_rows) {
            const Eigen::Index n = std::min(chunk_rows, features.rows() - start);
            const auto x = features.middleRows(start, n);
            const Matrix rxt = R * x.transpose(); // d_e x n
            Matrix inner = Matrix::Identity(n, n);
            inner.noalias() += x * rxt;
            inner = (0.5 * (inner + inner.transpose())).eval();
            if (!inner.allFinite())
                throw NumericalError("update: inner system I + X R X^T overflowed");
            Eigen::LLT<Matrix> llt(inner);
            if (llt.info() != Eigen::Success)
                throw NumericalError("update: inner system I + X R X^T is numerically singular");
            const Matrix gain = llt.solve(rxt.transpose()); // n x d_e
            R.noalias() -= rxt * gain;
            R = (0.5 * (R + R.transpose())).eval();
            Q.noalias() += x.transpose() * y.middleRows(start, n);
        }
        if (!R.allFinite())
            throw NumericalError("update: autocorrelation matrix became non-finite");
        R_ = std::move(R);
        Q_ = std::move(Q);
        ++tasks_seen_;
        refresh_weights();
    }

    /// Appends zero columns to Q and W; R and existing logits are unchanged.
    void expand_label_space(int new_d_K)
    {
        if (new_d_K <= d_K())
            throw std::invalid_argument("expand_label_space: new d_K " + std::to_string(new_d_K) +
                                        " must exceed current " + std::to_string(d_K()));
        const Eigen::Index old = d_K();
        Q_.conservativeResize(Eigen::NoChange, new_d_K);
        W_.conservativeResize(Eigen::NoChange, new_d_K);
        Q_.rightCols(new_d_K - old).setZero();
        W_.rightCols(new_d_K - old).setZero();
    }

    RowVector logits(const RowVector& expanded) const
    {
        if (expanded.size() != d_e())
            throw DimensionError("logits: input width " + std::to_string(expanded.size()) + " != d_e " +
                                 std::to_string(d_e()));
        return expanded * W_;
    }

    RowVector predict_proba(const RowVector& expanded) const
    {
        require_classes();
        return softmax(logits(expanded));
    }

    /// Argmax of predict_proba, lowest index on ties.
    int predict(const RowVector& expanded) const { return argmax(predict_proba(expanded)); }

    std::vector<int> predict_batch(const Matrix& expanded) const
    {
        require_classes();
        if (expanded.cols() != d_e())
            throw DimensionError("predict_batch: width mismatch");
        const Matrix z = expanded * W_;
        std::vector<int> out(static_cast<std::size_t>(z.rows()));
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            out[static_cast<std::size_t>(i)] = argmax(softmax(z.row(i)));
        return out;
    }

    static RowVector softmax(const RowVector& z)
    {
        if (z.size() == 0)
            throw std::invalid_argument("softmax: empty input");
        RowVector e = (z.array() - z.maxCoeff()).exp().matrix();
        return e / e.sum();
    }

    static int argmax(const RowVector& v)
    {
        int best = 0;
        for (Eigen::Index i = 1; i < v.size(); ++i)
            if (v[i] > v[best])
                best = static_cast<int>(i);
        return best;
    }

    const Matrix& R() const { return R_; }
    const Matrix& Q() const { return Q_; }
    const Matrix& W() const { return W_; }
    double gamma() const { return gamma_; }
    Eigen::Index d_e() const { return R_.rows(); }
    Eigen::Index d_K() const { return Q_.cols(); }
    std::uint64_t tasks_seen() const { return tasks_seen_; }

private:
    SchedulerState() = default;

    void symmetrize() { R_ = (0.5 * (R_ + R_.transpose())).eval(); }
    void refresh_weights() { W_ = R_ * Q_; }

    void require_classes() const
    {
        if (d_K() < 1)
            throw std::logic_error("scheduler has no classes yet");
    }

    Matrix R_;
    Matrix Q_;
    Matrix W_;
    double gamma_ = 1.0;
    std::uint64_t tasks_seen_ = 0;
};

} // namespace ats
