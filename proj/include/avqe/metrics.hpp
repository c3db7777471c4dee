#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "avqe/dataset.hpp"

namespace avqe {

double mse(std::span<const double> predictions, std::span<const double> targets);
double rmse(std::span<const double> predictions, std::span<const double> targets);

/// Pearson correlation, clamped into [-1,1] against rounding. Constant
/// vectors raise NumericError rather than silently returning 0.
double pearson(std::span<const double> predictions, std::span<const double> targets);

struct FoldMetrics {
    std::size_t fold = 0;
    std::size_t n = 0;
    double mse = 0.0;
    double rmse = 0.0;
    double pearson = 0.0;
};

struct EvalReport {
    std::vector<FoldMetrics> folds;
    FoldMetrics aggregate;  // over pooled (prediction, target) pairs, fold field unused
    std::string mode;
    std::string model_id;
    std::uint64_t plan_hash = 0;
    std::size_t leak_count = 0;  // train/test origin overlaps found by the audit
};

/// What one fold run hands back to the harness: estimates for a subset of the
/// fold's test ordinals, plus the ordinals whose targets went into fitting
/// (for the leakage audit).
struct FoldResult {
    std::vector<double> predictions;
    std::vector<std::size_t> eval_origins;
    std::vector<std::size_t> train_origins;
};

/// One comparison entry: anything that can be fit on a fold's training
/// remainder and scored on the held-out fold.
class CvModel {
public:
    virtual ~CvModel() = default;
    virtual std::string name() const = 0;
    virtual FoldResult run_fold(const std::vector<QosRecord>& records, const FoldPlan& plan,
                                std::size_t fold, LoopMode mode) = 0;
};

/// Runs every fold of the plan, audits that no training origin sits in the
/// fold's own test set, and aggregates metrics over the pooled pairs. Any
/// fold failure aborts with the fold index in the message.
EvalReport evaluate_cv(CvModel& model, const std::vector<QosRecord>& records,
                       const FoldPlan& plan, LoopMode mode);

/// CSV rows `fold,n,mse,rmse,pearson` plus an `aggregate` row.
void write_eval_report_csv(const EvalReport& report, const std::string& path,
                           const std::string& config_echo);

}  // namespace avqe
