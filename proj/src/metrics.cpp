#include "avqe/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "avqe/errors.hpp"

namespace avqe {

double mse(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) {
        throw DataError("mse: length mismatch " + std::to_string(predictions.size()) + " vs " +
                        std::to_string(targets.size()));
    }
    if (predictions.empty()) throw DataError("mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        acc += d * d;
    }
    return acc / static_cast<double>(predictions.size());
}

double rmse(std::span<const double> predictions, std::span<const double> targets) {
    return std::sqrt(mse(predictions, targets));
}

double pearson(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) {
        throw DataError("pearson: length mismatch " + std::to_string(predictions.size()) + " vs " +
                        std::to_string(targets.size()));
    }
    const std::size_t n = predictions.size();
    if (n < 2) throw DataError("pearson: need at least 2 pairs, got " + std::to_string(n));
    double mean_p = 0.0, mean_t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_p += predictions[i];
        mean_t += targets[i];
    }
    mean_p /= static_cast<double>(n);
    mean_t /= static_cast<double>(n);
    double spp = 0.0, stt = 0.0, spt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dp = predictions[i] - mean_p;
        const double dt = targets[i] - mean_t;
        spp += dp * dp;
        stt += dt * dt;
        spt += dp * dt;
    }
    if (spp == 0.0 || stt == 0.0) {
        throw NumericError("pearson: correlation undefined for a constant vector");
    }
    return clip(spt / std::sqrt(spp * stt), -1.0, 1.0);
}

EvalReport evaluate_cv(CvModel& model, const std::vector<QosRecord>& records,
                       const FoldPlan& plan, LoopMode mode) {
    if (plan.assignment.size() != records.size()) {
        throw DataError("evaluate_cv: fold plan covers " + std::to_string(plan.assignment.size()) +
                        " records, dataset has " + std::to_string(records.size()));
    }

    EvalReport report;
    report.mode = loop_mode_name(mode);
    report.model_id = model.name();
    report.plan_hash = fold_plan_hash(plan);

    std::vector<double> pooled_pred, pooled_target;

    for (std::size_t fold = 0; fold < plan.k; ++fold) {
        FoldResult result;
        try {
            result = model.run_fold(records, plan, fold, mode);
        } catch (const DataError& e) {
            throw DataError("fold " + std::to_string(fold) + ": " + e.what());
        } catch (const NumericError& e) {
            throw NumericError("fold " + std::to_string(fold) + ": " + e.what());
        }

        if (result.predictions.size() != result.eval_origins.size()) {
            throw std::logic_error("fold " + std::to_string(fold) +
                                   ": prediction/origin count mismatch");
        }

        std::set<std::size_t> test_set;
        for (std::size_t o : plan.test_ordinals(fold)) test_set.insert(o);
        for (std::size_t o : result.train_origins) {
            if (test_set.count(o)) {
                throw std::logic_error("fold " + std::to_string(fold) +
                                       ": training used test ordinal " + std::to_string(o));
            }
        }

        std::vector<double> targets;
        targets.reserve(result.eval_origins.size());
        for (std::size_t i = 0; i < result.eval_origins.size(); ++i) {
            const std::size_t o = result.eval_origins[i];
            if (!test_set.count(o)) {
                throw std::logic_error("fold " + std::to_string(fold) + ": prediction for ordinal " +
                                       std::to_string(o) + " outside the test fold");
            }
            const auto& rec = records.at(o);
            if (!rec.mos) {
                throw DataError("fold " + std::to_string(fold) + ": record " + std::to_string(o) +
                                " has no ground-truth MOS to score against");
            }
            targets.push_back(*rec.mos);
        }

        FoldMetrics fm;
        fm.fold = fold;
        fm.n = targets.size();
        try {
            fm.mse = mse(result.predictions, targets);
            fm.rmse = std::sqrt(fm.mse);
            fm.pearson = pearson(result.predictions, targets);
        } catch (const std::exception& e) {
            throw NumericError("fold " + std::to_string(fold) + ": " + e.what());
        }
        report.folds.push_back(fm);

        pooled_pred.insert(pooled_pred.end(), result.predictions.begin(), result.predictions.end());
        pooled_target.insert(pooled_target.end(), targets.begin(), targets.end());
    }

    report.aggregate.n = pooled_pred.size();
    report.aggregate.mse = mse(pooled_pred, pooled_target);
    report.aggregate.rmse = std::sqrt(report.aggregate.mse);
    report.aggregate.pearson = pearson(pooled_pred, pooled_target);
    return report;
}

void write_eval_report_csv(const EvalReport& report, const std::string& path,
                           const std::string& config_echo) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    if (!config_echo.empty()) out << "# " << config_echo << "\n";
    out << "fold,n,mse,rmse,pearson\n";
    char buf[160];
    for (const auto& f : report.folds) {
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%.17g,%.17g\n", f.fold, f.n, f.mse, f.rmse,
                      f.pearson);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "aggregate,%zu,%.17g,%.17g,%.17g\n", report.aggregate.n,
                  report.aggregate.mse, report.aggregate.rmse, report.aggregate.pearson);
    out << buf;
}

}  // namespace avqe
