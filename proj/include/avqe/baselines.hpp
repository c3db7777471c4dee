#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avqe/dataset.hpp"

namespace avqe {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf mean of training targets
    std::size_t n_samples = 0;
};

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t m_try = 0;  // features sampled per split; 0 = ceil(p/3)
    bool bootstrap = true;
    std::size_t min_samples_leaf = 5;
    std::size_t max_depth = 0;  // 0 = unlimited
    std::uint64_t seed = 0;
};

/// CART regression tree: splits maximize variance reduction over a sampled
/// feature subset; leaves store the mean target of their training samples.
class RegressionTree {
public:
    void fit(const std::vector<LaggedSample>& samples, const std::vector<std::size_t>& indices,
             const ForestConfig& config, std::size_t m_try, Rng& rng,
             std::vector<double>& importance_acc);

    double predict(const std::vector<double>& x) const;
    int leaf_index(const std::vector<double>& x) const;
    const std::vector<TreeNode>& nodes() const { return nodes_; }

private:
    std::vector<TreeNode> nodes_;
};

class ForestModel {
public:
    double predict(const std::vector<double>& x) const;
    const std::vector<RegressionTree>& trees() const { return trees_; }
    /// Impurity-decrease importance, normalized to sum 1 when any split occurred.
    const std::vector<double>& feature_importance() const { return importance_; }

    friend ForestModel fit_forest(const std::vector<LaggedSample>&, const ForestConfig&);

private:
    std::vector<RegressionTree> trees_;
    std::vector<double> importance_;
};

/// Bootstrap-resampled CART ensemble. Per-tree seeds derive from the forest
/// seed by tag "tree:<index>", so results do not depend on fit order.
ForestModel fit_forest(const std::vector<LaggedSample>& samples, const ForestConfig& config);

struct LinearModel {
    std::vector<double> weights;
    double intercept = 0.0;
};

/// Ordinary least squares via the normal equations; a 1e-10 ridge jitter is
/// applied only when the plain system is not positive definite.
LinearModel fit_ols(const std::vector<LaggedSample>& samples);

double predict_raw(const LinearModel& model, const std::vector<double>& x);

/// Uniform evaluation interface: estimates clipped to the [1,5] MOS range.
std::vector<double> predict(const LinearModel& model, const std::vector<LaggedSample>& samples);
std::vector<double> predict(const ForestModel& model, const std::vector<LaggedSample>& samples);

struct ImportanceRanking {
    std::vector<std::string> names;   // descending by score, ties by column order
    std::vector<double> scores;
};

ImportanceRanking rank_features(const FeatureSchema& schema,
                                const std::vector<QosRecord>& records,
                                const ForestConfig& config);

/// Top-k columns by forest importance, as a schema consumable by the rest of
/// the pipeline.
FeatureSchema select_features(const FeatureSchema& schema, const std::vector<QosRecord>& records,
                              const ForestConfig& config, std::size_t top_k);

void write_importance_csv(const ImportanceRanking& ranking, const std::string& path,
                          const std::string& config_echo);

}  // namespace avqe
