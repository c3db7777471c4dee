#include "avqe/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "avqe/errors.hpp"

namespace avqe {

namespace {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double child_sse = 0.0;
    bool found = false;
};

double node_sse(double sum, double sum_sq, double n) {
    return std::max(0.0, sum_sq - sum * sum / n);
}

std::size_t resolve_m_try(const ForestConfig& config, std::size_t p) {
    const std::size_t m = config.m_try == 0 ? (p + 2) / 3 : config.m_try;
    if (m < 1 || m > p) {
        throw DataError("forest config: m_try=" + std::to_string(m) + " outside [1," +
                        std::to_string(p) + "]");
    }
    return m;
}

}  // namespace

void RegressionTree::fit(const std::vector<LaggedSample>& samples,
                         const std::vector<std::size_t>& indices, const ForestConfig& config,
                         std::size_t m_try, Rng& rng, std::vector<double>& importance_acc) {
    const std::size_t p = samples.front().input.size();
    const std::size_t depth_limit =
        config.max_depth == 0 ? std::numeric_limits<std::size_t>::max() : config.max_depth;

    nodes_.clear();
    struct Work {
        int node;
        std::vector<std::size_t> idx;
        std::size_t depth;
    };
    std::vector<Work> stack;

    auto make_node = [&](const std::vector<std::size_t>& idx) {
        TreeNode node;
        node.n_samples = idx.size();
        double sum = 0.0;
        for (std::size_t i : idx) sum += samples[i].target;
        node.value = sum / static_cast<double>(idx.size());
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size() - 1);
    };

    stack.push_back({make_node(indices), indices, 0});
    std::vector<std::size_t> feature_pool(p);
    std::iota(feature_pool.begin(), feature_pool.end(), 0);

    while (!stack.empty()) {
        Work work = std::move(stack.back());
        stack.pop_back();
        const auto& idx = work.idx;
        const std::size_t n = idx.size();

        if (work.depth >= depth_limit || n < 2 * config.min_samples_leaf) continue;

        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t i : idx) {
            sum += samples[i].target;
            sum_sq += samples[i].target * samples[i].target;
        }
        const double parent_sse = node_sse(sum, sum_sq, static_cast<double>(n));
        if (parent_sse <= 1e-12) continue;  // pure node

        // partial Fisher-Yates picks m_try distinct candidate features
        for (std::size_t i = 0; i < m_try; ++i) {
            const std::size_t j = i + rng.below(p - i);
            std::swap(feature_pool[i], feature_pool[j]);
        }

        SplitChoice best;
        std::vector<std::size_t> sorted(idx);
        for (std::size_t fi = 0; fi < m_try; ++fi) {
            const std::size_t f = feature_pool[fi];
            std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                const double va = samples[a].input[f];
                const double vb = samples[b].input[f];
                return va < vb || (va == vb && a < b);
            });
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t s = 1; s < n; ++s) {
                const double y = samples[sorted[s - 1]].target;
                left_sum += y;
                left_sq += y * y;
                const double xa = samples[sorted[s - 1]].input[f];
                const double xb = samples[sorted[s]].input[f];
                if (xa == xb) continue;
                if (s < config.min_samples_leaf || n - s < config.min_samples_leaf) continue;
                const double cost = node_sse(left_sum, left_sq, static_cast<double>(s)) +
                                    node_sse(sum - left_sum, sum_sq - left_sq,
                                             static_cast<double>(n - s));
                if (!best.found || cost < best.child_sse) {
                    best.found = true;
                    best.feature = static_cast<int>(f);
                    best.threshold = xa + (xb - xa) / 2.0;
                    best.child_sse = cost;
                }
            }
        }

        if (!best.found || parent_sse - best.child_sse <= 1e-12) continue;

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : idx) {
            (samples[i].input[best.feature] <= best.threshold ? left_idx : right_idx).push_back(i);
        }
        importance_acc[static_cast<std::size_t>(best.feature)] += parent_sse - best.child_sse;

        nodes_[work.node].feature = best.feature;
        nodes_[work.node].threshold = best.threshold;
        const int left = make_node(left_idx);
        const int right = make_node(right_idx);
        nodes_[work.node].left = left;
        nodes_[work.node].right = right;
        stack.push_back({right, std::move(right_idx), work.depth + 1});
        stack.push_back({left, std::move(left_idx), work.depth + 1});
    }
}

int RegressionTree::leaf_index(const std::vector<double>& x) const {
    int at = 0;
    while (nodes_[at].feature >= 0) {
        at = x[static_cast<std::size_t>(nodes_[at].feature)] <= nodes_[at].threshold
                 ? nodes_[at].left
                 : nodes_[at].right;
    }
    return at;
}

double RegressionTree::predict(const std::vector<double>& x) const {
    return nodes_[leaf_index(x)].value;
}

double ForestModel::predict(const std::vector<double>& x) const {
    double acc = 0.0;
    for (const auto& tree : trees_) acc += tree.predict(x);
    return acc / static_cast<double>(trees_.size());
}

ForestModel fit_forest(const std::vector<LaggedSample>& samples, const ForestConfig& config) {
    if (config.n_trees == 0) throw DataError("forest config: n_trees must be positive");
    if (config.min_samples_leaf == 0) throw DataError("forest config: min_samples_leaf must be positive");
    if (samples.size() < 2 * config.min_samples_leaf) {
        throw DataError("fit_forest: need at least " + std::to_string(2 * config.min_samples_leaf) +
                        " samples, got " + std::to_string(samples.size()));
    }
    const std::size_t p = samples.front().input.size();
    const std::size_t m_try = resolve_m_try(config, p);
    const std::size_t n = samples.size();

    ForestModel forest;
    forest.trees_.resize(config.n_trees);
    forest.importance_.assign(p, 0.0);

    std::vector<std::size_t> identity(n);
    std::iota(identity.begin(), identity.end(), 0);

    for (std::size_t t = 0; t < config.n_trees; ++t) {
        Rng rng(derive_seed(config.seed, "tree:" + std::to_string(t)));
        std::vector<std::size_t> idx;
        if (config.bootstrap) {
            idx.resize(n);
            for (auto& i : idx) i = rng.below(n);
        } else {
            idx = identity;
        }
        forest.trees_[t].fit(samples, idx, config, m_try, rng, forest.importance_);
    }

    const double total = std::accumulate(forest.importance_.begin(), forest.importance_.end(), 0.0);
    if (total > 0.0) {
        for (double& v : forest.importance_) v /= total;
    }
    return forest;
}

LinearModel fit_ols(const std::vector<LaggedSample>& samples) {
    if (samples.empty()) throw DataError("fit_ols: empty sample set");
    const std::size_t p = samples.front().input.size();
    if (samples.size() < p + 1) {
        throw DataError("fit_ols: need at least " + std::to_string(p + 1) + " samples, got " +
                        std::to_string(samples.size()));
    }
    // normal equations with an intercept column appended
    const std::size_t d = p + 1;
    Matrix a(d, d, 0.0);
    std::vector<double> b(d, 0.0);
    std::vector<double> row(d, 1.0);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < p; ++i) row[i] = s.input[i];
        row[p] = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            b[i] += row[i] * s.target;
            for (std::size_t j = i; j < d; ++j) a(i, j) += row[i] * row[j];
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
    }

    std::vector<double> x;
    try {
        x = solve_spd(a, b);
    } catch (const NumericError&) {
        Matrix jittered = a;
        for (std::size_t i = 0; i < d; ++i) jittered(i, i) += 1e-10;
        try {
            x = solve_spd(jittered, b);
        } catch (const NumericError&) {
            throw NumericError("fit_ols: design matrix rank-deficient beyond jitter");
        }
    }

    LinearModel model;
    model.weights.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(p));
    model.intercept = x[p];
    return model;
}

double predict_raw(const LinearModel& model, const std::vector<double>& x) {
    if (x.size() != model.weights.size()) {
        throw DataError("predict: feature length " + std::to_string(x.size()) +
                        " does not match model width " + std::to_string(model.weights.size()));
    }
    double y = model.intercept;
    for (std::size_t i = 0; i < x.size(); ++i) y += model.weights[i] * x[i];
    return y;
}

std::vector<double> predict(const LinearModel& model, const std::vector<LaggedSample>& samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(clip(predict_raw(model, s.input), kMosMin, kMosMax));
    return out;
}

std::vector<double> predict(const ForestModel& model, const std::vector<LaggedSample>& samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    if (!model.trees().empty() && !model.trees().front().nodes().empty() && !samples.empty()) {
        // dimensionality guard: walk requires every split feature in range
        const std::size_t p = samples.front().input.size();
        for (const auto& tree : model.trees()) {
            for (const auto& node : tree.nodes()) {
                if (node.feature >= 0 && static_cast<std::size_t>(node.feature) >= p) {
                    throw DataError("predict: forest was fit on wider feature vectors");
                }
            }
        }
    }
    for (const auto& s : samples) out.push_back(clip(model.predict(s.input), kMosMin, kMosMax));
    return out;
}

ImportanceRanking rank_features(const FeatureSchema& schema,
                                const std::vector<QosRecord>& records,
                                const ForestConfig& config) {
    schema.validate();
    const auto samples = make_lagged(records, 0, 0, LoopMode::open);
    const ForestModel forest = fit_forest(samples, config);
    const auto& scores = forest.feature_importance();

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];  // ties keep column order
    });

    ImportanceRanking ranking;
    ranking.names.reserve(order.size());
    ranking.scores.reserve(order.size());
    for (std::size_t i : order) {
        ranking.names.push_back(schema.names[i]);
        ranking.scores.push_back(scores[i]);
    }
    return ranking;
}

FeatureSchema select_features(const FeatureSchema& schema, const std::vector<QosRecord>& records,
                              const ForestConfig& config, std::size_t top_k) {
    if (top_k == 0 || top_k > schema.names.size()) {
        throw DataError("select_features: top_k=" + std::to_string(top_k) + " outside [1," +
                        std::to_string(schema.names.size()) + "]");
    }
    const ImportanceRanking ranking = rank_features(schema, records, config);
    FeatureSchema out;
    out.target = schema.target;
    out.names.assign(ranking.names.begin(), ranking.names.begin() + static_cast<std::ptrdiff_t>(top_k));
    return out;
}

void write_importance_csv(const ImportanceRanking& ranking, const std::string& path,
                          const std::string& config_echo) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    if (!config_echo.empty()) out << "# " << config_echo << "\n";
    out << "rank,feature,score\n";
    char buf[64];
    for (std::size_t i = 0; i < ranking.names.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", ranking.scores[i]);
        out << (i + 1) << "," << ranking.names[i] << "," << buf << "\n";
    }
}

}  // namespace avqe
