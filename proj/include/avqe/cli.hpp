#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avqe/baselines.hpp"
#include "avqe/metrics.hpp"
#include "avqe/training.hpp"

namespace avqe::cli {

/// One entry of a --models list: narx(d_u,d_y), mlp, ols, rf, bagging, or the
/// oracle test hook that echoes ground truth.
struct ModelSpec {
    enum class Kind { narx, ols, rf, bagging, oracle };
    Kind kind = Kind::narx;
    std::size_t d_u = 0;
    std::size_t d_y = 0;
    std::string id;
};

std::vector<ModelSpec> parse_model_specs(const std::string& list);

struct NarxTrainSpec {
    std::size_t d_u = 3;
    std::size_t d_y = 3;
    std::size_t hidden = 0;  // 0 = one hidden node per exogenous feature
    TrainConfig train;
};

struct NarxTrainOutcome {
    NarxModel model;
    TrainReport report;
    std::vector<std::size_t> used_origins;  // sample origins seen during fitting
};

/// Shared training pipeline: fit the normalizer on `fit_rows`, lag the whole
/// normalized sequence, keep the samples originating in `fit_rows`, split
/// them 70/30, and run Bayesian-regularized LM. Seeds derive from `seed` by
/// tags "init" and "split".
NarxTrainOutcome train_narx_on_records(const FeatureSchema& schema,
                                       const std::vector<QosRecord>& records,
                                       const std::vector<std::size_t>& fit_rows,
                                       const NarxTrainSpec& spec, std::uint64_t seed);

/// NARX entry for the cross-validation harness.
class NarxCvModel : public CvModel {
public:
    NarxCvModel(FeatureSchema schema, NarxTrainSpec spec, std::uint64_t seed, std::string id);
    std::string name() const override { return id_; }
    FoldResult run_fold(const std::vector<QosRecord>& records, const FoldPlan& plan,
                        std::size_t fold, LoopMode mode) override;

private:
    FeatureSchema schema_;
    NarxTrainSpec spec_;
    std::uint64_t seed_;
    std::string id_;
};

/// OLS / random forest / bagging entries; these are static per-record models,
/// trained on the fold remainder without an internal validation carve-out.
class BaselineCvModel : public CvModel {
public:
    BaselineCvModel(ModelSpec::Kind kind, ForestConfig forest, std::uint64_t seed, std::string id);
    std::string name() const override { return id_; }
    FoldResult run_fold(const std::vector<QosRecord>& records, const FoldPlan& plan,
                        std::size_t fold, LoopMode mode) override;

private:
    ModelSpec::Kind kind_;
    ForestConfig forest_;
    std::uint64_t seed_;
    std::string id_;
};

/// Test hook: predicts the ground-truth MOS of every test record.
class OracleCvModel : public CvModel {
public:
    std::string name() const override { return "oracle"; }
    FoldResult run_fold(const std::vector<QosRecord>& records, const FoldPlan& plan,
                        std::size_t fold, LoopMode mode) override;
};

std::unique_ptr<CvModel> build_cv_model(const ModelSpec& spec, const FeatureSchema& schema,
                                        const NarxTrainSpec& narx_defaults, std::uint64_t root_seed);

struct SchemaSource {
    std::optional<std::string> schema_path;
    std::optional<std::string> features_csv;  // comma-separated names
    std::string target = "mos";
};

FeatureSchema resolve_schema(const SchemaSource& source);
void write_schema_file(const FeatureSchema& schema, const std::string& path,
                       const std::string& config_echo);
FeatureSchema load_schema_file(const std::string& path);

// Subcommand bodies. Each returns a process exit code; CLI flag handling
// lives in run_cli.
int cmd_synth(std::size_t n, std::uint64_t seed, double noise_sd, const std::string& out_path);
int cmd_select_features(const std::string& data_path, const std::string& target, std::size_t top_k,
                        std::uint64_t seed, const std::string& out_dir);
int cmd_train(const std::string& data_path, const SchemaSource& schema_source,
              const NarxTrainSpec& spec, std::uint64_t seed,
              const std::optional<std::string>& order_by, const std::string& out_dir);
int cmd_predict(const std::string& model_path, const std::string& data_path, LoopMode mode,
                const std::optional<std::string>& order_by, const std::string& out_path);
int cmd_cv(const std::string& data_path, const SchemaSource& schema_source,
           const std::string& models_list, std::size_t folds, std::uint64_t seed,
           const NarxTrainSpec& narx_defaults, LoopMode mode,
           const std::optional<std::string>& order_by, const std::string& out_dir);
int cmd_monitor(const std::string& model_path, const std::string& input_path,
                const std::string& output_path, LoopMode mode);

/// Full command-line entry. Exit codes: 0 success, 1 usage error, 2 data
/// error, 3 numerical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace avqe::cli
