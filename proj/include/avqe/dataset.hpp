#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "avqe/numerics.hpp"

namespace avqe {

constexpr double kMosMin = 1.0;
constexpr double kMosMax = 5.0;

/// Ordered feature columns plus the name of the MOS target column.
struct FeatureSchema {
    std::vector<std::string> names;
    std::string target = "mos";

    void validate() const;  // non-empty, unique names, target not among them
};

/// The nine bitstream columns used by default, with target column "mos".
FeatureSchema inrs_default_schema();

/// One timestamped observation: QoS features aligned with a FeatureSchema
/// plus an optional ground-truth MOS in [1,5].
struct QosRecord {
    std::size_t ordinal = 0;
    std::vector<double> features;
    std::optional<double> mos;
};

/// One supervised example. The input layout is exactly
/// [u(n); u(n-1); ...; u(n-d_u); y(n-1); ...; y(n-d_y)].
struct LaggedSample {
    std::vector<double> input;
    double target = 0.0;
    std::size_t origin = 0;  // ordinal of the target record
};

enum class LoopMode { open, closed };

LoopMode parse_loop_mode(const std::string& s);
std::string loop_mode_name(LoopMode mode);

/// Min/max scaling of features and target to [-1,1]. Fitted on training rows
/// only; constant features map to 0.
class Normalizer {
public:
    Normalizer() = default;
    Normalizer(std::vector<double> feat_min, std::vector<double> feat_max,
               double target_min, double target_max);

    std::size_t feature_count() const { return feat_min_.size(); }

    std::vector<double> transform_features(const std::vector<double>& raw) const;
    std::vector<double> inverse_features(const std::vector<double>& scaled) const;
    double normalize_target(double raw) const;
    double denormalize_target(double scaled) const;

    const std::vector<double>& feature_min() const { return feat_min_; }
    const std::vector<double>& feature_max() const { return feat_max_; }
    double target_min() const { return tgt_min_; }
    double target_max() const { return tgt_max_; }

private:
    std::vector<double> feat_min_, feat_max_;
    double tgt_min_ = 0.0, tgt_max_ = 0.0;
};

/// Identity feature scaling for p features already in [-1,1], with the
/// standard [1,5] MOS target scaling. Handy for synthetic fixtures.
Normalizer identity_normalizer(std::size_t p);

/// Fold assignment per record: seeded shuffle, then round-robin.
struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;  // fold index per ordinal
    std::uint64_t seed = 0;

    std::vector<std::size_t> test_ordinals(std::size_t fold) const;
    std::vector<std::size_t> train_ordinals(std::size_t fold) const;
};

/// Reads a CSV with a header row. Column names are matched case-insensitively
/// after stripping spaces; extra columns are ignored. Records come back in
/// file order, or sorted ascending (stable) by `order_by` when given; ordinals
/// are assigned 0..n-1 after ordering. The target column may be absent, in
/// which case every record has no MOS.
std::vector<QosRecord> load_csv(const std::string& path, const FeatureSchema& schema,
                                const std::optional<std::string>& order_by = std::nullopt);

/// Reads every column of a CSV as a feature except `target`, which becomes
/// the MOS column. Errors on non-numeric cells.
std::pair<FeatureSchema, std::vector<QosRecord>> load_csv_all(
    const std::string& path, const std::string& target,
    const std::optional<std::string>& order_by = std::nullopt);

Normalizer fit_normalizer(const std::vector<QosRecord>& records,
                          const std::vector<std::size_t>& training_rows);

/// Copies records with features (and MOS, where present) mapped to [-1,1].
std::vector<QosRecord> apply_normalizer(const Normalizer& norm,
                                        const std::vector<QosRecord>& records);

/// Builds one sample per n in [max(d_u,d_y), n_records). Open loop fills the
/// y-slots with ground-truth MOS of prior records (teacher forcing); closed
/// mode leaves 0 placeholders in the trailing d_y slots for runtime
/// substitution by model feedback.
std::vector<LaggedSample> make_lagged(const std::vector<QosRecord>& records, std::size_t d_u,
                                      std::size_t d_y, LoopMode mode);

FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

/// Deterministic 70/30 split of an index pool (seeded shuffle; the validation
/// part is 3/10 of the pool, floored, at least 1). Both halves come back
/// sorted ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    const std::vector<std::size_t>& pool, std::uint64_t seed);

/// One step of the synthetic fixture recursion. The feedback terms are
/// centered on the 2.5 midpoint so that constant-zero inputs hold the series
/// at 2.5 exactly.
double synth_recursion_step(double y_prev1, double y_prev2, double u1_now, double u2_prev);

/// Synthetic 2-feature series for oracle tests: exogenous inputs uniform on
/// [-1,1], target from synth_recursion_step plus Gaussian noise, clipped to
/// [1,5].
std::vector<QosRecord> synth_narx_series(std::size_t n, std::uint64_t seed, double noise_sd);

void write_fold_plan(const FoldPlan& plan, const std::string& path);

std::uint64_t fold_plan_hash(const FoldPlan& plan);

}  // namespace avqe
