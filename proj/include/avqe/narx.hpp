#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "avqe/dataset.hpp"
#include "avqe/numerics.hpp"

namespace avqe {

/// Network shape: p exogenous features tapped over d_u lags plus the current
/// step, d_y output feedback taps, and a single tanh hidden layer.
struct NarxTopology {
    std::size_t p = 1;
    std::size_t d_u = 0;
    std::size_t d_y = 0;
    std::size_t hidden = 1;

    std::size_t input_width() const { return p * (d_u + 1) + d_y; }
    void validate() const;
};

struct TrainingMeta {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double best_val_mse = std::numeric_limits<double>::quiet_NaN();
    // Open-loop MSE of the returned model over the full training file, in MOS
    // units after clipping. cmd_predict on the same file reproduces it.
    double final_train_mse = std::numeric_limits<double>::quiet_NaN();
    std::string config;
};

/// A trained (or freshly initialized) NARX network together with everything
/// needed to run it on raw records: scaling, schema and seed.
struct NarxModel {
    NarxTopology topology;
    Matrix w1;                // hidden x input_width
    std::vector<double> b1;   // hidden
    std::vector<double> w2;   // hidden
    double b2 = 0.0;
    Normalizer normalizer;
    FeatureSchema schema;
    std::uint64_t seed = 0;
    TrainingMeta meta;

    std::size_t weight_count() const;
    // Flattened parameter order is frozen: w1 row-major, b1, w2, b2.
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> theta);
};

/// Weights uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer, drawn
/// w1 row-major then w2 from the seeded generator; biases zero.
NarxModel init_model(const NarxTopology& topology, std::uint64_t seed);

/// y = w2 . tanh(w1 x + b1) + b2, in the normalized domain.
double forward_sample(const NarxModel& model, std::span<const double> input);

/// Estimates aligned with record positions: estimates[i] belongs to ordinal
/// first_ordinal + i.
struct ForwardTrace {
    std::size_t first_ordinal = 0;
    std::vector<double> estimates;
};

/// Teacher-forced pass over raw records: y-slots take ground-truth MOS of
/// prior records. Emits one estimate per ordinal >= max(d_u, d_y),
/// denormalized and clipped to [1,5].
ForwardTrace forward_open_loop(const NarxModel& model, const std::vector<QosRecord>& records);

/// Feedback pass: y-slots take the model's own prior normalized, pre-clip
/// estimates; slots before the first emission are seeded with the normalized
/// midpoint 0 (MOS 3.0). Emission starts at ordinal d_u.
ForwardTrace forward_closed_loop(const NarxModel& model, const std::vector<QosRecord>& records);

/// Standalone single-hidden-layer MLP path for the d_u = d_y = 0 case: raw
/// features in, clipped MOS out, without the lagging machinery.
double mlp_forward(const NarxModel& model, const std::vector<double>& raw_features);

/// Per-sample gradient of the network output w.r.t. every weight and bias,
/// columns in the frozen flatten() order.
Matrix jacobian(const NarxModel& model, const std::vector<LaggedSample>& samples);

void save_model(const NarxModel& model, const std::string& path);
NarxModel load_model(const std::string& path);

/// Tapped histories for streaming inference; pushes evict the oldest entry
/// beyond the declared lags. Entries are newest-first.
class DelayBuffer {
public:
    DelayBuffer(std::size_t input_lags, std::size_t output_lags)
        : input_lags_(input_lags), output_lags_(output_lags) {}

    void push_input(std::vector<double> features);
    void push_output(double y);

    const std::deque<std::vector<double>>& inputs() const { return inputs_; }
    const std::deque<double>& outputs() const { return outputs_; }

private:
    std::size_t input_lags_;
    std::size_t output_lags_;
    std::deque<std::vector<double>> inputs_;
    std::deque<double> outputs_;
};

}  // namespace avqe
