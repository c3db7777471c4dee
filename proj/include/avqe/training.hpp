#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "avqe/narx.hpp"

namespace avqe {

struct TrainConfig {
    std::size_t max_epochs = 300;
    std::size_t patience = 30;   // epochs without validation improvement
    double mu0 = 1e-3;           // initial LM damping
    double mu_inc = 10.0;
    double mu_dec = 0.1;
    double mu_max = 1e10;
    double alpha0 = 0.0;         // weight-penalty hyperparameter
    double beta0 = 1.0;          // data-fit hyperparameter
    bool adapt_hyperparams = true;  // evidence-framework updates of alpha/beta

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    double test_mse = 0.0;  // NaN when no test set was given
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;  // effective parameters
    double mu = 0.0;
    double objective = 0.0;  // F = beta*E_D + alpha*E_W after the epoch
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::size_t stopping_epoch = 0;
    std::size_t best_epoch = 0;
    double best_val_mse = 0.0;
    std::string stop_reason;
};

/// Mean squared residual of the network over samples, in the samples' own
/// (normalized) domain. This is the exact quantity the validation trace and
/// the snapshot contract use.
double sample_mse(const NarxModel& model, const std::vector<LaggedSample>& samples);

/// Levenberg-Marquardt minimization of F = beta*E_D + alpha*E_W with
/// evidence-framework updates of alpha and beta after each accepted step and
/// validation-based early stopping. Returns the snapshot taken at the best
/// validation epoch.
std::pair<NarxModel, TrainReport> train(NarxModel model,
                                        const std::vector<LaggedSample>& train_samples,
                                        const std::vector<LaggedSample>& val_samples,
                                        const TrainConfig& config,
                                        const std::vector<LaggedSample>* test_samples = nullptr);

/// Effective number of parameters gamma = N_w - alpha * tr((beta J'J + alpha I)^-1),
/// evaluated at the model's current weights. At alpha = 0 this is exactly N_w.
double effective_parameters(const NarxModel& model, double alpha, double beta,
                            const std::vector<LaggedSample>& samples);

/// Per-epoch CSV: epoch,train_mse,val_mse,test_mse,alpha,beta,gamma,mu.
void write_train_report_csv(const TrainReport& report, const std::string& path,
                            const std::string& config_echo);

}  // namespace avqe
