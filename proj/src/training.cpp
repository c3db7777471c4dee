#include "avqe/training.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "avqe/errors.hpp"

namespace avqe {

namespace {

constexpr double kTiny = 1e-300;

std::vector<double> residuals(const NarxModel& model, const std::vector<LaggedSample>& samples) {
    std::vector<double> r(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        r[i] = forward_sample(model, samples[i].input) - samples[i].target;
    }
    return r;
}

double sum_squares(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

// J'J and J'r in one pass over the sample rows.
void normal_terms(const Matrix& jac, const std::vector<double>& r, Matrix& jtj,
                  std::vector<double>& jtr) {
    const std::size_t nw = jac.cols();
    jtj = Matrix(nw, nw, 0.0);
    jtr.assign(nw, 0.0);
    for (std::size_t i = 0; i < jac.rows(); ++i) {
        for (std::size_t a = 0; a < nw; ++a) {
            const double ja = jac(i, a);
            if (ja == 0.0) continue;
            jtr[a] += ja * r[i];
            for (std::size_t b = a; b < nw; ++b) jtj(a, b) += ja * jac(i, b);
        }
    }
    for (std::size_t a = 0; a < nw; ++a) {
        for (std::size_t b = 0; b < a; ++b) jtj(a, b) = jtj(b, a);
    }
}

double gamma_from_normal(const Matrix& jtj, double alpha, double beta, std::size_t nw) {
    if (alpha == 0.0) return static_cast<double>(nw);
    Matrix h = jtj;
    for (double& v : h.data()) v *= beta;
    for (std::size_t i = 0; i < nw; ++i) h(i, i) += alpha;
    const double trace = Cholesky(h).inverse_trace();
    double gamma = static_cast<double>(nw) - alpha * trace;
    // tolerate rounding at the ends of the valid range
    if (gamma < -1e-6 || gamma > static_cast<double>(nw) + 1e-6) {
        throw NumericError("effective parameters gamma=" + std::to_string(gamma) +
                           " outside [0, " + std::to_string(nw) + "]");
    }
    return clip(gamma, 0.0, static_cast<double>(nw));
}

}  // namespace

void TrainConfig::validate() const {
    if (max_epochs == 0) throw DataError("train config: max_epochs must be positive");
    if (patience == 0 || patience > max_epochs) {
        throw DataError("train config: patience must be in [1, max_epochs]");
    }
    if (!(mu0 > 0.0) || !(mu_inc > 1.0) || !(mu_dec > 0.0) || mu_dec >= 1.0 || !(mu_max > mu0)) {
        throw DataError("train config: invalid mu schedule");
    }
    if (alpha0 < 0.0 || !(beta0 > 0.0)) {
        throw DataError("train config: alpha0 must be >= 0 and beta0 > 0");
    }
}

double sample_mse(const NarxModel& model, const std::vector<LaggedSample>& samples) {
    if (samples.empty()) throw DataError("sample_mse: empty sample set");
    double acc = 0.0;
    for (const auto& s : samples) {
        const double d = forward_sample(model, s.input) - s.target;
        acc += d * d;
    }
    return acc / static_cast<double>(samples.size());
}

std::pair<NarxModel, TrainReport> train(NarxModel model,
                                        const std::vector<LaggedSample>& train_samples,
                                        const std::vector<LaggedSample>& val_samples,
                                        const TrainConfig& config,
                                        const std::vector<LaggedSample>* test_samples) {
    config.validate();
    if (train_samples.empty() || val_samples.empty()) {
        throw DataError("train: training and validation sets must be non-empty");
    }
    {
        std::set<std::size_t> train_origins;
        for (const auto& s : train_samples) train_origins.insert(s.origin);
        for (const auto& s : val_samples) {
            if (train_origins.count(s.origin)) {
                throw DataError("train: validation sample with origin " + std::to_string(s.origin) +
                                " also appears in the training set");
            }
        }
    }

    const std::size_t nw = model.weight_count();
    const double ns = static_cast<double>(train_samples.size());
    double alpha = config.alpha0;
    double beta = config.beta0;
    double mu = config.mu0;

    std::vector<double> theta = model.flatten();
    std::vector<double> r = residuals(model, train_samples);
    double e_data = sum_squares(r);
    double e_weights = sum_squares(theta);
    double objective = beta * e_data + alpha * e_weights;
    if (!std::isfinite(objective)) {
        throw NumericError("train: non-finite objective at start (E_D=" + std::to_string(e_data) +
                           ", E_W=" + std::to_string(e_weights) + ")");
    }

    TrainReport report;
    double best_val = sample_mse(model, val_samples);
    std::vector<double> best_theta = theta;
    std::size_t best_epoch = 0;
    std::size_t stale_epochs = 0;

    Matrix jtj;
    std::vector<double> jtr;
    NarxModel candidate = model;

    std::size_t epoch = 0;
    for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const Matrix jac = jacobian(model, train_samples);
        normal_terms(jac, r, jtj, jtr);

        bool accepted = false;
        std::vector<double> theta_new;
        std::vector<double> r_new;
        double e_data_new = 0.0, e_weights_new = 0.0, objective_new = 0.0;

        while (true) {
            Matrix h = jtj;
            for (double& v : h.data()) v *= beta;
            for (std::size_t i = 0; i < nw; ++i) h(i, i) += alpha + mu;

            bool solved = true;
            std::vector<double> step;
            try {
                std::vector<double> g(nw);
                for (std::size_t i = 0; i < nw; ++i) g[i] = beta * jtr[i] + alpha * theta[i];
                step = Cholesky(h).solve(g);
            } catch (const NumericError&) {
                solved = false;
            }

            if (solved) {
                theta_new = theta;
                for (std::size_t i = 0; i < nw; ++i) theta_new[i] -= step[i];
                candidate.unflatten(theta_new);
                r_new = residuals(candidate, train_samples);
                e_data_new = sum_squares(r_new);
                e_weights_new = sum_squares(theta_new);
                objective_new = beta * e_data_new + alpha * e_weights_new;
                if (std::isfinite(objective_new) && objective_new < objective) {
                    accepted = true;
                    mu = std::max(mu * config.mu_dec, 1e-20);
                    break;
                }
            }

            if (mu >= config.mu_max) {
                if (!solved) {
                    throw NumericError("train: normal matrix singular at mu_max (epoch " +
                                       std::to_string(epoch) + ")");
                }
                break;  // no acceptable step at maximum damping
            }
            mu *= config.mu_inc;
        }

        if (!accepted) {
            report.stop_reason = "mu_max";
            --epoch;
            break;
        }

        theta = theta_new;
        model.unflatten(theta);
        r = std::move(r_new);
        e_data = e_data_new;
        e_weights = e_weights_new;

        // Evidence-framework update with the Jacobian already computed this
        // epoch. The beta update is skipped while gamma >= N_samples (more
        // constrained parameters than data points), where the estimator is
        // undefined.
        const double gamma = gamma_from_normal(jtj, alpha, beta, nw);
        if (config.adapt_hyperparams) {
            if (e_weights > kTiny) alpha = gamma / (2.0 * e_weights);
            if (e_data > kTiny && ns > gamma) beta = (ns - gamma) / (2.0 * e_data);
        }
        objective = beta * e_data + alpha * e_weights;
        if (!std::isfinite(objective)) {
            throw NumericError("train: non-finite objective after epoch " + std::to_string(epoch) +
                               " (E_D=" + std::to_string(e_data) + ", E_W=" +
                               std::to_string(e_weights) + ", alpha=" + std::to_string(alpha) +
                               ", beta=" + std::to_string(beta) + ")");
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_mse = e_data / ns;
        stats.val_mse = sample_mse(model, val_samples);
        stats.test_mse = test_samples ? sample_mse(model, *test_samples)
                                      : std::numeric_limits<double>::quiet_NaN();
        stats.alpha = alpha;
        stats.beta = beta;
        stats.gamma = gamma;
        stats.mu = mu;
        stats.objective = objective;
        report.epochs.push_back(stats);

        if (stats.val_mse < best_val) {
            best_val = stats.val_mse;
            best_theta = theta;
            best_epoch = epoch;
            stale_epochs = 0;
        } else {
            ++stale_epochs;
        }
        if (stale_epochs >= config.patience) {
            report.stop_reason = "patience";
            break;
        }
    }
    if (report.stop_reason.empty()) {
        report.stop_reason = "max_epochs";
        epoch = config.max_epochs;
    }

    report.stopping_epoch = std::min(epoch, config.max_epochs);
    report.best_epoch = best_epoch;
    report.best_val_mse = best_val;

    model.unflatten(best_theta);
    model.meta.epochs_run = report.stopping_epoch;
    model.meta.best_epoch = best_epoch;
    model.meta.best_val_mse = best_val;
    return {std::move(model), std::move(report)};
}

double effective_parameters(const NarxModel& model, double alpha, double beta,
                            const std::vector<LaggedSample>& samples) {
    if (alpha < 0.0) throw DataError("effective_parameters: alpha must be >= 0");
    if (!(beta > 0.0)) throw DataError("effective_parameters: beta must be > 0");
    const std::size_t nw = model.weight_count();
    if (alpha == 0.0) return static_cast<double>(nw);
    const Matrix jac = jacobian(model, samples);
    Matrix jtj;
    std::vector<double> jtr;
    const std::vector<double> r(samples.size(), 0.0);
    normal_terms(jac, r, jtj, jtr);
    return gamma_from_normal(jtj, alpha, beta, nw);
}

void write_train_report_csv(const TrainReport& report, const std::string& path,
                            const std::string& config_echo) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    if (!config_echo.empty()) out << "# " << config_echo << "\n";
    out << "epoch,train_mse,val_mse,test_mse,alpha,beta,gamma,mu\n";
    char buf[256];
    for (const auto& e : report.epochs) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                      e.train_mse, e.val_mse, e.test_mse, e.alpha, e.beta, e.gamma, e.mu);
        out << buf;
    }
}

}  // namespace avqe
