#include <cmath>
#include <numeric>

#include "avqe/errors.hpp"
#include "avqe/training.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace avqe;

namespace {

// Normalized supervised samples from a synthetic series, split into
// chronological train/validation blocks (good enough for unit tests).
struct Fixture {
    NarxModel model;
    std::vector<LaggedSample> train;
    std::vector<LaggedSample> val;
};

Fixture make_fixture(std::size_t n, std::uint64_t seed, double noise_sd, NarxTopology topo) {
    const auto records = synth_narx_series(n, seed, noise_sd);
    std::vector<std::size_t> rows(records.size());
    std::iota(rows.begin(), rows.end(), 0);
    const Normalizer norm = fit_normalizer(records, rows);
    const auto samples = make_lagged(apply_normalizer(norm, records), topo.d_u, topo.d_y,
                                     LoopMode::open);
    Fixture fx{init_model(topo, derive_seed(seed, "init")), {}, {}};
    fx.model.normalizer = norm;
    const std::size_t cut = samples.size() * 7 / 10;
    fx.train.assign(samples.begin(), samples.begin() + cut);
    fx.val.assign(samples.begin() + cut, samples.end());
    return fx;
}

double weight_norm(const NarxModel& m) {
    double acc = 0.0;
    for (double w : m.flatten()) acc += w * w;
    return std::sqrt(acc);
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.patience = 0;
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg = TrainConfig{};
    cfg.patience = cfg.max_epochs + 1;
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg = TrainConfig{};
    cfg.mu_dec = 1.5;
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg = TrainConfig{};
    cfg.beta0 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), DataError);
}

TEST_CASE("train requires non-empty disjoint sets") {
    Fixture fx = make_fixture(60, 1, 0.05, {2, 1, 1, 2});
    TrainConfig cfg;
    CHECK_THROWS_AS(train(fx.model, {}, fx.val, cfg), DataError);
    CHECK_THROWS_AS(train(fx.model, fx.train, {}, cfg), DataError);
    auto overlapping = fx.val;
    overlapping.push_back(fx.train.front());
    CHECK_THROWS_AS(train(fx.model, fx.train, overlapping, cfg), DataError);
}

TEST_CASE("zero-residual start accepts no step") {
    // constant-target data; model with b2 equal to the normalized target
    // interpolates exactly, so no step can strictly decrease F
    std::vector<LaggedSample> samples;
    Rng rng(3);
    for (std::size_t i = 0; i < 20; ++i) {
        LaggedSample s;
        s.input = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        s.target = 0.25;
        s.origin = i;
        samples.push_back(s);
    }
    NarxModel m = init_model({2, 0, 0, 2}, 4);
    for (double& w : m.w1.data()) w = 0.0;
    for (double& w : m.w2) w = 0.0;
    m.b2 = 0.25;

    std::vector<LaggedSample> tr(samples.begin(), samples.begin() + 14);
    std::vector<LaggedSample> va(samples.begin() + 14, samples.end());
    TrainConfig cfg;
    cfg.alpha0 = 0.0;
    auto [trained, report] = train(m, tr, va, cfg);
    CHECK(report.epochs.empty());
    CHECK(report.stop_reason == "mu_max");
    CHECK(report.stopping_epoch == 0);
    CHECK(trained.flatten() == m.flatten());  // model unchanged
    CHECK(sample_mse(trained, tr) == 0.0);
}

TEST_CASE("objective strictly decreases over accepted steps with fixed hyperparameters") {
    Fixture fx = make_fixture(150, 5, 0.05, {2, 1, 2, 3});
    TrainConfig cfg;
    cfg.adapt_hyperparams = false;
    cfg.alpha0 = 0.01;
    cfg.max_epochs = 40;
    cfg.patience = 40;
    auto [trained, report] = train(fx.model, fx.train, fx.val, cfg);
    REQUIRE(report.epochs.size() > 3);
    for (std::size_t i = 1; i < report.epochs.size(); ++i) {
        CHECK(report.epochs[i].objective < report.epochs[i - 1].objective);
    }
    // train_mse is E_D / N at each accepted step, so it is non-increasing
    // whenever alpha = 0; with alpha > 0 small wobbles are possible, but the
    // objective ordering above is the contract.
}

TEST_CASE("training error non-increasing over accepted steps at alpha 0") {
    Fixture fx = make_fixture(150, 6, 0.05, {2, 1, 2, 3});
    TrainConfig cfg;
    cfg.adapt_hyperparams = false;
    cfg.alpha0 = 0.0;
    cfg.max_epochs = 40;
    cfg.patience = 40;
    auto [trained, report] = train(fx.model, fx.train, fx.val, cfg);
    for (std::size_t i = 1; i < report.epochs.size(); ++i) {
        CHECK(report.epochs[i].train_mse <= report.epochs[i - 1].train_mse);
    }
}

TEST_CASE("synthetic oracle recovery reaches low validation error") {
    Fixture fx = make_fixture(800, 7, 0.05, {2, 1, 2, 4});
    TrainConfig cfg;
    cfg.max_epochs = 200;
    auto [trained, report] = train(fx.model, fx.train, fx.val, cfg);
    // the generator is exactly representable; residual goes to the noise level
    // (normalized target range ~[-1,1] over a ~2.0 MOS span, so scales match)
    CHECK(report.best_val_mse < 3.0 * 0.05 * 0.05);
}

TEST_CASE("snapshot correctness: returned model reproduces best validation error") {
    Fixture fx = make_fixture(200, 8, 0.1, {2, 1, 1, 3});
    TrainConfig cfg;
    cfg.max_epochs = 60;
    auto [trained, report] = train(fx.model, fx.train, fx.val, cfg);
    CHECK(sample_mse(trained, fx.val) == report.best_val_mse);  // exact
    CHECK(report.best_epoch <= report.stopping_epoch);
    CHECK(trained.meta.best_epoch == report.best_epoch);
    CHECK(trained.meta.epochs_run == report.stopping_epoch);
}

TEST_CASE("determinism: identical inputs give identical traces and weights") {
    Fixture a = make_fixture(150, 9, 0.05, {2, 1, 2, 3});
    Fixture b = make_fixture(150, 9, 0.05, {2, 1, 2, 3});
    TrainConfig cfg;
    cfg.max_epochs = 50;
    auto [model_a, report_a] = train(a.model, a.train, a.val, cfg);
    auto [model_b, report_b] = train(b.model, b.train, b.val, cfg);
    CHECK(model_a.flatten() == model_b.flatten());
    REQUIRE(report_a.epochs.size() == report_b.epochs.size());
    for (std::size_t i = 0; i < report_a.epochs.size(); ++i) {
        CHECK(report_a.epochs[i].train_mse == report_b.epochs[i].train_mse);
        CHECK(report_a.epochs[i].alpha == report_b.epochs[i].alpha);
        CHECK(report_a.epochs[i].mu == report_b.epochs[i].mu);
    }
}

TEST_CASE("large clamped alpha shrinks the trained weight norm") {
    Fixture fx = make_fixture(200, 10, 0.05, {2, 1, 2, 3});
    TrainConfig plain;
    plain.adapt_hyperparams = false;
    plain.alpha0 = 0.0;
    plain.max_epochs = 60;
    TrainConfig reg = plain;
    reg.alpha0 = 50.0;
    auto [m_plain, r_plain] = train(fx.model, fx.train, fx.val, plain);
    auto [m_reg, r_reg] = train(fx.model, fx.train, fx.val, reg);
    CHECK(weight_norm(m_reg) < weight_norm(m_plain));
}

TEST_CASE("gamma stays in [0, N_w] and adapts") {
    Fixture fx = make_fixture(300, 11, 0.05, {2, 1, 2, 4});
    TrainConfig cfg;
    cfg.max_epochs = 80;
    auto [trained, report] = train(fx.model, fx.train, fx.val, cfg);
    const double nw = static_cast<double>(trained.weight_count());
    REQUIRE(!report.epochs.empty());
    for (const auto& e : report.epochs) {
        CHECK(e.gamma >= 0.0);
        CHECK(e.gamma <= nw);
        CHECK(e.alpha >= 0.0);
        CHECK(e.beta > 0.0);
    }
    // after adaptation kicks in, gamma should sit strictly inside the range
    CHECK(report.epochs.back().gamma < nw);
}

TEST_CASE("effective_parameters formula endpoints") {
    Fixture fx = make_fixture(100, 12, 0.05, {2, 1, 1, 3});
    const double nw = static_cast<double>(fx.model.weight_count());
    CHECK(effective_parameters(fx.model, 0.0, 1.0, fx.train) == nw);
    CHECK(effective_parameters(fx.model, 1e12, 1.0, fx.train) < 0.5);
    CHECK_THROWS_AS(effective_parameters(fx.model, -1.0, 1.0, fx.train), DataError);
    CHECK_THROWS_AS(effective_parameters(fx.model, 1.0, 0.0, fx.train), DataError);
}

TEST_CASE("effective_parameters matches the eigenvalue-sum oracle") {
    Fixture fx = make_fixture(80, 13, 0.05, {2, 1, 1, 2});
    const Matrix jac = jacobian(fx.model, fx.train);
    const Matrix jtj = matmul(transpose(jac), jac);
    const auto eig = test::sym_eigenvalues(jtj);
    for (double alpha : {0.5, 2.0, 10.0}) {
        for (double beta : {1.0, 4.0}) {
            double want = 0.0;
            for (double lambda : eig) {
                const double l = std::max(lambda, 0.0);  // rounding guard
                want += l / (l + alpha / beta);
            }
            const double got = effective_parameters(fx.model, alpha, beta, fx.train);
            CHECK(std::abs(got - want) <= 1e-8 * std::max(1.0, want));
        }
    }
}

TEST_CASE("patience stops training") {
    Fixture fx = make_fixture(120, 14, 0.3, {2, 1, 1, 3});
    TrainConfig cfg;
    cfg.max_epochs = 300;
    cfg.patience = 5;
    auto [trained, report] = train(fx.model, fx.train, fx.val, cfg);
    CHECK((report.stop_reason == "patience" || report.stop_reason == "mu_max"));
    CHECK(report.stopping_epoch < 300);
}

TEST_CASE("train report CSV has the pinned columns") {
    Fixture fx = make_fixture(80, 15, 0.1, {2, 1, 1, 2});
    TrainConfig cfg;
    cfg.max_epochs = 10;
    cfg.patience = 10;
    auto [trained, report] = train(fx.model, fx.train, fx.val, cfg, &fx.val);
    test::TempDir dir("report");
    write_train_report_csv(report, dir.file("r.csv"), "cmd=test");
    const std::string text = test::read_file(dir.file("r.csv"));
    CHECK(text.rfind("# cmd=test\n", 0) == 0);
    CHECK(text.find("epoch,train_mse,val_mse,test_mse,alpha,beta,gamma,mu\n") != std::string::npos);
    std::size_t lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == report.epochs.size() + 2);
}

}  // TEST_SUITE
