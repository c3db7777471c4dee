#include <algorithm>
#include <cmath>

#include "avqe/errors.hpp"
#include "avqe/numerics.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace avqe;

TEST_SUITE("numerics") {

TEST_CASE("matmul identity") {
    Matrix a(2, 2);
    a(0, 0) = 1; a(0, 1) = 2; a(1, 0) = 3; a(1, 1) = 4;
    const Matrix c = matmul(Matrix::identity(2), a);
    CHECK(c(0, 0) == 1.0);
    CHECK(c(0, 1) == 2.0);
    CHECK(c(1, 0) == 3.0);
    CHECK(c(1, 1) == 4.0);
}

TEST_CASE("matmul dot product") {
    Matrix a(1, 2), b(2, 1);
    a(0, 0) = 1; a(0, 1) = 2;
    b(0, 0) = 3; b(1, 0) = 4;
    const Matrix c = matmul(a, b);
    CHECK(c.rows() == 1);
    CHECK(c.cols() == 1);
    CHECK(c(0, 0) == 11.0);
}

TEST_CASE("matmul against triple-loop oracle") {
    Rng rng(11);
    Matrix a(5, 4), b(4, 3);
    for (double& v : a.data()) v = rng.uniform(-2, 2);
    for (double& v : b.data()) v = rng.uniform(-2, 2);
    const Matrix c = matmul(a, b);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double want = 0.0;
            for (std::size_t k = 0; k < 4; ++k) want += a(i, k) * b(k, j);
            CHECK(std::abs(c(i, j) - want) <= 1e-12);
        }
    }
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Matrix a(2, 3), b(2, 2);
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), DataError);
}

TEST_CASE("matmul associativity on random conforming triples") {
    Rng rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix a(3, 4), b(4, 2), c(2, 5);
        for (double& v : a.data()) v = rng.uniform(-1, 1);
        for (double& v : b.data()) v = rng.uniform(-1, 1);
        for (double& v : c.data()) v = rng.uniform(-1, 1);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.data().size(); ++i) {
            const double scale = std::max(1.0, std::abs(right.data()[i]));
            CHECK(std::abs(left.data()[i] - right.data()[i]) / scale <= 1e-9);
        }
    }
}

TEST_CASE("solve_spd identity") {
    const std::vector<double> b{1, 2, 3};
    const auto x = solve_spd(Matrix::identity(3), b);
    CHECK(x == b);
}

TEST_CASE("solve_spd diagonal") {
    Matrix a(2, 2);
    a(0, 0) = 2; a(1, 1) = 4;
    const auto x = solve_spd(a, std::vector<double>{2, 8});
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("solve_spd residual bound on random SPD") {
    Rng rng(21);
    const Matrix a = test::random_spd(6, rng);
    std::vector<double> b(6);
    for (double& v : b) v = rng.uniform(-3, 3);
    const auto x = solve_spd(a, b);
    double binf = 0.0, rinf = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        binf = std::max(binf, std::abs(b[i]));
        double acc = -b[i];
        for (std::size_t j = 0; j < 6; ++j) acc += a(i, j) * x[j];
        rinf = std::max(rinf, std::abs(acc));
    }
    CHECK(rinf <= 1e-8 * binf);
}

TEST_CASE("solve_spd round-trip recovers x*") {
    Rng rng(22);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 2 + rng.below(7);
        const Matrix a = test::random_spd(n, rng);
        std::vector<double> x_star(n);
        for (double& v : x_star) v = rng.uniform(-2, 2);
        const auto b = matvec(a, x_star);
        const auto x = solve_spd(a, b);
        double err = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            err += (x[i] - x_star[i]) * (x[i] - x_star[i]);
            norm += x_star[i] * x_star[i];
        }
        CHECK(std::sqrt(err) <= 1e-8 * std::max(1.0, std::sqrt(norm)));
    }
}

TEST_CASE("solve_spd rejects indefinite matrix") {
    Matrix a(2, 2);
    a(0, 0) = 1; a(0, 1) = 2; a(1, 0) = 2; a(1, 1) = 1;  // eigenvalues 3, -1
    CHECK_THROWS_AS(solve_spd(a, std::vector<double>{1, 1}), NumericError);
}

TEST_CASE("cholesky inverse trace matches unit-vector solves") {
    Rng rng(23);
    const Matrix a = test::random_spd(5, rng);
    const Cholesky chol(a);
    double want = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
        std::vector<double> e(5, 0.0);
        e[j] = 1.0;
        want += chol.solve(e)[j];
    }
    CHECK(chol.inverse_trace() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("activations") {
    CHECK(tanh_act(0.0) == 0.0);
    CHECK(linear_act(3.7) == 3.7);
    CHECK(linear_deriv(123.0) == 1.0);
    // derivative contract tanh' = 1 - tanh^2
    CHECK(tanh_deriv(0.8) == doctest::Approx(1.0 - std::tanh(0.8) * std::tanh(0.8)).epsilon(1e-15));
    // central finite difference at 0.5
    const double h = 1e-6;
    const double fd = (tanh_act(0.5 + h) - tanh_act(0.5 - h)) / (2 * h);
    CHECK(std::abs(tanh_deriv(0.5) - fd) <= 1e-8);
    CHECK(tanh_act(10.0) < 1.0);
    CHECK(tanh_act(-10.0) > -1.0);
}

TEST_CASE("finite_diff_grad quadratic") {
    auto f = [](const std::vector<double>& x) { return x[0] * x[0] + x[1] * x[1]; };
    const auto g = finite_diff_grad(f, {1.0, 2.0}, 1e-6);
    CHECK(std::abs(g[0] - 2.0) <= 1e-6);
    CHECK(std::abs(g[1] - 4.0) <= 1e-6);
}

TEST_CASE("finite_diff_grad constant function") {
    auto f = [](const std::vector<double>&) { return 4.2; };
    for (double gi : finite_diff_grad(f, {0.3, -0.7, 2.0}, 1e-6)) CHECK(gi == 0.0);
}

TEST_CASE("finite_diff_grad vs analytic derivative") {
    auto f = [](const std::vector<double>& x) { return std::sin(x[0]) * x[1]; };
    const std::vector<double> at{0.3, 0.7};
    const auto g = finite_diff_grad(f, at, 1e-6);
    CHECK(std::abs(g[0] - at[1] * std::cos(at[0])) <= 1e-7);
    CHECK(std::abs(g[1] - std::sin(at[0])) <= 1e-7);
}

TEST_CASE("finite_diff_grad rejects non-finite evaluations and bad steps") {
    auto f = [](const std::vector<double>& x) { return std::log(x[0]); };
    CHECK_THROWS_AS(finite_diff_grad(f, {0.0}, 1e-3), NumericError);
    auto ok = [](const std::vector<double>& x) { return x[0]; };
    CHECK_THROWS_AS(finite_diff_grad(ok, {1.0}, 0.0), DataError);
}

TEST_CASE("rng reproducibility over 1e4 draws") {
    Rng a(987654321), b(987654321);
    for (int i = 0; i < 10000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng uniform and below stay in range") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const auto k = rng.below(7);
        CHECK(k < 7);
    }
    CHECK_THROWS_AS(rng.below(0), DataError);
}

TEST_CASE("rng shuffle is a seeded permutation") {
    std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8}, v2 = v1, sorted = v1;
    Rng a(99), b(99);
    a.shuffle(v1);
    b.shuffle(v2);
    CHECK(v1 == v2);
    std::sort(v1.begin(), v1.end());
    CHECK(v1 == sorted);
}

TEST_CASE("rng normal moments are sane") {
    Rng rng(31);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("derive_seed separates purposes") {
    const auto folds = derive_seed(42, "folds");
    const auto init = derive_seed(42, "init");
    CHECK(folds != init);
    CHECK(derive_seed(42, "folds") == folds);
    CHECK(derive_seed(43, "folds") != folds);
}

TEST_CASE("clip") {
    CHECK(clip(0.5, 1, 5) == 1.0);
    CHECK(clip(5.3, 1, 5) == 5.0);
    CHECK(clip(3.2, 1, 5) == 3.2);
}

}  // TEST_SUITE
