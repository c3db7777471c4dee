#include "avqe/numerics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "avqe/errors.hpp"

namespace avqe {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DataError("matmul: dimension mismatch " + shape_str(a) + " * " + shape_str(b));
    }
    Matrix c(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw DataError("matvec: dimension mismatch " + shape_str(a) + " * vector of length " +
                        std::to_string(x.size()));
    }
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

Cholesky::Cholesky(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw NumericError("cholesky: matrix not square (" + shape_str(a) + ")");
    }
    const std::size_t n = a.rows();
    l_ = Matrix(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l_(j, k) * l_(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            throw NumericError("cholesky: matrix not positive definite at pivot " +
                               std::to_string(j));
        }
        const double ljj = std::sqrt(diag);
        l_(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double acc = a(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l_(i, k) * l_(j, k);
            l_(i, j) = acc / ljj;
        }
    }
}

std::vector<double> Cholesky::solve(std::span<const double> b) const {
    const std::size_t n = l_.rows();
    if (b.size() != n) {
        throw NumericError("cholesky solve: rhs length " + std::to_string(b.size()) +
                           " does not match matrix size " + std::to_string(n));
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = b[i];
        for (std::size_t k = 0; k < i; ++k) acc -= l_(i, k) * y[k];
        y[i] = acc / l_(i, i);
    }
    std::vector<double> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double acc = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) acc -= l_(k, ii) * x[k];
        x[ii] = acc / l_(ii, ii);
    }
    return x;
}

double Cholesky::inverse_trace() const {
    // A^-1 = L^-T L^-1, so tr(A^-1) = ||L^-1||_F^2. Columns of L^-1 come from
    // forward substitution against unit vectors.
    const std::size_t n = l_.rows();
    double trace = 0.0;
    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < j; ++i) col[i] = 0.0;
        col[j] = 1.0 / l_(j, j);
        for (std::size_t i = j + 1; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t k = j; k < i; ++k) acc -= l_(i, k) * col[k];
            col[i] = acc / l_(i, i);
        }
        for (std::size_t i = j; i < n; ++i) trace += col[i] * col[i];
    }
    return trace;
}

std::vector<double> solve_spd(const Matrix& a, std::span<const double> b) {
    if (a.rows() != a.cols() || a.rows() != b.size()) {
        throw NumericError("solve_spd: shape mismatch " + shape_str(a) + " with rhs length " +
                           std::to_string(b.size()));
    }
    Cholesky chol(a);
    std::vector<double> x = chol.solve(b);

    auto residual_inf = [&](const std::vector<double>& xv) {
        double r = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double acc = -b[i];
            for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * xv[j];
            r = std::max(r, std::abs(acc));
        }
        return r;
    };
    double bnorm = 0.0;
    for (double v : b) bnorm = std::max(bnorm, std::abs(v));
    const double bound = 1e-8 * bnorm;

    if (residual_inf(x) > bound) {
        // one pass of iterative refinement
        std::vector<double> r(a.rows());
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double acc = b[i];
            for (std::size_t j = 0; j < a.cols(); ++j) acc -= a(i, j) * x[j];
            r[i] = acc;
        }
        std::vector<double> dx = chol.solve(r);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
        if (residual_inf(x) > bound) {
            throw NumericError("solve_spd: residual bound not met, matrix singular to working precision");
        }
    }
    for (double v : x) {
        if (!std::isfinite(v)) throw NumericError("solve_spd: non-finite solution");
    }
    return x;
}

double tanh_act(double x) { return std::tanh(x); }

double tanh_deriv(double x) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
}

double linear_act(double x) { return x; }

double linear_deriv(double) { return 1.0; }

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     const std::vector<double>& x, double h) {
    if (!(h > 0.0)) throw DataError("finite_diff_grad: step must be positive");
    std::vector<double> g(x.size());
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " +
                               std::to_string(i));
        }
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

std::uint64_t Rng::next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

double Rng::normal() {
    double u1 = next_unit();
    const double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw DataError("Rng::below: bound must be positive");
    const std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x > limit);
    return x % n;
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
    Rng mixer(root ^ fnv1a64(tag));
    return mixer.next_u64();
}

double clip(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

}  // namespace avqe
