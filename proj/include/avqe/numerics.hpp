#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace avqe {

// Dense row-major matrix of 64-bit reals. Problem sizes here are tens to a
// few hundred weights, so plain triple loops beat any BLAS ceremony.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

// Cholesky factorization of a symmetric positive definite matrix.
// Throws NumericError when the matrix is not SPD to working precision.
class Cholesky {
public:
    explicit Cholesky(const Matrix& a);

    std::vector<double> solve(std::span<const double> b) const;

    // tr(A^-1), from the Frobenius norm of L^-1.
    double inverse_trace() const;

private:
    Matrix l_;
};

// Solves a*x = b for SPD a and checks the residual bound
// ||a*x - b||_inf <= 1e-8 * ||b||_inf, refining once before giving up.
std::vector<double> solve_spd(const Matrix& a, std::span<const double> b);

double tanh_act(double x);
double tanh_deriv(double x);
double linear_act(double x);
double linear_deriv(double x);

// Central-difference gradient (f(x+h e_i) - f(x-h e_i)) / (2h).
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     const std::vector<double>& x, double h);

// splitmix64. Fixed generator so a seed means the same draw sequence on
// every platform; the generator name is recorded in model files.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    double next_unit();  // uniform on [0, 1)
    double uniform(double lo, double hi);
    double normal();  // standard normal via Box-Muller
    std::uint64_t below(std::uint64_t n);  // unbiased integer in [0, n)

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view s);

// Child seed for a named purpose: one splitmix64 mix of (root xor FNV-1a(tag)).
// Draws made under one tag never shift when another tag is added.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);

double clip(double x, double lo, double hi);

}  // namespace avqe
