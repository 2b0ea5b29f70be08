#pragma once

#include <cstddef>
#include <vector>

namespace oac {

/// Small dense row-major matrix. Everything in this project is tiny
/// (a few hundred rows at most), so no sparsity and no BLAS.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    const std::vector<double>& data() const { return a_; }
    std::vector<double>& data() { return a_; }

    bool is_symmetric(double tol) const;

    /// max_ij |a_ij - b_ij|; matrices must have equal shape.
    double max_abs_diff(const Matrix& other) const;

    Matrix operator+(const Matrix& o) const;
    Matrix operator-(const Matrix& o) const;
    Matrix& operator+=(const Matrix& o);
    Matrix operator*(double s) const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

/// Eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi
/// rotations. Exactness over speed: tolerance on the off-diagonal
/// Frobenius norm relative to the matrix scale.
std::vector<double> symmetric_eigenvalues(const Matrix& a, double tol = 1e-12,
                                          int max_sweeps = 100);

/// Spectral 2-norm of a symmetric matrix (max |eigenvalue|).
double spectral_norm_symmetric(const Matrix& a);

} // namespace oac
