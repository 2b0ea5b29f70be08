#include "oac/matrix.hpp"

#include "oac/errors.hpp"

#include <algorithm>
#include <cmath>

namespace oac {

bool Matrix::is_symmetric(double tol) const {
    if (rows_ != cols_) return false;
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i + 1; j < cols_; ++j)
            if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    return true;
}

double Matrix::max_abs_diff(const Matrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_)
        throw ConfigError("matrix shape mismatch in max_abs_diff");
    double m = 0.0;
    for (std::size_t k = 0; k < a_.size(); ++k)
        m = std::max(m, std::abs(a_[k] - other.a_[k]));
    return m;
}

Matrix Matrix::operator+(const Matrix& o) const {
    Matrix r = *this;
    r += o;
    return r;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_)
        throw ConfigError("matrix shape mismatch in +=");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
}

Matrix Matrix::operator-(const Matrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
        throw ConfigError("matrix shape mismatch in -");
    Matrix r = *this;
    for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] -= o.a_[k];
    return r;
}

Matrix Matrix::operator*(double s) const {
    Matrix r = *this;
    for (auto& v : r.a_) v *= s;
    return r;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    const std::size_t n = a.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
}

} // namespace

std::vector<double> symmetric_eigenvalues(const Matrix& input, double tol, int max_sweeps) {
    if (input.rows() != input.cols())
        throw NotSymmetric("eigensolver requires a square matrix");
    const std::size_t n = input.rows();
    Matrix a = input;

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
    if (scale == 0.0) return std::vector<double>(n, 0.0);
    const double stop = tol * scale * static_cast<double>(n);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_diagonal_norm(a) <= stop) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= tol * scale * 1e-3) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta < 0.0) t = -t;
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                const double app = a(p, p), aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = a(r, p), arq = a(r, q);
                    a(r, p) = arp - s * (arq + tau * arp);
                    a(p, r) = a(r, p);
                    a(r, q) = arq + s * (arp - tau * arq);
                    a(q, r) = a(r, q);
                }
            }
        }
    }

    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = a(i, i);
    std::sort(vals.begin(), vals.end());
    return vals;
}

double spectral_norm_symmetric(const Matrix& a) {
    const auto vals = symmetric_eigenvalues(a);
    double m = 0.0;
    for (double v : vals) m = std::max(m, std::abs(v));
    return m;
}

} // namespace oac
