#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "kangura/error.hpp"

namespace kangura {

// Dense row-major matrix of doubles. Double precision is used throughout
// training and verification; there is no single-precision path.
class Matrix {
public:
    Matrix() = default;

    Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
        if (rows < 0 || cols < 0) throw DomainError("Matrix: negative dimension");
        data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0);
    }

    Matrix(int rows, int cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows < 0 || cols < 0) throw DomainError("Matrix: negative dimension");
        if (data_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
            throw DomainError("Matrix: data length does not match rows*cols");
        for (double v : data_)
            if (!std::isfinite(v)) throw DomainError("Matrix: non-finite entry");
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(int r, int c) {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return data_[static_cast<std::size_t>(r) * cols_ + c];
    }
    double operator()(int r, int c) const {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return data_[static_cast<std::size_t>(r) * cols_ + c];
    }

    std::span<double> row(int r) {
        assert(r >= 0 && r < rows_);
        return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
    }
    std::span<const double> row(int r) const {
        assert(r >= 0 && r < rows_);
        return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o, "operator+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        require_same_shape(o, "operator-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    void require_same_shape(const Matrix& o, const char* what) const {
        if (!same_shape(o)) throw DomainError(std::string(what) + ": shape mismatch");
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DomainError("matmul: inner dimensions disagree");
    Matrix c(a.rows(), b.cols());
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int i = 0; i < n; ++i) {
        const double* ai = a.data() + static_cast<std::size_t>(i) * k;
        double* ci = c.data() + static_cast<std::size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b.data() + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
    return c;
}

// C = A^T * B
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DomainError("matmul_at_b: row counts disagree");
    Matrix c(a.cols(), b.cols());
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int p = 0; p < n; ++p) {
        const double* ap = a.data() + static_cast<std::size_t>(p) * k;
        const double* bp = b.data() + static_cast<std::size_t>(p) * m;
        for (int i = 0; i < k; ++i) {
            const double av = ap[i];
            if (av == 0.0) continue;
            double* ci = c.data() + static_cast<std::size_t>(i) * m;
            for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
    return c;
}

// C = A * B^T
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw DomainError("matmul_a_bt: column counts disagree");
    Matrix c(a.rows(), b.rows());
    const int n = a.rows(), k = a.cols(), m = b.rows();
    for (int i = 0; i < n; ++i) {
        const double* ai = a.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < m; ++j) {
            const double* bj = b.data() + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            c(i, j) = s;
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.storage()) s += v * v;
    return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.storage()) m = std::max(m, std::fabs(v));
    return m;
}

inline bool all_finite(const Matrix& a) {
    for (double v : a.storage())
        if (!std::isfinite(v)) return false;
    return true;
}

// Throws NumericError naming the pipeline stage if any entry is NaN/Inf.
inline void ensure_finite(const Matrix& a, const char* stage) {
    if (!all_finite(a)) throw NumericError(std::string("non-finite values at stage: ") + stage);
}

}  // namespace kangura
