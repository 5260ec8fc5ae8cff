#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "error.hpp"

namespace msct {

using Vector = std::vector<double>;

// Dense row-major matrix. Sizes here are tiny (K x M with M around 14), so
// no expression templates or blocking.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows)
        , cols_(cols)
        , data_(rows * cols, fill)
    {
    }
    Matrix(std::initializer_list<std::initializer_list<double>> init)
    {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            require(row.size() == cols_, "ragged matrix initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Matrix identity(std::size_t n)
    {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    Matrix transpose() const
    {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c)
                t(c, r) = (*this)(r, c);
        return t;
    }

    double frobenius_norm() const
    {
        double s = 0.0;
        for (double v : data_)
            s += v * v;
        return std::sqrt(s);
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b)
{
    require(a.cols() == b.rows(), "matrix product shape mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j)
                c(i, j) += aik * b(k, j);
        }
    return c;
}

inline Vector operator*(const Matrix& a, std::span<const double> x)
{
    require(a.cols() == x.size(), "matrix-vector shape mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j)
            s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

namespace detail {

    // Determinant by Gaussian elimination with partial pivoting. Consumes its argument.
    inline double det_lu(Matrix a)
    {
        const std::size_t n = a.rows();
        double det = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t piv = k;
            for (std::size_t i = k + 1; i < n; ++i)
                if (std::abs(a(i, k)) > std::abs(a(piv, k)))
                    piv = i;
            if (a(piv, k) == 0.0)
                return 0.0;
            if (piv != k) {
                for (std::size_t j = 0; j < n; ++j)
                    std::swap(a(k, j), a(piv, j));
                det = -det;
            }
            det *= a(k, k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const double f = a(i, k) / a(k, k);
                for (std::size_t j = k + 1; j < n; ++j)
                    a(i, j) -= f * a(k, j);
            }
        }
        return det;
    }

} // namespace detail

// Closed forms for n <= 3, LU with partial pivoting above that.
inline double determinant(const Matrix& a)
{
    require(a.square(), "determinant of non-square matrix");
    switch (a.rows()) {
    case 0:
        return 1.0;
    case 1:
        return a(0, 0);
    case 2:
        return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    case 3:
        return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
    default:
        return detail::det_lu(a);
    }
}

struct LuResult {
    Vector x;
    double det = 0.0;
    bool singular = false;
};

// Solves a x = b by LU with partial pivoting. A pivot whose magnitude falls
// below pivot_tol marks the system singular; x is then left empty.
inline LuResult lu_solve(Matrix a, Vector b, double pivot_tol = 0.0)
{
    require(a.square() && a.rows() == b.size(), "lu_solve shape mismatch");
    const std::size_t n = a.rows();
    LuResult out;
    out.det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k)))
                piv = i;
        if (!(std::abs(a(piv, k)) > pivot_tol)) {
            out.det = 0.0;
            out.singular = true;
            return out;
        }
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a(k, j), a(piv, j));
            std::swap(b[k], b[piv]);
            out.det = -out.det;
        }
        out.det *= a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            for (std::size_t j = k + 1; j < n; ++j)
                a(i, j) -= f * a(k, j);
            b[i] -= f * b[k];
        }
    }
    out.x.assign(n, 0.0);
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n; ++j)
            s -= a(k, j) * out.x[j];
        out.x[k] = s / a(k, k);
    }
    return out;
}

inline double norm2(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

inline bool all_finite(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace msct
