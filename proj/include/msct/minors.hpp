#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "spectral_model.hpp"

namespace msct {

/// Strictly increasing set of 1-based indices drawn from {1, ..., n}.
class IndexSet {
public:
    IndexSet() = default;
    IndexSet(std::size_t n, std::vector<std::size_t> indices)
        : n_(n)
        , idx_(std::move(indices))
    {
        for (std::size_t i = 0; i < idx_.size(); ++i) {
            require(idx_[i] >= 1 && idx_[i] <= n_, "index " + std::to_string(idx_[i]) + " outside <" + std::to_string(n_) + ">");
            require(i == 0 || idx_[i - 1] < idx_[i], "index set must be strictly increasing");
        }
    }

    static IndexSet all(std::size_t n)
    {
        std::vector<std::size_t> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = i + 1;
        return IndexSet(n, std::move(v));
    }

    std::size_t universe() const noexcept { return n_; }
    std::size_t size() const noexcept { return idx_.size(); }
    bool empty() const noexcept { return idx_.empty(); }
    std::size_t operator[](std::size_t i) const noexcept { return idx_[i]; }
    // 0-based position of the i-th member
    std::size_t offset(std::size_t i) const noexcept { return idx_[i] - 1; }
    const std::vector<std::size_t>& indices() const noexcept { return idx_; }
    auto begin() const noexcept { return idx_.begin(); }
    auto end() const noexcept { return idx_.end(); }

    bool contains(std::size_t index) const noexcept
    {
        for (auto i : idx_)
            if (i == index)
                return true;
        return false;
    }

    std::string str() const
    {
        std::string s = "{";
        for (std::size_t i = 0; i < idx_.size(); ++i)
            s += (i ? "," : "") + std::to_string(idx_[i]);
        return s + "}";
    }

    bool operator==(const IndexSet&) const = default;
    auto operator<=>(const IndexSet& o) const { return idx_ <=> o.idx_; }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> idx_;
};

/// All k-subsets of <n> in lexicographic order.
inline std::vector<IndexSet> subsets_of_size(std::size_t n, std::size_t k)
{
    std::vector<IndexSet> out;
    if (k > n)
        return out;
    std::vector<std::size_t> c(k);
    for (std::size_t i = 0; i < k; ++i)
        c[i] = i + 1;
    while (true) {
        out.emplace_back(n, c);
        std::size_t i = k;
        while (i > 0 && c[i - 1] == n - k + i)
            --i;
        if (i == 0)
            break;
        ++c[i - 1];
        for (std::size_t j = i; j < k; ++j)
            c[j] = c[j - 1] + 1;
    }
    return out;
}

/// Every non-empty subset of <n>, ordered by size then lexicographically.
inline std::vector<IndexSet> nonempty_subsets(std::size_t n)
{
    std::vector<IndexSet> out;
    for (std::size_t k = 1; k <= n; ++k) {
        auto level = subsets_of_size(n, k);
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

inline Matrix submatrix(const Matrix& a, const IndexSet& rows, const IndexSet& cols)
{
    Matrix s(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] <= a.rows(), "row index out of range");
        for (std::size_t j = 0; j < cols.size(); ++j) {
            require(cols[j] <= a.cols(), "column index out of range");
            s(i, j) = a(rows.offset(i), cols.offset(j));
        }
    }
    return s;
}

/// det(A[rows, cols]).
inline double minor(const Matrix& a, const IndexSet& rows, const IndexSet& cols)
{
    require(rows.size() == cols.size(), "minor needs #rows == #cols");
    require(!rows.empty(), "minor of an empty index set");
    return determinant(submatrix(a, rows, cols));
}

/// sum over #beta = K of det(A[<K>, beta]) det(C[<K>, beta]); equals det(A C^T).
inline double cauchy_binet_det(const Matrix& a, const Matrix& c)
{
    require(a.rows() == c.rows() && a.cols() == c.cols(), "Cauchy-Binet needs equally shaped matrices");
    require(a.rows() <= a.cols(), "Cauchy-Binet needs K <= M");
    const IndexSet rows = IndexSet::all(a.rows());
    double sum = 0.0;
    for (const auto& beta : subsets_of_size(a.cols(), a.rows()))
        sum += minor(a, rows, beta) * minor(c, rows, beta);
    return sum;
}

/// Principal minor det(G(x)[alpha]) of G(x) = S diag(zeta(x)) B^T, expanded as
/// sum over #beta = #alpha of prod_{i in beta} zeta_i(x) det(S[alpha,beta]) det(B[alpha,beta]).
inline double principal_minor_G(const SpectralModel& model, std::span<const double> x, const IndexSet& alpha)
{
    require(!alpha.empty(), "principal minor of an empty index set");
    require(alpha.indices().back() <= model.num_spectra(), "alpha must be a subset of <Q>");
    const Vector z = attenuation_factors(model, x);
    double sum = 0.0;
    for (const auto& beta : subsets_of_size(model.num_bins(), alpha.size())) {
        double weight = 1.0;
        for (auto i : beta)
            weight *= z[i - 1];
        sum += weight * minor(model.spectra(), alpha, beta) * minor(model.mac(), alpha, beta);
    }
    return sum;
}

enum class PClass { p_matrix, weak_p_matrix, neither };

inline const char* to_string(PClass c)
{
    switch (c) {
    case PClass::p_matrix: return "P";
    case PClass::weak_p_matrix: return "weak-P";
    case PClass::neither: return "neither";
    }
    return "?";
}

inline constexpr std::size_t kMaxPClassifySize = 12;

inline double default_sign_tolerance(const Matrix& a) { return 1e-12 * std::max(1.0, a.frobenius_norm()); }

/// Exhaustive principal-minor sign test. Negative tol selects the default,
/// 1e-12 scaled by the Frobenius norm.
inline PClass classify_p_matrix(const Matrix& a, double tol = -1.0)
{
    require(a.square(), "P-matrix classification needs a square matrix");
    require(a.rows() >= 1, "empty matrix");
    if (a.rows() > kMaxPClassifySize)
        throw Error(ErrorKind::size_limit, "P-matrix classification limited to n <= 12");
    if (tol < 0.0)
        tol = default_sign_tolerance(a);
    const std::size_t n = a.rows();
    bool all_positive = true;
    bool others_nonneg = true;
    double full = 0.0;
    for (const auto& alpha : nonempty_subsets(n)) {
        const double d = minor(a, alpha, alpha);
        if (alpha.size() == n) {
            full = d;
        } else if (d < -tol) {
            others_nonneg = false;
        }
        if (!(d > tol))
            all_positive = false;
    }
    if (all_positive)
        return PClass::p_matrix;
    if (full > tol && others_nonneg)
        return PClass::weak_p_matrix;
    return PClass::neither;
}

} // namespace msct
