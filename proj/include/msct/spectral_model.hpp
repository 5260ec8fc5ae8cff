#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "builtin_data.hpp"
#include "error.hpp"
#include "matrix.hpp"

namespace msct {

// Named columns over energy bins, the in-memory form of the spectra/MAC CSV.
struct BinTable {
    std::vector<std::string> names;
    // one row per name, one column per energy bin
    Matrix values;
};

/// Spectral data model: spectra S (Q x M, rows are normalized spectra) and
/// basis mass attenuation coefficients B (K x M). Immutable once built.
class SpectralModel {
public:
    static constexpr double kDefaultZeroThreshold = 1e-8;
    static constexpr double kDefaultBinWidthKeV = 10.0;

    /// Validates the Q == K <= M shape, S >= 0, B > 0 and non-vanishing
    /// columns of S, then divides each spectrum by its sum.
    SpectralModel(Matrix spectra, Matrix mac, double delta_e_kev = kDefaultBinWidthKeV,
        double zero_threshold = kDefaultZeroThreshold)
        : SpectralModel(std::move(spectra), std::move(mac), delta_e_kev, zero_threshold, false)
    {
    }

    /// Closed-form toy models (e.g. S = B = I) have zero MAC entries. Allows
    /// B >= 0 as long as every material attenuates in some bin.
    static SpectralModel with_nonnegative_mac(Matrix spectra, Matrix mac, double delta_e_kev = kDefaultBinWidthKeV,
        double zero_threshold = kDefaultZeroThreshold)
    {
        return SpectralModel(std::move(spectra), std::move(mac), delta_e_kev, zero_threshold, true);
    }

private:
    SpectralModel(Matrix spectra, Matrix mac, double delta_e_kev, double zero_threshold, bool allow_zero_mac)
        : s_(std::move(spectra))
        , b_(std::move(mac))
        , delta_e_(delta_e_kev)
        , eps_(zero_threshold)
    {
        require(s_.rows() >= 1 && s_.cols() >= 1, "empty spectra matrix");
        require(s_.rows() == b_.rows(), "number of spectra must equal number of basis materials (Q == K)");
        require(s_.cols() == b_.cols(), "spectra and MAC tables disagree on the number of energy bins");
        require(s_.rows() <= s_.cols(), "need Q <= M");
        require(std::isfinite(eps_) && eps_ >= 0.0, "zero threshold must be a finite non-negative number");
        require(std::isfinite(delta_e_) && delta_e_ > 0.0, "bin width must be positive");
        for (double v : s_.data())
            require(std::isfinite(v) && v >= 0.0, "spectra must be finite and non-negative");
        if (allow_zero_mac) {
            for (double v : b_.data())
                require(std::isfinite(v) && v >= 0.0, "attenuation coefficients must be finite and non-negative");
            for (std::size_t k = 0; k < b_.rows(); ++k) {
                double sum = 0.0;
                for (double v : b_.row(k))
                    sum += v;
                require(sum > 0.0, "material " + std::to_string(k + 1) + " has no attenuation in any bin");
            }
        } else {
            for (double v : b_.data())
                require(std::isfinite(v) && v > 0.0, "attenuation coefficients must be finite and strictly positive");
        }
        for (std::size_t m = 0; m < s_.cols(); ++m) {
            bool nonzero = false;
            for (std::size_t q = 0; q < s_.rows(); ++q)
                nonzero = nonzero || s_(q, m) > 0.0;
            require(nonzero, "spectra column for energy bin " + std::to_string(m + 1) + " is all zero");
        }
        for (std::size_t q = 0; q < s_.rows(); ++q) {
            double sum = 0.0;
            for (double v : s_.row(q))
                sum += v;
            require(sum > 0.0, "spectrum " + std::to_string(q + 1) + " is identically zero");
            for (double& v : s_.row(q))
                v /= sum;
        }
    }

public:
    std::size_t num_spectra() const noexcept { return s_.rows(); }
    std::size_t num_materials() const noexcept { return b_.rows(); }
    std::size_t num_bins() const noexcept { return s_.cols(); }

    const Matrix& spectra() const noexcept { return s_; }
    const Matrix& mac() const noexcept { return b_; }
    double bin_width_kev() const noexcept { return delta_e_; }
    double zero_threshold() const noexcept { return eps_; }

    // bin is 1-based
    double bin_energy_kev(std::size_t bin) const noexcept { return delta_e_ * static_cast<double>(bin); }

    bool spectrum_vanishes(std::size_t q, std::size_t m) const noexcept { return s_(q, m) <= eps_; }

    SpectralModel with_zero_threshold(double eps) const
    {
        SpectralModel copy = *this;
        require(std::isfinite(eps) && eps >= 0.0, "zero threshold must be a finite non-negative number");
        copy.eps_ = eps;
        return copy;
    }

private:
    Matrix s_;
    Matrix b_;
    double delta_e_;
    double eps_;
};

namespace detail {

    inline void check_point(const SpectralModel& model, std::span<const double> x)
    {
        require(x.size() == model.num_materials(), "x must have one entry per basis material");
        require(all_finite(x), "non-finite entry in x");
    }

    // a_m = sum_k b_km x_k
    inline Vector path_exponents(const SpectralModel& model, std::span<const double> x)
    {
        const Matrix& b = model.mac();
        Vector a(model.num_bins(), 0.0);
        for (std::size_t k = 0; k < b.rows(); ++k)
            for (std::size_t m = 0; m < b.cols(); ++m)
                a[m] += b(k, m) * x[k];
        return a;
    }

    // Per spectrum: shift c_q = max over the spectrum's support of -a_m, and the
    // shifted weights w_qm = s_qm exp(-a_m - c_q). Row sums lie in [min s, 1].
    struct ShiftedWeights {
        Matrix w;
        Vector shift;
        Vector row_sum;
    };

    inline ShiftedWeights shifted_weights(const SpectralModel& model, std::span<const double> x)
    {
        const Vector a = path_exponents(model, x);
        const Matrix& s = model.spectra();
        ShiftedWeights out { Matrix(s.rows(), s.cols()), Vector(s.rows()), Vector(s.rows()) };
        for (std::size_t q = 0; q < s.rows(); ++q) {
            double c = -std::numeric_limits<double>::infinity();
            for (std::size_t m = 0; m < s.cols(); ++m)
                if (s(q, m) > 0.0)
                    c = std::max(c, -a[m]);
            double sum = 0.0;
            for (std::size_t m = 0; m < s.cols(); ++m) {
                const double w = s(q, m) > 0.0 ? s(q, m) * std::exp(-a[m] - c) : 0.0;
                out.w(q, m) = w;
                sum += w;
            }
            out.shift[q] = c;
            out.row_sum[q] = sum;
        }
        return out;
    }

} // namespace detail

/// zeta_m(x) = exp(-sum_k b_km x_k). May underflow to 0 or overflow for
/// extreme x; forward_map and jacobian do not go through it.
inline Vector attenuation_factors(const SpectralModel& model, std::span<const double> x)
{
    detail::check_point(model, x);
    Vector z = detail::path_exponents(model, x);
    for (double& v : z)
        v = std::exp(-v);
    return z;
}

/// F_q(x) = ln sum_m s_qm zeta_m(x), evaluated with a log-sum-exp shift.
inline Vector forward_map(const SpectralModel& model, std::span<const double> x)
{
    detail::check_point(model, x);
    const auto sw = detail::shifted_weights(model, x);
    Vector f(model.num_spectra());
    for (std::size_t q = 0; q < f.size(); ++q) {
        if (!(sw.row_sum[q] > 0.0))
            throw Error(ErrorKind::numeric_domain, "spectral sum underflowed");
        f[q] = std::log(sw.row_sum[q]) + sw.shift[q];
    }
    return f;
}

/// Spectra reweighted by attenuation and renormalized per row:
/// s~_qm(x) = s_qm zeta_m(x) / <s_q, zeta(x)>.
inline Matrix normalized_weights(const SpectralModel& model, std::span<const double> x)
{
    detail::check_point(model, x);
    auto sw = detail::shifted_weights(model, x);
    for (std::size_t q = 0; q < sw.w.rows(); ++q)
        for (double& v : sw.w.row(q))
            v /= sw.row_sum[q];
    return std::move(sw.w);
}

/// DF(x) = -Lambda(x) G(x) = -S~(x) B^T, a Q x K matrix.
inline Matrix jacobian(const SpectralModel& model, std::span<const double> x)
{
    const Matrix st = normalized_weights(model, x);
    const Matrix& b = model.mac();
    Matrix j(st.rows(), b.rows());
    for (std::size_t q = 0; q < st.rows(); ++q)
        for (std::size_t k = 0; k < b.rows(); ++k) {
            double s = 0.0;
            for (std::size_t m = 0; m < st.cols(); ++m)
                s += st(q, m) * b(k, m);
            j(q, k) = -s;
        }
    return j;
}

/// G(x) = S diag(zeta(x)) B^T assembled directly (no shifting).
inline Matrix g_matrix(const SpectralModel& model, std::span<const double> x)
{
    const Vector z = attenuation_factors(model, x);
    const Matrix& s = model.spectra();
    const Matrix& b = model.mac();
    Matrix g(s.rows(), b.rows());
    for (std::size_t q = 0; q < s.rows(); ++q)
        for (std::size_t k = 0; k < b.rows(); ++k) {
            double acc = 0.0;
            for (std::size_t m = 0; m < s.cols(); ++m)
                acc += s(q, m) * z[m] * b(k, m);
            g(q, k) = acc;
        }
    return g;
}

// ---------------------------------------------------------------------------
// Tables: CSV with header `bin,<name1>,<name2>,...`, one row per energy bin.

inline BinTable parse_bin_table_csv(std::istream& in, const std::string& origin = "<stream>")
{
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t\r");
            const auto e = cell.find_last_not_of(" \t\r");
            out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
        }
        return out;
    };

    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorKind::io, origin + ": empty table");
    auto header = split(line);
    if (header.size() < 2 || header[0] != "bin")
        throw Error(ErrorKind::io, origin + ": header must start with 'bin' followed by column names");

    BinTable table;
    table.names.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        auto cells = split(line);
        if (cells.size() != header.size())
            throw Error(ErrorKind::io, origin + ":" + std::to_string(lineno) + ": expected "
                    + std::to_string(header.size()) + " fields");
        std::vector<double> vals;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(cells[c], &used));
                if (used != cells[c].size())
                    throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw Error(ErrorKind::io, origin + ":" + std::to_string(lineno) + ": bad number '" + cells[c] + "'");
            }
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty())
        throw Error(ErrorKind::io, origin + ": no data rows");
    table.values = Matrix(table.names.size(), rows.size());
    for (std::size_t m = 0; m < rows.size(); ++m)
        for (std::size_t c = 0; c < table.names.size(); ++c)
            table.values(c, m) = rows[m][c];
    return table;
}

inline BinTable load_bin_table_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::io, "cannot open " + path);
    return parse_bin_table_csv(in, path);
}

inline void write_bin_table_csv(std::ostream& out, const BinTable& table)
{
    out << "bin";
    for (const auto& n : table.names)
        out << ',' << n;
    out << '\n';
    char buf[32];
    for (std::size_t m = 0; m < table.values.cols(); ++m) {
        out << (m + 1);
        for (std::size_t c = 0; c < table.values.rows(); ++c) {
            std::snprintf(buf, sizeof buf, "%.6e", table.values(c, m));
            out << ',' << buf;
        }
        out << '\n';
    }
}

namespace detail {
    inline BinTable table_from(const std::array<std::array<double, 2>, builtin::kBins>& data,
        std::vector<std::string> names)
    {
        BinTable t { std::move(names), Matrix(2, builtin::kBins) };
        for (std::size_t m = 0; m < builtin::kBins; ++m)
            for (std::size_t c = 0; c < 2; ++c)
                t.values(c, m) = data[m][c];
        return t;
    }
} // namespace detail

inline std::vector<std::string> builtin_table_names() { return { "spectra1", "spectra2", "mac-water-bone" }; }

inline bool is_builtin_table(const std::string& name)
{
    for (const auto& n : builtin_table_names())
        if (n == name)
            return true;
    return false;
}

/// Built-in tables with the exact printed digits (spectra not yet renormalized).
inline BinTable builtin_table(const std::string& name)
{
    if (name == "spectra1")
        return detail::table_from(builtin::kSpectra1, { "low_kv", "high_kv" });
    if (name == "spectra2")
        return detail::table_from(builtin::kSpectra2, { "low_kv", "high_kv_cu" });
    if (name == "mac-water-bone")
        return detail::table_from(builtin::kMacWaterBone, { "water", "bone" });
    throw Error(ErrorKind::invalid_input, "unknown built-in table '" + name + "'");
}

/// Built-in name or CSV path.
inline BinTable resolve_bin_table(const std::string& source)
{
    return is_builtin_table(source) ? builtin_table(source) : load_bin_table_csv(source);
}

inline SpectralModel load_model(const std::string& spectra_source, const std::string& mac_source,
    double delta_e_kev = SpectralModel::kDefaultBinWidthKeV,
    double zero_threshold = SpectralModel::kDefaultZeroThreshold)
{
    return SpectralModel(resolve_bin_table(spectra_source).values, resolve_bin_table(mac_source).values,
        delta_e_kev, zero_threshold);
}

} // namespace msct
