#pragma once

// Per-ray inversion of the spectral data model by the ordinary Newton method,
// data generation, noise injection and the noisy-data error split.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "matrix.hpp"
#include "parallel.hpp"
#include "spectral_model.hpp"

namespace msct {

/// One `dim`-vector per ray over an n_views x n_bins scan, ray-major.
/// Holds both basis sinograms (dim = K) and log-domain data (dim = Q).
struct RayVectors {
    std::size_t n_views = 0;
    std::size_t n_bins = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    RayVectors() = default;
    RayVectors(std::size_t views, std::size_t bins, std::size_t d, double fill = 0.0)
        : n_views(views)
        , n_bins(bins)
        , dim(d)
        , values(views * bins * d, fill)
    {
    }

    std::size_t num_rays() const noexcept { return n_views * n_bins; }
    std::span<double> ray(std::size_t j) noexcept { return { values.data() + j * dim, dim }; }
    std::span<const double> ray(std::size_t j) const noexcept { return { values.data() + j * dim, dim }; }

    Sinogram channel(std::size_t k) const
    {
        require(k < dim, "channel index out of range");
        Sinogram s(n_views, n_bins);
        for (std::size_t j = 0; j < num_rays(); ++j)
            s.values[j] = values[j * dim + k];
        return s;
    }

    static RayVectors from_channels(std::span<const Sinogram> channels)
    {
        require(!channels.empty(), "need at least one channel");
        RayVectors out(channels[0].n_views, channels[0].n_bins, channels.size());
        for (std::size_t k = 0; k < channels.size(); ++k) {
            require(channels[k].n_views == out.n_views && channels[k].n_bins == out.n_bins,
                "channel shapes differ");
            for (std::size_t j = 0; j < out.num_rays(); ++j)
                out.values[j * out.dim + k] = channels[k].values[j];
        }
        return out;
    }

    bool same_shape(const RayVectors& o) const noexcept
    {
        return n_views == o.n_views && n_bins == o.n_bins && dim == o.dim;
    }
    bool operator==(const RayVectors&) const = default;
};

using BasisSinograms = RayVectors;
using MeasuredData = RayVectors;

enum class InitialPoint { zero };

struct SolverConfig {
    std::size_t max_iters = 100;
    double residual_tol = 0.0; // 0: always run max_iters
    InitialPoint initial_point = InitialPoint::zero;
    double divergence_cap = 1e6;
    // |det DF| <= singular_rel_tol * ||DF||_F^K counts as singular
    double singular_rel_tol = 1e-15;

    void validate() const
    {
        require(max_iters >= 1, "max_iters must be at least 1");
        require(residual_tol >= 0.0 && std::isfinite(residual_tol), "residual_tol must be finite and >= 0");
        require(divergence_cap > 0.0, "divergence cap must be positive");
    }
};

class SingularJacobian : public Error {
public:
    SingularJacobian(Vector x, double det)
        : Error(ErrorKind::singular_jacobian, "Jacobian is numerically singular (det = " + std::to_string(det) + ")")
        , x_(std::move(x))
        , det_(det)
    {
    }
    const Vector& x() const noexcept { return x_; }
    double det() const noexcept { return det_; }

private:
    Vector x_;
    double det_;
};

// ---------------------------------------------------------------------------

/// g_j = F(x_j) for every ray.
inline MeasuredData generate_data(const SpectralModel& model, const BasisSinograms& x, std::size_t threads = 1)
{
    require(x.dim == model.num_materials(), "basis sinograms need one channel per material");
    MeasuredData g(x.n_views, x.n_bins, model.num_spectra());
    parallel_for(x.num_rays(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
            const Vector f = forward_map(model, x.ray(j));
            std::copy(f.begin(), f.end(), g.ray(j).begin());
        }
    });
    return g;
}

/// 10 log10(sum g^2 / sum n^2).
inline double snr_db(const MeasuredData& clean, const MeasuredData& noisy)
{
    require(clean.same_shape(noisy), "data shapes differ");
    std::vector<double> sig(clean.values.size()), err(clean.values.size());
    for (std::size_t i = 0; i < sig.size(); ++i) {
        sig[i] = clean.values[i] * clean.values[i];
        const double n = noisy.values[i] - clean.values[i];
        err[i] = n * n;
    }
    return 10.0 * std::log10(pairwise_sum(sig) / pairwise_sum(err));
}

/// Adds i.i.d. Gaussian noise, rescaled so the realized SNR over the whole
/// data vector equals snr_db.
inline MeasuredData add_noise(const MeasuredData& data, double snr_db, std::uint64_t seed)
{
    require(std::isfinite(snr_db), "SNR must be finite");
    std::vector<double> sq(data.values.size());
    for (std::size_t i = 0; i < sq.size(); ++i)
        sq[i] = data.values[i] * data.values[i];
    const double signal = pairwise_sum(sq);
    require(signal > 0.0, "SNR is undefined for all-zero data");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> noise(data.values.size());
    for (auto& n : noise)
        n = normal(rng);
    for (std::size_t i = 0; i < sq.size(); ++i)
        sq[i] = noise[i] * noise[i];
    const double power = pairwise_sum(sq);
    const double scale = std::sqrt(signal / (power * std::pow(10.0, snr_db / 10.0)));

    MeasuredData out = data;
    for (std::size_t i = 0; i < noise.size(); ++i)
        out.values[i] += scale * noise[i];
    return out;
}

/// One ordinary Newton update: solve -DF(x) dx = F(x) - g, return x + dx.
inline Vector newton_step(const SpectralModel& model, std::span<const double> x, std::span<const double> g,
    const SolverConfig& cfg = {})
{
    require(g.size() == model.num_spectra(), "g must have one entry per spectrum");
    require(all_finite(g), "non-finite entry in g");
    const Matrix j = jacobian(model, x);
    const Vector f = forward_map(model, x);

    Matrix neg_j = j;
    for (double& v : neg_j.data())
        v = -v;
    Vector rhs(f.size());
    for (std::size_t q = 0; q < f.size(); ++q)
        rhs[q] = f[q] - g[q];

    const double scale = std::pow(j.frobenius_norm(), static_cast<double>(j.rows()));
    auto lu = lu_solve(neg_j, rhs);
    if (lu.singular || !(std::abs(lu.det) > cfg.singular_rel_tol * scale))
        throw SingularJacobian(Vector(x.begin(), x.end()), lu.singular ? 0.0 : -lu.det);

    Vector next(x.begin(), x.end());
    for (std::size_t k = 0; k < next.size(); ++k)
        next[k] += lu.x[k];
    if (!all_finite(next) || norm2(next) > cfg.divergence_cap)
        throw Error(ErrorKind::divergence, "Newton iterate left the divergence guard");
    return next;
}

enum class RayStatus { ok, singular_jacobian, diverged };

inline const char* to_string(RayStatus s)
{
    switch (s) {
    case RayStatus::ok: return "ok";
    case RayStatus::singular_jacobian: return "singular-jacobian";
    case RayStatus::diverged: return "diverged";
    }
    return "?";
}

struct DecomposeResult {
    BasisSinograms estimate;
    // RE after iterations 1..max_iters; empty when no truth was supplied
    std::vector<double> re_history;
    std::vector<std::size_t> iterations;
    std::vector<double> residual; // ||F(x) - g|| at the returned estimate
    std::vector<RayStatus> status;

    std::size_t failures() const noexcept
    {
        std::size_t n = 0;
        for (auto s : status)
            n += s != RayStatus::ok;
        return n;
    }
};

namespace detail {
    inline double residual_norm(const SpectralModel& model, std::span<const double> x, std::span<const double> g)
    {
        const Vector f = forward_map(model, x);
        double s = 0.0;
        for (std::size_t q = 0; q < f.size(); ++q)
            s += (f[q] - g[q]) * (f[q] - g[q]);
        return std::sqrt(s);
    }

    inline double squared_distance(std::span<const double> a, std::span<const double> b)
    {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k)
            s += (a[k] - b[k]) * (a[k] - b[k]);
        return s;
    }
} // namespace detail

/// Solves F(x_j) = g_j independently for every ray. With truth supplied the
/// relative error RE^n = sum_j ||x_j^n - x_j*||^2 / sum_j ||x_j*||^2 is
/// recorded after every iteration; a ray that stops early keeps contributing
/// its last iterate.
inline DecomposeResult decompose(const SpectralModel& model, const MeasuredData& data,
    const BasisSinograms* truth = nullptr, const SolverConfig& cfg = {}, std::size_t threads = 1)
{
    cfg.validate();
    require(data.dim == model.num_spectra(), "data need one channel per spectrum");
    const std::size_t n_rays = data.num_rays();
    const std::size_t dim = model.num_materials();
    if (truth)
        require(truth->n_views == data.n_views && truth->n_bins == data.n_bins && truth->dim == dim,
            "truth sinograms do not match the data shape");

    DecomposeResult res;
    res.estimate = BasisSinograms(data.n_views, data.n_bins, dim);
    res.iterations.assign(n_rays, 0);
    res.residual.assign(n_rays, 0.0);
    res.status.assign(n_rays, RayStatus::ok);
    const std::size_t n_it = cfg.max_iters;
    std::vector<double> sq_err(truth ? n_rays * n_it : 0);

    parallel_for(n_rays, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
            const auto g = data.ray(j);
            Vector x(dim, 0.0);
            std::size_t it = 0;
            double err = truth ? detail::squared_distance(x, truth->ray(j)) : 0.0;
            bool stop = cfg.residual_tol > 0.0 && detail::residual_norm(model, x, g) <= cfg.residual_tol;
            for (; it < n_it && !stop; ++it) {
                try {
                    x = newton_step(model, x, g, cfg);
                } catch (const SingularJacobian&) {
                    res.status[j] = RayStatus::singular_jacobian;
                    break;
                } catch (const Error& ex) {
                    if (ex.kind() != ErrorKind::divergence)
                        throw;
                    res.status[j] = RayStatus::diverged;
                    break;
                }
                if (truth) {
                    err = detail::squared_distance(x, truth->ray(j));
                    sq_err[j * n_it + it] = err;
                }
                if (cfg.residual_tol > 0.0 && detail::residual_norm(model, x, g) <= cfg.residual_tol)
                    stop = true;
            }
            res.iterations[j] = it;
            // frozen contribution once the ray stops
            if (truth)
                for (std::size_t n = it; n < n_it; ++n)
                    sq_err[j * n_it + n] = err;
            std::copy(x.begin(), x.end(), res.estimate.ray(j).begin());
            res.residual[j] = detail::residual_norm(model, x, g);
        }
    });

    if (truth) {
        std::vector<double> norms(n_rays);
        for (std::size_t j = 0; j < n_rays; ++j)
            norms[j] = detail::squared_distance(truth->ray(j), Vector(dim, 0.0));
        const double denom = pairwise_sum(norms);
        require(denom > 0.0, "RE is undefined for an all-zero truth");
        res.re_history.resize(n_it);
        std::vector<double> column(n_rays);
        for (std::size_t n = 0; n < n_it; ++n) {
            for (std::size_t j = 0; j < n_rays; ++j)
                column[j] = sq_err[j * n_it + n];
            res.re_history[n] = pairwise_sum(column) / denom;
        }
    }
    return res;
}

/// RE between an estimate and the truth.
inline double relative_error(const BasisSinograms& estimate, const BasisSinograms& truth)
{
    require(estimate.same_shape(truth), "shape mismatch");
    std::vector<double> num(truth.num_rays()), den(truth.num_rays());
    for (std::size_t j = 0; j < truth.num_rays(); ++j) {
        num[j] = detail::squared_distance(estimate.ray(j), truth.ray(j));
        den[j] = detail::squared_distance(truth.ray(j), Vector(truth.dim, 0.0));
    }
    return pairwise_sum(num) / pairwise_sum(den);
}

/// Reference F^-1(g) per ray for verification only (the error split):
/// Newton with Armijo backtracking on ||F(x) - g||, started from `start` when
/// that is already close and from 0 otherwise. Not used by decompose, which
/// stays the ordinary Newton method. Throws when a ray does not converge.
inline BasisSinograms reference_inverse(const SpectralModel& model, const MeasuredData& data,
    const BasisSinograms* start = nullptr, std::size_t threads = 1, double tol = 1e-12)
{
    require(data.dim == model.num_spectra(), "data need one channel per spectrum");
    const std::size_t dim = model.num_materials();
    if (start)
        require(start->n_views == data.n_views && start->n_bins == data.n_bins && start->dim == dim,
            "starting points do not match the data shape");
    BasisSinograms out(data.n_views, data.n_bins, dim);
    std::vector<char> ok(data.num_rays(), 0);
    parallel_for(data.num_rays(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
            const auto g = data.ray(j);
            const double target = tol * (1.0 + norm2(Vector(g.begin(), g.end())));
            Vector x(dim, 0.0);
            if (start && all_finite(start->ray(j)) && detail::residual_norm(model, start->ray(j), g) < 1e-6)
                x.assign(start->ray(j).begin(), start->ray(j).end());
            double r = detail::residual_norm(model, x, g);
            for (int it = 0; it < 200 && r > target; ++it) {
                const Matrix jac = jacobian(model, x);
                const Vector f = forward_map(model, x);
                Vector rhs(f.size());
                for (std::size_t q = 0; q < f.size(); ++q)
                    rhs[q] = g[q] - f[q];
                const auto lu = lu_solve(jac, rhs);
                if (lu.singular)
                    break;
                double t = 1.0;
                Vector trial = x;
                double rt = r;
                for (int k = 0; k < 60; ++k, t *= 0.5) {
                    for (std::size_t i = 0; i < dim; ++i)
                        trial[i] = x[i] + t * lu.x[i];
                    rt = detail::residual_norm(model, trial, g);
                    if (std::isfinite(rt) && rt <= (1.0 - 1e-4 * t) * r)
                        break;
                }
                if (!(rt < r))
                    break; // stagnated at the rounding floor
                x = trial;
                r = rt;
            }
            ok[j] = r <= std::max(target, 1e3 * tol);
            std::copy(x.begin(), x.end(), out.ray(j).begin());
        }
    });
    for (std::size_t j = 0; j < ok.size(); ++j)
        require(ok[j], "no converged inverse for ray " + std::to_string(j), ErrorKind::divergence);
    return out;
}

struct ErrorSplitReport {
    std::vector<double> error1;   // ||x~^n - F^-1(g~)||
    std::vector<double> error2;   // ||g~ - g||
    std::vector<double> actual;   // ||x~^n - x*||
    std::vector<bool> bound_holds;
    double gamma = 0.0;

    std::size_t violations() const noexcept
    {
        std::size_t n = 0;
        for (bool b : bound_holds)
            n += !b;
        return n;
    }
};

/// Per-ray check of ||x~^n - x*|| <= Error1 + gamma * Error2, with
/// Error1 = ||x~^n - F^-1(g~)|| and Error2 = ||g~ - g||. `noisy_solution` holds
/// F^-1(g~), e.g. from reference_inverse.
inline ErrorSplitReport error_split(const BasisSinograms& x_n, const BasisSinograms& noisy_solution,
    const BasisSinograms& truth, const MeasuredData& clean_data, const MeasuredData& noisy_data, double gamma)
{
    require(!noisy_solution.values.empty(), "missing converged noisy solution");
    require(x_n.same_shape(noisy_solution) && x_n.same_shape(truth), "basis sinogram shapes differ");
    require(clean_data.same_shape(noisy_data), "data shapes differ");
    require(clean_data.num_rays() == x_n.num_rays(), "data and sinograms cover different ray sets");
    require(gamma > 0.0, "gamma must be positive");

    const std::size_t n = x_n.num_rays();
    ErrorSplitReport r;
    r.gamma = gamma;
    r.error1.resize(n);
    r.error2.resize(n);
    r.actual.resize(n);
    r.bound_holds.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        r.error1[j] = std::sqrt(detail::squared_distance(x_n.ray(j), noisy_solution.ray(j)));
        r.error2[j] = std::sqrt(detail::squared_distance(noisy_data.ray(j), clean_data.ray(j)));
        r.actual[j] = std::sqrt(detail::squared_distance(x_n.ray(j), truth.ray(j)));
        // an infinite gamma bounds nothing only when there is no data error
        const double bound = r.error2[j] == 0.0 ? r.error1[j] : r.error1[j] + gamma * r.error2[j];
        // a small absolute slack absorbs rounding in the noiseless case
        r.bound_holds[j] = r.actual[j] <= bound + 1e-12 * (1.0 + bound);
    }
    return r;
}

} // namespace msct
