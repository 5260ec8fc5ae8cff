#pragma once

// Parallel-beam filtered backprojection and virtual monochromatic images.

#include <bit>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "parallel.hpp"
#include "spectral_model.hpp"

namespace msct {

enum class FilterKind { ram_lak, hann };

inline const char* to_string(FilterKind f) { return f == FilterKind::ram_lak ? "ram-lak" : "hann"; }

inline FilterKind parse_filter_kind(const std::string& s)
{
    if (s == "ram-lak")
        return FilterKind::ram_lak;
    if (s == "hann")
        return FilterKind::hann;
    throw Error(ErrorKind::invalid_input, "unknown filter '" + s + "' (expected ram-lak or hann)");
}

struct FbpConfig {
    FilterKind filter = FilterKind::ram_lak;
    // linear interpolation is the only backprojection mode
    std::optional<Grid> output_grid; // defaults to the geometry grid
};

inline std::size_t filter_length(std::size_t n_bins) { return std::bit_ceil(2 * n_bins); }

/// Spatial ramp kernel h[n], n = 0..P/2, for detector spacing d and padded
/// length P. Ram-Lak: h[0] = 1/(4d^2), h[odd] = -1/(pi n d)^2, h[even] = 0.
/// Hann: the Ram-Lak response on the P-point frequency grid times
/// 0.5 (1 + cos(pi f / f_max)), transformed back (even, so a cosine sum).
inline std::vector<double> ramp_kernel(std::size_t n_bins, double d, FilterKind kind)
{
    const std::size_t p = filter_length(n_bins);
    const std::size_t half = p / 2;
    std::vector<double> h(half + 1, 0.0);
    h[0] = 1.0 / (4.0 * d * d);
    for (std::size_t n = 1; n <= half; n += 2) {
        const double den = std::numbers::pi * static_cast<double>(n) * d;
        h[n] = -1.0 / (den * den);
    }
    if (kind == FilterKind::ram_lak)
        return h;

    // H[k] = sum over the circular kernel of h[n] cos(2 pi k n / P)
    auto circ = [&](std::size_t n) { return n <= half ? h[n] : h[p - n]; };
    std::vector<double> spectrum(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
        double s = 0.0;
        for (std::size_t n = 0; n < p; ++n)
            s += circ(n) * std::cos(2.0 * std::numbers::pi * static_cast<double>(k * n % p) / static_cast<double>(p));
        const double window = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(half)));
        spectrum[k] = s * window;
    }
    std::vector<double> out(half + 1);
    for (std::size_t n = 0; n <= half; ++n) {
        double s = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
            const double hk = k <= half ? spectrum[k] : spectrum[p - k];
            s += hk * std::cos(2.0 * std::numbers::pi * static_cast<double>(k * n % p) / static_cast<double>(p));
        }
        out[n] = s / static_cast<double>(p);
    }
    return out;
}

/// Linear convolution of each view with the kernel, times the detector step.
/// Equal to the zero-padded circular convolution at length P >= 2 n_bins.
inline Sinogram filter_views(const Sinogram& sino, double d, FilterKind kind)
{
    const auto h = ramp_kernel(sino.n_bins, d, kind);
    Sinogram out(sino.n_views, sino.n_bins);
    const long nb = static_cast<long>(sino.n_bins);
    for (std::size_t v = 0; v < sino.n_views; ++v)
        for (long i = 0; i < nb; ++i) {
            double acc = 0.0;
            for (long l = 0; l < nb; ++l)
                acc += h[static_cast<std::size_t>(std::abs(i - l))] * sino.at(v, static_cast<std::size_t>(l));
            out.at(v, static_cast<std::size_t>(i)) = d * acc;
        }
    return out;
}

/// Filtered backprojection over [0, pi) using the projector's ray convention:
/// pixel (x, y) reads view phi at t = x cos(phi) + y sin(phi), linearly interpolated.
inline Image fbp_reconstruct(const Sinogram& sino, const ScanGeometry& geom, const FbpConfig& cfg = {},
    std::size_t threads = 1)
{
    geom.validate();
    require(sino.n_views == geom.n_views && sino.n_bins == geom.n_bins && sino.values.size() == geom.num_rays(),
        "sinogram shape does not match the scan geometry");
    const Grid grid = cfg.output_grid.value_or(geom.grid);
    grid.validate();

    const double dt = geom.bin_width();
    const Sinogram q = filter_views(sino, dt, cfg.filter);
    std::vector<double> cs(geom.n_views), sn(geom.n_views);
    for (std::size_t v = 0; v < geom.n_views; ++v) {
        const Ray r = ray_for(geom, v, 0);
        cs[v] = r.direction.y;  // cos phi
        sn[v] = -r.direction.x; // sin phi
    }
    const double scale = std::numbers::pi / static_cast<double>(geom.n_views);
    const long nb = static_cast<long>(geom.n_bins);

    Image img(grid);
    parallel_for(grid.ny, threads, [&](std::size_t rb, std::size_t re) {
        for (std::size_t row = rb; row < re; ++row) {
            const double y = grid.y_center(row);
            for (std::size_t col = 0; col < grid.nx; ++col) {
                const double x = grid.x_center(col);
                double acc = 0.0;
                for (std::size_t v = 0; v < geom.n_views; ++v) {
                    const double u = (x * cs[v] + y * sn[v] - geom.t_min) / dt - 0.5;
                    const double fl = std::floor(u);
                    const long i0 = static_cast<long>(fl);
                    const double w = u - fl;
                    double val = 0.0;
                    if (i0 >= 0 && i0 < nb)
                        val += (1.0 - w) * q.at(v, static_cast<std::size_t>(i0));
                    if (i0 + 1 >= 0 && i0 + 1 < nb)
                        val += w * q.at(v, static_cast<std::size_t>(i0 + 1));
                    acc += val;
                }
                img.at(row, col) = scale * acc;
            }
        }
    });
    return img;
}

/// mu_m = sum_k b_km f_k pixelwise; `bin` is 1-based.
inline Image synthesize_vmi(const SpectralModel& model, std::span<const Image> basis_images, std::size_t bin)
{
    require(basis_images.size() == model.num_materials(), "need one basis image per material");
    require(bin >= 1 && bin <= model.num_bins(), "energy bin out of range");
    const Grid& grid = basis_images[0].grid;
    for (const auto& im : basis_images)
        require(im.grid == grid && im.values.size() == grid.size(), "basis images are on different grids");
    Image vmi(grid);
    for (std::size_t k = 0; k < basis_images.size(); ++k) {
        const double b = model.mac()(k, bin - 1);
        for (std::size_t i = 0; i < vmi.values.size(); ++i)
            vmi.values[i] += b * basis_images[k].values[i];
    }
    return vmi;
}

} // namespace msct
