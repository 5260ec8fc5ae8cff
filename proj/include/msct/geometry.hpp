#pragma once

// Parallel-beam scan geometry, pixel grids and a traced-grid projector.
//
// Conventions (shared by the projector and FBP):
//   view v of N has angle phi = v * pi / N, covering [0, pi);
//   bin b has detector coordinate t_b = t_min + (b + 1/2) dt, dt = (t_max - t_min) / n_bins;
//   the ray for (v, b) passes through t_b (cos phi, sin phi) with direction (-sin phi, cos phi),
//   i.e. it is the line {p : p . (cos phi, sin phi) = t_b}.
//   Images are row-major with row 0 at the top (y = y_max) and column 0 at x = x_min.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "parallel.hpp"

namespace msct {

struct Grid {
    std::size_t nx = 0;
    std::size_t ny = 0;
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;

    double pixel_width() const noexcept { return (x_max - x_min) / static_cast<double>(nx); }
    double pixel_height() const noexcept { return (y_max - y_min) / static_cast<double>(ny); }
    std::size_t size() const noexcept { return nx * ny; }
    double x_center(std::size_t col) const noexcept { return x_min + (static_cast<double>(col) + 0.5) * pixel_width(); }
    double y_center(std::size_t row) const noexcept { return y_max - (static_cast<double>(row) + 0.5) * pixel_height(); }

    void validate() const
    {
        require(nx >= 1 && ny >= 1, "grid needs at least one pixel per axis");
        require(std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) && std::isfinite(y_max),
            "grid bounds must be finite");
        require(x_max > x_min && y_max > y_min, "grid bounds are degenerate");
        const double w = pixel_width(), h = pixel_height();
        require(std::abs(w - h) <= 1e-12 * std::max(w, h), "grid pixels must be square");
    }

    bool operator==(const Grid&) const = default;
};

inline Grid square_grid(std::size_t n, double half_width)
{
    return Grid { n, n, -half_width, half_width, -half_width, half_width };
}

struct Image {
    Grid grid;
    std::vector<double> values; // row-major, grid.ny rows of grid.nx

    Image() = default;
    explicit Image(const Grid& g, double fill = 0.0)
        : grid(g)
        , values(g.size(), fill)
    {
    }
    double& at(std::size_t row, std::size_t col) noexcept { return values[row * grid.nx + col]; }
    double at(std::size_t row, std::size_t col) const noexcept { return values[row * grid.nx + col]; }
};

struct ScanGeometry {
    std::size_t n_views = 0;
    std::size_t n_bins = 0;
    double t_min = 0.0;
    double t_max = 0.0;
    Grid grid;

    std::size_t num_rays() const noexcept { return n_views * n_bins; }
    double bin_width() const noexcept { return (t_max - t_min) / static_cast<double>(n_bins); }
    double bin_center(std::size_t bin) const noexcept
    {
        // measured from the detector midpoint so mirrored bins are exact negatives
        return 0.5 * (t_min + t_max) + (static_cast<double>(bin) - 0.5 * static_cast<double>(n_bins - 1)) * bin_width();
    }
    double view_angle(std::size_t view) const noexcept
    {
        return static_cast<double>(view) * std::numbers::pi / static_cast<double>(n_views);
    }

    void validate() const
    {
        require(n_views >= 1 && n_bins >= 1, "geometry needs at least one view and one bin");
        require(std::isfinite(t_min) && std::isfinite(t_max) && t_max > t_min, "detector span is degenerate");
        grid.validate();
    }
};

/// n_views x n_bins line integrals, row-major by view.
struct Sinogram {
    std::size_t n_views = 0;
    std::size_t n_bins = 0;
    std::vector<double> values;

    Sinogram() = default;
    Sinogram(std::size_t views, std::size_t bins, double fill = 0.0)
        : n_views(views)
        , n_bins(bins)
        , values(views * bins, fill)
    {
    }
    double& at(std::size_t view, std::size_t bin) noexcept { return values[view * n_bins + bin]; }
    double at(std::size_t view, std::size_t bin) const noexcept { return values[view * n_bins + bin]; }
    bool operator==(const Sinogram&) const = default;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct Ray {
    Point2 point;
    Point2 direction; // unit length
};

namespace detail {
    // cos/sin of multiples of pi/2 come out as ~6e-17 instead of 0; snap them so
    // axis-aligned rays stay exactly axis-aligned.
    inline double snap(double v) { return std::abs(v) < 1e-15 ? 0.0 : v; }
} // namespace detail

inline Ray ray_for(const ScanGeometry& geom, std::size_t view, std::size_t bin)
{
    require(view < geom.n_views && bin < geom.n_bins, "ray index out of range");
    const double phi = geom.view_angle(view);
    const double c = detail::snap(std::cos(phi));
    const double s = detail::snap(std::sin(phi));
    const double t = geom.bin_center(bin);
    return Ray { { t * c, t * s }, { -s, c } };
}

/// Parameter interval [s_in, s_out] of the ray inside the grid's bounding box;
/// empty (s_in >= s_out) when the ray misses it.
inline std::pair<double, double> box_interval(const Grid& g, const Ray& r)
{
    double s_in = -std::numeric_limits<double>::infinity();
    double s_out = std::numeric_limits<double>::infinity();
    auto slab = [&](double p, double d, double lo, double hi) {
        if (d == 0.0) {
            if (p < lo || p > hi) {
                s_in = 1.0;
                s_out = 0.0;
            }
            return;
        }
        double a = (lo - p) / d, b = (hi - p) / d;
        if (a > b)
            std::swap(a, b);
        s_in = std::max(s_in, a);
        s_out = std::min(s_out, b);
    };
    slab(r.point.x, r.direction.x, g.x_min, g.x_max);
    slab(r.point.y, r.direction.y, g.y_min, g.y_max);
    return { s_in, s_out };
}

struct PixelWeight {
    std::size_t pixel; // row-major image index
    double length;     // cm
};

/// Intersection lengths of a ray with the grid's pixels, by stepping from one
/// pixel boundary crossing to the next. A ray running exactly along a pixel
/// boundary is attributed to the pixel on its +x / +y side (clamped at the edge).
inline std::vector<PixelWeight> trace_ray(const Grid& g, const Ray& r)
{
    std::vector<PixelWeight> out;
    const auto [s_in, s_out] = box_interval(g, r);
    if (!(s_out > s_in))
        return out;

    const double dx = g.pixel_width();
    const double dy = g.pixel_height();
    const long nx = static_cast<long>(g.nx);
    const long ny = static_cast<long>(g.ny);
    // y index counted upward from y_min; the image row is ny - 1 - iy
    auto cell = [](double v, double lo, double step, long n) {
        return std::clamp(static_cast<long>(std::floor((v - lo) / step)), 0L, n - 1);
    };
    // an entry point on an interior pixel boundary lands on the + side; when the
    // ray heads the other way the first segment has zero length and is skipped
    long ix = cell(r.point.x + s_in * r.direction.x, g.x_min, dx, nx);
    long iy = cell(r.point.y + s_in * r.direction.y, g.y_min, dy, ny);

    const long step_x = r.direction.x > 0.0 ? 1 : (r.direction.x < 0.0 ? -1 : 0);
    const long step_y = r.direction.y > 0.0 ? 1 : (r.direction.y < 0.0 ? -1 : 0);
    auto next_cross = [&](long i, long step, double p, double d, double lo, double h) {
        if (step == 0)
            return std::numeric_limits<double>::infinity();
        const double plane = lo + static_cast<double>(step > 0 ? i + 1 : i) * h;
        return (plane - p) / d;
    };
    double sx = next_cross(ix, step_x, r.point.x, r.direction.x, g.x_min, dx);
    double sy = next_cross(iy, step_y, r.point.y, r.direction.y, g.y_min, dy);

    double s = s_in;
    while (s < s_out && ix >= 0 && ix < nx && iy >= 0 && iy < ny) {
        const double s_next = std::min({ sx, sy, s_out });
        const double len = s_next - s;
        if (len > 0.0) {
            const auto row = static_cast<std::size_t>(ny - 1 - iy);
            out.push_back({ row * g.nx + static_cast<std::size_t>(ix), len });
        }
        s = std::max(s, s_next);
        if (s_next >= s_out)
            break;
        if (sx <= s_next) {
            ix += step_x;
            sx = next_cross(ix, step_x, r.point.x, r.direction.x, g.x_min, dx);
        }
        if (sy <= s_next) {
            iy += step_y;
            sy = next_cross(iy, step_y, r.point.y, r.direction.y, g.y_min, dy);
        }
    }
    return out;
}

/// Sparse row {(i, a_ji)} of the system matrix for ray (view, bin).
inline std::vector<PixelWeight> intersection_row(const ScanGeometry& geom, std::size_t view, std::size_t bin)
{
    return trace_ray(geom.grid, ray_for(geom, view, bin));
}

/// x_j = sum_i a_ji f_i for every ray.
inline Sinogram project(const ScanGeometry& geom, const Image& image, std::size_t threads = 1)
{
    require(image.grid == geom.grid, "image grid does not match the scan geometry grid");
    require(image.values.size() == image.grid.size(), "image size does not match its grid");
    Sinogram sino(geom.n_views, geom.n_bins);
    parallel_for(geom.num_rays(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
            double acc = 0.0;
            for (const auto& w : intersection_row(geom, j / geom.n_bins, j % geom.n_bins))
                acc += w.length * image.values[w.pixel];
            sino.values[j] = acc;
        }
    });
    return sino;
}

/// Transpose of project: f_i = sum_j a_ji y_j.
inline Image backproject(const ScanGeometry& geom, const Sinogram& sino)
{
    require(sino.n_views == geom.n_views && sino.n_bins == geom.n_bins, "sinogram shape does not match geometry");
    Image img(geom.grid);
    for (std::size_t j = 0; j < geom.num_rays(); ++j) {
        const double y = sino.values[j];
        if (y == 0.0)
            continue;
        for (const auto& w : intersection_row(geom, j / geom.n_bins, j % geom.n_bins))
            img.values[w.pixel] += w.length * y;
    }
    return img;
}

} // namespace msct
