#pragma once

// Additive ellipse phantoms: each ellipse adds its per-material density inside
// its boundary. Line integrals are exact; rasterization samples pixel centers.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"

namespace msct {

struct Ellipse {
    double cx = 0.0;
    double cy = 0.0;
    double a = 1.0; // semi-axis along the rotated x axis, cm
    double b = 1.0; // semi-axis along the rotated y axis, cm
    double angle_deg = 0.0;
    std::vector<double> density; // g/cm^3 per basis material
};

struct EllipsePhantom {
    Grid grid;
    std::vector<std::string> materials;
    std::vector<Ellipse> ellipses;

    std::size_t num_materials() const noexcept { return materials.size(); }

    void validate() const
    {
        grid.validate();
        require(!materials.empty(), "phantom needs at least one material");
        for (const auto& e : ellipses) {
            require(std::isfinite(e.a) && std::isfinite(e.b) && e.a > 0.0 && e.b > 0.0,
                "ellipse semi-axes must be positive");
            require(std::isfinite(e.cx) && std::isfinite(e.cy) && std::isfinite(e.angle_deg),
                "ellipse center and angle must be finite");
            require(e.density.size() == materials.size(), "ellipse density needs one value per material");
            for (double d : e.density)
                require(std::isfinite(d), "ellipse densities must be finite");
        }
    }
};

namespace detail {
    struct EllipseFrame {
        double c, s;
    };
    inline EllipseFrame frame(const Ellipse& e)
    {
        const double th = e.angle_deg * std::numbers::pi / 180.0;
        return { std::cos(th), std::sin(th) };
    }
} // namespace detail

/// Chord length of a ray (unit direction) through one ellipse.
inline double ellipse_chord(const Ellipse& e, const Ray& ray)
{
    const auto f = detail::frame(e);
    const double px = ray.point.x - e.cx, py = ray.point.y - e.cy;
    // rotate into the ellipse frame, then scale to the unit circle
    const double u = (f.c * px + f.s * py) / e.a;
    const double v = (-f.s * px + f.c * py) / e.b;
    const double du = (f.c * ray.direction.x + f.s * ray.direction.y) / e.a;
    const double dv = (-f.s * ray.direction.x + f.c * ray.direction.y) / e.b;
    const double qa = du * du + dv * dv;
    const double qb = u * du + v * dv;
    const double qc = u * u + v * v - 1.0;
    const double disc = qb * qb - qa * qc;
    if (disc <= 0.0)
        return 0.0;
    return 2.0 * std::sqrt(disc) / qa;
}

/// Exact line integral of basis material `material` along a ray.
inline double ellipse_line_integral(const EllipsePhantom& ph, const Ray& ray, std::size_t material)
{
    require(material < ph.num_materials(), "material index out of range");
    const double norm = std::hypot(ray.direction.x, ray.direction.y);
    require(std::abs(norm - 1.0) < 1e-12, "ray direction must be a unit vector");
    double sum = 0.0;
    for (const auto& e : ph.ellipses)
        if (e.density[material] != 0.0)
            sum += e.density[material] * ellipse_chord(e, ray);
    return sum;
}

inline bool ellipse_contains(const Ellipse& e, double x, double y)
{
    const auto f = detail::frame(e);
    const double px = x - e.cx, py = y - e.cy;
    const double u = (f.c * px + f.s * py) / e.a;
    const double v = (-f.s * px + f.c * py) / e.b;
    return u * u + v * v <= 1.0;
}

inline Image rasterize(const EllipsePhantom& ph, const Grid& grid, std::size_t material)
{
    require(material < ph.num_materials(), "material index out of range");
    grid.validate();
    Image img(grid);
    for (std::size_t r = 0; r < grid.ny; ++r) {
        const double y = grid.y_center(r);
        for (std::size_t c = 0; c < grid.nx; ++c) {
            const double x = grid.x_center(c);
            double v = 0.0;
            for (const auto& e : ph.ellipses)
                if (ellipse_contains(e, x, y))
                    v += e.density[material];
            img.at(r, c) = v;
        }
    }
    return img;
}

/// Exact sinogram of one material from the ellipse description.
inline Sinogram analytic_sinogram(const EllipsePhantom& ph, const ScanGeometry& geom, std::size_t material)
{
    Sinogram s(geom.n_views, geom.n_bins);
    for (std::size_t v = 0; v < geom.n_views; ++v)
        for (std::size_t b = 0; b < geom.n_bins; ++b)
            s.at(v, b) = ellipse_line_integral(ph, ray_for(geom, v, b), material);
    return s;
}

} // namespace msct
