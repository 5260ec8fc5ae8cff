#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "msct/phantom.hpp"
#include "msct/phantom_builtin.hpp"
#include "msct/recon.hpp"

using namespace msct;

namespace {

ScanGeometry geometry(std::size_t n, std::size_t views)
{
    return ScanGeometry { views, 181, -7.05, 7.05, square_grid(n, 5.0) };
}

EllipsePhantom disk(double r = 2.0, std::size_t n = 128)
{
    EllipsePhantom ph;
    ph.grid = square_grid(n, 5.0);
    ph.materials = { "water" };
    ph.ellipses = { { 0.0, 0.0, r, r, 0.0, { 1.0 } } };
    return ph;
}

/// Mean over pixels at least `margin` pixels inside the disk edge.
double interior_mean(const Image& img, double r, double margin)
{
    const double inner = r - margin * img.grid.pixel_width();
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t row = 0; row < img.grid.ny; ++row)
        for (std::size_t col = 0; col < img.grid.nx; ++col)
            if (std::hypot(img.grid.x_center(col), img.grid.y_center(row)) <= inner) {
                s += img.at(row, col);
                ++n;
            }
    return s / static_cast<double>(n);
}

double rmse(const Image& a, const Image& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
    return std::sqrt(s / static_cast<double>(a.values.size()));
}

} // namespace

TEST(Filter, ParseNames)
{
    EXPECT_EQ(parse_filter_kind("ram-lak"), FilterKind::ram_lak);
    EXPECT_EQ(parse_filter_kind("hann"), FilterKind::hann);
    EXPECT_THROW(parse_filter_kind("shepp-logan"), Error);
    EXPECT_STREQ(to_string(FilterKind::hann), "hann");
}

TEST(Filter, KernelShape)
{
    const double d = 0.1;
    const auto rl = ramp_kernel(181, d, FilterKind::ram_lak);
    EXPECT_DOUBLE_EQ(rl[0], 1.0 / (4 * d * d));
    EXPECT_NEAR(rl[2], 0.0, 1e-9 * rl[0]);
    EXPECT_NEAR(rl[1], -1.0 / (std::numbers::pi * std::numbers::pi * d * d), 1e-9 * rl[0]);
    // the Hann window attenuates high frequencies: smaller center tap
    const auto hn = ramp_kernel(181, d, FilterKind::hann);
    EXPECT_LT(hn[0], rl[0]);
    EXPECT_GT(hn[0], 0.0);
}

TEST(Fbp, ZeroSinogramGivesZeroImage)
{
    const ScanGeometry geom = geometry(64, 60);
    const Image img = fbp_reconstruct(Sinogram(60, 181), geom);
    for (double v : img.values)
        EXPECT_EQ(v, 0.0);
}

TEST(Fbp, Linearity)
{
    const ScanGeometry geom = geometry(48, 40);
    std::mt19937_64 rng(81);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Sinogram a(40, 181), b(40, 181), c(40, 181);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        a.values[i] = u(rng);
        b.values[i] = u(rng);
        c.values[i] = 3.0 * a.values[i] + 0.5 * b.values[i];
    }
    const Image ia = fbp_reconstruct(a, geom), ib = fbp_reconstruct(b, geom), ic = fbp_reconstruct(c, geom);
    for (std::size_t i = 0; i < ic.values.size(); ++i) {
        const double ref = 3.0 * ia.values[i] + 0.5 * ib.values[i];
        EXPECT_NEAR(ic.values[i], ref, 1e-10 * std::max(1.0, std::abs(ref)));
    }
}

TEST(Fbp, DiskInteriorMean)
{
    const ScanGeometry geom = geometry(128, 180);
    const EllipsePhantom ph = disk();
    for (auto kind : { FilterKind::ram_lak, FilterKind::hann }) {
        FbpConfig cfg;
        cfg.filter = kind;
        const Image img = fbp_reconstruct(analytic_sinogram(ph, geom, 0), geom, cfg);
        EXPECT_NEAR(interior_mean(img, 2.0, 2.0), 1.0, 0.03) << to_string(kind);
        // outside the support the image stays near zero
        EXPECT_NEAR(img.at(2, 2), 0.0, 0.05);
    }
}

TEST(Fbp, DiscreteDiskRoundTrip)
{
    const ScanGeometry geom = geometry(128, 180);
    const EllipsePhantom ph = disk();
    const Image img = fbp_reconstruct(project(geom, rasterize(ph, geom.grid, 0)), geom);
    EXPECT_NEAR(interior_mean(img, 2.0, 2.0), 1.0, 0.03);
}

TEST(Fbp, MoreViewsLowerHeadRmse)
{
    const EllipsePhantom ph = builtin::head_phantom(128);
    const Image truth = rasterize(ph, ph.grid, 0);
    double prev = INFINITY;
    for (std::size_t views : { 90u, 180u, 360u }) {
        const ScanGeometry geom = geometry(128, views);
        const double e = rmse(fbp_reconstruct(project(geom, truth), geom), truth);
        EXPECT_LT(e, prev) << views;
        prev = e;
    }
}

TEST(Fbp, OutputGridAndThreads)
{
    const ScanGeometry geom = geometry(64, 60);
    const Sinogram s = project(geom, rasterize(disk(2.0, 64), geom.grid, 0));
    const Image one = fbp_reconstruct(s, geom, {}, 1);
    EXPECT_EQ(fbp_reconstruct(s, geom, {}, 4).values, one.values);
    FbpConfig cfg;
    cfg.output_grid = square_grid(32, 5.0);
    const Image coarse = fbp_reconstruct(s, geom, cfg);
    EXPECT_EQ(coarse.values.size(), 32u * 32u);
    EXPECT_NEAR(interior_mean(coarse, 2.0, 2.0), 1.0, 0.05);
    EXPECT_THROW(fbp_reconstruct(Sinogram(59, 181), geom), Error);
}

TEST(Vmi, Examples)
{
    const SpectralModel m = load_model("spectra1", "mac-water-bone");
    const Grid g = square_grid(4, 1.0);
    const Image water(g, 1.0), none(g, 0.0);
    const Image parts[2] = { water, none };
    const Image v = synthesize_vmi(m, parts, 6);
    for (double x : v.values)
        EXPECT_DOUBLE_EQ(x, m.mac()(0, 5));
    const Image zero[2] = { none, none };
    for (double x : synthesize_vmi(m, zero, 10).values)
        EXPECT_EQ(x, 0.0);
    EXPECT_THROW(synthesize_vmi(m, parts, 0), Error);
    EXPECT_THROW(synthesize_vmi(m, parts, 15), Error);
    const Image mixed[2] = { water, Image(square_grid(5, 1.0)) };
    EXPECT_THROW(synthesize_vmi(m, mixed, 6), Error);
}

TEST(Vmi, CommutesWithFbp)
{
    const SpectralModel m = load_model("spectra2", "mac-water-bone");
    const EllipsePhantom ph = builtin::head_phantom(64);
    const ScanGeometry geom = geometry(64, 60);
    const Sinogram s0 = project(geom, rasterize(ph, geom.grid, 0));
    const Sinogram s1 = project(geom, rasterize(ph, geom.grid, 1));
    const Image recon[2] = { fbp_reconstruct(s0, geom), fbp_reconstruct(s1, geom) };
    const std::size_t bin = 8;
    const double b0 = m.mac()(0, bin - 1), b1 = m.mac()(1, bin - 1);
    Sinogram mono(s0.n_views, s0.n_bins);
    for (std::size_t i = 0; i < mono.values.size(); ++i)
        mono.values[i] = b0 * s0.values[i] + b1 * s1.values[i];
    const Image direct = fbp_reconstruct(mono, geom);
    const Image vmi = synthesize_vmi(m, recon, bin);
    for (std::size_t i = 0; i < vmi.values.size(); ++i)
        EXPECT_NEAR(vmi.values[i], direct.values[i], 1e-10 * std::max(1.0, std::abs(direct.values[i])));
}
