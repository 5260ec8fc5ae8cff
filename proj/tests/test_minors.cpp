#include <random>

#include <gtest/gtest.h>

#include "msct/minors.hpp"
#include "oracles.hpp"

using namespace msct;

TEST(IndexSet, ValidatesAndOrders)
{
    const IndexSet s(5, { 1, 3, 5 });
    EXPECT_EQ(s.size(), 3u);
    EXPECT_EQ(s[1], 3u);
    EXPECT_EQ(s.offset(2), 4u);
    EXPECT_TRUE(s.contains(3));
    EXPECT_FALSE(s.contains(2));
    EXPECT_EQ(s.str(), "{1,3,5}");
    EXPECT_THROW(IndexSet(5, { 3, 1 }), Error);
    EXPECT_THROW(IndexSet(5, { 1, 1 }), Error);
    EXPECT_THROW(IndexSet(5, { 0 }), Error);
    EXPECT_THROW(IndexSet(5, { 6 }), Error);
}

TEST(IndexSet, SubsetEnumeration)
{
    const auto s = subsets_of_size(4, 2);
    ASSERT_EQ(s.size(), 6u);
    EXPECT_EQ(s.front().indices(), (std::vector<std::size_t> { 1, 2 }));
    EXPECT_EQ(s[2].indices(), (std::vector<std::size_t> { 1, 4 }));
    EXPECT_EQ(s.back().indices(), (std::vector<std::size_t> { 3, 4 }));
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(subsets_of_size(14, 2).size(), 91u);
    EXPECT_EQ(nonempty_subsets(5).size(), 31u);
    EXPECT_EQ(nonempty_subsets(3).back(), IndexSet::all(3));
}

TEST(Minor, ClosedForms)
{
    EXPECT_EQ(minor(Matrix::identity(3), IndexSet(3, { 1, 3 }), IndexSet(3, { 1, 3 })), 1.0);
    EXPECT_EQ(minor(Matrix { { 1, 2 }, { 3, 4 } }, IndexSet::all(2), IndexSet::all(2)), -2.0);
    EXPECT_THROW(minor(Matrix::identity(3), IndexSet(3, { 1, 2 }), IndexSet(3, { 1 })), Error);
    EXPECT_THROW(minor(Matrix::identity(3), IndexSet(), IndexSet()), Error);
}

TEST(Minor, AllThreeMinorsOfRandom5x7MatchCofactorExpansion)
{
    std::mt19937_64 rng(31);
    const Matrix a = oracle::random_matrix(rng, 5, 7, -2.0, 2.0);
    const auto la = oracle::to_long(a);
    std::size_t count = 0;
    for (const auto& rows : subsets_of_size(5, 3))
        for (const auto& cols : subsets_of_size(7, 3)) {
            std::vector<std::size_t> r0, c0;
            for (auto i : rows)
                r0.push_back(i - 1);
            for (auto j : cols)
                c0.push_back(j - 1);
            const long double ref = oracle::cofactor_det(oracle::pick(la, r0, c0));
            const double got = minor(a, rows, cols);
            EXPECT_LE(std::fabs(got - ref), 1e-12 * std::max(1.0L, std::fabs(ref)));
            ++count;
        }
    EXPECT_EQ(count, 10u * 35u);
}

TEST(Minor, LargerMinorsUseLuAndMatchOracle)
{
    std::mt19937_64 rng(32);
    for (std::size_t n : { 4u, 5u, 6u }) {
        const Matrix a = oracle::random_matrix(rng, n, n, -1.0, 1.0);
        const long double ref = oracle::cofactor_det(oracle::to_long(a));
        EXPECT_LE(std::fabs(determinant(a) - ref), 1e-12 * std::max(1.0L, std::fabs(ref)));
    }
}

TEST(CauchyBinet, PaddedIdentity)
{
    const Matrix a { { 1, 0, 0, 0 }, { 0, 1, 0, 0 } };
    EXPECT_EQ(cauchy_binet_det(a, a), 1.0);
}

TEST(CauchyBinet, TabulatedMatchesDirectProduct)
{
    const SpectralModel m = load_model("spectra1", "mac-water-bone");
    const double cb = cauchy_binet_det(m.spectra(), m.mac());
    const long double direct = oracle::det_product(m.spectra(), m.mac());
    EXPECT_LT(oracle::rel_err(cb, direct), 1e-12);
}

TEST(CauchyBinet, Random2x6)
{
    std::mt19937_64 rng(33);
    for (int t = 0; t < 20; ++t) {
        const Matrix a = oracle::random_matrix(rng, 2, 6, -1.0, 1.0);
        const Matrix c = oracle::random_matrix(rng, 2, 6, -1.0, 1.0);
        EXPECT_LT(oracle::rel_err(cauchy_binet_det(a, c), oracle::det_product(a, c)), 1e-12);
    }
}

TEST(CauchyBinet, RejectsWideK)
{
    EXPECT_THROW(cauchy_binet_det(Matrix(3, 2, 1.0), Matrix(3, 2, 1.0)), Error);
}

// Property: 200 random pairs, K in {1,2,3}, M in {K..8}.
TEST(CauchyBinet, PropertyRandomPairs)
{
    std::mt19937_64 rng(34);
    std::uniform_int_distribution<std::size_t> kd(1, 3);
    for (int t = 0; t < 200; ++t) {
        const std::size_t k = kd(rng);
        const std::size_t m = std::uniform_int_distribution<std::size_t>(k, 8)(rng);
        const Matrix a = oracle::random_matrix(rng, k, m, -1.0, 1.0);
        const Matrix c = oracle::random_matrix(rng, k, m, -1.0, 1.0);
        const long double ref = oracle::det_product(a, c);
        // relative to the scale of the summands, so near-cancelling draws stay meaningful
        EXPECT_LE(std::fabs(cauchy_binet_det(a, c) - ref), 1e-10 * std::max(std::fabs(ref), 1e-3L))
            << "K=" << k << " M=" << m;
    }
}

namespace {

long double assembled_g_minor(const SpectralModel& m, const Vector& x, const IndexSet& alpha)
{
    const auto lm = oracle::to_long(m.spectra());
    const auto lb = oracle::to_long(m.mac());
    std::vector<long double> z(m.num_bins());
    for (std::size_t i = 0; i < z.size(); ++i) {
        long double a = 0.0L;
        for (std::size_t k = 0; k < m.num_materials(); ++k)
            a += lb[k][i] * x[k];
        z[i] = std::exp(-a);
    }
    oracle::LMat g(alpha.size(), std::vector<long double>(alpha.size(), 0.0L));
    for (std::size_t r = 0; r < alpha.size(); ++r)
        for (std::size_t c = 0; c < alpha.size(); ++c)
            for (std::size_t i = 0; i < z.size(); ++i)
                g[r][c] += lm[alpha.offset(r)][i] * z[i] * lb[alpha.offset(c)][i];
    return oracle::cofactor_det(g);
}

} // namespace

TEST(PrincipalMinorG, IdentityModel)
{
    const SpectralModel m = SpectralModel::with_nonnegative_mac(Matrix::identity(2), Matrix::identity(2));
    const Vector x { 0.7, -0.2 };
    EXPECT_NEAR(principal_minor_G(m, x, IndexSet::all(2)), std::exp(-0.7) * std::exp(0.2), 1e-15);
}

TEST(PrincipalMinorG, SingletonIsGEntry)
{
    const SpectralModel m = load_model("spectra2", "mac-water-bone");
    const Vector x { 0.4, 0.9 };
    const Vector z = attenuation_factors(m, x);
    double ref = 0.0;
    for (std::size_t i = 0; i < 14; ++i)
        ref += m.spectra()(0, i) * z[i] * m.mac()(0, i);
    EXPECT_NEAR(principal_minor_G(m, x, IndexSet(2, { 1 })), ref, 1e-14 * ref);
}

TEST(PrincipalMinorG, TabulatedMatchesAssembledG)
{
    const SpectralModel m = load_model("spectra1", "mac-water-bone");
    const Vector x { 0.5, 0.1 };
    const double got = principal_minor_G(m, x, IndexSet::all(2));
    EXPECT_LT(oracle::rel_err(got, assembled_g_minor(m, x, IndexSet::all(2))), 1e-12);
    EXPECT_THROW(principal_minor_G(m, x, IndexSet()), Error);
}

TEST(PrincipalMinorG, PropertyRandomModels)
{
    std::mt19937_64 rng(35);
    for (int t = 0; t < 100; ++t) {
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
        const std::size_t mbins = std::uniform_int_distribution<std::size_t>(k, 8)(rng);
        const SpectralModel m(oracle::random_matrix(rng, k, mbins, 0.01, 1.0),
            oracle::random_matrix(rng, k, mbins, 0.1, 2.0));
        Vector x(k);
        for (double& v : x)
            v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        for (const auto& alpha : nonempty_subsets(k)) {
            const long double ref = assembled_g_minor(m, x, alpha);
            const double got = principal_minor_G(m, x, alpha);
            EXPECT_LE(std::fabs(got - ref), 1e-10 * std::max(std::fabs(ref), 1e-6L));
        }
    }
}

TEST(ClassifyP, Examples)
{
    EXPECT_EQ(classify_p_matrix(Matrix::identity(3)), PClass::p_matrix);
    EXPECT_EQ(classify_p_matrix(Matrix { { 1, 2 }, { 2, 1 } }), PClass::neither);
    EXPECT_EQ(classify_p_matrix(Matrix { { 1, 1 }, { 0, 0 } }), PClass::neither);
    // det > 0, a zero diagonal entry: weak P
    EXPECT_EQ(classify_p_matrix(Matrix { { 0, -1 }, { 1, 0 } }), PClass::weak_p_matrix);
    EXPECT_THROW(classify_p_matrix(Matrix(2, 3)), Error);
    try {
        classify_p_matrix(Matrix::identity(13));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::size_limit);
    }
}

TEST(ClassifyP, PropertyHereditary)
{
    std::mt19937_64 rng(36);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
        Matrix a = oracle::random_matrix(rng, n, n, -1.0, 1.0);
        // strict diagonal dominance with a positive diagonal gives a P-matrix
        for (std::size_t i = 0; i < n; ++i)
            a(i, i) = static_cast<double>(n) + 1.0;
        ASSERT_EQ(classify_p_matrix(a), PClass::p_matrix);
        for (const auto& alpha : nonempty_subsets(n))
            EXPECT_EQ(classify_p_matrix(submatrix(a, alpha, alpha)), PClass::p_matrix);
    }
}
