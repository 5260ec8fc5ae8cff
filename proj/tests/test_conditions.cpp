#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "msct/conditions.hpp"
#include "oracles.hpp"

using namespace msct;

namespace {

SpectralModel tabulated(const char* spectra) { return load_model(spectra, "mac-water-bone"); }

// rows need not sum to one; the model renormalizes
SpectralModel positive_model()
{
    std::mt19937_64 rng(41);
    return SpectralModel(oracle::random_matrix(rng, 2, 14, 0.01, 1.0), tabulated("spectra1").mac());
}

SpectralModel counterexample_2x3()
{
    // det S[.,{1,2}] det B[.,{1,2}] = 1 * -3 < 0 < det S[.,{1,3}] det B[.,{1,3}] = 0.5 * 2
    return SpectralModel(Matrix { { 1, 0, 0.5 }, { 0, 1, 0.5 } }, Matrix { { 1, 2, 1 }, { 2, 1, 3 } });
}

} // namespace

TEST(MIndexSet, Examples)
{
    const Matrix flat { { 2, 4, 6 }, { 1, 2, 3 } };
    EXPECT_EQ(m_index_set(flat, 1, 2), IndexSet::all(3));
    const Matrix b = tabulated("spectra1").mac();
    EXPECT_EQ(m_index_set(b, 1, 2), IndexSet(14, { 14 }));
    EXPECT_EQ(m_index_set(b, 2, 1), IndexSet(14, { 1 }));
    EXPECT_EQ(m_index_set(Matrix { { 1, 2 }, { 2, 1 } }, 1, 2), IndexSet(2, { 2 }));
    EXPECT_THROW(m_index_set(b, 1, 1), Error);
    EXPECT_THROW(m_index_set(b, 1, 3), Error);
}

TEST(MIndexSet, MatchesRatioScan)
{
    const Matrix b = tabulated("spectra2").mac();
    for (auto [k, l] : { std::pair<std::size_t, std::size_t> { 1, 2 }, { 2, 1 } }) {
        std::size_t arg = 0;
        for (std::size_t m = 1; m < 14; ++m)
            if (b(k - 1, m) / b(l - 1, m) > b(k - 1, arg) / b(l - 1, arg))
                arg = m;
        EXPECT_EQ(m_index_set(b, k, l), IndexSet(14, { arg + 1 }));
    }
}

TEST(LocalHomeo, TabulatedModelsPass)
{
    for (const char* s : { "spectra1", "spectra2" }) {
        const auto v = check_local_homeo(tabulated(s));
        EXPECT_TRUE(v.pass) << s;
        EXPECT_TRUE(v.det_nonzero);
        EXPECT_EQ(v.orientation, Orientation::non_positive);
        EXPECT_TRUE(v.failing_betas.empty());
    }
}

TEST(LocalHomeo, IdenticalRowsFail)
{
    const SpectralModel m(Matrix { { 0.2, 0.3, 0.5 }, { 0.2, 0.3, 0.5 } }, Matrix { { 1, 2, 3 }, { 3, 1, 1 } });
    const auto v = check_local_homeo(m);
    EXPECT_FALSE(v.pass);
    EXPECT_FALSE(v.det_nonzero);
}

TEST(LocalHomeo, MixedSignsReportFailingBetas)
{
    const auto v = check_local_homeo(counterexample_2x3());
    EXPECT_FALSE(v.pass);
    EXPECT_EQ(v.orientation, Orientation::none);
    EXPECT_FALSE(v.failing_betas.empty());
}

TEST(ProperDect, TabulatedSpectra2Witnesses)
{
    const auto v = check_proper_dect(tabulated("spectra2"));
    ASSERT_TRUE(v.pass);
    ASSERT_EQ(v.pairs.size(), 2u);
    EXPECT_EQ(v.pairs[0].k, 1u);
    EXPECT_EQ(v.pairs[0].l, 2u);
    EXPECT_EQ(v.pairs[0].q, 1u); // low-kV vanishes at bin 14
    EXPECT_EQ(v.pairs[1].q, 2u); // filtered high-kV vanishes at bin 1
    EXPECT_FALSE(v.pairs[0].m0.has_value());
    EXPECT_EQ(v.zero_threshold, 1e-8);
}

TEST(ProperDect, TabulatedSpectra1Passes) { EXPECT_TRUE(check_proper_dect(tabulated("spectra1")).pass); }

TEST(ProperDect, ThresholdMatters)
{
    // without zeroing the ~1e-9 bin-1 entries no spectrum vanishes on M(2,1) = {1}
    const auto v = check_proper_dect(tabulated("spectra1").with_zero_threshold(0.0));
    EXPECT_FALSE(v.pass);
    EXPECT_EQ(v.pairs[1].m0, 1u);
}

TEST(ProperDect, StrictlyPositiveSpectraFail)
{
    const auto v = check_proper_dect(positive_model());
    EXPECT_FALSE(v.pass);
    for (const auto& w : v.pairs) {
        EXPECT_FALSE(w.q.has_value());
        ASSERT_TRUE(w.m0.has_value());
        EXPECT_TRUE(w.argmax_set.contains(*w.m0));
    }
}

TEST(ProperDect, UnsupportedBeyondDect)
{
    std::mt19937_64 rng(42);
    const SpectralModel m3(oracle::random_matrix(rng, 3, 5, 0.1, 1.0), oracle::random_matrix(rng, 3, 5, 0.1, 1.0));
    try {
        check_proper_dect(m3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unsupported_case);
    }
    EXPECT_THROW(check_homeomorphism(m3), Error);
}

TEST(Homeomorphism, Verdicts)
{
    EXPECT_TRUE(check_homeomorphism(tabulated("spectra1")));
    EXPECT_TRUE(check_homeomorphism(tabulated("spectra2")));
    EXPECT_FALSE(check_homeomorphism(positive_model()));
}

TEST(GlobalInjectivity, TabulatedViaDectRoute)
{
    for (const char* s : { "spectra1", "spectra2" }) {
        const auto v = check_global_injectivity(tabulated(s));
        EXPECT_TRUE(v.pass) << s;
        EXPECT_FALSE(v.all_minors_pass);
        EXPECT_EQ(v.route, InjectivityRoute::dect_local_homeo);
    }
}

TEST(GlobalInjectivity, SingletonMinorsNeverFail)
{
    std::mt19937_64 rng(43);
    for (int t = 0; t < 20; ++t) {
        const SpectralModel m(oracle::random_matrix(rng, 2, 6, 0.0, 1.0), oracle::random_matrix(rng, 2, 6, 0.1, 1.0));
        for (const auto& p : check_global_injectivity(m).failing_pairs)
            EXPECT_EQ(p.alpha.size(), 2u);
    }
}

TEST(GlobalInjectivity, ConstructedCounterexample)
{
    const auto v = check_global_injectivity(counterexample_2x3());
    EXPECT_FALSE(v.all_minors_pass);
    EXPECT_FALSE(v.pass);
    ASSERT_FALSE(v.failing_pairs.empty());
    EXPECT_EQ(v.failing_pairs[0].alpha, IndexSet::all(2));
    EXPECT_EQ(v.failing_pairs[0].beta, IndexSet(3, { 1, 2 }));
    // cross-check the reported product against the cofactor oracle
    const auto ls = oracle::to_long(counterexample_2x3().spectra());
    const auto lb = oracle::to_long(counterexample_2x3().mac());
    const long double ref = oracle::cofactor_det(oracle::pick(ls, { 0, 1 }, { 0, 1 }))
        * oracle::cofactor_det(oracle::pick(lb, { 0, 1 }, { 0, 1 }));
    EXPECT_LT(oracle::rel_err(v.failing_pairs[0].product, ref), 1e-14);
}

TEST(GlobalInjectivity, AllMinorsRouteOnPositiveProducts)
{
    // diagonal-dominant S and B with equal orientation: every product >= 0
    const SpectralModel m(Matrix { { 0.8, 0.2, 0.0 }, { 0.0, 0.3, 0.7 } }, Matrix { { 3, 2, 1 }, { 1, 2, 3 } });
    const auto v = check_global_injectivity(m);
    EXPECT_TRUE(v.all_minors_pass);
    EXPECT_EQ(v.route, InjectivityRoute::both);
    // all-minors implies the local homeomorphism condition
    EXPECT_TRUE(check_local_homeo(m).pass);
}

// The minor sign condition restricted to alpha = <Q> coincides with the non-negative branch of
// the local-homeomorphism sign test.
TEST(ConditionsProperty, SignConditionConsistency)
{
    std::mt19937_64 rng(44);
    for (int t = 0; t < 100; ++t) {
        const std::size_t mb = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
        const SpectralModel m(oracle::random_matrix(rng, 2, mb, 0.0, 1.0), oracle::random_matrix(rng, 2, mb, 0.1, 1.0));
        const auto inj = check_global_injectivity(m);
        bool full_nonneg = true;
        for (const auto& p : inj.failing_pairs)
            full_nonneg = full_nonneg && p.alpha.size() != 2;
        const auto lh = check_local_homeo(m);
        const bool nonneg_branch = lh.orientation == Orientation::non_negative || lh.orientation == Orientation::both;
        EXPECT_EQ(full_nonneg, nonneg_branch) << "trial " << t;
    }
}

TEST(ConditionsProperty, JacobianDeterminantAtOrigin)
{
    for (const char* s : { "spectra1", "spectra2" }) {
        const SpectralModel m = tabulated(s);
        const double d = determinant(jacobian(m, Vector { 0, 0 }));
        EXPECT_LT(oracle::rel_err(d, oracle::det_product(m.spectra(), m.mac())), 1e-10); // (-1)^2 = 1
    }
    std::mt19937_64 rng(45);
    const SpectralModel m3(oracle::random_matrix(rng, 3, 6, 0.1, 1.0), oracle::random_matrix(rng, 3, 6, 0.1, 1.0));
    const double d3 = determinant(jacobian(m3, Vector { 0, 0, 0 }));
    EXPECT_LT(oracle::rel_err(d3, -oracle::det_product(m3.spectra(), m3.mac())), 1e-10);
}

TEST(ConditionsProperty, LocalHomeoKeepsJacobianNonsingular)
{
    std::mt19937_64 rng(46);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (const char* s : { "spectra1", "spectra2" }) {
        const SpectralModel m = tabulated(s);
        ASSERT_TRUE(check_local_homeo(m).pass);
        // det DF(x) = det(S~(x) B^T); every Cauchy-Binet term has the same sign
        // here, so the expansion does not cancel the way the 2x2 product does
        for (int t = 0; t < 1000; ++t) {
            const Vector x { u(rng), u(rng) };
            EXPECT_LT(cauchy_binet_det(normalized_weights(m, x), m.mac()), 0.0);
        }
    }
}

TEST(ConditionsProperty, NonPropernessRay)
{
    const SpectralModel m = positive_model();
    const auto proper = check_proper_dect(m);
    ASSERT_FALSE(proper.pass);
    const auto& w = proper.pairs[0];
    const std::size_t k1 = w.k - 1, k2 = w.l - 1, m0 = *w.m0 - 1;
    const double bbar = m.mac()(k1, m0) / m.mac()(k2, m0);
    double prev = 0.0;
    for (double r : { 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6 }) {
        Vector x(2, 0.0);
        x[k1] = -r;
        x[k2] = r * bbar;
        const double n = norm2(forward_map(m, x));
        EXPECT_TRUE(std::isfinite(n));
        EXPECT_LT(n, 50.0) << "r=" << r;
        prev = n;
    }
    // the limit is |ln s_m0| per component, which is bounded
    double lim = 0.0;
    for (std::size_t q = 0; q < 2; ++q)
        lim += std::pow(std::log(m.spectra()(q, m0)), 2);
    EXPECT_NEAR(prev, std::sqrt(lim), 1e-6);
}

TEST(ConditionReport, FieldsAndInvariants)
{
    for (const char* s : { "spectra1", "spectra2" }) {
        const SpectralModel m = tabulated(s);
        const ConditionReport r = check_conditions(m);
        EXPECT_EQ(r.sign_pattern_full.size(), 91u);
        EXPECT_EQ(r.sign_pattern_full.front().beta, IndexSet(14, { 1, 2 }));
        EXPECT_EQ(r.sign_pattern_full.back().beta, IndexSet(14, { 13, 14 }));
        EXPECT_LT(r.det_SBt, 0.0);
        ASSERT_TRUE(r.homeomorphism.has_value());
        EXPECT_EQ(*r.homeomorphism, r.local_homeo.pass && r.proper_dect->pass);
        EXPECT_TRUE(r.global_injective.pass);
        if (r.global_injective.all_minors_pass) {
            EXPECT_TRUE(r.local_homeo.pass);
        }
    }
    EXPECT_NEAR(check_conditions(tabulated("spectra1")).det_SBt, -0.0458096, 1e-6);
    EXPECT_NEAR(check_conditions(tabulated("spectra2")).det_SBt, -0.0976, 5e-4);
}

// ---------------------------------------------------------------------------
// stability constant

TEST(StabilityGamma, IdentityToyModelIsTwo)
{
    const SpectralModel m = SpectralModel::with_nonnegative_mac(Matrix::identity(2), Matrix::identity(2));
    const auto g = stability_gamma(m, Box { { 0, 0 }, { 0, 0 } }, 2);
    EXPECT_EQ(g.gamma, 2.0);
    EXPECT_EQ(g.beta_min, IndexSet::all(2));
}

TEST(StabilityGamma, IdentityModelClosedFormOnBox)
{
    // ratio = zeta_1 zeta_2 / (zeta_1 zeta_2) = 1 everywhere
    const SpectralModel m = SpectralModel::with_nonnegative_mac(Matrix::identity(2), Matrix::identity(2));
    const auto g = stability_gamma(m, Box { { -1, -2 }, { 3, 4 } }, 7);
    EXPECT_NEAR(g.gamma, 2.0, 1e-15);
}

TEST(StabilityGamma, TabulatedGridDoublingWithinFivePercent)
{
    const SpectralModel m = tabulated("spectra1");
    const Box omega { { 0, 0 }, { 60, 30 } };
    const auto g64 = stability_gamma(m, omega, 64);
    const auto g128 = stability_gamma(m, omega, 128);
    EXPECT_TRUE(std::isfinite(g64.log_gamma));
    EXPECT_GT(g64.log_gamma, 0.0);
    EXPECT_LE(std::abs(std::expm1(g128.log_gamma - g64.log_gamma)), 0.05);
    // the minimizer sits at the far corner of the box
    EXPECT_EQ(g64.x_min, (Vector { 60, 30 }));
    // regression constant, first computed by this implementation
    EXPECT_NEAR(g64.log_gamma, 1179.40, 0.01);
}

TEST(StabilityGamma, LogDomainMatchesDirectFormulaOnSmallBox)
{
    const SpectralModel m = tabulated("spectra2");
    const Box omega { { 0, 0 }, { 2, 1 } };
    const auto g = stability_gamma(m, omega, 5);
    // direct evaluation in long double over the same grid
    const auto lm = oracle::tabulated(builtin::kSpectra2);
    long double best = INFINITY;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const std::vector<long double> x { 2.0L * i / 4, 1.0L * j / 4 };
            const auto z = oracle::zeta(lm, x);
            long double den = 1.0L;
            for (std::size_t q = 0; q < 2; ++q) {
                long double s = 0.0L;
                for (std::size_t b = 0; b < 14; ++b)
                    s += lm.s[q][b] * z[b];
                den *= s;
            }
            for (std::size_t a = 0; a < 14; ++a)
                for (std::size_t b = a + 1; b < 14; ++b)
                    best = std::min(best, z[a] * z[b] / den);
        }
    long double maxb = 0.0L;
    for (const auto& row : lm.b)
        for (long double v : row)
            maxb = std::max(maxb, v);
    const long double det = oracle::det_product(m.spectra(), m.mac());
    const long double ref = 2.0L * maxb / best / std::fabs(det);
    EXPECT_LT(oracle::rel_err(g.gamma, ref), 1e-10);
}

TEST(StabilityGamma, ShrinkingBoxNeverIncreasesGamma)
{
    const SpectralModel m = tabulated("spectra1");
    // nested grids: step 15 x 7.5 in every box
    const auto big = stability_gamma(m, Box { { 0, 0 }, { 60, 30 } }, 5);
    const auto mid = stability_gamma(m, Box { { 0, 0 }, { 30, 15 } }, 3);
    const auto small = stability_gamma(m, Box { { 0, 0 }, { 0, 0 } }, 2);
    EXPECT_LE(mid.log_gamma, big.log_gamma);
    EXPECT_LE(small.log_gamma, mid.log_gamma);
}

TEST(StabilityGamma, IndependentOfWorkerCount)
{
    const SpectralModel m = tabulated("spectra2");
    const Box omega { { -2, -1 }, { 12, 6 } };
    const auto g1 = stability_gamma(m, omega, 40, 1);
    for (std::size_t t : { 2u, 3u, 7u }) {
        const auto gt = stability_gamma(m, omega, 40, t);
        EXPECT_EQ(gt.log_gamma, g1.log_gamma);
        EXPECT_EQ(gt.x_min, g1.x_min);
        EXPECT_EQ(gt.beta_min, g1.beta_min);
    }
}

TEST(StabilityGamma, Preconditions)
{
    EXPECT_THROW(stability_gamma(counterexample_2x3(), Box { { 0, 0 }, { 1, 1 } }, 4), Error);
    EXPECT_THROW(stability_gamma(tabulated("spectra1"), Box { { 0, 0 }, { 1, 1 } }, 1), Error);
    EXPECT_THROW(stability_gamma(tabulated("spectra1"), Box { { 1, 0 }, { 0, 1 } }, 4), Error);
    EXPECT_THROW(stability_gamma(tabulated("spectra1"), Box { { 0 }, { 1 } }, 4), Error);
}
