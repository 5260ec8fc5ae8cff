#pragma once

// Checkable hypotheses on {S, B} for the local homeomorphism, properness,
// homeomorphism, global injectivity and stability of the map F.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "minors.hpp"
#include "parallel.hpp"
#include "spectral_model.hpp"

namespace msct {

struct SignProduct {
    IndexSet alpha;
    IndexSet beta;
    double product = 0.0; // det(S[alpha,beta]) * det(B[alpha,beta])
};

enum class Orientation { non_negative, non_positive, both, none };

inline const char* to_string(Orientation o)
{
    switch (o) {
    case Orientation::non_negative: return "non-negative";
    case Orientation::non_positive: return "non-positive";
    case Orientation::both: return "both";
    case Orientation::none: return "none";
    }
    return "?";
}

struct LocalHomeoVerdict {
    bool pass = false;
    bool det_nonzero = false;
    Orientation orientation = Orientation::none;
    std::vector<IndexSet> failing_betas;
};

struct ProperWitness {
    std::size_t k = 0;
    std::size_t l = 0;
    IndexSet argmax_set;            // M(k,l)
    std::optional<std::size_t> q;   // 1-based spectrum vanishing on M(k,l)
    std::optional<std::size_t> m0;  // bin in M(k,l) where every spectrum exceeds eps
};

struct ProperVerdict {
    bool pass = false;
    double zero_threshold = 0.0;
    std::vector<ProperWitness> pairs;
};

enum class InjectivityRoute { all_minors, dect_local_homeo, both, none };

inline const char* to_string(InjectivityRoute r)
{
    switch (r) {
    case InjectivityRoute::all_minors: return "all-minors";
    case InjectivityRoute::dect_local_homeo: return "dect-local-homeo";
    case InjectivityRoute::both: return "both";
    case InjectivityRoute::none: return "none";
    }
    return "?";
}

struct InjectivityVerdict {
    bool pass = false;
    bool all_minors_pass = false;
    std::optional<bool> dect_route_pass; // only evaluated for Q == 2
    InjectivityRoute route = InjectivityRoute::none;
    std::vector<SignProduct> failing_pairs;
};

struct Box {
    Vector lo;
    Vector hi;
};

struct StabilityResult {
    double log_gamma = 0.0;   // natural log; gamma itself overflows double for wide boxes
    double gamma = 0.0;       // exp(log_gamma), +inf when that overflows
    double min_log_ratio = 0.0;
    IndexSet beta_min;
    Vector x_min;
    Box omega;
    std::size_t grid = 0;
};

struct ConditionReport {
    double det_SBt = 0.0;
    std::vector<SignProduct> sign_pattern_full;
    LocalHomeoVerdict local_homeo;
    std::optional<ProperVerdict> proper_dect;
    std::optional<bool> homeomorphism;
    InjectivityVerdict global_injective;
    std::optional<StabilityResult> gamma;
    double sign_tolerance = 0.0;
};

// ---------------------------------------------------------------------------

/// Sign tolerance for products of #alpha-minors of S and B.
inline double product_tolerance(const SpectralModel& model, std::size_t order)
{
    const double scale = model.spectra().frobenius_norm() * model.mac().frobenius_norm();
    return 1e-12 * std::pow(std::max(1.0, scale), static_cast<double>(order));
}

inline double det_sbt(const SpectralModel& model)
{
    return determinant(model.spectra() * model.mac().transpose());
}

/// Products det(S[alpha,beta]) det(B[alpha,beta]) over #beta = #alpha, beta in lexicographic order.
inline std::vector<SignProduct> sign_products(const SpectralModel& model, const IndexSet& alpha)
{
    std::vector<SignProduct> out;
    for (auto& beta : subsets_of_size(model.num_bins(), alpha.size())) {
        const double p = minor(model.spectra(), alpha, beta) * minor(model.mac(), alpha, beta);
        out.push_back({ alpha, std::move(beta), p });
    }
    return out;
}

/// argmax over m of b_km / b_lm (k, l 1-based); ties within 1e-12 relative are kept.
inline IndexSet m_index_set(const Matrix& b, std::size_t k, std::size_t l)
{
    require(k != l, "m_index_set needs k != l");
    require(k >= 1 && k <= b.rows() && l >= 1 && l <= b.rows(), "material index out of range");
    std::vector<double> ratio(b.cols());
    for (std::size_t m = 0; m < b.cols(); ++m)
        ratio[m] = b(k - 1, m) / b(l - 1, m);
    const double best = *std::max_element(ratio.begin(), ratio.end());
    std::vector<std::size_t> members;
    for (std::size_t m = 0; m < ratio.size(); ++m)
        if (ratio[m] >= best - 1e-12 * std::abs(best))
            members.push_back(m + 1);
    return IndexSet(b.cols(), std::move(members));
}

inline LocalHomeoVerdict check_local_homeo(const SpectralModel& model)
{
    const std::size_t q = model.num_spectra();
    const double tol = product_tolerance(model, q);
    const auto products = sign_products(model, IndexSet::all(q));

    LocalHomeoVerdict v;
    v.det_nonzero = std::abs(det_sbt(model)) > tol;
    std::vector<IndexSet> negative, positive;
    for (const auto& p : products) {
        if (p.product < -tol)
            negative.push_back(p.beta);
        if (p.product > tol)
            positive.push_back(p.beta);
    }
    if (negative.empty() && positive.empty())
        v.orientation = Orientation::both;
    else if (negative.empty())
        v.orientation = Orientation::non_negative;
    else if (positive.empty())
        v.orientation = Orientation::non_positive;
    else {
        v.orientation = Orientation::none;
        v.failing_betas = negative.size() <= positive.size() ? negative : positive;
    }
    v.pass = v.det_nonzero && v.orientation != Orientation::none;
    return v;
}

inline ProperVerdict check_proper_dect(const SpectralModel& model)
{
    if (model.num_spectra() != 2)
        throw Error(ErrorKind::unsupported_case, "the properness criterion is specific to Q = K = 2");
    ProperVerdict v;
    v.zero_threshold = model.zero_threshold();
    v.pass = true;
    for (auto [k, l] : { std::pair<std::size_t, std::size_t> { 1, 2 }, { 2, 1 } }) {
        ProperWitness w { k, l, m_index_set(model.mac(), k, l), std::nullopt, std::nullopt };
        // among vanishing spectra, report the one with the smallest entries on M(k,l)
        double witness_level = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < model.num_spectra(); ++q) {
            bool vanishes = true;
            double level = 0.0;
            for (auto m : w.argmax_set) {
                vanishes = vanishes && model.spectrum_vanishes(q, m - 1);
                level = std::max(level, model.spectra()(q, m - 1));
            }
            if (vanishes && level < witness_level) {
                w.q = q + 1;
                witness_level = level;
            }
        }
        if (!w.q) {
            v.pass = false;
            for (auto m : w.argmax_set) {
                bool all_positive = true;
                for (std::size_t q = 0; q < model.num_spectra(); ++q)
                    all_positive = all_positive && !model.spectrum_vanishes(q, m - 1);
                if (all_positive) {
                    w.m0 = m;
                    break;
                }
            }
        }
        v.pairs.push_back(std::move(w));
    }
    return v;
}

/// Local homeomorphism plus properness; both legs reported separately by check_conditions.
inline bool check_homeomorphism(const SpectralModel& model)
{
    if (model.num_spectra() != 2)
        throw Error(ErrorKind::unsupported_case, "the homeomorphism criterion is specific to Q = K = 2");
    return check_local_homeo(model).pass && check_proper_dect(model).pass;
}

inline InjectivityVerdict check_global_injectivity(const SpectralModel& model)
{
    const std::size_t q = model.num_spectra();
    InjectivityVerdict v;
    const bool det_ok = std::abs(det_sbt(model)) > product_tolerance(model, q);
    v.all_minors_pass = det_ok;
    for (const auto& alpha : nonempty_subsets(q)) {
        const double tol = product_tolerance(model, alpha.size());
        for (auto& p : sign_products(model, alpha))
            if (p.product < -tol)
                v.failing_pairs.push_back(std::move(p));
    }
    v.all_minors_pass = v.all_minors_pass && v.failing_pairs.empty();
    if (q == 2)
        v.dect_route_pass = check_local_homeo(model).pass;

    const bool dect = v.dect_route_pass.value_or(false);
    if (v.all_minors_pass && dect)
        v.route = InjectivityRoute::both;
    else if (v.all_minors_pass)
        v.route = InjectivityRoute::all_minors;
    else if (dect)
        v.route = InjectivityRoute::dect_local_homeo;
    else
        v.route = InjectivityRoute::none;
    v.pass = v.all_minors_pass || dect;
    return v;
}

/// Stability constant over a box, with the inner minimum over beta and x taken
/// on a uniform grid of `grid` samples per axis (endpoints included):
///   gamma = Q^(Q/2) max|b| / (min ratio) / |det(S B^T)|,
///   ratio(beta, x) = prod_{i in beta} zeta_i(x) / prod_q <s_q, zeta(x)>.
/// The ratio is handled in log form, log ratio = -sum_{i in beta} (B^T x)_i - sum_q F_q(x).
inline StabilityResult stability_gamma(const SpectralModel& model, const Box& omega, std::size_t grid,
    std::size_t threads = 1)
{
    const std::size_t dim = model.num_materials();
    const std::size_t q = model.num_spectra();
    require(omega.lo.size() == dim && omega.hi.size() == dim, "box dimension must match the number of materials");
    require(all_finite(omega.lo) && all_finite(omega.hi), "box must be bounded");
    for (std::size_t k = 0; k < dim; ++k)
        require(omega.lo[k] <= omega.hi[k], "box lower corner exceeds upper corner");
    require(grid >= 2, "grid needs at least 2 samples per axis");
    // for Q = 2 the homeomorphism verdict implies the local-homeomorphism route
    if (!check_global_injectivity(model).pass)
        throw Error(ErrorKind::invalid_input, "stability constant requires an injective model");

    const auto betas = subsets_of_size(model.num_bins(), q);
    std::size_t points = 1;
    for (std::size_t k = 0; k < dim; ++k)
        points *= grid;

    auto point_at = [&](std::size_t linear) {
        Vector x(dim);
        for (std::size_t k = dim; k-- > 0;) {
            const std::size_t i = linear % grid;
            linear /= grid;
            const double t = static_cast<double>(i) / static_cast<double>(grid - 1);
            x[k] = omega.lo[k] + t * (omega.hi[k] - omega.lo[k]);
        }
        return x;
    };

    struct Best {
        double value = std::numeric_limits<double>::infinity();
        std::size_t point = 0;
        std::size_t beta = 0;
    };
    // lexicographic (value, point, beta) so the reduction is chunking-independent
    auto better = [](const Best& a, const Best& b) {
        if (a.value != b.value)
            return a.value < b.value;
        if (a.point != b.point)
            return a.point < b.point;
        return a.beta < b.beta;
    };

    const std::size_t workers = std::min(resolve_threads(threads), points);
    std::vector<Best> partial(workers);
    const std::size_t chunk = (points + workers - 1) / workers;
    parallel_for(workers, workers, [&](std::size_t wb, std::size_t we) {
        for (std::size_t w = wb; w < we; ++w) {
            Best best;
            for (std::size_t p = w * chunk; p < std::min(points, (w + 1) * chunk); ++p) {
                const Vector x = point_at(p);
                const Vector a = detail::path_exponents(model, x);
                const Vector f = forward_map(model, x);
                double sum_f = 0.0;
                for (double v : f)
                    sum_f += v;
                for (std::size_t bi = 0; bi < betas.size(); ++bi) {
                    double s = 0.0;
                    for (auto i : betas[bi])
                        s += a[i - 1];
                    const Best cand { -s - sum_f, p, bi };
                    if (better(cand, best))
                        best = cand;
                }
            }
            partial[w] = best;
        }
    });
    Best best;
    for (const auto& b : partial)
        if (better(b, best))
            best = b;

    double max_b = 0.0;
    for (double v : model.mac().data())
        max_b = std::max(max_b, std::abs(v));
    const double qd = static_cast<double>(q);

    StabilityResult r;
    r.min_log_ratio = best.value;
    r.log_gamma = 0.5 * qd * std::log(qd) + std::log(max_b) - best.value - std::log(std::abs(det_sbt(model)));
    // direct product, exact for small cases; overflows to +inf where log_gamma does not
    r.gamma = std::pow(qd, 0.5 * qd) * max_b / std::abs(det_sbt(model)) * std::exp(-best.value);
    r.beta_min = betas[best.beta];
    r.x_min = point_at(best.point);
    r.omega = omega;
    r.grid = grid;
    return r;
}

/// Runs every checker; the properness and homeomorphism legs only for Q = 2.
inline ConditionReport check_conditions(const SpectralModel& model)
{
    ConditionReport r;
    r.det_SBt = det_sbt(model);
    r.sign_pattern_full = sign_products(model, IndexSet::all(model.num_spectra()));
    r.sign_tolerance = product_tolerance(model, model.num_spectra());
    r.local_homeo = check_local_homeo(model);
    if (model.num_spectra() == 2) {
        r.proper_dect = check_proper_dect(model);
        r.homeomorphism = r.local_homeo.pass && r.proper_dect->pass;
    }
    r.global_injective = check_global_injectivity(model);
    return r;
}

} // namespace msct
