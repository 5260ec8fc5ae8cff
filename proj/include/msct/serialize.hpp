#pragma once

// JSON forms of phantoms, grids and checker reports.

#include <cmath>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "conditions.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "phantom.hpp"
#include "solver.hpp"

namespace msct {

using json = nlohmann::ordered_json;

namespace detail {
    // JSON has no inf/nan; they are written as strings
    inline json number(double v)
    {
        if (std::isfinite(v))
            return v;
        if (std::isnan(v))
            return "nan";
        return v > 0 ? "inf" : "-inf";
    }

    template <class T>
    T field(const json& j, const char* key, const std::string& where)
    {
        if (!j.contains(key))
            throw Error(ErrorKind::invalid_input, where + ": missing field '" + key + "'");
        try {
            return j.at(key).get<T>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::invalid_input, where + ": field '" + key + "': " + e.what());
        }
    }

    inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
    {
        if (!j.is_object())
            throw Error(ErrorKind::invalid_input, where + ": expected a JSON object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool ok = false;
            for (const char* a : allowed)
                ok = ok || it.key() == a;
            if (!ok)
                throw Error(ErrorKind::invalid_input, where + ": unknown field '" + it.key() + "'");
        }
    }
} // namespace detail

inline json to_json(const Grid& g)
{
    return { { "nx", g.nx }, { "ny", g.ny }, { "x_min", g.x_min }, { "x_max", g.x_max }, { "y_min", g.y_min },
        { "y_max", g.y_max } };
}

inline Grid grid_from_json(const json& j, const std::string& where = "grid")
{
    detail::reject_unknown(j, { "nx", "ny", "x_min", "x_max", "y_min", "y_max" }, where);
    Grid g { detail::field<std::size_t>(j, "nx", where), detail::field<std::size_t>(j, "ny", where),
        detail::field<double>(j, "x_min", where), detail::field<double>(j, "x_max", where),
        detail::field<double>(j, "y_min", where), detail::field<double>(j, "y_max", where) };
    g.validate();
    return g;
}

inline json to_json(const EllipsePhantom& ph)
{
    json ellipses = json::array();
    for (const auto& e : ph.ellipses)
        ellipses.push_back({ { "cx", e.cx }, { "cy", e.cy }, { "a", e.a }, { "b", e.b }, { "angle_deg", e.angle_deg },
            { "density", e.density } });
    return { { "grid", to_json(ph.grid) }, { "materials", ph.materials }, { "ellipses", ellipses } };
}

inline EllipsePhantom phantom_from_json(const json& j, const std::string& where = "phantom")
{
    detail::reject_unknown(j, { "grid", "materials", "ellipses" }, where);
    EllipsePhantom ph;
    ph.grid = grid_from_json(detail::field<json>(j, "grid", where), where + ".grid");
    ph.materials = detail::field<std::vector<std::string>>(j, "materials", where);
    const json list = detail::field<json>(j, "ellipses", where);
    if (!list.is_array())
        throw Error(ErrorKind::invalid_input, where + ".ellipses must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string w = where + ".ellipses[" + std::to_string(i) + "]";
        const json& e = list[i];
        detail::reject_unknown(e, { "cx", "cy", "a", "b", "angle_deg", "density" }, w);
        ph.ellipses.push_back({ detail::field<double>(e, "cx", w), detail::field<double>(e, "cy", w),
            detail::field<double>(e, "a", w), detail::field<double>(e, "b", w),
            e.contains("angle_deg") ? detail::field<double>(e, "angle_deg", w) : 0.0,
            detail::field<std::vector<double>>(e, "density", w) });
    }
    ph.validate();
    return ph;
}

inline EllipsePhantom load_phantom(const std::filesystem::path& path)
{
    return phantom_from_json(io::read_json(path), path.string());
}

// ---------------------------------------------------------------------------
// checker reports

inline json to_json(const IndexSet& s) { return s.indices(); }

inline json to_json(const SignProduct& p)
{
    return { { "alpha", to_json(p.alpha) }, { "beta", to_json(p.beta) }, { "product", p.product } };
}

inline json to_json(const LocalHomeoVerdict& v)
{
    json fails = json::array();
    for (const auto& b : v.failing_betas)
        fails.push_back(to_json(b));
    return { { "pass", v.pass }, { "det_nonzero", v.det_nonzero }, { "orientation", to_string(v.orientation) },
        { "failing_betas", fails } };
}

inline json to_json(const ProperVerdict& v)
{
    json pairs = json::array();
    for (const auto& w : v.pairs) {
        json p = { { "k", w.k }, { "l", w.l }, { "argmax_set", to_json(w.argmax_set) } };
        p["q"] = w.q ? json(*w.q) : json(nullptr);
        p["m0"] = w.m0 ? json(*w.m0) : json(nullptr);
        pairs.push_back(p);
    }
    return { { "pass", v.pass }, { "zero_threshold", v.zero_threshold }, { "pairs", pairs } };
}

inline json to_json(const InjectivityVerdict& v)
{
    json fails = json::array();
    for (const auto& p : v.failing_pairs)
        fails.push_back(to_json(p));
    return { { "pass", v.pass }, { "all_minors_pass", v.all_minors_pass },
        { "dect_route_pass", v.dect_route_pass ? json(*v.dect_route_pass) : json(nullptr) },
        { "route", to_string(v.route) }, { "failing_pairs", fails } };
}

inline json to_json(const StabilityResult& s)
{
    return { { "gamma", detail::number(s.gamma) }, { "log_gamma", detail::number(s.log_gamma) },
        { "min_log_ratio", detail::number(s.min_log_ratio) }, { "beta_min", to_json(s.beta_min) },
        { "x_min", s.x_min }, { "omega", { { "lo", s.omega.lo }, { "hi", s.omega.hi } } }, { "grid", s.grid } };
}

inline json to_json(const ConditionReport& r)
{
    json full = json::array();
    for (const auto& p : r.sign_pattern_full)
        full.push_back(to_json(p));
    return { { "det_SBt", r.det_SBt }, { "sign_pattern_full", full }, { "local_homeo", to_json(r.local_homeo) },
        { "proper_dect", r.proper_dect ? to_json(*r.proper_dect) : json(nullptr) },
        { "homeomorphism", r.homeomorphism ? json(*r.homeomorphism) : json(nullptr) },
        { "global_injective", to_json(r.global_injective) },
        { "gamma", r.gamma ? to_json(*r.gamma) : json(nullptr) }, { "sign_tolerance", r.sign_tolerance } };
}

inline json to_json(const ErrorSplitReport& r)
{
    double worst = 0.0; // max actual / bound over rays with a finite bound
    double max_e1 = 0.0, max_e2 = 0.0;
    for (std::size_t j = 0; j < r.actual.size(); ++j) {
        max_e1 = std::max(max_e1, r.error1[j]);
        max_e2 = std::max(max_e2, r.error2[j]);
        const double bound = r.error2[j] == 0.0 ? r.error1[j] : r.error1[j] + r.gamma * r.error2[j];
        if (std::isfinite(bound) && bound > 0.0)
            worst = std::max(worst, r.actual[j] / bound);
    }
    return { { "rays", r.actual.size() }, { "violations", r.violations() }, { "gamma", detail::number(r.gamma) },
        { "max_error1", max_e1 }, { "max_error2", max_e2 }, { "max_actual_over_bound", worst } };
}

} // namespace msct
