#pragma once

// Study orchestration: config parsing, the stage functions behind each CLI
// subcommand, and the hashed manifest. Every stage reads its inputs from and
// writes its outputs to one study directory, so stages can be run one by one
// or all at once by run_study.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <cerrno>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "conditions.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "phantom.hpp"
#include "phantom_builtin.hpp"
#include "recon.hpp"
#include "serialize.hpp"
#include "solver.hpp"
#include "spectral_model.hpp"

namespace msct {

namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kSeedEnvVar = "MSCT_DDD_SEED";
// rays whose final ||F(x) - g|| exceeds this are reported as unconverged
inline constexpr double kConvergedResidual = 1e-8;

struct NoiseConfig {
    double snr_db = 0.0;
    std::uint64_t seed = 0;
};

struct GammaConfig {
    std::optional<Box> omega; // default: bounding box of truth and estimates
    std::size_t grid = 64;
};

struct StudyConfig {
    std::string name = "study";
    std::string phantom = "head";            // built-in name or JSON path
    std::string spectra = "spectra1";        // built-in name or CSV path
    std::string mac = "mac-water-bone";
    double delta_e_kev = SpectralModel::kDefaultBinWidthKeV;
    double zero_threshold = SpectralModel::kDefaultZeroThreshold;
    std::size_t n_views = 180;
    std::size_t n_bins = 181;
    double t_min = -7.05;
    double t_max = 7.05;
    std::optional<Grid> grid;                // default: the phantom's grid
    SolverConfig solver;
    std::optional<NoiseConfig> noise;
    std::vector<std::size_t> vmi_bins { 6, 10 };
    FilterKind filter = FilterKind::ram_lak;
    GammaConfig gamma;
    std::string output_dir = "out";
};

/// 128^2 head study, 180 views x 181 bins.
inline StudyConfig head_study_config(const std::string& spectra = "spectra1")
{
    StudyConfig c;
    c.name = "head-" + spectra;
    c.spectra = spectra;
    return c;
}

/// 256^2 torso study, 360 views x 360 bins.
inline StudyConfig torso_study_config(const std::string& spectra = "spectra1")
{
    StudyConfig c;
    c.name = "torso-" + spectra;
    c.phantom = "torso";
    c.spectra = spectra;
    c.n_views = 360;
    c.n_bins = 360;
    return c;
}

// ---------------------------------------------------------------------------
// config JSON

inline json to_json(const StudyConfig& c)
{
    json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = c.name;
    j["phantom"] = c.phantom;
    j["spectra"] = c.spectra;
    j["mac"] = c.mac;
    j["delta_e_kev"] = c.delta_e_kev;
    j["zero_threshold"] = c.zero_threshold;
    json g = { { "n_views", c.n_views }, { "n_bins", c.n_bins }, { "t_min", c.t_min }, { "t_max", c.t_max } };
    g["grid"] = c.grid ? to_json(*c.grid) : json(nullptr);
    j["geometry"] = g;
    j["solver"] = { { "max_iters", c.solver.max_iters }, { "residual_tol", c.solver.residual_tol },
        { "divergence_cap", c.solver.divergence_cap }, { "singular_rel_tol", c.solver.singular_rel_tol } };
    j["noise"] = c.noise ? json { { "snr_db", c.noise->snr_db }, { "seed", c.noise->seed } } : json(nullptr);
    j["vmi_bins"] = c.vmi_bins;
    j["fbp"] = { { "filter", to_string(c.filter) } };
    j["gamma"] = { { "omega",
                       c.gamma.omega ? json { { "lo", c.gamma.omega->lo }, { "hi", c.gamma.omega->hi } }
                                     : json(nullptr) },
        { "grid", c.gamma.grid } };
    j["output_dir"] = c.output_dir;
    return j;
}

/// Parses a config document. Absent fields keep their defaults; unknown
/// fields are rejected. Relative file references resolve against `base_dir`.
inline StudyConfig study_config_from_json(const json& j, const fs::path& base_dir = {})
{
    using detail::field;
    const std::string w = "config";
    detail::reject_unknown(j,
        { "schema_version", "name", "phantom", "spectra", "mac", "delta_e_kev", "zero_threshold", "geometry", "solver",
            "noise", "vmi_bins", "fbp", "gamma", "output_dir" },
        w);
    const int version = field<int>(j, "schema_version", w);
    require(version == kSchemaVersion, "config: unsupported schema_version " + std::to_string(version));

    StudyConfig c;
    auto resolve = [&](const std::string& src, bool builtin) {
        if (builtin || base_dir.empty() || fs::path(src).is_absolute())
            return src;
        return (base_dir / src).lexically_normal().string();
    };
    if (j.contains("name"))
        c.name = field<std::string>(j, "name", w);
    if (j.contains("phantom")) {
        const auto p = field<std::string>(j, "phantom", w);
        c.phantom = resolve(p, builtin::is_builtin_phantom(p));
    }
    if (j.contains("spectra")) {
        const auto s = field<std::string>(j, "spectra", w);
        c.spectra = resolve(s, is_builtin_table(s));
    }
    if (j.contains("mac")) {
        const auto s = field<std::string>(j, "mac", w);
        c.mac = resolve(s, is_builtin_table(s));
    }
    if (j.contains("delta_e_kev"))
        c.delta_e_kev = field<double>(j, "delta_e_kev", w);
    if (j.contains("zero_threshold"))
        c.zero_threshold = field<double>(j, "zero_threshold", w);
    if (j.contains("geometry")) {
        const json& g = j.at("geometry");
        const std::string gw = w + ".geometry";
        detail::reject_unknown(g, { "n_views", "n_bins", "t_min", "t_max", "grid" }, gw);
        if (g.contains("n_views"))
            c.n_views = field<std::size_t>(g, "n_views", gw);
        if (g.contains("n_bins"))
            c.n_bins = field<std::size_t>(g, "n_bins", gw);
        if (g.contains("t_min"))
            c.t_min = field<double>(g, "t_min", gw);
        if (g.contains("t_max"))
            c.t_max = field<double>(g, "t_max", gw);
        if (g.contains("grid") && !g.at("grid").is_null())
            c.grid = grid_from_json(g.at("grid"), gw + ".grid");
    }
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        const std::string sw = w + ".solver";
        detail::reject_unknown(s, { "max_iters", "residual_tol", "divergence_cap", "singular_rel_tol" }, sw);
        if (s.contains("max_iters"))
            c.solver.max_iters = field<std::size_t>(s, "max_iters", sw);
        if (s.contains("residual_tol"))
            c.solver.residual_tol = field<double>(s, "residual_tol", sw);
        if (s.contains("divergence_cap"))
            c.solver.divergence_cap = field<double>(s, "divergence_cap", sw);
        if (s.contains("singular_rel_tol"))
            c.solver.singular_rel_tol = field<double>(s, "singular_rel_tol", sw);
    }
    if (j.contains("noise") && !j.at("noise").is_null()) {
        const json& n = j.at("noise");
        const std::string nw = w + ".noise";
        detail::reject_unknown(n, { "snr_db", "seed" }, nw);
        c.noise = NoiseConfig { field<double>(n, "snr_db", nw), field<std::uint64_t>(n, "seed", nw) };
    }
    if (j.contains("vmi_bins"))
        c.vmi_bins = field<std::vector<std::size_t>>(j, "vmi_bins", w);
    if (j.contains("fbp")) {
        const json& f = j.at("fbp");
        detail::reject_unknown(f, { "filter" }, w + ".fbp");
        if (f.contains("filter"))
            c.filter = parse_filter_kind(field<std::string>(f, "filter", w + ".fbp"));
    }
    if (j.contains("gamma")) {
        const json& g = j.at("gamma");
        const std::string gw = w + ".gamma";
        detail::reject_unknown(g, { "omega", "grid" }, gw);
        if (g.contains("grid"))
            c.gamma.grid = field<std::size_t>(g, "grid", gw);
        if (g.contains("omega") && !g.at("omega").is_null()) {
            const json& o = g.at("omega");
            detail::reject_unknown(o, { "lo", "hi" }, gw + ".omega");
            c.gamma.omega = Box { field<Vector>(o, "lo", gw + ".omega"), field<Vector>(o, "hi", gw + ".omega") };
        }
    }
    if (j.contains("output_dir"))
        c.output_dir = resolve(field<std::string>(j, "output_dir", w), false);
    return c;
}

inline StudyConfig load_study_config(const fs::path& path)
{
    return study_config_from_json(io::read_json(path), path.parent_path());
}

/// Applies MSCT_DDD_SEED to the noise seed when set.
inline void apply_seed_override(StudyConfig& c)
{
    const char* env = std::getenv(kSeedEnvVar);
    if (!env || !*env || !c.noise)
        return;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    require(errno == 0 && end && *end == '\0', std::string(kSeedEnvVar) + " must be an unsigned integer");
    c.noise->seed = v;
}

inline EllipsePhantom resolve_phantom(const std::string& src)
{
    return builtin::is_builtin_phantom(src) ? builtin::builtin_phantom(src) : load_phantom(src);
}

/// Checks referenced files and value ranges without running anything.
inline void validate(const StudyConfig& c)
{
    for (const auto* src : { &c.spectra, &c.mac })
        if (!is_builtin_table(*src))
            require(fs::exists(*src), "config: file not found: " + *src);
    if (!builtin::is_builtin_phantom(c.phantom))
        require(fs::exists(c.phantom), "config: phantom file not found: " + c.phantom);
    require(c.n_views >= 1 && c.n_bins >= 1, "config: geometry needs at least one view and one bin");
    require(std::isfinite(c.t_min) && std::isfinite(c.t_max) && c.t_max > c.t_min, "config: detector span is degenerate");
    if (c.grid)
        c.grid->validate();
    c.solver.validate();
    if (c.noise)
        require(std::isfinite(c.noise->snr_db), "config: snr_db must be finite");
    require(c.gamma.grid >= 2, "config: gamma grid must have at least 2 points per axis");
    require(!c.output_dir.empty(), "config: output_dir must not be empty");
}

struct RunOptions {
    std::size_t threads = 1;
    bool png = false;
};

// ---------------------------------------------------------------------------

class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause)
        : Error(cause.kind(), "stage '" + stage + "' failed: " + cause.what())
        , stage_(std::move(stage))
    {
    }
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// One study directory plus the resolved config and model.
class Study {
public:
    Study(StudyConfig cfg, RunOptions opts = {})
        : cfg_(std::move(cfg))
        , opts_(opts)
        , dir_(cfg_.output_dir)
    {
        validate(cfg_);
        opts_.threads = resolve_threads(opts_.threads);
    }

    const StudyConfig& config() const noexcept { return cfg_; }
    const fs::path& dir() const noexcept { return dir_; }

    const SpectralModel& model()
    {
        if (!model_)
            model_.emplace(load_model(cfg_.spectra, cfg_.mac, cfg_.delta_e_kev, cfg_.zero_threshold));
        return *model_;
    }

    const EllipsePhantom& phantom()
    {
        if (!phantom_) {
            phantom_ = resolve_phantom(cfg_.phantom);
            require(phantom_->num_materials() == model().num_materials(),
                "phantom materials do not match the MAC table");
        }
        return *phantom_;
    }

    ScanGeometry geometry()
    {
        ScanGeometry g { cfg_.n_views, cfg_.n_bins, cfg_.t_min, cfg_.t_max, cfg_.grid.value_or(phantom().grid) };
        g.validate();
        return g;
    }

    // -- stages --------------------------------------------------------------

    ConditionReport check_conditions_stage()
    {
        ensure_dir();
        ConditionReport r = check_conditions(model());
        io::write_json(dir_ / "conditions.json", to_json(r));
        return r;
    }

    void gen_phantom_stage()
    {
        ensure_dir();
        io::write_json(dir_ / "phantom.json", to_json(phantom()));
        const Grid grid = geometry().grid;
        for (std::size_t k = 0; k < phantom().num_materials(); ++k)
            save_image("truth_image_" + material(k), rasterize(phantom(), grid, k), "g/cm^3");
    }

    void project_stage()
    {
        const ScanGeometry geom = geometry();
        for (std::size_t k = 0; k < phantom().num_materials(); ++k) {
            const Image f = load_image("truth_image_" + material(k), geom.grid);
            save_sinogram("truth_sino_" + material(k), msct::project(geom, f, opts_.threads), "g/cm^2");
        }
    }

    void gen_data_stage()
    {
        const BasisSinograms x = load_basis("truth_sino_");
        const MeasuredData g = generate_data(model(), x, opts_.threads);
        save_data("data_", g);
        if (cfg_.noise) {
            const MeasuredData noisy = add_noise(g, cfg_.noise->snr_db, cfg_.noise->seed);
            save_data("noisy_data_", noisy);
        }
    }

    DecomposeResult decompose_stage()
    {
        const BasisSinograms truth = load_basis("truth_sino_");
        const MeasuredData clean = load_data("data_");
        const MeasuredData data = cfg_.noise ? load_data("noisy_data_") : clean;
        DecomposeResult res = decompose(model(), data, &truth, cfg_.solver, opts_.threads);
        io::write_re_csv(dir_ / "re.csv", res.re_history);
        for (std::size_t k = 0; k < res.estimate.dim; ++k)
            save_sinogram("est_sino_" + material(k), res.estimate.channel(k), "g/cm^2");

        json summary;
        summary["rays"] = data.num_rays();
        summary["iterations"] = cfg_.solver.max_iters;
        summary["final_re"] = res.re_history.empty() ? json(nullptr) : json(res.re_history.back());
        summary["failures"] = res.failures();
        std::size_t singular = 0, diverged = 0;
        for (auto s : res.status) {
            singular += s == RayStatus::singular_jacobian;
            diverged += s == RayStatus::diverged;
        }
        summary["singular_jacobian"] = singular;
        summary["diverged"] = diverged;
        double max_res = 0.0;
        for (double r : res.residual)
            max_res = std::max(max_res, std::isfinite(r) ? r : std::numeric_limits<double>::infinity());
        summary["max_residual"] = detail::number(max_res);
        std::size_t unconverged = 0;
        for (double r : res.residual)
            unconverged += !(r <= kConvergedResidual);
        summary["unconverged"] = unconverged;
        if (cfg_.noise) {
            summary["snr_db"] = snr_db(clean, data);
            // F^-1(g~): the Newton fixed point where the iteration converged, a
            // backtracking solve for rays where ordinary Newton ran away
            const BasisSinograms inverse = reference_inverse(model(), data, &res.estimate, opts_.threads);
            for (std::size_t k = 0; k < inverse.dim; ++k)
                save_sinogram("inverse_sino_" + material(k), inverse.channel(k), "g/cm^2");
            const Box omega = cfg_.gamma.omega ? *cfg_.gamma.omega : bounding_box(truth, inverse);
            const StabilityResult gamma = stability_gamma(model(), omega, cfg_.gamma.grid, opts_.threads);
            io::write_json(dir_ / "gamma.json", to_json(gamma));
            const ErrorSplitReport split = error_split(res.estimate, inverse, truth, clean, data, gamma.gamma);
            summary["error_split"] = to_json(split);
        }
        io::write_json(dir_ / "decompose.json", summary);
        return res;
    }

    void reconstruct_stage()
    {
        const ScanGeometry geom = geometry();
        FbpConfig fc;
        fc.filter = cfg_.filter;
        json rmse = json::object();
        for (std::size_t k = 0; k < model().num_materials(); ++k) {
            const Sinogram s = load_sinogram("est_sino_" + material(k));
            const Image f = fbp_reconstruct(s, geom, fc, opts_.threads);
            save_image("recon_" + material(k), f, "g/cm^3");
            const Image truth = load_image("truth_image_" + material(k), geom.grid);
            rmse[material(k)] = image_rmse(f, truth);
        }
        io::write_json(dir_ / "reconstruct.json", json { { "rmse", rmse } });
    }

    void vmi_stage()
    {
        const Grid grid = geometry().grid;
        std::vector<Image> recon, truth;
        for (std::size_t k = 0; k < model().num_materials(); ++k) {
            recon.push_back(load_image("recon_" + material(k), grid));
            truth.push_back(load_image("truth_image_" + material(k), grid));
        }
        for (std::size_t bin : cfg_.vmi_bins) {
            const std::string tag = "bin" + std::to_string(bin);
            json extra = { { "bin", bin }, { "energy_kev", model().bin_energy_kev(bin) } };
            save_image("vmi_" + tag, synthesize_vmi(model(), recon, bin), "1/cm", extra);
            save_image("truth_vmi_" + tag, synthesize_vmi(model(), truth, bin), "1/cm", extra);
        }
    }

    // -- manifest ------------------------------------------------------------

    /// SHA-256 of every file in the study directory except the manifest, by
    /// path; the resolved config without the output directory.
    json manifest(const std::string& status, const std::string& failed_stage = {}) const
    {
        std::vector<std::string> names;
        if (fs::exists(dir_))
            for (const auto& e : fs::recursive_directory_iterator(dir_))
                if (e.is_regular_file()) {
                    const auto rel = fs::relative(e.path(), dir_).generic_string();
                    if (rel != "manifest.json")
                        names.push_back(rel);
                }
        std::sort(names.begin(), names.end());
        json artifacts = json::object();
        for (const auto& n : names)
            artifacts[n] = io::sha256_file(dir_ / n);
        json cfg = to_json(cfg_);
        cfg.erase("output_dir");
        json m;
        m["schema_version"] = kSchemaVersion;
        m["status"] = status;
        m["failed_stage"] = failed_stage.empty() ? json(nullptr) : json(failed_stage);
        m["config"] = cfg;
        m["artifacts"] = artifacts;
        return m;
    }

    void write_manifest(const std::string& status, const std::string& failed_stage = {})
    {
        ensure_dir();
        io::write_json(dir_ / "manifest.json", manifest(status, failed_stage));
    }

    // -- helpers shared with tests and the CLI -------------------------------

    std::string material(std::size_t k) { return phantom().materials.at(k); }

    BasisSinograms load_basis(const std::string& prefix)
    {
        std::vector<Sinogram> ch;
        for (std::size_t k = 0; k < model().num_materials(); ++k)
            ch.push_back(load_sinogram(prefix + material(k)));
        return BasisSinograms::from_channels(ch);
    }

    MeasuredData load_data(const std::string& prefix)
    {
        std::vector<Sinogram> ch;
        for (std::size_t q = 0; q < model().num_spectra(); ++q)
            ch.push_back(load_sinogram(prefix + "q" + std::to_string(q + 1)));
        return MeasuredData::from_channels(ch);
    }

    Sinogram load_sinogram(const std::string& stem) const
    {
        const fs::path p = dir_ / (stem + ".f64");
        require(fs::exists(p), "missing input " + p.string() + " (run the earlier stage first)", ErrorKind::io);
        return io::read_sinogram(p);
    }

    Image load_image(const std::string& stem, const Grid& grid) const
    {
        const fs::path p = dir_ / (stem + ".f64");
        require(fs::exists(p), "missing input " + p.string() + " (run the earlier stage first)", ErrorKind::io);
        return io::read_image(p, grid);
    }

private:
    void ensure_dir() const { fs::create_directories(dir_); }

    json preview(const std::string& stem, std::span<const double> v, std::size_t rows, std::size_t cols) const
    {
        if (!opts_.png)
            return json::object();
        const auto [lo, hi] = io::write_png(dir_ / (stem + ".png"), v, rows, cols);
        return { { "preview", stem + ".png" }, { "window", { { "min", lo }, { "max", hi } } } };
    }

    void save_image(const std::string& stem, const Image& img, const std::string& units, json extra = json::object())
    {
        ensure_dir();
        extra.update(preview(stem, img.values, img.grid.ny, img.grid.nx));
        io::write_image(dir_ / (stem + ".f64"), img, units, extra);
    }

    void save_sinogram(const std::string& stem, const Sinogram& s, const std::string& units)
    {
        ensure_dir();
        io::write_sinogram(dir_ / (stem + ".f64"), s, units, preview(stem, s.values, s.n_views, s.n_bins));
    }

    void save_data(const std::string& prefix, const MeasuredData& g)
    {
        for (std::size_t q = 0; q < g.dim; ++q)
            save_sinogram(prefix + "q" + std::to_string(q + 1), g.channel(q), "1");
    }

    static Box bounding_box(const BasisSinograms& a, const BasisSinograms& b)
    {
        Box box { Vector(a.dim, std::numeric_limits<double>::infinity()),
            Vector(a.dim, -std::numeric_limits<double>::infinity()) };
        for (const auto* s : { &a, &b })
            for (std::size_t j = 0; j < s->num_rays(); ++j)
                for (std::size_t k = 0; k < s->dim; ++k) {
                    const double v = s->ray(j)[k];
                    if (!std::isfinite(v))
                        continue;
                    box.lo[k] = std::min(box.lo[k], v);
                    box.hi[k] = std::max(box.hi[k], v);
                }
        return box;
    }

    static double image_rmse(const Image& a, const Image& b)
    {
        std::vector<double> sq(a.values.size());
        for (std::size_t i = 0; i < sq.size(); ++i)
            sq[i] = (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
        return std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
    }

    StudyConfig cfg_;
    RunOptions opts_;
    fs::path dir_;
    std::optional<SpectralModel> model_;
    std::optional<EllipsePhantom> phantom_;
};

/// Runs every stage in order and writes the manifest. A failing stage marks
/// the manifest incomplete and is rethrown as a StageError naming the stage.
inline json run_study(Study& study)
{
    struct Stage {
        const char* name;
        std::function<void()> run;
    };
    const std::vector<Stage> stages = {
        { "check-conditions", [&] { study.check_conditions_stage(); } },
        { "gen-phantom", [&] { study.gen_phantom_stage(); } },
        { "project", [&] { study.project_stage(); } },
        { "gen-data", [&] { study.gen_data_stage(); } },
        { "decompose", [&] { study.decompose_stage(); } },
        { "reconstruct", [&] { study.reconstruct_stage(); } },
        { "vmi", [&] { study.vmi_stage(); } },
    };
    for (const auto& s : stages) {
        try {
            s.run();
        } catch (const Error& e) {
            study.write_manifest("incomplete", s.name);
            throw StageError(s.name, e);
        } catch (const std::exception& e) {
            study.write_manifest("incomplete", s.name);
            throw StageError(s.name, Error(ErrorKind::io, e.what()));
        }
    }
    study.write_manifest("complete");
    return io::read_json(study.dir() / "manifest.json");
}

} // namespace msct
