// msct-ddd: command-line front end for the data-domain decomposition study.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "msct/pipeline.hpp"

namespace {

using namespace msct;

struct CommonArgs {
    std::string config;
    std::string out;
    std::size_t threads = 1;
    bool png = false;
    bool large = false;
    std::string spectra; // overrides the config
};

void add_common(CLI::App* cmd, CommonArgs& a)
{
    cmd->add_option("--config", a.config, "study config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "output directory (overrides the config)");
    cmd->add_option("--threads", a.threads, "worker threads, 0 = all cores")->default_val(1);
    cmd->add_flag("--png", a.png, "also write 8-bit PNG previews");
    cmd->add_flag("--large", a.large, "use the 256^2 / 360-view torso study when no config is given");
    cmd->add_option("--spectra", a.spectra, "spectra source: built-in name or CSV (overrides the config)");
}

StudyConfig resolve_config(const CommonArgs& a)
{
    StudyConfig c = a.config.empty() ? (a.large ? torso_study_config() : head_study_config())
                                     : load_study_config(a.config);
    if (!a.spectra.empty())
        c.spectra = a.spectra;
    if (!a.out.empty())
        c.output_dir = a.out;
    apply_seed_override(c);
    return c;
}

int report_failure(const std::exception& e)
{
    std::cerr << "msct-ddd: " << e.what() << "\n";
    return 2;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Multispectral CT data-domain decomposition" };
    app.require_subcommand(1);

    CommonArgs args;
    auto* check = app.add_subcommand("check-conditions", "evaluate the solvability conditions; exit 0 iff F is a homeomorphism");
    auto* phantom = app.add_subcommand("gen-phantom", "rasterize the phantom into truth basis images");
    auto* project = app.add_subcommand("project", "project truth basis images into basis sinograms");
    auto* gen_data = app.add_subcommand("gen-data", "generate (noisy) spectral data from basis sinograms");
    auto* decompose = app.add_subcommand("decompose", "invert the data model per ray by Newton's method");
    auto* reconstruct = app.add_subcommand("reconstruct", "FBP of the estimated basis sinograms");
    auto* vmi = app.add_subcommand("vmi", "synthesize virtual monochromatic images");
    auto* gamma = app.add_subcommand("gamma", "stability constant over a box");
    auto* run = app.add_subcommand("run-study", "run every stage and write manifest.json");
    for (auto* cmd : { check, phantom, project, gen_data, decompose, reconstruct, vmi, gamma, run })
        add_common(cmd, args);

    std::vector<double> lo, hi;
    std::size_t grid = 0;
    gamma->add_option("--lo", lo, "lower corner of the box, comma separated")->delimiter(',');
    gamma->add_option("--hi", hi, "upper corner of the box, comma separated")->delimiter(',');
    gamma->add_option("--grid", grid, "samples per axis (overrides the config)");

    CLI11_PARSE(app, argc, argv);

    try {
        StudyConfig cfg = resolve_config(args);
        if (gamma->parsed()) {
            if (!lo.empty() || !hi.empty())
                cfg.gamma.omega = Box { lo, hi };
            if (grid)
                cfg.gamma.grid = grid;
        }
        Study study(cfg, RunOptions { args.threads, args.png });

        if (check->parsed()) {
            const ConditionReport r = study.check_conditions_stage();
            const bool ok = r.homeomorphism.value_or(false);
            std::printf("homeomorphism: %s (report in %s)\n", ok ? "true" : "false",
                (study.dir() / "conditions.json").string().c_str());
            return ok ? 0 : 1;
        }
        if (phantom->parsed())
            study.gen_phantom_stage();
        else if (project->parsed())
            study.project_stage();
        else if (gen_data->parsed())
            study.gen_data_stage();
        else if (decompose->parsed()) {
            const DecomposeResult r = study.decompose_stage();
            if (!r.re_history.empty())
                std::printf("final RE: %.6e, failed rays: %zu\n", r.re_history.back(), r.failures());
        } else if (reconstruct->parsed())
            study.reconstruct_stage();
        else if (vmi->parsed())
            study.vmi_stage();
        else if (gamma->parsed()) {
            const InjectivityVerdict inj = check_global_injectivity(study.model());
            std::filesystem::create_directories(study.dir());
            if (!inj.pass) {
                io::write_json(study.dir() / "gamma.json",
                    json { { "refused", true }, { "global_injective", to_json(inj) } });
                std::cerr << "msct-ddd: global injectivity fails; gamma is undefined\n";
                return 1;
            }
            require(cfg.gamma.omega.has_value(), "gamma needs a box: pass --lo and --hi or set gamma.omega");
            const StabilityResult s = stability_gamma(study.model(), *cfg.gamma.omega, cfg.gamma.grid, args.threads);
            io::write_json(study.dir() / "gamma.json", to_json(s));
            std::printf("gamma = %.6e (log gamma = %.6f)\n", s.gamma, s.log_gamma);
        } else if (run->parsed()) {
            const json m = run_study(study);
            std::printf("study complete: %zu artifacts in %s\n", m.at("artifacts").size(), study.dir().string().c_str());
        }
        return 0;
    } catch (const std::exception& e) {
        return report_failure(e);
    }
}
