// Prints the solvability report for both built-in spectra against the
// water/bone attenuation table.

#include <cstdio>

#include "msct/conditions.hpp"

int main()
{
    using namespace msct;
    for (const char* name : { "spectra1", "spectra2" }) {
        const SpectralModel model = load_model(name, "mac-water-bone");
        const ConditionReport r = check_conditions(model);
        std::printf("%s\n", name);
        std::printf("  det(S B^T)          %.7g\n", r.det_SBt);
        std::printf("  local homeomorphism %s (orientation %s)\n", r.local_homeo.pass ? "yes" : "no",
            to_string(r.local_homeo.orientation));
        if (r.proper_dect) {
            std::printf("  proper              %s\n", r.proper_dect->pass ? "yes" : "no");
            for (const auto& w : r.proper_dect->pairs)
                std::printf("    M(%zu,%zu) = %s\n", w.k, w.l, w.argmax_set.str().c_str());
        }
        std::printf("  homeomorphism       %s\n", r.homeomorphism && *r.homeomorphism ? "yes" : "no");
        std::printf("  globally injective  %s (route %s)\n", r.global_injective.pass ? "yes" : "no",
            to_string(r.global_injective.route));
    }
}
