// Newton iteration on one ray: water 10 cm, bone 2 cm.

#include <cmath>
#include <cstdio>

#include "msct/solver.hpp"

int main()
{
    using namespace msct;
    const SpectralModel model = load_model("spectra1", "mac-water-bone");
    const Vector truth { 10.0, 2.0 };
    const Vector g = forward_map(model, truth);
    std::printf("g = (%.12f, %.12f)\n", g[0], g[1]);

    Vector x { 0.0, 0.0 };
    for (int n = 1; n <= 12; ++n) {
        x = newton_step(model, x, g);
        const double err = std::hypot(x[0] - truth[0], x[1] - truth[1]);
        std::printf("%2d  x = (%.15f, %.15f)  |x - x*| = %.3e\n", n, x[0], x[1], err);
    }
}
