#pragma once

// Shipped synthetic phantoms (water / bone basis densities in g/cm^3).
// "head" approximates a skull section: a bone shell, water-density brain,
// ventricles, a frontal sinus, petrous bone and two small lesions. "torso" is
// a thorax-like section with lungs, heart, aorta, spine, sternum and ribs.
// Both live on [-5, 5]^2 cm. data/phantoms/*.json mirror these definitions.

#include <string>
#include <vector>

#include "error.hpp"
#include "phantom.hpp"

namespace msct::builtin {

inline EllipsePhantom head_phantom(std::size_t n = 128)
{
    EllipsePhantom ph;
    ph.grid = square_grid(n, 5.0);
    ph.materials = { "water", "bone" };
    ph.ellipses = {
        { 0.0, 0.0, 4.4, 4.7, 0.0, { 0.0, 1.2 } },     // skull, outer
        { 0.0, 0.0, 4.0, 4.3, 0.0, { 1.0, -1.2 } },    // brain
        { -0.6, 0.5, 0.35, 1.1, 18.0, { -0.03, 0.0 } }, // ventricles
        { 0.6, 0.5, 0.35, 1.1, -18.0, { -0.03, 0.0 } },
        { 0.0, 3.4, 0.7, 0.35, 0.0, { -1.0, 0.0 } },    // frontal sinus (air)
        { -3.4, -0.8, 0.3, 0.6, 30.0, { 0.0, 0.6 } },   // petrous bone
        { 3.4, -0.8, 0.3, 0.6, -30.0, { 0.0, 0.6 } },
        { -1.5, -2.0, 0.4, 0.4, 0.0, { 0.05, 0.0 } },   // soft lesion
        { 1.8, -1.8, 0.25, 0.25, 0.0, { 0.0, 0.2 } },   // calcification
    };
    return ph;
}

inline EllipsePhantom torso_phantom(std::size_t n = 256)
{
    EllipsePhantom ph;
    ph.grid = square_grid(n, 5.0);
    ph.materials = { "water", "bone" };
    ph.ellipses = {
        { 0.0, 0.0, 4.8, 3.4, 0.0, { 1.0, 0.0 } },       // body
        { -2.4, 0.4, 1.4, 2.1, 8.0, { -0.75, 0.0 } },    // lungs
        { 2.4, 0.4, 1.4, 2.1, -8.0, { -0.75, 0.0 } },
        { 0.2, 0.3, 1.0, 0.9, 30.0, { 0.05, 0.0 } },     // heart
        { -0.5, -1.4, 0.4, 0.4, 0.0, { 0.06, 0.0 } },    // aorta
        { 0.0, -2.4, 0.6, 0.6, 0.0, { 0.0, 0.8 } },      // vertebra
        { 0.0, -2.4, 0.25, 0.25, 0.0, { 0.0, -0.8 } },   // spinal canal
        { 0.0, 2.9, 0.5, 0.2, 0.0, { 0.0, 0.6 } },       // sternum
        { -3.9, 1.6, 0.3, 0.15, 40.0, { 0.0, 0.7 } },    // ribs
        { 3.9, 1.6, 0.3, 0.15, -40.0, { 0.0, 0.7 } },
        { -4.3, -0.8, 0.3, 0.15, 80.0, { 0.0, 0.7 } },
        { 4.3, -0.8, 0.3, 0.15, -80.0, { 0.0, 0.7 } },
        { -3.4, -2.3, 0.3, 0.15, -50.0, { 0.0, 0.7 } },
        { 3.4, -2.3, 0.3, 0.15, 50.0, { 0.0, 0.7 } },
    };
    return ph;
}

/// Centered water disk, radius 2 cm.
inline EllipsePhantom disk_phantom(std::size_t n = 128)
{
    EllipsePhantom ph;
    ph.grid = square_grid(n, 5.0);
    ph.materials = { "water", "bone" };
    ph.ellipses = { { 0.0, 0.0, 2.0, 2.0, 0.0, { 1.0, 0.0 } } };
    return ph;
}

inline std::vector<std::string> builtin_phantom_names() { return { "head", "torso", "disk" }; }

inline bool is_builtin_phantom(const std::string& name)
{
    return name == "head" || name == "torso" || name == "disk";
}

inline EllipsePhantom builtin_phantom(const std::string& name)
{
    if (name == "head")
        return head_phantom();
    if (name == "torso")
        return torso_phantom();
    if (name == "disk")
        return disk_phantom();
    throw Error(ErrorKind::invalid_input, "unknown built-in phantom '" + name + "'");
}

} // namespace msct::builtin
