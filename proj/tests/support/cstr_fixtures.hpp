#pragma once

// Shared reactor parameter set for tests. Mirrors the shipped defaults; the
// formula-level tests only need *a* plausible operating point, so they keep a
// local copy instead of going through config loading.

#include <cmath>

#include "nmpcmc/cstr.hpp"

namespace fixtures {

inline nmpcmc::CstrParams study_params() {
    nmpcmc::CstrParams p;
    p.V = 0.105;
    p.k0 = std::exp(24.6);
    p.EaR = 8500.0;
    p.beta = 560.0 / 4.186;
    p.cA_in = 0.8;
    p.cB_in = 1.2;
    p.cT_in = 273.65;
    p.sigmaA = 0.06;
    p.sigmaB = 0.06;
    p.sigmaT = 2.5;
    p.u_min = 0.0;
    p.u_max = 1000.0;
    return p;
}

}  // namespace fixtures
