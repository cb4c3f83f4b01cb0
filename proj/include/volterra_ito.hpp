#pragma once

#include "volterra_ito/errors.hpp"
#include "volterra_ito/grid.hpp"
#include "volterra_ito/quadrature.hpp"
#include "volterra_ito/kernel.hpp"
#include "volterra_ito/sandbox.hpp"
#include "volterra_ito/rng.hpp"
#include "volterra_ito/parallel.hpp"
#include "volterra_ito/paths.hpp"
#include "volterra_ito/bracket.hpp"
#include "volterra_ito/test_function.hpp"
#include "volterra_ito/itoverify.hpp"
#include "volterra_ito/approx.hpp"

namespace vito {
inline constexpr const char* kVersion = "0.1.0";
}
