#pragma once

#include "lattice_burgers/error.hpp"
#include "lattice_burgers/numerics.hpp"
#include "lattice_burgers/grid.hpp"
#include "lattice_burgers/operators.hpp"
#include "lattice_burgers/rng.hpp"
#include "lattice_burgers/noise.hpp"
#include "lattice_burgers/coefficients.hpp"
#include "lattice_burgers/integrator.hpp"
#include "lattice_burgers/heatkernel.hpp"
#include "lattice_burgers/diagnostics.hpp"
#include "lattice_burgers/version.hpp"
