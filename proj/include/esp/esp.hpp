#pragma once

// Umbrella header: periodic Coulomb electrostatics via Ewald splitting with
// prolate-spheroidal or Gaussian screen functions.

#include "numerics.hpp"
#include "prolate.hpp"
#include "kernels.hpp"
#include "system.hpp"
#include "threads.hpp"
#include "gridder.hpp"
#include "ewald.hpp"
#include "reference.hpp"
#include "io.hpp"
#include "cli.hpp"
