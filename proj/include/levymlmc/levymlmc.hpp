#pragma once

#include "levymlmc/rng.hpp"
#include "levymlmc/quadrature.hpp"
#include "levymlmc/special_functions.hpp"
#include "levymlmc/levy_models.hpp"
#include "levymlmc/levy_copula.hpp"
#include "levymlmc/jump_measure.hpp"
#include "levymlmc/sampling.hpp"
#include "levymlmc/ctmc_grid.hpp"
#include "levymlmc/coupling.hpp"
#include "levymlmc/path_sim.hpp"
#include "levymlmc/mlmc.hpp"
#include "levymlmc/sde_euler.hpp"
#include "levymlmc/payoffs.hpp"
#include "levymlmc/config.hpp"
#include "levymlmc/csv.hpp"
