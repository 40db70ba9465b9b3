#pragma once

#include "ejko/costs.hpp"
#include "ejko/entropic_ot.hpp"
#include "ejko/error.hpp"
#include "ejko/free_energy.hpp"
#include "ejko/grid_measure.hpp"
#include "ejko/jko.hpp"
#include "ejko/kernel.hpp"
#include "ejko/kramers_oracle.hpp"
#include "ejko/numerics.hpp"
