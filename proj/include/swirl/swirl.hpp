#pragma once

#include "swirl/cost.hpp"
#include "swirl/ddp.hpp"
#include "swirl/errors.hpp"
#include "swirl/ftle.hpp"
#include "swirl/gpc.hpp"
#include "swirl/gpc_dynamics.hpp"
#include "swirl/hermite.hpp"
#include "swirl/integrate.hpp"
#include "swirl/io.hpp"
#include "swirl/monte_carlo.hpp"
#include "swirl/physical_model.hpp"
#include "swirl/quadrature.hpp"
#include "swirl/rotlet.hpp"
#include "swirl/scenario.hpp"
#include "swirl/types.hpp"
