#pragma once

#include "simlab/errors.hpp"
#include "simlab/linalg.hpp"
#include "simlab/markov.hpp"
#include "simlab/mcmc.hpp"
#include "simlab/montecarlo.hpp"
#include "simlab/processes.hpp"
#include "simlab/rng.hpp"
#include "simlab/samplers.hpp"
#include "simlab/ssa.hpp"
#include "simlab/stats.hpp"

namespace simlab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace simlab
