#pragma once

#include "gsipr/ensemble.hpp"
#include "gsipr/rng.hpp"
#include "gsipr/solver.hpp"
#include "gsipr/spectral.hpp"
#include "gsipr/types.hpp"
#include "gsipr/verify.hpp"
#include "gsipr/bench.hpp"
