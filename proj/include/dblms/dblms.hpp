#pragma once

#include "dblms/errors.hpp"
#include "dblms/filter.hpp"
#include "dblms/analysis.hpp"
#include "dblms/rng.hpp"
#include "dblms/parallel.hpp"
#include "dblms/simulation.hpp"
