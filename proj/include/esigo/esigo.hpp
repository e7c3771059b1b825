#pragma once

#include "esigo/config.hpp"
#include "esigo/discrete.hpp"
#include "esigo/errors.hpp"
#include "esigo/experiment.hpp"
#include "esigo/flow.hpp"
#include "esigo/math.hpp"
#include "esigo/objectives.hpp"
#include "esigo/quantile.hpp"
#include "esigo/rng.hpp"
#include "esigo/sobol.hpp"
#include "esigo/svg.hpp"
#include "esigo/theta.hpp"
#include "esigo/trajectory_io.hpp"
#include "esigo/version.hpp"
#include "esigo/weights.hpp"
