#pragma once

#include "qsmooth/core.hpp"
#include "qsmooth/ensemble.hpp"
#include "qsmooth/errors.hpp"
#include "qsmooth/fpe.hpp"
#include "qsmooth/lindblad.hpp"
#include "qsmooth/pre_solver.hpp"
#include "qsmooth/retrofilter.hpp"
#include "qsmooth/rng.hpp"
#include "qsmooth/scenarios.hpp"
#include "qsmooth/smoother.hpp"
#include "qsmooth/trajectories.hpp"
