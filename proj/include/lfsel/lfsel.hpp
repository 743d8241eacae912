#pragma once

#include "errors.hpp"
#include "trig.hpp"
#include "model.hpp"
#include "grid.hpp"
#include "scheme.hpp"
#include "parallel.hpp"
#include "effective.hpp"
#include "walk.hpp"
#include "bellman.hpp"
#include "orbits.hpp"
#include "barrier.hpp"
#include "experiment.hpp"
#include "config.hpp"
#include "report.hpp"
#include "run.hpp"
