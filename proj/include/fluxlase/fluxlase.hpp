#pragma once

#include "fluxlase/banded.hpp"
#include "fluxlase/collision.hpp"
#include "fluxlase/core_model.hpp"
#include "fluxlase/equilibria.hpp"
#include "fluxlase/error.hpp"
#include "fluxlase/kinetics.hpp"
#include "fluxlase/laser.hpp"
#include "fluxlase/presets.hpp"
#include "fluxlase/io/format.hpp"
#include "fluxlase/io/config.hpp"
#include "fluxlase/io/experiments.hpp"
