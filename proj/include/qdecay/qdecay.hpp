#pragma once

#include "qdecay/error.hpp"
#include "qdecay/rng.hpp"
#include "qdecay/parallel.hpp"
#include "qdecay/bath.hpp"
#include "qdecay/propagator.hpp"
#include "qdecay/dynamics.hpp"
#include "qdecay/analytics.hpp"
#include "qdecay/hybrid.hpp"
#include "qdecay/config.hpp"
#include "qdecay/presets.hpp"
#include "qdecay/runner.hpp"
