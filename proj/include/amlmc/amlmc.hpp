#pragma once

#include "amlmc/experiments.hpp"
#include "amlmc/fit.hpp"
#include "amlmc/mlmc.hpp"
#include "amlmc/model.hpp"
#include "amlmc/noise.hpp"
#include "amlmc/scheme.hpp"
#include "amlmc/spectral.hpp"
#include "amlmc/stats.hpp"
