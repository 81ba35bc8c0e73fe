#pragma once

#include "ctista/errors.hpp"
#include "ctista/numerics.hpp"
#include "ctista/nonlinearity.hpp"
#include "ctista/shrinkage.hpp"
#include "ctista/recovery.hpp"
#include "ctista/baselines.hpp"
#include "ctista/scenarios.hpp"
#include "ctista/training.hpp"
#include "ctista/experiment.hpp"
