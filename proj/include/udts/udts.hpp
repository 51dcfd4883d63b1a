#pragma once

#include "udts/config.hpp"
#include "udts/dataset.hpp"
#include "udts/errors.hpp"
#include "udts/io.hpp"
#include "udts/losses.hpp"
#include "udts/matrix.hpp"
#include "udts/metrics.hpp"
#include "udts/mlp.hpp"
#include "udts/rng.hpp"
#include "udts/selector.hpp"
#include "udts/sweep.hpp"
#include "udts/threshold.hpp"
#include "udts/trainer.hpp"
#include "udts/uncertainty.hpp"
