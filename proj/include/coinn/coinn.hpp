#pragma once

// Umbrella header: the full library surface.

#include "coinn/commands.hpp"
#include "coinn/config.hpp"
#include "coinn/correlations.hpp"
#include "coinn/dataset.hpp"
#include "coinn/errors.hpp"
#include "coinn/experiment.hpp"
#include "coinn/manifest.hpp"
#include "coinn/network.hpp"
#include "coinn/numio.hpp"
#include "coinn/rng.hpp"
#include "coinn/stats.hpp"
#include "coinn/train.hpp"
#include "coinn/version.hpp"
