#pragma once

#include "fairmix/error.hpp"
#include "fairmix/rng.hpp"
#include "fairmix/simplex.hpp"
#include "fairmix/response.hpp"
#include "fairmix/decision.hpp"
#include "fairmix/aggregator.hpp"
#include "fairmix/modeldata.hpp"
#include "fairmix/metrics.hpp"
#include "fairmix/fedsim.hpp"
#include "fairmix/config.hpp"
#include "fairmix/experiment.hpp"
#include "fairmix/bench.hpp"
