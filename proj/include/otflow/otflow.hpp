#pragma once

#include "otflow/config.hpp"
#include "otflow/cost.hpp"
#include "otflow/cost_check.hpp"
#include "otflow/density.hpp"
#include "otflow/diagnostics.hpp"
#include "otflow/errors.hpp"
#include "otflow/flow.hpp"
#include "otflow/geometry.hpp"
#include "otflow/grid.hpp"
#include "otflow/io.hpp"
#include "otflow/jet.hpp"
#include "otflow/mtw.hpp"
#include "otflow/oracles.hpp"
#include "otflow/run.hpp"
#include "otflow/transport_map.hpp"
