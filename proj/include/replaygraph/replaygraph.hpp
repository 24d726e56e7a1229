#pragma once

#include "replaygraph/adam.hpp"
#include "replaygraph/cg.hpp"
#include "replaygraph/common.hpp"
#include "replaygraph/data_io.hpp"
#include "replaygraph/experiment.hpp"
#include "replaygraph/graph.hpp"
#include "replaygraph/linear_model.hpp"
#include "replaygraph/metrics.hpp"
#include "replaygraph/mlp_model.hpp"
#include "replaygraph/model.hpp"
#include "replaygraph/replay.hpp"
#include "replaygraph/selection.hpp"
#include "replaygraph/serialization.hpp"
#include "replaygraph/tasks.hpp"
