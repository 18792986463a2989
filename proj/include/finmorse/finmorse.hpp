#pragma once

#include "finmorse/errors.hpp"
#include "finmorse/graph.hpp"
#include "finmorse/graph_io.hpp"
#include "finmorse/linalg.hpp"
#include "finmorse/operator.hpp"
#include "finmorse/spectral.hpp"
#include "finmorse/green.hpp"
#include "finmorse/birman_schwinger.hpp"
#include "finmorse/pipeline.hpp"
#include "finmorse/report.hpp"
#include "finmorse/runner.hpp"
