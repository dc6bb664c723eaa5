#pragma once

#include "vcsgrid/netmodel.hpp"
#include "vcsgrid/case_io.hpp"
#include "vcsgrid/dcflow.hpp"
#include "vcsgrid/graph.hpp"
#include "vcsgrid/sensitivity.hpp"
#include "vcsgrid/lp.hpp"
#include "vcsgrid/dcopf.hpp"
#include "vcsgrid/decomposition.hpp"
#include "vcsgrid/topocontrol.hpp"
#include "vcsgrid/bench.hpp"
