#pragma once

#include "loadveil/appliance.hpp"
#include "loadveil/battery.hpp"
#include "loadveil/blh.hpp"
#include "loadveil/harness.hpp"
#include "loadveil/llh.hpp"
#include "loadveil/metrics.hpp"
#include "loadveil/nilm.hpp"
#include "loadveil/rng.hpp"
#include "loadveil/trace.hpp"
#include "loadveil/trace_io.hpp"
