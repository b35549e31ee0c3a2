#pragma once

#include "gcca/adaptive_direct.hpp"
#include "gcca/csv.hpp"
#include "gcca/dual_lp.hpp"
#include "gcca/errors.hpp"
#include "gcca/harness.hpp"
#include "gcca/linalg.hpp"
#include "gcca/metrics.hpp"
#include "gcca/pencil.hpp"
#include "gcca/seed.hpp"
#include "gcca/signals.hpp"
#include "gcca/stats.hpp"
