#pragma once

// Umbrella header for the solver library (everything except the CLI layer).

#include "mfgcvx/calculus.hpp"
#include "mfgcvx/carleman.hpp"
#include "mfgcvx/csv.hpp"
#include "mfgcvx/error.hpp"
#include "mfgcvx/experiments.hpp"
#include "mfgcvx/grid.hpp"
#include "mfgcvx/mfg_model.hpp"
#include "mfgcvx/objective.hpp"
#include "mfgcvx/optimizer.hpp"
#include "mfgcvx/report_io.hpp"
#include "mfgcvx/verification.hpp"
