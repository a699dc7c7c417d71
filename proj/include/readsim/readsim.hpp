#pragma once

// Umbrella header for the multi-reader grading workflow simulator.

#include "readsim/analysis.hpp"
#include "readsim/cohort.hpp"
#include "readsim/config.hpp"
#include "readsim/economics.hpp"
#include "readsim/errors.hpp"
#include "readsim/ledger.hpp"
#include "readsim/readers.hpp"
#include "readsim/report.hpp"
#include "readsim/rng.hpp"
#include "readsim/scenario.hpp"
#include "readsim/scoring.hpp"
#include "readsim/textio.hpp"
#include "readsim/version.hpp"
#include "readsim/workflow.hpp"
