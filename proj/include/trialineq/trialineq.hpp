#pragma once

// Umbrella header for the participation-inequality analytics library.

#include "trialineq/attribution.hpp"
#include "trialineq/classifier.hpp"
#include "trialineq/config.hpp"
#include "trialineq/csv.hpp"
#include "trialineq/decomposition.hpp"
#include "trialineq/disease.hpp"
#include "trialineq/error.hpp"
#include "trialineq/iso3.hpp"
#include "trialineq/metrics.hpp"
#include "trialineq/network.hpp"
#include "trialineq/ols.hpp"
#include "trialineq/panel.hpp"
#include "trialineq/pipeline.hpp"
#include "trialineq/predictors.hpp"
#include "trialineq/report.hpp"
#include "trialineq/rng.hpp"
#include "trialineq/simulation.hpp"
#include "trialineq/stats.hpp"
#include "trialineq/version.hpp"
