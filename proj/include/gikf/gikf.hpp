#pragma once

// Umbrella header for the GIKF laboratory.

#include "gikf/acceptance.hpp"
#include "gikf/config.hpp"
#include "gikf/detectability.hpp"
#include "gikf/filter_engine.hpp"
#include "gikf/io.hpp"
#include "gikf/matrix_ops.hpp"
#include "gikf/measure_lab.hpp"
#include "gikf/network.hpp"
#include "gikf/parallel.hpp"
#include "gikf/reference_configs.hpp"
#include "gikf/rng.hpp"
#include "gikf/stats.hpp"
