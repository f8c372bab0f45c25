#pragma once

#include "eigen.hpp"
#include "error.hpp"
#include "experiment_spec.hpp"
#include "experiments.hpp"
#include "graph.hpp"
#include "margin.hpp"
#include "matrix.hpp"
#include "parallel.hpp"
#include "riccati.hpp"
#include "rng.hpp"
#include "sim.hpp"
#include "spectral.hpp"
#include "table.hpp"
#include "version.hpp"
