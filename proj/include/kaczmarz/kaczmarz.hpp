#pragma once

// Umbrella header for the row-action solver library: greedy and inertial
// Kaczmarz variants, their convergence certificates, and the experiment
// tooling around them.

#include "kaczmarz/bench.hpp"
#include "kaczmarz/certificates.hpp"
#include "kaczmarz/coherence.hpp"
#include "kaczmarz/errors.hpp"
#include "kaczmarz/greedy.hpp"
#include "kaczmarz/linear_system.hpp"
#include "kaczmarz/matrix_market.hpp"
#include "kaczmarz/problem.hpp"
#include "kaczmarz/rng.hpp"
#include "kaczmarz/solvers.hpp"
#include "kaczmarz/spectral.hpp"
#include "kaczmarz/storage.hpp"
#include "kaczmarz/trace_io.hpp"
