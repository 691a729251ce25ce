#pragma once

// Umbrella header: frame-selection + event-recognition pipelines over
// precomputed frame-feature sequences, with a rhythm-perturbation evaluation
// protocol and a synthetic rhythm-varying benchmark.

#include "framesel/adam.hpp"
#include "framesel/cells.hpp"
#include "framesel/checkpoint.hpp"
#include "framesel/classifier.hpp"
#include "framesel/config.hpp"
#include "framesel/errors.hpp"
#include "framesel/gradcheck.hpp"
#include "framesel/harness.hpp"
#include "framesel/policy.hpp"
#include "framesel/rhythm.hpp"
#include "framesel/rng.hpp"
#include "framesel/selector.hpp"
#include "framesel/tape.hpp"
#include "framesel/tensor.hpp"
