#pragma once

#include "road/dataset.hpp"
#include "road/errors.hpp"
#include "road/harness.hpp"
#include "road/matrix.hpp"
#include "road/metrics.hpp"
#include "road/model_io.hpp"
#include "road/nn.hpp"
#include "road/ratio.hpp"
#include "road/rng.hpp"
#include "road/synthetic.hpp"
#include "road/trainers.hpp"
