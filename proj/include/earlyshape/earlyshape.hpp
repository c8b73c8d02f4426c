#pragma once

// Convenience header pulling in the whole library.

#include "earlyshape/baselines.hpp"
#include "earlyshape/data.hpp"
#include "earlyshape/error.hpp"
#include "earlyshape/eval.hpp"
#include "earlyshape/export.hpp"
#include "earlyshape/io.hpp"
#include "earlyshape/model_io.hpp"
#include "earlyshape/nn.hpp"
#include "earlyshape/numerics.hpp"
#include "earlyshape/optim.hpp"
#include "earlyshape/parallel.hpp"
#include "earlyshape/sensitivity.hpp"
#include "earlyshape/train.hpp"
