#pragma once

// Umbrella header: incomplete time series classification via joint
// GRU-imputation + multi-scale dilated-convolution feature learning.

#include "checkpoint.hpp"
#include "config.hpp"
#include "core.hpp"
#include "data.hpp"
#include "datagen.hpp"
#include "imputation.hpp"
#include "model.hpp"
#include "msfl.hpp"
#include "nn/activations.hpp"
#include "nn/adam.hpp"
#include "nn/batchnorm.hpp"
#include "nn/conv1d.hpp"
#include "nn/gradcheck.hpp"
#include "nn/linear.hpp"
#include "nn/softmax.hpp"
#include "random.hpp"
#include "training.hpp"
