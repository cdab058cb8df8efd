#pragma once

#include "mcdnet/tensor.hpp"
#include "mcdnet/profiler.hpp"
#include "mcdnet/gradcheck.hpp"
#include "mcdnet/ops/elementwise.hpp"
#include "mcdnet/ops/conv.hpp"
#include "mcdnet/ops/pooling.hpp"
#include "mcdnet/ops/norm.hpp"
#include "mcdnet/ops/resize.hpp"
#include "mcdnet/ops/loss.hpp"
#include "mcdnet/nn/layers.hpp"
#include "mcdnet/cbam.hpp"
#include "mcdnet/model.hpp"
#include "mcdnet/image.hpp"
#include "mcdnet/data.hpp"
#include "mcdnet/metrics.hpp"
#include "mcdnet/optim.hpp"
#include "mcdnet/checkpoint.hpp"
#include "mcdnet/evaluate.hpp"
#include "mcdnet/train.hpp"
#include "mcdnet/experiments.hpp"
#include "mcdnet/gradcam.hpp"
#include "mcdnet/svg.hpp"
#include "mcdnet/run_config.hpp"
