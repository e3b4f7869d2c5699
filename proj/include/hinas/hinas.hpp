#pragma once
// Umbrella header.

#include "hinas/checkpoint.hpp"
#include "hinas/compact_net.hpp"
#include "hinas/config.hpp"
#include "hinas/data.hpp"
#include "hinas/dataset.hpp"
#include "hinas/decode.hpp"
#include "hinas/evaluate.hpp"
#include "hinas/genotype.hpp"
#include "hinas/gradcheck.hpp"
#include "hinas/image_io.hpp"
#include "hinas/loss.hpp"
#include "hinas/ops.hpp"
#include "hinas/optim.hpp"
#include "hinas/search.hpp"
#include "hinas/search_space.hpp"
#include "hinas/supernet.hpp"
#include "hinas/task.hpp"
#include "hinas/tensor.hpp"
#include "hinas/topology.hpp"
#include "hinas/train.hpp"
