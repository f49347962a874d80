#pragma once

#include "anae/checkpoint.hpp"
#include "anae/dataset.hpp"
#include "anae/experiment.hpp"
#include "anae/gradcheck.hpp"
#include "anae/graph.hpp"
#include "anae/graph_ops.hpp"
#include "anae/logistic.hpp"
#include "anae/metrics.hpp"
#include "anae/model.hpp"
#include "anae/optim.hpp"
#include "anae/sampler.hpp"
#include "anae/split.hpp"
#include "anae/tape.hpp"
#include "anae/train.hpp"
