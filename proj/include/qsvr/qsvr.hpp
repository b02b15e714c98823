#pragma once

#include "qsvr/annotations.hpp"
#include "qsvr/dense.hpp"
#include "qsvr/error.hpp"
#include "qsvr/feature_store.hpp"
#include "qsvr/image.hpp"
#include "qsvr/kernel.hpp"
#include "qsvr/landmark.hpp"
#include "qsvr/lbp.hpp"
#include "qsvr/mccv.hpp"
#include "qsvr/metrics.hpp"
#include "qsvr/model_io.hpp"
#include "qsvr/qubo.hpp"
#include "qsvr/random.hpp"
#include "qsvr/selection.hpp"
#include "qsvr/solvers.hpp"
#include "qsvr/svr.hpp"
#include "qsvr/synthetic.hpp"
#include "qsvr/training_set.hpp"
