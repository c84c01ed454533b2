#pragma once

// Everything except the HTTP server (sguie/curation_server.hpp).

#include "sguie/checkpoint.hpp"
#include "sguie/curation.hpp"
#include "sguie/dataset.hpp"
#include "sguie/errors.hpp"
#include "sguie/gradcheck.hpp"
#include "sguie/gradcheck_suite.hpp"
#include "sguie/image.hpp"
#include "sguie/metrics.hpp"
#include "sguie/model.hpp"
#include "sguie/ops.hpp"
#include "sguie/optim.hpp"
#include "sguie/pipeline.hpp"
#include "sguie/regions.hpp"
#include "sguie/tensor.hpp"
#include "sguie/trainer.hpp"
