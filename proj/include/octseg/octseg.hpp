#pragma once

#include "octseg/common.hpp"
#include "octseg/config.hpp"
#include "octseg/dataio.hpp"
#include "octseg/dataprep.hpp"
#include "octseg/filters.hpp"
#include "octseg/losses.hpp"
#include "octseg/metrics.hpp"
#include "octseg/nn/layers.hpp"
#include "octseg/nn/models.hpp"
#include "octseg/nn/tensor.hpp"
#include "octseg/phantom.hpp"
#include "octseg/pipeline.hpp"
#include "octseg/plots.hpp"
#include "octseg/postprocess.hpp"
#include "octseg/tradseg.hpp"
#include "octseg/training.hpp"
#include "octseg/types.hpp"
