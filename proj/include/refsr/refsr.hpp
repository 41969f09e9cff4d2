#pragma once

#include "refsr/domain.hpp"
#include "refsr/error.hpp"
#include "refsr/feature_map.hpp"
#include "refsr/features.hpp"
#include "refsr/flow.hpp"
#include "refsr/image_io.hpp"
#include "refsr/matcher.hpp"
#include "refsr/metrics.hpp"
#include "refsr/patch_grid.hpp"
#include "refsr/pipeline.hpp"
#include "refsr/reassembly.hpp"
#include "refsr/resample.hpp"
#include "refsr/synthetic.hpp"
