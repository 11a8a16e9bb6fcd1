#pragma once

#include "ropkit/annot_io.hpp"
#include "ropkit/box.hpp"
#include "ropkit/config.hpp"
#include "ropkit/detect.hpp"
#include "ropkit/enhance.hpp"
#include "ropkit/error.hpp"
#include "ropkit/eval.hpp"
#include "ropkit/grid.hpp"
#include "ropkit/image_io.hpp"
#include "ropkit/nms.hpp"
#include "ropkit/overlay.hpp"
#include "ropkit/phantom.hpp"
#include "ropkit/phantom_io.hpp"
#include "ropkit/pipeline.hpp"
#include "ropkit/raster.hpp"
#include "ropkit/records.hpp"
#include "ropkit/report.hpp"
#include "ropkit/rle.hpp"
#include "ropkit/rng.hpp"
