#pragma once

#include <string>
#include <vector>

#include "ropkit/config.hpp"
#include "ropkit/detect.hpp"
#include "ropkit/enhance.hpp"
#include "ropkit/nms.hpp"
#include "ropkit/raster.hpp"
#include "ropkit/records.hpp"

// Detection on one image as run by `ropkit detect`: optional enhancement,
// ridge proposals, then NMS.

namespace ropkit {

struct DetectionRun {
  RasterImage input;     ///< image the detector saw (enhanced unless raw)
  std::vector<Detection> proposals;
  std::vector<Detection> kept;  ///< after NMS
};

inline DetectionRun run_detection(const RasterImage& img, const PipelineSettings& s, bool raw,
                                  const std::string& image_id) {
  DetectionRun run;
  run.input = raw ? to_rgb(img) : enhance_pipeline(to_rgb(img), s.enhance);
  run.proposals = detect_ridges(run.input, s.detector, image_id);
  run.kept = nms(run.proposals, s.nms_thresh);
  return run;
}

}  // namespace ropkit
