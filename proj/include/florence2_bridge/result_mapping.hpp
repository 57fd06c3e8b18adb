#pragma once

#include <string>

#include "florence2_bridge/backend.hpp"
#include "florence2_interfaces/detection_set.hpp"
#include "florence2_interfaces/result_document.hpp"

namespace florence2_bridge {

using florence2_interfaces::DetectionSet;
using florence2_interfaces::ResultDocument;
using florence2_interfaces::Stamp;

inline ResultDocument to_result_document(const TaskSpec& task, const BackendResult& result,
                                         const Stamp& stamp, const std::string& model_id) {
  const auto produced = florence2_interfaces::kind_of(result.parsed_output);
  if (produced != task.output_kind) {
    throw Error(ErrorCode::kSchemaMismatch,
                task.token + " expects " + std::string(florence2_interfaces::to_string(task.output_kind)) +
                    ", backend returned " + std::string(florence2_interfaces::to_string(produced)));
  }
  if (auto problem = florence2_interfaces::consistency_error(result.parsed_output); !problem.empty()) {
    throw Error(ErrorCode::kSchemaMismatch, problem);
  }
  ResultDocument doc;
  doc.task = task.token;
  doc.model = model_id;
  doc.stamp = stamp;
  doc.inference_time_s = result.inference_time;
  doc.output = result.parsed_output;
  return doc;
}

/// Corner boxes become center/size detections. The model emits no confidence,
/// so every score is the synthetic 1.0.
inline DetectionSet to_detections(const ResultDocument& doc, const std::string& frame_id = "") {
  const auto* boxes = std::get_if<florence2_interfaces::BoxesLabelsOutput>(&doc.output);
  if (!boxes) {
    throw Error(ErrorCode::kWrongOutputKind,
                std::string(florence2_interfaces::to_string(florence2_interfaces::kind_of(doc.output))) +
                    " has no detection binding");
  }
  if (boxes->bboxes.size() != boxes->labels.size()) {
    throw Error(ErrorCode::kSchemaMismatch, florence2_interfaces::consistency_error(doc.output));
  }
  DetectionSet set;
  set.source_stamp = doc.stamp;
  set.frame_id = frame_id;
  set.detections.reserve(boxes->bboxes.size());
  for (std::size_t i = 0; i < boxes->bboxes.size(); ++i) {
    const auto& [x1, y1, x2, y2] = boxes->bboxes[i];
    set.detections.push_back({(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1, boxes->labels[i], 1.0});
  }
  return set;
}

}  // namespace florence2_bridge
