#pragma once

#include <nlohmann/json.hpp>

#include "visrec/ball_tree.hpp"
#include "visrec/pipeline.hpp"
#include "visrec/training.hpp"

namespace visrec::internal {

inline nlohmann::json ranking_to_json(const RankingResult& res) {
  nlohmann::json arr = nlohmann::json::array();
  for (const RankingEntry& e : res.entries) {
    arr.push_back({{"id", e.id},
                   {"rank", e.rank},
                   {"distance", round6(e.distance)}});
  }
  return arr;
}

inline nlohmann::json eval_report_to_json(
    const EvalReport& report, const std::vector<std::string>& class_names) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  j["top_k_accuracy"] = report.top_k_accuracy;
  j["k"] = report.k;
  j["mean_loss"] = report.mean_loss;
  j["class_names"] = class_names;
  j["confusion"] = report.confusion;
  return j;
}

}  // namespace visrec::internal
