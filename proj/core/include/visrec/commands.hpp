#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "visrec/training.hpp"

namespace visrec {

// Everything a command needs, mirroring the JSON config file; command-line
// flags override individual leaves.
struct RunConfig {
  uint64_t seed = 0;
  int threads = 1;

  struct DatasetSection {
    std::string manifest;
    int resize_h = 64;
    int resize_w = 64;
    int channels = 3;
    double train_ratio = 0.8;
  } dataset;

  struct ModelSection {
    std::string profile = "minibn";
    std::string warm_start;  // donor checkpoint path, optional
  } model;

  TrainConfig train;
  std::string checkpoint_out = "model.ckpt";
  std::string history_out;  // default: <checkpoint_out>.history.jsonl

  struct EvaluateSection {
    std::string checkpoint;
    int top_k = 0;  // 0 = min(5, classes)
    int batch_size = 64;
  } evaluate;

  struct ExtractSection {
    std::vector<std::string> checkpoints;
    std::string out = "features.fmx";
    int batch_size = 64;
  } extract;

  struct IndexSection {
    std::string fmx;
    std::string out = "index.btx";
    int leaf_size = 32;
  } index;

  struct QuerySection {
    std::string index;
    std::string fmx;
    std::vector<std::string> checkpoints;
    std::string image;
    int k = 5;
    bool exclude_self = false;
  } query;

  struct ServeSection {
    std::string index;
    std::string fmx;
    std::vector<std::string> checkpoints;
    std::string bind = "127.0.0.1";
    int port = 8470;
    int k_default = 5;
    int max_k = 100;
    int max_body_mb = 8;
    int threads = 8;
  } serve;

  // effective-config sidecar; empty = derive from the primary output
  std::string config_out;
};

RunConfig load_run_config(const std::string& path);  // JSON file over defaults
std::string run_config_json(const RunConfig& cfg);   // effective config echo

// Commands print machine-readable JSON to `out` and progress lines to `err`.
// Errors are reported by throwing ConfigError (usage, exit 2) or other
// exceptions (runtime, exit 1).
void cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_extract(const RunConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_index(const RunConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_query(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace visrec
