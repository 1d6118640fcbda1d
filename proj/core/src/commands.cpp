#include "visrec/commands.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "internal/jsonio.hpp"
#include "visrec/binio.hpp"
#include "visrec/checksum.hpp"
#include "visrec/errors.hpp"
#include "visrec/image_io.hpp"
#include "visrec/pipeline.hpp"
#include "visrec/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace visrec {

namespace {

constexpr uint64_t kStreamModelInit = 0x10;

Optimizer optimizer_from_name(const std::string& name) {
  if (name == "sgd_momentum" || name == "sgd") return Optimizer::sgd_momentum;
  if (name == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + name +
                    "' (expected sgd_momentum or adam)");
}

const char* optimizer_name(Optimizer opt) {
  return opt == Optimizer::adam ? "adam" : "sgd_momentum";
}

FlipAxis flip_axis_from_name(const std::string& name) {
  if (name == "vertical") return FlipAxis::vertical;
  if (name == "horizontal") return FlipAxis::horizontal;
  throw ConfigError("flip_axis must be vertical or horizontal");
}

template <class T>
void maybe(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void apply_config_json(RunConfig& cfg, const json& j) {
  maybe(j, "seed", cfg.seed);
  maybe(j, "threads", cfg.threads);
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    maybe(d, "manifest", cfg.dataset.manifest);
    maybe(d, "resize_h", cfg.dataset.resize_h);
    maybe(d, "resize_w", cfg.dataset.resize_w);
    maybe(d, "channels", cfg.dataset.channels);
    maybe(d, "train_ratio", cfg.dataset.train_ratio);
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    maybe(m, "profile", cfg.model.profile);
    maybe(m, "warm_start", cfg.model.warm_start);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    if (t.contains("optimizer")) {
      cfg.train.optimizer =
          optimizer_from_name(t["optimizer"].get<std::string>());
    }
    maybe(t, "learning_rate", cfg.train.learning_rate);
    maybe(t, "momentum", cfg.train.momentum);
    maybe(t, "adam_beta1", cfg.train.adam_beta1);
    maybe(t, "adam_beta2", cfg.train.adam_beta2);
    maybe(t, "adam_epsilon", cfg.train.adam_epsilon);
    maybe(t, "batch_size", cfg.train.batch_size);
    maybe(t, "lambda", cfg.train.lambda);
    maybe(t, "max_epochs", cfg.train.max_epochs);
    maybe(t, "patience", cfg.train.patience);
    maybe(t, "top_k", cfg.train.top_k);
    maybe(t, "checkpoint_out", cfg.checkpoint_out);
    maybe(t, "history_out", cfg.history_out);
    if (t.contains("augment")) {
      const json& a = t["augment"];
      maybe(a, "enabled", cfg.train.augment_enabled);
      maybe(a, "rotation_max_deg", cfg.train.augment.rotation_max_deg);
      maybe(a, "hsl_shift_max", cfg.train.augment.hsl_shift_max);
      maybe(a, "shear_max", cfg.train.augment.shear_max);
      maybe(a, "aspect_min", cfg.train.augment.aspect_min);
      maybe(a, "aspect_max", cfg.train.augment.aspect_max);
      maybe(a, "vflip_prob", cfg.train.augment.vflip_prob);
      if (a.contains("flip_axis")) {
        cfg.train.augment.flip_axis =
            flip_axis_from_name(a["flip_axis"].get<std::string>());
      }
    }
  }
  if (j.contains("evaluate")) {
    const json& e = j["evaluate"];
    maybe(e, "checkpoint", cfg.evaluate.checkpoint);
    maybe(e, "top_k", cfg.evaluate.top_k);
    maybe(e, "batch_size", cfg.evaluate.batch_size);
  }
  if (j.contains("extract")) {
    const json& e = j["extract"];
    maybe(e, "checkpoints", cfg.extract.checkpoints);
    maybe(e, "out", cfg.extract.out);
    maybe(e, "batch_size", cfg.extract.batch_size);
  }
  if (j.contains("index")) {
    const json& i = j["index"];
    maybe(i, "fmx", cfg.index.fmx);
    maybe(i, "out", cfg.index.out);
    maybe(i, "leaf_size", cfg.index.leaf_size);
  }
  if (j.contains("query")) {
    const json& q = j["query"];
    maybe(q, "index", cfg.query.index);
    maybe(q, "fmx", cfg.query.fmx);
    maybe(q, "checkpoints", cfg.query.checkpoints);
    maybe(q, "image", cfg.query.image);
    maybe(q, "k", cfg.query.k);
    maybe(q, "exclude_self", cfg.query.exclude_self);
  }
  if (j.contains("serve")) {
    const json& s = j["serve"];
    maybe(s, "index", cfg.serve.index);
    maybe(s, "fmx", cfg.serve.fmx);
    maybe(s, "checkpoints", cfg.serve.checkpoints);
    maybe(s, "bind", cfg.serve.bind);
    maybe(s, "port", cfg.serve.port);
    maybe(s, "k_default", cfg.serve.k_default);
    maybe(s, "max_k", cfg.serve.max_k);
    maybe(s, "max_body_mb", cfg.serve.max_body_mb);
    maybe(s, "threads", cfg.serve.threads);
  }
  maybe(j, "config_out", cfg.config_out);
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  RunConfig cfg;
  apply_config_json(cfg, j);
  return cfg;
}

std::string run_config_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["dataset"] = {{"manifest", cfg.dataset.manifest},
                  {"resize_h", cfg.dataset.resize_h},
                  {"resize_w", cfg.dataset.resize_w},
                  {"channels", cfg.dataset.channels},
                  {"train_ratio", cfg.dataset.train_ratio}};
  j["model"] = {{"profile", cfg.model.profile},
                {"warm_start", cfg.model.warm_start}};
  j["train"] = {
      {"optimizer", optimizer_name(cfg.train.optimizer)},
      {"learning_rate", cfg.train.learning_rate},
      {"momentum", cfg.train.momentum},
      {"adam_beta1", cfg.train.adam_beta1},
      {"adam_beta2", cfg.train.adam_beta2},
      {"adam_epsilon", cfg.train.adam_epsilon},
      {"batch_size", cfg.train.batch_size},
      {"lambda", cfg.train.lambda},
      {"max_epochs", cfg.train.max_epochs},
      {"patience", cfg.train.patience},
      {"top_k", cfg.train.top_k},
      {"checkpoint_out", cfg.checkpoint_out},
      {"history_out", cfg.history_out},
      {"augment",
       {{"enabled", cfg.train.augment_enabled},
        {"rotation_max_deg", cfg.train.augment.rotation_max_deg},
        {"hsl_shift_max", cfg.train.augment.hsl_shift_max},
        {"shear_max", cfg.train.augment.shear_max},
        {"aspect_min", cfg.train.augment.aspect_min},
        {"aspect_max", cfg.train.augment.aspect_max},
        {"vflip_prob", cfg.train.augment.vflip_prob},
        {"flip_axis", cfg.train.augment.flip_axis == FlipAxis::vertical
                          ? "vertical"
                          : "horizontal"}}}};
  j["evaluate"] = {{"checkpoint", cfg.evaluate.checkpoint},
                   {"top_k", cfg.evaluate.top_k},
                   {"batch_size", cfg.evaluate.batch_size}};
  j["extract"] = {{"checkpoints", cfg.extract.checkpoints},
                  {"out", cfg.extract.out},
                  {"batch_size", cfg.extract.batch_size}};
  j["index"] = {{"fmx", cfg.index.fmx},
                {"out", cfg.index.out},
                {"leaf_size", cfg.index.leaf_size}};
  j["query"] = {{"index", cfg.query.index},
                {"fmx", cfg.query.fmx},
                {"checkpoints", cfg.query.checkpoints},
                {"image", cfg.query.image},
                {"k", cfg.query.k},
                {"exclude_self", cfg.query.exclude_self}};
  j["serve"] = {{"index", cfg.serve.index},
                {"fmx", cfg.serve.fmx},
                {"checkpoints", cfg.serve.checkpoints},
                {"bind", cfg.serve.bind},
                {"port", cfg.serve.port},
                {"k_default", cfg.serve.k_default},
                {"max_k", cfg.serve.max_k},
                {"max_body_mb", cfg.serve.max_body_mb},
                {"threads", cfg.serve.threads}};
  j["config_out"] = cfg.config_out;
  return j.dump(2);
}

namespace {

void write_sidecar(const RunConfig& cfg, const std::string& primary_out) {
  std::string path = cfg.config_out;
  if (path.empty() && !primary_out.empty()) {
    path = primary_out + ".config.json";
  }
  if (path.empty()) return;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write config sidecar: " + path);
  out << run_config_json(cfg) << "\n";
}

Dataset load_dataset_for(const RunConfig& cfg, const std::string& manifest) {
  if (manifest.empty()) throw ConfigError("no manifest given");
  LoadOptions opts;
  opts.target_h = cfg.dataset.resize_h;
  opts.target_w = cfg.dataset.resize_w;
  opts.channels = cfg.dataset.channels;
  return load_manifest(manifest, opts);
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError("no " + what + " given");
  if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

}  // namespace

void cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_file(cfg.dataset.manifest, "manifest");
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.threads = cfg.threads;
  tc.validate();

  err << "loading " << cfg.dataset.manifest << "\n";
  Dataset ds = load_dataset_for(cfg, cfg.dataset.manifest);
  Split split = split_dataset(ds, cfg.dataset.train_ratio, cfg.seed);
  err << "dataset: " << ds.size() << " samples, " << ds.num_classes()
      << " classes -> train " << split.train.size() << ", val "
      << split.val.size() << "\n";

  ModelSpec spec = make_profile(cfg.model.profile, cfg.dataset.resize_h,
                                cfg.dataset.resize_w, ds.class_names);
  Network<float> net(spec, hash_combine(cfg.seed, kStreamModelInit));
  if (!cfg.model.warm_start.empty()) {
    require_file(cfg.model.warm_start, "warm-start checkpoint");
    warm_start(net, load_checkpoint(cfg.model.warm_start));
    err << "warm start from " << cfg.model.warm_start << "\n";
  }

  TrainHistory history = train(net, split.train, split.val, tc);
  err << "training stopped: " << history.stop_reason << " (best epoch "
      << history.best_epoch << ")\n";

  json provenance;
  provenance["seed"] = cfg.seed;
  provenance["manifest"] = cfg.dataset.manifest;
  provenance["optimizer"] = optimizer_name(tc.optimizer);
  provenance["epochs_trained"] = history.epochs.size();
  provenance["best_epoch"] = history.best_epoch;
  provenance["stop_reason"] = history.stop_reason;
  provenance["warm_start"] = cfg.model.warm_start;
  save_checkpoint(net, provenance.dump(), cfg.checkpoint_out);
  std::string history_path = cfg.history_out.empty()
                                 ? cfg.checkpoint_out + ".history.jsonl"
                                 : cfg.history_out;
  save_history(history, history_path);
  write_sidecar(cfg, cfg.checkpoint_out);
  err << "checkpoint: " << cfg.checkpoint_out << "\nhistory: " << history_path
      << "\n";

  EvalReport report =
      evaluate(net, split.val, tc.batch_size, tc.top_k, cfg.threads);
  out << internal::eval_report_to_json(report, ds.class_names).dump() << "\n";
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  require_file(cfg.evaluate.checkpoint, "checkpoint");
  require_file(cfg.dataset.manifest, "manifest");
  Checkpoint ckpt = load_checkpoint(cfg.evaluate.checkpoint);
  Network<float> net = network_from_checkpoint(ckpt);
  Dataset ds = load_dataset_for(cfg, cfg.dataset.manifest);
  if (ds.class_names != net.spec().class_names) {
    throw DataError("manifest classes do not match the checkpoint");
  }
  EvalReport report = evaluate(net, ds, cfg.evaluate.batch_size,
                               cfg.evaluate.top_k, cfg.threads);
  write_sidecar(cfg, "");
  out << internal::eval_report_to_json(report, ds.class_names).dump() << "\n";
}

void cmd_extract(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.extract.checkpoints.empty()) {
    throw ConfigError("no checkpoints given");
  }
  require_file(cfg.dataset.manifest, "manifest");
  std::vector<Checkpoint> ckpts;
  std::vector<Network<float>> nets;
  std::vector<uint64_t> fingerprints;
  for (const std::string& path : cfg.extract.checkpoints) {
    require_file(path, "checkpoint");
    fingerprints.push_back(file_crc64(path));
    ckpts.push_back(load_checkpoint(path));
    nets.push_back(network_from_checkpoint(ckpts.back()));
  }
  Dataset ds = load_dataset_for(cfg, cfg.dataset.manifest);
  std::vector<const Network<float>*> model_ptrs;
  for (const auto& n : nets) model_ptrs.push_back(&n);
  err << "extracting " << ds.size() << " items with " << nets.size()
      << " extractor(s)\n";
  FeatureMatrix m = build_matrix(model_ptrs, fingerprints, ds,
                                 cfg.extract.batch_size, cfg.threads);
  save_matrix(m, cfg.extract.out);
  write_sidecar(cfg, cfg.extract.out);
  json summary;
  summary["out"] = cfg.extract.out;
  summary["rows"] = m.rows();
  summary["dim"] = m.dim;
  summary["dims"] = m.dims;
  out << summary.dump() << "\n";
}

void cmd_index(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_file(cfg.index.fmx, "feature matrix");
  FeatureMatrix m = load_matrix(cfg.index.fmx);
  err << "indexing " << m.rows() << " x " << m.dim << " features\n";
  BallTree tree = BallTree::build(m, cfg.index.leaf_size);
  tree.save(cfg.index.out, file_crc64(cfg.index.fmx));
  write_sidecar(cfg, cfg.index.out);
  json summary;
  summary["out"] = cfg.index.out;
  summary["rows"] = tree.rows();
  summary["leaf_size"] = tree.leaf_size();
  summary["nodes"] = tree.node_count();
  out << summary.dump() << "\n";
}

void cmd_query(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  if (cfg.query.checkpoints.empty()) throw ConfigError("no checkpoints given");
  for (const auto& p : cfg.query.checkpoints) require_file(p, "checkpoint");
  require_file(cfg.query.fmx, "feature matrix");
  if (!cfg.query.index.empty()) require_file(cfg.query.index, "index");
  require_file(cfg.query.image, "query image");
  if (cfg.query.k < 1) throw ConfigError("k must be >= 1");

  QueryEngine engine =
      QueryEngine::load(cfg.query.checkpoints, cfg.query.fmx, cfg.query.index);
  Image img = load_image(cfg.query.image);
  RankingResult res = engine.query(img, cfg.query.k, cfg.query.exclude_self);
  write_sidecar(cfg, "");
  out << internal::ranking_to_json(res).dump() << "\n";
}

}  // namespace visrec
