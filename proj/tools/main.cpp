#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "visrec/commands.hpp"
#include "visrec/errors.hpp"
#include "visrec/service.hpp"

using visrec::RunConfig;

namespace {

// Two-phase resolution: a --config file (or defaults) forms the base, then
// every flag the user actually passed overrides its leaf.
struct Override {
  CLI::Option* opt;
  std::function<void(RunConfig&)> apply;
};

class OverrideSet {
 public:
  template <class T>
  void bind(CLI::Option* opt, T* staging, T RunConfig::* unused) = delete;

  template <class T, class Setter>
  void add(CLI::Option* opt, const T* staging, Setter setter) {
    overrides_.push_back(
        {opt, [staging, setter](RunConfig& cfg) { setter(cfg, *staging); }});
  }

  void apply(RunConfig& cfg) const {
    for (const auto& o : overrides_) {
      if (o.opt->count() > 0) o.apply(cfg);
    }
  }

 private:
  std::vector<Override> overrides_;
};

int run_command(const std::string& config_path, const OverrideSet& overrides,
                const std::function<void(const RunConfig&)>& fn) {
  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = visrec::load_run_config(config_path);
    if (cfg.threads == 1) {
      if (const char* env = std::getenv("THREADS")) {
        cfg.threads = std::max(1, std::atoi(env));
      }
    }
    overrides.apply(cfg);
    fn(cfg);
    return 0;
  } catch (const visrec::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visual similarity recommendation engine"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override")
      ->expected(1);

  // staging variables shared by the override mechanism
  RunConfig st;
  OverrideSet ov;

  auto add_global = [&](CLI::App* cmd) {
    ov.add(cmd->add_option("--seed", st.seed, "master RNG seed"), &st.seed,
           [](RunConfig& c, const uint64_t& v) { c.seed = v; });
    ov.add(cmd->add_option("--threads", st.threads,
                           "worker threads (THREADS env as fallback)"),
           &st.threads, [](RunConfig& c, const int& v) { c.threads = v; });
    ov.add(cmd->add_option("--config-out", st.config_out,
                           "where to write the effective config"),
           &st.config_out,
           [](RunConfig& c, const std::string& v) { c.config_out = v; });
  };
  auto add_dataset = [&](CLI::App* cmd) {
    ov.add(cmd->add_option("--manifest,--dataset.manifest",
                           st.dataset.manifest, "dataset manifest CSV"),
           &st.dataset.manifest,
           [](RunConfig& c, const std::string& v) { c.dataset.manifest = v; });
    ov.add(cmd->add_option("--resize-h,--dataset.resize_h",
                           st.dataset.resize_h, "working resolution height"),
           &st.dataset.resize_h,
           [](RunConfig& c, const int& v) { c.dataset.resize_h = v; });
    ov.add(cmd->add_option("--resize-w,--dataset.resize_w",
                           st.dataset.resize_w, "working resolution width"),
           &st.dataset.resize_w,
           [](RunConfig& c, const int& v) { c.dataset.resize_w = v; });
  };

  // ---- train ----
  CLI::App* train = app.add_subcommand("train", "train a classifier");
  add_global(train);
  add_dataset(train);
  {
    ov.add(train->add_option("--ratio,--dataset.train_ratio",
                             st.dataset.train_ratio,
                             "train fraction of the split"),
           &st.dataset.train_ratio,
           [](RunConfig& c, const double& v) { c.dataset.train_ratio = v; });
    ov.add(train->add_option("--profile,--model.profile", st.model.profile,
                             "model profile (minibn|paper1024)"),
           &st.model.profile,
           [](RunConfig& c, const std::string& v) { c.model.profile = v; });
    ov.add(train->add_option("--warm-start,--model.warm_start",
                             st.model.warm_start, "donor checkpoint"),
           &st.model.warm_start,
           [](RunConfig& c, const std::string& v) { c.model.warm_start = v; });
    static std::string optimizer;
    ov.add(train->add_option("--optimizer,--train.optimizer", optimizer,
                             "sgd_momentum|adam"),
           &optimizer, [](RunConfig& c, const std::string& v) {
             c.train.optimizer = v == "adam" ? visrec::Optimizer::adam
                                             : visrec::Optimizer::sgd_momentum;
             if (v != "adam" && v != "sgd_momentum" && v != "sgd") {
               throw visrec::ConfigError("unknown optimizer '" + v + "'");
             }
           });
    ov.add(train->add_option("--lr,--train.learning_rate",
                             st.train.learning_rate, "learning rate"),
           &st.train.learning_rate,
           [](RunConfig& c, const double& v) { c.train.learning_rate = v; });
    ov.add(train->add_option("--momentum,--train.momentum", st.train.momentum,
                             "SGD momentum"),
           &st.train.momentum,
           [](RunConfig& c, const double& v) { c.train.momentum = v; });
    ov.add(train->add_option("--batch,--train.batch_size",
                             st.train.batch_size, "minibatch size"),
           &st.train.batch_size,
           [](RunConfig& c, const int& v) { c.train.batch_size = v; });
    ov.add(train->add_option("--lambda,--train.lambda", st.train.lambda,
                             "L2 regularization coefficient"),
           &st.train.lambda,
           [](RunConfig& c, const double& v) { c.train.lambda = v; });
    ov.add(train->add_option("--epochs,--train.max_epochs",
                             st.train.max_epochs, "epoch limit"),
           &st.train.max_epochs,
           [](RunConfig& c, const int& v) { c.train.max_epochs = v; });
    ov.add(train->add_option("--patience,--train.patience", st.train.patience,
                             "early stopping patience"),
           &st.train.patience,
           [](RunConfig& c, const int& v) { c.train.patience = v; });
    ov.add(train->add_option("--top-k,--train.top_k", st.train.top_k,
                             "K for top-K accuracy (0 = min(5, classes))"),
           &st.train.top_k,
           [](RunConfig& c, const int& v) { c.train.top_k = v; });
    static bool no_augment = false;
    ov.add(train->add_flag("--no-augment", no_augment,
                           "disable per-epoch augmentation"),
           &no_augment,
           [](RunConfig& c, const bool& v) { c.train.augment_enabled = !v; });
    ov.add(train->add_option("--augment.rotation_max_deg",
                             st.train.augment.rotation_max_deg,
                             "max |rotation| in degrees"),
           &st.train.augment.rotation_max_deg,
           [](RunConfig& c, const double& v) {
             c.train.augment.rotation_max_deg = v;
           });
    ov.add(train->add_option("--augment.hsl_shift_max",
                             st.train.augment.hsl_shift_max,
                             "max HSL shift (degrees / percent points)"),
           &st.train.augment.hsl_shift_max,
           [](RunConfig& c, const double& v) {
             c.train.augment.hsl_shift_max = v;
           });
    ov.add(train->add_option("--augment.shear_max", st.train.augment.shear_max,
                             "max |shear factor|"),
           &st.train.augment.shear_max, [](RunConfig& c, const double& v) {
             c.train.augment.shear_max = v;
           });
    ov.add(train->add_option("--augment.aspect_min",
                             st.train.augment.aspect_min, "min aspect factor"),
           &st.train.augment.aspect_min, [](RunConfig& c, const double& v) {
             c.train.augment.aspect_min = v;
           });
    ov.add(train->add_option("--augment.aspect_max",
                             st.train.augment.aspect_max, "max aspect factor"),
           &st.train.augment.aspect_max, [](RunConfig& c, const double& v) {
             c.train.augment.aspect_max = v;
           });
    ov.add(train->add_option("--augment.vflip_prob",
                             st.train.augment.vflip_prob, "flip probability"),
           &st.train.augment.vflip_prob, [](RunConfig& c, const double& v) {
             c.train.augment.vflip_prob = v;
           });
    static std::string flip_axis;
    ov.add(train->add_option("--augment.flip_axis", flip_axis,
                             "vertical|horizontal"),
           &flip_axis, [](RunConfig& c, const std::string& v) {
             if (v == "vertical") {
               c.train.augment.flip_axis = visrec::FlipAxis::vertical;
             } else if (v == "horizontal") {
               c.train.augment.flip_axis = visrec::FlipAxis::horizontal;
             } else {
               throw visrec::ConfigError(
                   "flip_axis must be vertical or horizontal");
             }
           });
    ov.add(train->add_option("--out,--train.checkpoint_out", st.checkpoint_out,
                             "checkpoint output path"),
           &st.checkpoint_out,
           [](RunConfig& c, const std::string& v) { c.checkpoint_out = v; });
    ov.add(train->add_option("--history-out,--train.history_out",
                             st.history_out, "history JSONL output path"),
           &st.history_out,
           [](RunConfig& c, const std::string& v) { c.history_out = v; });
  }

  // ---- evaluate ----
  CLI::App* evaluate = app.add_subcommand("evaluate",
                                          "evaluate a checkpoint on a manifest");
  add_global(evaluate);
  add_dataset(evaluate);
  {
    ov.add(evaluate->add_option("--checkpoint,--evaluate.checkpoint",
                                st.evaluate.checkpoint, "checkpoint path"),
           &st.evaluate.checkpoint, [](RunConfig& c, const std::string& v) {
             c.evaluate.checkpoint = v;
           });
    ov.add(evaluate->add_option("--top-k,--evaluate.top_k", st.evaluate.top_k,
                                "K for top-K accuracy"),
           &st.evaluate.top_k,
           [](RunConfig& c, const int& v) { c.evaluate.top_k = v; });
    ov.add(evaluate->add_option("--batch,--evaluate.batch_size",
                                st.evaluate.batch_size, "batch size"),
           &st.evaluate.batch_size,
           [](RunConfig& c, const int& v) { c.evaluate.batch_size = v; });
  }

  // ---- extract ----
  CLI::App* extract =
      app.add_subcommand("extract", "build a feature matrix (.fmx)");
  add_global(extract);
  add_dataset(extract);
  {
    ov.add(extract->add_option("--checkpoint,--extract.checkpoints",
                               st.extract.checkpoints,
                               "extractor checkpoint(s), in order"),
           &st.extract.checkpoints,
           [](RunConfig& c, const std::vector<std::string>& v) {
             c.extract.checkpoints = v;
           });
    ov.add(extract->add_option("--out,--extract.out", st.extract.out,
                               ".fmx output path"),
           &st.extract.out,
           [](RunConfig& c, const std::string& v) { c.extract.out = v; });
    ov.add(extract->add_option("--batch,--extract.batch_size",
                               st.extract.batch_size, "batch size"),
           &st.extract.batch_size,
           [](RunConfig& c, const int& v) { c.extract.batch_size = v; });
  }

  // ---- index ----
  CLI::App* index = app.add_subcommand("index", "build a ball-tree (.btx)");
  add_global(index);
  {
    ov.add(index->add_option("--fmx,--index.fmx", st.index.fmx,
                             ".fmx feature matrix"),
           &st.index.fmx,
           [](RunConfig& c, const std::string& v) { c.index.fmx = v; });
    ov.add(index->add_option("--out,--index.out", st.index.out,
                             ".btx output path"),
           &st.index.out,
           [](RunConfig& c, const std::string& v) { c.index.out = v; });
    ov.add(index->add_option("--leaf-size,--index.leaf_size",
                             st.index.leaf_size, "leaf size"),
           &st.index.leaf_size,
           [](RunConfig& c, const int& v) { c.index.leaf_size = v; });
  }

  // ---- query ----
  CLI::App* query = app.add_subcommand("query", "rank neighbors of an image");
  add_global(query);
  {
    ov.add(query->add_option("--index,--query.index", st.query.index,
                             ".btx index path"),
           &st.query.index,
           [](RunConfig& c, const std::string& v) { c.query.index = v; });
    ov.add(query->add_option("--fmx,--query.fmx", st.query.fmx,
                             ".fmx feature matrix"),
           &st.query.fmx,
           [](RunConfig& c, const std::string& v) { c.query.fmx = v; });
    ov.add(query->add_option("--checkpoint,--query.checkpoints",
                             st.query.checkpoints,
                             "extractor checkpoint(s), in .fmx order"),
           &st.query.checkpoints,
           [](RunConfig& c, const std::vector<std::string>& v) {
             c.query.checkpoints = v;
           });
    ov.add(query->add_option("--image,--query.image", st.query.image,
                             "query image (PNG or .imgf32)"),
           &st.query.image,
           [](RunConfig& c, const std::string& v) { c.query.image = v; });
    ov.add(query->add_option("--k,--query.k", st.query.k, "neighbors"),
           &st.query.k, [](RunConfig& c, const int& v) { c.query.k = v; });
    static bool exclude_self = false;
    ov.add(query->add_flag("--exclude-self,--query.exclude_self", exclude_self,
                           "drop an exact self match"),
           &exclude_self,
           [](RunConfig& c, const bool& v) { c.query.exclude_self = v; });
  }

  // ---- serve ----
  CLI::App* serve = app.add_subcommand("serve", "HTTP recommendation service");
  add_global(serve);
  {
    ov.add(serve->add_option("--index,--serve.index", st.serve.index,
                             ".btx index path"),
           &st.serve.index,
           [](RunConfig& c, const std::string& v) { c.serve.index = v; });
    ov.add(serve->add_option("--fmx,--serve.fmx", st.serve.fmx,
                             ".fmx feature matrix"),
           &st.serve.fmx,
           [](RunConfig& c, const std::string& v) { c.serve.fmx = v; });
    ov.add(serve->add_option("--checkpoint,--serve.checkpoints",
                             st.serve.checkpoints,
                             "extractor checkpoint(s), in .fmx order"),
           &st.serve.checkpoints,
           [](RunConfig& c, const std::vector<std::string>& v) {
             c.serve.checkpoints = v;
           });
    ov.add(serve->add_option("--bind,--serve.bind", st.serve.bind,
                             "bind address"),
           &st.serve.bind,
           [](RunConfig& c, const std::string& v) { c.serve.bind = v; });
    ov.add(serve->add_option("--port,--serve.port", st.serve.port, "port"),
           &st.serve.port,
           [](RunConfig& c, const int& v) { c.serve.port = v; });
    ov.add(serve->add_option("--k-default,--serve.k_default",
                             st.serve.k_default, "default k"),
           &st.serve.k_default,
           [](RunConfig& c, const int& v) { c.serve.k_default = v; });
    ov.add(serve->add_option("--max-k,--serve.max_k", st.serve.max_k,
                             "maximum k"),
           &st.serve.max_k,
           [](RunConfig& c, const int& v) { c.serve.max_k = v; });
    ov.add(serve->add_option("--max-body-mb,--serve.max_body_mb",
                             st.serve.max_body_mb, "request size limit"),
           &st.serve.max_body_mb,
           [](RunConfig& c, const int& v) { c.serve.max_body_mb = v; });
    ov.add(serve->add_option("--server-threads,--serve.threads",
                             st.serve.threads, "worker threads"),
           &st.serve.threads,
           [](RunConfig& c, const int& v) { c.serve.threads = v; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto dispatch = [&](const RunConfig& cfg) {
    if (train->parsed()) {
      visrec::cmd_train(cfg, std::cout, std::cerr);
    } else if (evaluate->parsed()) {
      visrec::cmd_evaluate(cfg, std::cout, std::cerr);
    } else if (extract->parsed()) {
      visrec::cmd_extract(cfg, std::cout, std::cerr);
    } else if (index->parsed()) {
      visrec::cmd_index(cfg, std::cout, std::cerr);
    } else if (query->parsed()) {
      visrec::cmd_query(cfg, std::cout, std::cerr);
    } else if (serve->parsed()) {
      visrec::ServiceConfig sc;
      sc.checkpoints = cfg.serve.checkpoints;
      sc.fmx_path = cfg.serve.fmx;
      sc.btx_path = cfg.serve.index;
      sc.bind = cfg.serve.bind;
      sc.port = cfg.serve.port;
      sc.k_default = cfg.serve.k_default;
      sc.max_k = cfg.serve.max_k;
      sc.max_body_bytes = static_cast<size_t>(cfg.serve.max_body_mb) << 20;
      sc.threads = cfg.serve.threads;
      visrec::run_service_blocking(sc, std::cerr);
    }
  };
  return run_command(config_path, ov, dispatch);
}
