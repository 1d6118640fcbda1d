#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "visrec/pipeline.hpp"

namespace visrec {

struct ServiceConfig {
  std::vector<std::string> checkpoints;
  std::string fmx_path;
  std::string btx_path;
  std::string bind = "127.0.0.1";
  int port = 8470;
  int k_default = 5;
  int max_k = 100;
  size_t max_body_bytes = 8u << 20;
  int threads = 8;
};

// Read-only recommendation endpoint over a QueryEngine:
//   POST /recommend  (raw PNG/imgf32 body or multipart field "image";
//                     query params k, exclude_self)
//   GET  /health     {status, items_indexed, feature_dim}
//   GET  /stats      request counters and uptime
// State is immutable after startup; the only mutation is atomic counters.
class Service {
 public:
  explicit Service(const ServiceConfig& cfg);  // loads + verifies artifacts
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the configured port (or an ephemeral one when cfg.port == 0) and
  // serves on a background thread until stop(). Returns the bound port.
  int start_async();

  // Serves on the calling thread until stop() is invoked (e.g. from a
  // signal handler); in-flight requests complete before it returns.
  void run_blocking();

  void stop();

  int port() const { return port_; }
  const QueryEngine& engine() const { return engine_; }

  struct Counters {
    std::atomic<uint64_t> requests{0};
    std::atomic<uint64_t> recommends{0};
    std::atomic<uint64_t> errors{0};
  };

 private:
  struct Impl;  // hides the HTTP server dependency
  void setup_routes();

  ServiceConfig cfg_;
  QueryEngine engine_;
  std::unique_ptr<Impl> impl_;
  Counters counters_;
  std::thread server_thread_;
  int port_ = 0;
  int64_t started_at_ms_ = 0;
};

// Loads the service and blocks until SIGINT/SIGTERM.
void run_service_blocking(const ServiceConfig& cfg, std::ostream& err);

}  // namespace visrec
