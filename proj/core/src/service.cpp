#include "visrec/service.hpp"

#include <httplib.h>

#include <chrono>
#include <csignal>
#include <ostream>

#include "internal/jsonio.hpp"
#include "visrec/errors.hpp"
#include "visrec/image_io.hpp"
#include "visrec/rng.hpp"

using nlohmann::json;

namespace visrec {

namespace {

int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct Service::Impl {
  httplib::Server server;
};

Service::Service(const ServiceConfig& cfg)
    : cfg_(cfg),
      engine_(QueryEngine::load(cfg.checkpoints, cfg.fmx_path, cfg.btx_path)),
      impl_(std::make_unique<Impl>()) {
  setup_routes();
}

Service::~Service() {
  stop();
}

void Service::setup_routes() {
  httplib::Server& svr = impl_->server;
  svr.set_payload_max_length(cfg_.max_body_bytes);
  svr.new_task_queue = [this] {
    return new httplib::ThreadPool(static_cast<size_t>(
        std::max(1, cfg_.threads)));
  };

  svr.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    counters_.requests.fetch_add(1, std::memory_order_relaxed);
    json body;
    body["status"] = "ok";
    body["items_indexed"] = engine_.matrix().rows();
    body["feature_dim"] = engine_.feature_dim();
    reply_json(res, 200, body);
  });

  svr.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
    counters_.requests.fetch_add(1, std::memory_order_relaxed);
    json body;
    body["requests_total"] =
        counters_.requests.load(std::memory_order_relaxed);
    body["recommends_total"] =
        counters_.recommends.load(std::memory_order_relaxed);
    body["errors_total"] = counters_.errors.load(std::memory_order_relaxed);
    body["uptime_seconds"] =
        static_cast<double>(now_ms() - started_at_ms_) / 1000.0;
    body["items_indexed"] = engine_.matrix().rows();
    reply_json(res, 200, body);
  });

  svr.Post("/recommend", [this](const httplib::Request& req,
                                httplib::Response& res) {
    counters_.requests.fetch_add(1, std::memory_order_relaxed);
    const int64_t t0 = now_ms();
    try {
      int64_t k = cfg_.k_default;
      std::string k_str = req.get_param_value("k");
      if (req.is_multipart_form_data() && req.has_file("k")) {
        k_str = req.get_file_value("k").content;
      }
      if (!k_str.empty()) {
        try {
          k = std::stoll(k_str);
        } catch (...) {
          k = -1;
        }
      }
      if (k < 1 || k > cfg_.max_k) {
        counters_.errors.fetch_add(1, std::memory_order_relaxed);
        reply_json(res, 400,
                   {{"error", "k must be an integer in [1," +
                                  std::to_string(cfg_.max_k) + "]"}});
        return;
      }
      bool exclude_self = false;
      std::string ex = req.get_param_value("exclude_self");
      if (req.is_multipart_form_data() && req.has_file("exclude_self")) {
        ex = req.get_file_value("exclude_self").content;
      }
      if (ex == "1" || ex == "true") exclude_self = true;

      const std::string& bytes = req.is_multipart_form_data()
                                     ? req.get_file_value("image").content
                                     : req.body;
      Image img;
      try {
        img = decode_image(bytes);
      } catch (const std::exception&) {
        counters_.errors.fetch_add(1, std::memory_order_relaxed);
        reply_json(res, 400, {{"error", "cannot decode image"}});
        return;
      }
      RankingResult ranking = engine_.query(img, k, exclude_self);
      counters_.recommends.fetch_add(1, std::memory_order_relaxed);
      json body;
      body["query_ms"] = static_cast<double>(now_ms() - t0);
      body["k"] = k;
      body["results"] = internal::ranking_to_json(ranking);
      reply_json(res, 200, body);
    } catch (const std::exception& e) {
      counters_.errors.fetch_add(1, std::memory_order_relaxed);
      // opaque id only; details stay on the server side
      uint64_t id = mix64(static_cast<uint64_t>(now_ms()) ^
                          reinterpret_cast<uintptr_t>(&res));
      char buf[17];
      std::snprintf(buf, sizeof(buf), "%016llx",
                    static_cast<unsigned long long>(id));
      reply_json(res, 500, {{"error", "internal"}, {"id", buf}});
    }
  });
}

int Service::start_async() {
  started_at_ms_ = now_ms();
  httplib::Server& svr = impl_->server;
  if (cfg_.port == 0) {
    port_ = svr.bind_to_any_port(cfg_.bind);
    if (port_ <= 0) throw DataError("service: cannot bind " + cfg_.bind);
  } else {
    port_ = cfg_.port;
    if (!svr.bind_to_port(cfg_.bind, port_)) {
      throw DataError("service: cannot bind " + cfg_.bind + ":" +
                      std::to_string(port_));
    }
  }
  server_thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  svr.wait_until_ready();
  return port_;
}

void Service::run_blocking() {
  started_at_ms_ = now_ms();
  port_ = cfg_.port;
  if (!impl_->server.listen(cfg_.bind, cfg_.port)) {
    throw DataError("service: cannot listen on " + cfg_.bind + ":" +
                    std::to_string(cfg_.port));
  }
}

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
  if (server_thread_.joinable()) server_thread_.join();
}

namespace {
std::atomic<Service*> g_blocking_service{nullptr};

void handle_signal(int) {
  Service* svc = g_blocking_service.load();
  if (svc) svc->stop();
}
}  // namespace

void run_service_blocking(const ServiceConfig& cfg, std::ostream& err) {
  Service service(cfg);
  g_blocking_service.store(&service);
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  err << "serving " << service.engine().matrix().rows() << " items on "
      << cfg.bind << ":" << cfg.port << "\n";
  service.run_blocking();
  g_blocking_service.store(nullptr);
  err << "shutdown complete\n";
}

}  // namespace visrec
