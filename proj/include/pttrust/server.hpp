#ifndef PTTRUST_SERVER_HPP_
#define PTTRUST_SERVER_HPP_

// JSON-over-HTTP API for the review loop. Reports are loaded once and served
// read-only; label posts go to the append-only label log.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pttrust/errors.hpp"
#include "pttrust/labels.hpp"
#include "pttrust/pipeline.hpp"

// After Eigen: <resolv.h> defines `res` as a macro.
#include "httplib.h"

namespace pttrust {

class ReviewServer {
 public:
  ReviewServer(const fs::path& reports_dir, const fs::path& labels_path)
      : reports_(read_reports(reports_dir)), labels_(labels_path) {
    routes();
  }

  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  ~ReviewServer() { stop(); }

  /// Binds and starts serving on a background thread. Port 0 picks a free
  /// port. Returns the bound port; throws ConfigError if binding fails.
  int start(const std::string& host, int port) {
    bind(host, port);
    thread_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
    return port_;
  }

  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port) {
    bind(host, port);
    http_.listen_after_bind();
  }

  void stop() {
    http_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }

 private:
  void bind(const std::string& host, int port) {
    // httplib's default sets SO_REUSEPORT, which would let a second server
    // share a busy port.
    http_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    if (port == 0) {
      port_ = http_.bind_to_any_port(host);
      if (port_ < 0) throw ConfigError("cannot bind " + host);
    } else {
      if (!http_.bind_to_port(host, port))
        throw ConfigError("cannot bind " + host + ":" + std::to_string(port) + " (port busy or address invalid)");
      port_ = port;
    }
  }

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  const nlohmann::json* find(const std::string& id_text) const {
    try {
      const unsigned long id = std::stoul(id_text);
      if (id > UINT32_MAX) return nullptr;
      auto it = reports_.find(static_cast<std::uint32_t>(id));
      return it == reports_.end() ? nullptr : &it->second;
    } catch (const std::exception&) {
      return nullptr;
    }
  }

  void routes() {
    http_.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"status", "ok"}});
    });

    http_.Get("/api/snippets", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json list = nlohmann::json::array();
      for (const auto& [id, r] : reports_) {
        double max_risk = 0.0;
        for (const auto& l : r["lines"]) max_risk = std::max(max_risk, l["risk"].get<double>());
        list.push_back({{"snippet_id", id},
                        {"language", r.value("language", "")},
                        {"task", r.value("task", "")},
                        {"n_lines", r["lines"].size()},
                        {"max_risk", max_risk}});
      }
      reply(res, 200, list);
    });

    http_.Get(R"(/api/snippets/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto* r = find(req.matches[1]);
      if (r == nullptr) return reply(res, 404, {{"error", "unknown snippet"}});
      nlohmann::json out = *r;
      const auto label = labels_.latest(r->at("snippet_id").get<std::uint32_t>());
      out["labels"] = label ? nlohmann::json{{"error_lines", label->error_lines}, {"stored_at", label->stored_at}}
                            : nlohmann::json{{"error_lines", nullptr}, {"stored_at", nullptr}};
      reply(res, 200, out);
    });

    http_.Post(R"(/api/snippets/(\d+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto* r = find(req.matches[1]);
      if (r == nullptr) return reply(res, 404, {{"error", "unknown snippet"}});
      const auto n_lines = r->at("lines").size();
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception&) {
        return reply(res, 400, {{"error", "body is not valid JSON"}});
      }
      if (!body.is_object() || !body.contains("error_lines") || !body["error_lines"].is_array())
        return reply(res, 400, {{"error", "body must be an object with an error_lines array"}});
      std::vector<std::uint32_t> lines;
      std::vector<nlohmann::json> bad;
      for (const auto& v : body["error_lines"]) {
        if (!v.is_number_integer() || v.get<long long>() < 0 || static_cast<std::size_t>(v.get<long long>()) >= n_lines)
          bad.push_back(v);
        else
          lines.push_back(static_cast<std::uint32_t>(v.get<long long>()));
      }
      if (!bad.empty())
        return reply(res, 400, {{"error", "error_lines must be line indices in [0, " + std::to_string(n_lines) + ")"},
                                {"invalid", bad}});
      try {
        const auto rec = labels_.append(r->at("snippet_id").get<std::uint32_t>(), std::move(lines));
        reply(res, 200, {{"accepted", true}, {"stored_at", rec.stored_at}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
      }
    });
  }

  std::map<std::uint32_t, nlohmann::json> reports_;
  LabelLog labels_;
  httplib::Server http_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace pttrust

#endif  // PTTRUST_SERVER_HPP_
