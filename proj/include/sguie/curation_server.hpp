#pragma once

// HTTP/JSON front end for a CurationStore.
//
//   GET  /session                      session summary (no method names)
//   GET  /ballot?volunteer=V           next unvoted image, blinded candidates
//   POST /vote   {volunteer, image, label}
//   POST /score  {volunteer, image, label, score}
//   GET  /tally                        TallyResult JSON ({} before any vote)
//   GET  /image/{id}/raw | /image/{id}/{label}?volunteer=V | /image/{id}/{method} once closed
//   POST /close

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "sguie/curation.hpp"

namespace sguie {

class CurationServer {
 public:
  /// `ui_dir`, when set, is served as static files under /.
  explicit CurationServer(CurationStore& store, std::filesystem::path ui_dir = {}) : store_(store) {
    if (!ui_dir.empty() && !server_.set_mount_point("/", ui_dir.string())) {
      throw UsageError("UI directory " + ui_dir.string() + " not found");
    }
    routes();
  }

  /// Binds and serves until stop(). Port 0 picks a free port (see port()).
  bool listen(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ <= 0) return false;
    } else {
      if (!server_.bind_to_port(host, port)) return false;
      port_ = port;
    }
    return server_.listen_after_bind();
  }

  /// Bind without serving; call serve() afterwards (e.g. on another thread).
  int bind(const std::string& host, int port = 0) {
    if (port == 0) port_ = server_.bind_to_any_port(host);
    else port_ = server_.bind_to_port(host, port) ? port : -1;
    return port_;
  }
  bool serve() { return server_.listen_after_bind(); }

  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  int port() const { return port_; }

 private:
  static void send_json(httplib::Response& res, const nlohmann::ordered_json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, {{"error", msg}}, status);
  }

  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const CurationError& e) {
      send_error(res, e.http_status(), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  }

  static nlohmann::json parse_body(const httplib::Request& req) {
    nlohmann::json j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw CurationError(CurationError::Kind::Malformed, "request body must be a JSON object");
    return j;
  }

  static std::string field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw CurationError(CurationError::Kind::Malformed, std::string("missing string field '") + key + "'");
    }
    return j.at(key).get<std::string>();
  }

  void routes() {
    server_.Get("/session", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, store_.session_json()); });
    });

    server_.Get("/ballot", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.has_param("volunteer")) throw CurationError(CurationError::Kind::Malformed, "missing volunteer");
        send_json(res, store_.ballot(req.get_param_value("volunteer")));
      });
    });

    server_.Post("/vote", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = parse_body(req);
        const std::string volunteer = field(body, "volunteer"), image = field(body, "image");
        const std::string method = store_.resolve_label(volunteer, image, field(body, "label"));
        const LedgerEvent e = store_.record_vote(volunteer, image, method);
        send_json(res, {{"ok", true}, {"seq", e.seq}, {"replaced", e.replaces.has_value()}});
      });
    });

    server_.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = parse_body(req);
        if (!body.contains("score") || !body.at("score").is_number_integer()) {
          throw CurationError(CurationError::Kind::Malformed, "score must be an integer 1..5");
        }
        const std::string volunteer = field(body, "volunteer"), image = field(body, "image");
        const std::string method = store_.resolve_label(volunteer, image, field(body, "label"));
        const LedgerEvent e = store_.record_score(volunteer, image, method, body.at("score").get<int>());
        send_json(res, {{"ok", true}, {"seq", e.seq}});
      });
    });

    server_.Get("/tally", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, store_.current_tally().to_json()); });
    });

    server_.Post("/close", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        store_.close();
        send_json(res, {{"ok", true}, {"closed", true}});
      });
    });

    server_.Get(R"(/image/([^/]+)/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string volunteer = req.has_param("volunteer") ? req.get_param_value("volunteer") : "";
        const auto path = store_.image_file(req.matches[1], req.matches[2], volunteer);
        res.set_content(png_bytes(path), "image/png");
      });
    });
  }

  static std::string png_bytes(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw FormatError("cannot open " + path.string());
      return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }
    const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw FormatError("cannot decode image " + path.string());
    std::vector<uchar> buf;
    cv::imencode(".png", bgr, buf);
    return {buf.begin(), buf.end()};
  }

  CurationStore& store_;
  httplib::Server server_;
  int port_ = -1;
};

}  // namespace sguie
