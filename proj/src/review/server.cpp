#include <fstream>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "elseg/error.hpp"
#include "elseg/review.hpp"

namespace elseg::review {

using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                json extra = json::object()) {
    extra["code"] = code;
    extra["message"] = message;
    res.status = status;
    res.set_content(extra.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& body) { res.set_content(body.dump(), "application/json"); }

// Uniform mapping from library errors to HTTP status codes.
template <class F>
auto guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const NotFoundError& e) {
            send_error(res, 404, "not_found", e.what());
        } catch (const ConflictError& e) {
            send_error(res, 409, "conflict", e.what(), {{"current_version", e.current_version()}});
        } catch (const ValidationError& e) {
            send_error(res, 422, "invalid", e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const ArgumentError& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const FormatError& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const std::exception& e) {
            spdlog::error("{} {}: {}", req.method, req.path, e.what());
            send_error(res, 500, "internal", e.what());
        }
    };
}

Status decision_from(const json& body) {
    const std::string s = body.contains("decision") ? body["decision"].get<std::string>()
                                                    : body.at("status").get<std::string>();
    const Status st = annotate::status_from_string(s);
    if (st == Status::silver) throw ArgumentError("decision must be gold or rejected");
    return st;
}

std::vector<annotate::Polygon> polygons_from(const json& arr) {
    std::vector<annotate::Polygon> out;
    for (const auto& ring : arr) {
        std::vector<Point> pts;
        for (const auto& xy : ring) pts.push_back({xy.at(0).get<double>(), xy.at(1).get<double>()});
        if (pts.size() < 3) throw ValidationError("polygon needs at least 3 vertices");
        out.push_back(geometry::make_polygon(std::move(pts)));
    }
    return out;
}

}  // namespace

Server::Server(ReviewStore& store, ServerOptions opt)
    : store_(store), opt_(std::move(opt)), http_(std::make_unique<httplib::Server>()) {
    // httplib's default adds SO_REUSEPORT, which lets a second server share a busy port.
    http_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    routes();
}

Server::~Server() { stop(); }

json Server::stats() const {
    json counts = {{"silver", 0}, {"gold", 0}, {"rejected", 0}};
    const auto items = store_.list();
    for (const auto& s : items) counts[annotate::to_string(s.status)] = counts[annotate::to_string(s.status)].get<int>() + 1;
    json out = {{"counts", counts}, {"total", items.size()}, {"decisions", store_.decisions()}};
    const auto mean = store_.mean_revision_seconds();
    out["mean_revision_seconds"] = mean ? json(*mean) : json(nullptr);
    annotate::CostModel c{opt_.t_inference, mean.value_or(0.0), opt_.t_tuning,
                          std::max<long>(1, static_cast<long>(items.size()))};
    out["cost"] = {{"t_inference", c.t_inference},
                   {"t_revision", c.t_revision},
                   {"t_tuning", c.t_tuning},
                   {"n_images", c.n_images},
                   {"cost_per_image", annotate::cost_per_image(c)}};
    return out;
}

void Server::routes() {
    auto& s = *http_;
    s.Get("/api/images", guarded([this](const httplib::Request&, httplib::Response& res) {
              json list = json::array();
              for (const auto& item : store_.list()) {
                  list.push_back({{"id", item.id},
                                  {"status", annotate::to_string(item.status)},
                                  {"version", item.version},
                                  {"polygons", item.polygon_count},
                                  {"thumbnail_url", "/api/images/" + item.id}});
              }
              send_json(res, list);
          }));

    s.Get(R"(/api/images/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
              const std::string id = req.matches[1];
              store_.get(id);  // 404 for unknown ids
              std::ifstream in(store_.image_path(id), std::ios::binary);
              if (!in) throw NotFoundError("image file for '" + id + "' is missing");
              std::stringstream buf;
              buf << in.rdbuf();
              res.set_content(buf.str(), "image/png");
          }));

    s.Get(R"(/api/annotations/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, annotate::record_to_json(store_.fetch(req.matches[1])));
          }));

    s.Put(R"(/api/annotations/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
              const json body = json::parse(req.body);
              if (!body.is_object()) throw ArgumentError("request body must be a JSON object");
              Decision d;
              d.status = decision_from(body);
              d.expected_version = body.at("expected_version").get<long>();
              if (body.contains("polygons") && !body["polygons"].is_null()) d.polygons = polygons_from(body["polygons"]);
              if (body.contains("note") && !body["note"].is_null()) d.note = body["note"].get<std::string>();
              send_json(res, annotate::record_to_json(store_.record_decision(req.matches[1], d)));
          }));

    s.Get("/api/export/coco", guarded([this](const httplib::Request&, httplib::Response& res) {
              std::vector<AnnotationRecord> gold;
              for (auto& [id, r] : store_.snapshot())
                  if (r.status == Status::gold) gold.push_back(std::move(r));
              res.set_content(annotate::to_coco_string(gold), "application/json");
          }));

    s.Get("/api/stats", guarded([this](const httplib::Request&, httplib::Response& res) { send_json(res, stats()); }));

    if (!opt_.static_dir.empty() && !s.set_mount_point("/", opt_.static_dir.string())) {
        throw IoError("static directory not found: " + opt_.static_dir.string());
    }

    s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.body.empty()) {
            send_error(res, res.status, res.status == 404 ? "not_found" : "error",
                       req.method + " " + req.path + " failed");
        }
    });
}

void Server::start() {
    if (opt_.port == 0) {
        port_ = http_->bind_to_any_port(opt_.host);
        if (port_ < 0) throw IoError("cannot bind " + opt_.host);
    } else {
        if (!http_->bind_to_port(opt_.host, opt_.port)) {
            throw IoError("cannot bind " + opt_.host + ":" + std::to_string(opt_.port) + " (port busy?)");
        }
        port_ = opt_.port;
    }
    thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    spdlog::info("review service on http://{}:{}", opt_.host, port_);
}

void Server::wait() {
    if (thread_.joinable()) thread_.join();
}

void Server::stop() {
    if (http_) http_->stop();
    if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
}

}  // namespace elseg::review
