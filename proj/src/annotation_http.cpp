#include <thread>

#include "httplib.h"
#include "mvgeo/annotation.hpp"
#include "mvgeo/error.hpp"
#include "mvgeo/json_io.hpp"

namespace mvgeo {

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ServiceError& e)
{
    send_json(res, e.to_json(), e.status());
}

json parse_body(const httplib::Request& req)
{
    try {
        json j = json::parse(req.body);
        if (!j.is_object()) throw ServiceError(400, "BadRequest", "request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ServiceError(400, "BadRequest", std::string("malformed JSON: ") + e.what());
    }
}

std::optional<std::uint64_t> revision_field(const json& j)
{
    if (!j.contains("expected_revision") || j["expected_revision"].is_null()) return std::nullopt;
    return j["expected_revision"].get<std::uint64_t>();
}

BoundingBox box_field(const json& j)
{
    if (j.contains("box")) return box_from_array(j["box"]);
    return {j.at("x_min").get<double>(), j.at("y_min").get<double>(), j.at("x_max").get<double>(),
            j.at("y_max").get<double>()};
}

BoxUpsert box_upsert(const json& j)
{
    BoxUpsert up;
    up.box = box_field(j);
    up.label = j.value("label", 0);
    up.author = j.value("author", std::string{});
    up.expected_revision = revision_field(j);
    if (j.contains("box_id") && !j["box_id"].is_null()) up.box_id = j["box_id"].get<std::string>();
    return up;
}

IdentityUpsert identity_upsert(const json& j)
{
    IdentityUpsert up;
    up.instance_id = j.at("instance_id").get<std::string>();
    if (j.contains("geo") && !j["geo"].is_null()) {
        try {
            up.geo = j["geo"].get<GeoCoordinate>();
        } catch (const Error& e) {
            throw ServiceError(422, "InvalidCoordinate", e.what());
        }
    }
    for (const auto& l : j.value("links", json::array())) {
        up.links.push_back({l.at("image_id").get<std::string>(), l.at("box_id").get<std::string>()});
    }
    if (j.contains("status")) {
        const auto s = j["status"].get<std::string>();
        if (s == "open") {
            up.status = IdentityStatus::Open;
        } else if (s == "complete") {
            up.status = IdentityStatus::Complete;
        } else {
            throw ServiceError(422, "InvalidStatus", "status must be 'open' or 'complete'", {{"status", s}});
        }
    }
    up.expected_revision = revision_field(j);
    return up;
}

// Runs a handler, mapping every failure onto the {code, message, detail} body.
template <typename F>
void guarded(httplib::Response& res, F&& f)
{
    try {
        f();
    } catch (const ServiceError& e) {
        send_error(res, e);
    } catch (const json::exception& e) {
        send_error(res, ServiceError(400, "BadRequest", std::string("invalid payload: ") + e.what()));
    } catch (const Error& e) {
        const int status = e.code() == ErrorCode::InvalidCoordinate || e.code() == ErrorCode::ParseError ? 422 : 500;
        send_error(res, ServiceError(status, std::string(to_string(e.code())), e.what()));
    } catch (const std::exception& e) {
        send_error(res, ServiceError(500, "InternalError", e.what()));
    }
}

}  // namespace

struct AnnotationServer::Impl {
    AnnotationService& service;
    ServerConfig cfg;
    httplib::Server server;
    std::thread thread;

    Impl(AnnotationService& s, ServerConfig c) : service(s), cfg(std::move(c)) { routes(); }

    void routes()
    {
        server.set_default_headers({{"Access-Control-Allow-Origin", cfg.cors_origin},
                                    {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"},
                                    {"Access-Control-Allow-Headers", "Content-Type"}});
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, {{"status", "ok"}});
        });
        server.Get("/scenes", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { send_json(res, service.scenes()); });
        });
        server.Get(R"(/images/([^/]+)/meta)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, service.image_meta(req.matches[1])); });
        });
        server.Get(R"(/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { res.set_content(service.image_bytes(req.matches[1]), "image/jpeg"); });
        });
        server.Post("/session/select", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const json j = parse_body(req);
                send_json(res, to_json(service.select_target(j.at("lat").get<double>(), j.at("lng").get<double>())));
            });
        });
        server.Post(R"(/images/([^/]+)/boxes)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const BoxUpsert up = box_upsert(parse_body(req));
                send_json(res, to_json(service.upsert_box(req.matches[1], up)));
            });
        });
        server.Put(R"(/images/([^/]+)/boxes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                BoxUpsert up = box_upsert(parse_body(req));
                up.box_id = req.matches[2];
                up.must_exist = true;
                send_json(res, to_json(service.upsert_box(req.matches[1], up)));
            });
        });
        server.Post("/identities", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, to_json(service.link_identity(identity_upsert(parse_body(req))))); });
        });
        server.Get(R"(/identities/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, to_json(service.identity(req.matches[1]))); });
        });
        server.Get("/export", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string name = req.has_param("format") ? req.get_param_value("format") : "json";
                const ExportFormat format = export_format_from_string(name);
                res.set_header("Content-Disposition", "attachment; filename=\"annotations-" + name + ".tar\"");
                res.set_content(make_tar(service.export_files(format)), "application/x-tar");
            });
        });

        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (res.body.empty() && res.status == 404) {
                send_error(res, ServiceError(404, "NotFound", "no route for " + req.method + " " + req.path));
            }
        });
    }

    int bind()
    {
        if (cfg.port == 0) {
            const int port = server.bind_to_any_port(cfg.host);
            if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + cfg.host);
            return port;
        }
        if (!server.bind_to_port(cfg.host, cfg.port)) {
            throw Error(ErrorCode::IoError, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
        }
        return cfg.port;
    }
};

AnnotationServer::AnnotationServer(AnnotationService& service, ServerConfig cfg)
    : impl_(std::make_unique<Impl>(service, std::move(cfg)))
{
}

AnnotationServer::~AnnotationServer()
{
    stop();
}

int AnnotationServer::start()
{
    const int port = impl_->bind();
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void AnnotationServer::run(const std::function<void(int)>& on_bound)
{
    const int port = impl_->bind();
    if (on_bound) on_bound(port);
    impl_->server.listen_after_bind();
}

void AnnotationServer::stop()
{
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace mvgeo
