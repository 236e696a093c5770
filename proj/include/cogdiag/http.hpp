#ifndef COGDIAG_HTTP_HPP
#define COGDIAG_HTTP_HPP

#include <string>

#include <httplib.h>

#include "cogdiag/service.hpp"

namespace cogdiag {

namespace detail {

inline void send(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(2), "application/json");
}

inline bool parse_body(const httplib::Request& req, httplib::Response& res, Json& out) {
    try {
        out = req.body.empty() ? Json::object() : Json::parse(req.body);
        return true;
    } catch (const Json::parse_error& e) {
        send(res, {400, error_body("BadRequest", std::string("request body is not valid JSON: ") + e.what(),
                                   Json::array({{{"field", "body"}, {"message", "invalid JSON"}}}))});
        return false;
    }
}

}  // namespace detail

/// Registers the HTTP routes of `api` on `server`. `cors_origin` is echoed
/// in Access-Control-Allow-Origin on every response.
inline void mount(httplib::Server& server, Api& api, const std::string& cors_origin = "*") {
    server.set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
        detail::send(res, {200, {{"status", "ok"}, {"format_version", kModelFormatVersion}}});
    });

    server.Post("/api/datasets", [&api](const httplib::Request& req, httplib::Response& res) {
        if (req.is_multipart_form_data()) {
            auto field = [&](const char* name) -> std::optional<std::string> {
                if (!req.has_file(name)) return std::nullopt;
                return req.get_file_value(name).content;
            };
            const auto responses = field("responses");
            const auto qmatrix = field("qmatrix");
            if (!responses || !qmatrix) {
                detail::send(res, {400, error_body("BadRequest", "multipart upload needs 'responses' and 'qmatrix' parts",
                                                   Json::array({{{"field", !responses ? "responses" : "qmatrix"},
                                                                 {"message", "missing part"}}}))});
                return;
            }
            detail::send(res, api.create_dataset(*responses, *qmatrix, field("items")));
            return;
        }
        Json body;
        if (!detail::parse_body(req, res, body)) return;
        detail::send(res, api.create_dataset(body));
    });

    server.Get(R"(/api/datasets/([^/]+))", [&api](const httplib::Request& req, httplib::Response& res) {
        detail::send(res, api.get_dataset(req.matches[1]));
    });

    server.Post("/api/models", [&api](const httplib::Request& req, httplib::Response& res) {
        Json body;
        if (!detail::parse_body(req, res, body)) return;
        detail::send(res, api.create_model(body));
    });

    server.Get(R"(/api/models/([^/]+))", [&api](const httplib::Request& req, httplib::Response& res) {
        detail::send(res, api.get_model(req.matches[1]));
    });

    server.Post(R"(/api/models/([^/]+)/diagnose)", [&api](const httplib::Request& req, httplib::Response& res) {
        Json body;
        if (!detail::parse_body(req, res, body)) return;
        detail::send(res, api.diagnose(req.matches[1], body));
    });

    server.Post(R"(/api/models/([^/]+)/explain/contrastive)",
                [&api](const httplib::Request& req, httplib::Response& res) {
                    Json body;
                    if (!detail::parse_body(req, res, body)) return;
                    detail::send(res, api.contrastive(req.matches[1], body));
                });

    server.Post(R"(/api/models/([^/]+)/explain/counterfactual)",
                [&api](const httplib::Request& req, httplib::Response& res) {
                    Json body;
                    if (!detail::parse_body(req, res, body)) return;
                    detail::send(res, api.counterfactual(req.matches[1], body));
                });

    server.Get(R"(/api/models/([^/]+)/analytics/(overview|items|kcs|comparison|suggestions))",
               [&api](const httplib::Request& req, httplib::Response& res) {
                   detail::send(res, api.analytics(req.matches[1], req.matches[2]));
               });

    server.Post("/api/snapshot", [&api](const httplib::Request&, httplib::Response& res) {
        detail::send(res, api.snapshot());
    });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            detail::send(res, {res.status, error_body(res.status == 404 ? "NotFound" : "HttpError",
                                                      "no route for this request")});
        }
    });
}

}  // namespace cogdiag

#endif  // COGDIAG_HTTP_HPP
