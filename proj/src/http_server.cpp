#include "priorweaver/http_server.hpp"

#include <httplib.h>

namespace priorweaver {

struct HttpServer::Impl {
    Service& service;
    ServerOptions options;
    httplib::Server server;
    int port = -1;

    Impl(Service& s, ServerOptions o) : service(s), options(std::move(o)) {}
};

HttpServer::HttpServer(Service& service, ServerOptions options) : impl_(std::make_unique<Impl>(service, std::move(options))) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        const HttpResponse out = impl_->service.handle({req.method, req.path, req.body});
        res.status = out.status;
        if (!out.body.empty()) res.set_content(out.body, out.content_type);
    };
    auto& server = impl_->server;
    server.Get(".*", forward);
    server.Post(".*", forward);
    server.Put(".*", forward);
    server.Delete(".*", forward);
    if (!impl_->options.cors_origin.empty()) {
        server.set_default_headers({{"Access-Control-Allow-Origin", impl_->options.cors_origin},
                                    {"Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS"},
                                    {"Access-Control-Allow-Headers", "Content-Type"}});
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
    auto& o = impl_->options;
    if (o.port == 0) {
        impl_->port = impl_->server.bind_to_any_port(o.host);
    } else {
        impl_->port = impl_->server.bind_to_port(o.host, o.port) ? o.port : -1;
    }
    if (impl_->port < 0) throw Error("io_error", "cannot listen on " + o.host + ":" + std::to_string(o.port));
    return impl_->port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

ServerOptions parse_listen_address(const std::string& address, ServerOptions base) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == address.size())
        throw Error("invalid_argument", "listen address must be host:port, got '" + address + "'");
    base.host = address.substr(0, colon);
    try {
        base.port = std::stoi(address.substr(colon + 1));
    } catch (const std::exception&) {
        throw Error("invalid_argument", "invalid port in '" + address + "'");
    }
    if (base.port < 0 || base.port > 65535) throw Error("invalid_argument", "port out of range in '" + address + "'");
    return base;
}

}  // namespace priorweaver
