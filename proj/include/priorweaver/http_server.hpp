#pragma once

#include <memory>
#include <string>

#include "priorweaver/service.hpp"

namespace priorweaver {

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8787;  ///< 0 picks a free port
    std::string cors_origin;
};

/// Serves a Service over HTTP with cpp-httplib.
class HttpServer {
public:
    HttpServer(Service& service, ServerOptions options);
    ~HttpServer();

    /// Binds the socket; returns the bound port.
    int bind();
    /// Blocks until stop(). bind() must have succeeded.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Parses "host:port".
ServerOptions parse_listen_address(const std::string& address, ServerOptions base = {});

}  // namespace priorweaver
