#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "priorweaver/serialization.hpp"

namespace priorweaver {

struct HttpRequest {
    std::string method;
    std::string path;
    std::string body;
};

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

struct ServiceOptions {
    /// One <session_id>.json per session, rewritten after every mutation and
    /// loaded back on construction.
    std::optional<std::filesystem::path> snapshot_dir;
    /// Seed for sessions created without an explicit one.
    std::function<std::uint64_t()> seed_source;
};

/// Session store and request router behind the HTTP API. Requests for one
/// session are serialized; different sessions proceed concurrently.
class Service {
public:
    explicit Service(ServiceOptions options = {});
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    HttpResponse handle(const HttpRequest& request);

    std::size_t session_count() const;

private:
    struct Session;

    std::shared_ptr<Session> find_session(const std::string& id) const;
    std::string create_session(const json& body);
    void persist(const Session& session) const;
    void load_persisted();

    HttpResponse route(const HttpRequest& request);

    ServiceOptions options_;
    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_session_ = 1;
};

/// HTTP status for a domain error code.
int status_for(const std::string& code) noexcept;

}  // namespace priorweaver
