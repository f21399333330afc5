#pragma once

#include "sbo/json_io.hpp"
#include "sbo/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

namespace httplib {
class Server;
}

namespace sbo {

struct ApiResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";

    [[nodiscard]] Json json() const { return Json::parse(body); }
};

/// Writes `text` to `path` through a temporary file and a rename.
void atomic_write(const std::filesystem::path& path, const std::string& text);

/// HTTP/JSON ask-tell sessions persisted as one JSON document per session.
/// No authentication: intended for local use only.
class SessionService {
public:
    /// Loads every session document found in `data_dir` (created if missing).
    explicit SessionService(std::filesystem::path data_dir);

    ApiResponse create_session(const std::string& body);
    ApiResponse list_sessions() const;
    ApiResponse get_session(const std::string& id) const;
    ApiResponse suggest(const std::string& id);
    ApiResponse tell(const std::string& id, const std::string& body);
    ApiResponse map(const std::string& id, const std::string& grid, const std::string& mode) const;
    ApiResponse trace_csv(const std::string& id) const;

    /// Registers the routes and permissive CORS headers on `server`.
    void mount(httplib::Server& server);

    [[nodiscard]] const std::filesystem::path& data_dir() const { return dir_; }

private:
    struct Entry {
        std::string id;
        std::string created;
        std::string updated;
        std::uint64_t revision = 0;
        std::unique_ptr<AskTellState> state;
        std::shared_ptr<const Json> snapshot;
        mutable std::mutex write_mutex;
        mutable std::mutex snapshot_mutex;

        [[nodiscard]] std::shared_ptr<const Json> view() const;
    };

    [[nodiscard]] std::shared_ptr<Entry> find(const std::string& id) const;
    void commit(Entry& e);
    [[nodiscard]] std::string new_id();

    std::filesystem::path dir_;
    mutable std::shared_mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t id_counter_ = 0;
};

}  // namespace sbo
