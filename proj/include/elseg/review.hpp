#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "elseg/annotate.hpp"

namespace httplib {
class Server;
}

namespace elseg::review {

using annotate::AnnotationRecord;
using annotate::Status;

struct AuditEntry {
    long seq = 0;
    /// Milliseconds since the Unix epoch; never decreases along the log.
    long long time_ms = 0;
    std::string image_id;
    std::string action;  // "create" or "decision"
    long version = 0;
    /// Seconds between the reviewer's fetch and the decision; absent when no fetch was seen.
    std::optional<double> revision_seconds;
    nlohmann::json record;
};

nlohmann::json audit_to_json(const AuditEntry& e);
AuditEntry audit_from_json(const nlohmann::json& j);

/// Latest record per image id after applying the entries in order.
std::map<std::string, AnnotationRecord> replay(const std::vector<AuditEntry>& log);

struct Summary {
    std::string id;
    Status status = Status::silver;
    long version = 0;
    std::size_t polygon_count = 0;
};

struct Decision {
    Status status = Status::gold;
    long expected_version = 0;
    /// Replacement polygons; the current ones are kept when absent.
    std::optional<std::vector<annotate::Polygon>> polygons;
    std::optional<std::string> note;
};

/// Image ids double as file names: [A-Za-z0-9_.-], not starting with '.'.
bool valid_id(const std::string& id);

/// Directory layout: manifest.json, records/<id>.json, images/<id>.png, audit.jsonl.
/// Files are replaced by write-to-temp then rename.
class ReviewStore {
public:
    /// Opens (creating if needed) and loads an existing store.
    explicit ReviewStore(std::filesystem::path root);
    ReviewStore(const ReviewStore&) = delete;
    ReviewStore& operator=(const ReviewStore&) = delete;

    const std::filesystem::path& root() const { return root_; }

    /// Registers a new silver record and a PNG copy of its image. ConflictError if the id exists.
    void add(AnnotationRecord record, const std::filesystem::path& image_file);

    std::vector<Summary> list() const;
    AnnotationRecord get(const std::string& id) const;
    /// get() that also starts the revision stopwatch for this record.
    AnnotationRecord fetch(const std::string& id);
    std::filesystem::path image_path(const std::string& id) const;

    /// Applies a reviewer decision under the record's lock.
    /// Throws NotFoundError, ConflictError (stale version) or ValidationError (bad transition or geometry).
    AnnotationRecord record_decision(const std::string& id, const Decision& d);

    std::vector<AuditEntry> audit() const;
    std::map<std::string, AnnotationRecord> snapshot() const;

    std::size_t decisions() const;
    /// Mean fetch-to-decision seconds; nullopt before the first timed decision.
    std::optional<double> mean_revision_seconds() const;

private:
    struct Entry {
        mutable std::mutex lock;
        std::shared_ptr<const AnnotationRecord> current;
        std::optional<std::chrono::steady_clock::time_point> fetched_at;
    };

    Entry& entry(const std::string& id) const;
    void write_record(const AnnotationRecord& r) const;
    void write_manifest() const;
    void append_audit(AuditEntry e);
    void load();

    std::filesystem::path root_;
    mutable std::shared_mutex index_lock_;
    std::map<std::string, std::unique_ptr<Entry>> index_;

    mutable std::mutex audit_lock_;
    std::vector<AuditEntry> audit_;
    long long last_time_ms_ = 0;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    /// 0 picks a free port.
    int port = 8080;
    /// Inputs to the cost summary in /api/stats.
    double t_inference = 0.0;
    double t_tuning = 0.0;
    /// Optional directory of built UI assets mounted at /.
    std::filesystem::path static_dir;
};

class Server {
public:
    Server(ReviewStore& store, ServerOptions opt);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts serving on a background thread. IoError when the port is taken.
    void start();
    /// Blocks until stop() is called from another thread or a signal handler.
    void wait();
    void stop();
    int port() const { return port_; }

    /// JSON body of /api/stats.
    nlohmann::json stats() const;

private:
    void routes();

    ReviewStore& store_;
    ServerOptions opt_;
    std::unique_ptr<httplib::Server> http_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace elseg::review
