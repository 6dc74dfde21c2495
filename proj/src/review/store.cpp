#include <fstream>
#include <regex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "elseg/error.hpp"
#include "elseg/imagecore.hpp"
#include "elseg/review.hpp"

namespace elseg::review {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename " + tmp.string() + ": " + ec.message());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::vector<annotate::Polygon> normalized(const std::vector<annotate::Polygon>& polys) {
    std::vector<annotate::Polygon> out;
    for (const auto& p : polys) {
        if (p.vertices.size() < 3) throw ValidationError("polygon needs at least 3 vertices");
        out.push_back(geometry::make_polygon(p.vertices));
    }
    return out;
}

}  // namespace

bool valid_id(const std::string& id) {
    static const std::regex re("[A-Za-z0-9_][A-Za-z0-9_.-]*");
    return id.size() <= 200 && std::regex_match(id, re);
}

json audit_to_json(const AuditEntry& e) {
    json j = {{"seq", e.seq},         {"time_ms", e.time_ms}, {"image_id", e.image_id},
              {"action", e.action},   {"version", e.version}, {"record", e.record}};
    j["revision_seconds"] = e.revision_seconds ? json(*e.revision_seconds) : json(nullptr);
    return j;
}

AuditEntry audit_from_json(const json& j) {
    AuditEntry e;
    e.seq = j.at("seq").get<long>();
    e.time_ms = j.at("time_ms").get<long long>();
    e.image_id = j.at("image_id").get<std::string>();
    e.action = j.at("action").get<std::string>();
    e.version = j.at("version").get<long>();
    if (j.contains("revision_seconds") && !j["revision_seconds"].is_null())
        e.revision_seconds = j["revision_seconds"].get<double>();
    e.record = j.at("record");
    return e;
}

std::map<std::string, AnnotationRecord> replay(const std::vector<AuditEntry>& log) {
    std::map<std::string, AnnotationRecord> state;
    for (const auto& e : log) state[e.image_id] = annotate::record_from_json(e.record);
    return state;
}

ReviewStore::ReviewStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_ / "records");
    fs::create_directories(root_ / "images");
    load();
}

void ReviewStore::load() {
    const fs::path manifest = root_ / "manifest.json";
    if (fs::exists(manifest)) {
        const json m = read_json(manifest);
        for (const auto& item : m.at("records")) {
            const std::string id = item.at("id").get<std::string>();
            if (!valid_id(id)) throw FormatError("manifest lists invalid id '" + id + "'");
            if (!fs::exists(image_path(id))) throw FormatError("image missing for record " + id);
            auto e = std::make_unique<Entry>();
            e->current = std::make_shared<const AnnotationRecord>(
                annotate::record_from_json(read_json(root_ / "records" / (id + ".json"))));
            index_.emplace(id, std::move(e));
        }
    }
    std::ifstream log(root_ / "audit.jsonl");
    std::string line;
    while (std::getline(log, line)) {
        if (line.empty()) continue;
        try {
            audit_.push_back(audit_from_json(json::parse(line)));
            last_time_ms_ = std::max(last_time_ms_, audit_.back().time_ms);
        } catch (const json::exception&) {
            // Only a torn final line is expected here.
            spdlog::warn("audit log: skipping unreadable line {}", audit_.size() + 1);
        }
    }
    spdlog::debug("review store {}: {} records, {} audit entries", root_.string(), index_.size(), audit_.size());
}

void ReviewStore::write_record(const AnnotationRecord& r) const {
    write_atomic(root_ / "records" / (r.image_id + ".json"), annotate::record_to_json(r).dump(2) + "\n");
}

void ReviewStore::write_manifest() const {
    json items = json::array();
    for (const auto& [id, e] : index_) items.push_back({{"id", id}, {"image", "images/" + id + ".png"}});
    write_atomic(root_ / "manifest.json", json{{"format", 1}, {"records", items}}.dump(2) + "\n");
}

void ReviewStore::append_audit(AuditEntry e) {
    std::lock_guard g(audit_lock_);
    const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    e.time_ms = std::max<long long>(now, last_time_ms_);
    last_time_ms_ = e.time_ms;
    e.seq = static_cast<long>(audit_.size()) + 1;
    std::ofstream out(root_ / "audit.jsonl", std::ios::app);
    out << audit_to_json(e).dump() << "\n";
    out.flush();
    if (!out) throw IoError("cannot append to audit log");
    audit_.push_back(std::move(e));
}

fs::path ReviewStore::image_path(const std::string& id) const { return root_ / "images" / (id + ".png"); }

ReviewStore::Entry& ReviewStore::entry(const std::string& id) const {
    std::shared_lock g(index_lock_);
    const auto it = index_.find(id);
    if (it == index_.end()) throw NotFoundError("no record with id '" + id + "'");
    return *it->second;
}

void ReviewStore::add(AnnotationRecord r, const fs::path& image_file) {
    if (!valid_id(r.image_id)) throw ArgumentError("invalid image id '" + r.image_id + "'");
    r.polygons = normalized(r.polygons);
    r.status = Status::silver;
    r.version = 1;
    if (r.created_at.empty()) r.created_at = annotate::utc_timestamp();
    r.updated_at = r.created_at;
    annotate::validate_record(r);
    const Image img = load_grayscale(image_file);
    if (img.width != r.width || img.height != r.height) {
        throw ValidationError(fmt::format("record {}: image is {}x{}, record says {}x{}", r.image_id, img.width,
                                          img.height, r.width, r.height));
    }
    {
        std::unique_lock g(index_lock_);
        if (const auto it = index_.find(r.image_id); it != index_.end()) {
            throw ConflictError("record '" + r.image_id + "' already exists", it->second->current->version);
        }
        const fs::path png = image_path(r.image_id);
        save_png(img, png.string() + ".tmp.png");
        fs::rename(png.string() + ".tmp.png", png);
        write_record(r);
        auto e = std::make_unique<Entry>();
        e->current = std::make_shared<const AnnotationRecord>(r);
        index_.emplace(r.image_id, std::move(e));
        write_manifest();
    }
    AuditEntry a;
    a.image_id = r.image_id;
    a.action = "create";
    a.version = r.version;
    a.record = annotate::record_to_json(r);
    append_audit(std::move(a));
}

std::vector<Summary> ReviewStore::list() const {
    std::shared_lock g(index_lock_);
    std::vector<Summary> out;
    for (const auto& [id, e] : index_) {
        std::shared_ptr<const AnnotationRecord> r;
        {
            std::lock_guard l(e->lock);
            r = e->current;
        }
        out.push_back({id, r->status, r->version, r->polygons.size()});
    }
    return out;
}

AnnotationRecord ReviewStore::get(const std::string& id) const {
    Entry& e = entry(id);
    std::lock_guard l(e.lock);
    return *e.current;
}

AnnotationRecord ReviewStore::fetch(const std::string& id) {
    Entry& e = entry(id);
    std::lock_guard l(e.lock);
    e.fetched_at = std::chrono::steady_clock::now();
    return *e.current;
}

AnnotationRecord ReviewStore::record_decision(const std::string& id, const Decision& d) {
    Entry& e = entry(id);
    std::optional<double> seconds;
    AnnotationRecord next;
    {
        std::lock_guard l(e.lock);
        const AnnotationRecord& cur = *e.current;
        if (d.expected_version != cur.version) {
            throw ConflictError(fmt::format("record {} is at version {}, request expected {}", id, cur.version,
                                            d.expected_version),
                                cur.version);
        }
        next = cur;
        annotate::transition(next, d.status);
        if (d.polygons) next.polygons = normalized(*d.polygons);
        if (d.note) next.note = *d.note;
        annotate::validate_record(next);
        next.version = cur.version + 1;
        next.updated_at = annotate::utc_timestamp();
        if (e.fetched_at) {
            seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - *e.fetched_at).count();
            e.fetched_at.reset();
        }
        write_record(next);
        e.current = std::make_shared<const AnnotationRecord>(next);
        // Audit order matches commit order for a given record.
        AuditEntry a;
        a.image_id = id;
        a.action = "decision";
        a.version = next.version;
        a.revision_seconds = seconds;
        a.record = annotate::record_to_json(next);
        append_audit(std::move(a));
    }
    return next;
}

std::vector<AuditEntry> ReviewStore::audit() const {
    std::lock_guard g(audit_lock_);
    return audit_;
}

std::map<std::string, AnnotationRecord> ReviewStore::snapshot() const {
    std::map<std::string, AnnotationRecord> out;
    for (const auto& s : list()) out.emplace(s.id, get(s.id));
    return out;
}

std::size_t ReviewStore::decisions() const {
    std::lock_guard g(audit_lock_);
    return static_cast<std::size_t>(
        std::count_if(audit_.begin(), audit_.end(), [](const AuditEntry& a) { return a.action == "decision"; }));
}

std::optional<double> ReviewStore::mean_revision_seconds() const {
    std::lock_guard g(audit_lock_);
    double total = 0;
    std::size_t n = 0;
    for (const auto& a : audit_) {
        if (a.revision_seconds) {
            total += *a.revision_seconds;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return total / static_cast<double>(n);
}

}  // namespace elseg::review
