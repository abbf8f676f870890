#include "cookiearc/archive_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

namespace cookiearc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kRecordsFile = "records.dat";
constexpr const char* kIndexFile = "index.cdxj";
constexpr const char* kMetaFile = "meta.json";

json headers_to_json(const Headers& headers) {
    json arr = json::array();
    for (const auto& [name, value] : headers.fields()) arr.push_back({name, value});
    return arr;
}

Headers headers_from_json(const json& arr) {
    Headers headers;
    for (const auto& field : arr) headers.add(field.at(0).get<std::string>(), field.at(1).get<std::string>());
    return headers;
}

json key_to_json(const VariantKey& key) {
    json arr = json::array();
    for (const auto& [dim, value] : key.pairs) arr.push_back({dim, value});
    return arr;
}

VariantKey key_from_json(const json& arr) {
    VariantKey key;
    for (const auto& pair : arr) {
        key.pairs.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    }
    return key;
}

std::string request_fingerprint(const Headers& headers) {
    std::vector<std::string> lines;
    for (const auto& [name, value] : headers.fields()) lines.push_back(name + ": " + value);
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& line : lines) {
        if (!out.empty()) out += "\n";
        out += line;
    }
    return out;
}

std::string reduced_cookie_value(const Headers& headers, const std::vector<std::string>& names) {
    std::vector<CookiePair> kept;
    for (const auto& header : headers.get_all("cookie")) {
        for (auto& pair : parse_cookie_header(header)) {
            if (std::find(names.begin(), names.end(), to_lower(pair.first)) != names.end()) {
                kept.push_back(std::move(pair));
            }
        }
    }
    std::sort(kept.begin(), kept.end());
    std::string out;
    for (const auto& [name, value] : kept) {
        if (!out.empty()) out += ";";
        out += name + "=" + value;
    }
    return out;
}

// Append-only file with fsync after every write.
class AppendFile {
public:
    AppendFile() = default;
    explicit AppendFile(const fs::path& path) {
        fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (fd_ < 0) throw StoreError("cannot open " + path.string() + ": " + std::strerror(errno));
        offset_ = static_cast<std::uint64_t>(::lseek(fd_, 0, SEEK_END));
    }
    AppendFile(AppendFile&& other) noexcept
        : fd_(std::exchange(other.fd_, -1)), offset_(other.offset_) {}
    AppendFile& operator=(AppendFile&& other) noexcept {
        if (this != &other) {
            close();
            fd_ = std::exchange(other.fd_, -1);
            offset_ = other.offset_;
        }
        return *this;
    }
    ~AppendFile() { close(); }

    [[nodiscard]] bool is_open() const noexcept { return fd_ >= 0; }
    [[nodiscard]] std::uint64_t offset() const noexcept { return offset_; }

    /// Returns false and sets errno on failure.
    bool write_all(std::string_view data) {
        while (!data.empty()) {
            auto n = ::write(fd_, data.data(), data.size());
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            data.remove_prefix(static_cast<std::size_t>(n));
            offset_ += static_cast<std::uint64_t>(n);
        }
        return ::fsync(fd_) == 0;
    }

private:
    void close() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_ = -1;
    std::uint64_t offset_ = 0;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool entry_less(const IndexEntry& a, const IndexEntry& b) {
    return std::tie(a.datetime, a.id) < std::tie(b.datetime, b.id);
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> VariantKey::dimensions() const {
    std::vector<std::string> dims;
    for (const auto& [dim, value] : pairs) dims.push_back(dim);
    return dims;
}

std::string VariantKey::to_string() const {
    if (pairs.empty()) return "-";
    std::string out;
    for (const auto& [dim, value] : pairs) {
        if (!out.empty()) out += "&";
        out += dim + "=" + value;
    }
    return out;
}

VariantConfig VariantConfig::normalized() const {
    VariantConfig out = *this;
    auto normalize = [](std::vector<std::string>& names) {
        for (auto& n : names) n = to_lower(trim(n));
        std::erase_if(names, [](const std::string& n) { return n.empty(); });
        std::vector<std::string> unique;
        for (auto& n : names) {
            if (std::find(unique.begin(), unique.end(), n) == unique.end()) unique.push_back(n);
        }
        names = std::move(unique);
    };
    normalize(out.content_cookie_names);
    normalize(out.implied_vary);
    return out;
}

json variant_config_to_json(const VariantConfig& cfg) {
    return {{"content_cookie_names", cfg.content_cookie_names},
            {"honor_vary", cfg.honor_vary},
            {"implied_vary", cfg.implied_vary}};
}

VariantConfig variant_config_from_json(const json& j) {
    VariantConfig cfg;
    cfg.content_cookie_names = j.value("content_cookie_names", cfg.content_cookie_names);
    cfg.honor_vary = j.value("honor_vary", cfg.honor_vary);
    cfg.implied_vary = j.value("implied_vary", cfg.implied_vary);
    return cfg.normalized();
}

VariantKey variant_key_for_dimensions(const Headers& request_headers,
                                      const std::vector<std::string>& dimensions,
                                      const VariantConfig& cfg) {
    auto norm = cfg.normalized();
    std::set<std::string> dims;
    for (const auto& d : dimensions) {
        auto lowered = to_lower(trim(d));
        if (!lowered.empty()) dims.insert(lowered);
    }
    VariantKey key;
    for (const auto& dim : dims) {
        if (dim == kVaryAllDimension) {
            key.pairs.emplace_back(dim, request_fingerprint(request_headers));
        } else if (dim == "cookie") {
            key.pairs.emplace_back(dim, reduced_cookie_value(request_headers, norm.content_cookie_names));
        } else {
            std::string joined;
            for (const auto& v : request_headers.get_all(dim)) {
                if (!joined.empty()) joined += ", ";
                joined += v;
            }
            key.pairs.emplace_back(dim, joined);
        }
    }
    return key;
}

VariantKey derive_variant_key(const Headers& request_headers, const Headers& response_headers,
                              const VariantConfig& cfg) {
    if (cfg.honor_vary) {
        auto vary = parse_vary(response_headers);
        if (vary.kind == VarySpec::Kind::kAll) {
            return variant_key_for_dimensions(request_headers, {std::string(kVaryAllDimension)}, cfg);
        }
        if (vary.kind == VarySpec::Kind::kList) {
            return variant_key_for_dimensions(request_headers, vary.fields, cfg);
        }
    }
    return variant_key_for_dimensions(request_headers, cfg.implied_vary, cfg);
}

std::string format_index_line(const IndexEntry& entry, std::uint64_t offset) {
    json j = {{"id", entry.id},
              {"offset", offset},
              {"status", entry.status},
              {"variant", key_to_json(entry.variant_key)}};
    return entry.uri.to_string() + " " + format_timestamp14(entry.datetime) + " " + j.dump();
}

StoreError::StoreError(const std::string& what, std::optional<std::uint64_t> record_id)
    : std::runtime_error(record_id ? what + " (record " + std::to_string(*record_id) + ")" : what),
      record_id_(record_id) {}

// ---------------------------------------------------------------------------

struct ArchiveStore::State {
    VariantConfig cfg;
    std::optional<fs::path> dir;
    std::map<std::uint64_t, ArchiveRecord> records;
    std::map<CanonicalUri, std::vector<IndexEntry>> index;
    std::uint64_t next_id = 1;
    AppendFile records_file;
    AppendFile index_file;
    mutable std::shared_mutex mu;

    void insert(ArchiveRecord record) {
        IndexEntry entry{record.uri, record.datetime, record.id, record.response_status,
                         record.variant_key};
        auto& bucket = index[record.uri];
        bucket.insert(std::upper_bound(bucket.begin(), bucket.end(), entry, entry_less), entry);
        next_id = std::max(next_id, record.id + 1);
        records.emplace(record.id, std::move(record));
    }
};

ArchiveStore::ArchiveStore(std::unique_ptr<State> state) : state_(std::move(state)) {}
ArchiveStore::ArchiveStore(ArchiveStore&&) noexcept = default;
ArchiveStore& ArchiveStore::operator=(ArchiveStore&&) noexcept = default;
ArchiveStore::~ArchiveStore() = default;

ArchiveStore ArchiveStore::in_memory(VariantConfig cfg) {
    auto state = std::make_unique<State>();
    state->cfg = cfg.normalized();
    return ArchiveStore(std::move(state));
}

ArchiveStore ArchiveStore::create(const fs::path& dir, VariantConfig cfg) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StoreError("cannot create archive directory " + dir.string() + ": " + ec.message());
    if (fs::exists(dir / kMetaFile) || fs::exists(dir / kRecordsFile)) {
        throw StoreError("archive already exists at " + dir.string());
    }

    auto state = std::make_unique<State>();
    state->cfg = cfg.normalized();
    state->dir = dir;

    json meta = {{"format_version", kFormatVersion},
                 {"variant_config", variant_config_to_json(state->cfg)}};
    {
        std::ofstream out(dir / kMetaFile, std::ios::binary | std::ios::trunc);
        out << meta.dump(2) << "\n";
        if (!out.flush()) throw StoreError("cannot write " + (dir / kMetaFile).string());
    }
    state->records_file = AppendFile(dir / kRecordsFile);
    state->index_file = AppendFile(dir / kIndexFile);
    return ArchiveStore(std::move(state));
}

ArchiveStore ArchiveStore::open(const fs::path& dir) {
    auto state = std::make_unique<State>();
    state->dir = dir;

    json meta;
    try {
        meta = json::parse(read_file(dir / kMetaFile));
    } catch (const json::exception& e) {
        throw StoreError("malformed meta.json: " + std::string(e.what()));
    }
    if (meta.value("format_version", 0) != kFormatVersion) {
        throw StoreError("unsupported archive format version");
    }
    state->cfg = variant_config_from_json(meta.at("variant_config"));

    std::map<std::uint64_t, std::uint64_t> offsets;
    auto data = read_file(dir / kRecordsFile);
    std::size_t pos = 0;
    while (pos < data.size()) {
        auto nl = data.find('\n', pos);
        if (nl == std::string::npos) throw StoreError("truncated record header at offset " + std::to_string(pos));
        ArchiveRecord record;
        std::size_t body_length = 0;
        try {
            auto header = json::parse(std::string_view(data).substr(pos, nl - pos));
            record.id = header.at("id").get<std::uint64_t>();
            record.uri = canonicalize(header.at("uri").get<std::string>());
            auto dt = parse_timestamp14(header.at("datetime").get<std::string>());
            if (!dt) throw StoreError("bad datetime", record.id);
            record.datetime = *dt;
            record.request_headers = headers_from_json(header.at("request_headers"));
            record.response_status = header.at("status").get<int>();
            record.response_headers = headers_from_json(header.at("response_headers"));
            record.variant_key = key_from_json(header.at("variant"));
            body_length = header.at("body_length").get<std::size_t>();
        } catch (const json::exception& e) {
            throw StoreError("malformed record header at offset " + std::to_string(pos) + ": " + e.what());
        } catch (const UriError& e) {
            throw StoreError(std::string("bad record URI: ") + e.what(), record.id);
        }
        auto body_start = nl + 1;
        if (body_start + body_length + 1 > data.size() || data[body_start + body_length] != '\n') {
            throw StoreError("truncated record body", record.id);
        }
        record.body = data.substr(body_start, body_length);
        if (state->records.contains(record.id)) throw StoreError("duplicate record id", record.id);
        offsets[record.id] = pos;
        state->insert(std::move(record));
        pos = body_start + body_length + 1;
    }

    // The index must describe exactly the records present.
    auto index_text = read_file(dir / kIndexFile);
    std::set<std::uint64_t> indexed;
    std::istringstream lines(index_text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto sp1 = line.find(' ');
        auto sp2 = sp1 == std::string::npos ? sp1 : line.find(' ', sp1 + 1);
        if (sp2 == std::string::npos) throw StoreError("malformed index line " + std::to_string(line_no));
        std::uint64_t id = 0;
        try {
            auto j = json::parse(line.substr(sp2 + 1));
            id = j.at("id").get<std::uint64_t>();
            auto it = state->records.find(id);
            if (it == state->records.end()) throw StoreError("index row without record", id);
            const auto& rec = it->second;
            IndexEntry row{canonicalize(line.substr(0, sp1)),
                           parse_timestamp14(line.substr(sp1 + 1, sp2 - sp1 - 1)).value_or(Timestamp{}),
                           id, j.at("status").get<int>(), key_from_json(j.at("variant"))};
            IndexEntry expected{rec.uri, rec.datetime, rec.id, rec.response_status, rec.variant_key};
            if (!(row == expected) || j.at("offset").get<std::uint64_t>() != offsets[id]) {
                throw StoreError("index row disagrees with record", id);
            }
        } catch (const json::exception& e) {
            throw StoreError("malformed index line " + std::to_string(line_no) + ": " + e.what());
        } catch (const UriError& e) {
            throw StoreError("malformed index line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!indexed.insert(id).second) throw StoreError("duplicate index row", id);
    }
    if (indexed.size() != state->records.size()) throw StoreError("records missing from index");

    state->records_file = AppendFile(dir / kRecordsFile);
    state->index_file = AppendFile(dir / kIndexFile);
    return ArchiveStore(std::move(state));
}

std::uint64_t ArchiveStore::append(ArchiveRecord record) {
    std::unique_lock lock(state_->mu);
    record.id = state_->next_id;

    if (state_->dir) {
        std::uint64_t offset = state_->records_file.offset();
        std::string header;
        try {
            json j = {{"id", record.id},
                      {"uri", record.uri.to_string()},
                      {"datetime", format_timestamp14(record.datetime)},
                      {"request_headers", headers_to_json(record.request_headers)},
                      {"status", record.response_status},
                      {"response_headers", headers_to_json(record.response_headers)},
                      {"variant", key_to_json(record.variant_key)},
                      {"body_length", record.body.size()}};
            header = j.dump();
        } catch (const json::exception& e) {
            throw StoreError(std::string("cannot encode record: ") + e.what(), record.id);
        }
        std::string frame = header + "\n" + record.body + "\n";
        if (!state_->records_file.write_all(frame)) {
            throw StoreError(std::string("write to records.dat failed: ") + std::strerror(errno), record.id);
        }
        IndexEntry entry{record.uri, record.datetime, record.id, record.response_status,
                         record.variant_key};
        if (!state_->index_file.write_all(format_index_line(entry, offset) + "\n")) {
            throw StoreError(std::string("write to index.cdxj failed: ") + std::strerror(errno), record.id);
        }
    }

    auto id = record.id;
    state_->insert(std::move(record));
    return id;
}

std::vector<IndexEntry> ArchiveStore::lookup(const CanonicalUri& uri) const {
    std::shared_lock lock(state_->mu);
    auto it = state_->index.find(uri);
    if (it == state_->index.end()) return {};
    return it->second;
}

std::optional<ArchiveRecord> ArchiveStore::get(std::uint64_t id) const {
    std::shared_lock lock(state_->mu);
    auto it = state_->records.find(id);
    if (it == state_->records.end()) return std::nullopt;
    return it->second;
}

std::vector<ArchiveRecord> ArchiveStore::records() const {
    std::shared_lock lock(state_->mu);
    std::vector<ArchiveRecord> out;
    out.reserve(state_->records.size());
    for (const auto& [id, rec] : state_->records) out.push_back(rec);
    return out;
}

std::vector<CanonicalUri> ArchiveStore::uris() const {
    std::shared_lock lock(state_->mu);
    std::vector<CanonicalUri> out;
    for (const auto& [uri, entries] : state_->index) out.push_back(uri);
    return out;
}

std::size_t ArchiveStore::size() const {
    std::shared_lock lock(state_->mu);
    return state_->records.size();
}

const VariantConfig& ArchiveStore::config() const noexcept { return state_->cfg; }

const std::optional<fs::path>& ArchiveStore::directory() const noexcept { return state_->dir; }

std::vector<std::string> ArchiveStore::verify() const {
    std::shared_lock lock(state_->mu);
    std::vector<std::string> problems;
    std::size_t indexed = 0;
    for (const auto& [uri, entries] : state_->index) {
        for (const auto& entry : entries) {
            ++indexed;
            auto it = state_->records.find(entry.id);
            if (it == state_->records.end()) {
                problems.push_back("index row " + std::to_string(entry.id) + " has no record");
                continue;
            }
            const auto& rec = it->second;
            auto rederived = derive_variant_key(rec.request_headers, rec.response_headers, state_->cfg);
            if (!(rederived == entry.variant_key)) {
                problems.push_back("record " + std::to_string(entry.id) + " variant key " +
                                   entry.variant_key.to_string() + " != re-derived " +
                                   rederived.to_string());
            }
        }
    }
    if (indexed != state_->records.size()) problems.push_back("index and record counts differ");
    return problems;
}

}  // namespace cookiearc
