#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cookiearc/http_core.hpp"

namespace cookiearc {

/// Secondary cache key of a capture: (dimension, normalized value) pairs
/// sorted by dimension. Empty means the capture does not vary.
struct VariantKey {
    std::vector<std::pair<std::string, std::string>> pairs;

    [[nodiscard]] bool empty() const noexcept { return pairs.empty(); }
    [[nodiscard]] std::vector<std::string> dimensions() const;
    /// Compact display form: "cookie=lang=kn" pairs joined by "&", or "-".
    [[nodiscard]] std::string to_string() const;

    friend auto operator<=>(const VariantKey&, const VariantKey&) = default;
};

/// Dimension name used for the whole-request fingerprint under "Vary: *".
inline constexpr std::string_view kVaryAllDimension = "*";

struct VariantConfig {
    std::vector<std::string> content_cookie_names{"lang"};
    bool honor_vary = true;
    /// Applied when the response carries no Vary header.
    std::vector<std::string> implied_vary;

    /// Names lowercased, duplicates removed, implied_vary lowercased.
    [[nodiscard]] VariantConfig normalized() const;

    friend bool operator==(const VariantConfig&, const VariantConfig&) = default;
};

nlohmann::json variant_config_to_json(const VariantConfig& cfg);
VariantConfig variant_config_from_json(const nlohmann::json& j);

/// Key of a capture made with `request_headers` that produced
/// `response_headers`.
VariantKey derive_variant_key(const Headers& request_headers, const Headers& response_headers,
                              const VariantConfig& cfg);

/// Key a replay request would have along `dimensions`. Used to test a
/// stored capture against a replay context.
VariantKey variant_key_for_dimensions(const Headers& request_headers,
                                      const std::vector<std::string>& dimensions,
                                      const VariantConfig& cfg);

struct ArchiveRecord {
    std::uint64_t id = 0;
    CanonicalUri uri;
    Timestamp datetime{};
    Headers request_headers;
    int response_status = 0;
    Headers response_headers;
    std::string body;
    VariantKey variant_key;

    friend bool operator==(const ArchiveRecord&, const ArchiveRecord&) = default;
};

struct IndexEntry {
    CanonicalUri uri;
    Timestamp datetime{};
    std::uint64_t id = 0;
    int status = 0;
    VariantKey variant_key;

    friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

/// One CDXJ line: "<canonical-uri> <14-digit-timestamp> <json>".
std::string format_index_line(const IndexEntry& entry, std::uint64_t offset);

class StoreError : public std::runtime_error {
public:
    StoreError(const std::string& what, std::optional<std::uint64_t> record_id = std::nullopt);
    [[nodiscard]] std::optional<std::uint64_t> record_id() const noexcept { return record_id_; }

private:
    std::optional<std::uint64_t> record_id_;
};

/// Append-only capture store.
///
/// On disk an archive is a directory with three files:
///   records.dat  per record: one JSON header line (id, uri, datetime,
///                headers, status, variant, body_length) followed by
///                body_length raw bytes and a "\n".
///   index.cdxj   one line per record, appended in write order; sorted by
///                (uri, datetime, id) when loaded.
///   meta.json    {"format_version": 1, "variant_config": {...}}
///
/// A store with no directory lives only in memory. Appends take an
/// exclusive lock and reads a shared one, so concurrent readers always see
/// a complete snapshot.
class ArchiveStore {
public:
    static constexpr int kFormatVersion = 1;

    static ArchiveStore in_memory(VariantConfig cfg = {});
    /// Creates the directory if needed. Fails if it already holds an archive.
    static ArchiveStore create(const std::filesystem::path& dir, VariantConfig cfg = {});
    static ArchiveStore open(const std::filesystem::path& dir);

    ArchiveStore(ArchiveStore&&) noexcept;
    ArchiveStore& operator=(ArchiveStore&&) noexcept;
    ~ArchiveStore();

    /// Assigns the next id (ignoring record.id), writes the record and its
    /// index row, and returns the id.
    std::uint64_t append(ArchiveRecord record);

    /// Captures of `uri`, sorted by (datetime, id).
    [[nodiscard]] std::vector<IndexEntry> lookup(const CanonicalUri& uri) const;
    [[nodiscard]] std::optional<ArchiveRecord> get(std::uint64_t id) const;
    /// All records in id order.
    [[nodiscard]] std::vector<ArchiveRecord> records() const;
    [[nodiscard]] std::vector<CanonicalUri> uris() const;
    [[nodiscard]] std::size_t size() const;

    [[nodiscard]] const VariantConfig& config() const noexcept;
    [[nodiscard]] const std::optional<std::filesystem::path>& directory() const noexcept;

    /// Problems found when re-deriving every variant key with the stored
    /// config and comparing index rows to records. Empty when consistent.
    [[nodiscard]] std::vector<std::string> verify() const;

private:
    struct State;
    explicit ArchiveStore(std::unique_ptr<State> state);
    std::unique_ptr<State> state_;
};

}  // namespace cookiearc
