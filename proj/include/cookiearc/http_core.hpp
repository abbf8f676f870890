#pragma once

// Minimal HTTP message model and the header/URI parsers shared by the
// crawler, the archive store and the replay engine.

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cookiearc {

using Timestamp = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

/// Ordered multimap of header fields. Names are lowercased on insertion;
/// duplicates are kept in arrival order and never joined.
class Headers {
public:
    using Field = std::pair<std::string, std::string>;

    Headers() = default;
    Headers(std::initializer_list<Field> fields);

    void add(std::string_view name, std::string_view value);
    /// Removes every field called `name`, then adds one.
    void set(std::string_view name, std::string_view value);
    void remove(std::string_view name);

    [[nodiscard]] std::optional<std::string> get(std::string_view name) const;
    [[nodiscard]] std::vector<std::string> get_all(std::string_view name) const;
    [[nodiscard]] bool contains(std::string_view name) const;

    [[nodiscard]] const std::vector<Field>& fields() const noexcept { return fields_; }
    [[nodiscard]] bool empty() const noexcept { return fields_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return fields_.size(); }

    friend bool operator==(const Headers&, const Headers&) = default;

private:
    std::vector<Field> fields_;
};

struct HttpRequest {
    std::string method = "GET";
    std::string uri;  // absolute
    Headers headers;
};

struct HttpResponse {
    int status = 200;
    Headers headers;
    std::string body;

    friend bool operator==(const HttpResponse&, const HttpResponse&) = default;
};

/// Thrown by canonicalize() and resolve(); `position` is the byte offset
/// into the input where parsing failed.
class UriError : public std::runtime_error {
public:
    UriError(std::size_t position, const std::string& what);
    [[nodiscard]] std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

struct QueryParam {
    std::string key;
    std::string value;
    friend auto operator<=>(const QueryParam&, const QueryParam&) = default;
};

/// Scheme and host lowercased, default port elided, dot segments removed,
/// fragment dropped, query pairs sorted by (key, value). A query item
/// without "=" is kept with an empty value and serializes as "key=".
struct CanonicalUri {
    std::string scheme;
    std::string host;
    std::optional<std::uint16_t> port;
    std::string path = "/";
    std::vector<QueryParam> query;

    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] std::optional<std::string> query_value(std::string_view key) const;
    /// The same resource with an empty query.
    [[nodiscard]] CanonicalUri without_query() const;

    friend auto operator<=>(const CanonicalUri&, const CanonicalUri&) = default;
};

CanonicalUri canonicalize(std::string_view uri);

/// RFC 3986 reference resolution against an already canonical base.
CanonicalUri resolve(const CanonicalUri& base, std::string_view reference);

struct Cookie {
    std::string name;
    std::string value;
    std::string domain;
    bool host_only = true;
    std::string path = "/";
    std::optional<Timestamp> expires_at;
    Timestamp created_at{};
    // Retained, never enforced.
    bool secure = false;
    bool http_only = false;
    std::string same_site;

    friend bool operator==(const Cookie&, const Cookie&) = default;
};

/// Returns nullopt when the cookie must be ignored: empty name, no "=" in
/// the name/value pair, control characters, or a Domain attribute that
/// does not domain-match the request host.
std::optional<Cookie> parse_set_cookie(std::string_view header_value,
                                       const CanonicalUri& request_uri, Timestamp now);

/// Accepts only the RFC 1123 shape "Sun, 06 Nov 1994 08:49:37 GMT".
std::optional<Timestamp> parse_cookie_date(std::string_view text);
std::string format_http_date(Timestamp t);

/// 14-digit YYYYMMDDhhmmss, UTC.
std::string format_timestamp14(Timestamp t);
std::optional<Timestamp> parse_timestamp14(std::string_view text);

bool domain_matches(std::string_view host, std::string_view domain);
bool path_matches(std::string_view request_path, std::string_view cookie_path);
std::string default_cookie_path(std::string_view request_path);

using CookiePair = std::pair<std::string, std::string>;

/// Splits a Cookie request header ("a=1; b=2") into pairs in order.
std::vector<CookiePair> parse_cookie_header(std::string_view header_value);
std::string serialize_cookie_header(const std::vector<CookiePair>& pairs);

struct VarySpec {
    enum class Kind { kEmpty, kList, kAll };
    Kind kind = Kind::kEmpty;
    std::vector<std::string> fields;

    friend bool operator==(const VarySpec&, const VarySpec&) = default;
};

VarySpec parse_vary(const Headers& response_headers);
inline VarySpec parse_vary(const HttpResponse& response) { return parse_vary(response.headers); }

struct LanguageRange {
    std::string tag;
    double q = 1.0;
    friend bool operator==(const LanguageRange&, const LanguageRange&) = default;
};

/// Ordered by q descending, ties in arrival order. Entries with a
/// malformed or out-of-range q are dropped.
std::vector<LanguageRange> parse_accept_language(std::string_view header_value);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
/// "en-US" -> "en".
std::string primary_subtag(std::string_view tag);

}  // namespace cookiearc
