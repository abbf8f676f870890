#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cookiearc/http_core.hpp"

namespace cookiearc {

/// Crawl-time cookie policy. `max_ttl` caps every stored cookie's lifetime
/// regardless of what the server asked for; nullopt means no cap.
struct JarPolicy {
    std::optional<Seconds> max_ttl;
    bool session_scoped = false;

    static JarPolicy faithful() { return {}; }
    static JarPolicy capped(Seconds ttl) { return {ttl, false}; }
};

struct NetscapeImportError {
    std::size_t line = 0;
    std::string message;
};

struct NetscapeImport;

/// Cookie storage keyed by (name, domain, path).
///
/// Single owner; not synchronized.
class CookieJar {
public:
    explicit CookieJar(JarPolicy policy = {});

    /// Overwrites any entry with the same key, keeping the original
    /// creation time. A cookie whose effective expiry is not after `now`
    /// deletes the key instead.
    void store(Cookie cookie, Timestamp now);

    /// Cookies in scope for `uri` (Secure ones only over https), longest path
    /// first, then oldest first.
    /// At most one value per cookie name.
    [[nodiscard]] std::vector<CookiePair> cookies_for(const CanonicalUri& uri, Timestamp now) const;

    /// Convenience: serialized Cookie header, empty when nothing applies.
    [[nodiscard]] std::string cookie_header_for(const CanonicalUri& uri, Timestamp now) const;

    void prune(Timestamp now);

    /// Drops non-persistent cookies, or everything when the policy is
    /// session scoped.
    void end_session();

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
    [[nodiscard]] const JarPolicy& policy() const noexcept { return policy_; }
    [[nodiscard]] std::optional<Timestamp> last_prune() const noexcept { return last_prune_; }

    /// Entries in creation order.
    [[nodiscard]] std::vector<Cookie> entries() const;
    [[nodiscard]] const Cookie* find(std::string_view name, std::string_view domain,
                                     std::string_view path) const;

    /// Netscape/curl cookie file. Fields are tab separated: domain,
    /// include-subdomains, path, secure, expiry epoch seconds (0 for session
    /// cookies), name, value. Domain cookies are written with a leading dot
    /// and HttpOnly cookies with the curl "#HttpOnly_" prefix.
    [[nodiscard]] std::string export_netscape() const;
    static NetscapeImport import_netscape(std::string_view text, JarPolicy policy = {});

private:
    struct Entry {
        Cookie cookie;
        std::uint64_t sequence = 0;
    };

    std::vector<Entry>::iterator locate(const Cookie& cookie);

    JarPolicy policy_;
    std::vector<Entry> entries_;
    std::uint64_t next_sequence_ = 0;
    std::optional<Timestamp> last_prune_;
};

struct NetscapeImport {
    CookieJar jar;
    std::vector<NetscapeImportError> errors;
};

inline constexpr std::string_view kNetscapeHeader = "# Netscape HTTP Cookie File\n";

}  // namespace cookiearc
