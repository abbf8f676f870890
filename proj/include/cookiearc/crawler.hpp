#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cookiearc/archive_store.hpp"
#include "cookiearc/cookie_jar.hpp"
#include "cookiearc/http_core.hpp"

namespace cookiearc {

struct CrawlPolicy {
    JarPolicy jar_policy;
    std::size_t max_pages = 100;
    /// Re-enqueue the seeds after every k dequeues; 0 disables revisits.
    std::size_t revisit_root_every = 0;
    Seconds clock_step{1};
    VariantConfig variant{{"lang"}, true, {"cookie"}};

    void validate() const;
};

/// FIFO of canonical URIs with a seen-set. Only push_exempt() may enqueue a
/// URI that was already seen.
class Frontier {
public:
    /// False when the URI was already seen.
    bool push(const CanonicalUri& uri);
    void push_exempt(const CanonicalUri& uri);
    std::optional<CanonicalUri> pop();

    [[nodiscard]] bool empty() const noexcept { return queue_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return queue_.size(); }
    [[nodiscard]] bool seen(const CanonicalUri& uri) const { return seen_.contains(uri); }
    /// Every dequeued URI, in order, with whether it was an exempt revisit.
    [[nodiscard]] const std::vector<std::pair<CanonicalUri, bool>>& dequeue_log() const noexcept {
        return log_;
    }

private:
    std::deque<std::pair<CanonicalUri, bool>> queue_;
    std::set<CanonicalUri> seen_;
    std::vector<std::pair<CanonicalUri, bool>> log_;
};

enum class LinkKind { kAlternate, kAnchor, kEmbed };

struct ExtractedLink {
    LinkKind kind;
    CanonicalUri uri;
};

/// Tolerant scanner for the simple HTML the origin serves: hrefs of
/// <link rel="alternate"> and <a>, and src of <iframe>, in document order.
/// Attribute values may be double-quoted, single-quoted or bare.
/// Unresolvable references are skipped.
std::vector<ExtractedLink> scan_links(std::string_view body, const CanonicalUri& base);
std::vector<CanonicalUri> extract_links(std::string_view body, const CanonicalUri& base);
/// Embedded resources only (the parts of a composite page).
std::vector<CanonicalUri> extract_embeds(std::string_view body, const CanonicalUri& base);

/// Throws to signal a transport failure.
using FetchFn = std::function<HttpResponse(const HttpRequest&)>;

struct CrawlResult {
    std::vector<ArchiveRecord> records;
    CookieJar jar;
    std::vector<std::pair<CanonicalUri, bool>> dequeue_log;
};

/// One sequential crawl session. Fetch i is stamped start + i * clock_step.
/// Links are followed only on the seeds' hosts.
CrawlResult crawl_session(const std::vector<std::string>& seeds, const FetchFn& fetch,
                          const CrawlPolicy& policy, Timestamp start,
                          std::optional<CookieJar> initial_jar = std::nullopt);

std::vector<ArchiveRecord> crawl(const std::vector<std::string>& seeds, const FetchFn& fetch,
                                 const CrawlPolicy& policy, Timestamp start);

}  // namespace cookiearc
