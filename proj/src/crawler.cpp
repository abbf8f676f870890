#include "cookiearc/crawler.hpp"

#include <cctype>
#include <stdexcept>

namespace cookiearc {

namespace {

constexpr std::string_view kUserAgent = "cookiearc-crawler/1.0";

struct Tag {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attrs;

    [[nodiscard]] std::optional<std::string> attr(std::string_view key) const {
        for (const auto& [k, v] : attrs) {
            if (k == key) return v;
        }
        return std::nullopt;
    }
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Parses the tag starting just after '<'; advances pos past '>'.
Tag read_tag(std::string_view body, std::size_t& pos) {
    Tag tag;
    auto n = body.size();
    auto start = pos;
    while (pos < n && !is_space(body[pos]) && body[pos] != '>' && body[pos] != '/') ++pos;
    tag.name = to_lower(body.substr(start, pos - start));
    while (pos < n && body[pos] != '>') {
        while (pos < n && (is_space(body[pos]) || body[pos] == '/')) ++pos;
        if (pos >= n || body[pos] == '>') break;
        auto key_start = pos;
        while (pos < n && !is_space(body[pos]) && body[pos] != '=' && body[pos] != '>') ++pos;
        auto key = to_lower(body.substr(key_start, pos - key_start));
        while (pos < n && is_space(body[pos])) ++pos;
        std::string value;
        if (pos < n && body[pos] == '=') {
            ++pos;
            while (pos < n && is_space(body[pos])) ++pos;
            if (pos < n && (body[pos] == '"' || body[pos] == '\'')) {
                char quote = body[pos++];
                auto close = body.find(quote, pos);
                if (close == std::string_view::npos) close = n;
                value = std::string(body.substr(pos, close - pos));
                pos = close < n ? close + 1 : n;
            } else {
                auto value_start = pos;
                while (pos < n && !is_space(body[pos]) && body[pos] != '>') ++pos;
                value = std::string(body.substr(value_start, pos - value_start));
            }
        }
        if (!key.empty()) tag.attrs.emplace_back(std::move(key), std::move(value));
    }
    if (pos < n) ++pos;
    return tag;
}

bool has_token(std::string_view list, std::string_view token) {
    auto lowered = to_lower(list);
    std::string_view rest = lowered;
    while (!rest.empty()) {
        while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
        auto end = rest.find_first_of(" \t\r\n");
        if (rest.substr(0, end) == token) return true;
        if (end == std::string_view::npos) break;
        rest.remove_prefix(end);
    }
    return false;
}

}  // namespace

void CrawlPolicy::validate() const {
    if (max_pages < 1) throw std::invalid_argument("max_pages must be >= 1");
    if (clock_step <= Seconds{0}) throw std::invalid_argument("clock_step must be > 0");
    if (jar_policy.max_ttl && *jar_policy.max_ttl < Seconds{0}) {
        throw std::invalid_argument("max_ttl must be >= 0");
    }
}

// ---------------------------------------------------------------------------

bool Frontier::push(const CanonicalUri& uri) {
    if (!seen_.insert(uri).second) return false;
    queue_.emplace_back(uri, false);
    return true;
}

void Frontier::push_exempt(const CanonicalUri& uri) {
    seen_.insert(uri);
    queue_.emplace_back(uri, true);
}

std::optional<CanonicalUri> Frontier::pop() {
    if (queue_.empty()) return std::nullopt;
    auto next = std::move(queue_.front());
    queue_.pop_front();
    log_.push_back(next);
    return std::move(next.first);
}

// ---------------------------------------------------------------------------

std::vector<ExtractedLink> scan_links(std::string_view body, const CanonicalUri& base) {
    std::vector<ExtractedLink> links;
    std::size_t pos = 0;
    while ((pos = body.find('<', pos)) != std::string_view::npos) {
        ++pos;
        if (body.substr(pos, 3) == "!--") {
            auto end = body.find("-->", pos);
            pos = end == std::string_view::npos ? body.size() : end + 3;
            continue;
        }
        auto tag = read_tag(body, pos);
        std::optional<std::string> ref;
        LinkKind kind{};
        if (tag.name == "link" && has_token(tag.attr("rel").value_or(""), "alternate")) {
            ref = tag.attr("href");
            kind = LinkKind::kAlternate;
        } else if (tag.name == "a") {
            ref = tag.attr("href");
            kind = LinkKind::kAnchor;
        } else if (tag.name == "iframe") {
            ref = tag.attr("src");
            kind = LinkKind::kEmbed;
        }
        if (!ref) continue;
        try {
            links.push_back({kind, resolve(base, *ref)});
        } catch (const UriError&) {
        }
    }
    return links;
}

std::vector<CanonicalUri> extract_links(std::string_view body, const CanonicalUri& base) {
    std::vector<CanonicalUri> out;
    for (auto& link : scan_links(body, base)) out.push_back(std::move(link.uri));
    return out;
}

std::vector<CanonicalUri> extract_embeds(std::string_view body, const CanonicalUri& base) {
    std::vector<CanonicalUri> out;
    for (auto& link : scan_links(body, base)) {
        if (link.kind == LinkKind::kEmbed) out.push_back(std::move(link.uri));
    }
    return out;
}

// ---------------------------------------------------------------------------

CrawlResult crawl_session(const std::vector<std::string>& seeds, const FetchFn& fetch,
                          const CrawlPolicy& policy, Timestamp start,
                          std::optional<CookieJar> initial_jar) {
    policy.validate();
    CrawlResult result{{}, CookieJar(policy.jar_policy), {}};
    if (seeds.empty()) return result;

    // Imported cookies go through store() so the session's TTL cap applies.
    if (initial_jar) {
        for (auto& c : initial_jar->entries()) result.jar.store(std::move(c), start);
    }

    std::vector<CanonicalUri> seed_uris;
    std::set<std::string> hosts;
    for (const auto& s : seeds) {
        seed_uris.push_back(canonicalize(s));
        hosts.insert(seed_uris.back().host);
    }

    Frontier frontier;
    for (const auto& s : seed_uris) frontier.push(s);

    std::size_t dequeues = 0;
    while (result.records.size() < policy.max_pages) {
        auto now = start + policy.clock_step * static_cast<long>(result.records.size());
        result.jar.prune(now);
        auto uri = frontier.pop();
        if (!uri) break;
        ++dequeues;
        if (policy.revisit_root_every > 0 && dequeues % policy.revisit_root_every == 0) {
            for (const auto& s : seed_uris) frontier.push_exempt(s);
        }

        HttpRequest request;
        request.uri = uri->to_string();
        request.headers.add("User-Agent", kUserAgent);
        if (auto cookie = result.jar.cookie_header_for(*uri, now); !cookie.empty()) {
            request.headers.add("Cookie", cookie);
        }

        HttpResponse response;
        bool fetched = true;
        try {
            response = fetch(request);
        } catch (const std::exception&) {
            fetched = false;
            response = HttpResponse{0, {}, {}};
        }

        if (fetched) {
            for (const auto& value : response.headers.get_all("set-cookie")) {
                if (auto c = parse_set_cookie(value, *uri, now)) result.jar.store(std::move(*c), now);
            }
        }

        ArchiveRecord record;
        record.id = result.records.size() + 1;
        record.uri = *uri;
        record.datetime = now;
        record.request_headers = request.headers;
        record.response_status = response.status;
        record.response_headers = response.headers;
        record.body = response.body;
        record.variant_key = derive_variant_key(request.headers, response.headers, policy.variant);
        result.records.push_back(std::move(record));

        if (fetched && response.status >= 200 && response.status < 300) {
            for (const auto& link : extract_links(response.body, *uri)) {
                if (hosts.contains(link.host)) frontier.push(link);
            }
        }
    }
    result.dequeue_log = frontier.dequeue_log();
    return result;
}

std::vector<ArchiveRecord> crawl(const std::vector<std::string>& seeds, const FetchFn& fetch,
                                 const CrawlPolicy& policy, Timestamp start) {
    return crawl_session(seeds, fetch, policy, start).records;
}

}  // namespace cookiearc
