#include "cookiearc/replay.hpp"

#include "cookiearc/crawler.hpp"

#include <algorithm>

#include <httplib.h>

namespace cookiearc {

std::optional<ReplayMode> parse_replay_mode(std::string_view kind, std::string_view fallback) {
    ReplayMode mode;
    if (kind == "baseline") {
        mode.kind = ReplayKind::kBaseline;
    } else if (kind == "variant" || kind == "variant_aware" || kind == "variant-aware") {
        mode.kind = ReplayKind::kVariantAware;
    } else {
        return std::nullopt;
    }
    if (fallback == "nearest_any" || fallback == "nearest-any") {
        mode.fallback = Fallback::kNearestAny;
    } else if (fallback == "not_found" || fallback == "not-found") {
        mode.fallback = Fallback::kNotFound;
    } else {
        return std::nullopt;
    }
    return mode;
}

RequestContext RequestContext::with_cookie(std::string_view cookie_header) {
    RequestContext ctx;
    if (!cookie_header.empty()) ctx.headers.add("Cookie", cookie_header);
    return ctx;
}

bool variant_matches(const VariantKey& key, const RequestContext& ctx, const VariantConfig& cfg) {
    if (key.empty()) return true;
    return variant_key_for_dimensions(ctx.headers, key.dimensions(), cfg) == key;
}

std::optional<IndexEntry> nearest_entry(const std::vector<IndexEntry>& sorted, Timestamp target) {
    if (sorted.empty()) return std::nullopt;
    // First entry at or after target; the group before it is the latest
    // strictly-earlier datetime, whose smallest id sits at the group start.
    auto after = std::lower_bound(sorted.begin(), sorted.end(), target,
                                  [](const IndexEntry& e, Timestamp t) { return e.datetime < t; });
    if (after == sorted.begin()) return *after;
    auto before = std::prev(after);
    while (before != sorted.begin() && std::prev(before)->datetime == before->datetime) --before;
    if (after == sorted.end()) return *before;
    return (target - before->datetime) <= (after->datetime - target) ? *before : *after;
}

std::optional<Selection> select_memento(const ArchiveStore& store, const CanonicalUri& uri,
                                        Timestamp target, ReplayMode mode,
                                        const RequestContext& ctx, const VariantConfig& cfg) {
    auto entries = store.lookup(uri);
    auto fetch = [&](const IndexEntry& e, bool fallback) -> std::optional<Selection> {
        auto rec = store.get(e.id);
        if (!rec) return std::nullopt;
        return Selection{std::move(*rec), fallback};
    };

    if (mode.kind == ReplayKind::kBaseline) {
        auto best = nearest_entry(entries, target);
        return best ? fetch(*best, false) : std::nullopt;
    }

    std::vector<IndexEntry> matching;
    std::copy_if(entries.begin(), entries.end(), std::back_inserter(matching),
                 [&](const IndexEntry& e) { return variant_matches(e.variant_key, ctx, cfg); });
    if (auto best = nearest_entry(matching, target)) return fetch(*best, false);
    if (mode.fallback == Fallback::kNotFound) return std::nullopt;
    auto any = nearest_entry(entries, target);
    return any ? fetch(*any, true) : std::nullopt;
}

std::optional<CompositeMemento> reconstruct_composite(const ArchiveStore& store,
                                                      const CanonicalUri& uri, Timestamp target,
                                                      ReplayMode mode, const RequestContext& ctx,
                                                      const VariantConfig& cfg) {
    auto root = select_memento(store, uri, target, mode, ctx, cfg);
    if (!root) return std::nullopt;

    CompositeMemento composite{*root, {}, target};
    const RequestContext empty;
    const auto& part_ctx = mode.kind == ReplayKind::kBaseline ? empty : ctx;
    // Deduplicated, body order.
    std::vector<CanonicalUri> seen;
    for (auto& part_uri : extract_embeds(root->record.body, root->record.uri)) {
        if (std::find(seen.begin(), seen.end(), part_uri) != seen.end()) continue;
        seen.push_back(part_uri);
        auto sel = select_memento(store, part_uri, root->record.datetime, mode, part_ctx, cfg);
        composite.parts.push_back({std::move(part_uri), std::move(sel)});
    }
    return composite;
}

// ---------------------------------------------------------------------------

struct ReplayService::Server {
    httplib::Server http;
};

ReplayService::ReplayService(const ArchiveStore& store, ReplayMode mode, VariantConfig cfg,
                             std::vector<Cookie> extra_cookies)
    : store_(store), mode_(mode), cfg_(cfg.normalized()), extra_cookies_(std::move(extra_cookies)) {}

ReplayService::~ReplayService() { stop(); }

HttpResponse ReplayService::handle(std::string_view target, const Headers& request_headers) const {
    auto error = [](int status, std::string message) {
        HttpResponse r;
        r.status = status;
        r.headers.add("Content-Type", "text/plain; charset=utf-8");
        r.body = std::move(message) + "\n";
        return r;
    };

    constexpr std::string_view kPrefix = "/web/";
    if (!target.starts_with(kPrefix)) return error(404, "not found");
    target.remove_prefix(kPrefix.size());
    auto slash = target.find('/');
    if (slash == std::string_view::npos) return error(400, "expected /web/<timestamp>/<uri>");
    auto when = parse_timestamp14(target.substr(0, slash));
    if (!when) return error(400, "malformed timestamp; expected 14 digits YYYYMMDDhhmmss");

    CanonicalUri uri;
    try {
        uri = canonicalize(target.substr(slash + 1));
    } catch (const UriError& e) {
        return error(400, e.what());
    }

    RequestContext ctx;
    std::vector<CookiePair> cookies;
    for (const auto& [name, value] : request_headers.fields()) {
        if (name == "cookie") {
            auto pairs = parse_cookie_header(value);
            cookies.insert(cookies.end(), pairs.begin(), pairs.end());
        } else {
            ctx.headers.add(name, value);
        }
    }
    for (const auto& c : extra_cookies_) {
        bool domain_ok = c.host_only ? uri.host == c.domain : domain_matches(uri.host, c.domain);
        if (domain_ok && path_matches(uri.path, c.path)) cookies.emplace_back(c.name, c.value);
    }
    if (!cookies.empty()) ctx.headers.add("Cookie", serialize_cookie_header(cookies));

    auto selection = select_memento(store_, uri, *when, mode_, ctx, cfg_);
    if (!selection) return error(404, "not archived: " + uri.to_string());

    const auto& rec = selection->record;
    HttpResponse r;
    r.status = rec.response_status >= 100 && rec.response_status <= 599 ? rec.response_status : 502;
    r.headers.add("Content-Type", rec.response_headers.get("content-type").value_or("application/octet-stream"));
    if (auto lang = rec.response_headers.get("content-language")) r.headers.add("Content-Language", *lang);
    r.headers.add("Memento-Datetime", format_http_date(rec.datetime));
    r.headers.add("X-Archive-Variant", rec.variant_key.to_string());
    if (selection->fallback_used) r.headers.add("Warning", kFallbackWarning);
    r.body = rec.body;
    return r;
}

void ReplayService::ensure_server() {
    if (server_) return;
    server_ = std::make_unique<Server>();
    server_->http.Get(".*", [this](const httplib::Request& req, httplib::Response& res) {
        Headers headers;
        for (const auto& [name, value] : req.headers) headers.add(name, value);
        auto response = handle(req.target, headers);
        res.status = response.status;
        std::string content_type = "text/plain";
        for (const auto& [name, value] : response.headers.fields()) {
            if (name == "content-type") {
                content_type = value;
            } else {
                res.headers.emplace(name, value);
            }
        }
        res.set_content(response.body, content_type);
    });
}

int ReplayService::bind(const std::string& address, int port) {
    ensure_server();
    if (port == 0) return server_->http.bind_to_any_port(address);
    return server_->http.bind_to_port(address, port) ? port : -1;
}

bool ReplayService::listen_after_bind() {
    ensure_server();
    return server_->http.listen_after_bind();
}

bool ReplayService::serve(const std::string& address, int port) {
    if (bind(address, port) < 0) return false;
    return listen_after_bind();
}

void ReplayService::stop() {
    if (server_) server_->http.stop();
}

}  // namespace cookiearc
