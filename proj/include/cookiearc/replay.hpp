#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cookiearc/archive_store.hpp"
#include "cookiearc/http_core.hpp"

namespace cookiearc {

enum class ReplayKind { kBaseline, kVariantAware };
enum class Fallback { kNearestAny, kNotFound };

/// Baseline selects on (URI, datetime) alone; variant-aware first restricts
/// to captures whose variant key matches the request. `fallback` only
/// matters in variant-aware mode.
struct ReplayMode {
    ReplayKind kind = ReplayKind::kBaseline;
    Fallback fallback = Fallback::kNearestAny;

    static ReplayMode baseline() { return {ReplayKind::kBaseline, Fallback::kNearestAny}; }
    static ReplayMode variant_aware(Fallback f = Fallback::kNearestAny) {
        return {ReplayKind::kVariantAware, f};
    }
};

std::optional<ReplayMode> parse_replay_mode(std::string_view kind, std::string_view fallback);

struct RequestContext {
    Headers headers;

    static RequestContext with_cookie(std::string_view cookie_header);
};

struct Selection {
    ArchiveRecord record;
    /// Variant-aware mode found no matching variant and fell back to the
    /// nearest capture of any variant.
    bool fallback_used = false;
};

/// True when a capture with `key` would be served to `ctx` by a cache that
/// keys on the capture's own dimensions.
bool variant_matches(const VariantKey& key, const RequestContext& ctx, const VariantConfig& cfg);

/// Nearest capture by |datetime - target| over sorted index entries; ties
/// go to the earlier datetime, then the smaller id. Entries must be sorted
/// by (datetime, id).
std::optional<IndexEntry> nearest_entry(const std::vector<IndexEntry>& sorted, Timestamp target);

std::optional<Selection> select_memento(const ArchiveStore& store, const CanonicalUri& uri,
                                        Timestamp target, ReplayMode mode,
                                        const RequestContext& ctx, const VariantConfig& cfg);

struct CompositePart {
    CanonicalUri uri;
    std::optional<Selection> selection;  // nullopt = missing from the archive
};

struct CompositeMemento {
    Selection root;
    std::vector<CompositePart> parts;
    Timestamp target_datetime{};
};

/// Root via select_memento; each embedded resource of the root body is
/// selected on its own with the root's capture datetime as target. In
/// baseline mode parts are selected with an empty context. Never reaches
/// outside the store.
std::optional<CompositeMemento> reconstruct_composite(const ArchiveStore& store,
                                                      const CanonicalUri& uri, Timestamp target,
                                                      ReplayMode mode, const RequestContext& ctx,
                                                      const VariantConfig& cfg);

/// HTTP front end: GET /web/<14-digit-timestamp>/<absolute-URI>.
class ReplayService {
public:
    /// `extra_cookies` (e.g. from --request-cookies / --lang) are merged
    /// into every request's Cookie header, scoped per requested URI.
    ReplayService(const ArchiveStore& store, ReplayMode mode, VariantConfig cfg,
                  std::vector<Cookie> extra_cookies = {});

    /// `target` is the raw request target (path plus query).
    [[nodiscard]] HttpResponse handle(std::string_view target, const Headers& request_headers) const;

    /// Blocks until stop(). Returns false if the port could not be bound.
    bool serve(const std::string& address, int port);
    /// Binds (0 = ephemeral) and returns the port, or -1.
    int bind(const std::string& address, int port);
    bool listen_after_bind();
    void stop();

    ~ReplayService();
    ReplayService(const ReplayService&) = delete;
    ReplayService& operator=(const ReplayService&) = delete;

private:
    struct Server;
    void ensure_server();

    const ArchiveStore& store_;
    ReplayMode mode_;
    VariantConfig cfg_;
    std::vector<Cookie> extra_cookies_;
    std::unique_ptr<Server> server_;
};

inline constexpr std::string_view kFallbackWarning =
    "299 cookiearc \"requested variant not archived; nearest capture of another variant served\"";

}  // namespace cookiearc
