#pragma once

// Deterministic multi-language origin modelled on a site that negotiates
// language through a `lang` query parameter, a sticky `lang` cookie and
// Accept-Language, without declaring any of it in Vary.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cookiearc/http_core.hpp"

namespace cookiearc {

/// 47 distinct tags; fr first, kn last.
const std::vector<std::string>& default_languages();

struct SiteConfig {
    std::string scheme = "https";
    std::string host = "twitter.com";
    std::vector<std::string> languages = default_languages();
    std::string default_language = "en";
    bool emit_vary = false;
    std::size_t page_count = 3;          // timeline pages, including "/"
    std::size_t resources_per_page = 2;  // embedded fragments

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;
    [[nodiscard]] std::string origin() const { return scheme + "://" + host; }
};

SiteConfig site_config_from_json(const nlohmann::json& j);
nlohmann::json site_config_to_json(const SiteConfig& site);

enum class PageKind { kTimeline, kFragment };

struct PageModel {
    std::string uri_path;
    PageKind kind = PageKind::kTimeline;
    std::vector<std::string> links_out;
};

/// "/" and "/page/<n>" timelines; fragments are shared by every timeline
/// and live under "/i/". Fragment names: sidebar, notifications, then
/// fragment-<n>.
std::vector<PageModel> page_models(const SiteConfig& site);
std::vector<std::string> fragment_paths(const SiteConfig& site);

/// Precedence: `lang` query parameter, then `lang` cookie, then the
/// highest-q supported Accept-Language tag, then the site default. Any
/// unsupported tag falls through to the next source.
std::string negotiate_language(const HttpRequest& request, const SiteConfig& site);

/// x-default first, then one "?lang=<tag>" link per configured language.
std::vector<std::string> alternate_links(const PageModel& page, const SiteConfig& site);

/// Pure function of (request, site); the only state is what the client
/// sends back in its Cookie header.
HttpResponse handle(const HttpRequest& request, const SiteConfig& site);

/// Blocking HTTP listener backed by handle(). Returns when stopped or when
/// the port cannot be bound (false).
class OriginServer {
public:
    explicit OriginServer(SiteConfig site);
    ~OriginServer();
    OriginServer(const OriginServer&) = delete;
    OriginServer& operator=(const OriginServer&) = delete;

    /// Binds to an ephemeral port when `port` is 0; returns the bound port
    /// or -1.
    int bind(const std::string& address, int port);
    bool listen_after_bind();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace cookiearc
