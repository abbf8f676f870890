#include "cookiearc/origin_sim.hpp"

#include <algorithm>
#include <stdexcept>

#include <httplib.h>

namespace cookiearc {

namespace {

bool supported(const SiteConfig& site, const std::string& tag) {
    return tag == site.default_language ||
           std::find(site.languages.begin(), site.languages.end(), tag) != site.languages.end();
}

std::string fragment_name(std::size_t index) {
    if (index == 0) return "sidebar";
    if (index == 1) return "notifications";
    return "fragment-" + std::to_string(index + 1);
}

std::vector<std::string> timeline_paths(const SiteConfig& site) {
    std::vector<std::string> paths{"/"};
    for (std::size_t i = 1; i < site.page_count; ++i) paths.push_back("/page/" + std::to_string(i));
    return paths;
}

HttpResponse not_found() {
    HttpResponse r;
    r.status = 404;
    r.headers.add("Content-Type", "text/plain; charset=utf-8");
    r.body = "not found\n";
    return r;
}

std::string render_timeline(const PageModel& page, const SiteConfig& site,
                            const std::string& lang) {
    std::string html = "<!DOCTYPE html>\n<html lang=\"" + lang + "\">\n<head>\n";
    html += "<meta charset=\"utf-8\">\n<title>timeline " + page.uri_path + "</title>\n";
    auto alternates = alternate_links(page, site);
    html += "<link rel=\"alternate\" hreflang=\"x-default\" href=\"" + alternates.front() + "\">\n";
    for (std::size_t i = 0; i < site.languages.size(); ++i) {
        html += "<link rel=\"alternate\" hreflang=\"" + site.languages[i] + "\" href=\"" +
                alternates[i + 1] + "\">\n";
    }
    html += "</head>\n<body>\n";
    html += "<h1>[" + lang + "] timeline " + page.uri_path + "</h1>\n";
    for (const auto& frag : fragment_paths(site)) {
        html += "<iframe class=\"fragment\" src=\"" + site.origin() + frag + "\"></iframe>\n";
    }
    for (const auto& other : timeline_paths(site)) {
        if (other == page.uri_path) continue;
        html += "<a href=\"" + site.origin() + other + "\">[" + lang + "] " + other + "</a>\n";
    }
    html += "</body>\n</html>\n";
    return html;
}

std::string render_fragment(const PageModel& page, const std::string& lang) {
    auto name = page.uri_path.substr(page.uri_path.rfind('/') + 1);
    return "<!DOCTYPE html>\n<html lang=\"" + lang + "\">\n<body>\n<div class=\"fragment\" data-name=\"" +
           name + "\">[" + lang + "] " + name + "</div>\n</body>\n</html>\n";
}

}  // namespace

const std::vector<std::string>& default_languages() {
    static const std::vector<std::string> langs = {
        "fr", "en", "ar", "ja", "es", "de", "it", "id", "pt", "ko", "tr", "ru",
        "nl", "fil", "ms", "zh-tw", "zh-cn", "hi", "no", "sv", "fi", "da", "pl", "hu",
        "fa", "he", "ur", "th", "uk", "ca", "ga", "el", "eu", "cs", "gl", "ro",
        "hr", "en-gb", "vi", "bn", "bg", "sr", "sk", "gu", "mr", "ta", "kn"};
    return langs;
}

void SiteConfig::validate() const {
    if (host.empty()) throw std::invalid_argument("site host is empty");
    if (scheme != "http" && scheme != "https") throw std::invalid_argument("site scheme must be http(s)");
    if (languages.empty()) throw std::invalid_argument("site languages must be nonempty");
    if (default_language.empty()) throw std::invalid_argument("default_language is empty");
    if (page_count < 1) throw std::invalid_argument("page_count must be >= 1");
    auto sorted = languages;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("site languages must be distinct");
    }
}

SiteConfig site_config_from_json(const nlohmann::json& j) {
    SiteConfig site;
    site.scheme = j.value("scheme", site.scheme);
    site.host = to_lower(j.value("host", site.host));
    if (j.contains("languages")) {
        site.languages.clear();
        for (const auto& tag : j.at("languages")) site.languages.push_back(to_lower(tag.get<std::string>()));
    }
    site.default_language = to_lower(j.value("default_language", site.default_language));
    site.emit_vary = j.value("emit_vary", site.emit_vary);
    site.page_count = j.value("page_count", site.page_count);
    site.resources_per_page = j.value("resources_per_page", site.resources_per_page);
    site.validate();
    return site;
}

nlohmann::json site_config_to_json(const SiteConfig& site) {
    return {{"scheme", site.scheme},
            {"host", site.host},
            {"languages", site.languages},
            {"default_language", site.default_language},
            {"emit_vary", site.emit_vary},
            {"page_count", site.page_count},
            {"resources_per_page", site.resources_per_page}};
}

std::vector<std::string> fragment_paths(const SiteConfig& site) {
    std::vector<std::string> paths;
    for (std::size_t i = 0; i < site.resources_per_page; ++i) paths.push_back("/i/" + fragment_name(i));
    return paths;
}

std::vector<PageModel> page_models(const SiteConfig& site) {
    std::vector<PageModel> pages;
    auto timelines = timeline_paths(site);
    auto fragments = fragment_paths(site);
    for (const auto& path : timelines) {
        PageModel page{path, PageKind::kTimeline, {}};
        page.links_out = alternate_links(page, site);
        for (const auto& f : fragments) page.links_out.push_back(site.origin() + f);
        for (const auto& other : timelines) {
            if (other != path) page.links_out.push_back(site.origin() + other);
        }
        pages.push_back(std::move(page));
    }
    for (const auto& f : fragments) pages.push_back({f, PageKind::kFragment, {}});
    return pages;
}

std::vector<std::string> alternate_links(const PageModel& page, const SiteConfig& site) {
    std::vector<std::string> links;
    if (page.kind != PageKind::kTimeline) return links;
    auto base = site.origin() + page.uri_path;
    links.push_back(base);
    for (const auto& tag : site.languages) links.push_back(base + "?lang=" + tag);
    return links;
}

std::string negotiate_language(const HttpRequest& request, const SiteConfig& site) {
    auto uri = canonicalize(request.uri);
    if (auto q = uri.query_value("lang")) {
        auto tag = to_lower(*q);
        if (supported(site, tag)) return tag;
    }
    for (const auto& header : request.headers.get_all("cookie")) {
        for (const auto& [name, value] : parse_cookie_header(header)) {
            if (name != "lang") continue;
            auto tag = to_lower(value);
            if (supported(site, tag)) return tag;
        }
    }
    for (const auto& header : request.headers.get_all("accept-language")) {
        for (const auto& range : parse_accept_language(header)) {
            if (range.q > 0.0 && supported(site, range.tag)) return range.tag;
        }
    }
    return site.default_language;
}

HttpResponse handle(const HttpRequest& request, const SiteConfig& site) {
    CanonicalUri uri;
    try {
        uri = canonicalize(request.uri);
    } catch (const UriError&) {
        return not_found();
    }
    if (uri.host != site.host || uri.scheme != site.scheme) return not_found();

    auto pages = page_models(site);
    auto page = std::find_if(pages.begin(), pages.end(),
                             [&](const PageModel& p) { return p.uri_path == uri.path; });
    if (page == pages.end()) return not_found();

    auto lang = negotiate_language(request, site);

    HttpResponse r;
    r.headers.add("Content-Type", "text/html; charset=utf-8");
    r.headers.add("Content-Language", lang);
    if (site.emit_vary) r.headers.add("Vary", "Cookie, Accept-Language");
    if (auto q = uri.query_value("lang"); q && supported(site, to_lower(*q))) {
        r.headers.add("Set-Cookie", "lang=" + to_lower(*q) + "; Path=/");
    }
    r.body = page->kind == PageKind::kTimeline ? render_timeline(*page, site, lang)
                                               : render_fragment(*page, lang);
    return r;
}

// ---------------------------------------------------------------------------

struct OriginServer::Impl {
    SiteConfig site;
    httplib::Server server;
};

OriginServer::OriginServer(SiteConfig site) : impl_(std::make_unique<Impl>()) {
    impl_->site = std::move(site);
    impl_->server.Get(".*", [this](const httplib::Request& req, httplib::Response& res) {
        HttpRequest request;
        request.method = req.method;
        request.uri = impl_->site.origin() + req.target;
        for (const auto& [name, value] : req.headers) request.headers.add(name, value);
        auto response = handle(request, impl_->site);
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

OriginServer::~OriginServer() { stop(); }

int OriginServer::bind(const std::string& address, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(address);
    return impl_->server.bind_to_port(address, port) ? port : -1;
}

bool OriginServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void OriginServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace cookiearc
