#include "cookiearc/cookie_jar.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace cookiearc {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    while (true) {
        auto tab = line.find('\t');
        fields.push_back(line.substr(0, tab));
        if (tab == std::string_view::npos) break;
        line.remove_prefix(tab + 1);
    }
    return fields;
}

std::optional<bool> parse_flag(std::string_view text) {
    if (text == "TRUE") return true;
    if (text == "FALSE") return false;
    return std::nullopt;
}

}  // namespace

CookieJar::CookieJar(JarPolicy policy) : policy_(policy) {}

std::vector<CookieJar::Entry>::iterator CookieJar::locate(const Cookie& cookie) {
    return std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) {
        return e.cookie.name == cookie.name && e.cookie.domain == cookie.domain &&
               e.cookie.path == cookie.path;
    });
}

void CookieJar::store(Cookie cookie, Timestamp now) {
    if (policy_.max_ttl) {
        auto cap = now + std::max(*policy_.max_ttl, Seconds{0});
        cookie.expires_at = cookie.expires_at ? std::min(*cookie.expires_at, cap) : cap;
    }

    auto it = locate(cookie);
    if (cookie.expires_at && *cookie.expires_at <= now) {
        if (it != entries_.end()) entries_.erase(it);
        return;
    }
    if (it != entries_.end()) {
        cookie.created_at = it->cookie.created_at;
        it->cookie = std::move(cookie);
        return;
    }
    entries_.push_back({std::move(cookie), next_sequence_++});
}

std::vector<CookiePair> CookieJar::cookies_for(const CanonicalUri& uri, Timestamp now) const {
    std::vector<const Entry*> matches;
    for (const auto& e : entries_) {
        const auto& c = e.cookie;
        if (c.expires_at && *c.expires_at <= now) continue;
        if (c.secure && uri.scheme != "https") continue;
        bool domain_ok = c.host_only ? uri.host == c.domain : domain_matches(uri.host, c.domain);
        if (!domain_ok || !path_matches(uri.path, c.path)) continue;
        matches.push_back(&e);
    }
    std::sort(matches.begin(), matches.end(), [](const Entry* a, const Entry* b) {
        if (a->cookie.path.size() != b->cookie.path.size()) {
            return a->cookie.path.size() > b->cookie.path.size();
        }
        if (a->cookie.created_at != b->cookie.created_at) {
            return a->cookie.created_at < b->cookie.created_at;
        }
        return a->sequence < b->sequence;
    });

    std::vector<CookiePair> out;
    std::set<std::string_view> names;
    for (const auto* e : matches) {
        if (names.insert(e->cookie.name).second) out.emplace_back(e->cookie.name, e->cookie.value);
    }
    return out;
}

std::string CookieJar::cookie_header_for(const CanonicalUri& uri, Timestamp now) const {
    return serialize_cookie_header(cookies_for(uri, now));
}

void CookieJar::prune(Timestamp now) {
    std::erase_if(entries_, [&](const Entry& e) {
        return e.cookie.expires_at && *e.cookie.expires_at <= now;
    });
    last_prune_ = last_prune_ ? std::max(*last_prune_, now) : now;
}

void CookieJar::end_session() {
    if (policy_.session_scoped) {
        entries_.clear();
        return;
    }
    std::erase_if(entries_, [](const Entry& e) { return !e.cookie.expires_at; });
}

std::vector<Cookie> CookieJar::entries() const {
    std::vector<Cookie> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.cookie);
    return out;
}

const Cookie* CookieJar::find(std::string_view name, std::string_view domain,
                              std::string_view path) const {
    for (const auto& e : entries_) {
        if (e.cookie.name == name && e.cookie.domain == domain && e.cookie.path == path) {
            return &e.cookie;
        }
    }
    return nullptr;
}

std::string CookieJar::export_netscape() const {
    std::string out(kNetscapeHeader);
    for (const auto& e : entries_) {
        const auto& c = e.cookie;
        if (c.http_only) out += "#HttpOnly_";
        out += c.host_only ? c.domain : "." + c.domain;
        out += c.host_only ? "\tFALSE\t" : "\tTRUE\t";
        out += c.path;
        out += c.secure ? "\tTRUE\t" : "\tFALSE\t";
        out += c.expires_at ? std::to_string(c.expires_at->time_since_epoch().count()) : "0";
        out += "\t" + c.name + "\t" + c.value + "\n";
    }
    return out;
}

NetscapeImport CookieJar::import_netscape(std::string_view text, JarPolicy policy) {
    NetscapeImport result{CookieJar(policy), {}};
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.ends_with('\r')) line.remove_suffix(1);

        bool http_only = false;
        if (line.starts_with("#HttpOnly_")) {
            http_only = true;
            line.remove_prefix(10);
        } else if (line.starts_with('#') || trim(line).empty()) {
            continue;
        }

        auto fields = split_tabs(line);
        auto fail = [&](std::string message) {
            result.errors.push_back({line_no, std::move(message)});
        };
        if (fields.size() != 7) {
            fail("expected 7 tab-separated fields, got " + std::to_string(fields.size()));
            continue;
        }
        auto subdomains = parse_flag(fields[1]);
        auto secure = parse_flag(fields[3]);
        if (!subdomains || !secure) {
            fail("flag fields must be TRUE or FALSE");
            continue;
        }
        std::int64_t expiry = 0;
        auto [ptr, ec] =
            std::from_chars(fields[4].data(), fields[4].data() + fields[4].size(), expiry);
        if (ec != std::errc() || ptr != fields[4].data() + fields[4].size() || expiry < 0) {
            fail("expiry is not a non-negative integer");
            continue;
        }
        auto domain = fields[0];
        if (domain.starts_with('.')) domain.remove_prefix(1);
        if (domain.empty() || fields[5].empty() || !fields[2].starts_with('/')) {
            fail("empty domain or name, or path not starting with '/'");
            continue;
        }

        Cookie c;
        c.domain = to_lower(domain);
        c.host_only = !*subdomains;
        c.path = std::string(fields[2]);
        c.secure = *secure;
        c.http_only = http_only;
        c.name = std::string(fields[5]);
        c.value = std::string(fields[6]);
        // Creation time is not part of the format.
        c.created_at = Timestamp{};
        if (expiry != 0) c.expires_at = Timestamp{Seconds{expiry}};

        auto& jar = result.jar;
        auto it = jar.locate(c);
        if (it != jar.entries_.end()) {
            it->cookie = std::move(c);
        } else {
            jar.entries_.push_back({std::move(c), jar.next_sequence_++});
        }
    }
    return result;
}

}  // namespace cookiearc
