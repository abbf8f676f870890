#include "cookiearc/http_core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <limits>

namespace cookiearc {

namespace {

bool is_ctl(char c) {
    auto u = static_cast<unsigned char>(c);
    return u < 0x20 || u == 0x7f;
}

bool is_scheme_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
}

bool is_host_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_' ||
           c == '%' || c == '~';
}

std::optional<std::uint16_t> default_port(std::string_view scheme) {
    if (scheme == "http") return 80;
    if (scheme == "https") return 443;
    return std::nullopt;
}

// RFC 3986 section 5.2.4.
std::string remove_dot_segments(std::string_view input) {
    std::string in(input);
    std::string out;
    while (!in.empty()) {
        if (in.starts_with("../")) {
            in.erase(0, 3);
        } else if (in.starts_with("./")) {
            in.erase(0, 2);
        } else if (in.starts_with("/./")) {
            in.erase(0, 2);
        } else if (in == "/.") {
            in = "/";
        } else if (in.starts_with("/../") || in == "/..") {
            in = in == "/.." ? std::string("/") : in.substr(3);
            auto cut = out.rfind('/');
            out.erase(cut == std::string::npos ? 0 : cut);
        } else if (in == "." || in == "..") {
            in.clear();
        } else {
            auto start = in.front() == '/' ? 1u : 0u;
            auto next = in.find('/', start);
            if (next == std::string::npos) next = in.size();
            out += in.substr(0, next);
            in.erase(0, next);
        }
    }
    return out;
}

std::vector<QueryParam> parse_query(std::string_view query) {
    std::vector<QueryParam> params;
    std::size_t pos = 0;
    while (pos <= query.size()) {
        auto amp = query.find('&', pos);
        if (amp == std::string_view::npos) amp = query.size();
        auto item = query.substr(pos, amp - pos);
        if (!item.empty()) {
            auto eq = item.find('=');
            if (eq == std::string_view::npos) {
                params.push_back({std::string(item), ""});
            } else {
                params.push_back({std::string(item.substr(0, eq)), std::string(item.substr(eq + 1))});
            }
        }
        pos = amp + 1;
    }
    std::sort(params.begin(), params.end());
    return params;
}

// Scheme of an absolute reference, or empty when the reference is relative.
std::string_view reference_scheme(std::string_view ref) {
    auto colon = ref.find(':');
    if (colon == std::string_view::npos || colon == 0) return {};
    auto delim = ref.find_first_of("/?#");
    if (delim != std::string_view::npos && delim < colon) return {};
    if (!std::isalpha(static_cast<unsigned char>(ref[0]))) return {};
    for (std::size_t i = 1; i < colon; ++i) {
        if (!is_scheme_char(ref[i])) return {};
    }
    return ref.substr(0, colon);
}

std::string authority_of(const CanonicalUri& uri) {
    std::string out = uri.scheme + "://" + uri.host;
    if (uri.port) out += ":" + std::to_string(*uri.port);
    return out;
}

std::optional<std::int64_t> parse_int(std::string_view text) {
    if (text.empty()) return std::nullopt;
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc::result_out_of_range) {
        return text.front() == '-' ? std::numeric_limits<std::int64_t>::min()
                                   : std::numeric_limits<std::int64_t>::max();
    }
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

constexpr std::array<std::string_view, 7> kWeekdays = {"Sun", "Mon", "Tue", "Wed",
                                                       "Thu", "Fri", "Sat"};
constexpr std::array<std::string_view, 12> kMonths = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                      "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

std::optional<int> digits(std::string_view text) {
    int value = 0;
    for (char c : text) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        value = value * 10 + (c - '0');
    }
    return value;
}

std::optional<Timestamp> make_timestamp(int year, int month, int day, int hour, int minute,
                                        int second) {
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                       std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 59) return std::nullopt;
    return sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second};
}

}  // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
    return s;
}

std::string primary_subtag(std::string_view tag) {
    return to_lower(tag.substr(0, tag.find_first_of("-_")));
}

// ---------------------------------------------------------------------------
// Headers

Headers::Headers(std::initializer_list<Field> fields) {
    for (const auto& [name, value] : fields) add(name, value);
}

void Headers::add(std::string_view name, std::string_view value) {
    fields_.emplace_back(to_lower(name), std::string(value));
}

void Headers::set(std::string_view name, std::string_view value) {
    remove(name);
    add(name, value);
}

void Headers::remove(std::string_view name) {
    auto key = to_lower(name);
    std::erase_if(fields_, [&](const Field& f) { return f.first == key; });
}

std::optional<std::string> Headers::get(std::string_view name) const {
    auto key = to_lower(name);
    for (const auto& [n, v] : fields_) {
        if (n == key) return v;
    }
    return std::nullopt;
}

std::vector<std::string> Headers::get_all(std::string_view name) const {
    auto key = to_lower(name);
    std::vector<std::string> out;
    for (const auto& [n, v] : fields_) {
        if (n == key) out.push_back(v);
    }
    return out;
}

bool Headers::contains(std::string_view name) const { return get(name).has_value(); }

// ---------------------------------------------------------------------------
// URIs

UriError::UriError(std::size_t position, const std::string& what)
    : std::runtime_error("malformed URI at position " + std::to_string(position) + ": " + what),
      position_(position) {}

std::string CanonicalUri::to_string() const {
    std::string out = authority_of(*this) + path;
    for (std::size_t i = 0; i < query.size(); ++i) {
        out += i == 0 ? '?' : '&';
        out += query[i].key + "=" + query[i].value;
    }
    return out;
}

std::optional<std::string> CanonicalUri::query_value(std::string_view key) const {
    for (const auto& p : query) {
        if (p.key == key) return p.value;
    }
    return std::nullopt;
}

CanonicalUri CanonicalUri::without_query() const {
    CanonicalUri copy = *this;
    copy.query.clear();
    return copy;
}

CanonicalUri canonicalize(std::string_view uri) {
    for (std::size_t i = 0; i < uri.size(); ++i) {
        if (is_ctl(uri[i]) || uri[i] == ' ') throw UriError(i, "whitespace or control character");
    }

    CanonicalUri out;
    std::size_t pos = 0;
    if (uri.empty() || !std::isalpha(static_cast<unsigned char>(uri[0]))) {
        throw UriError(0, "expected scheme");
    }
    while (pos < uri.size() && is_scheme_char(uri[pos])) ++pos;
    if (uri.substr(pos, 3) != "://") throw UriError(pos, "expected \"://\" after scheme");
    out.scheme = to_lower(uri.substr(0, pos));
    pos += 3;

    auto auth_end = uri.find_first_of("/?#", pos);
    if (auth_end == std::string_view::npos) auth_end = uri.size();
    auto authority = uri.substr(pos, auth_end - pos);
    std::size_t auth_pos = pos;
    if (auto at = authority.rfind('@'); at != std::string_view::npos) {
        authority.remove_prefix(at + 1);
        auth_pos += at + 1;
    }

    std::string_view host;
    std::string_view port_text;
    if (!authority.empty() && authority.front() == '[') {
        auto close = authority.find(']');
        if (close == std::string_view::npos) throw UriError(auth_pos, "unterminated IPv6 literal");
        host = authority.substr(0, close + 1);
        auto rest = authority.substr(close + 1);
        if (!rest.empty()) {
            if (rest.front() != ':') throw UriError(auth_pos + close + 1, "junk after IPv6 literal");
            port_text = rest.substr(1);
        }
    } else {
        auto colon = authority.find(':');
        host = authority.substr(0, colon);
        if (colon != std::string_view::npos) port_text = authority.substr(colon + 1);
        for (std::size_t i = 0; i < host.size(); ++i) {
            if (!is_host_char(host[i])) throw UriError(auth_pos + i, "invalid host character");
        }
    }
    if (host.empty()) throw UriError(auth_pos, "empty host");
    out.host = to_lower(host);

    if (!port_text.empty()) {
        auto port_pos = auth_pos + authority.size() - port_text.size();
        auto port = digits(port_text);
        if (!port || port_text.size() > 5 || *port > 65535) throw UriError(port_pos, "invalid port");
        if (default_port(out.scheme) != *port) out.port = static_cast<std::uint16_t>(*port);
    }

    pos = auth_end;
    auto path_end = uri.find_first_of("?#", pos);
    if (path_end == std::string_view::npos) path_end = uri.size();
    auto raw_path = uri.substr(pos, path_end - pos);
    out.path = raw_path.empty() ? "/" : remove_dot_segments(raw_path);
    if (out.path.empty() || out.path.front() != '/') out.path.insert(0, "/");

    pos = path_end;
    if (pos < uri.size() && uri[pos] == '?') {
        auto query_end = uri.find('#', pos);
        if (query_end == std::string_view::npos) query_end = uri.size();
        out.query = parse_query(uri.substr(pos + 1, query_end - pos - 1));
    }
    return out;
}

CanonicalUri resolve(const CanonicalUri& base, std::string_view reference) {
    auto ref = trim(reference);
    auto scheme = reference_scheme(ref);
    if (!scheme.empty()) {
        if (ref.substr(scheme.size(), 3) != "://") {
            throw UriError(scheme.size(), "non-hierarchical scheme");
        }
        return canonicalize(ref);
    }
    if (ref.starts_with("//")) return canonicalize(base.scheme + ":" + std::string(ref));
    if (ref.empty() || ref.front() == '#') return base;
    if (ref.front() == '/') return canonicalize(authority_of(base) + std::string(ref));
    if (ref.front() == '?') return canonicalize(authority_of(base) + base.path + std::string(ref));
    auto dir = base.path.substr(0, base.path.rfind('/') + 1);
    return canonicalize(authority_of(base) + dir + std::string(ref));
}

// ---------------------------------------------------------------------------
// Dates

std::optional<Timestamp> parse_cookie_date(std::string_view text) {
    text = trim(text);
    // "Thu, 01 Jan 2037 00:00:00 GMT"
    if (text.size() != 29 || text.substr(3, 2) != ", " || text[7] != ' ' || text[11] != ' ' ||
        text[16] != ' ' || text[19] != ':' || text[22] != ':' || text.substr(25) != " GMT") {
        return std::nullopt;
    }
    if (std::find(kWeekdays.begin(), kWeekdays.end(), text.substr(0, 3)) == kWeekdays.end()) {
        return std::nullopt;
    }
    auto month_it = std::find(kMonths.begin(), kMonths.end(), text.substr(8, 3));
    if (month_it == kMonths.end()) return std::nullopt;
    auto day = digits(text.substr(5, 2));
    auto year = digits(text.substr(12, 4));
    auto hour = digits(text.substr(17, 2));
    auto minute = digits(text.substr(20, 2));
    auto second = digits(text.substr(23, 2));
    if (!day || !year || !hour || !minute || !second) return std::nullopt;
    return make_timestamp(*year, static_cast<int>(month_it - kMonths.begin()) + 1, *day, *hour,
                          *minute, *second);
}

std::string format_http_date(Timestamp t) {
    using namespace std::chrono;
    auto day_point = floor<days>(t);
    year_month_day ymd{day_point};
    hh_mm_ss hms{t - day_point};
    weekday wd{day_point};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%s, %02u %s %04d %02ld:%02ld:%02ld GMT",
                  std::string(kWeekdays[wd.c_encoding()]).c_str(), unsigned(ymd.day()),
                  std::string(kMonths[unsigned(ymd.month()) - 1]).c_str(), int(ymd.year()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

std::string format_timestamp14(Timestamp t) {
    using namespace std::chrono;
    auto day_point = floor<days>(t);
    year_month_day ymd{day_point};
    hh_mm_ss hms{t - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d%02u%02u%02ld%02ld%02ld", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

std::optional<Timestamp> parse_timestamp14(std::string_view text) {
    if (text.size() != 14) return std::nullopt;
    auto year = digits(text.substr(0, 4));
    auto month = digits(text.substr(4, 2));
    auto day = digits(text.substr(6, 2));
    auto hour = digits(text.substr(8, 2));
    auto minute = digits(text.substr(10, 2));
    auto second = digits(text.substr(12, 2));
    if (!year || !month || !day || !hour || !minute || !second) return std::nullopt;
    return make_timestamp(*year, *month, *day, *hour, *minute, *second);
}

// ---------------------------------------------------------------------------
// Cookies

bool domain_matches(std::string_view host, std::string_view domain) {
    if (host == domain) return true;
    return !domain.empty() && host.size() > domain.size() && host.ends_with(domain) &&
           host[host.size() - domain.size() - 1] == '.';
}

bool path_matches(std::string_view request_path, std::string_view cookie_path) {
    if (request_path == cookie_path) return true;
    if (!request_path.starts_with(cookie_path)) return false;
    return cookie_path.ends_with('/') || request_path[cookie_path.size()] == '/';
}

std::string default_cookie_path(std::string_view request_path) {
    if (request_path.empty() || request_path.front() != '/') return "/";
    auto last = request_path.rfind('/');
    if (last == 0) return "/";
    return std::string(request_path.substr(0, last));
}

std::optional<Cookie> parse_set_cookie(std::string_view header_value,
                                       const CanonicalUri& request_uri, Timestamp now) {
    if (std::any_of(header_value.begin(), header_value.end(), is_ctl)) return std::nullopt;

    auto semi = header_value.find(';');
    auto pair = header_value.substr(0, semi);
    auto eq = pair.find('=');
    if (eq == std::string_view::npos) return std::nullopt;

    Cookie cookie;
    cookie.name = std::string(trim(pair.substr(0, eq)));
    cookie.value = std::string(trim(pair.substr(eq + 1)));
    if (cookie.name.empty()) return std::nullopt;
    cookie.created_at = now;

    std::optional<std::int64_t> max_age;
    std::optional<Timestamp> expires;
    std::optional<std::string> domain_attr;
    std::optional<std::string> path_attr;

    auto rest = semi == std::string_view::npos ? std::string_view{} : header_value.substr(semi + 1);
    while (!rest.empty()) {
        auto next = rest.find(';');
        auto attr = rest.substr(0, next);
        rest = next == std::string_view::npos ? std::string_view{} : rest.substr(next + 1);

        auto attr_eq = attr.find('=');
        auto attr_name = to_lower(trim(attr.substr(0, attr_eq)));
        auto attr_value =
            attr_eq == std::string_view::npos ? std::string_view{} : trim(attr.substr(attr_eq + 1));

        if (attr_name == "expires") {
            if (auto t = parse_cookie_date(attr_value)) expires = t;
        } else if (attr_name == "max-age") {
            bool well_formed = !attr_value.empty() &&
                               std::all_of(attr_value.begin() + (attr_value.front() == '-'),
                                           attr_value.end(), [](char c) {
                                               return std::isdigit(static_cast<unsigned char>(c));
                                           });
            if (well_formed) max_age = parse_int(attr_value);
        } else if (attr_name == "domain") {
            auto d = attr_value;
            if (!d.empty() && d.front() == '.') d.remove_prefix(1);
            if (!d.empty()) domain_attr = to_lower(d);
        } else if (attr_name == "path") {
            path_attr = (attr_value.empty() || attr_value.front() != '/')
                            ? default_cookie_path(request_uri.path)
                            : std::string(attr_value);
        } else if (attr_name == "secure") {
            cookie.secure = true;
        } else if (attr_name == "httponly") {
            cookie.http_only = true;
        } else if (attr_name == "samesite") {
            cookie.same_site = std::string(attr_value);
        }
    }

    if (domain_attr) {
        if (!domain_matches(request_uri.host, *domain_attr)) return std::nullopt;
        cookie.domain = *domain_attr;
        cookie.host_only = false;
    } else {
        cookie.domain = request_uri.host;
        cookie.host_only = true;
    }
    cookie.path = path_attr ? *path_attr : default_cookie_path(request_uri.path);

    if (max_age) {
        // ~100 years; keeps the sum inside the representable range.
        constexpr std::int64_t kCap = 3'155'760'000;
        cookie.expires_at = *max_age <= 0 ? now : now + Seconds{std::min(*max_age, kCap)};
    } else if (expires) {
        cookie.expires_at = std::max(*expires, now);
    }
    return cookie;
}

std::vector<CookiePair> parse_cookie_header(std::string_view header_value) {
    std::vector<CookiePair> pairs;
    while (!header_value.empty()) {
        auto semi = header_value.find(';');
        auto item = trim(header_value.substr(0, semi));
        header_value =
            semi == std::string_view::npos ? std::string_view{} : header_value.substr(semi + 1);
        auto eq = item.find('=');
        if (eq == std::string_view::npos) continue;
        auto name = trim(item.substr(0, eq));
        if (name.empty()) continue;
        pairs.emplace_back(std::string(name), std::string(trim(item.substr(eq + 1))));
    }
    return pairs;
}

std::string serialize_cookie_header(const std::vector<CookiePair>& pairs) {
    std::string out;
    for (const auto& [name, value] : pairs) {
        if (!out.empty()) out += "; ";
        out += name + "=" + value;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vary / Accept-Language

VarySpec parse_vary(const Headers& response_headers) {
    VarySpec spec;
    for (const auto& value : response_headers.get_all("vary")) {
        std::string_view rest = value;
        while (true) {
            auto comma = rest.find(',');
            auto token = to_lower(trim(rest.substr(0, comma)));
            if (token == "*") return VarySpec{VarySpec::Kind::kAll, {}};
            if (!token.empty() &&
                std::find(spec.fields.begin(), spec.fields.end(), token) == spec.fields.end()) {
                spec.fields.push_back(std::move(token));
            }
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
    }
    spec.kind = spec.fields.empty() ? VarySpec::Kind::kEmpty : VarySpec::Kind::kList;
    return spec;
}

std::vector<LanguageRange> parse_accept_language(std::string_view header_value) {
    std::vector<LanguageRange> ranges;
    while (!header_value.empty()) {
        auto comma = header_value.find(',');
        auto entry = header_value.substr(0, comma);
        header_value =
            comma == std::string_view::npos ? std::string_view{} : header_value.substr(comma + 1);

        auto semi = entry.find(';');
        auto tag = to_lower(trim(entry.substr(0, semi)));
        bool tag_ok = !tag.empty() && std::all_of(tag.begin(), tag.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '*';
        });
        if (!tag_ok) continue;

        double q = 1.0;
        bool q_ok = true;
        auto params = semi == std::string_view::npos ? std::string_view{} : entry.substr(semi + 1);
        while (!params.empty()) {
            auto next = params.find(';');
            auto param = trim(params.substr(0, next));
            params = next == std::string_view::npos ? std::string_view{} : params.substr(next + 1);
            if (param.size() < 2 || (param[0] != 'q' && param[0] != 'Q') || param[1] != '=') continue;
            auto text = trim(param.substr(2));
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), q);
            q_ok = ec == std::errc() && ptr == text.data() + text.size() && q >= 0.0 && q <= 1.0;
        }
        if (!q_ok) continue;
        ranges.push_back({std::move(tag), q});
    }
    std::stable_sort(ranges.begin(), ranges.end(),
                     [](const LanguageRange& a, const LanguageRange& b) { return a.q > b.q; });
    return ranges;
}

}  // namespace cookiearc
