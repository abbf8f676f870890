// cookiearc: serve the simulated origin, crawl it into an archive, replay
// the archive, and analyze language bias and composite defacement.
//
// Exit codes: 0 success, 1 usage, 2 runtime failure, 3 demo contract
// violated.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "cookiearc/analyzer.hpp"
#include "cookiearc/archive_store.hpp"
#include "cookiearc/cookie_jar.hpp"
#include "cookiearc/crawler.hpp"
#include "cookiearc/demo.hpp"
#include "cookiearc/origin_sim.hpp"
#include "cookiearc/replay.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cookiearc;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitContract = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// JSON config file: {"<subcommand>": {"<long-option>": value, ...}}.
class ConfigJSON : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        json j;
        for (const CLI::Option* opt : app->get_options({})) {
            if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
            auto name = opt->get_lnames()[0];
            if (opt->count() > 0) {
                j[name] = opt->results().size() == 1 ? json(opt->results()[0]) : json(opt->results());
            } else if (default_also && !opt->get_default_str().empty()) {
                j[name] = opt->get_default_str();
            }
        }
        for (const CLI::App* sub : app->get_subcommands({})) {
            j[sub->get_name()] = json::parse(to_config(sub, default_also, false, ""));
        }
        return j.dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j;
        try {
            input >> j;
        } catch (const json::exception& e) {
            throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
        }
        return flatten(j, "", {});
    }

private:
    static std::vector<CLI::ConfigItem> flatten(const json& j, const std::string& name,
                                                std::vector<std::string> prefix) {
        std::vector<CLI::ConfigItem> items;
        if (j.is_object()) {
            if (!name.empty()) prefix.push_back(name);
            for (const auto& [key, value] : j.items()) {
                auto sub = flatten(value, key, prefix);
                items.insert(items.end(), sub.begin(), sub.end());
            }
            return items;
        }
        if (name.empty()) throw CLI::ConversionError("config top level must be an object");
        CLI::ConfigItem item;
        item.name = name;
        item.parents = prefix;
        auto scalar = [](const json& v) {
            if (v.is_string()) return v.get<std::string>();
            if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
            return v.dump();
        };
        if (j.is_array()) {
            for (const auto& v : j) item.inputs.push_back(scalar(v));
        } else {
            item.inputs.push_back(scalar(j));
        }
        items.push_back(std::move(item));
        return items;
    }
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SiteConfig load_site(const std::string& path) {
    if (path.empty()) return SiteConfig{};
    try {
        return site_config_from_json(json::parse(read_text(path)));
    } catch (const json::exception& e) {
        throw UsageError("site config " + path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw UsageError("site config " + path + ": " + e.what());
    }
}

Timestamp parse_start(const std::string& text) {
    auto t = parse_timestamp14(text);
    if (!t) throw UsageError("timestamp must be 14 digits YYYYMMDDhhmmss: " + text);
    return *t;
}

std::optional<Seconds> parse_ttl(const std::string& text) {
    if (text == "inf" || text == "none" || text == "infinite") return std::nullopt;
    try {
        std::size_t used = 0;
        auto v = std::stoll(text, &used);
        if (used != text.size() || v < 0) throw std::invalid_argument(text);
        return Seconds{v};
    } catch (const std::exception&) {
        throw UsageError("--cookie-max-ttl expects seconds >= 0 or \"inf\": " + text);
    }
}

CookieJar load_cookie_file(const std::string& path, JarPolicy policy = {}) {
    auto imported = CookieJar::import_netscape(read_text(path), policy);
    for (const auto& err : imported.errors) {
        std::cerr << path << ":" << err.line << ": skipped malformed cookie row: " << err.message << "\n";
    }
    return std::move(imported.jar);
}

FetchFn http_fetcher(const std::string& origin_url) {
    return [origin_url](const HttpRequest& request) {
        auto uri = canonicalize(request.uri);
        std::string target = uri.path;
        for (std::size_t i = 0; i < uri.query.size(); ++i) {
            target += (i == 0 ? "?" : "&") + uri.query[i].key + "=" + uri.query[i].value;
        }
        httplib::Client client(origin_url);
        client.set_connection_timeout(5);
        httplib::Headers headers;
        for (const auto& [name, value] : request.headers.fields()) headers.emplace(name, value);
        auto res = client.Get(target, headers);
        if (!res) throw std::runtime_error("fetch failed: " + httplib::to_string(res.error()));
        HttpResponse response;
        response.status = res->status;
        for (const auto& [name, value] : res->headers) {
            auto lowered = to_lower(name);
            if (lowered == "content-length" || lowered == "keep-alive" || lowered == "connection") continue;
            response.headers.add(lowered, value);
        }
        response.body = res->body;
        return response;
    };
}

ArchiveStore open_or_create(const fs::path& dir, const VariantConfig& cfg) {
    if (fs::exists(dir / "meta.json")) {
        auto store = ArchiveStore::open(dir);
        if (!(store.config() == cfg.normalized())) {
            std::cerr << "note: appending with the archive's stored variant config\n";
        }
        return store;
    }
    return ArchiveStore::create(dir, cfg);
}

ReplayMode mode_from(const std::string& mode, const std::string& fallback) {
    auto m = parse_replay_mode(mode, fallback);
    if (!m) throw UsageError("unknown --mode/--fallback: " + mode + "/" + fallback);
    return *m;
}

std::vector<Cookie> replay_cookies(const std::string& cookie_file, const std::string& lang,
                                   const ArchiveStore& store, const std::string& uri_hint) {
    std::vector<Cookie> cookies;
    if (!cookie_file.empty()) cookies = load_cookie_file(cookie_file).entries();
    if (!lang.empty()) {
        // --lang synthesizes a lang cookie valid for every archived host.
        std::set<std::string> hosts;
        for (const auto& u : store.uris()) hosts.insert(u.host);
        if (!uri_hint.empty()) hosts.insert(canonicalize(uri_hint).host);
        for (const auto& h : hosts) {
            Cookie c;
            c.name = "lang";
            c.value = lang;
            c.domain = h;
            cookies.push_back(c);
        }
    }
    return cookies;
}

ReplayService* g_active_replay = nullptr;
OriginServer* g_active_origin = nullptr;

void handle_signal(int) {
    if (g_active_replay) g_active_replay->stop();
    if (g_active_origin) g_active_origin->stop();
}

void print_json_or_text(const std::string& format, const json& j, const std::string& text) {
    if (format == "json") {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << text;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cookie-bias web archiving pipeline: origin simulator, crawler, archive, replay, analyzer"};
    app.config_formatter(std::make_shared<ConfigJSON>());
    app.set_config("--config", "", "JSON config file; command-line flags take precedence");
    app.require_subcommand(1);

    // serve-origin
    auto* serve = app.add_subcommand("serve-origin", "Run the simulated multi-language origin over HTTP");
    int origin_port = 8080;
    std::string origin_address = "127.0.0.1";
    std::string site_path;
    serve->add_option("--port", origin_port, "TCP port (0 = ephemeral)")->capture_default_str();
    serve->add_option("--address", origin_address)->capture_default_str();
    serve->add_option("--site-config", site_path, "SiteConfig JSON document");

    // crawl
    auto* crawl_cmd = app.add_subcommand("crawl", "Breadth-first crawl into an archive directory");
    std::vector<std::string> seeds;
    std::string crawl_site;
    std::size_t max_pages = 100;
    std::string profile = "fixed";
    std::string max_ttl_text;
    std::size_t revisit = 0;
    long clock_step = 1;
    std::string start_text = "20190101120000";
    std::string out_dir;
    std::string cookie_file;
    std::string save_cookies;
    std::string origin_url;
    std::vector<std::string> implied_vary{"cookie"};
    std::vector<std::string> content_cookies{"lang"};
    bool ignore_vary = false;
    std::string crawl_format = "text";
    crawl_cmd->add_option("--seed", seeds, "Seed URI (repeatable); default: the site root");
    crawl_cmd->add_option("--site-config", crawl_site, "SiteConfig JSON for the in-process origin");
    crawl_cmd->add_option("--max-pages", max_pages)->capture_default_str()->check(CLI::PositiveNumber);
    crawl_cmd->add_option("--profile", profile, "fixed (300 s cookie cap) or faithful (no cap)")
        ->check(CLI::IsMember({"fixed", "faithful"}))
        ->capture_default_str();
    crawl_cmd->add_option("--cookie-max-ttl", max_ttl_text, "Cookie lifetime cap in seconds, or \"inf\"; overrides --profile");
    crawl_cmd->add_option("--revisit-root-every", revisit, "Re-enqueue the seeds after every k dequeues")->capture_default_str();
    crawl_cmd->add_option("--clock-step", clock_step, "Synthetic seconds per request")->capture_default_str()->check(CLI::PositiveNumber);
    crawl_cmd->add_option("--start", start_text, "Timestamp of the first capture")->capture_default_str();
    crawl_cmd->add_option("--out", out_dir, "Archive directory (created or appended to)")->required();
    crawl_cmd->add_option("--cookie-file", cookie_file, "Netscape cookie file to start the session with");
    crawl_cmd->add_option("--save-cookies", save_cookies, "Write the final jar as a Netscape cookie file");
    crawl_cmd->add_option("--origin-url", origin_url, "Fetch over HTTP from a running serve-origin (e.g. http://127.0.0.1:8080)");
    crawl_cmd->add_option("--implied-vary", implied_vary, "Dimensions applied when a response has no Vary")->capture_default_str();
    crawl_cmd->add_option("--content-cookies", content_cookies, "Cookie names that affect content")->capture_default_str();
    crawl_cmd->add_flag("--ignore-vary", ignore_vary, "Do not honor response Vary headers");
    crawl_cmd->add_option("--format", crawl_format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "Serve an archive at /web/<timestamp>/<uri>");
    std::string archive;
    std::string mode = "baseline";
    std::string fallback = "nearest_any";
    int replay_port = 8090;
    std::string replay_address = "127.0.0.1";
    std::string request_cookies;
    std::string lang;
    std::string get_target;
    replay_cmd->add_option("--archive", archive)->required();
    replay_cmd->add_option("--mode", mode)->check(CLI::IsMember({"baseline", "variant"}))->capture_default_str();
    replay_cmd->add_option("--fallback", fallback)->check(CLI::IsMember({"nearest_any", "not_found"}))->capture_default_str();
    replay_cmd->add_option("--port", replay_port)->capture_default_str();
    replay_cmd->add_option("--address", replay_address)->capture_default_str();
    replay_cmd->add_option("--request-cookies", request_cookies, "Netscape cookie file merged into every request");
    replay_cmd->add_option("--lang", lang, "Shorthand for a lang=<tag> request cookie");
    replay_cmd->add_option("--get", get_target, "Answer one request target (e.g. /web/20190101120000/https://twitter.com/) and exit");

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "Language distribution of a URI's captures");
    std::string analyze_archive;
    std::string analyze_uri;
    std::string compare_archive;
    std::string analyze_format = "text";
    analyze_cmd->add_option("--archive", analyze_archive)->required();
    analyze_cmd->add_option("--uri", analyze_uri)->required();
    analyze_cmd->add_option("--compare", compare_archive, "Second archive: print a bias comparison");
    analyze_cmd->add_option("--format", analyze_format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();

    // detect
    auto* detect_cmd = app.add_subcommand("detect", "Reconstruct a composite memento and check it for cookie violations");
    std::string detect_archive;
    std::string detect_uri;
    std::string detect_ts;
    std::string detect_mode = "baseline";
    std::string detect_fallback = "nearest_any";
    std::string detect_cookies;
    std::string detect_lang;
    std::string detect_format = "text";
    detect_cmd->add_option("--archive", detect_archive)->required();
    detect_cmd->add_option("--uri", detect_uri)->required();
    detect_cmd->add_option("--timestamp", detect_ts)->required();
    detect_cmd->add_option("--mode", detect_mode)->check(CLI::IsMember({"baseline", "variant"}))->capture_default_str();
    detect_cmd->add_option("--fallback", detect_fallback)->check(CLI::IsMember({"nearest_any", "not_found"}))->capture_default_str();
    detect_cmd->add_option("--request-cookies", detect_cookies);
    detect_cmd->add_option("--lang", detect_lang);
    detect_cmd->add_option("--format", detect_format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();

    // demo
    auto* demo_cmd = app.add_subcommand("demo", "Run the full bias-and-fix experiment");
    std::string demo_out;
    long demo_sessions = 3;
    std::size_t demo_pages = 120;
    std::size_t demo_revisit = 5;
    long fixed_ttl = 0;
    std::string demo_site;
    std::string demo_format = "text";
    demo_cmd->add_option("--out", demo_out)->required();
    demo_cmd->add_option("--sessions", demo_sessions)->capture_default_str();
    demo_cmd->add_option("--max-pages", demo_pages)->capture_default_str();
    demo_cmd->add_option("--revisit-root-every", demo_revisit)->capture_default_str();
    demo_cmd->add_option("--fixed-ttl", fixed_ttl, "Cookie cap (seconds) for the fixed pipeline")->capture_default_str();
    demo_cmd->add_option("--site-config", demo_site);
    demo_cmd->add_option("--format", demo_format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (serve->parsed()) {
            OriginServer server(load_site(site_path));
            auto port = server.bind(origin_address, origin_port);
            if (port < 0) throw std::runtime_error("cannot bind " + origin_address + ":" + std::to_string(origin_port));
            std::cout << "serving origin on http://" << origin_address << ":" << port << std::endl;
            g_active_origin = &server;
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            server.listen_after_bind();
            g_active_origin = nullptr;
            return 0;
        }

        if (crawl_cmd->parsed()) {
            auto site = load_site(crawl_site);
            if (seeds.empty()) seeds.push_back(site.origin() + "/");
            for (const auto& s : seeds) {
                try {
                    canonicalize(s);
                } catch (const UriError& e) {
                    throw UsageError("--seed " + s + ": " + e.what());
                }
            }
            CrawlPolicy policy;
            policy.jar_policy.max_ttl = profile == "fixed" ? std::optional<Seconds>(Seconds{300}) : std::nullopt;
            if (!max_ttl_text.empty()) policy.jar_policy.max_ttl = parse_ttl(max_ttl_text);
            policy.max_pages = max_pages;
            policy.revisit_root_every = revisit;
            policy.clock_step = Seconds{clock_step};
            policy.variant = VariantConfig{content_cookies, !ignore_vary, implied_vary}.normalized();
            auto start = parse_start(start_text);

            std::optional<CookieJar> initial;
            if (!cookie_file.empty()) initial = load_cookie_file(cookie_file);

            FetchFn fetch = origin_url.empty() ? FetchFn([site](const HttpRequest& r) { return handle(r, site); })
                                               : http_fetcher(origin_url);
            auto store = open_or_create(out_dir, policy.variant);
            policy.variant = store.config();
            auto result = crawl_session(seeds, fetch, policy, start, std::move(initial));
            json ids = json::array();
            for (auto& rec : result.records) ids.push_back(store.append(std::move(rec)));
            if (!save_cookies.empty()) {
                std::ofstream out(save_cookies, std::ios::binary | std::ios::trunc);
                out << result.jar.export_netscape();
                if (!out.flush()) throw std::runtime_error("cannot write " + save_cookies);
            }
            json summary = {{"archive", out_dir},
                            {"captures", ids.size()},
                            {"first_id", ids.empty() ? json(nullptr) : ids.front()},
                            {"last_id", ids.empty() ? json(nullptr) : ids.back()},
                            {"max_ttl_seconds", policy.jar_policy.max_ttl ? json(policy.jar_policy.max_ttl->count()) : json(nullptr)},
                            {"jar_size", result.jar.size()}};
            std::ostringstream text;
            text << "crawled " << ids.size() << " captures into " << out_dir << " (cookie cap "
                 << (policy.jar_policy.max_ttl ? std::to_string(policy.jar_policy.max_ttl->count()) + " s" : "none")
                 << ")\n";
            print_json_or_text(crawl_format, summary, text.str());
            return 0;
        }

        if (replay_cmd->parsed()) {
            auto store = ArchiveStore::open(archive);
            auto replay_mode = mode_from(mode, fallback);
            ReplayService service(store, replay_mode, store.config(),
                                  replay_cookies(request_cookies, lang, store, ""));
            if (!get_target.empty()) {
                auto response = service.handle(get_target, {});
                std::cout << "HTTP " << response.status << "\n";
                for (const auto& [name, value] : response.headers.fields()) std::cout << name << ": " << value << "\n";
                std::cout << "\n" << response.body;
                return response.status < 400 ? 0 : kExitRuntime;
            }
            auto port = service.bind(replay_address, replay_port);
            if (port < 0) throw std::runtime_error("cannot bind " + replay_address + ":" + std::to_string(replay_port));
            std::cout << "replaying " << archive << " on http://" << replay_address << ":" << port << "/web/" << std::endl;
            g_active_replay = &service;
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            service.listen_after_bind();
            g_active_replay = nullptr;
            return 0;
        }

        if (analyze_cmd->parsed()) {
            auto store = ArchiveStore::open(analyze_archive);
            CanonicalUri uri;
            try {
                uri = canonicalize(analyze_uri);
            } catch (const UriError& e) {
                throw UsageError(e.what());
            }
            for (const auto& entry : store.lookup(uri)) {
                if (auto rec = store.get(entry.id)) {
                    if (auto w = language_of(*rec).warning) std::cerr << "warning: " << *w << "\n";
                }
            }
            if (!compare_archive.empty()) {
                auto other = ArchiveStore::open(compare_archive);
                auto report = bias_report(store, other, uri, analyze_archive, compare_archive);
                print_json_or_text(analyze_format, report.to_json(), report.to_text());
                return 0;
            }
            auto dist = distribution(store, uri);
            print_json_or_text(analyze_format, distribution_to_json(dist), distribution_to_text(dist));
            return 0;
        }

        if (detect_cmd->parsed()) {
            auto store = ArchiveStore::open(detect_archive);
            CanonicalUri uri;
            try {
                uri = canonicalize(detect_uri);
            } catch (const UriError& e) {
                throw UsageError(e.what());
            }
            auto when = parse_start(detect_ts);
            auto detect_replay = mode_from(detect_mode, detect_fallback);
            std::vector<CookiePair> pairs;
            for (const auto& c : replay_cookies(detect_cookies, detect_lang, store, detect_uri)) {
                bool domain_ok = c.host_only ? uri.host == c.domain : domain_matches(uri.host, c.domain);
                if (domain_ok && path_matches(uri.path, c.path)) pairs.emplace_back(c.name, c.value);
            }
            auto ctx = RequestContext::with_cookie(serialize_cookie_header(pairs));
            auto composite = reconstruct_composite(store, uri, when, detect_replay, ctx, store.config());
            if (!composite) {
                std::cerr << "not archived: " << uri.to_string() << "\n";
                return kExitRuntime;
            }
            auto report = detect_violations(*composite);
            auto j = violation_report_to_json(report);
            j["root_datetime"] = format_timestamp14(composite->root.record.datetime);
            json parts = json::array();
            for (const auto& p : composite->parts) {
                parts.push_back({{"uri", p.uri.to_string()},
                                 {"datetime", p.selection ? json(format_timestamp14(p.selection->record.datetime)) : json(nullptr)},
                                 {"fallback", p.selection ? p.selection->fallback_used : false}});
            }
            j["parts"] = parts;
            print_json_or_text(detect_format, j, violation_report_to_text(report));
            return 0;
        }

        if (demo_cmd->parsed()) {
            if (demo_sessions < 1) throw UsageError("--sessions must be >= 1");
            if (fixed_ttl < 0) throw UsageError("--fixed-ttl must be >= 0");
            DemoPlan plan;
            plan.sessions = static_cast<std::size_t>(demo_sessions);
            plan.out_dir = demo_out;
            plan.max_pages = demo_pages;
            plan.revisit_root_every = demo_revisit;
            plan.site = load_site(demo_site);
            plan.seed = plan.site.origin() + "/";
            plan.policies[1].jar = JarPolicy::capped(Seconds{fixed_ttl});
            try {
                plan.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            auto outcome = run_demo(plan);
            print_json_or_text(demo_format, outcome.summary, outcome.text);
            return outcome.contract_holds ? 0 : kExitContract;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
