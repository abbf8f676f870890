// Acceptance run: one PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>

#include "cookiearc/analyzer.hpp"
#include "cookiearc/cookie_jar.hpp"
#include "cookiearc/crawler.hpp"
#include "cookiearc/demo.hpp"
#include "cookiearc/origin_sim.hpp"
#include "cookiearc/replay.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cookiearc;
using namespace cookiearc::testing;
namespace fs = std::filesystem;

namespace {

const std::string kSeed = "https://twitter.com/";

struct Outcome {
    bool ok = true;
    std::string detail;
};

Outcome fail(std::string why) { return {false, std::move(why)}; }

std::string html_lang(const std::string& body) {
    static const std::regex re("<html lang=\"([^\"]*)\"");
    std::smatch m;
    return std::regex_search(body, m, re) ? m[1].str() : "";
}

// 1. The four negotiation exchanges, with the jar carried between them.
Outcome negotiation_exchanges() {
    SiteConfig site;
    CookieJar jar;
    auto now = reference_time();
    std::vector<std::string> langs;

    auto fetch = [&](const std::string& uri, Headers headers, bool use_jar) {
        HttpRequest req{"GET", uri, std::move(headers)};
        auto canonical = canonicalize(uri);
        if (use_jar) {
            if (auto c = jar.cookie_header_for(canonical, now); !c.empty()) req.headers.add("Cookie", c);
        }
        auto resp = handle(req, site);
        if (use_jar) {
            for (const auto& sc : resp.headers.get_all("set-cookie")) {
                if (auto c = parse_set_cookie(sc, canonical, now)) jar.store(*c, now);
            }
        }
        langs.push_back(html_lang(resp.body));
    };

    fetch("https://twitter.com/?lang=ar", {}, true);
    auto exported = jar.export_netscape();
    fetch(kSeed, {}, false);
    fetch(kSeed, Headers{{"Accept-Language", "ur"}}, false);
    fetch(kSeed, {}, true);

    std::vector<std::string> want = {"ar", "en", "ur", "ar"};
    if (langs != want) {
        std::string got;
        for (const auto& l : langs) got += l + " ";
        return fail("html lang sequence " + got);
    }
    bool line_found = false;
    std::istringstream lines(exported);
    for (std::string line; std::getline(lines, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::istringstream fields(line);
        for (std::string x; std::getline(fields, x, '\t');) f.push_back(x);
        if (f.size() == 7 && f[0] == "twitter.com" && f[2] == "/" && f[5] == "lang" && f[6] == "ar") line_found = true;
    }
    if (!line_found) return fail("no (twitter.com, /, lang, ar) line in exported jar");
    return {true, "html lang ar,en,ur,ar; jar line twitter.com / lang ar"};
}

CrawlPolicy crawl_policy(JarPolicy jar) {
    CrawlPolicy p;
    p.jar_policy = jar;
    p.max_pages = 120;
    p.revisit_root_every = 5;
    return p;
}

LanguageDistribution crawl_root_distribution(JarPolicy jar) {
    SiteConfig site;
    FetchFn fetch = [&site](const HttpRequest& r) { return handle(r, site); };
    auto store = ArchiveStore::in_memory(crawl_policy(jar).variant);
    for (auto& rec : crawl({kSeed}, fetch, crawl_policy(jar), reference_time())) store.append(std::move(rec));
    return distribution(store, canonicalize(kSeed));
}

// 2. Sticky cookies bias the root captures towards the last alternate.
Outcome bias_reproduction() {
    SiteConfig site;
    auto root = handle(HttpRequest{"GET", kSeed, {}}, site);
    std::string last_alternate;
    for (const auto& l : scan_links(root.body, canonicalize(kSeed))) {
        if (l.kind == LinkKind::kAlternate) {
            if (auto q = l.uri.query_value("lang")) last_alternate = *q;
        }
    }
    auto d = crawl_root_distribution(JarPolicy::faithful());
    auto modal = d.modal({site.default_language});
    std::ostringstream detail;
    detail << d.total << " root captures, " << (d.total - d.counts[site.default_language])
           << " non-default, modal non-default " << modal.value_or("-") << ", last alternate " << last_alternate;
    if (!modal) return fail(detail.str());
    if (*modal != last_alternate || last_alternate != "kn") return fail(detail.str());
    return {true, detail.str()};
}

// 3. A zero cookie lifetime removes the bias.
Outcome fix_efficacy() {
    auto d = crawl_root_distribution(JarPolicy::capped(Seconds{0}));
    std::ostringstream detail;
    detail << d.total << " root captures, en fraction " << d.fraction("en") << ", entropy " << d.entropy_bits();
    if (d.total == 0 || d.fraction("en") != 1.0 || d.entropy_bits() != 0.0) return fail(detail.str());
    return {true, detail.str()};
}

// 4. Defacement shows up under baseline replay and disappears under
// variant-aware replay.
Outcome violation_round_trip() {
    SiteConfig site;
    VariantConfig cfg{{"lang"}, true, {"cookie"}};
    auto store = ArchiveStore::in_memory(cfg);
    auto scenario = defacement_scenario(site, reference_time());
    record_scenario(scenario, site, store);
    auto ctx = RequestContext::with_cookie("lang=" + scenario.root_language);
    auto base = reconstruct_composite(store, scenario.root, scenario.target, ReplayMode::baseline(), ctx, cfg);
    auto fixed = reconstruct_composite(store, scenario.root, scenario.target,
                                       ReplayMode::variant_aware(Fallback::kNearestAny), ctx, cfg);
    if (!base || !fixed) return fail("root not selectable");
    auto b = detect_violations(*base);
    auto f = detect_violations(*fixed);
    std::ostringstream detail;
    detail << "baseline " << to_string(b.verdict) << " with " << b.languages_present.size() << " languages; variant-aware "
           << to_string(f.verdict) << " with " << f.violating_parts.size() << " violating parts";
    if (b.languages_present.size() < 2 || b.verdict != Verdict::kDefaced) return fail(detail.str());
    if (f.verdict != Verdict::kConsistent || !f.violating_parts.empty()) return fail(detail.str());
    return {true, detail.str()};
}

// 5. Selection equals the brute-force oracle.
Outcome selection_oracle() {
    std::mt19937 rng(20190101);
    const VariantConfig cfg{{"lang"}, true, {"cookie"}};
    const std::vector<std::string> uris = {kSeed, "https://twitter.com/i/sidebar"};
    const std::vector<std::string> langs = {"en", "kn", "ar", "fr"};
    std::size_t mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        auto store = ArchiveStore::in_memory(cfg);
        std::vector<ArchiveRecord> all;
        for (int k = 0, n = static_cast<int>(rng() % 12); k < n; ++k) {
            auto lang = langs[rng() % langs.size()];
            VariantKey key;
            if (rng() % 3 == 1) key = cookie_key("");
            else if (rng() % 2) key = cookie_key("lang=" + lang);
            auto rec = make_record(uris[rng() % uris.size()],
                                   reference_time() + Seconds{static_cast<long>(rng() % 40) - 20}, lang, key);
            rec.id = store.append(rec);
            all.push_back(rec);
        }
        auto target = reference_time() + Seconds{static_cast<long>(rng() % 50) - 25};
        RequestContext ctx;
        if (rng() % 4) ctx = RequestContext::with_cookie("lang=" + langs[rng() % langs.size()]);
        auto uri = canonicalize(uris[rng() % uris.size()]);
        for (auto mode : {ReplayMode::baseline(), ReplayMode::variant_aware(Fallback::kNearestAny),
                          ReplayMode::variant_aware(Fallback::kNotFound)}) {
            auto got = select_memento(store, uri, target, mode, ctx, cfg);
            auto want = oracle_select(all, uri, target, mode, ctx.headers);
            bool same = got.has_value() == want.has_value() &&
                        (!got || (got->record.id == want->id && got->fallback_used == want->fallback));
            if (!same) ++mismatches;
        }
    }
    std::string detail = "1000 cases x 3 modes, " + std::to_string(mismatches) + " mismatches";
    return mismatches == 0 ? Outcome{true, detail} : fail(detail);
}

// 6. Reopened archives are indistinguishable; lookup equals a linear scan.
Outcome store_integrity() {
    std::mt19937 rng(6);
    const std::vector<std::string> uris = {kSeed, "https://twitter.com/i/sidebar", "https://twitter.com/page/2"};
    auto root = fs::temp_directory_path() / ("cookiearc-acceptance-" + std::to_string(std::random_device{}()));
    std::size_t problems = 0;
    for (int i = 0; i < 200; ++i) {
        auto dir = root / std::to_string(i);
        std::vector<ArchiveRecord> appended;
        {
            auto store = ArchiveStore::create(dir, VariantConfig{{"lang"}, true, {"cookie"}});
            for (int k = 0, n = static_cast<int>(rng() % 12); k < n; ++k) {
                auto lang = random_token(rng, 2, 2, "abc");
                auto rec = make_record(uris[rng() % uris.size()],
                                       reference_time() + Seconds{static_cast<long>(rng() % 10)}, lang,
                                       rng() % 2 ? cookie_key("lang=" + lang) : VariantKey{},
                                       rng() % 3 ? "" : random_token(rng, 1, 30, "ab\n\r{}\" "));
                rec.request_headers.add("Cookie", "lang=" + lang);
                rec.id = store.append(rec);
                appended.push_back(rec);
            }
            auto reopened = ArchiveStore::open(dir);
            if (reopened.records() != store.records() || reopened.uris() != store.uris() ||
                reopened.config() != store.config()) {
                ++problems;
            }
            for (const auto& u : uris) {
                auto uri = canonicalize(u);
                std::vector<IndexEntry> expected;
                for (const auto& r : appended) {
                    if (r.uri == uri) expected.push_back({r.uri, r.datetime, r.id, r.response_status, r.variant_key});
                }
                std::stable_sort(expected.begin(), expected.end(),
                                 [](const IndexEntry& a, const IndexEntry& b) { return a.datetime < b.datetime; });
                if (reopened.lookup(uri) != expected || store.lookup(uri) != expected) ++problems;
            }
        }
    }
    std::error_code ec;
    fs::remove_all(root, ec);
    std::string detail = "200 archives, " + std::to_string(problems) + " discrepancies";
    return problems == 0 ? Outcome{true, detail} : fail(detail);
}

// 7. Netscape cookie files round-trip exactly.
Outcome netscape_format() {
    std::mt19937 rng(7);
    const std::vector<std::string> hosts = {"twitter.com", "www.twitter.com", "example.com"};
    const std::vector<std::string> paths = {"/", "/i", "/page/1"};
    std::size_t problems = 0;
    for (int i = 0; i < 200; ++i) {
        std::string text(kNetscapeHeader);
        std::set<std::tuple<std::string, std::string, std::string>> keys;
        for (int k = 0, n = static_cast<int>(rng() % 10); k < n; ++k) {
            auto host = hosts[rng() % hosts.size()];
            bool sub = rng() % 2;
            auto path = paths[rng() % paths.size()];
            auto name = random_token(rng, 1, 4, "abcdef_");
            if (!keys.emplace(name, host, path).second) continue;
            auto expiry = rng() % 2 ? std::string("0") : std::to_string(1546344000 + rng() % 100000000);
            text += std::string(rng() % 4 ? "" : "#HttpOnly_") + (sub ? "." : "") + host + (sub ? "\tTRUE\t" : "\tFALSE\t") +
                    path + (rng() % 2 ? "\tTRUE\t" : "\tFALSE\t") + expiry + "\t" + name + "\t" +
                    random_token(rng, 0, 8, "abcXYZ019=-.") + "\n";
        }
        auto imported = CookieJar::import_netscape(text);
        if (!imported.errors.empty() || imported.jar.export_netscape() != text) ++problems;
    }
    const std::string fig = std::string(kNetscapeHeader) + "twitter.com\tFALSE\t/\tFALSE\t0\tlang\tar\n";
    auto round = CookieJar::import_netscape(fig);
    bool fig_ok = round.errors.empty() && round.jar.export_netscape() == fig;
    std::string detail = "200 jars, " + std::to_string(problems) + " differences; lang=ar line " +
                         (fig_ok ? "byte-exact" : "DIFFERS");
    return problems == 0 && fig_ok ? Outcome{true, detail} : fail(detail);
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        double limit_seconds;  // 0 = no limit
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "negotiation exchanges", 1.0, negotiation_exchanges},
        {2, "bias reproduction", 5.0, bias_reproduction},
        {3, "fix efficacy", 5.0, fix_efficacy},
        {4, "violation round-trip", 2.0, violation_round_trip},
        {5, "selection oracle", 0.0, selection_oracle},
        {6, "store integrity", 0.0, store_integrity},
        {7, "netscape format", 0.0, netscape_format},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.ok && c.limit_seconds > 0 && secs >= c.limit_seconds) {
            o = fail(o.detail + "; over time limit");
        }
        if (!o.ok) ++failures;
        std::printf("%s criterion %d (%s): %s [%.3f s]\n", o.ok ? "PASS" : "FAIL", c.number, c.name,
                    o.detail.c_str(), secs);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures;
}
