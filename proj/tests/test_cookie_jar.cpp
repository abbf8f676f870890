#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "cookiearc/cookie_jar.hpp"
#include "test_support.hpp"

using namespace cookiearc;
using cookiearc::testing::random_token;
using cookiearc::testing::reference_time;

namespace {

const CanonicalUri kRoot = canonicalize("https://twitter.com/");

Cookie lang_cookie(std::string value, Timestamp now = reference_time()) {
    return *parse_set_cookie("lang=" + value + "; Path=/", canonicalize("https://twitter.com/?lang=" + value),
                             now);
}

Cookie random_cookie(std::mt19937& rng, Timestamp now) {
    static const std::vector<std::string> hosts = {"twitter.com", "www.twitter.com", "example.com", "a.example.com"};
    static const std::vector<std::string> paths = {"/", "/i", "/i/x", "/page"};
    Cookie c;
    c.name = random_token(rng, 1, 3, "abcdef");
    c.value = random_token(rng, 0, 6, "abcXYZ0123=-");
    c.domain = hosts[rng() % hosts.size()];
    c.host_only = rng() % 2 == 0;
    c.path = paths[rng() % paths.size()];
    c.secure = rng() % 3 == 0;
    c.http_only = rng() % 4 == 0;
    c.created_at = now;
    switch (rng() % 3) {
        case 0: break;
        case 1: c.expires_at = now + Seconds{static_cast<long>(rng() % 200) - 50}; break;
        default: c.expires_at = now + Seconds{static_cast<long>(rng() % 100000)}; break;
    }
    return c;
}

CookieJar random_jar(std::mt19937& rng, Timestamp now, JarPolicy policy = {}) {
    CookieJar jar(policy);
    for (int i = 0, n = static_cast<int>(rng() % 12); i < n; ++i) jar.store(random_cookie(rng, now), now);
    return jar;
}

// Identity of a jar entry apart from its creation time, which Netscape files
// do not carry.
using EntryView = std::tuple<std::string, std::string, bool, std::string, std::optional<Timestamp>, bool, bool,
                             std::string>;

std::multiset<EntryView> view(const CookieJar& jar) {
    std::multiset<EntryView> out;
    for (const auto& c : jar.entries()) {
        out.emplace(c.name, c.domain, c.host_only, c.path, c.expires_at, c.secure, c.http_only, c.value);
    }
    return out;
}

}  // namespace

TEST(CookieJar, SessionCookiePersistsWithoutCap) {
    CookieJar jar;
    auto t = reference_time();
    jar.store(lang_cookie("ar"), t);
    EXPECT_EQ(jar.cookies_for(kRoot, t + Seconds{86400 * 365}), (std::vector<CookiePair>{{"lang", "ar"}}));
}

TEST(CookieJar, ZeroCapStoresNothing) {
    CookieJar jar(JarPolicy::capped(Seconds{0}));
    jar.store(lang_cookie("ar"), reference_time());
    EXPECT_TRUE(jar.empty());
    EXPECT_TRUE(jar.cookies_for(kRoot, reference_time()).empty());
}

TEST(CookieJar, OverwriteKeepsSingleEntry) {
    CookieJar jar;
    auto t = reference_time();
    jar.store(lang_cookie("fr", t), t);
    jar.store(lang_cookie("kn", t + Seconds{5}), t + Seconds{5});
    ASSERT_EQ(jar.size(), 1u);
    const auto* c = jar.find("lang", "twitter.com", "/");
    ASSERT_NE(c, nullptr);
    EXPECT_EQ(c->value, "kn");
    EXPECT_EQ(c->created_at, t);
}

TEST(CookieJar, ExpiredStoreDeletesKey) {
    CookieJar jar;
    auto t = reference_time();
    jar.store(lang_cookie("fr"), t);
    auto gone = lang_cookie("fr");
    gone.expires_at = t;
    jar.store(gone, t);
    EXPECT_TRUE(jar.empty());
}

TEST(CookieJar, CookiesForScope) {
    CookieJar jar;
    auto t = reference_time();
    jar.store(lang_cookie("ar"), t);
    EXPECT_EQ(jar.cookies_for(kRoot, t), (std::vector<CookiePair>{{"lang", "ar"}}));
    EXPECT_TRUE(jar.cookies_for(canonicalize("https://example.com/"), t).empty());
    EXPECT_TRUE(jar.cookies_for(canonicalize("https://www.twitter.com/"), t).empty());

    CookieJar expiring;
    auto c = lang_cookie("ar");
    c.expires_at = t + Seconds{10};
    expiring.store(c, t);
    EXPECT_EQ(expiring.cookies_for(kRoot, t + Seconds{9}).size(), 1u);
    EXPECT_TRUE(expiring.cookies_for(kRoot, t + Seconds{10}).empty());
    EXPECT_TRUE(expiring.cookies_for(kRoot, t + Seconds{11}).empty());
}

TEST(CookieJar, OrderingAndSecure) {
    CookieJar jar;
    auto t = reference_time();
    auto uri = canonicalize("https://www.twitter.com/i/sidebar");
    jar.store(*parse_set_cookie("a=1; Path=/", uri, t), t);
    jar.store(*parse_set_cookie("b=2; Path=/i; Domain=twitter.com", uri, t + Seconds{1}), t + Seconds{1});
    jar.store(*parse_set_cookie("c=3; Path=/; Secure", uri, t + Seconds{2}), t + Seconds{2});
    EXPECT_EQ(jar.cookie_header_for(uri, t), "b=2; a=1; c=3");
    EXPECT_EQ(jar.cookie_header_for(canonicalize("http://www.twitter.com/i/x"), t), "b=2; a=1");
    EXPECT_EQ(jar.cookie_header_for(canonicalize("https://twitter.com/i"), t), "b=2");
}

TEST(CookieJar, PruneExpiredEntries) {
    CookieJar jar;
    auto t = reference_time();
    for (const char* name : {"a", "b", "c"}) {
        Cookie c = lang_cookie("x");
        c.name = name;
        c.expires_at = t + Seconds{5};
        jar.store(c, t);
    }
    ASSERT_EQ(jar.size(), 3u);
    jar.prune(t + Seconds{5});
    EXPECT_TRUE(jar.empty());
    EXPECT_EQ(jar.last_prune(), t + Seconds{5});
}

TEST(CookieJar, PruneIsIdempotent) {
    std::mt19937 rng(500);
    auto t = reference_time();
    for (int i = 0; i < 500; ++i) {
        auto jar = random_jar(rng, t);
        auto at = t + Seconds{static_cast<long>(rng() % 300)};
        jar.prune(at);
        auto once = jar.export_netscape();
        auto once_view = view(jar);
        jar.prune(at);
        EXPECT_EQ(jar.export_netscape(), once);
        EXPECT_EQ(view(jar), once_view);
    }
}

TEST(CookieJar, PruneMatchesLinearScan) {
    std::mt19937 rng(501);
    auto t = reference_time();
    for (int i = 0; i < 500; ++i) {
        auto jar = random_jar(rng, t);
        auto before = jar.entries();
        auto at = t + Seconds{static_cast<long>(rng() % 300)};
        jar.prune(at);
        std::multiset<EntryView> expected;
        for (const auto& c : before) {
            if (!c.expires_at || *c.expires_at > at) {
                expected.emplace(c.name, c.domain, c.host_only, c.path, c.expires_at, c.secure, c.http_only,
                                 c.value);
            }
        }
        EXPECT_EQ(view(jar), expected);
    }
}

TEST(CookieJar, CapBoundsEmissionTime) {
    std::mt19937 rng(502);
    auto t = reference_time();
    for (long cap : {0L, 1L, 30L, 300L}) {
        CookieJar jar(JarPolicy::capped(Seconds{cap}));
        std::map<std::string, Timestamp> stored_at;
        for (int step = 0; step < 200; ++step) {
            auto now = t + Seconds{step};
            if (rng() % 3 == 0) {
                auto c = lang_cookie("x", now);
                c.name = random_token(rng, 1, 1, "abc");
                jar.store(c, now);
                stored_at[c.name] = now;
            }
            for (const auto& [name, value] : jar.cookies_for(kRoot, now)) {
                EXPECT_LE(now - stored_at.at(name), Seconds{cap}) << name;
            }
        }
    }
}

TEST(CookieJar, NoDuplicateNamesAndOneEntryPerKey) {
    std::mt19937 rng(503);
    auto t = reference_time();
    for (int i = 0; i < 300; ++i) {
        auto jar = random_jar(rng, t);
        std::set<std::tuple<std::string, std::string, std::string>> keys;
        for (const auto& c : jar.entries()) EXPECT_TRUE(keys.emplace(c.name, c.domain, c.path).second);
        for (const auto* u : {"https://twitter.com/i/x", "https://www.twitter.com/", "https://a.example.com/page"}) {
            std::set<std::string> names;
            for (const auto& [name, value] : jar.cookies_for(canonicalize(u), t)) {
                EXPECT_TRUE(names.insert(name).second) << name;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Netscape format

TEST(Netscape, SessionLangCookieLine) {
    CookieJar jar;
    jar.store(lang_cookie("ar"), reference_time());
    EXPECT_EQ(jar.export_netscape(), std::string(kNetscapeHeader) + "twitter.com\tFALSE\t/\tFALSE\t0\tlang\tar\n");
}

TEST(Netscape, EmptyJarIsHeaderOnly) { EXPECT_EQ(CookieJar{}.export_netscape(), kNetscapeHeader); }

TEST(Netscape, DomainAndHttpOnlyEncoding) {
    CookieJar jar;
    auto t = reference_time();
    auto uri = canonicalize("https://www.twitter.com/");
    jar.store(*parse_set_cookie("a=1; Domain=twitter.com; Secure; HttpOnly; Max-Age=60", uri, t), t);
    auto expiry = std::to_string((t + Seconds{60}).time_since_epoch().count());
    EXPECT_EQ(jar.export_netscape(),
              std::string(kNetscapeHeader) + "#HttpOnly_.twitter.com\tTRUE\t/\tTRUE\t" + expiry + "\ta\t1\n");
}

TEST(Netscape, ImportExportIdentity) {
    std::mt19937 rng(200);
    auto t = reference_time();
    for (int i = 0; i < 200; ++i) {
        auto jar = random_jar(rng, t);
        auto text = jar.export_netscape();
        auto imported = CookieJar::import_netscape(text);
        EXPECT_TRUE(imported.errors.empty());
        EXPECT_EQ(imported.jar.export_netscape(), text);
        EXPECT_EQ(view(imported.jar), view(jar));
    }
}

TEST(Netscape, LangLineRoundTripsByteExactly) {
    const std::string line = "twitter.com\tFALSE\t/\tFALSE\t0\tlang\tar\n";
    auto imported = CookieJar::import_netscape(std::string(kNetscapeHeader) + line);
    ASSERT_TRUE(imported.errors.empty());
    EXPECT_EQ(imported.jar.export_netscape(), std::string(kNetscapeHeader) + line);
    EXPECT_EQ(imported.jar.cookie_header_for(kRoot, reference_time()), "lang=ar");
}

TEST(Netscape, MalformedRowsReportedAndSkipped) {
    const std::string text =
        "# comment\n"
        "twitter.com\tFALSE\t/\tFALSE\t0\tlang\tar\n"
        "too\tfew\tfields\n"
        "\n"
        "twitter.com\tMAYBE\t/\tFALSE\t0\ta\tb\n"
        "twitter.com\tFALSE\t/\tFALSE\tsoon\ta\tb\n"
        ".twitter.com\tTRUE\t/\tFALSE\t0\tok\t1\n";
    auto imported = CookieJar::import_netscape(text);
    std::vector<std::size_t> lines;
    for (const auto& e : imported.errors) lines.push_back(e.line);
    EXPECT_EQ(lines, (std::vector<std::size_t>{3, 5, 6}));
    EXPECT_EQ(imported.jar.size(), 2u);
}

TEST(Netscape, ImportKeepsPolicy) {
    auto imported = CookieJar::import_netscape("twitter.com\tFALSE\t/\tFALSE\t0\tlang\tar\n",
                                               JarPolicy::capped(Seconds{0}));
    EXPECT_TRUE(imported.errors.empty());
    EXPECT_EQ(imported.jar.policy().max_ttl, Seconds{0});
}
