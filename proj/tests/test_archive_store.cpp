#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cookiearc/archive_store.hpp"
#include "test_support.hpp"

using namespace cookiearc;
using cookiearc::testing::cookie_key;
using cookiearc::testing::make_record;
using cookiearc::testing::random_token;
using cookiearc::testing::reference_time;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = fs::temp_directory_path() / ("cookiearc-test-" + std::to_string(rng()));
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::vector<std::string> kUris = {"https://twitter.com/", "https://twitter.com/i/sidebar",
                                        "https://twitter.com/page/2", "https://example.com/a?b=c"};

ArchiveRecord random_record(std::mt19937& rng) {
    auto when = reference_time() + Seconds{static_cast<long>(rng() % 20)};
    auto lang = random_token(rng, 2, 2, "abc");
    VariantKey key;
    if (rng() % 2) key = cookie_key(rng() % 3 ? "lang=" + lang : "");
    std::string body;
    if (rng() % 4 == 0) {
        // Bodies may hold anything, including newlines and NUL bytes.
        body = random_token(rng, 1, 40, std::string_view("ab\n\r\t{}\"\\ \0x", 13));
    }
    auto rec = make_record(kUris[rng() % kUris.size()], when, lang, key, body);
    if (rng() % 5 == 0) rec.response_status = 0;
    if (rng() % 2) rec.request_headers.add("Cookie", "lang=" + lang);
    return rec;
}

}  // namespace

// ---------------------------------------------------------------------------
// Variant keys

TEST(VariantKey, CookieReducedToContentNames) {
    Headers req{{"Cookie", "lang=kn; _sess=abc"}};
    Headers resp{{"Vary", "Cookie"}};
    EXPECT_EQ(derive_variant_key(req, resp, VariantConfig{}), cookie_key("lang=kn"));
}

TEST(VariantKey, NoVaryNoImplied) {
    VariantConfig cfg{{"lang"}, true, {}};
    EXPECT_TRUE(derive_variant_key(Headers{{"Cookie", "lang=kn"}}, Headers{}, cfg).empty());
}

TEST(VariantKey, ImpliedCookieWithoutHeader) {
    VariantConfig cfg{{"lang"}, true, {"cookie"}};
    EXPECT_EQ(derive_variant_key(Headers{}, Headers{}, cfg), cookie_key(""));
}

TEST(VariantKey, MoreDimensions) {
    VariantConfig cfg{{"lang", "theme"}, true, {}};
    Headers req{{"Cookie", "theme=dark; x=1; lang=ar"}, {"Accept-Language", "ur"}};
    auto key = derive_variant_key(req, Headers{{"Vary", "Accept-Language, Cookie"}}, cfg);
    EXPECT_EQ(key.pairs, (std::vector<std::pair<std::string, std::string>>{{"accept-language", "ur"},
                                                                           {"cookie", "lang=ar;theme=dark"}}));
    EXPECT_EQ(key.to_string(), "accept-language=ur&cookie=lang=ar;theme=dark");

    auto star = derive_variant_key(req, Headers{{"Vary", "*"}}, cfg);
    ASSERT_EQ(star.pairs.size(), 1u);
    EXPECT_EQ(star.pairs[0].first, kVaryAllDimension);

    VariantConfig ignore{{"lang"}, false, {"cookie"}};
    EXPECT_EQ(derive_variant_key(req, Headers{{"Vary", "Accept-Language"}}, ignore), cookie_key("lang=ar"));
}

TEST(VariantKey, ConfigJsonRoundTrip) {
    VariantConfig cfg{{"Lang", "lang", "theme"}, false, {"Cookie"}};
    EXPECT_EQ(variant_config_from_json(variant_config_to_json(cfg)), cfg.normalized());
}

// ---------------------------------------------------------------------------
// Store

TEST(ArchiveStore, SequentialIds) {
    auto store = ArchiveStore::in_memory();
    for (std::uint64_t i = 1; i <= 3; ++i) {
        auto rec = make_record("https://twitter.com/", reference_time(), "en");
        rec.id = 99;
        EXPECT_EQ(store.append(rec), i);
    }
}

TEST(ArchiveStore, ReopenIsByteIdentical) {
    TempDir tmp;
    auto body = std::string("line1\nline2\0tail", 16);
    {
        auto store = ArchiveStore::create(tmp.path(), VariantConfig{{"lang"}, true, {"cookie"}});
        auto rec = make_record("https://twitter.com/", reference_time(), "en", cookie_key("lang=en"), body);
        rec.request_headers.add("Cookie", "lang=en");
        store.append(rec);
    }
    auto reopened = ArchiveStore::open(tmp.path());
    auto rec = reopened.get(1);
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->body, body);
    EXPECT_EQ(rec->variant_key, cookie_key("lang=en"));
    EXPECT_EQ(rec->response_headers.get("content-language"), "en");
    EXPECT_TRUE(reopened.verify().empty());
}

TEST(ArchiveStore, CreateRefusesExistingArchive) {
    TempDir tmp;
    { ArchiveStore::create(tmp.path()); }
    EXPECT_THROW(ArchiveStore::create(tmp.path()), StoreError);
    EXPECT_THROW(ArchiveStore::open(tmp.path() / "missing"), StoreError);
}

TEST(ArchiveStore, DuplicatesKept) {
    auto store = ArchiveStore::in_memory();
    auto rec = make_record("https://twitter.com/", reference_time(), "en", cookie_key("lang=en"));
    store.append(rec);
    store.append(rec);
    auto entries = store.lookup(canonicalize("https://twitter.com/"));
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].id, 1u);
    EXPECT_EQ(entries[1].id, 2u);
}

TEST(ArchiveStore, UnknownUri) {
    auto store = ArchiveStore::in_memory();
    store.append(make_record("https://twitter.com/", reference_time(), "en"));
    EXPECT_TRUE(store.lookup(canonicalize("https://twitter.com/x")).empty());
    EXPECT_FALSE(store.get(2));
    EXPECT_FALSE(store.get(0));
}

TEST(ArchiveStore, SameSecondDifferentVariantsInIdOrder) {
    auto store = ArchiveStore::in_memory();
    store.append(make_record("https://twitter.com/", reference_time() + Seconds{1}, "en"));
    store.append(make_record("https://twitter.com/", reference_time(), "kn", cookie_key("lang=kn")));
    store.append(make_record("https://twitter.com/", reference_time(), "ar", cookie_key("lang=ar")));
    auto entries = store.lookup(canonicalize("https://twitter.com/"));
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].id, 2u);
    EXPECT_EQ(entries[1].id, 3u);
    EXPECT_EQ(entries[2].id, 1u);
}

TEST(ArchiveStore, LookupMatchesLinearScan) {
    std::mt19937 rng(1000);
    for (int i = 0; i < 1000; ++i) {
        auto store = ArchiveStore::in_memory();
        std::vector<ArchiveRecord> appended;
        for (int k = 0, n = static_cast<int>(rng() % 15); k < n; ++k) {
            auto rec = random_record(rng);
            rec.id = store.append(rec);
            appended.push_back(rec);
        }
        for (const auto& u : kUris) {
            auto uri = canonicalize(u);
            std::vector<IndexEntry> expected;
            for (const auto& r : appended) {
                if (r.uri == uri) expected.push_back({r.uri, r.datetime, r.id, r.response_status, r.variant_key});
            }
            // Stable insertion sort by datetime keeps id order on ties.
            for (std::size_t a = 1; a < expected.size(); ++a) {
                for (std::size_t b = a; b > 0 && expected[b].datetime < expected[b - 1].datetime; --b) {
                    std::swap(expected[b], expected[b - 1]);
                }
            }
            ASSERT_EQ(store.lookup(uri), expected);
        }
    }
}

TEST(ArchiveStore, ReopenRoundTripOnRandomArchives) {
    std::mt19937 rng(200);
    for (int i = 0; i < 200; ++i) {
        TempDir tmp;
        VariantConfig cfg{{"lang"}, rng() % 2 == 0, {"cookie"}};
        auto store = ArchiveStore::create(tmp.path(), cfg);
        for (int k = 0, n = static_cast<int>(rng() % 10); k < n; ++k) store.append(random_record(rng));
        auto reopened = ArchiveStore::open(tmp.path());
        ASSERT_EQ(reopened.records(), store.records());
        EXPECT_EQ(reopened.config(), store.config());
        EXPECT_EQ(reopened.uris(), store.uris());
        for (const auto& u : kUris) EXPECT_EQ(reopened.lookup(canonicalize(u)), store.lookup(canonicalize(u)));
        // Appending after reopen continues the id sequence.
        EXPECT_EQ(reopened.append(random_record(rng)), store.size() + 1);
    }
}

TEST(ArchiveStore, OnDiskLayout) {
    TempDir tmp;
    {
        auto store = ArchiveStore::create(tmp.path());
        store.append(make_record("https://twitter.com/", reference_time(), "kn", cookie_key("lang=kn")));
    }
    auto meta = nlohmann::json::parse(slurp(tmp.path() / "meta.json"));
    EXPECT_EQ(meta["format_version"], 1);
    auto index = slurp(tmp.path() / "index.cdxj");
    EXPECT_EQ(index.rfind("https://twitter.com/ 20190101120000 {", 0), 0u) << index;
    auto fields = nlohmann::json::parse(index.substr(index.find('{')));
    EXPECT_EQ(fields["id"], 1);
    EXPECT_EQ(fields["offset"], 0);
    EXPECT_EQ(fields["status"], 200);
    EXPECT_EQ(fields["variant"], nlohmann::json::parse(R"([["cookie", "lang=kn"]])"));
}

TEST(ArchiveStore, CorruptionDetectedOnOpen) {
    auto build = [](const fs::path& dir) {
        auto store = ArchiveStore::create(dir);
        store.append(make_record("https://twitter.com/", reference_time(), "en"));
        store.append(make_record("https://twitter.com/i/sidebar", reference_time(), "en"));
    };
    {
        TempDir tmp;
        build(tmp.path());
        auto index = slurp(tmp.path() / "index.cdxj");
        std::ofstream(tmp.path() / "index.cdxj", std::ios::trunc) << index.substr(0, index.find('\n') + 1);
        EXPECT_THROW(ArchiveStore::open(tmp.path()), StoreError);
    }
    {
        TempDir tmp;
        build(tmp.path());
        auto records = slurp(tmp.path() / "records.dat");
        std::ofstream(tmp.path() / "records.dat", std::ios::trunc | std::ios::binary)
            << records.substr(0, records.size() - 5);
        EXPECT_THROW(ArchiveStore::open(tmp.path()), StoreError);
    }
    {
        TempDir tmp;
        build(tmp.path());
        auto index = slurp(tmp.path() / "index.cdxj");
        auto pos = index.find("i/sidebar");
        index.replace(pos, 9, "i/notific");
        std::ofstream(tmp.path() / "index.cdxj", std::ios::trunc) << index;
        EXPECT_THROW(ArchiveStore::open(tmp.path()), StoreError);
    }
}

TEST(ArchiveStore, VerifyFlagsStaleVariantKeys) {
    auto store = ArchiveStore::in_memory(VariantConfig{{"lang"}, true, {"cookie"}});
    auto good = make_record("https://twitter.com/", reference_time(), "kn", cookie_key("lang=kn"));
    good.request_headers.add("Cookie", "lang=kn");
    store.append(good);
    EXPECT_TRUE(store.verify().empty());
    auto bad = good;
    bad.variant_key = cookie_key("lang=fr");
    store.append(bad);
    EXPECT_EQ(store.verify().size(), 1u);
}
