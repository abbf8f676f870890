#pragma once

// End-to-end experiment: crawl the simulated origin under several cookie
// policies, compare the language distributions of the root captures, and
// reconstruct composite mementos under the matching replay mode.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cookiearc/analyzer.hpp"
#include "cookiearc/archive_store.hpp"
#include "cookiearc/cookie_jar.hpp"
#include "cookiearc/crawler.hpp"
#include "cookiearc/origin_sim.hpp"
#include "cookiearc/replay.hpp"

namespace cookiearc {

/// One crawl + replay pipeline. A policy with a TTL cap is a "fixed"
/// pipeline and must produce no defaced composites; an uncapped one is
/// "faithful" and is expected to.
struct PipelineSpec {
    std::string name;
    JarPolicy jar;
    ReplayMode replay;

    [[nodiscard]] bool is_fixed() const noexcept { return jar.max_ttl.has_value(); }
};

struct DemoPlan {
    std::size_t sessions = 3;
    std::vector<PipelineSpec> policies{
        {"faithful", JarPolicy::faithful(), ReplayMode::baseline()},
        {"fixed", JarPolicy::capped(Seconds{0}), ReplayMode::variant_aware()}};
    std::string seed = "https://twitter.com/";
    std::filesystem::path out_dir;
    SiteConfig site;
    std::size_t max_pages = 120;
    std::size_t revisit_root_every = 5;
    Seconds clock_step{1};
    Seconds session_gap{86400};
    Timestamp start = std::chrono::sys_days{std::chrono::year{2019} / 1 / 1} + std::chrono::hours{12};

    /// Throws std::invalid_argument.
    void validate() const;
};

/// A capture taken with an explicit `lang` cookie (or none) at a fixed
/// offset from the scenario's reference time.
struct ScriptedFetch {
    std::string path;
    std::optional<std::string> lang_cookie;
    Seconds offset{0};
};

struct DefacementScenario {
    CanonicalUri root;
    Timestamp target{};
    std::string root_language;
    std::vector<ScriptedFetch> schedule;
};

/// Root captured in Portuguese at the target time; each fragment's nearest
/// capture is English or Urdu, with a Portuguese capture further away.
DefacementScenario defacement_scenario(const SiteConfig& site, Timestamp target);

/// Replays the schedule against the in-process origin and appends the
/// captures to `store` (keys derived with `store.config()`).
void record_scenario(const DefacementScenario& scenario, const SiteConfig& site, ArchiveStore& store);

struct PipelineOutcome {
    std::string name;
    bool fixed = false;
    std::size_t composites = 0;
    std::size_t defaced = 0;
    LanguageDistribution root_distribution;
};

struct ScenarioOutcome {
    ViolationReport baseline;
    ViolationReport variant_aware;
};

struct DemoOutcome {
    std::vector<PipelineOutcome> pipelines;
    ScenarioOutcome scenario;
    bool contract_holds = false;
    nlohmann::json summary;
    std::string text;
};

/// Every root capture of `root` in `store` rebuilt as a composite under
/// `mode`, targeting the capture's own datetime. Variant-aware mode sends
/// the cookies the capture was made with.
std::vector<ViolationReport> audit_root_captures(const ArchiveStore& store, const CanonicalUri& root,
                                                 ReplayMode mode);

/// Throws std::invalid_argument for a bad plan (before any work) and
/// std::runtime_error / StoreError on I/O failure, after removing the files
/// it created.
DemoOutcome run_demo(const DemoPlan& plan);

}  // namespace cookiearc
