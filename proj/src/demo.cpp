#include "cookiearc/demo.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cookiearc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Removes everything the demo created unless release() is called.
class OutputGuard {
public:
    explicit OutputGuard(fs::path root) : root_(std::move(root)) {}
    ~OutputGuard() {
        if (released_) return;
        std::error_code ec;
        for (auto it = created_.rbegin(); it != created_.rend(); ++it) fs::remove_all(*it, ec);
    }
    void track(const fs::path& p) {
        if (!fs::exists(p)) created_.push_back(p);
    }
    void release() { released_ = true; }

private:
    fs::path root_;
    std::vector<fs::path> created_;
    bool released_ = false;
};

void write_text(OutputGuard& guard, const fs::path& path, const std::string& content) {
    guard.track(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out.flush()) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

void DemoPlan::validate() const {
    if (sessions < 1) throw std::invalid_argument("sessions must be >= 1");
    if (policies.empty()) throw std::invalid_argument("at least one policy is required");
    if (out_dir.empty()) throw std::invalid_argument("out_dir is required");
    site.validate();
    CrawlPolicy{JarPolicy{}, max_pages, revisit_root_every, clock_step, {}}.validate();
    for (const auto& p : policies) {
        if (p.name.empty() || p.name.find('/') != std::string::npos) {
            throw std::invalid_argument("policy names must be nonempty path segments");
        }
    }
    for (const auto* tag : {"pt", "ur"}) {
        if (std::find(site.languages.begin(), site.languages.end(), tag) == site.languages.end()) {
            throw std::invalid_argument(std::string("site must support \"") + tag +
                                        "\" for the defacement scenario");
        }
    }
}

DefacementScenario defacement_scenario(const SiteConfig& site, Timestamp target) {
    DefacementScenario s;
    s.root = canonicalize(site.origin() + "/");
    s.target = target;
    s.root_language = "pt";
    s.schedule.push_back({"/", "pt", Seconds{0}});
    s.schedule.push_back({"/", std::nullopt, Seconds{50}});
    auto fragments = fragment_paths(site);
    for (std::size_t k = 0; k < fragments.size(); ++k) {
        auto offset = static_cast<long>(k) + 1;
        if (k % 2 == 0) {
            s.schedule.push_back({fragments[k], std::nullopt, Seconds{offset + 1}});
        } else {
            s.schedule.push_back({fragments[k], "ur", Seconds{-offset}});
        }
        s.schedule.push_back({fragments[k], "pt", Seconds{k % 2 == 0 ? -40 - offset : 30 + offset}});
    }
    std::stable_sort(s.schedule.begin(), s.schedule.end(),
                     [](const ScriptedFetch& a, const ScriptedFetch& b) { return a.offset < b.offset; });
    return s;
}

void record_scenario(const DefacementScenario& scenario, const SiteConfig& site, ArchiveStore& store) {
    for (const auto& step : scenario.schedule) {
        HttpRequest req;
        req.uri = site.origin() + step.path;
        req.headers.add("User-Agent", "cookiearc-crawler/1.0");
        if (step.lang_cookie) req.headers.add("Cookie", "lang=" + *step.lang_cookie);
        auto resp = handle(req, site);

        ArchiveRecord rec;
        rec.uri = canonicalize(req.uri);
        rec.datetime = scenario.target + step.offset;
        rec.request_headers = req.headers;
        rec.response_status = resp.status;
        rec.response_headers = resp.headers;
        rec.body = resp.body;
        rec.variant_key = derive_variant_key(req.headers, resp.headers, store.config());
        store.append(std::move(rec));
    }
}

std::vector<ViolationReport> audit_root_captures(const ArchiveStore& store, const CanonicalUri& root,
                                                 ReplayMode mode) {
    std::vector<ViolationReport> reports;
    for (const auto& entry : store.lookup(root)) {
        auto rec = store.get(entry.id);
        if (!rec || rec->response_status != 200) continue;
        RequestContext ctx;
        if (mode.kind == ReplayKind::kVariantAware) {
            for (const auto& c : rec->request_headers.get_all("cookie")) ctx.headers.add("Cookie", c);
        }
        auto composite = reconstruct_composite(store, root, entry.datetime, mode, ctx, store.config());
        if (composite) reports.push_back(detect_violations(*composite));
    }
    return reports;
}

DemoOutcome run_demo(const DemoPlan& plan) {
    plan.validate();

    std::error_code ec;
    bool existed = fs::exists(plan.out_dir, ec);
    OutputGuard guard(plan.out_dir);
    if (existed && !fs::is_empty(plan.out_dir, ec)) {
        throw std::runtime_error("output directory " + plan.out_dir.string() + " is not empty");
    }
    if (!existed) {
        guard.track(plan.out_dir);
        fs::create_directories(plan.out_dir, ec);
        if (ec) throw std::runtime_error("cannot create " + plan.out_dir.string() + ": " + ec.message());
    }

    const VariantConfig variant{{"lang"}, true, {"cookie"}};
    auto root = canonicalize(plan.seed);
    const auto& site = plan.site;
    FetchFn fetch = [&site](const HttpRequest& r) { return handle(r, site); };

    DemoOutcome outcome;
    std::vector<ArchiveStore> stores;
    json pipelines = json::array();
    std::ostringstream text;

    for (const auto& spec : plan.policies) {
        auto dir = plan.out_dir / spec.name;
        guard.track(dir);
        auto store = ArchiveStore::create(dir, variant);
        CrawlPolicy policy{spec.jar, plan.max_pages, plan.revisit_root_every, plan.clock_step, variant};
        for (std::size_t s = 0; s < plan.sessions; ++s) {
            auto start = plan.start + plan.session_gap * static_cast<long>(s);
            for (auto& rec : crawl({plan.seed}, fetch, policy, start)) store.append(std::move(rec));
        }

        auto reports = audit_root_captures(store, root, spec.replay);
        PipelineOutcome po{spec.name, spec.is_fixed(), reports.size(), 0, distribution(store, root)};
        json report_json = json::array();
        for (const auto& r : reports) {
            if (r.verdict == Verdict::kDefaced) ++po.defaced;
            report_json.push_back(violation_report_to_json(r));
        }
        write_text(guard, plan.out_dir / ("violations_" + spec.name + ".json"), report_json.dump(2) + "\n");

        pipelines.push_back({{"name", spec.name},
                             {"fixed", po.fixed},
                             {"max_ttl_seconds", spec.jar.max_ttl ? json(spec.jar.max_ttl->count()) : json(nullptr)},
                             {"replay_mode", spec.replay.kind == ReplayKind::kBaseline ? "baseline" : "variant"},
                             {"composites", po.composites},
                             {"defaced", po.defaced},
                             {"distribution", distribution_to_json(po.root_distribution)}});
        text << "pipeline " << spec.name << (po.fixed ? " (fixed)" : " (faithful)") << ": "
             << po.defaced << "/" << po.composites << " composites defaced, modal non-default language "
             << po.root_distribution.modal({site.default_language}).value_or("-") << "\n";
        outcome.pipelines.push_back(std::move(po));
        stores.push_back(std::move(store));
    }

    json bias = json::array();
    for (std::size_t i = 1; i < stores.size(); ++i) {
        auto report = bias_report(stores[0], stores[i], root, plan.policies[0].name, plan.policies[i].name);
        auto stem = "bias_" + plan.policies[0].name + "_vs_" + plan.policies[i].name;
        write_text(guard, plan.out_dir / (stem + ".txt"), report.to_text());
        write_text(guard, plan.out_dir / (stem + ".json"), report.to_json().dump(2) + "\n");
        bias.push_back(report.to_json());
        text << "entropy " << plan.policies[0].name << " - " << plan.policies[i].name << " = "
             << report.entropy_difference() << " bits\n";
    }

    auto scenario_dir = plan.out_dir / "defacement";
    guard.track(scenario_dir);
    auto scenario_store = ArchiveStore::create(scenario_dir, variant);
    auto scenario = defacement_scenario(site, plan.start);
    record_scenario(scenario, site, scenario_store);
    auto ctx = RequestContext::with_cookie("lang=" + scenario.root_language);
    auto base = reconstruct_composite(scenario_store, scenario.root, scenario.target, ReplayMode::baseline(),
                                      ctx, variant);
    auto fixed = reconstruct_composite(scenario_store, scenario.root, scenario.target,
                                       ReplayMode::variant_aware(), ctx, variant);
    if (!base || !fixed) throw std::runtime_error("defacement scenario root not selectable");
    outcome.scenario = {detect_violations(*base), detect_violations(*fixed)};
    json scenario_json = {{"baseline", violation_report_to_json(outcome.scenario.baseline)},
                          {"variant_aware", violation_report_to_json(outcome.scenario.variant_aware)}};
    write_text(guard, plan.out_dir / "defacement_report.json", scenario_json.dump(2) + "\n");
    text << "defacement scenario: baseline " << to_string(outcome.scenario.baseline.verdict)
         << ", variant-aware " << to_string(outcome.scenario.variant_aware.verdict) << "\n";

    // Faithful pipelines (plus the scenario under baseline replay) must show
    // at least one violation; fixed pipelines (plus the scenario under
    // variant-aware replay) none.
    std::size_t faithful_violations = outcome.scenario.baseline.verdict == Verdict::kDefaced ? 1 : 0;
    std::size_t fixed_violations = outcome.scenario.variant_aware.verdict == Verdict::kDefaced ? 1 : 0;
    bool every_faithful_biased = true;
    for (const auto& p : outcome.pipelines) {
        if (p.fixed) {
            fixed_violations += p.defaced;
        } else {
            faithful_violations += p.defaced;
            every_faithful_biased = every_faithful_biased && p.defaced > 0;
        }
    }
    outcome.contract_holds = fixed_violations == 0 && faithful_violations > 0 && every_faithful_biased;
    text << "contract: " << (outcome.contract_holds ? "holds" : "VIOLATED") << "\n";

    outcome.summary = {{"pipelines", pipelines},
                       {"bias_reports", bias},
                       {"scenario", scenario_json},
                       {"faithful_violations", faithful_violations},
                       {"fixed_violations", fixed_violations},
                       {"contract_holds", outcome.contract_holds}};
    outcome.text = text.str();
    write_text(guard, plan.out_dir / "summary.json", outcome.summary.dump(2) + "\n");
    write_text(guard, plan.out_dir / "summary.txt", outcome.text);
    guard.release();
    return outcome;
}

}  // namespace cookiearc
