#include "cookiearc/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace cookiearc {

using nlohmann::json;

namespace {

std::optional<std::string> html_lang_attribute(std::string_view body) {
    auto lowered = to_lower(body.substr(0, std::min<std::size_t>(body.size(), 4096)));
    std::size_t pos = 0;
    while ((pos = lowered.find("<html", pos)) != std::string::npos) {
        auto after = pos + 5;
        if (after < lowered.size() && lowered[after] != '>' && !std::isspace(static_cast<unsigned char>(lowered[after]))) {
            pos = after;
            continue;
        }
        auto close = lowered.find('>', after);
        auto tag = std::string_view(lowered).substr(after, close == std::string::npos ? std::string::npos : close - after);
        std::size_t at = 0;
        while ((at = tag.find("lang", at)) != std::string_view::npos) {
            bool word_start = at == 0 || std::isspace(static_cast<unsigned char>(tag[at - 1]));
            auto rest = trim(tag.substr(at + 4));
            if (word_start && !rest.empty() && rest.front() == '=') {
                rest = trim(rest.substr(1));
                if (rest.empty()) return std::nullopt;
                std::string_view value;
                if (rest.front() == '"' || rest.front() == '\'') {
                    auto end = rest.find(rest.front(), 1);
                    value = rest.substr(1, end == std::string_view::npos ? std::string_view::npos : end - 1);
                } else {
                    value = rest.substr(0, rest.find_first_of(" \t\r\n"));
                }
                value = trim(value);
                if (value.empty()) return std::nullopt;
                return std::string(value);
            }
            at += 4;
        }
        return std::nullopt;
    }
    return std::nullopt;
}

std::string fmt_fraction(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return buf;
}

}  // namespace

LanguageOf language_of(const ArchiveRecord& record) {
    LanguageOf out;
    std::optional<std::string> header;
    if (auto h = record.response_headers.get("content-language")) {
        auto first = trim(std::string_view(*h).substr(0, h->find(',')));
        if (!first.empty()) header = to_lower(first);
    }
    auto body = html_lang_attribute(record.body);
    if (body) body = to_lower(*body);

    if (header) {
        out.tag = header;
        if (body && primary_subtag(*body) != primary_subtag(*header)) {
            out.warning = "record " + std::to_string(record.id) + ": Content-Language \"" + *header +
                          "\" disagrees with <html lang=\"" + *body + "\">";
        }
    } else {
        out.tag = body;
    }
    return out;
}

double LanguageDistribution::fraction(const std::string& tag) const {
    if (total == 0) return 0.0;
    auto it = counts.find(tag);
    return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

std::optional<std::string> LanguageDistribution::modal(const std::vector<std::string>& exclude) const {
    std::optional<std::string> best;
    std::size_t best_count = 0;
    for (const auto& [tag, count] : counts) {
        if (std::find(exclude.begin(), exclude.end(), tag) != exclude.end()) continue;
        if (count > best_count) {
            best = tag;
            best_count = count;
        }
    }
    return best;
}

double LanguageDistribution::entropy_bits() const {
    if (total == 0) return 0.0;
    double h = 0.0;
    for (const auto& [tag, count] : counts) {
        if (count == 0) continue;
        double p = static_cast<double>(count) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h == 0.0 ? 0.0 : h;
}

LanguageDistribution distribution(const ArchiveStore& store, const CanonicalUri& uri) {
    LanguageDistribution dist{uri, {}, 0};
    for (const auto& entry : store.lookup(uri)) {
        auto rec = store.get(entry.id);
        std::string key(kUnknownLanguage);
        if (rec) {
            if (auto lang = language_of(*rec).tag) key = primary_subtag(*lang);
        }
        ++dist.counts[key];
        ++dist.total;
    }
    return dist;
}

ViolationReport detect_violations(const CompositeMemento& composite) {
    ViolationReport report;
    report.root_uri = composite.root.record.uri;
    std::set<std::string> present;

    if (auto lang = language_of(composite.root.record).tag) {
        report.root_language = primary_subtag(*lang);
        present.insert(*report.root_language);
    }
    for (const auto& part : composite.parts) {
        std::optional<std::string> tag;
        if (part.selection) {
            if (auto lang = language_of(part.selection->record).tag) tag = primary_subtag(*lang);
        }
        if (!tag) {
            report.unresolved_parts.push_back(part.uri);
            continue;
        }
        present.insert(*tag);
        if (report.root_language && *tag != *report.root_language) {
            report.violating_parts.push_back({part.uri, *tag});
        }
    }
    report.languages_present.assign(present.begin(), present.end());
    report.verdict = present.size() > 1 ? Verdict::kDefaced : Verdict::kConsistent;
    return report;
}

const char* to_string(Verdict v) { return v == Verdict::kDefaced ? "defaced" : "consistent"; }

BiasReport bias_report(const ArchiveStore& store_a, const ArchiveStore& store_b,
                       const CanonicalUri& uri, std::string label_a, std::string label_b) {
    return {distribution(store_a, uri), distribution(store_b, uri), std::move(label_a),
            std::move(label_b)};
}

json distribution_to_json(const LanguageDistribution& dist) {
    json counts = json::object();
    json fractions = json::object();
    for (const auto& [tag, count] : dist.counts) {
        counts[tag] = count;
        fractions[tag] = dist.fraction(tag);
    }
    auto modal = dist.modal();
    return {{"uri", dist.uri.to_string()},
            {"total", dist.total},
            {"counts", counts},
            {"fractions", fractions},
            {"modal", modal ? json(*modal) : json(nullptr)},
            {"entropy_bits", dist.entropy_bits()}};
}

std::string distribution_to_text(const LanguageDistribution& dist) {
    std::ostringstream out;
    out << "uri: " << dist.uri.to_string() << "\n";
    out << "captures: " << dist.total << "\n";
    std::vector<std::pair<std::string, std::size_t>> rows(dist.counts.begin(), dist.counts.end());
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    for (const auto& [tag, count] : rows) {
        out << "  " << tag << "\t" << count << "\t" << fmt_fraction(dist.fraction(tag)) << "\n";
    }
    out << "entropy_bits: " << fmt_fraction(dist.entropy_bits()) << "\n";
    return out.str();
}

std::string BiasReport::to_text() const {
    std::ostringstream out;
    std::set<std::string> tags;
    for (const auto& [t, c] : a.counts) tags.insert(t);
    for (const auto& [t, c] : b.counts) tags.insert(t);
    out << "uri: " << a.uri.to_string() << "\n";
    out << "language\t" << label_a << "\t" << label_b << "\n";
    for (const auto& t : tags) {
        out << t << "\t" << fmt_fraction(a.fraction(t)) << "\t" << fmt_fraction(b.fraction(t)) << "\n";
    }
    out << "captures\t" << a.total << "\t" << b.total << "\n";
    out << "modal\t" << a.modal().value_or("-") << "\t" << b.modal().value_or("-") << "\n";
    out << "entropy_bits\t" << fmt_fraction(a.entropy_bits()) << "\t" << fmt_fraction(b.entropy_bits())
        << "\n";
    out << "entropy_difference\t" << fmt_fraction(entropy_difference()) << "\n";
    return out.str();
}

json BiasReport::to_json() const {
    return {{"uri", a.uri.to_string()},
            {label_a, distribution_to_json(a)},
            {label_b, distribution_to_json(b)},
            {"labels", {label_a, label_b}},
            {"entropy_difference", entropy_difference()}};
}

json violation_report_to_json(const ViolationReport& report) {
    json violating = json::array();
    for (const auto& p : report.violating_parts) violating.push_back({{"uri", p.uri.to_string()}, {"language", p.tag}});
    json unresolved = json::array();
    for (const auto& u : report.unresolved_parts) unresolved.push_back(u.to_string());
    return {{"root", report.root_uri.to_string()},
            {"root_language", report.root_language ? json(*report.root_language) : json(nullptr)},
            {"languages_present", report.languages_present},
            {"violating_parts", violating},
            {"unresolved_parts", unresolved},
            {"verdict", to_string(report.verdict)}};
}

std::string violation_report_to_text(const ViolationReport& report) {
    std::ostringstream out;
    out << "root: " << report.root_uri.to_string() << " ["
        << report.root_language.value_or(std::string(kUnknownLanguage)) << "]\n";
    out << "languages:";
    for (const auto& l : report.languages_present) out << " " << l;
    out << "\n";
    for (const auto& p : report.violating_parts) out << "  violating " << p.uri.to_string() << " [" << p.tag << "]\n";
    for (const auto& u : report.unresolved_parts) out << "  unresolved " << u.to_string() << "\n";
    out << "verdict: " << to_string(report.verdict) << "\n";
    return out.str();
}

}  // namespace cookiearc
