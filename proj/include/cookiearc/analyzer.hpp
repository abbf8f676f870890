#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cookiearc/archive_store.hpp"
#include "cookiearc/replay.hpp"

namespace cookiearc {

/// Bucket used for captures whose language cannot be determined.
inline constexpr std::string_view kUnknownLanguage = "unknown";

struct LanguageOf {
    std::optional<std::string> tag;  // lowercased; nullopt = unknown
    std::optional<std::string> warning;
};

/// Content-Language first, else the <html lang> attribute of the body.
/// Warns when both are present and disagree on the primary subtag.
LanguageOf language_of(const ArchiveRecord& record);

/// Captures per primary language subtag.
struct LanguageDistribution {
    CanonicalUri uri;
    std::map<std::string, std::size_t> counts;
    std::size_t total = 0;

    [[nodiscard]] double fraction(const std::string& tag) const;
    /// Most frequent tag not in `exclude`; ties go to the smaller tag.
    [[nodiscard]] std::optional<std::string> modal(const std::vector<std::string>& exclude = {}) const;
    /// Shannon entropy in bits.
    [[nodiscard]] double entropy_bits() const;
};

LanguageDistribution distribution(const ArchiveStore& store, const CanonicalUri& uri);

enum class Verdict { kConsistent, kDefaced };

struct ViolatingPart {
    CanonicalUri uri;
    std::string tag;
};

struct ViolationReport {
    CanonicalUri root_uri;
    std::optional<std::string> root_language;
    std::vector<std::string> languages_present;  // sorted, known tags only
    std::vector<ViolatingPart> violating_parts;
    /// Parts missing from the archive or with an undeterminable language.
    std::vector<CanonicalUri> unresolved_parts;
    Verdict verdict = Verdict::kConsistent;
};

ViolationReport detect_violations(const CompositeMemento& composite);

struct BiasReport {
    LanguageDistribution a;
    LanguageDistribution b;
    std::string label_a = "a";
    std::string label_b = "b";

    [[nodiscard]] double entropy_difference() const { return a.entropy_bits() - b.entropy_bits(); }
    [[nodiscard]] std::string to_text() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

BiasReport bias_report(const ArchiveStore& store_a, const ArchiveStore& store_b,
                       const CanonicalUri& uri, std::string label_a = "a",
                       std::string label_b = "b");

nlohmann::json distribution_to_json(const LanguageDistribution& dist);
std::string distribution_to_text(const LanguageDistribution& dist);
nlohmann::json violation_report_to_json(const ViolationReport& report);
std::string violation_report_to_text(const ViolationReport& report);
const char* to_string(Verdict v);

}  // namespace cookiearc
