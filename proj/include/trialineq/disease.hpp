#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "trialineq/error.hpp"

namespace trialineq {

inline constexpr std::size_t n_disease_categories = 16;

namespace detail {

// The closed set of GBD Level 2 cause categories used as the disease axis.
inline constexpr std::array<std::string_view, n_disease_categories> disease_names = {
    "HIV/AIDS and sexually transmitted infections",
    "Neglected tropical diseases and malaria",
    "Respiratory infections and tuberculosis",
    "Maternal and neonatal disorders",
    "Nutritional deficiencies",
    "Cardiovascular diseases",
    "Neoplasms",
    "Diabetes and kidney diseases",
    "Chronic respiratory diseases",
    "Digestive diseases",
    "Mental disorders",
    "Neurological disorders",
    "Musculoskeletal disorders",
    "Sense organ diseases",
    "Skin and subcutaneous diseases",
    "Substance use disorders",
};

// lowercase + collapse whitespace runs; keeps punctuation so "HIV/AIDS" still
// distinguishes itself
inline std::string normalize_label(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out += c;
    }
    return out;
}

} // namespace detail

/// One of the 16 Level-2 disease categories. Ids are dense 0..15 and bijective
/// with the canonical labels; id 16 is the cross-disease aggregation sentinel.
class DiseaseCategory {
  public:
    static constexpr std::uint8_t aggregate_id = 16;

    DiseaseCategory() : id_(aggregate_id) {}
    explicit DiseaseCategory(std::uint8_t id) : id_(id) {
        if (id > aggregate_id) throw DataError("disease id out of range");
    }

    static DiseaseCategory aggregate() { return DiseaseCategory(aggregate_id); }

    /// Case-insensitive, whitespace-normalized match against the canonical
    /// labels; falls back to a unique-prefix match so e.g. "cardiovascular"
    /// resolves to "Cardiovascular diseases".
    static std::optional<DiseaseCategory> parse(std::string_view label) {
        const std::string norm = detail::normalize_label(label);
        if (norm.empty()) return std::nullopt;
        for (std::size_t i = 0; i < n_disease_categories; ++i)
            if (norm == detail::normalize_label(detail::disease_names[i]))
                return DiseaseCategory(static_cast<std::uint8_t>(i));
        std::optional<DiseaseCategory> prefix_hit;
        for (std::size_t i = 0; i < n_disease_categories; ++i) {
            const std::string canon = detail::normalize_label(detail::disease_names[i]);
            if (canon.size() > norm.size() && canon.compare(0, norm.size(), norm) == 0) {
                if (prefix_hit) return std::nullopt; // ambiguous prefix
                prefix_hit = DiseaseCategory(static_cast<std::uint8_t>(i));
            }
        }
        return prefix_hit;
    }

    std::uint8_t id() const { return id_; }
    bool is_aggregate() const { return id_ == aggregate_id; }

    std::string_view name() const {
        if (is_aggregate()) return "_all";
        return detail::disease_names[id_];
    }

    friend bool operator==(const DiseaseCategory&, const DiseaseCategory&) = default;
    friend auto operator<=>(const DiseaseCategory&, const DiseaseCategory&) = default;

  private:
    std::uint8_t id_;
};

} // namespace trialineq
