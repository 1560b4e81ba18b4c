#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trialineq/csv.hpp"
#include "trialineq/disease.hpp"
#include "trialineq/error.hpp"
#include "trialineq/iso3.hpp"

namespace trialineq {

/// Sentinel year for cells aggregated across the time axis.
inline constexpr int year_aggregate = -1;

/// One (country, disease, year) observation. Participants are real-valued:
/// multi-country studies allocate enrollment proportionally, which produces
/// fractional counts.
struct PanelCell {
    CountryCode country;
    DiseaseCategory disease;
    int year = year_aggregate;
    double participants = 0.0;
    double dalys = 0.0;
};

struct Totals {
    double participants = 0.0;
    double dalys = 0.0;

    Totals& operator+=(const PanelCell& c) {
        participants += c.participants;
        dalys += c.dalys;
        return *this;
    }
};

/// Inclusive year interval; default covers everything.
struct YearRange {
    int first = std::numeric_limits<int>::min();
    int last = std::numeric_limits<int>::max();

    bool contains(int y) const { return y >= first && y <= last; }
    static YearRange all() { return {}; }
    static YearRange single(int y) { return {y, y}; }
};

namespace detail {

inline std::uint64_t cell_key(const CountryCode& c, DiseaseCategory d, int year) {
    return (std::uint64_t(c.packed()) << 40) | (std::uint64_t(d.id()) << 32) |
           std::uint64_t(std::uint32_t(year));
}

} // namespace detail

/// Immutable, indexed collection of panel cells with cached marginal totals.
/// At most one cell per (country, disease, year); construction sorts cells
/// into canonical order and builds every marginal in one pass. Safe for
/// concurrent reads.
class Panel {
  public:
    Panel() = default;

    /// Cells must already have unique keys (ingestion merges duplicates).
    explicit Panel(std::vector<PanelCell> cells) : cells_(std::move(cells)) {
        std::sort(cells_.begin(), cells_.end(), [](const PanelCell& a, const PanelCell& b) {
            return std::tie(a.country, a.disease, a.year) < std::tie(b.country, b.disease, b.year);
        });
        index_.reserve(cells_.size());
        for (std::size_t i = 0; i < cells_.size(); ++i) {
            const auto& c = cells_[i];
            if (c.participants < 0) throw DataError("negative participants in panel cell");
            if (!(c.dalys > 0)) throw DataError("non-positive DALYs in panel cell");
            const auto key = detail::cell_key(c.country, c.disease, c.year);
            if (!index_.emplace(key, i).second)
                throw DataError("duplicate (country, disease, year) key in panel");
            global_ += c;
            by_country_[c.country] += c;
            by_disease_[c.disease.id()] += c;
            by_year_[c.year] += c;
            by_disease_year_[{c.disease.id(), c.year}] += c;
            by_country_year_[{c.country, c.year}] += c;
        }
        if (!(global_.participants > 0)) throw DataError("panel has zero global participants");
    }

    const std::vector<PanelCell>& cells() const { return cells_; }
    std::size_t size() const { return cells_.size(); }

    const PanelCell* find(const CountryCode& c, DiseaseCategory d, int year) const {
        auto it = index_.find(detail::cell_key(c, d, year));
        return it == index_.end() ? nullptr : &cells_[it->second];
    }

    const Totals& global() const { return global_; }

    Totals country_total(const CountryCode& c) const { return lookup(by_country_, c); }
    Totals disease_total(DiseaseCategory d) const { return lookup(by_disease_, d.id()); }
    Totals year_total(int y) const { return lookup(by_year_, y); }
    Totals disease_year_total(DiseaseCategory d, int y) const {
        return lookup(by_disease_year_, std::pair<std::uint8_t, int>{d.id(), y});
    }
    Totals country_year_total(const CountryCode& c, int y) const {
        return lookup(by_country_year_, std::pair<CountryCode, int>{c, y});
    }

    std::vector<CountryCode> countries() const {
        std::vector<CountryCode> out;
        out.reserve(by_country_.size());
        for (const auto& [k, v] : by_country_) out.push_back(k);
        return out;
    }
    std::vector<int> years() const {
        std::vector<int> out;
        out.reserve(by_year_.size());
        for (const auto& [k, v] : by_year_) out.push_back(k);
        return out;
    }
    std::vector<DiseaseCategory> diseases() const {
        std::vector<DiseaseCategory> out;
        for (const auto& [id, t] : by_disease_) out.push_back(DiseaseCategory(id));
        return out;
    }

    /// Recomputes every cached marginal from the cells and compares at the
    /// given relative tolerance. Returns false on any mismatch.
    bool verify_marginals(double rel_tol = 1e-9) const {
        Totals g;
        std::map<CountryCode, Totals> bc;
        std::map<std::uint8_t, Totals> bd;
        std::map<int, Totals> by;
        for (const auto& c : cells_) {
            g += c;
            bc[c.country] += c;
            bd[c.disease.id()] += c;
            by[c.year] += c;
        }
        auto close = [rel_tol](double a, double b) {
            return std::abs(a - b) <= rel_tol * std::max({1.0, std::abs(a), std::abs(b)});
        };
        auto tot_close = [&](const Totals& a, const Totals& b) {
            return close(a.participants, b.participants) && close(a.dalys, b.dalys);
        };
        if (!tot_close(g, global_)) return false;
        if (bc.size() != by_country_.size() || bd.size() != by_disease_.size() || by.size() != by_year_.size())
            return false;
        for (const auto& [k, v] : bc)
            if (!tot_close(v, lookup(by_country_, k))) return false;
        for (const auto& [k, v] : bd)
            if (!tot_close(v, lookup(by_disease_, k))) return false;
        for (const auto& [k, v] : by)
            if (!tot_close(v, lookup(by_year_, k))) return false;
        return true;
    }

  private:
    template <typename M, typename K>
    static Totals lookup(const M& m, const K& k) {
        auto it = m.find(k);
        return it == m.end() ? Totals{} : it->second;
    }

    std::vector<PanelCell> cells_;
    std::unordered_map<std::uint64_t, std::size_t> index_;
    Totals global_;
    std::map<CountryCode, Totals> by_country_;
    std::map<std::uint8_t, Totals> by_disease_;
    std::map<int, Totals> by_year_;
    std::map<std::pair<std::uint8_t, int>, Totals> by_disease_year_;
    std::map<std::pair<CountryCode, int>, Totals> by_country_year_;
};

// ---------------------------------------------------------------------------
// Ingestion

struct ColumnMap {
    std::string country = "country";
    std::string disease = "disease";
    std::string year = "year";
    std::string participants = "participants";
    std::string dalys = "dalys";
};

struct IngestOptions {
    char delimiter = '\0'; // 0 = auto-detect comma vs tab
    ColumnMap columns;
    bool relax_year_bounds = false; // lifts the 2000-2024 restriction (synthetic data)
};

inline constexpr int year_min = 2000;
inline constexpr int year_max = 2024;

struct IngestResult {
    Panel panel;
    std::size_t duplicates_merged = 0; // rows folded into an existing key
    std::vector<RowIssue> rejected;
};

/// Parses, validates and indexes a participation/burden panel. Duplicate
/// (country, disease, year) rows are summed and counted; rows violating any
/// invariant are rejected and reported with their source line number.
inline IngestResult ingest_panel(std::istream& in, const IngestOptions& opt = {}) {
    const csv::Table t = csv::read(in, opt.delimiter);
    const std::size_t ci = t.require_column(opt.columns.country);
    const std::size_t di = t.require_column(opt.columns.disease);
    const std::size_t yi = t.require_column(opt.columns.year);
    const std::size_t pi = t.require_column(opt.columns.participants);
    const std::size_t bi = t.require_column(opt.columns.dalys);

    IngestResult result;
    std::unordered_map<std::uint64_t, std::size_t> slot;
    std::vector<PanelCell> cells;

    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        auto reject = [&](std::string msg) { result.rejected.push_back({line, std::move(msg)}); };

        if (row.size() <= std::max({ci, di, yi, pi, bi})) {
            reject("too few columns");
            continue;
        }
        CountryCode country;
        try {
            country = CountryCode::from_string(row[ci]);
        } catch (const DataError& e) {
            reject(e.what());
            continue;
        }
        if (!country.is_known_iso3()) {
            reject("unknown ISO3 code '" + row[ci] + "'");
            continue;
        }
        const auto disease = DiseaseCategory::parse(row[di]);
        if (!disease) {
            reject("unknown disease label '" + row[di] + "'");
            continue;
        }
        const auto year = csv::parse_int(row[yi]);
        if (!year) {
            reject("non-numeric year '" + row[yi] + "'");
            continue;
        }
        if (!opt.relax_year_bounds && (*year < year_min || *year > year_max)) {
            reject("year " + std::to_string(*year) + " outside " + std::to_string(year_min) + "-" +
                   std::to_string(year_max));
            continue;
        }
        const auto participants = csv::parse_double(row[pi]);
        if (!participants || !std::isfinite(*participants)) {
            reject("non-numeric participants '" + row[pi] + "'");
            continue;
        }
        if (*participants < 0) {
            reject("negative participants");
            continue;
        }
        const auto dalys = csv::parse_double(row[bi]);
        if (!dalys || !std::isfinite(*dalys)) {
            reject("non-numeric dalys '" + row[bi] + "'");
            continue;
        }
        if (!(*dalys > 0)) {
            reject("non-positive dalys");
            continue;
        }

        const auto key = detail::cell_key(country, *disease, static_cast<int>(*year));
        auto it = slot.find(key);
        if (it != slot.end()) {
            cells[it->second].participants += *participants;
            cells[it->second].dalys += *dalys;
            ++result.duplicates_merged;
        } else {
            slot.emplace(key, cells.size());
            cells.push_back({country, *disease, static_cast<int>(*year), *participants, *dalys});
        }
    }

    if (cells.empty()) throw DataError("no valid panel rows in input");
    result.panel = Panel(std::move(cells));
    return result;
}

/// Canonical panel emission: fixed column order, cells sorted by
/// (country, disease, year), shortest round-trip numbers. Re-ingesting the
/// output reproduces the panel exactly.
inline void emit_panel(const Panel& panel, std::ostream& out, char delim = ',') {
    csv::write_row(out, {"country", "disease", "year", "participants", "dalys"}, delim);
    for (const auto& c : panel.cells()) {
        csv::write_row(out,
                       {c.country.str(), std::string(c.disease.name()), std::to_string(c.year),
                        csv::format_double(c.participants), csv::format_double(c.dalys)},
                       delim);
    }
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateSpec {
    bool keep_country = true;
    bool keep_disease = true;
    bool keep_year = true;
    int year_bin_width = 1; // only meaningful when keep_year
};

/// Sums cells over dropped dimensions; when binning, years map to their bin's
/// first year, anchored at the panel's minimum year.
inline Panel aggregate(const Panel& panel, const AggregateSpec& spec) {
    if (!spec.keep_country && !spec.keep_disease && !spec.keep_year)
        throw ConfigError("aggregate: must keep at least one dimension");
    if (spec.year_bin_width < 1) throw ConfigError("aggregate: year bin width must be >= 1");

    int anchor = 0;
    if (spec.keep_year && spec.year_bin_width > 1) {
        anchor = std::numeric_limits<int>::max();
        for (const auto& c : panel.cells()) anchor = std::min(anchor, c.year);
    }

    std::map<std::tuple<CountryCode, std::uint8_t, int>, Totals> groups;
    for (const auto& c : panel.cells()) {
        const CountryCode country = spec.keep_country ? c.country : CountryCode::aggregate();
        const DiseaseCategory disease = spec.keep_disease ? c.disease : DiseaseCategory::aggregate();
        int year = year_aggregate;
        if (spec.keep_year) {
            year = spec.year_bin_width > 1
                       ? anchor + ((c.year - anchor) / spec.year_bin_width) * spec.year_bin_width
                       : c.year;
        }
        groups[{country, disease.id(), year}] += c;
    }

    std::vector<PanelCell> cells;
    cells.reserve(groups.size());
    for (const auto& [key, tot] : groups) {
        cells.push_back({std::get<0>(key), DiseaseCategory(std::get<1>(key)), std::get<2>(key),
                         tot.participants, tot.dalys});
    }
    return Panel(std::move(cells));
}

} // namespace trialineq
