#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "trialineq/csv.hpp"
#include "trialineq/error.hpp"
#include "trialineq/iso3.hpp"

namespace trialineq {

enum class IncomeGroup : std::uint8_t { High, UpperMiddle, LowerMiddle, Low };

inline std::string_view income_group_name(IncomeGroup g) {
    switch (g) {
        case IncomeGroup::High: return "High";
        case IncomeGroup::UpperMiddle: return "UpperMiddle";
        case IncomeGroup::LowerMiddle: return "LowerMiddle";
        case IncomeGroup::Low: return "Low";
    }
    return "?";
}

/// Tolerant income-class parser: accepts the World Bank long labels and the
/// compact forms ("High", "upper middle income", "LowerMiddle", ...).
inline std::optional<IncomeGroup> parse_income_group(std::string_view s) {
    std::string letters;
    for (char c : s) {
        if (c >= 'A' && c <= 'Z') letters += static_cast<char>(c - 'A' + 'a');
        else if (c >= 'a' && c <= 'z') letters += c;
    }
    if (letters.empty()) return std::nullopt;
    if (letters.find("upper") != std::string::npos) return IncomeGroup::UpperMiddle;
    if (letters.find("lower") != std::string::npos) return IncomeGroup::LowerMiddle;
    if (letters == "high" || letters == "highincome") return IncomeGroup::High;
    if (letters == "low" || letters == "lowincome") return IncomeGroup::Low;
    return std::nullopt;
}

/// Ordered, named group of predictor columns used by the hierarchical and
/// Shapley decompositions.
struct BlockSpec {
    std::string name;
    std::vector<std::string> members;
};

/// Country-level structural indicators, column-oriented. Missing entries are
/// stored as NaN; a per-column exclusion flag marks predictors with more than
/// half of their values missing. Immutable after construction.
class PredictorTable {
  public:
    PredictorTable() = default;

    PredictorTable(std::vector<CountryCode> countries,
                   std::map<std::string, std::vector<double>> columns,
                   std::vector<std::optional<IncomeGroup>> income = {})
        : countries_(std::move(countries)), columns_(std::move(columns)), income_(std::move(income)) {
        for (const auto& [name, col] : columns_)
            if (col.size() != countries_.size())
                throw DataError("predictor column '" + name + "' length mismatch");
        if (income_.empty()) income_.resize(countries_.size());
        if (income_.size() != countries_.size()) throw DataError("income column length mismatch");
        refresh_exclusions();
    }

    std::size_t n_rows() const { return countries_.size(); }
    const std::vector<CountryCode>& countries() const { return countries_; }

    bool has(std::string_view field) const { return columns_.count(std::string(field)) > 0; }

    const std::vector<double>& values(std::string_view field) const {
        auto it = columns_.find(std::string(field));
        if (it == columns_.end()) throw DataError("unknown predictor field '" + std::string(field) + "'");
        return it->second;
    }

    std::vector<std::string> field_names() const {
        std::vector<std::string> out;
        for (const auto& [name, col] : columns_) out.push_back(name);
        return out;
    }

    double missing_fraction(std::string_view field) const {
        const auto& col = values(field);
        if (col.empty()) return 1.0;
        std::size_t miss = 0;
        for (double v : col)
            if (std::isnan(v)) ++miss;
        return static_cast<double>(miss) / static_cast<double>(col.size());
    }

    /// Predictors flagged for exclusion (>50% missing, or zero variance after
    /// standardization marked them).
    const std::vector<std::string>& excluded() const { return excluded_; }

    bool is_excluded(std::string_view field) const {
        return std::find(excluded_.begin(), excluded_.end(), field) != excluded_.end();
    }

    std::optional<IncomeGroup> income_group(std::size_t row) const { return income_.at(row); }

    std::optional<std::size_t> row_of(const CountryCode& c) const {
        auto it = std::lower_bound(countries_.begin(), countries_.end(), c);
        if (it == countries_.end() || !(*it == c)) return std::nullopt;
        return static_cast<std::size_t>(it - countries_.begin());
    }

    PredictorTable with_column(const std::string& name, std::vector<double> col) const {
        auto cols = columns_;
        cols[name] = std::move(col);
        return PredictorTable(countries_, std::move(cols), income_);
    }

    PredictorTable with_extra_exclusions(const std::vector<std::string>& more) const {
        PredictorTable t(countries_, columns_, income_);
        for (const auto& m : more)
            if (!t.is_excluded(m)) t.excluded_.push_back(m);
        std::sort(t.excluded_.begin(), t.excluded_.end());
        return t;
    }

    /// Row subset in the given order (indices must be sorted ascending to keep
    /// the country ordering invariant). Exclusion flags carry over.
    PredictorTable subset(const std::vector<std::size_t>& rows) const {
        std::vector<CountryCode> countries;
        std::vector<std::optional<IncomeGroup>> income;
        for (std::size_t r : rows) {
            countries.push_back(countries_.at(r));
            income.push_back(income_.at(r));
        }
        std::map<std::string, std::vector<double>> cols;
        for (const auto& [name, col] : columns_) {
            std::vector<double> sub;
            sub.reserve(rows.size());
            for (std::size_t r : rows) sub.push_back(col[r]);
            cols[name] = std::move(sub);
        }
        return PredictorTable(std::move(countries), std::move(cols), std::move(income))
            .with_extra_exclusions(excluded_);
    }

  private:
    void refresh_exclusions() {
        excluded_.clear();
        for (const auto& [name, col] : columns_)
            if (missing_fraction(name) > 0.5) excluded_.push_back(name);
        std::sort(excluded_.begin(), excluded_.end());
    }

    std::vector<CountryCode> countries_; // sorted ascending
    std::map<std::string, std::vector<double>> columns_;
    std::vector<std::optional<IncomeGroup>> income_;
    std::vector<std::string> excluded_;
};

namespace detail {

inline double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

inline double safe_log(double v) { return v > 0 ? std::log(v) : nan_value(); }

} // namespace detail

struct PredictorIngestResult {
    PredictorTable table;
    std::vector<RowIssue> issues;
};

/// Reads the country indicator table. Expects absolute-scale inputs (gdp,
/// population, publications, health_exp, hospitals, hospital_beds) alongside
/// rates (rd_expenditure, doctors_per_10k, hdi, democracy_index) and an
/// optional income_group column. Log transforms and per-capita ratios are
/// derived here; a non-positive population makes every per-capita field of
/// that row missing and is reported.
inline PredictorIngestResult ingest_predictors(std::istream& in, char delimiter = '\0') {
    const csv::Table t = csv::read(in, delimiter);
    const std::size_t ci = t.require_column("country");

    static constexpr const char* absolute_fields[] = {"gdp",       "population",    "publications",
                                                      "health_exp", "hospital_beds", "hospitals"};
    static constexpr const char* rate_fields[] = {"rd_expenditure", "total_citations", "doctors_per_10k",
                                                  "hdi", "democracy_index"};

    PredictorIngestResult result;
    struct Row {
        CountryCode country;
        std::map<std::string, double> vals;
        std::optional<IncomeGroup> income;
    };
    std::vector<Row> rows;

    const auto income_col = t.column("income_group");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& raw = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        if (raw.size() <= ci) {
            result.issues.push_back({line, "too few columns"});
            continue;
        }
        Row row;
        try {
            row.country = CountryCode::from_string(raw[ci]);
        } catch (const DataError& e) {
            result.issues.push_back({line, e.what()});
            continue;
        }
        if (!row.country.is_known_iso3()) {
            result.issues.push_back({line, "unknown ISO3 code '" + raw[ci] + "'"});
            continue;
        }
        auto read_field = [&](const char* name) -> double {
            auto col = t.column(name);
            if (!col || *col >= raw.size()) return detail::nan_value();
            const std::string& cell = raw[*col];
            if (cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == ".")
                return detail::nan_value();
            auto v = csv::parse_double(cell);
            if (!v) {
                result.issues.push_back({line, std::string("non-numeric value for ") + name});
                return detail::nan_value();
            }
            return *v;
        };
        for (const char* f : absolute_fields) row.vals[f] = read_field(f);
        for (const char* f : rate_fields) row.vals[f] = read_field(f);
        if (income_col && *income_col < raw.size()) row.income = parse_income_group(raw[*income_col]);

        const double pop = row.vals["population"];
        if (!std::isnan(pop) && pop <= 0)
            result.issues.push_back({line, "population <= 0: per-capita transforms unavailable"});
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("no valid predictor rows in input");

    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.country < b.country; });

    const std::size_t n = rows.size();
    std::vector<CountryCode> countries(n);
    std::vector<std::optional<IncomeGroup>> income(n);
    std::map<std::string, std::vector<double>> cols;
    auto col = [&](const std::string& name) -> std::vector<double>& {
        auto [it, inserted] = cols.emplace(name, std::vector<double>(n, detail::nan_value()));
        return it->second;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const Row& row = rows[i];
        countries[i] = row.country;
        income[i] = row.income;
        const double pop = row.vals.at("population");
        const bool pop_ok = !std::isnan(pop) && pop > 0;

        col("gdp")[i] = row.vals.at("gdp");
        col("population")[i] = row.vals.at("population");
        col("publications")[i] = row.vals.at("publications");
        col("health_exp")[i] = row.vals.at("health_exp");
        col("hospital_beds")[i] = row.vals.at("hospital_beds");
        col("hospitals")[i] = row.vals.at("hospitals");
        col("rd_expenditure")[i] = row.vals.at("rd_expenditure");
        col("total_citations")[i] = row.vals.at("total_citations");
        col("doctors_per_10k")[i] = row.vals.at("doctors_per_10k");
        col("hdi")[i] = row.vals.at("hdi");
        col("democracy_index")[i] = row.vals.at("democracy_index");

        col("log_gdp")[i] = detail::safe_log(row.vals.at("gdp"));
        col("log_population")[i] = detail::safe_log(pop);
        col("log_publications")[i] = detail::safe_log(row.vals.at("publications"));
        col("log_health_exp")[i] = detail::safe_log(row.vals.at("health_exp"));

        if (pop_ok) {
            col("log_gdp_per_capita")[i] = detail::safe_log(row.vals.at("gdp") / pop);
            col("log_publications_per_capita")[i] = detail::safe_log(row.vals.at("publications") / pop);
            col("log_health_exp_per_capita")[i] = detail::safe_log(row.vals.at("health_exp") / pop);
            if (!std::isnan(row.vals.at("hospitals"))) col("hospitals_per_capita")[i] = row.vals.at("hospitals") / pop;
            if (!std::isnan(row.vals.at("hospital_beds")))
                col("hospital_beds_per_capita")[i] = row.vals.at("hospital_beds") / pop;
        } else {
            col("log_gdp_per_capita");
            col("log_publications_per_capita");
            col("log_health_exp_per_capita");
            col("hospitals_per_capita");
            col("hospital_beds_per_capita");
        }
    }

    result.table = PredictorTable(std::move(countries), std::move(cols), std::move(income));
    return result;
}

/// Replaces each missing entry with the per-predictor median of observed
/// values. Predictors already flagged (>50% missing) are left untouched.
inline PredictorTable impute_median(const PredictorTable& table) {
    std::map<std::string, std::vector<double>> cols;
    for (const auto& name : table.field_names()) {
        std::vector<double> col = table.values(name);
        if (table.is_excluded(name)) {
            cols[name] = std::move(col);
            continue;
        }
        std::vector<double> observed;
        for (double v : col)
            if (!std::isnan(v)) observed.push_back(v);
        if (observed.empty()) throw NumericError("predictor '" + name + "' has no observed values");
        std::sort(observed.begin(), observed.end());
        const std::size_t m = observed.size();
        const double median = (m % 2 == 1) ? observed[m / 2] : 0.5 * (observed[m / 2 - 1] + observed[m / 2]);
        for (double& v : col)
            if (std::isnan(v)) v = median;
        cols[name] = std::move(col);
    }
    std::vector<std::optional<IncomeGroup>> income(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) income[i] = table.income_group(i);
    return PredictorTable(table.countries(), std::move(cols), std::move(income))
        .with_extra_exclusions(table.excluded());
}

/// Centers and scales each retained predictor to mean 0, SD 1 (population
/// SD). Zero-variance predictors are added to the exclusion list instead of
/// producing NaN columns.
inline PredictorTable standardize(const PredictorTable& table) {
    std::map<std::string, std::vector<double>> cols;
    std::vector<std::string> degenerate;
    for (const auto& name : table.field_names()) {
        std::vector<double> col = table.values(name);
        if (table.is_excluded(name)) {
            cols[name] = std::move(col);
            continue;
        }
        double sum = 0;
        std::size_t n = 0;
        for (double v : col)
            if (!std::isnan(v)) {
                sum += v;
                ++n;
            }
        if (n == 0) throw NumericError("predictor '" + name + "' has no observed values");
        const double mean = sum / static_cast<double>(n);
        double ss = 0;
        for (double v : col)
            if (!std::isnan(v)) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (sd == 0) {
            degenerate.push_back(name);
            cols[name] = std::move(col);
            continue;
        }
        for (double& v : col)
            if (!std::isnan(v)) v = (v - mean) / sd;
        cols[name] = std::move(col);
    }
    std::vector<std::optional<IncomeGroup>> income(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) income[i] = table.income_group(i);
    auto out = PredictorTable(table.countries(), std::move(cols), std::move(income))
                   .with_extra_exclusions(table.excluded());
    return out.with_extra_exclusions(degenerate);
}

/// Default block layout for the structural (part 1) analysis.
inline std::vector<BlockSpec> default_part1_blocks() {
    return {
        {"Economic", {"log_gdp", "log_population"}},
        {"Research", {"rd_expenditure", "log_publications", "total_citations"}},
        {"Health", {"log_health_exp", "hospital_beds", "hospitals", "doctors_per_10k"}},
        {"Governance", {"hdi", "democracy_index"}},
    };
}

/// Default block layout for the policy-relevant (part 2) analysis.
inline std::vector<BlockSpec> default_part2_blocks() {
    return {
        {"Research_Investment", {"rd_expenditure", "log_publications_per_capita"}},
        {"Health_Infrastructure",
         {"hospital_beds_per_capita", "doctors_per_10k", "hospitals_per_capita", "log_health_exp_per_capita"}},
        {"Governance", {"hdi", "democracy_index"}},
    };
}

/// Blocks must be pairwise disjoint and reference existing table columns.
inline void validate_blocks(const std::vector<BlockSpec>& blocks, const PredictorTable& table) {
    std::set<std::string> seen;
    for (const auto& b : blocks) {
        for (const auto& m : b.members) {
            if (!table.has(m)) throw ConfigError("block '" + b.name + "' references unknown predictor '" + m + "'");
            if (!seen.insert(m).second) throw ConfigError("predictor '" + m + "' appears in more than one block");
        }
    }
}

} // namespace trialineq
