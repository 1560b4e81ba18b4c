#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trialineq/attribution.hpp"
#include "trialineq/classifier.hpp"
#include "trialineq/config.hpp"
#include "trialineq/decomposition.hpp"
#include "trialineq/metrics.hpp"
#include "trialineq/network.hpp"
#include "trialineq/panel.hpp"
#include "trialineq/predictors.hpp"
#include "trialineq/report.hpp"
#include "trialineq/simulation.hpp"
#include "trialineq/version.hpp"

namespace trialineq {

struct StageRecord {
    std::string name;
    double millis = 0;
    std::vector<std::string> warnings;
};

struct RunManifest {
    std::string toolkit_version = version_string;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> input_digests;  // path -> digest
    std::vector<StageRecord> stages;
    std::map<std::string, std::string> output_digests; // file name -> digest
    std::string status = "completed";

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["toolkit_version"] = toolkit_version;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["inputs"] = input_digests;
        j["outputs"] = output_digests;
        j["status"] = status;
        nlohmann::json stages_json = nlohmann::json::array();
        for (const auto& s : stages)
            stages_json.push_back({{"name", s.name}, {"millis", s.millis}, {"warnings", s.warnings}});
        j["stages"] = stages_json;
        return j;
    }
};

namespace detail {

inline std::string digest_bytes(const std::string& bytes) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

inline std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open input file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return digest_bytes(ss.str());
}

} // namespace detail

/// Executes the configured stages in fixed order, writing every result file
/// plus a manifest into the output directory. All randomized stages draw
/// named substreams of the single config seed, so reruns (and thread-count
/// changes) reproduce results byte for byte; the manifest's wall-clock
/// timings are the only varying fields.
class Pipeline {
  public:
    explicit Pipeline(RunConfig config) : cfg_(std::move(config)) {
        if (cfg_.stages.empty()) cfg_.stages = all_stages();
        validate_stage_plan();
    }

    RunManifest run() {
        namespace fs = std::filesystem;
        fs::create_directories(cfg_.out_dir);
        manifest_.config_hash = cfg_.config_hash();
        manifest_.seed = cfg_.seed;
        manifest_.input_digests[cfg_.panel_path] = detail::digest_file(cfg_.panel_path);
        if (cfg_.predictors_path)
            manifest_.input_digests[*cfg_.predictors_path] = detail::digest_file(*cfg_.predictors_path);
        if (cfg_.components_path)
            manifest_.input_digests[*cfg_.components_path] = detail::digest_file(*cfg_.components_path);

        try {
            for (const auto& stage : cfg_.stages) run_stage(stage);
        } catch (const std::exception& e) {
            manifest_.status = "halted: " + current_stage_ + ": " + e.what();
            write_manifest();
            throw;
        }
        write_manifest();
        return manifest_;
    }

    const RunManifest& manifest() const { return manifest_; }

  private:
    void validate_stage_plan() const {
        auto wants = [&](const char* s) {
            return std::find(cfg_.stages.begin(), cfg_.stages.end(), s) != cfg_.stages.end();
        };
        auto require = [&](const char* stage, const char* dep) {
            if (wants(stage) && !wants(dep))
                throw ConfigError(std::string("stage '") + stage + "' requires stage '" + dep + "'");
        };
        require("metrics", "ingest");
        require("decompose", "ingest");
        require("attribute", "metrics");
        require("classify", "attribute");
        require("simulate", "metrics");
        require("network", "classify");
        if ((wants("attribute") || wants("classify")) && !cfg_.predictors_path)
            throw ConfigError("attribution requested but no predictors file configured");
    }

    template <typename Fn>
    void timed_stage(const std::string& name, Fn&& fn) {
        current_stage_ = name;
        StageRecord rec;
        rec.name = name;
        const auto t0 = std::chrono::steady_clock::now();
        warnings_ = &rec.warnings;
        fn();
        warnings_ = nullptr;
        rec.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        manifest_.stages.push_back(std::move(rec));
    }

    void warn(std::string msg) {
        if (warnings_) warnings_->push_back(std::move(msg));
    }

    void write_text(const std::string& name, const std::string& content) {
        const auto path = std::filesystem::path(cfg_.out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write output file: " + path.string());
        out << content;
        out.close();
        manifest_.output_digests[name] = detail::digest_bytes(content);
    }

    void write_json(const std::string& name, const nlohmann::json& j) { write_text(name, j.dump(2) + "\n"); }

    void write_manifest() {
        const auto path = std::filesystem::path(cfg_.out_dir) / "run_manifest.json";
        std::ofstream out(path, std::ios::binary);
        out << manifest_.to_json().dump(2) << "\n";
    }

    void run_stage(const std::string& name) {
        if (name == "ingest") timed_stage(name, [&] { stage_ingest(); });
        else if (name == "metrics") timed_stage(name, [&] { stage_metrics(); });
        else if (name == "decompose") timed_stage(name, [&] { stage_decompose(); });
        else if (name == "attribute") timed_stage(name, [&] { stage_attribute(); });
        else if (name == "classify") timed_stage(name, [&] { stage_classify(); });
        else if (name == "simulate") timed_stage(name, [&] { stage_simulate(); });
        else if (name == "network") timed_stage(name, [&] { stage_network(); });
        else throw ConfigError("unknown stage '" + name + "'");
    }

    // -- stages ------------------------------------------------------------

    void stage_ingest() {
        std::ifstream in(cfg_.panel_path);
        if (!in) throw ConfigError("cannot open panel file: " + cfg_.panel_path);
        IngestOptions opt;
        opt.delimiter = cfg_.delimiter;
        opt.relax_year_bounds = cfg_.relax_year_bounds;
        auto result = ingest_panel(in, opt);
        panel_ = std::move(result.panel);

        if (result.duplicates_merged > 0)
            warn(std::to_string(result.duplicates_merged) + " duplicate keys merged");
        for (const auto& r : result.rejected)
            warn("line " + std::to_string(r.line) + ": " + r.message + " (rejected)");

        std::ostringstream canon;
        emit_panel(*panel_, canon);
        write_text("panel.csv", canon.str());

        nlohmann::json rep;
        rep["n_cells"] = panel_->size();
        rep["n_countries"] = panel_->countries().size();
        rep["n_diseases"] = panel_->diseases().size();
        rep["years"] = panel_->years();
        rep["duplicates_merged"] = result.duplicates_merged;
        nlohmann::json rejected = nlohmann::json::array();
        for (const auto& r : result.rejected)
            rejected.push_back({{"line", r.line}, {"message", r.message}});
        rep["rejected"] = rejected;
        write_json("ingest_report.json", rep);
    }

    void stage_metrics() {
        pairs_ = pair_pbrs(*panel_, cfg_.period);
        national_ = national_pbr(*panel_, cfg_.period);
        if (pairs_->excluded_undefined > 0)
            warn(std::to_string(pairs_->excluded_undefined) + " pairs dropped (disease unstudied in period)");

        {
            std::ostringstream out;
            csv::write_row(out, {"country", "participants", "dalys", "pbr", "participant_share",
                                 "daly_share"});
            for (const auto& n : *national_)
                csv::write_row(out, {n.country.str(), csv::format_double(n.participants_total),
                                     csv::format_double(n.dalys_total), csv::format_double(n.pbr),
                                     csv::format_double(n.participant_share),
                                     csv::format_double(n.daly_share)});
            write_text("national_pbr.csv", out.str());
        }
        {
            std::ostringstream out;
            csv::write_row(out, {"country", "disease", "participants", "dalys", "pbr", "log_pbr"});
            for (const auto& p : pairs_->pairs)
                csv::write_row(out, {p.country.str(), std::string(p.disease.name()),
                                     csv::format_double(p.participants), csv::format_double(p.dalys),
                                     csv::format_double(p.pbr),
                                     p.pbr > 0 ? csv::format_double(std::log(p.pbr)) : ""});
            write_text("pair_pbr.csv", out.str());
        }

        std::vector<double> national_values;
        for (const auto& n : *national_) national_values.push_back(n.pbr);
        nlohmann::json summary;
        summary["pair_gini"] = gini(pbr_values(*pairs_));
        summary["national_gini"] = gini(national_values);
        summary["national_median_pbr"] = stats::median(national_values);
        summary["n_pairs"] = pairs_->pairs.size();
        summary["n_countries"] = national_->size();
        summary["zero_participation_pairs"] = pairs_->zero_participation;
        summary["excluded_undefined_pairs"] = pairs_->excluded_undefined;
        write_json("metrics_summary.json", summary);

        write_text("lorenz.csv", report::lorenz_csv(lorenz(*pairs_)));

        {
            std::vector<CisRecord> records;
            stats::BootstrapSpec boot;
            boot.n_iterations = cfg_.bootstrap.cis;
            boot.seed = cfg_.seed;
            boot.threads = cfg_.threads;
            for (const auto& d : panel_->diseases()) {
                if (d.is_aggregate()) continue;
                try {
                    records.push_back(cis(*pairs_, d, CisWeighting::Equal, boot));
                } catch (const DataError&) {
                    // disease absent from the period's pair set
                }
            }
            write_text("cis_disease.csv", report::cis_bars_csv(records));
        }

        {
            nlohmann::json lo;
            try {
                const auto d = leave_out_gini(*pairs_, CisUnit::Disease, LeaveOutRanking::Cis, 0.2);
                lo["disease_cis_top20"] = {{"gini_before", d.gini_before},
                                           {"gini_after", d.gini_after},
                                           {"excluded", d.excluded}};
                const auto c = leave_out_gini(*pairs_, CisUnit::Country,
                                              LeaveOutRanking::ParticipantVolume, 0.2);
                lo["country_volume_top20"] = {{"gini_before", c.gini_before},
                                              {"gini_after", c.gini_after},
                                              {"excluded", c.excluded}};
            } catch (const NumericError& e) {
                warn(std::string("leave-out analysis skipped: ") + e.what());
            }
            write_json("leave_out.json", lo);
        }

        if (cfg_.predictors_path) {
            load_predictors();
            std::ostringstream out;
            csv::write_row(out, {"income_group", "beta", "p_value", "n"});
            for (auto g : {IncomeGroup::High, IncomeGroup::UpperMiddle, IncomeGroup::LowerMiddle,
                           IncomeGroup::Low}) {
                try {
                    const auto a = alignment_regression(*panel_, *predictors_raw_, g, cfg_.period);
                    csv::write_row(out, {std::string(income_group_name(g)), csv::format_double(a.beta),
                                         csv::format_double(a.p_value), std::to_string(a.n)});
                } catch (const NumericError& e) {
                    warn("alignment regression skipped for " + std::string(income_group_name(g)) + ": " +
                         e.what());
                }
            }
            write_text("alignment.csv", out.str());
        }

        // choropleth-ready national log-PBR table
        {
            std::vector<std::pair<CountryCode, double>> log_pbrs;
            for (const auto& n : *national_)
                if (n.pbr > 0) log_pbrs.emplace_back(n.country, std::log(n.pbr));
            write_text("choropleth_national.csv", report::choropleth_csv(log_pbrs));
        }
    }

    void stage_decompose() {
        if (!pairs_) pairs_ = pair_pbrs(*panel_, cfg_.period);

        nlohmann::json tj;
        for (auto grouping : {TheilGrouping::Disease, TheilGrouping::Country}) {
            const auto d = theil_decompose(*pairs_, grouping);
            const char* key = grouping == TheilGrouping::Disease ? "disease" : "country";
            nlohmann::json groups = nlohmann::json::array();
            for (const auto& g : d.group_terms)
                groups.push_back({{"group", g.group},
                                  {"n", g.n},
                                  {"mean", g.mean},
                                  {"between_term", g.between_term},
                                  {"within_term", g.within_term}});
            tj[key] = {{"total", d.total},
                       {"between", d.between},
                       {"within", d.within},
                       {"between_share", d.total > 0 ? d.between / d.total : 0},
                       {"dropped_nonpositive", d.dropped_nonpositive},
                       {"groups", groups}};
        }
        write_json("theil.json", tj);

        // per-bin decomposition timeline
        {
            std::ostringstream out;
            csv::write_row(out, {"bin", "disease_between_share", "disease_within_share",
                                 "country_between_share", "country_within_share", "total_theil_disease"});
            const auto binned = aggregate(*panel_, {true, true, true, cfg_.bin_width});
            std::map<int, std::vector<PanelCell>> by_bin;
            for (const auto& c : binned.cells())
                if (cfg_.period.contains(c.year)) by_bin[c.year].push_back(c);
            for (const auto& [bin, cells] : by_bin) {
                try {
                    const Panel sub{std::vector<PanelCell>(cells)};
                    const auto ps = pair_pbrs(sub);
                    const auto dd = theil_decompose(ps, TheilGrouping::Disease);
                    const auto dc = theil_decompose(ps, TheilGrouping::Country);
                    const double dbs = dd.total > 0 ? dd.between / dd.total : 0;
                    const double cbs = dc.total > 0 ? dc.between / dc.total : 0;
                    csv::write_row(out, {std::to_string(bin), csv::format_double(dbs),
                                         csv::format_double(1 - dbs), csv::format_double(cbs),
                                         csv::format_double(1 - cbs), csv::format_double(dd.total)});
                } catch (const NumericError& e) {
                    warn("theil bin " + std::to_string(bin) + " skipped: " + e.what());
                }
            }
            write_text("theil_bins.csv", out.str());
        }

        nlohmann::json dj;
        {
            const auto fe = fe_observations(*panel_, cfg_.period);
            if (fe.dropped_nonpositive > 0)
                warn(std::to_string(fe.dropped_nonpositive) + " zero-participation cells dropped from FE model");
            try {
                const auto vp = variance_partition(fe.obs);
                auto part_json = [](const VariancePartition& v) {
                    return nlohmann::json{{"country", v.r2_country},
                                          {"disease", v.r2_disease},
                                          {"year", v.r2_year},
                                          {"residual", v.r2_residual},
                                          {"variant", v.estimation_variant},
                                          {"n_obs", v.n_obs}};
                };
                dj["anova"] = {{"sequential", part_json(vp.sequential)},
                               {"marginal", part_json(vp.marginal)},
                               {"r2_full", vp.r2_full}};
            } catch (const NumericError& e) {
                warn(std::string("variance partition skipped: ") + e.what());
            }
        }
        {
            // trend of the between-disease Theil share across bins
            auto metric = [](const Panel& sub) {
                const auto d = theil_decompose(pair_pbrs(sub), TheilGrouping::Disease);
                return d.total > 0 ? d.between / d.total : 0.0;
            };
            try {
                const auto trend = temporal_trend_bootstrap(*panel_, cfg_.bin_width, metric,
                                                            cfg_.bootstrap.trend, cfg_.seed, cfg_.threads);
                dj["trend_between_disease_share"] = {{"slope", trend.slope},
                                                     {"intercept", trend.intercept},
                                                     {"r2", trend.r2},
                                                     {"p_value", trend.p_value},
                                                     {"ci_low", trend.ci_low},
                                                     {"ci_high", trend.ci_high}};
            } catch (const NumericError& e) {
                warn(std::string("trend estimation skipped: ") + e.what());
            }
        }
        write_json("decompose.json", dj);
    }

    void load_predictors() {
        if (predictors_raw_) return;
        std::ifstream in(*cfg_.predictors_path);
        if (!in) throw ConfigError("cannot open predictors file: " + *cfg_.predictors_path);
        auto result = ingest_predictors(in);
        for (const auto& issue : result.issues)
            warn("predictors line " + std::to_string(issue.line) + ": " + issue.message);
        predictors_raw_ = std::move(result.table);
        for (const auto& name : predictors_raw_->excluded())
            warn("predictor excluded (>50% missing): " + name);
    }

    void stage_attribute() {
        load_predictors();
        if (!national_) national_ = national_pbr(*panel_, cfg_.period);

        // analysis rows: table countries with positive national participation
        std::map<CountryCode, const NationalPbr*> nat_index;
        for (const auto& n : *national_) nat_index[n.country] = &n;
        std::vector<std::size_t> rows;
        std::vector<double> y_raw;
        for (std::size_t i = 0; i < predictors_raw_->n_rows(); ++i) {
            const auto it = nat_index.find(predictors_raw_->countries()[i]);
            if (it == nat_index.end()) continue;
            rows.push_back(i);
            // raw log participation/burden ratio; differs from the
            // share-normalized national PBR by an additive constant that
            // cannot affect R2 or residuals
            y_raw.push_back(std::log(it->second->participants_total / it->second->dalys_total));
        }
        if (rows.size() < 4) throw NumericError("attribute: too few countries with panel and predictor data");

        table_ = standardize(impute_median(predictors_raw_->subset(rows)));
        y_part1_ = Eigen::Map<Eigen::VectorXd>(y_raw.data(), static_cast<long>(y_raw.size()));

        validate_blocks(cfg_.blocks_part1, *table_);
        validate_blocks(cfg_.blocks_part2, *table_);

        ShapleyOptions sopt;
        sopt.n_permutations = cfg_.bootstrap.shapley_permutations;
        sopt.n_bootstrap = cfg_.bootstrap.shapley_bootstrap;
        sopt.bootstrap_permutations = cfg_.bootstrap.shapley_bootstrap_permutations;
        sopt.seed = cfg_.seed;
        sopt.threads = cfg_.threads;

        auto shapley_json = [](const ShapleyResult& s) {
            nlohmann::json preds = nlohmann::json::array();
            for (const auto& e : s.predictors)
                preds.push_back({{"predictor", e.predictor},
                                 {"mean_pct", e.mean_pct},
                                 {"ci_low", e.ci_low},
                                 {"ci_high", e.ci_high},
                                 {"mean_phi", e.mean_phi}});
            nlohmann::json blocks = nlohmann::json::array();
            for (const auto& [name, pct] : s.block_totals)
                blocks.push_back({{"block", name}, {"pct", pct}});
            return nlohmann::json{{"predictors", preds},
                                  {"blocks", blocks},
                                  {"r2_full", s.r2_full},
                                  {"n_permutations", s.n_permutations},
                                  {"n_bootstrap", s.n_bootstrap},
                                  {"bootstrap_skipped", s.bootstrap_skipped}};
        };
        auto hier_json = [](const std::vector<BlockR2>& blocks) {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& b : blocks)
                out.push_back({{"block", b.name},
                               {"n_vars", b.n_vars},
                               {"incremental_r2", b.incremental},
                               {"cumulative_r2", b.cumulative}});
            return out;
        };
        auto block_fields = [&](const std::vector<BlockSpec>& blocks) {
            std::vector<std::string> fields;
            for (const auto& b : blocks)
                for (const auto& m : usable_members(b, *table_)) fields.push_back(m);
            return fields;
        };

        {
            nlohmann::json j;
            j["n_countries"] = rows.size();
            j["hierarchical"] = hier_json(hierarchical_partition(y_part1_, *table_, cfg_.blocks_part1));
            j["shapley"] = shapley_json(
                shapley_r2(y_part1_, *table_, block_fields(cfg_.blocks_part1), sopt, cfg_.blocks_part1));
            write_json("attribution_part1.json", j);
        }

        residualize_ = residualize_part2(y_part1_, *table_);
        {
            Eigen::VectorXd y2(static_cast<long>(residualize_->records.size()));
            for (std::size_t i = 0; i < residualize_->records.size(); ++i)
                y2[static_cast<long>(i)] = residualize_->records[i].residual;

            nlohmann::json j;
            j["n_countries"] = rows.size();
            j["residual_variance_share"] = residualize_->residual_variance_share;
            j["controls"] = {{"log_gdp", residualize_->fit.coef_of("log_gdp")},
                             {"log_population", residualize_->fit.coef_of("log_population")}};
            j["hierarchical"] = hier_json(hierarchical_partition(y2, *table_, cfg_.blocks_part2));
            j["shapley"] = shapley_json(
                shapley_r2(y2, *table_, block_fields(cfg_.blocks_part2), sopt, cfg_.blocks_part2));
            write_json("attribution_part2.json", j);
        }
        {
            std::ostringstream out;
            csv::write_row(out, {"country", "log_pbr_raw", "residual"});
            for (std::size_t i = 0; i < residualize_->records.size(); ++i)
                csv::write_row(out, {residualize_->records[i].country.str(),
                                     csv::format_double(y_part1_[static_cast<long>(i)]),
                                     csv::format_double(residualize_->records[i].residual)});
            write_text("residuals_national.csv", out.str());
        }
    }

    void stage_classify() {
        if (!pairs_) pairs_ = pair_pbrs(*panel_, cfg_.period);

        // disease-specific regressions on the part-2 policy predictors plus
        // the two structural controls
        std::vector<std::string> fields;
        for (const auto& b : cfg_.blocks_part2)
            for (const auto& m : usable_members(b, *table_)) fields.push_back(m);
        for (const auto& control : {"log_gdp", "log_population"})
            if (table_->has(control) && !table_->is_excluded(control)) fields.push_back(control);

        const auto reg = disease_regressions(*pairs_, *table_, fields, cfg_.blocks_part2,
                                             cfg_.significance, cfg_.multi_factor);
        for (const auto& s : reg.skipped) warn("disease regression skipped (too few countries): " + s);
        if (reg.diagnoses.empty()) throw NumericError("classify: no disease regression succeeded");

        std::vector<PairResidual> residuals;
        for (const auto& d : reg.diagnoses)
            residuals.insert(residuals.end(), d.residuals.begin(), d.residuals.end());
        classified_ = classify(residuals, cfg_.thresholds);
        assign_factor_underperforming(*classified_, reg.diagnoses);
        const auto counts_pre = count_statuses(*classified_);
        if (counts_pre.over > 0) {
            try {
                assign_factor_overperforming(*classified_);
            } catch (const DataError& e) {
                warn(std::string("over-performing factors left unassigned: ") + e.what());
            }
        }

        std::string as_expected_source = "hierarchical_fallback";
        std::size_t component_ties = 0;
        if (cfg_.components_path) {
            std::ifstream in(*cfg_.components_path);
            if (!in) throw ConfigError("cannot open components file: " + *cfg_.components_path);
            const csv::Table t = csv::read(in);
            const auto ci = t.require_column("country");
            const auto di = t.require_column("disease");
            const auto ai = t.require_column("authorship");
            const auto bi = t.require_column("burden");
            const auto ri = t.require_column("recruitment");
            std::vector<ComponentRecord> components;
            for (const auto& row : t.rows) {
                ComponentRecord c;
                c.country = CountryCode::from_string(row.at(ci));
                const auto d = DiseaseCategory::parse(row.at(di));
                if (!d) throw DataError("components: unknown disease label '" + row.at(di) + "'");
                c.disease = *d;
                c.authorship = csv::parse_double(row.at(ai)).value_or(0);
                c.burden = csv::parse_double(row.at(bi)).value_or(0);
                c.recruitment = csv::parse_double(row.at(ri)).value_or(0);
                components.push_back(c);
            }
            const auto assigned = assign_factor_as_expected(*classified_, components);
            component_ties = assigned.ties;
            as_expected_source = "components";
            // pairs without a component row fall back to hierarchical matching
            if (std::any_of(classified_->begin(), classified_->end(), [](const ClassifiedPair& p) {
                    return p.status == PerformanceStatus::AsExpected &&
                           p.factor == LimitingFactor::Unassigned;
                })) {
                try {
                    assign_factor_matching(*classified_, PerformanceStatus::AsExpected);
                    as_expected_source = "components+fallback";
                } catch (const DataError& e) {
                    warn(std::string("as-expected fallback unavailable: ") + e.what());
                }
            }
        } else if (counts_pre.as_expected > 0) {
            try {
                assign_factor_matching(*classified_, PerformanceStatus::AsExpected);
                warn("no components file; as-expected factors assigned by hierarchical matching");
            } catch (const DataError& e) {
                warn(std::string("as-expected factors left unassigned: ") + e.what());
            }
        }

        // per-pair leave-one-out CIS
        {
            const double g_all = gini(pbr_values(*pairs_));
            std::map<std::pair<std::uint32_t, std::uint8_t>, double> pair_cis;
            if (g_all > 0 && pairs_->pairs.size() > 1) {
                for (std::size_t i = 0; i < pairs_->pairs.size(); ++i) {
                    std::vector<double> rest;
                    rest.reserve(pairs_->pairs.size() - 1);
                    for (std::size_t k = 0; k < pairs_->pairs.size(); ++k)
                        if (k != i) rest.push_back(pairs_->pairs[k].pbr);
                    double g_minus;
                    try {
                        g_minus = gini(std::move(rest));
                    } catch (const NumericError&) {
                        continue;
                    }
                    pair_cis[pairs_->pairs[i].key()] = (g_all - g_minus) / g_all * 100.0;
                }
            }
            for (auto& p : *classified_) {
                auto it = pair_cis.find({p.country.packed(), p.disease.id()});
                if (it != pair_cis.end()) p.cis_contribution = it->second;
            }
        }

        {
            std::ostringstream out;
            csv::write_row(out, {"country", "disease", "residual", "status", "factor", "cis"});
            for (const auto& p : *classified_)
                csv::write_row(out, {p.country.str(), std::string(p.disease.name()),
                                     csv::format_double(p.residual), std::string(status_name(p.status)),
                                     std::string(factor_name(p.factor)),
                                     csv::format_double(p.cis_contribution)});
            write_text("classification.csv", out.str());
        }
        {
            const auto counts = count_statuses(*classified_);
            std::map<std::string, std::size_t> factor_counts;
            for (const auto& p : *classified_) ++factor_counts[std::string(factor_name(p.factor))];
            nlohmann::json j;
            j["counts"] = {{"over_performing", counts.over},
                           {"as_expected", counts.as_expected},
                           {"under_performing", counts.under},
                           {"unclassified", counts.unclassified}};
            j["factors"] = factor_counts;
            j["skipped_diseases"] = reg.skipped;
            j["as_expected_source"] = as_expected_source;
            j["component_ties"] = component_ties;
            nlohmann::json diag = nlohmann::json::array();
            for (const auto& d : reg.diagnoses) {
                nlohmann::json scores = nlohmann::json::array();
                for (const auto& s : d.diagnosis.scores)
                    scores.push_back({{"block", s.block},
                                      {"mean_abs_beta", s.mean_abs_beta},
                                      {"n_significant", s.n_significant}});
                diag.push_back({{"disease", std::string(d.disease.name())},
                                {"factor", std::string(factor_name(d.diagnosis.factor))},
                                {"multiple_factors", d.diagnosis.multiple_factors},
                                {"r2", d.fit.r2},
                                {"scores", scores}});
            }
            j["disease_diagnoses"] = diag;
            write_json("classify_summary.json", j);
        }
    }

    void stage_simulate() {
        if (!national_) national_ = national_pbr(*panel_, cfg_.period);
        full_ = simulate(Scenario::Full, *national_, cfg_.full_steps, cfg_.bootstrap.scenario, cfg_.seed,
                         cfg_.threads);
        targeted_ = simulate(Scenario::Targeted, *national_, cfg_.targeted_steps, cfg_.bootstrap.scenario,
                             cfg_.seed, cfg_.threads);
        write_text("scenario_full.csv", report::waterfall_csv(*full_));
        write_text("scenario_targeted.csv", report::waterfall_csv(*targeted_));

        const auto eff = efficiency(*full_, *targeted_);
        nlohmann::json j;
        j["baseline_gini"] = full_->baseline_gini;
        j["baseline_median_pbr"] = full_->baseline_median;
        j["full"] = {{"efficiency", full_->efficiency}, {"p_value", full_->p_value}};
        j["targeted"] = {{"efficiency", targeted_->efficiency}, {"p_value", targeted_->p_value}};
        j["ratio"] = eff.ratio;
        j["ratio_ci"] = {eff.ci_low, eff.ci_high};
        j["ratio_p_value"] = eff.p_value;
        write_json("efficiency.json", j);
    }

    void stage_network() {
        graph_ = build_graph(*classified_, cfg_.min_edge_weight);
        {
            std::ostringstream edges, nodes;
            write_graph(*graph_, edges, nodes);
            write_text("network_edges.csv", edges.str());
            write_text("network_nodes.csv", nodes.str());
        }
        const auto m = metrics(*graph_, cfg_.seed);
        if (m.path_metrics_on_largest_component)
            warn("graph disconnected; path metrics computed on largest component");
        {
            nlohmann::json j;
            j["n_nodes"] = graph_->nodes.size();
            j["n_edges"] = graph_->edges.size();
            j["density"] = m.density;
            j["factor_homophily"] = m.factor_homophily;
            j["status_homophily"] = m.status_homophily;
            j["degree_assortativity"] = m.degree_assortativity;
            j["factor_assortativity"] = m.factor_assortativity;
            j["avg_clustering"] = m.avg_clustering;
            j["modularity"] = m.modularity;
            j["avg_path_length"] = m.avg_path_length;
            j["diameter"] = m.diameter;
            j["n_components"] = m.n_components;
            write_json("network_metrics.json", j);
        }
        {
            const auto lv = louvain(*graph_, cfg_.seed);
            nlohmann::json j;
            j["modularity"] = lv.modularity;
            j["n_communities"] = lv.n_communities;
            j["sizes"] = lv.sizes;
            write_json("louvain.json", j);
        }

        // Gini-reduction fractions for evolution come from the scenario runs
        // when available, otherwise the nominal step fractions
        auto fractions_of = [](const std::optional<ScenarioResult>& scenario,
                               const std::vector<double>& fallback) {
            std::vector<double> out;
            if (scenario) {
                for (std::size_t i = 1; i < scenario->steps.size(); ++i)
                    out.push_back(std::min(1.0, std::max(0.0, scenario->steps[i].pct_reduction / 100.0)));
            } else {
                out = fallback;
            }
            return out;
        };
        const auto full_frac = fractions_of(full_, cfg_.full_steps);
        const auto targ_frac = fractions_of(targeted_, cfg_.targeted_steps);
        const auto evo_full = evolve(m, cfg_.sensitivity, full_frac, cfg_.bootstrap.network_noise,
                                     cfg_.seed, cfg_.threads);
        const auto evo_targ = evolve(m, cfg_.sensitivity, targ_frac, cfg_.bootstrap.network_noise,
                                     cfg_.seed, cfg_.threads);
        write_text("network_evolution_full.csv", report::evolution_csv(evo_full));
        write_text("network_evolution_targeted.csv", report::evolution_csv(evo_targ));

        const double final_homophily =
            evo_full.empty() ? m.factor_homophily : evo_full.back().homophily.value;
        write_text("edge_redistribution.csv",
                   report::edge_redistribution_csv(edge_redistribution(*graph_, final_homophily)));
    }

    RunConfig cfg_;
    RunManifest manifest_;
    std::string current_stage_;
    std::vector<std::string>* warnings_ = nullptr;

    std::optional<Panel> panel_;
    std::optional<PairPbrSet> pairs_;
    std::optional<std::vector<NationalPbr>> national_;
    std::optional<PredictorTable> predictors_raw_;
    std::optional<PredictorTable> table_; // imputed + standardized analysis rows
    Eigen::VectorXd y_part1_;
    std::optional<ResidualizeResult> residualize_;
    std::optional<std::vector<ClassifiedPair>> classified_;
    std::optional<ScenarioResult> full_, targeted_;
    std::optional<ResearchGraph> graph_;
};

inline RunManifest run_pipeline(const RunConfig& config) { return Pipeline(config).run(); }

} // namespace trialineq
