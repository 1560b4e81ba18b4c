// Command-line front end: ingestion, ad-hoc metrics, decompositions,
// attribution, classification, counterfactual scenarios, network analytics,
// statistical kernels, and the full reproducible pipeline.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trialineq/trialineq.hpp"

namespace {

using nlohmann::json;
using namespace trialineq;

struct GlobalFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    unsigned threads = 1;
};

YearRange parse_period(const std::string& s) {
    if (s.empty()) return YearRange::all();
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ConfigError("--period expects first:last");
    YearRange r;
    r.first = std::stoi(s.substr(0, colon));
    r.last = std::stoi(s.substr(colon + 1));
    if (r.first > r.last) throw ConfigError("--period first year exceeds last");
    return r;
}

Panel load_panel(const std::string& path, bool relax_years, char delimiter = '\0') {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open panel file: " + path);
    IngestOptions opt;
    opt.relax_year_bounds = relax_years;
    opt.delimiter = delimiter;
    auto result = ingest_panel(in, opt);
    for (const auto& r : result.rejected)
        std::cerr << "warning: line " << r.line << ": " << r.message << " (rejected)\n";
    if (result.duplicates_merged > 0)
        std::cerr << "warning: " << result.duplicates_merged << " duplicate keys merged\n";
    return std::move(result.panel);
}

PredictorTable load_predictor_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open predictors file: " + path);
    auto result = ingest_predictors(in);
    for (const auto& issue : result.issues)
        std::cerr << "warning: predictors line " << issue.line << ": " << issue.message << "\n";
    return std::move(result.table);
}

DiseaseCategory parse_disease_arg(const std::string& label) {
    const auto d = DiseaseCategory::parse(label);
    if (!d) throw DataError("unknown disease label '" + label + "'");
    return *d;
}

void write_output(const std::string& content, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write output file: " + out_path);
    out << content;
}

// Shared context for the attribute/classify subcommands: aligned response and
// standardized predictor rows for countries present in both inputs.
struct AttributeContext {
    PredictorTable table;
    Eigen::VectorXd y_part1; // raw log participation/burden ratio
    PairPbrSet pairs;
};

AttributeContext build_attribute_context(const Panel& panel, const PredictorTable& raw,
                                         YearRange period) {
    const auto national = national_pbr(panel, period);
    std::map<CountryCode, const NationalPbr*> index;
    for (const auto& n : national) index[n.country] = &n;

    std::vector<std::size_t> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < raw.n_rows(); ++i) {
        auto it = index.find(raw.countries()[i]);
        if (it == index.end()) continue;
        rows.push_back(i);
        y.push_back(std::log(it->second->participants_total / it->second->dalys_total));
    }
    if (rows.size() < 4) throw NumericError("too few countries with both panel and predictor data");

    AttributeContext ctx{standardize(impute_median(raw.subset(rows))),
                         Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<long>(y.size())),
                         pair_pbrs(panel, period)};
    return ctx;
}

std::vector<std::string> block_fields(const std::vector<BlockSpec>& blocks, const PredictorTable& t) {
    std::vector<std::string> fields;
    for (const auto& b : blocks)
        for (const auto& m : usable_members(b, t)) fields.push_back(m);
    return fields;
}

json shapley_to_json(const ShapleyResult& s) {
    json preds = json::array();
    for (const auto& e : s.predictors)
        preds.push_back({{"predictor", e.predictor},
                         {"mean_pct", e.mean_pct},
                         {"ci_low", e.ci_low},
                         {"ci_high", e.ci_high}});
    json blocks = json::array();
    for (const auto& [name, pct] : s.block_totals) blocks.push_back({{"block", name}, {"pct", pct}});
    return {{"predictors", preds}, {"blocks", blocks}, {"r2_full", s.r2_full}};
}

stats::ContingencyTable load_contingency(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open table file: " + path);
    const csv::Table t = csv::read(in);
    stats::ContingencyTable table;
    const bool labeled = !t.rows.empty() && !csv::parse_double(t.rows[0][0]).has_value();
    for (std::size_t j = labeled ? 1 : 0; j < t.header.size(); ++j) table.col_labels.push_back(t.header[j]);
    for (const auto& row : t.rows) {
        std::vector<double> counts;
        for (std::size_t j = labeled ? 1 : 0; j < row.size(); ++j) {
            auto v = csv::parse_double(row[j]);
            if (!v) throw DataError("non-numeric count '" + row[j] + "' in contingency table");
            counts.push_back(*v);
        }
        table.row_labels.push_back(labeled ? row[0] : std::to_string(table.counts.size() + 1));
        table.counts.push_back(std::move(counts));
    }
    table.validate();
    return table;
}

// two-column (value, group) extraction used by the stats subcommands
std::map<std::string, std::vector<double>> load_grouped(const std::string& path,
                                                        const std::string& value_col,
                                                        const std::string& group_col) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file: " + path);
    const csv::Table t = csv::read(in);
    const auto vi = t.require_column(value_col);
    const auto gi = t.require_column(group_col);
    std::map<std::string, std::vector<double>> groups;
    for (const auto& row : t.rows) {
        const auto v = csv::parse_double(row.at(vi));
        if (!v) throw DataError("non-numeric value '" + row.at(vi) + "'");
        groups[row.at(gi)].push_back(*v);
    }
    return groups;
}

ResearchGraph load_graph(const std::string& edges_path, const std::string& nodes_path) {
    std::ifstream edges(edges_path), nodes(nodes_path);
    if (!edges) throw ConfigError("cannot open edges file: " + edges_path);
    if (!nodes) throw ConfigError("cannot open nodes file: " + nodes_path);
    return read_graph(edges, nodes);
}

std::vector<ClassifiedPair> load_classification(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open classification file: " + path);
    const csv::Table t = csv::read(in);
    const auto ci = t.require_column("country");
    const auto di = t.require_column("disease");
    const auto ri = t.require_column("residual");
    const auto si = t.require_column("status");
    const auto fi = t.require_column("factor");
    const auto cis_col = t.column("cis");
    std::vector<ClassifiedPair> pairs;
    for (const auto& row : t.rows) {
        ClassifiedPair p;
        p.country = CountryCode::from_string(row.at(ci));
        p.disease = parse_disease_arg(row.at(di));
        p.residual = csv::parse_double(row.at(ri)).value_or(0);
        const auto status = parse_status(row.at(si));
        const auto factor = parse_factor(row.at(fi));
        if (!status || !factor) throw DataError("unknown status or factor label in " + path);
        p.status = *status;
        p.factor = *factor;
        if (cis_col && *cis_col < row.size()) p.cis_contribution = csv::parse_double(row[*cis_col]).value_or(0);
        pairs.push_back(p);
    }
    return pairs;
}

std::vector<double> parse_fraction_list(const std::string& csv_list) {
    std::vector<double> out;
    std::stringstream ss(csv_list);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"participation-to-burden inequality analytics"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    GlobalFlags g;
    const char* env_config = std::getenv(config_env_var);
    if (env_config) g.config_path = env_config;
    app.add_option("--config", g.config_path, "pipeline config file (JSON)");
    std::uint64_t seed_flag = 0;
    auto* seed_opt = app.add_option("--seed", seed_flag, "master seed for randomized stages");
    std::string out_flag;
    auto* out_opt = app.add_option("--out", out_flag, "output directory or file");
    app.add_option("--threads", g.threads, "worker threads for bootstrap loops");

    // shared options, registered per subcommand
    std::string panel_path, predictors_path, period_str, out_path;
    bool relax_years = false;

    auto add_panel_opts = [&](CLI::App* cmd, bool need_predictors = false) {
        cmd->add_option("--panel", panel_path, "panel CSV/TSV file")->required();
        cmd->add_option("--period", period_str, "year range first:last");
        cmd->add_flag("--relax-years", relax_years, "accept years outside 2000-2024");
        if (need_predictors)
            cmd->add_option("--predictors", predictors_path, "country predictor table")->required();
    };

    // ---- ingest ----
    auto* cmd_ingest = app.add_subcommand("ingest", "validate a panel and emit it canonically");
    std::string ingest_format = "auto";
    add_panel_opts(cmd_ingest);
    cmd_ingest->add_option("--format", ingest_format, "auto|csv|tsv")
        ->check(CLI::IsMember({"auto", "csv", "tsv"}));
    cmd_ingest->add_option("--emit", out_path, "write canonical panel here (default stdout)");

    // ---- metrics ----
    auto* cmd_metrics = app.add_subcommand("metrics", "inequality metrics");
    cmd_metrics->require_subcommand(1);
    std::string country_arg, disease_arg, unit_arg = "disease", weighting_arg = "equal",
                ranking_arg = "cis", target_arg;
    std::size_t bootstrap_n = 1000;
    double fraction_arg = 0.2;

    auto* m_pbr = cmd_metrics->add_subcommand("pbr", "participation-to-burden ratio");
    add_panel_opts(m_pbr);
    m_pbr->add_option("--country", country_arg)->required();
    m_pbr->add_option("--disease", disease_arg)->required();
    auto* m_si = cmd_metrics->add_subcommand("si", "specialization index");
    add_panel_opts(m_si);
    m_si->add_option("--country", country_arg)->required();
    m_si->add_option("--disease", disease_arg)->required();
    auto* m_gini = cmd_metrics->add_subcommand("gini", "Gini over country-disease PBR pairs");
    add_panel_opts(m_gini);
    m_gini->add_option("--weighting", weighting_arg)->check(CLI::IsMember({"equal", "participants"}));
    auto* m_lorenz = cmd_metrics->add_subcommand("lorenz", "Lorenz curve CSV");
    add_panel_opts(m_lorenz);
    m_lorenz->add_option("--emit", out_path, "output file (default stdout)");
    auto* m_cis = cmd_metrics->add_subcommand("cis", "contribution-to-inequality score");
    add_panel_opts(m_cis);
    m_cis->add_option("--unit", unit_arg)->check(CLI::IsMember({"disease", "country"}));
    m_cis->add_option("--target", target_arg)->required();
    m_cis->add_option("--weighting", weighting_arg)->check(CLI::IsMember({"equal", "participants"}));
    m_cis->add_option("--bootstrap", bootstrap_n, "bootstrap iterations");
    auto* m_leave = cmd_metrics->add_subcommand("leave-out", "top-fraction removal analysis");
    add_panel_opts(m_leave);
    m_leave->add_option("--unit", unit_arg)->check(CLI::IsMember({"disease", "country"}));
    m_leave->add_option("--ranking", ranking_arg)->check(CLI::IsMember({"cis", "volume"}));
    m_leave->add_option("--fraction", fraction_arg, "top fraction to remove");
    auto* m_align = cmd_metrics->add_subcommand("alignment", "income-stratified burden-participation slopes");
    add_panel_opts(m_align, true);

    // ---- decompose ----
    auto* cmd_decomp = app.add_subcommand("decompose", "inequality decompositions");
    cmd_decomp->require_subcommand(1);
    std::string group_arg = "disease", metric_arg = "between-disease-share";
    int bins_arg = 0;
    auto* d_theil = cmd_decomp->add_subcommand("theil", "bidirectional Theil decomposition");
    add_panel_opts(d_theil);
    d_theil->add_option("--group", group_arg)->check(CLI::IsMember({"disease", "country"}));
    d_theil->add_option("--bins", bins_arg, "bin width for a timeline instead of one decomposition");
    auto* d_anova = cmd_decomp->add_subcommand("anova", "two-way FE variance partition");
    add_panel_opts(d_anova);
    auto* d_trend = cmd_decomp->add_subcommand("trend", "temporal trend of a binned metric");
    add_panel_opts(d_trend);
    d_trend->add_option("--metric", metric_arg)
        ->check(CLI::IsMember({"between-disease-share", "pair-gini", "national-median-pbr"}));
    d_trend->add_option("--bins", bins_arg, "bin width (default 2)");
    d_trend->add_option("--bootstrap", bootstrap_n, "bootstrap iterations");

    // ---- attribute ----
    auto* cmd_attr = app.add_subcommand("attribute", "structural attribution");
    cmd_attr->require_subcommand(1);
    int part_arg = 1;
    std::size_t permutations_arg = 100, attr_bootstrap_arg = 100;
    auto* a_hier = cmd_attr->add_subcommand("hierarchical", "sequential block partition");
    add_panel_opts(a_hier, true);
    a_hier->add_option("--part", part_arg)->check(CLI::IsMember({1, 2}));
    auto* a_shap = cmd_attr->add_subcommand("shapley", "permutation Shapley decomposition");
    add_panel_opts(a_shap, true);
    a_shap->add_option("--part", part_arg)->check(CLI::IsMember({1, 2}));
    a_shap->add_option("--permutations", permutations_arg, "orderings sampled (0 = exhaustive)");
    a_shap->add_option("--bootstrap", attr_bootstrap_arg, "bootstrap iterations for CIs");

    // ---- classify ----
    auto* cmd_classify = app.add_subcommand("classify", "residual classification and limiting factors");
    std::string thresholds_arg = "0.5,0.3", components_path;
    double sig_arg = 0.1, multi_arg = 0.7;
    add_panel_opts(cmd_classify, true);
    cmd_classify->add_option("--components", components_path, "as-expected component table");
    cmd_classify->add_option("--thresholds", thresholds_arg, "over,band residual thresholds");
    cmd_classify->add_option("--sig", sig_arg, "coefficient significance level");
    cmd_classify->add_option("--multi", multi_arg, "multiple-factor threshold");
    cmd_classify->add_option("--emit", out_path, "classification CSV (default stdout)");

    // ---- simulate ----
    auto* cmd_sim = app.add_subcommand("simulate", "counterfactual alignment scenarios");
    std::string scenario_arg = "full", steps_arg;
    std::size_t sim_bootstrap = 200;
    add_panel_opts(cmd_sim);
    cmd_sim->add_option("--scenario", scenario_arg)->check(CLI::IsMember({"full", "targeted"}));
    cmd_sim->add_option("--steps", steps_arg, "comma-separated fractions, e.g. 0.25,0.5");
    cmd_sim->add_option("--bootstrap", sim_bootstrap, "bootstrap iterations");
    cmd_sim->add_option("--emit", out_path, "waterfall CSV (default stdout)");

    // ---- network ----
    auto* cmd_net = app.add_subcommand("network", "country-factor network analytics");
    cmd_net->require_subcommand(1);
    std::string classification_path, edges_path, nodes_path, fractions_arg = "0.25,0.5,0.75,1.0";
    double min_weight_arg = 2;
    std::size_t noise_arg = 100;
    auto* n_build = cmd_net->add_subcommand("build", "build graph from a classification table");
    n_build->add_option("--classification", classification_path, "classification CSV")->required();
    n_build->add_option("--min-weight", min_weight_arg, "minimum shared-disease weight");
    n_build->add_option("--edges-out", edges_path, "edge list output")->required();
    n_build->add_option("--nodes-out", nodes_path, "node attribute output")->required();
    auto* n_metrics = cmd_net->add_subcommand("metrics", "structural metrics of a saved graph");
    n_metrics->add_option("--edges", edges_path)->required();
    n_metrics->add_option("--nodes", nodes_path)->required();
    auto* n_evolve = cmd_net->add_subcommand("evolve", "sensitivity-driven metric evolution");
    n_evolve->add_option("--edges", edges_path)->required();
    n_evolve->add_option("--nodes", nodes_path)->required();
    n_evolve->add_option("--fractions", fractions_arg, "cumulative Gini-reduction fractions");
    n_evolve->add_option("--noise", noise_arg, "parametric bootstrap replicates (0 = noise-free)");

    // ---- stats ----
    auto* cmd_stats = app.add_subcommand("stats", "statistical kernels on ad-hoc tables");
    cmd_stats->require_subcommand(1);
    std::string table_path, data_path, value_col = "value", group_col = "group", x_col = "x",
                y_col = "y";
    std::size_t n_perm_arg = 10000;
    auto* s_chi = cmd_stats->add_subcommand("chi2", "Pearson chi-square");
    s_chi->add_option("--table", table_path, "contingency CSV")->required();
    auto* s_v = cmd_stats->add_subcommand("cramers-v", "bias-corrected Cramer's V");
    s_v->add_option("--table", table_path, "contingency CSV")->required();
    auto* s_kw = cmd_stats->add_subcommand("kruskal", "Kruskal-Wallis H");
    s_kw->add_option("--data", data_path)->required();
    s_kw->add_option("--value-col", value_col);
    s_kw->add_option("--group-col", group_col);
    auto* s_rho = cmd_stats->add_subcommand("spearman", "Spearman rank correlation");
    s_rho->add_option("--data", data_path)->required();
    s_rho->add_option("--x-col", x_col);
    s_rho->add_option("--y-col", y_col);
    auto* s_perm = cmd_stats->add_subcommand("permutation", "two-sample permutation test");
    s_perm->add_option("--data", data_path)->required();
    s_perm->add_option("--value-col", value_col);
    s_perm->add_option("--group-col", group_col);
    s_perm->add_option("--n-perm", n_perm_arg);

    // ---- run & emit ----
    auto* cmd_run = app.add_subcommand("run", "execute the full pipeline from a config");
    auto* cmd_emit = app.add_subcommand("emit", "plot-ready figure data from a finished run");
    std::string run_dir, figure_arg;
    cmd_emit->add_option("--run", run_dir, "pipeline output directory")->required();
    cmd_emit
        ->add_option("--figure", figure_arg, "lorenz|waterfall|choropleth|cis_bars|theil_timeline|network_metrics")
        ->required()
        ->check(CLI::IsMember(
            {"lorenz", "waterfall", "choropleth", "cis_bars", "theil_timeline", "network_metrics"}));
    cmd_emit->add_option("--scenario", scenario_arg, "full|targeted (waterfall only)")
        ->check(CLI::IsMember({"full", "targeted"}));
    cmd_emit->add_option("--emit", out_path, "output file (default stdout)");

    // options may trail their subcommand; unmatched ones bubble up to the app
    std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* cmd) {
        for (auto* sub : cmd->get_subcommands([](const CLI::App*) { return true; })) {
            sub->fallthrough();
            enable_fallthrough(sub);
        }
    };
    enable_fallthrough(&app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // bad invocation is a config error
    }

    if (*seed_opt) g.seed = seed_flag;
    if (*out_opt) g.out_dir = out_flag;
    const std::uint64_t seed = g.seed.value_or(42);
    const YearRange period = parse_period(period_str);

    auto print_json = [](const json& j) { std::cout << j.dump(2) << "\n"; };

    if (*cmd_ingest) {
        const char delim = ingest_format == "csv" ? ',' : ingest_format == "tsv" ? '\t' : '\0';
        const Panel panel = load_panel(panel_path, relax_years, delim);
        std::ostringstream out;
        emit_panel(panel, out);
        write_output(out.str(), out_path);
        std::cerr << "cells=" << panel.size() << " countries=" << panel.countries().size()
                  << " diseases=" << panel.diseases().size() << "\n";
        return 0;
    }

    if (*cmd_metrics) {
        const Panel panel = load_panel(panel_path, relax_years);
        const CisWeighting weighting =
            weighting_arg == "participants" ? CisWeighting::ParticipantWeighted : CisWeighting::Equal;
        if (*m_pbr) {
            const auto rec = pbr(panel, CountryCode::from_string(country_arg),
                                 parse_disease_arg(disease_arg), period);
            json j{{"country", rec.country.str()},
                   {"disease", std::string(rec.disease.name())},
                   {"pbr", rec.pbr}};
            if (rec.log_pbr) j["log_pbr"] = *rec.log_pbr;
            print_json(j);
        } else if (*m_si) {
            const double si = specialization_index(panel, CountryCode::from_string(country_arg),
                                                   parse_disease_arg(disease_arg), period);
            print_json({{"country", country_arg}, {"disease", disease_arg}, {"si", si}});
        } else if (*m_gini) {
            const auto pairs = pair_pbrs(panel, period);
            const double gv = weighting == CisWeighting::Equal
                                  ? gini(pbr_values(pairs))
                                  : detail::gini_of_pairs(pairs.pairs, weighting);
            print_json({{"gini", gv},
                        {"n_pairs", pairs.pairs.size()},
                        {"zero_participation_pairs", pairs.zero_participation}});
        } else if (*m_lorenz) {
            write_output(report::lorenz_csv(lorenz(pair_pbrs(panel, period))), out_path);
        } else if (*m_cis) {
            const auto pairs = pair_pbrs(panel, period);
            stats::BootstrapSpec boot;
            boot.n_iterations = bootstrap_n;
            boot.seed = seed;
            boot.threads = g.threads;
            const CisRecord rec =
                unit_arg == "country"
                    ? cis(pairs, CountryCode::from_string(target_arg), weighting, boot)
                    : cis(pairs, parse_disease_arg(target_arg), weighting, boot);
            print_json({{"unit", rec.unit_label},
                        {"cis_percent", rec.cis_percent},
                        {"ci_low", rec.ci_low},
                        {"ci_high", rec.ci_high}});
        } else if (*m_leave) {
            const auto pairs = pair_pbrs(panel, period);
            const auto result = leave_out_gini(
                pairs, unit_arg == "country" ? CisUnit::Country : CisUnit::Disease,
                ranking_arg == "volume" ? LeaveOutRanking::ParticipantVolume : LeaveOutRanking::Cis,
                fraction_arg, weighting);
            print_json({{"gini_before", result.gini_before},
                        {"gini_after", result.gini_after},
                        {"excluded", result.excluded}});
        } else if (*m_align) {
            const auto table = load_predictor_table(predictors_path);
            std::ostringstream out;
            csv::write_row(out, {"income_group", "beta", "p_value", "n"});
            for (auto grp : {IncomeGroup::High, IncomeGroup::UpperMiddle, IncomeGroup::LowerMiddle,
                             IncomeGroup::Low}) {
                try {
                    const auto a = alignment_regression(panel, table, grp, period);
                    csv::write_row(out, {std::string(income_group_name(grp)), csv::format_double(a.beta),
                                         csv::format_double(a.p_value), std::to_string(a.n)});
                } catch (const NumericError& e) {
                    std::cerr << "warning: " << income_group_name(grp) << ": " << e.what() << "\n";
                }
            }
            std::cout << out.str();
        }
        return 0;
    }

    if (*cmd_decomp) {
        const Panel panel = load_panel(panel_path, relax_years);
        if (*d_theil) {
            if (bins_arg > 0) {
                const auto binned = aggregate(panel, {true, true, true, bins_arg});
                std::map<int, std::vector<PanelCell>> by_bin;
                for (const auto& c : binned.cells())
                    if (period.contains(c.year)) by_bin[c.year].push_back(c);
                std::vector<std::pair<int, TheilDecomposition>> timeline;
                for (const auto& [bin, cells] : by_bin) {
                    const Panel sub{std::vector<PanelCell>(cells)};
                    timeline.emplace_back(bin, theil_decompose(pair_pbrs(sub),
                                                               group_arg == "country"
                                                                   ? TheilGrouping::Country
                                                                   : TheilGrouping::Disease));
                }
                std::cout << report::theil_timeline_csv(timeline);
            } else {
                const auto d = theil_decompose(pair_pbrs(panel, period),
                                               group_arg == "country" ? TheilGrouping::Country
                                                                      : TheilGrouping::Disease);
                print_json({{"total", d.total},
                            {"between", d.between},
                            {"within", d.within},
                            {"between_share", d.total > 0 ? d.between / d.total : 0},
                            {"dropped_nonpositive", d.dropped_nonpositive}});
            }
        } else if (*d_anova) {
            const auto fe = fe_observations(panel, period);
            const auto vp = variance_partition(fe.obs);
            auto to_json = [](const VariancePartition& v) {
                return json{{"country", v.r2_country},
                            {"disease", v.r2_disease},
                            {"year", v.r2_year},
                            {"residual", v.r2_residual},
                            {"n_obs", v.n_obs}};
            };
            print_json({{"sequential", to_json(vp.sequential)},
                        {"marginal", to_json(vp.marginal)},
                        {"r2_full", vp.r2_full},
                        {"dropped_nonpositive", fe.dropped_nonpositive}});
        } else if (*d_trend) {
            const int width = bins_arg > 0 ? bins_arg : 2;
            std::function<double(const Panel&)> metric;
            if (metric_arg == "between-disease-share") {
                metric = [](const Panel& sub) {
                    const auto d = theil_decompose(pair_pbrs(sub), TheilGrouping::Disease);
                    return d.total > 0 ? d.between / d.total : 0.0;
                };
            } else if (metric_arg == "pair-gini") {
                metric = [](const Panel& sub) { return gini(pbr_values(pair_pbrs(sub))); };
            } else {
                metric = [](const Panel& sub) { return median_pbr(national_pbr(sub)); };
            }
            const auto trend =
                temporal_trend_bootstrap(panel, width, metric, bootstrap_n, seed, g.threads);
            print_json({{"metric", metric_arg},
                        {"slope", trend.slope},
                        {"intercept", trend.intercept},
                        {"r2", trend.r2},
                        {"p_value", trend.p_value},
                        {"ci_low", trend.ci_low},
                        {"ci_high", trend.ci_high}});
        }
        return 0;
    }

    if (*cmd_attr) {
        const Panel panel = load_panel(panel_path, relax_years);
        const auto raw = load_predictor_table(predictors_path);
        auto ctx = build_attribute_context(panel, raw, period);
        const auto blocks = part_arg == 1 ? default_part1_blocks() : default_part2_blocks();
        validate_blocks(blocks, ctx.table);

        Eigen::VectorXd y = ctx.y_part1;
        if (part_arg == 2) {
            const auto res = residualize_part2(ctx.y_part1, ctx.table);
            y.resize(static_cast<long>(res.records.size()));
            for (std::size_t i = 0; i < res.records.size(); ++i)
                y[static_cast<long>(i)] = res.records[i].residual;
        }

        if (*a_hier) {
            json rows = json::array();
            for (const auto& b : hierarchical_partition(y, ctx.table, blocks))
                rows.push_back({{"block", b.name},
                                {"n_vars", b.n_vars},
                                {"incremental_r2", b.incremental},
                                {"cumulative_r2", b.cumulative}});
            print_json({{"part", part_arg}, {"blocks", rows}});
        } else {
            ShapleyOptions opt;
            opt.n_permutations = permutations_arg;
            opt.n_bootstrap = attr_bootstrap_arg;
            opt.seed = seed;
            opt.threads = g.threads;
            const auto result = shapley_r2(y, ctx.table, block_fields(blocks, ctx.table), opt, blocks);
            json j = shapley_to_json(result);
            j["part"] = part_arg;
            print_json(j);
        }
        return 0;
    }

    if (*cmd_classify) {
        const Panel panel = load_panel(panel_path, relax_years);
        const auto raw = load_predictor_table(predictors_path);
        auto ctx = build_attribute_context(panel, raw, period);

        const auto cut = thresholds_arg.find(',');
        if (cut == std::string::npos) throw ConfigError("--thresholds expects over,band");
        ClassificationThresholds thresholds;
        thresholds.over = std::stod(thresholds_arg.substr(0, cut));
        thresholds.band = std::stod(thresholds_arg.substr(cut + 1));

        const auto blocks = default_part2_blocks();
        std::vector<std::string> fields = block_fields(blocks, ctx.table);
        for (const auto* control : {"log_gdp", "log_population"})
            if (ctx.table.has(control) && !ctx.table.is_excluded(control)) fields.push_back(control);

        const auto reg =
            disease_regressions(ctx.pairs, ctx.table, fields, blocks, sig_arg, multi_arg);
        for (const auto& s : reg.skipped) std::cerr << "warning: skipped disease " << s << "\n";
        std::vector<PairResidual> residuals;
        for (const auto& d : reg.diagnoses)
            residuals.insert(residuals.end(), d.residuals.begin(), d.residuals.end());
        auto classified = classify(residuals, thresholds);
        assign_factor_underperforming(classified, reg.diagnoses);
        assign_factor_overperforming(classified);
        assign_factor_matching(classified, PerformanceStatus::AsExpected);

        std::ostringstream out;
        csv::write_row(out, {"country", "disease", "residual", "status", "factor", "cis"});
        for (const auto& p : classified)
            csv::write_row(out, {p.country.str(), std::string(p.disease.name()),
                                 csv::format_double(p.residual), std::string(status_name(p.status)),
                                 std::string(factor_name(p.factor)),
                                 csv::format_double(p.cis_contribution)});
        write_output(out.str(), out_path);
        return 0;
    }

    if (*cmd_sim) {
        const Panel panel = load_panel(panel_path, relax_years);
        const auto national = national_pbr(panel, period);
        const Scenario scenario = scenario_arg == "targeted" ? Scenario::Targeted : Scenario::Full;
        std::vector<double> steps =
            steps_arg.empty() ? default_steps(scenario) : parse_fraction_list(steps_arg);
        const auto result = simulate(scenario, national, steps, sim_bootstrap, seed, g.threads);
        write_output(report::waterfall_csv(result), out_path);
        std::cerr << "baseline_gini=" << csv::format_double(result.baseline_gini)
                  << " median_pbr=" << csv::format_double(result.baseline_median)
                  << " p=" << csv::format_double(result.p_value) << "\n";
        return 0;
    }

    if (*cmd_net) {
        if (*n_build) {
            const auto classified = load_classification(classification_path);
            const auto graph = build_graph(classified, min_weight_arg);
            std::ofstream edges(edges_path, std::ios::binary), nodes(nodes_path, std::ios::binary);
            if (!edges || !nodes) throw ConfigError("cannot write graph outputs");
            write_graph(graph, edges, nodes);
            std::cerr << "nodes=" << graph.nodes.size() << " edges=" << graph.edges.size() << "\n";
        } else if (*n_metrics) {
            const auto graph = load_graph(edges_path, nodes_path);
            const auto m = metrics(graph, seed);
            print_json({{"n_nodes", graph.nodes.size()},
                        {"n_edges", graph.edges.size()},
                        {"density", m.density},
                        {"factor_homophily", m.factor_homophily},
                        {"status_homophily", m.status_homophily},
                        {"degree_assortativity", m.degree_assortativity},
                        {"factor_assortativity", m.factor_assortativity},
                        {"avg_clustering", m.avg_clustering},
                        {"modularity", m.modularity},
                        {"avg_path_length", m.avg_path_length},
                        {"diameter", m.diameter},
                        {"n_components", m.n_components}});
        } else if (*n_evolve) {
            const auto graph = load_graph(edges_path, nodes_path);
            const auto m = metrics(graph, seed);
            const auto steps = evolve(m, SensitivityModel{}, parse_fraction_list(fractions_arg),
                                      noise_arg, seed, g.threads);
            std::cout << report::evolution_csv(steps);
        }
        return 0;
    }

    if (*cmd_stats) {
        if (*s_chi) {
            const auto result = stats::chi_square(load_contingency(table_path));
            print_json({{"chi2", result.chi2}, {"df", result.df}, {"p", result.p}});
        } else if (*s_v) {
            const auto table = load_contingency(table_path);
            const auto result = stats::cramers_v_corrected(table);
            print_json({{"v_corrected", result.v},
                        {"interpretation", std::string(result.interpretation)},
                        {"v_uncorrected", stats::cramers_v(table)}});
        } else if (*s_kw) {
            const auto grouped = load_grouped(data_path, value_col, group_col);
            std::vector<std::vector<double>> groups;
            for (const auto& [label, values] : grouped) groups.push_back(values);
            const auto result = stats::kruskal_wallis(groups);
            print_json({{"h", result.h}, {"df", result.df}, {"p", result.p}});
        } else if (*s_rho) {
            std::ifstream in(data_path);
            if (!in) throw ConfigError("cannot open data file: " + data_path);
            const csv::Table t = csv::read(in);
            const auto xi = t.require_column(x_col);
            const auto yi = t.require_column(y_col);
            std::vector<double> xs, ys;
            for (const auto& row : t.rows) {
                xs.push_back(csv::parse_double(row.at(xi)).value());
                ys.push_back(csv::parse_double(row.at(yi)).value());
            }
            const auto result = stats::spearman(xs, ys);
            print_json({{"rho", result.rho}, {"p", result.p}, {"n", result.n}});
        } else if (*s_perm) {
            const auto grouped = load_grouped(data_path, value_col, group_col);
            if (grouped.size() != 2) throw DataError("permutation test expects exactly 2 groups");
            auto it = grouped.begin();
            const auto& a = it->second;
            const auto& b = std::next(it)->second;
            const double p =
                stats::permutation_test(a, b, stats::mean_difference, n_perm_arg, seed, g.threads);
            print_json({{"p", p}, {"n_a", a.size()}, {"n_b", b.size()}, {"n_perm", n_perm_arg}});
        }
        return 0;
    }

    if (*cmd_run) {
        if (g.config_path.empty())
            throw ConfigError(std::string("run requires --config or ") + config_env_var);
        RunConfig cfg = load_config(g.config_path);
        if (g.seed) cfg.seed = *g.seed;
        if (g.out_dir) cfg.out_dir = *g.out_dir;
        if (g.threads > 1) cfg.threads = g.threads;
        const auto manifest = run_pipeline(cfg);
        for (const auto& s : manifest.stages) {
            std::cerr << s.name << ": " << s.millis << " ms";
            if (!s.warnings.empty()) std::cerr << " (" << s.warnings.size() << " warnings)";
            std::cerr << "\n";
        }
        std::cout << "run complete: " << manifest.output_digests.size() << " result files in "
                  << cfg.out_dir << "\n";
        return 0;
    }

    if (*cmd_emit) {
        namespace fs = std::filesystem;
        auto need = [&](const std::string& file) {
            const auto p = fs::path(run_dir) / file;
            if (!fs::exists(p))
                throw DataError("figure source missing (stage not run?): " + p.string());
            std::ifstream in(p, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        };
        std::string content;
        if (figure_arg == "lorenz") content = need("lorenz.csv");
        else if (figure_arg == "waterfall")
            content = need(scenario_arg == "targeted" ? "scenario_targeted.csv" : "scenario_full.csv");
        else if (figure_arg == "choropleth") content = need("choropleth_national.csv");
        else if (figure_arg == "cis_bars") content = need("cis_disease.csv");
        else if (figure_arg == "theil_timeline") content = need("theil_bins.csv");
        else {
            const json j = json::parse(need("network_metrics.json"));
            std::ostringstream out;
            csv::write_row(out, {"metric", "value"});
            for (const auto& [key, value] : j.items())
                csv::write_row(out, {key, value.dump()});
            content = out.str();
        }
        write_output(content, out_path);
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const trialineq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const trialineq::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const trialineq::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
