#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "trialineq/network.hpp"

using namespace trialineq;
using Catch::Matchers::WithinAbs;

namespace {

ClassifiedPair make_pair(const char* country, std::uint8_t disease, LimitingFactor f,
                         PerformanceStatus s, double residual = 0.0) {
    ClassifiedPair p;
    p.country = CountryCode::from_string(country);
    p.disease = DiseaseCategory(disease);
    p.factor = f;
    p.status = s;
    p.residual = residual;
    return p;
}

// complete graph on the given number of nodes, unit weights
ResearchGraph complete_graph(std::uint32_t n) {
    ResearchGraph g;
    static const char* codes[] = {"ALB", "ARG", "AUS", "AUT", "BEL", "BEN", "BGD", "BHR"};
    for (std::uint32_t i = 0; i < n; ++i) {
        GraphNode node;
        node.country = CountryCode::from_string(codes[i]);
        node.factor = LimitingFactor::ResearchInvestment;
        node.status = PerformanceStatus::AsExpected;
        g.nodes.push_back(node);
    }
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j) g.edges.push_back({i, j, 1.0});
    return g;
}

// all set partitions of n nodes (restricted growth strings); the brute-force
// modularity oracle walks every one of them
void for_each_partition(std::size_t n, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> assignment(n, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int max_used) {
        if (i == n) {
            fn(assignment);
            return;
        }
        for (int c = 0; c <= max_used + 1; ++c) {
            assignment[i] = c;
            rec(i + 1, std::max(max_used, c));
        }
    };
    rec(1, 0); // node 0 pinned to community 0
}

double brute_force_best_modularity(const ResearchGraph& g) {
    double best = -1e9;
    for_each_partition(g.nodes.size(), [&](const std::vector<int>& assignment) {
        best = std::max(best, modularity_of(g, assignment));
    });
    return best;
}

} // namespace

TEST_CASE("graph construction counts shared diseases") {
    std::vector<ClassifiedPair> pairs;
    for (std::uint8_t d : {0, 1, 2})
        pairs.push_back(make_pair("USA", d, LimitingFactor::ResearchInvestment,
                                  PerformanceStatus::OverPerforming));
    for (std::uint8_t d : {0, 1, 2})
        pairs.push_back(make_pair("BRA", d, LimitingFactor::Governance,
                                  PerformanceStatus::UnderPerforming));
    const auto g = build_graph(pairs, 2);
    REQUIRE(g.nodes.size() == 2);
    REQUIRE(g.edges.size() == 1);
    REQUIRE(g.edges[0].weight == 3.0);
    REQUIRE(g.nodes[0].disease_count == 3);
}

TEST_CASE("edges below the weight threshold are dropped") {
    std::vector<ClassifiedPair> pairs{
        make_pair("USA", 0, LimitingFactor::ResearchInvestment, PerformanceStatus::OverPerforming),
        make_pair("BRA", 0, LimitingFactor::Governance, PerformanceStatus::UnderPerforming),
        make_pair("BRA", 1, LimitingFactor::Governance, PerformanceStatus::UnderPerforming),
    };
    const auto g = build_graph(pairs, 2);
    REQUIRE(g.edges.empty()); // only one shared disease
    const auto g1 = build_graph(pairs, 1);
    REQUIRE(g1.edges.size() == 1);
}

TEST_CASE("status aggregation rules: modal versus mean residual") {
    std::vector<ClassifiedPair> pairs{
        make_pair("USA", 0, LimitingFactor::Governance, PerformanceStatus::OverPerforming, 2.0),
        make_pair("USA", 1, LimitingFactor::Governance, PerformanceStatus::OverPerforming, 0.6),
        make_pair("USA", 2, LimitingFactor::Governance, PerformanceStatus::UnderPerforming, -2.0),
        make_pair("BRA", 0, LimitingFactor::Governance, PerformanceStatus::AsExpected, 0.0),
    };
    const auto modal = build_graph(pairs, 1, StatusAggregation::Modal);
    REQUIRE(modal.nodes[1].status == PerformanceStatus::OverPerforming); // 2 of 3 (USA sorts after BRA)
    const auto mean = build_graph(pairs, 1, StatusAggregation::MeanResidual);
    // mean residual = 0.2 -> inside the as-expected band
    REQUIRE(mean.nodes[1].status == PerformanceStatus::AsExpected);
    REQUIRE_THAT(mean.nodes[1].mean_residual, WithinAbs(0.2, 1e-12));
}

TEST_CASE("unassigned-factor pairs never form nodes") {
    std::vector<ClassifiedPair> pairs{
        make_pair("USA", 0, LimitingFactor::Unassigned, PerformanceStatus::Unclassified),
        make_pair("BRA", 0, LimitingFactor::Governance, PerformanceStatus::AsExpected),
    };
    const auto g = build_graph(pairs, 1);
    REQUIRE(g.nodes.size() == 1);
    REQUIRE(g.nodes[0].country.str() == "BRA");
}

TEST_CASE("complete graph metrics") {
    const auto g = complete_graph(4);
    const auto m = metrics(g, 1);
    REQUIRE_THAT(m.density, WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(m.avg_path_length, WithinAbs(1.0, 1e-12));
    REQUIRE(m.diameter == 1);
    REQUIRE_THAT(m.avg_clustering, WithinAbs(1.0, 1e-12));
    REQUIRE(m.n_components == 1);
    REQUIRE_THAT(m.factor_homophily, WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(m.status_homophily + 0.0, WithinAbs(1.0, 1e-12));
}

TEST_CASE("homophily on a hand-enumerated triangle") {
    ResearchGraph g = complete_graph(3);
    g.nodes[2].factor = LimitingFactor::Governance;
    // edges: (0,1) same factor, (0,2) and (1,2) cross
    const auto m = metrics(g, 1);
    REQUIRE_THAT(m.factor_homophily, WithinAbs(1.0 / 3.0, 1e-12));
    // homophily + cross share = 1 exactly
    const auto redist = edge_redistribution(g, m.factor_homophily);
    REQUIRE_THAT(redist.within_before + redist.cross_before, WithinAbs(3.0, 1e-12));
}

TEST_CASE("density recomputed from the edge list matches the metric") {
    std::vector<ClassifiedPair> pairs;
    static const char* codes[] = {"USA", "BRA", "KEN", "DEU", "JPN"};
    RngStream rng(3, "net-density");
    for (const char* c : codes)
        for (std::uint8_t d = 0; d < 6; ++d)
            if (rng.uniform() < 0.7)
                pairs.push_back(make_pair(c, d, LimitingFactor::ResearchInvestment,
                                          PerformanceStatus::AsExpected));
    const auto g = build_graph(pairs, 2);
    if (g.nodes.size() >= 2) {
        const auto m = metrics(g, 1);
        const double n = static_cast<double>(g.nodes.size());
        REQUIRE_THAT(m.density,
                     WithinAbs(2.0 * static_cast<double>(g.edges.size()) / (n * (n - 1.0)), 1e-15));
    }
}

TEST_CASE("path metrics fall back to the largest component when disconnected") {
    ResearchGraph g = complete_graph(5);
    g.edges.clear();
    g.edges.push_back({0, 1, 1.0});
    g.edges.push_back({1, 2, 1.0});
    g.edges.push_back({3, 4, 1.0});
    const auto m = metrics(g, 1);
    REQUIRE(m.n_components == 2);
    REQUIRE(m.path_metrics_on_largest_component);
    REQUIRE_THAT(m.avg_path_length, WithinAbs((1.0 + 1.0 + 2.0) / 3.0, 1e-12));
    REQUIRE(m.diameter == 2);
}

TEST_CASE("single-node graphs have no path metrics") {
    ResearchGraph g;
    GraphNode n;
    n.country = CountryCode::from_string("USA");
    g.nodes.push_back(n);
    REQUIRE_THROWS_AS(metrics(g, 1), NumericError);
}

TEST_CASE("louvain recovers two cliques joined by a single edge") {
    ResearchGraph g = complete_graph(8);
    g.edges.clear();
    for (std::uint32_t i = 0; i < 4; ++i)
        for (std::uint32_t j = i + 1; j < 4; ++j) g.edges.push_back({i, j, 1.0});
    for (std::uint32_t i = 4; i < 8; ++i)
        for (std::uint32_t j = i + 1; j < 8; ++j) g.edges.push_back({i, j, 1.0});
    g.edges.push_back({0, 4, 1.0});

    const auto lv = louvain(g, 42);
    REQUIRE(lv.n_communities == 2);
    REQUIRE(lv.sizes == std::vector<std::size_t>{4, 4});
    for (std::uint32_t i = 1; i < 4; ++i) REQUIRE(lv.community[i] == lv.community[0]);
    for (std::uint32_t i = 5; i < 8; ++i) REQUIRE(lv.community[i] == lv.community[4]);
    REQUIRE_THAT(lv.modularity, WithinAbs(brute_force_best_modularity(g), 1e-9));
}

TEST_CASE("louvain matches exhaustive partition search on small random graphs") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        RngStream rng(seed, "net-louvain");
        ResearchGraph g = complete_graph(7);
        g.edges.clear();
        for (std::uint32_t i = 0; i < 7; ++i)
            for (std::uint32_t j = i + 1; j < 7; ++j)
                if (rng.uniform() < 0.45) g.edges.push_back({i, j, 1.0 + rng.uniform_int(3)});
        if (g.edges.empty()) continue;
        const auto lv = louvain(g, 42);
        REQUIRE_THAT(lv.modularity, WithinAbs(brute_force_best_modularity(g), 1e-9));
    }
}

TEST_CASE("louvain never loses to the singleton partition") {
    ResearchGraph g = complete_graph(6);
    const auto lv = louvain(g, 7);
    // the all-in-one partition of any connected graph has Q = 0
    REQUIRE(lv.modularity >= -1e-12);
}

TEST_CASE("noise-free evolution is linear and hits the published endpoints") {
    NetworkMetrics baseline;
    baseline.density = 0.441;
    baseline.factor_homophily = 0.523;
    baseline.modularity = 0.121;
    baseline.avg_path_length = 1.562;

    SensitivityModel model;
    const auto steps = evolve(baseline, model, {0.5, 1.0}, 0, 42);
    REQUIRE_THAT(steps[1].density.value, WithinAbs(0.661, 1e-12));
    REQUIRE_THAT(steps[1].homophily.value, WithinAbs(0.314, 1e-12));

    // linear in the reduction fraction: half step sits exactly halfway
    REQUIRE_THAT(steps[0].density.value, WithinAbs((baseline.density + steps[1].density.value) / 2, 1e-12));
    const auto direct = evolve(baseline, model, {1.0}, 0, 42);
    REQUIRE_THAT(direct[0].density.value, WithinAbs(steps[1].density.value, 1e-12));
    REQUIRE_THAT(direct[0].homophily.value, WithinAbs(steps[1].homophily.value, 1e-12));

    // zero reduction leaves everything in place
    const auto none = evolve(baseline, model, {0.0}, 0, 42);
    REQUIRE(none[0].density.value == baseline.density);
    REQUIRE(none[0].homophily.value == baseline.factor_homophily);
    REQUIRE(none[0].modularity.value == baseline.modularity);
}

TEST_CASE("evolved density and homophily are clamped to the unit interval") {
    NetworkMetrics baseline;
    baseline.density = 0.9;
    baseline.factor_homophily = 0.05;
    baseline.modularity = 0.1;
    baseline.avg_path_length = 1.5;
    const auto steps = evolve(baseline, SensitivityModel{}, {1.0}, 0, 42);
    REQUIRE(steps[0].density.value <= 1.0);
    REQUIRE(steps[0].homophily.value >= 0.0);
}

TEST_CASE("evolution noise replicates are seeded and bounded") {
    NetworkMetrics baseline;
    baseline.density = 0.441;
    baseline.factor_homophily = 0.523;
    baseline.modularity = 0.121;
    baseline.avg_path_length = 1.562;
    const auto a = evolve(baseline, SensitivityModel{}, {0.25, 0.5, 1.0}, 200, 99);
    const auto b = evolve(baseline, SensitivityModel{}, {0.25, 0.5, 1.0}, 200, 99);
    for (std::size_t s = 0; s < a.size(); ++s) {
        REQUIRE(a[s].density.ci_low == b[s].density.ci_low);
        REQUIRE(a[s].density.ci_low <= a[s].density.value);
        REQUIRE(a[s].density.ci_high >= a[s].density.value);
        REQUIRE(a[s].homophily.ci_low >= 0.0);
        REQUIRE(a[s].density.ci_high <= 1.0);
    }
}

TEST_CASE("edge redistribution holds the total fixed and preserves class sums") {
    // 6 within-factor edges, 4 cross-factor edges
    ResearchGraph g;
    static const char* codes[] = {"ALB", "ARG", "AUS", "AUT", "BEL"};
    for (int i = 0; i < 5; ++i) {
        GraphNode n;
        n.country = CountryCode::from_string(codes[i]);
        n.factor = i < 3 ? LimitingFactor::ResearchInvestment : LimitingFactor::Governance;
        g.nodes.push_back(n);
    }
    g.edges = {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}, {3, 4, 1},          // within: 4
               {0, 3, 1}, {1, 3, 1}, {2, 4, 1}, {0, 4, 1}, {1, 4, 1}}; // cross: 5
    const auto baseline_h = 4.0 / 9.0;

    const auto same = edge_redistribution(g, baseline_h);
    REQUIRE_THAT(same.within_after, WithinAbs(same.within_before, 1e-12));
    REQUIRE_THAT(same.cross_after, WithinAbs(same.cross_before, 1e-12));

    const auto shifted = edge_redistribution(g, 0.2);
    REQUIRE_THAT(shifted.within_after + shifted.cross_after, WithinAbs(9.0, 1e-12));
    REQUIRE_THAT(shifted.within_after, WithinAbs(std::round(0.2 * 9), 1e-12));
    double within_rows = 0, cross_rows = 0;
    for (const auto& row : shifted.pairs)
        (row.factor_a == row.factor_b ? within_rows : cross_rows) += row.after;
    REQUIRE_THAT(within_rows, WithinAbs(shifted.within_after, 1e-12));
    REQUIRE_THAT(cross_rows, WithinAbs(shifted.cross_after, 1e-12));
}

TEST_CASE("graph csv io round trip") {
    std::vector<ClassifiedPair> pairs;
    for (std::uint8_t d : {0, 1, 2, 3})
        pairs.push_back(make_pair("USA", d, LimitingFactor::ResearchInvestment,
                                  PerformanceStatus::OverPerforming, 0.5));
    for (std::uint8_t d : {0, 1, 2})
        pairs.push_back(make_pair("BRA", d, LimitingFactor::Governance,
                                  PerformanceStatus::UnderPerforming, -1.0));
    for (std::uint8_t d : {1, 2, 3})
        pairs.push_back(make_pair("KEN", d, LimitingFactor::HealthInfrastructure,
                                  PerformanceStatus::AsExpected, 0.1));
    const auto g = build_graph(pairs, 2);

    std::ostringstream edges, nodes;
    write_graph(g, edges, nodes);
    std::istringstream edges_in(edges.str()), nodes_in(nodes.str());
    const auto g2 = read_graph(edges_in, nodes_in);

    REQUIRE(g2.nodes.size() == g.nodes.size());
    REQUIRE(g2.edges.size() == g.edges.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        REQUIRE(g2.nodes[i].country == g.nodes[i].country);
        REQUIRE(g2.nodes[i].factor == g.nodes[i].factor);
        REQUIRE(g2.nodes[i].status == g.nodes[i].status);
        REQUIRE(g2.nodes[i].disease_count == g.nodes[i].disease_count);
    }
    const auto m1 = metrics(g, 5);
    const auto m2 = metrics(g2, 5);
    REQUIRE(m1.density == m2.density);
    REQUIRE(m1.factor_homophily == m2.factor_homophily);
}
