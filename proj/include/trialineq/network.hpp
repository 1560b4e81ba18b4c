#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "trialineq/classifier.hpp"
#include "trialineq/csv.hpp"
#include "trialineq/error.hpp"
#include "trialineq/rng.hpp"
#include "trialineq/stats.hpp"

namespace trialineq {

struct GraphNode {
    CountryCode country;
    LimitingFactor factor = LimitingFactor::Unassigned;
    PerformanceStatus status = PerformanceStatus::Unclassified;
    std::uint32_t disease_mask = 0;
    int disease_count = 0;
    double mean_residual = 0;

    std::string id() const { return country.str() + "-" + std::string(factor_name(factor)); }
};

struct GraphEdge {
    std::uint32_t a = 0; // node indices, a < b
    std::uint32_t b = 0;
    double weight = 0; // number of shared diseases
};

/// Weighted undirected graph over country-factor nodes. No self loops; edges
/// below the construction threshold are absent entirely.
struct ResearchGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;

    std::vector<std::vector<std::pair<std::uint32_t, double>>> adjacency() const {
        std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(nodes.size());
        for (const auto& e : edges) {
            adj[e.a].emplace_back(e.b, e.weight);
            adj[e.b].emplace_back(e.a, e.weight);
        }
        return adj;
    }
};

/// How pair-level statuses collapse onto a country-factor node: modal status
/// (ties to the earlier enum value) or re-thresholding the mean residual.
enum class StatusAggregation : std::uint8_t { Modal, MeanResidual };

/// One node per distinct (country, factor); edge weight counts the diseases
/// two nodes share, edges lighter than min_weight are dropped. Pairs without
/// an assigned factor cannot form nodes and are skipped.
inline ResearchGraph build_graph(const std::vector<ClassifiedPair>& pairs, double min_weight = 2,
                                 StatusAggregation status_rule = StatusAggregation::Modal,
                                 const ClassificationThresholds& thresholds = {}) {
    if (pairs.empty()) throw DataError("build_graph: no classified pairs");

    struct Accum {
        std::uint32_t disease_mask = 0;
        double residual_sum = 0;
        std::size_t n = 0;
        std::map<PerformanceStatus, std::size_t> statuses;
    };
    std::map<std::pair<CountryCode, LimitingFactor>, Accum> groups;
    for (const auto& p : pairs) {
        if (p.factor == LimitingFactor::Unassigned) continue;
        auto& g = groups[{p.country, p.factor}];
        if (!p.disease.is_aggregate()) g.disease_mask |= (1u << p.disease.id());
        g.residual_sum += p.residual;
        g.n += 1;
        ++g.statuses[p.status];
    }
    if (groups.empty()) throw DataError("build_graph: no pairs with assigned factors");

    ResearchGraph graph;
    for (const auto& [key, acc] : groups) {
        GraphNode node;
        node.country = key.first;
        node.factor = key.second;
        node.disease_mask = acc.disease_mask;
        node.disease_count = std::popcount(acc.disease_mask);
        node.mean_residual = acc.residual_sum / static_cast<double>(acc.n);
        if (status_rule == StatusAggregation::Modal) {
            std::size_t best = 0;
            for (const auto& [s, n] : acc.statuses)
                if (n > best) {
                    best = n;
                    node.status = s;
                }
        } else {
            const double r = node.mean_residual;
            if (r > thresholds.over) node.status = PerformanceStatus::OverPerforming;
            else if (r < -thresholds.band) node.status = PerformanceStatus::UnderPerforming;
            else if (std::abs(r) < thresholds.band) node.status = PerformanceStatus::AsExpected;
            else node.status = PerformanceStatus::Unclassified;
        }
        graph.nodes.push_back(node);
    }

    for (std::uint32_t i = 0; i < graph.nodes.size(); ++i) {
        for (std::uint32_t j = i + 1; j < graph.nodes.size(); ++j) {
            const auto shared = std::popcount(graph.nodes[i].disease_mask & graph.nodes[j].disease_mask);
            if (shared >= min_weight) graph.edges.push_back({i, j, static_cast<double>(shared)});
        }
    }
    return graph;
}

// ---------------------------------------------------------------------------
// Louvain community detection

struct LouvainResult {
    std::vector<int> community; // per node, relabeled 0..k-1 by first appearance
    double modularity = 0;
    std::size_t n_communities = 0;
    std::vector<std::size_t> sizes;
};

/// Newman modularity of an arbitrary partition on the weighted graph.
inline double modularity_of(const ResearchGraph& graph, const std::vector<int>& community) {
    if (community.size() != graph.nodes.size()) throw NumericError("modularity_of: partition size mismatch");
    double two_w = 0;
    std::vector<double> degree(graph.nodes.size(), 0);
    for (const auto& e : graph.edges) {
        degree[e.a] += e.weight;
        degree[e.b] += e.weight;
        two_w += 2 * e.weight;
    }
    if (!(two_w > 0)) return 0.0;
    double q = 0;
    for (const auto& e : graph.edges)
        if (community[e.a] == community[e.b]) q += 2 * e.weight / two_w;
    std::map<int, double> comm_degree;
    for (std::size_t i = 0; i < community.size(); ++i) comm_degree[community[i]] += degree[i];
    for (const auto& [c, d] : comm_degree) q -= (d / two_w) * (d / two_w);
    return q;
}

namespace detail {

struct LevelGraph {
    std::size_t n = 0;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> adj; // no self entries
    std::vector<double> self_weight;                                // internal (self-loop) weight
    double two_w = 0;                                               // total degree incl. self loops
    std::vector<double> degree;                                     // weighted, self loop counts twice

    void finalize() {
        degree.assign(n, 0);
        two_w = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (const auto& [j, w] : adj[i]) degree[i] += w;
            degree[i] += 2 * self_weight[i];
            two_w += degree[i];
        }
    }
};

inline std::vector<int> louvain_level(LevelGraph& g, RngStream& stream) {
    std::vector<int> comm(g.n);
    for (std::size_t i = 0; i < g.n; ++i) comm[i] = static_cast<int>(i);
    std::vector<double> comm_tot(g.n); // total degree per community
    for (std::size_t i = 0; i < g.n; ++i) comm_tot[i] = g.degree[i];

    std::vector<std::size_t> order(g.n);
    for (std::size_t i = 0; i < g.n; ++i) order[i] = i;
    stream.shuffle(order);

    bool moved = true;
    while (moved) {
        moved = false;
        for (std::size_t node : order) {
            const int old_comm = comm[node];
            std::map<int, double> links; // weight from node to each neighbor community
            for (const auto& [j, w] : g.adj[node]) links[comm[j]] += w;

            comm_tot[old_comm] -= g.degree[node];
            const double w_old = links.count(old_comm) ? links[old_comm] : 0.0;
            double best_gain = w_old - comm_tot[old_comm] * g.degree[node] / g.two_w;
            int best_comm = old_comm;
            for (const auto& [c, w] : links) {
                if (c == old_comm) continue;
                const double gain = w - comm_tot[c] * g.degree[node] / g.two_w;
                if (gain > best_gain + 1e-12 || (std::abs(gain - best_gain) <= 1e-12 && c < best_comm)) {
                    best_gain = gain;
                    best_comm = c;
                }
            }
            comm[node] = best_comm;
            comm_tot[best_comm] += g.degree[node];
            if (best_comm != old_comm) moved = true;
        }
    }
    return comm;
}

inline LevelGraph aggregate_level(const LevelGraph& g, const std::vector<int>& comm,
                                  std::vector<int>& relabel) {
    relabel.assign(g.n, -1);
    int next = 0;
    for (std::size_t i = 0; i < g.n; ++i) {
        if (relabel[static_cast<std::size_t>(comm[i])] == -1)
            relabel[static_cast<std::size_t>(comm[i])] = next++;
    }
    LevelGraph out;
    out.n = static_cast<std::size_t>(next);
    out.adj.assign(out.n, {});
    out.self_weight.assign(out.n, 0);
    std::map<std::pair<int, int>, double> between;
    for (std::size_t i = 0; i < g.n; ++i) {
        const int ci = relabel[static_cast<std::size_t>(comm[i])];
        out.self_weight[static_cast<std::size_t>(ci)] += g.self_weight[i];
        for (const auto& [j, w] : g.adj[i]) {
            if (j < i) continue; // visit each undirected edge once
            const int cj = relabel[static_cast<std::size_t>(comm[j])];
            if (ci == cj) out.self_weight[static_cast<std::size_t>(ci)] += w;
            else between[{std::min(ci, cj), std::max(ci, cj)}] += w;
        }
    }
    for (const auto& [key, w] : between) {
        out.adj[static_cast<std::size_t>(key.first)].emplace_back(static_cast<std::uint32_t>(key.second), w);
        out.adj[static_cast<std::size_t>(key.second)].emplace_back(static_cast<std::uint32_t>(key.first), w);
    }
    out.finalize();
    return out;
}

} // namespace detail

/// Greedy modularity maximization (Louvain): seeded node-order shuffles and
/// several restarts, best partition kept, fully deterministic for a given
/// seed. Ties in the greedy step break toward the lower community id.
inline LouvainResult louvain(const ResearchGraph& graph, std::uint64_t seed = 42,
                             std::size_t restarts = 8) {
    if (graph.nodes.empty()) throw NumericError("louvain: empty graph");

    LouvainResult best;
    best.modularity = -std::numeric_limits<double>::infinity();

    for (std::size_t attempt = 0; attempt < std::max<std::size_t>(restarts, 1); ++attempt) {
        RngStream stream(seed, "louvain", attempt);
        detail::LevelGraph level;
        level.n = graph.nodes.size();
        level.adj.assign(level.n, {});
        level.self_weight.assign(level.n, 0);
        for (const auto& e : graph.edges) {
            level.adj[e.a].emplace_back(e.b, e.weight);
            level.adj[e.b].emplace_back(e.a, e.weight);
        }
        level.finalize();

        std::vector<int> node_comm(level.n);
        for (std::size_t i = 0; i < level.n; ++i) node_comm[i] = static_cast<int>(i);

        if (level.two_w > 0) {
            while (true) {
                const auto comm = detail::louvain_level(level, stream);
                std::vector<int> relabel;
                detail::LevelGraph next = detail::aggregate_level(level, comm, relabel);
                for (auto& c : node_comm)
                    c = relabel[static_cast<std::size_t>(comm[static_cast<std::size_t>(c)])];
                if (next.n == level.n) break; // no further merging
                level = std::move(next);
            }
        }

        const double q = modularity_of(graph, node_comm);
        if (q > best.modularity + 1e-15) {
            best.modularity = q;
            best.community = node_comm;
        }
    }

    // relabel communities by first appearance for stable output
    std::map<int, int> relabel;
    for (auto& c : best.community) {
        auto [it, inserted] = relabel.emplace(c, static_cast<int>(relabel.size()));
        c = it->second;
    }
    best.n_communities = relabel.size();
    best.sizes.assign(best.n_communities, 0);
    for (int c : best.community) ++best.sizes[static_cast<std::size_t>(c)];
    return best;
}

// ---------------------------------------------------------------------------
// Structural metrics

struct NetworkMetrics {
    double density = 0;
    double factor_homophily = 0;
    double status_homophily = 0;
    double degree_assortativity = 0;
    double factor_assortativity = 0;
    double avg_clustering = 0;
    double modularity = 0;
    double avg_path_length = 0;
    int diameter = 0;
    int n_components = 0;
    bool path_metrics_on_largest_component = false;
};

namespace detail {

// Pearson correlation over the degree pairs of every directed edge
inline double degree_assortativity_of(const ResearchGraph& g) {
    std::vector<double> degree(g.nodes.size(), 0);
    for (const auto& e : g.edges) {
        degree[e.a] += 1;
        degree[e.b] += 1;
    }
    std::vector<double> x, y;
    x.reserve(2 * g.edges.size());
    y.reserve(2 * g.edges.size());
    for (const auto& e : g.edges) {
        x.push_back(degree[e.a]);
        y.push_back(degree[e.b]);
        x.push_back(degree[e.b]);
        y.push_back(degree[e.a]);
    }
    if (x.size() < 2) return 0.0;
    const double mx = stats::mean(x), my = stats::mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

// Newman's categorical assortativity from the attribute mixing matrix
template <typename AttrFn>
double attribute_assortativity_of(const ResearchGraph& g, AttrFn&& attr) {
    std::map<int, std::map<int, double>> e; // edge-end mixing counts
    double total = 0;
    for (const auto& edge : g.edges) {
        const int fa = attr(g.nodes[edge.a]), fb = attr(g.nodes[edge.b]);
        e[fa][fb] += 1;
        e[fb][fa] += 1;
        total += 2;
    }
    if (total == 0) return 0.0;
    double trace = 0, rand_sum = 0;
    for (auto& [i, row] : e) {
        double a_i = 0;
        for (auto& [j, v] : row) {
            v /= total;
            a_i += v;
            if (i == j) trace += v;
        }
        rand_sum += a_i * a_i;
    }
    if (1.0 - rand_sum == 0) return 1.0;
    return (trace - rand_sum) / (1.0 - rand_sum);
}

struct PathSummary {
    double avg_path_length = 0;
    int diameter = 0;
    int n_components = 0;
    bool on_largest_component = false;
};

inline PathSummary path_metrics(const ResearchGraph& g) {
    const auto adj = g.adjacency();
    const std::size_t n = g.nodes.size();
    std::vector<int> component(n, -1);
    int n_comp = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (component[s] != -1) continue;
        std::queue<std::uint32_t> q;
        q.push(static_cast<std::uint32_t>(s));
        component[s] = n_comp;
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            for (const auto& [v, w] : adj[u])
                if (component[v] == -1) {
                    component[v] = n_comp;
                    q.push(v);
                }
        }
        ++n_comp;
    }

    std::vector<std::size_t> comp_size(static_cast<std::size_t>(n_comp), 0);
    for (int c : component) ++comp_size[static_cast<std::size_t>(c)];
    const int largest =
        static_cast<int>(std::max_element(comp_size.begin(), comp_size.end()) - comp_size.begin());

    PathSummary out;
    out.n_components = n_comp;
    out.on_largest_component = n_comp > 1;

    // unweighted BFS from every node of the chosen component
    double sum = 0;
    std::size_t pairs = 0;
    int diameter = 0;
    std::vector<int> dist(n);
    for (std::size_t s = 0; s < n; ++s) {
        if (component[s] != largest) continue;
        std::fill(dist.begin(), dist.end(), -1);
        dist[s] = 0;
        std::queue<std::uint32_t> q;
        q.push(static_cast<std::uint32_t>(s));
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            for (const auto& [v, w] : adj[u]) {
                if (dist[v] != -1) continue;
                dist[v] = dist[u] + 1;
                q.push(v);
            }
        }
        for (std::size_t t = s + 1; t < n; ++t) {
            if (component[t] != largest || dist[t] < 0) continue;
            sum += dist[t];
            ++pairs;
            diameter = std::max(diameter, dist[t]);
        }
    }
    if (pairs == 0) throw NumericError("path metrics undefined: no connected node pair");
    out.avg_path_length = sum / static_cast<double>(pairs);
    out.diameter = diameter;
    return out;
}

} // namespace detail

/// All structural metrics in one pass. Path metrics fall back to the largest
/// component (flagged) when the graph is disconnected; a single-node graph
/// has no defined path metrics and raises.
inline NetworkMetrics metrics(const ResearchGraph& graph, std::uint64_t seed = 42) {
    if (graph.nodes.empty()) throw NumericError("metrics: empty graph");
    if (graph.nodes.size() < 2) throw NumericError("metrics: single-node graph");

    NetworkMetrics m;
    const double n = static_cast<double>(graph.nodes.size());
    const double e = static_cast<double>(graph.edges.size());
    m.density = 2.0 * e / (n * (n - 1.0));

    if (!graph.edges.empty()) {
        double same_factor = 0, same_status = 0;
        for (const auto& edge : graph.edges) {
            if (graph.nodes[edge.a].factor == graph.nodes[edge.b].factor) same_factor += 1;
            if (graph.nodes[edge.a].status == graph.nodes[edge.b].status) same_status += 1;
        }
        m.factor_homophily = same_factor / e;
        m.status_homophily = same_status / e;
    }

    m.degree_assortativity = detail::degree_assortativity_of(graph);
    m.factor_assortativity = detail::attribute_assortativity_of(
        graph, [](const GraphNode& node) { return static_cast<int>(node.factor); });

    // local clustering, unweighted; degree < 2 contributes 0
    const auto adj = graph.adjacency();
    std::vector<std::vector<std::uint32_t>> nbr(graph.nodes.size());
    for (std::size_t i = 0; i < adj.size(); ++i) {
        for (const auto& [j, w] : adj[i]) nbr[i].push_back(j);
        std::sort(nbr[i].begin(), nbr[i].end());
    }
    double clustering_sum = 0;
    for (std::size_t i = 0; i < nbr.size(); ++i) {
        const auto deg = nbr[i].size();
        if (deg < 2) continue;
        std::size_t triangles = 0;
        for (std::size_t x = 0; x < deg; ++x)
            for (std::size_t y = x + 1; y < deg; ++y)
                if (std::binary_search(nbr[nbr[i][x]].begin(), nbr[nbr[i][x]].end(), nbr[i][y]))
                    ++triangles;
        clustering_sum += 2.0 * static_cast<double>(triangles) /
                          (static_cast<double>(deg) * static_cast<double>(deg - 1));
    }
    m.avg_clustering = clustering_sum / n;

    m.modularity = louvain(graph, seed).modularity;

    const auto paths = detail::path_metrics(graph);
    m.avg_path_length = paths.avg_path_length;
    m.diameter = paths.diameter;
    m.n_components = paths.n_components;
    m.path_metrics_on_largest_component = paths.on_largest_component;
    return m;
}

// ---------------------------------------------------------------------------
// Sensitivity-driven evolution

/// Per-metric response to a unit Gini reduction. The homophily default is
/// -0.209, the value consistent with the reported scenario finals; overriding
/// any coefficient is a config concern.
struct SensitivityModel {
    double density = 0.220;
    double homophily = -0.209;
    double modularity = -0.042;
    double avg_path_length = -0.085;
    double noise_start = 0.10; // relative noise at the first step
    double noise_end = 0.15;   // at the final step
};

struct EvolvedValue {
    double value = 0;
    double ci_low = 0;
    double ci_high = 0;
};

struct EvolutionStep {
    double delta_gini = 0; // cumulative Gini-reduction fraction, 1.0 = full
    EvolvedValue density;
    EvolvedValue homophily;
    EvolvedValue modularity;
    EvolvedValue avg_path_length;
};

/// Linear response M_new = M_baseline + beta * dG per step, density and
/// homophily clamped to [0, 1]. Parametric bootstrap adds relative noise
/// interpolated across steps; with noise_bootstrap = 0 the evolution is exact
/// and CIs collapse to the point values.
inline std::vector<EvolutionStep> evolve(const NetworkMetrics& baseline, const SensitivityModel& model,
                                         const std::vector<double>& gini_reduction_fractions,
                                         std::size_t noise_bootstrap = 100, std::uint64_t seed = 42,
                                         unsigned threads = 1) {
    for (std::size_t i = 0; i < gini_reduction_fractions.size(); ++i) {
        const double f = gini_reduction_fractions[i];
        if (!(f >= 0 && f <= 1)) throw ConfigError("evolve: fractions must lie in [0, 1]");
        if (i > 0 && f < gini_reduction_fractions[i - 1])
            throw ConfigError("evolve: fractions must be ascending");
    }
    const std::size_t n_steps = gini_reduction_fractions.size();

    auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };

    std::vector<EvolutionStep> out(n_steps);
    for (std::size_t s = 0; s < n_steps; ++s) {
        const double dg = gini_reduction_fractions[s];
        out[s].delta_gini = dg;
        out[s].density.value = clamp01(baseline.density + model.density * dg);
        out[s].homophily.value = clamp01(baseline.factor_homophily + model.homophily * dg);
        out[s].modularity.value = baseline.modularity + model.modularity * dg;
        out[s].avg_path_length.value = baseline.avg_path_length + model.avg_path_length * dg;

        const double rel = n_steps > 1 ? model.noise_start + (model.noise_end - model.noise_start) *
                                                                 static_cast<double>(s) /
                                                                 static_cast<double>(n_steps - 1)
                                       : model.noise_start;

        if (noise_bootstrap == 0) {
            out[s].density.ci_low = out[s].density.ci_high = out[s].density.value;
            out[s].homophily.ci_low = out[s].homophily.ci_high = out[s].homophily.value;
            out[s].modularity.ci_low = out[s].modularity.ci_high = out[s].modularity.value;
            out[s].avg_path_length.ci_low = out[s].avg_path_length.ci_high = out[s].avg_path_length.value;
            continue;
        }

        std::vector<double> rd(noise_bootstrap), rh(noise_bootstrap), rm(noise_bootstrap),
            rp(noise_bootstrap);
        stats::parallel_for(noise_bootstrap, threads, [&](std::size_t it) {
            RngStream stream(seed, "network-evolve", s * 1000003ull + it);
            rd[it] = clamp01(out[s].density.value + stream.normal(0, rel * std::abs(baseline.density)));
            rh[it] = clamp01(out[s].homophily.value +
                             stream.normal(0, rel * std::abs(baseline.factor_homophily)));
            rm[it] = out[s].modularity.value + stream.normal(0, rel * std::abs(baseline.modularity));
            rp[it] = out[s].avg_path_length.value +
                     stream.normal(0, rel * std::abs(baseline.avg_path_length));
        });
        auto fill = [](EvolvedValue& v, std::vector<double>& reps) {
            v.ci_low = stats::percentile(reps, 2.5);
            v.ci_high = stats::percentile(reps, 97.5);
        };
        fill(out[s].density, rd);
        fill(out[s].homophily, rh);
        fill(out[s].modularity, rm);
        fill(out[s].avg_path_length, rp);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Edge redistribution

struct EdgePairRow {
    LimitingFactor factor_a = LimitingFactor::Unassigned; // factor_a <= factor_b
    LimitingFactor factor_b = LimitingFactor::Unassigned;
    double before = 0;
    double after = 0;
};

struct EdgeRedistribution {
    double total_edges = 0;
    double within_before = 0, cross_before = 0;
    double within_after = 0, cross_after = 0;
    std::vector<EdgePairRow> pairs;
};

namespace detail {

// round a vector to integers that sum exactly to target (largest remainder)
inline std::vector<double> largest_remainder(const std::vector<double>& raw, double target) {
    std::vector<double> out(raw.size());
    std::vector<std::pair<double, std::size_t>> rem;
    double base_sum = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = std::floor(raw[i]);
        base_sum += out[i];
        rem.emplace_back(raw[i] - out[i], i);
    }
    long missing = std::lround(target - base_sum);
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (long k = 0; k < missing && k < static_cast<long>(rem.size()); ++k)
        out[rem[static_cast<std::size_t>(k)].second] += 1;
    return out;
}

} // namespace detail

/// Reallocates the fixed edge total between within- and cross-factor classes
/// to match an evolved homophily; factor-pair rows scale proportionally
/// within their class and are integer-rounded preserving class totals.
inline EdgeRedistribution edge_redistribution(const ResearchGraph& graph, double evolved_homophily) {
    if (!(evolved_homophily >= 0 && evolved_homophily <= 1))
        throw ConfigError("edge_redistribution: homophily must lie in [0, 1]");

    EdgeRedistribution out;
    std::map<std::pair<LimitingFactor, LimitingFactor>, double> counts;
    for (const auto& e : graph.edges) {
        auto fa = graph.nodes[e.a].factor, fb = graph.nodes[e.b].factor;
        if (fb < fa) std::swap(fa, fb);
        counts[{fa, fb}] += 1;
        out.total_edges += 1;
        if (fa == fb) out.within_before += 1;
        else out.cross_before += 1;
    }
    out.within_after = std::round(evolved_homophily * out.total_edges);
    out.cross_after = out.total_edges - out.within_after;

    std::vector<EdgePairRow> within_rows, cross_rows;
    for (const auto& [key, n] : counts) {
        EdgePairRow row;
        row.factor_a = key.first;
        row.factor_b = key.second;
        row.before = n;
        (key.first == key.second ? within_rows : cross_rows).push_back(row);
    }
    auto scale_class = [](std::vector<EdgePairRow>& rows, double before_total, double after_total) {
        if (rows.empty()) return;
        std::vector<double> raw(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            raw[i] = before_total > 0 ? rows[i].before / before_total * after_total
                                      : after_total / static_cast<double>(rows.size());
        const auto rounded = detail::largest_remainder(raw, after_total);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i].after = rounded[i];
    };
    scale_class(within_rows, out.within_before, out.within_after);
    scale_class(cross_rows, out.cross_before, out.cross_after);
    out.pairs = std::move(within_rows);
    out.pairs.insert(out.pairs.end(), cross_rows.begin(), cross_rows.end());
    return out;
}

// ---------------------------------------------------------------------------
// Graph I/O (edge-list + node-attribute CSV)

inline std::optional<LimitingFactor> parse_factor(std::string_view s) {
    for (auto f : {LimitingFactor::ResearchInvestment, LimitingFactor::Governance,
                   LimitingFactor::HealthInfrastructure, LimitingFactor::MultipleFactors,
                   LimitingFactor::Unassigned})
        if (s == factor_name(f)) return f;
    return std::nullopt;
}

inline std::optional<PerformanceStatus> parse_status(std::string_view s) {
    for (auto st : {PerformanceStatus::OverPerforming, PerformanceStatus::AsExpected,
                    PerformanceStatus::UnderPerforming, PerformanceStatus::Unclassified})
        if (s == status_name(st)) return st;
    return std::nullopt;
}

inline void write_graph(const ResearchGraph& graph, std::ostream& edges_out, std::ostream& nodes_out) {
    csv::write_row(nodes_out, {"id", "country", "factor", "status", "disease_count", "disease_mask",
                               "mean_residual"});
    for (const auto& n : graph.nodes) {
        csv::write_row(nodes_out,
                       {n.id(), n.country.str(), std::string(factor_name(n.factor)),
                        std::string(status_name(n.status)), std::to_string(n.disease_count),
                        std::to_string(n.disease_mask), csv::format_double(n.mean_residual)});
    }
    csv::write_row(edges_out, {"source", "target", "weight"});
    for (const auto& e : graph.edges) {
        csv::write_row(edges_out, {graph.nodes[e.a].id(), graph.nodes[e.b].id(),
                                   csv::format_double(e.weight)});
    }
}

inline ResearchGraph read_graph(std::istream& edges_in, std::istream& nodes_in) {
    ResearchGraph graph;
    const csv::Table nodes = csv::read(nodes_in);
    const auto id_col = nodes.require_column("id");
    const auto country_col = nodes.require_column("country");
    const auto factor_col = nodes.require_column("factor");
    const auto status_col = nodes.require_column("status");
    const auto mask_col = nodes.column("disease_mask");
    const auto resid_col = nodes.column("mean_residual");

    std::map<std::string, std::uint32_t> id_index;
    for (const auto& row : nodes.rows) {
        GraphNode n;
        n.country = CountryCode::from_string(row.at(country_col));
        const auto f = parse_factor(row.at(factor_col));
        const auto s = parse_status(row.at(status_col));
        if (!f || !s) throw DataError("read_graph: unknown factor or status label");
        n.factor = *f;
        n.status = *s;
        if (mask_col && *mask_col < row.size())
            n.disease_mask = static_cast<std::uint32_t>(csv::parse_int(row[*mask_col]).value_or(0));
        n.disease_count = std::popcount(n.disease_mask);
        if (resid_col && *resid_col < row.size())
            n.mean_residual = csv::parse_double(row[*resid_col]).value_or(0);
        id_index[row.at(id_col)] = static_cast<std::uint32_t>(graph.nodes.size());
        graph.nodes.push_back(n);
    }

    const csv::Table edges = csv::read(edges_in);
    const auto src = edges.require_column("source");
    const auto dst = edges.require_column("target");
    const auto wcol = edges.require_column("weight");
    for (const auto& row : edges.rows) {
        const auto a = id_index.find(row.at(src));
        const auto b = id_index.find(row.at(dst));
        if (a == id_index.end() || b == id_index.end())
            throw DataError("read_graph: edge references unknown node id");
        const double w = csv::parse_double(row.at(wcol)).value_or(0);
        std::uint32_t ia = a->second, ib = b->second;
        if (ia == ib) throw DataError("read_graph: self loop");
        if (ib < ia) std::swap(ia, ib);
        graph.edges.push_back({ia, ib, w});
    }
    return graph;
}

} // namespace trialineq
