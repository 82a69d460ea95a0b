#pragma once

// Minimum-cost multicut: objective, feasibility, greedy additive edge
// contraction (GAEC) and a brute-force enumeration oracle for tiny graphs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "mmseg/core.hpp"

namespace mmseg {

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::uint8_t> rank_;
};

// Dense 0..n-1 indexing of a graph's sorted vertex list.
struct DenseIndex {
    std::vector<VertexId> ids;
    std::unordered_map<VertexId, std::size_t> index;

    explicit DenseIndex(const TrajectoryGraph& g) : ids(g.vertices()) {
        index.reserve(ids.size() * 2);
        for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
    }
    std::size_t of(VertexId v) const {
        auto it = index.find(v);
        if (it == index.end())
            throw DataError("edge endpoint " + std::to_string(v) + " is not a graph vertex");
        return it->second;
    }
};

// Labels components 0..C-1 in order of their smallest member (ids are sorted,
// so first occurrence order is smallest-member order).
inline Partition label_components(const DenseIndex& dense, DisjointSets& sets) {
    Partition p;
    std::unordered_map<std::size_t, SegmentId> root_label;
    for (std::size_t i = 0; i < dense.ids.size(); ++i) {
        auto [it, inserted] =
            root_label.emplace(sets.find(i), static_cast<SegmentId>(root_label.size()));
        p.labels.emplace_hint(p.labels.end(), dense.ids[i], it->second);
    }
    return p;
}

inline void require_full_cut_vector(const TrajectoryGraph& g, const Multicut& y) {
    if (y.cut.size() != g.edge_count())
        throw DataError("multicut has " + std::to_string(y.cut.size()) + " entries for " +
                        std::to_string(g.edge_count()) + " edges");
}

}  // namespace detail

/// Sum of the weights of cut edges.
inline double objective_of(const TrajectoryGraph& g, const Multicut& y) {
    detail::require_full_cut_vector(g, y);
    double total = 0.0;
    const auto& edges = g.edges();
    for (std::size_t e = 0; e < edges.size(); ++e)
        if (y.cut[e]) total += edges[e].weight;
    return total;
}

/// True iff no cut edge joins two vertices connected through uncut edges.
inline bool is_feasible(const TrajectoryGraph& g, const Multicut& y) {
    if (y.cut.size() != g.edge_count()) return false;
    const detail::DenseIndex dense(g);
    detail::DisjointSets sets(dense.ids.size());
    const auto& edges = g.edges();
    for (std::size_t e = 0; e < edges.size(); ++e)
        if (!y.cut[e]) sets.unite(dense.of(edges[e].u), dense.of(edges[e].v));
    for (std::size_t e = 0; e < edges.size(); ++e)
        if (y.cut[e] && sets.find(dense.of(edges[e].u)) == sets.find(dense.of(edges[e].v)))
            return false;
    return true;
}

/// Connected components over uncut edges. Throws DataError if `y` is infeasible.
inline Partition components_of(const TrajectoryGraph& g, const Multicut& y) {
    detail::require_full_cut_vector(g, y);
    const detail::DenseIndex dense(g);
    detail::DisjointSets sets(dense.ids.size());
    const auto& edges = g.edges();
    for (std::size_t e = 0; e < edges.size(); ++e)
        if (!y.cut[e]) sets.unite(dense.of(edges[e].u), dense.of(edges[e].v));
    for (std::size_t e = 0; e < edges.size(); ++e)
        if (y.cut[e] && sets.find(dense.of(edges[e].u)) == sets.find(dense.of(edges[e].v)))
            throw DataError("infeasible multicut: cut edge " + std::to_string(e) +
                            " lies inside a component");
    return detail::label_components(dense, sets);
}

struct ContractionStep {
    VertexId kept = 0;
    VertexId merged = 0;
    double weight = 0.0;
};

struct SolveResult {
    Partition partition;
    Multicut multicut;
    double objective = 0.0;
    std::size_t component_count = 0;
    std::vector<ContractionStep> contraction_log;
};

struct GaecOptions {
    // Single-vertex label moves after contraction, accepted only on strict
    // objective decrease.
    bool local_moves = false;
    int max_sweeps = 5;
};

namespace detail {

inline SolveResult finish_from_partition(const TrajectoryGraph& g, const Partition& p) {
    SolveResult r;
    r.multicut = partition_to_multicut(g, p);
    r.partition = components_of(g, r.multicut);
    r.objective = objective_of(g, r.multicut);
    r.component_count = r.partition.component_count();
    return r;
}

// Moves single vertices between neighbouring labels (or to a fresh label)
// while the objective strictly decreases.
inline Partition improve_by_moves(const TrajectoryGraph& g, Partition p, int max_sweeps) {
    const DenseIndex dense(g);
    const std::size_t n = dense.ids.size();
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
    for (const Edge& e : g.edges()) {
        const auto a = dense.of(e.u), b = dense.of(e.v);
        adj[a].push_back({b, e.weight});
        adj[b].push_back({a, e.weight});
    }
    std::vector<SegmentId> label(n);
    SegmentId next_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        label[i] = p.label_of(dense.ids[i]);
        next_label = std::max(next_label, static_cast<SegmentId>(label[i] + 1));
    }

    constexpr double kMinGain = 1e-12;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool improved = false;
        for (std::size_t v = 0; v < n; ++v) {
            // Cut cost of v is the weight to all neighbours with other labels.
            std::unordered_map<SegmentId, double> to_label;
            double total = 0.0;
            for (auto [u, w] : adj[v]) {
                to_label[label[u]] += w;
                total += w;
            }
            const double joined_current = to_label.count(label[v]) ? to_label[label[v]] : 0.0;
            const double cost_now = total - joined_current;

            SegmentId best = label[v];
            double best_cost = cost_now;
            // Isolating v cuts every incident edge.
            if (total < best_cost - kMinGain) {
                best_cost = total;
                best = next_label;
            }
            std::vector<SegmentId> candidates;
            for (const auto& [l, w] : to_label) candidates.push_back(l);
            std::sort(candidates.begin(), candidates.end());
            for (SegmentId l : candidates) {
                if (l == label[v]) continue;
                const double c = total - to_label[l];
                if (c < best_cost - kMinGain) {
                    best_cost = c;
                    best = l;
                }
            }
            if (best != label[v]) {
                if (best == next_label) ++next_label;
                label[v] = best;
                improved = true;
            }
        }
        if (!improved) break;
    }
    Partition out;
    for (std::size_t i = 0; i < n; ++i) out.labels.emplace_hint(out.labels.end(), dense.ids[i], label[i]);
    return out;
}

}  // namespace detail

/// Greedy additive edge contraction. Repeatedly contracts the heaviest edge
/// while its weight is strictly positive; parallel edges created by a
/// contraction are summed. Ties go to the lexicographically smallest
/// (min endpoint, max endpoint) pair, where a contracted vertex is represented
/// by its smallest member id.
inline SolveResult solve_gaec(const TrajectoryGraph& g, const GaecOptions& options = {}) {
    const detail::DenseIndex dense(g);
    const std::size_t n = dense.ids.size();

    // Adjacency keyed by representative (smallest dense index of a cluster).
    std::vector<std::unordered_map<std::size_t, double>> adj(n);
    for (const Edge& e : g.edges()) {
        const auto a = dense.of(e.u), b = dense.of(e.v);
        if (a == b) continue;
        adj[a][b] += e.weight;
        adj[b][a] += e.weight;
    }

    struct Candidate {
        double weight;
        std::size_t a;  // a < b
        std::size_t b;
    };
    auto lower_priority = [](const Candidate& x, const Candidate& y) {
        if (x.weight != y.weight) return x.weight < y.weight;
        if (x.a != y.a) return x.a > y.a;
        return x.b > y.b;
    };
    std::priority_queue<Candidate, std::vector<Candidate>, decltype(lower_priority)> queue(
        lower_priority);
    for (std::size_t a = 0; a < n; ++a)
        for (const auto& [b, w] : adj[a])
            if (a < b && w > 0.0) queue.push({w, a, b});

    std::vector<std::uint8_t> alive(n, 1);
    detail::DisjointSets sets(n);
    SolveResult result;

    while (!queue.empty()) {
        const Candidate top = queue.top();
        queue.pop();
        if (!alive[top.a] || !alive[top.b]) continue;
        auto it = adj[top.a].find(top.b);
        if (it == adj[top.a].end() || it->second != top.weight) continue;  // stale
        if (!(top.weight > 0.0)) break;

        const std::size_t keep = top.a;  // smaller index stays representative
        const std::size_t gone = top.b;
        result.contraction_log.push_back({dense.ids[keep], dense.ids[gone], top.weight});
        sets.unite(keep, gone);
        alive[gone] = 0;

        adj[keep].erase(gone);
        adj[gone].erase(keep);
        for (const auto& [nbr, w] : adj[gone]) {
            adj[nbr].erase(gone);
            const double merged = (adj[keep][nbr] += w);
            adj[nbr][keep] = merged;
        }
        // Re-queue every positive edge whose weight may have changed.
        for (const auto& [nbr, w] : adj[gone]) {
            const double merged = adj[keep][nbr];
            if (merged > 0.0) queue.push({merged, std::min(keep, nbr), std::max(keep, nbr)});
        }
        adj[gone].clear();
    }

    Partition partition = detail::label_components(dense, sets);
    if (options.local_moves)
        partition = detail::improve_by_moves(g, std::move(partition), options.max_sweeps);

    auto log = std::move(result.contraction_log);
    result = detail::finish_from_partition(g, partition);
    result.contraction_log = std::move(log);
    return result;
}

inline constexpr std::size_t kMaxExactVertices = 10;

/// Exhaustive minimisation over all set partitions (restricted growth
/// strings). Ties: fewer components, then lexicographically smallest labels.
inline SolveResult solve_exact(const TrajectoryGraph& g) {
    const detail::DenseIndex dense(g);
    const std::size_t n = dense.ids.size();
    if (n > kMaxExactVertices)
        throw std::invalid_argument("solve_exact refuses graphs with more than " +
                                    std::to_string(kMaxExactVertices) + " vertices");
    if (n == 0) return {};

    struct DenseEdge {
        std::size_t a, b;
        double w;
    };
    std::vector<DenseEdge> edges;
    for (const Edge& e : g.edges()) edges.push_back({dense.of(e.u), dense.of(e.v), e.weight});

    constexpr double kTieEps = 1e-12;
    std::vector<int> rgs(n, 0), max_prefix(n, 0);
    std::vector<int> best_rgs;
    double best_obj = 0.0;
    int best_blocks = 0;

    while (true) {
        double obj = 0.0;
        for (const auto& e : edges)
            if (rgs[e.a] != rgs[e.b]) obj += e.w;
        const int blocks = *std::max_element(rgs.begin(), rgs.end()) + 1;
        const bool better =
            best_rgs.empty() || obj < best_obj - kTieEps ||
            (std::abs(obj - best_obj) <= kTieEps &&
             (blocks < best_blocks || (blocks == best_blocks && rgs < best_rgs)));
        if (better) {
            best_rgs = rgs;
            best_obj = obj;
            best_blocks = blocks;
        }

        // Next restricted growth string: rgs[i] <= 1 + max(rgs[0..i-1]).
        std::size_t i = n - 1;
        while (i > 0 && rgs[i] == max_prefix[i] + 1) --i;
        if (i == 0) break;
        ++rgs[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            rgs[j] = 0;
            max_prefix[j] = std::max(max_prefix[j - 1], rgs[j - 1]);
        }
    }

    Partition p;
    for (std::size_t i = 0; i < n; ++i) p.labels.emplace(dense.ids[i], best_rgs[i]);
    return detail::finish_from_partition(g, p);
}

}  // namespace mmseg
