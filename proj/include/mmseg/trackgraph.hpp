#pragma once

// Incremental construction of the trajectory/box graph from per-frame track
// updates and object boxes, and the bias applied to edge weights before
// partitioning.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmseg/core.hpp"

namespace mmseg {

enum class AffinityMode {
    unit,               // every edge weight is 1
    covisibility_count  // weight counts frames in which point and box co-occur
};

struct TrackUpdate {
    std::int64_t trajectory_id = 0;
    double x = 0.0;
    double y = 0.0;
};

/// Inclusive point-in-box test.
inline bool membership_test(double x, double y, const BoxRect& box) {
    return box.x_min <= x && x <= box.x_max && box.y_min <= y && y <= box.y_max;
}

struct GraphBuilderConfig {
    ImageExtent extent;
    AffinityMode affinity = AffinityMode::unit;
    double bias_fraction = 0.2;
};

class GraphBuilder {
public:
    explicit GraphBuilder(GraphBuilderConfig config) : config_(config) {
        if (!(config_.extent.width > 0.0) || !(config_.extent.height > 0.0))
            throw DataError("image extent must be positive");
    }

    /// Appends one frame of track samples and boxes. Frames must be strictly
    /// increasing. A trajectory not updated in a frame is retired; its id may
    /// not reappear.
    void ingest_frame(FrameId frame, std::span<const TrackUpdate> updates,
                      std::span<const ObjectBox> boxes) {
        if (last_frame_ && !(*last_frame_ < frame))
            throw DataError("frame " + std::to_string(frame.index) +
                            " is not after frame " + std::to_string(last_frame_->index));

        std::vector<std::int64_t> updated;
        updated.reserve(updates.size());
        for (const TrackUpdate& u : updates) {
            if (!config_.extent.contains(u.x, u.y))
                throw DataError("trajectory " + std::to_string(u.trajectory_id) +
                                " point outside the image at frame " +
                                std::to_string(frame.index));
            auto it = trajectory_slot_.find(u.trajectory_id);
            if (it == trajectory_slot_.end()) {
                trajectory_slot_.emplace(u.trajectory_id, trajectories_.size());
                trajectories_.push_back({u.trajectory_id, {{frame, u.x, u.y}}});
                live_.emplace(u.trajectory_id, frame);
                graph_.add_trajectory_vertex(trajectory_vertex(u.trajectory_id));
            } else {
                auto live = live_.find(u.trajectory_id);
                if (live == live_.end() || !last_frame_ || live->second != *last_frame_)
                    throw DataError("trajectory " + std::to_string(u.trajectory_id) +
                                    " reused after it was lost (frame " +
                                    std::to_string(frame.index) + ")");
                auto& t = trajectories_[it->second];
                if (t.samples.back().frame == frame)
                    throw DataError("trajectory " + std::to_string(u.trajectory_id) +
                                    " updated twice in frame " + std::to_string(frame.index));
                t.samples.push_back({frame, u.x, u.y});
                live->second = frame;
            }
            updated.push_back(u.trajectory_id);
        }
        // Retire tracks that were not continued in this frame.
        for (auto it = live_.begin(); it != live_.end();) {
            if (it->second != frame) it = live_.erase(it);
            else ++it;
        }

        for (const ObjectBox& b : boxes) {
            if (b.frame != frame)
                throw DataError("box " + std::to_string(b.id) + " belongs to frame " +
                                std::to_string(b.frame.index) + ", ingested at frame " +
                                std::to_string(frame.index));
            check_box(b, config_.extent);
            const VertexId bv = box_vertex(b.id);
            graph_.add_box_vertex(bv);
            for (const TrackUpdate& u : updates) {
                if (!membership_test(u.x, u.y, b.rect)) continue;
                const VertexId tv = trajectory_vertex(u.trajectory_id);
                auto [slot, inserted] = edge_slot_.try_emplace(EdgeKey{tv, bv}, graph_.edge_count());
                if (inserted) {
                    graph_.add_edge(tv, bv, 1.0);
                } else if (config_.affinity == AffinityMode::covisibility_count) {
                    graph_.mutable_edges()[slot->second].weight += 1.0;
                }
            }
        }
        last_frame_ = frame;
    }

    const TrajectoryGraph& graph() const { return graph_; }
    const std::vector<PointTrajectory>& trajectories() const { return trajectories_; }
    const GraphBuilderConfig& config() const { return config_; }
    std::optional<FrameId> last_frame() const { return last_frame_; }

private:
    struct EdgeKey {
        VertexId trajectory;
        VertexId box;
        bool operator==(const EdgeKey&) const = default;
    };
    struct EdgeKeyHash {
        std::size_t operator()(const EdgeKey& k) const {
            return std::hash<VertexId>{}(k.trajectory * 0x9E3779B97F4A7C15ull ^ k.box);
        }
    };

    GraphBuilderConfig config_;
    TrajectoryGraph graph_;
    std::vector<PointTrajectory> trajectories_;
    std::unordered_map<std::int64_t, std::size_t> trajectory_slot_;
    std::unordered_map<std::int64_t, FrameId> live_;
    std::unordered_map<EdgeKey, std::size_t, EdgeKeyHash> edge_slot_;
    std::optional<FrameId> last_frame_;
};

struct WeightSummary {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double median = 0.0;
};

struct BiasReport {
    double c_o = 0.0;
    std::size_t edge_count = 0;
    bool degenerate = false;  // all weights equal, fallback q * weight used
    WeightSummary weights;
};

/// Weight at rank ceil(q*|E|) in descending order. When every weight is the
/// same, returns q times that weight instead (the rank statistic would zero
/// all weights).
inline double compute_bias(std::span<const double> weights, double q) {
    if (weights.empty()) throw std::invalid_argument("compute_bias: empty weight multiset");
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("compute_bias: q must be in (0, 1]");
    std::vector<double> sorted(weights.begin(), weights.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    if (sorted.front() == sorted.back()) return q * sorted.front();
    const double n = static_cast<double>(sorted.size());
    auto k = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    k = std::clamp<std::size_t>(k, 1, sorted.size());
    return sorted[k - 1];
}

inline BiasReport bias_report(const TrajectoryGraph& g, double q) {
    BiasReport r;
    r.edge_count = g.edge_count();
    if (g.edge_count() == 0) return r;
    std::vector<double> w;
    w.reserve(g.edge_count());
    for (const Edge& e : g.edges()) w.push_back(e.weight);
    r.c_o = compute_bias(w, q);
    std::sort(w.begin(), w.end());
    r.degenerate = w.front() == w.back();
    r.weights.min = w.front();
    r.weights.max = w.back();
    double sum = 0.0;
    for (double x : w) sum += x;
    r.weights.mean = sum / static_cast<double>(w.size());
    const std::size_t mid = w.size() / 2;
    r.weights.median = w.size() % 2 ? w[mid] : 0.5 * (w[mid - 1] + w[mid]);
    return r;
}

/// c_e <- c_e - c_o on every edge.
inline TrajectoryGraph apply_bias(TrajectoryGraph g, double c_o) {
    for (Edge& e : g.mutable_edges()) e.weight -= c_o;
    return g;
}

}  // namespace mmseg
