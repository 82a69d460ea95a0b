#pragma once

// Shared domain types for map-segment mining: trajectories, object boxes,
// the bipartite trajectory/box graph, partitions and multicuts.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace mmseg {

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An internal invariant was violated (a bug, not bad input).
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct FrameId {
    std::int64_t index = 0;

    constexpr auto operator<=>(const FrameId&) const = default;
};

using VertexId = std::int64_t;
using SegmentId = std::int32_t;

// Trajectory and box vertices live in disjoint id ranges: a box with file id b
// becomes vertex kBoxVertexBase + b.
inline constexpr VertexId kBoxVertexBase = VertexId{1} << 40;

constexpr VertexId trajectory_vertex(std::int64_t trajectory_id) { return trajectory_id; }
constexpr VertexId box_vertex(std::int64_t box_id) { return kBoxVertexBase + box_id; }
constexpr bool is_box_vertex(VertexId v) { return v >= kBoxVertexBase; }
constexpr std::int64_t box_id_of(VertexId v) { return v - kBoxVertexBase; }

struct ImageExtent {
    double width = 0.0;
    double height = 0.0;

    bool contains(double x, double y) const {
        return x >= 0.0 && x <= width && y >= 0.0 && y <= height;
    }
    double area() const { return width * height; }
};

struct TrackSample {
    FrameId frame;
    double x = 0.0;
    double y = 0.0;
};

struct PointTrajectory {
    std::int64_t id = 0;
    std::vector<TrackSample> samples;

    FrameId first_frame() const { return samples.front().frame; }
    FrameId last_frame() const { return samples.back().frame; }
};

/// Throws DataError unless samples are non-empty, contiguous in frame and
/// inside `extent`.
inline void check_trajectory(const PointTrajectory& t, const ImageExtent& extent) {
    if (t.samples.empty())
        throw DataError("trajectory " + std::to_string(t.id) + " has no samples");
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
        const auto& s = t.samples[i];
        if (!extent.contains(s.x, s.y))
            throw DataError("trajectory " + std::to_string(t.id) + " leaves the image extent");
        if (i > 0 && s.frame.index != t.samples[i - 1].frame.index + 1)
            throw DataError("trajectory " + std::to_string(t.id) + " has non-contiguous frames");
    }
}

struct BoxRect {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }

    void expand(double x, double y) {
        x_min = std::min(x_min, x);
        y_min = std::min(y_min, y);
        x_max = std::max(x_max, x);
        y_max = std::max(y_max, y);
    }
    static BoxRect point(double x, double y) { return {x, y, x, y}; }

    bool operator==(const BoxRect&) const = default;
};

struct ObjectBox {
    std::int64_t id = 0;
    FrameId frame;
    BoxRect rect;
};

inline void check_box(const ObjectBox& b, const ImageExtent& extent) {
    const auto& r = b.rect;
    if (!(r.x_min < r.x_max) || !(r.y_min < r.y_max))
        throw DataError("box " + std::to_string(b.id) + " is empty or inverted");
    if (!extent.contains(r.x_min, r.y_min) || !extent.contains(r.x_max, r.y_max))
        throw DataError("box " + std::to_string(b.id) + " exceeds the image extent");
}

struct Edge {
    VertexId u = 0;
    VertexId v = 0;
    double weight = 0.0;
};

/// Weighted graph over trajectory and box vertices. Vertex lists are kept
/// sorted and unique; edges keep insertion order and are addressed by index.
class TrajectoryGraph {
public:
    TrajectoryGraph() = default;

    void add_trajectory_vertex(VertexId v) { insert_sorted(trajectory_vertices_, v); }
    void add_box_vertex(VertexId v) { insert_sorted(box_vertices_, v); }

    std::size_t add_edge(VertexId u, VertexId v, double weight) {
        edges_.push_back({u, v, weight});
        return edges_.size() - 1;
    }

    const std::vector<VertexId>& trajectory_vertices() const { return trajectory_vertices_; }
    const std::vector<VertexId>& box_vertices() const { return box_vertices_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::vector<Edge>& mutable_edges() { return edges_; }

    /// All vertices, sorted ascending.
    std::vector<VertexId> vertices() const {
        std::vector<VertexId> all;
        all.reserve(vertex_count());
        std::merge(trajectory_vertices_.begin(), trajectory_vertices_.end(),
                   box_vertices_.begin(), box_vertices_.end(), std::back_inserter(all));
        all.erase(std::unique(all.begin(), all.end()), all.end());
        return all;
    }
    std::size_t vertex_count() const { return trajectory_vertices_.size() + box_vertices_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

    bool is_trajectory_vertex(VertexId v) const {
        return std::binary_search(trajectory_vertices_.begin(), trajectory_vertices_.end(), v);
    }
    bool is_box_vertex_of_graph(VertexId v) const {
        return std::binary_search(box_vertices_.begin(), box_vertices_.end(), v);
    }

private:
    static void insert_sorted(std::vector<VertexId>& vs, VertexId v) {
        if (vs.empty() || vs.back() < v) {
            vs.push_back(v);
            return;
        }
        auto it = std::lower_bound(vs.begin(), vs.end(), v);
        if (it == vs.end() || *it != v) vs.insert(it, v);
    }

    std::vector<VertexId> trajectory_vertices_;
    std::vector<VertexId> box_vertices_;
    std::vector<Edge> edges_;
};

/// Node-to-segment labeling. Labels are expected to be 0..C-1.
struct Partition {
    std::map<VertexId, SegmentId> labels;

    SegmentId label_of(VertexId v) const {
        auto it = labels.find(v);
        if (it == labels.end())
            throw DataError("vertex " + std::to_string(v) + " is not labeled");
        return it->second;
    }
    std::size_t component_count() const {
        std::unordered_set<SegmentId> distinct;
        for (const auto& [v, l] : labels) distinct.insert(l);
        return distinct.size();
    }
};

/// Cut indicator per edge index (1 = cut).
struct Multicut {
    std::vector<std::uint8_t> cut;

    std::size_t cut_count() const {
        return static_cast<std::size_t>(std::count(cut.begin(), cut.end(), std::uint8_t{1}));
    }
};

struct MapSegment {
    SegmentId id = 0;
    std::vector<std::int64_t> trajectory_ids;  // sorted
    std::vector<std::int64_t> box_ids;         // sorted
    std::map<FrameId, BoxRect> frame_boxes;
    std::vector<double> viewpoint_span;        // travel distances, ascending
};

struct PoseRecord {
    FrameId frame;
    double s = 0.0;  // travel distance [m]
    double x = 0.0;  // world [m]
    double y = 0.0;
};

/// Per-frame poses, sorted by frame with non-decreasing travel distance.
class PoseLog {
public:
    PoseLog() = default;
    explicit PoseLog(std::vector<PoseRecord> records) : records_(std::move(records)) {
        for (std::size_t i = 1; i < records_.size(); ++i) {
            if (!(records_[i - 1].frame < records_[i].frame))
                throw DataError("pose frames must be strictly increasing");
            if (records_[i].s < records_[i - 1].s)
                throw DataError("pose travel distance must be non-decreasing");
        }
    }

    const std::vector<PoseRecord>& records() const { return records_; }
    bool empty() const { return records_.empty(); }
    std::size_t size() const { return records_.size(); }

    const PoseRecord* find(FrameId f) const {
        auto it = std::lower_bound(records_.begin(), records_.end(), f,
                                   [](const PoseRecord& r, FrameId x) { return r.frame < x; });
        if (it == records_.end() || it->frame != f) return nullptr;
        return &*it;
    }
    const PoseRecord& at(FrameId f) const {
        const auto* r = find(f);
        if (r == nullptr) throw DataError("no pose for frame " + std::to_string(f.index));
        return *r;
    }

private:
    std::vector<PoseRecord> records_;
};

// ---------------------------------------------------------------------------

struct GraphViolation {
    std::string message;
};

/// First violated graph invariant, or nullopt when the graph is well formed.
inline std::optional<GraphViolation> validate_graph(const TrajectoryGraph& g) {
    for (VertexId v : g.trajectory_vertices())
        if (is_box_vertex(v)) return GraphViolation{"trajectory vertex in box id range"};
    for (VertexId v : g.box_vertices())
        if (!is_box_vertex(v)) return GraphViolation{"box vertex in trajectory id range"};

    struct PairHash {
        std::size_t operator()(const std::pair<VertexId, VertexId>& p) const {
            return std::hash<VertexId>{}(p.first) * 1000003u ^ std::hash<VertexId>{}(p.second);
        }
    };
    std::unordered_set<std::pair<VertexId, VertexId>, PairHash> seen;
    seen.reserve(g.edge_count());
    for (const Edge& e : g.edges()) {
        const bool u_traj = g.is_trajectory_vertex(e.u);
        const bool v_traj = g.is_trajectory_vertex(e.v);
        const bool u_box = g.is_box_vertex_of_graph(e.u);
        const bool v_box = g.is_box_vertex_of_graph(e.v);
        if (!(u_traj || u_box) || !(v_traj || v_box))
            return GraphViolation{"edge endpoint is not a graph vertex"};
        if (!((u_traj && v_box) || (u_box && v_traj)))
            return GraphViolation{"non-bipartite edge"};
        if (!std::isfinite(e.weight)) return GraphViolation{"non-finite weight"};
        auto key = std::minmax(e.u, e.v);
        if (!seen.insert({key.first, key.second}).second)
            return GraphViolation{"duplicate edge"};
    }
    return std::nullopt;
}

/// y_e = 1 iff the endpoints of e carry different labels.
inline Multicut partition_to_multicut(const TrajectoryGraph& g, const Partition& p) {
    for (VertexId v : g.trajectory_vertices()) (void)p.label_of(v);
    for (VertexId v : g.box_vertices()) (void)p.label_of(v);
    Multicut y;
    y.cut.reserve(g.edge_count());
    for (const Edge& e : g.edges())
        y.cut.push_back(p.label_of(e.u) != p.label_of(e.v) ? 1 : 0);
    return y;
}

}  // namespace mmseg
