#pragma once

// Turns a graph partition into mined map segments and measures them:
// retention ratios, cross-season Jaccard similarity, the equal-length
// baseline and self-supervised box annotations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "mmseg/core.hpp"

namespace mmseg {

struct MiningConfig {
    int min_trajectories_per_segment = 5;
    int min_boxes_per_segment = 1;
    int bbox_min_pixels = 100;
    double grid_cell_meters = 10.0;
};

struct MiningResult {
    std::vector<MapSegment> segments;
    std::vector<VertexId> discarded;  // sorted
};

namespace detail {

inline void fill_segment_geometry(MapSegment& seg,
                                  const std::unordered_map<std::int64_t, const PointTrajectory*>& by_id,
                                  const PoseLog& poses) {
    for (std::int64_t tid : seg.trajectory_ids) {
        auto it = by_id.find(tid);
        if (it == by_id.end())
            throw DataError("segment references unknown trajectory " + std::to_string(tid));
        for (const TrackSample& s : it->second->samples) {
            auto [box, inserted] = seg.frame_boxes.try_emplace(s.frame, BoxRect::point(s.x, s.y));
            if (!inserted) box->second.expand(s.x, s.y);
        }
    }
    seg.viewpoint_span.clear();
    seg.viewpoint_span.reserve(seg.frame_boxes.size());
    for (const auto& [frame, box] : seg.frame_boxes) seg.viewpoint_span.push_back(poses.at(frame).s);
    std::sort(seg.viewpoint_span.begin(), seg.viewpoint_span.end());
}

}  // namespace detail

/// Components with enough trajectory and box vertices become segments; every
/// other vertex lands in the discarded set.
inline MiningResult mine_segments(const TrajectoryGraph& g, const Partition& partition,
                                  std::span<const PointTrajectory> trajectories,
                                  const PoseLog& poses, const MiningConfig& cfg) {
    struct Members {
        std::vector<VertexId> trajectories;
        std::vector<VertexId> boxes;
    };
    std::map<SegmentId, Members> components;
    for (VertexId v : g.trajectory_vertices()) components[partition.label_of(v)].trajectories.push_back(v);
    for (VertexId v : g.box_vertices()) components[partition.label_of(v)].boxes.push_back(v);

    std::unordered_map<std::int64_t, const PointTrajectory*> by_id;
    by_id.reserve(trajectories.size());
    for (const auto& t : trajectories) by_id.emplace(t.id, &t);

    MiningResult out;
    for (auto& [label, m] : components) {
        const bool keep =
            static_cast<int>(m.trajectories.size()) >= cfg.min_trajectories_per_segment &&
            static_cast<int>(m.boxes.size()) >= cfg.min_boxes_per_segment;
        if (!keep) {
            out.discarded.insert(out.discarded.end(), m.trajectories.begin(), m.trajectories.end());
            out.discarded.insert(out.discarded.end(), m.boxes.begin(), m.boxes.end());
            continue;
        }
        MapSegment seg;
        seg.id = static_cast<SegmentId>(out.segments.size());
        for (VertexId v : m.trajectories) seg.trajectory_ids.push_back(v);
        for (VertexId v : m.boxes) seg.box_ids.push_back(box_id_of(v));
        detail::fill_segment_geometry(seg, by_id, poses);
        out.segments.push_back(std::move(seg));
    }
    std::sort(out.discarded.begin(), out.discarded.end());
    return out;
}

/// Exact area of a union of axis-aligned rectangles (coordinate compression).
inline double union_area(std::span<const BoxRect> boxes) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& b : boxes) {
        if (!(b.width() > 0.0) || !(b.height() > 0.0)) continue;
        xs.push_back(b.x_min);
        xs.push_back(b.x_max);
        ys.push_back(b.y_min);
        ys.push_back(b.y_max);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
            const double cx = 0.5 * (xs[i] + xs[i + 1]);
            const double cy = 0.5 * (ys[j] + ys[j + 1]);
            const bool covered = std::any_of(boxes.begin(), boxes.end(), [&](const BoxRect& b) {
                return b.x_min <= cx && cx <= b.x_max && b.y_min <= cy && cy <= b.y_max;
            });
            if (covered) area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
        }
    }
    return area;
}

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;  // population
};

inline MeanStd mean_std(std::span<const double> xs) {
    MeanStd r;
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
    return r;
}

struct SegmentStats {
    std::size_t class_count = 0;
    MeanStd trajectories_per_class;
    double retained_image_ratio = 0.0;  // R_i
    double retained_pixel_ratio = 0.0;  // R_p
    std::size_t retained_images = 0;
    MeanStd retained_pixel_percent_per_image;  // over retained images, in %
};

/// Retention ratios over `all_frames`. Segment frames outside `all_frames` are
/// ignored.
inline SegmentStats compute_stats(std::span<const MapSegment> segments,
                                  std::span<const FrameId> all_frames,
                                  const ImageExtent& extent) {
    SegmentStats st;
    st.class_count = segments.size();
    std::vector<double> sizes;
    for (const auto& s : segments) sizes.push_back(static_cast<double>(s.trajectory_ids.size()));
    st.trajectories_per_class = mean_std(sizes);

    std::map<FrameId, std::vector<BoxRect>> per_frame;
    for (const auto& s : segments)
        for (const auto& [f, box] : s.frame_boxes) per_frame[f].push_back(box);

    if (all_frames.empty() || !(extent.area() > 0.0)) return st;
    double pixel_sum = 0.0;
    std::vector<double> per_image;
    for (FrameId f : all_frames) {
        auto it = per_frame.find(f);
        if (it == per_frame.end()) continue;
        ++st.retained_images;
        const double frac = union_area(it->second) / extent.area();
        pixel_sum += frac;
        per_image.push_back(100.0 * frac);
    }
    const double n = static_cast<double>(all_frames.size());
    st.retained_image_ratio = static_cast<double>(st.retained_images) / n;
    st.retained_pixel_ratio = pixel_sum / n;
    st.retained_pixel_percent_per_image = mean_std(per_image);
    return st;
}

// ---------------------------------------------------------------------------
// Cross-season similarity over a world grid. Cells are half-open
// [k*cell, (k+1)*cell) with origin at world (0, 0).

using GridCell = std::pair<std::int64_t, std::int64_t>;

inline GridCell grid_cell(double x, double y, double cell) {
    return {static_cast<std::int64_t>(std::floor(x / cell)),
            static_cast<std::int64_t>(std::floor(y / cell))};
}

inline std::set<GridCell> segment_cells(const MapSegment& seg, const PoseLog& poses, double cell) {
    std::set<GridCell> cells;
    for (const auto& [f, box] : seg.frame_boxes) {
        const auto& p = poses.at(f);
        cells.insert(grid_cell(p.x, p.y, cell));
    }
    return cells;
}

inline double jaccard(const std::set<GridCell>& a, const std::set<GridCell>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& c : a) common += b.count(c);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

struct JaccardSummary {
    std::vector<double> best;   // per query segment
    std::vector<bool> flagged;  // query segment had no cells
    double zero_ratio = 0.0;
    std::size_t nonzero_count = 0;
    double nonzero_max = 0.0;
    double nonzero_mean = 0.0;
    double nonzero_median = 0.0;
};

inline JaccardSummary jaccard_cross_season(std::span<const MapSegment> query, const PoseLog& query_poses,
                                           std::span<const MapSegment> reference,
                                           const PoseLog& reference_poses, double cell) {
    std::vector<std::set<GridCell>> ref_cells;
    ref_cells.reserve(reference.size());
    for (const auto& r : reference) ref_cells.push_back(segment_cells(r, reference_poses, cell));

    JaccardSummary out;
    std::vector<double> nonzero;
    for (const auto& q : query) {
        const auto cells = segment_cells(q, query_poses, cell);
        double best = 0.0;
        if (!cells.empty())
            for (const auto& rc : ref_cells) best = std::max(best, jaccard(cells, rc));
        out.best.push_back(best);
        out.flagged.push_back(cells.empty());
        if (best > 0.0) nonzero.push_back(best);
    }
    if (!query.empty())
        out.zero_ratio = static_cast<double>(query.size() - nonzero.size()) /
                         static_cast<double>(query.size());
    out.nonzero_count = nonzero.size();
    if (!nonzero.empty()) {
        std::sort(nonzero.begin(), nonzero.end());
        out.nonzero_max = nonzero.back();
        double sum = 0.0;
        for (double v : nonzero) sum += v;
        out.nonzero_mean = sum / static_cast<double>(nonzero.size());
        const std::size_t mid = nonzero.size() / 2;
        out.nonzero_median =
            nonzero.size() % 2 ? nonzero[mid] : 0.5 * (nonzero[mid - 1] + nonzero[mid]);
    }
    return out;
}

/// Tiles the travel axis into consecutive `segment_length` intervals starting
/// at the first pose; the last interval takes the remainder. Each interval is
/// a segment covering the full image in its frames, with every trajectory
/// alive in those frames as a member.
inline std::vector<MapSegment> baseline_equal_length(const PoseLog& poses, double segment_length,
                                                     std::span<const PointTrajectory> trajectories,
                                                     const ImageExtent& extent) {
    if (!(segment_length > 0.0)) throw std::invalid_argument("segment length must be positive");
    if (poses.empty()) return {};
    const double s0 = poses.records().front().s;
    const double length = poses.records().back().s - s0;
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(length / segment_length - 1e-9)));

    std::vector<MapSegment> segs(count);
    std::map<FrameId, std::size_t> frame_slot;
    for (std::size_t i = 0; i < count; ++i) segs[i].id = static_cast<SegmentId>(i);
    const BoxRect full{0.0, 0.0, extent.width, extent.height};
    for (const auto& p : poses.records()) {
        auto k = static_cast<std::size_t>(std::floor((p.s - s0) / segment_length));
        k = std::min(k, count - 1);
        segs[k].frame_boxes.emplace(p.frame, full);
        segs[k].viewpoint_span.push_back(p.s);
        frame_slot.emplace(p.frame, k);
    }
    for (const auto& t : trajectories) {
        std::set<std::size_t> hit;
        for (const auto& s : t.samples) {
            auto it = frame_slot.find(s.frame);
            if (it != frame_slot.end()) hit.insert(it->second);
        }
        for (std::size_t k : hit) segs[k].trajectory_ids.push_back(t.id);
    }
    for (auto& s : segs) std::sort(s.trajectory_ids.begin(), s.trajectory_ids.end());
    return segs;
}

struct AnnotationRecord {
    FrameId frame;
    SegmentId class_id = 0;
    BoxRect bbox;
};

/// One record per (segment, frame), skipping boxes narrower or shorter than
/// `bbox_min_pixels`.
inline std::vector<AnnotationRecord> export_obb_annotations(std::span<const MapSegment> segments,
                                                            int bbox_min_pixels) {
    std::vector<AnnotationRecord> out;
    for (const auto& seg : segments)
        for (const auto& [f, box] : seg.frame_boxes)
            if (box.width() >= bbox_min_pixels && box.height() >= bbox_min_pixels)
                out.push_back({f, seg.id, box});
    return out;
}

}  // namespace mmseg
