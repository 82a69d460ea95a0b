#pragma once

// End-to-end stages: dataset -> graph -> bias -> GAEC -> mined segments, and
// map + query datasets -> place classifier -> multi-start MCL -> Top-X.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mmseg/core.hpp"
#include "mmseg/dataset.hpp"
#include "mmseg/mcl.hpp"
#include "mmseg/multicut.hpp"
#include "mmseg/placeclass.hpp"
#include "mmseg/segment_miner.hpp"
#include "mmseg/trackgraph.hpp"

namespace mmseg {

struct SegmentationConfig {
    AffinityMode affinity = AffinityMode::unit;
    double bias_fraction = 0.2;
    MiningConfig mining;
    GaecOptions gaec;
};

struct SegmentationOutput {
    TrajectoryGraph graph;  // before bias
    BiasReport bias;
    SolveResult solve;
    std::vector<PointTrajectory> trajectories;
    MiningResult mining;
    SegmentStats stats;
};

inline GraphBuilder build_graph(const Dataset& data, AffinityMode affinity) {
    GraphBuilder builder({data.header.extent(), affinity, 0.2});
    std::map<FrameId, std::vector<ObjectBox>> boxes_by_frame;
    for (const auto& b : data.boxes) boxes_by_frame[b.frame].push_back(b);
    std::set<FrameId> frames;
    for (const auto& ft : data.tracks) frames.insert(ft.frame);
    for (const auto& [f, bs] : boxes_by_frame) frames.insert(f);

    std::map<FrameId, const FrameTracks*> tracks_by_frame;
    for (const auto& ft : data.tracks) tracks_by_frame[ft.frame] = &ft;
    const std::vector<TrackUpdate> none;
    const std::vector<ObjectBox> no_boxes;
    for (FrameId f : frames) {
        auto t = tracks_by_frame.find(f);
        auto b = boxes_by_frame.find(f);
        builder.ingest_frame(f, t == tracks_by_frame.end() ? std::span<const TrackUpdate>(none)
                                                           : std::span<const TrackUpdate>(t->second->updates),
                             b == boxes_by_frame.end() ? std::span<const ObjectBox>(no_boxes)
                                                       : std::span<const ObjectBox>(b->second));
    }
    return builder;
}

inline SegmentationOutput segment_dataset(const Dataset& data, const SegmentationConfig& cfg) {
    data.header.validate();
    auto builder = build_graph(data, cfg.affinity);
    SegmentationOutput out;
    out.graph = builder.graph();
    out.trajectories = builder.trajectories();
    if (auto v = validate_graph(out.graph))
        throw InvariantError("constructed graph is invalid: " + v->message);

    out.bias = bias_report(out.graph, cfg.bias_fraction);
    const TrajectoryGraph biased = apply_bias(out.graph, out.bias.c_o);
    out.solve = solve_gaec(biased, cfg.gaec);
    if (!is_feasible(biased, out.solve.multicut))
        throw InvariantError("GAEC produced an infeasible multicut");
    out.mining = mine_segments(out.graph, out.solve.partition, out.trajectories, data.poses, cfg.mining);
    const auto frames = data.frames();
    out.stats = compute_stats(out.mining.segments, frames, data.header.extent());
    return out;
}

// ---------------------------------------------------------------------------

enum class EvalMethod { bow, class_index, oracle };

struct EvalConfig {
    MclConfig mcl;
    EvalMethod method = EvalMethod::bow;
    std::uint64_t codebook_seed = 7;
    std::size_t codebook_words = 256;
    RatioTest ratio;
    OverlapThresholds overlap;
    double grid_cell = 10.0;
};

struct EvalOutput {
    TopXTable table;
    std::vector<RunOutcome> runs;
    std::vector<double> candidate_starts;
    std::size_t class_count = 0;
    int token_bits = 0;
};

namespace detail {

inline double median_step(const PoseLog& poses) {
    std::vector<double> steps;
    const auto& r = poses.records();
    for (std::size_t i = 1; i < r.size(); ++i) steps.push_back(r[i].s - r[i - 1].s);
    if (steps.empty()) return 1.0;
    std::nth_element(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2), steps.end());
    const double m = steps[steps.size() / 2];
    return m > 0.0 ? m : 1.0;
}

inline SpanMap segment_spans(std::span<const MapSegment> segments, double step) {
    SpanMap spans;
    for (const auto& seg : segments)
        spans[seg.id] = spans_from_samples(seg.viewpoint_span, 3.0 * step, 0.5 * step);
    return spans;
}

inline bool in_spans(const std::vector<TravelInterval>& spans, double s) {
    return std::any_of(spans.begin(), spans.end(),
                       [s](const TravelInterval& iv) { return iv.lo <= s && s <= iv.hi; });
}

// Highest-scoring class, or nullopt if nothing scored.
inline std::optional<SegmentId> predicted_class(const std::map<SegmentId, double>& scores) {
    std::optional<SegmentId> best;
    double best_score = 0.0;
    for (const auto& [cls, sc] : scores)
        if (sc > best_score) {
            best_score = sc;
            best = cls;
        }
    return best;
}

}  // namespace detail

inline std::map<SegmentId, std::vector<Descriptor>> training_descriptors(const Dataset& map,
                                                                          std::span<const MapSegment> segments) {
    std::map<SegmentId, std::vector<Descriptor>> training;
    for (const auto& seg : segments) {
        auto& bag = training[seg.id];
        for (const auto& [frame, box] : seg.frame_boxes) {
            auto it = map.descriptors.find(frame);
            if (it != map.descriptors.end()) bag.insert(bag.end(), it->second.begin(), it->second.end());
        }
    }
    return training;
}

/// Map travel-distance axis and query travel axis must coincide (same world
/// frame and path).
inline EvalOutput evaluate_localization(const Dataset& map, std::span<const MapSegment> segments,
                                        const Dataset& query, const EvalConfig& cfg) {
    cfg.mcl.validate();
    EvalOutput out;
    out.class_count = segments.size();
    out.token_bits = token_width_bits(segments.size());

    const double step = detail::median_step(map.poses);
    const SpanMap class_spans = detail::segment_spans(segments, step);

    std::vector<QueryStep> steps;
    steps.reserve(query.poses.size());
    SpanMap spans = class_spans;

    if (cfg.method == EvalMethod::oracle) {
        for (const auto& p : query.poses.records()) {
            QueryStep qs{p.s, {}};
            for (const auto& [cls, iv] : class_spans)
                if (detail::in_spans(iv, p.s)) qs.scores[cls] = 1.0;
            steps.push_back(std::move(qs));
        }
    } else {
        if (map.descriptors.empty() || query.descriptors.empty())
            throw DataError("descriptors are required for the bow and class-index methods");
        const std::size_t dim = map.descriptors.begin()->second.empty()
                                    ? 0
                                    : map.descriptors.begin()->second.front().size();
        if (dim == 0) throw DataError("map descriptors are empty");
        const Codebook codebook(cfg.codebook_seed, dim, cfg.codebook_words);
        auto training = training_descriptors(map, segments);
        for (auto it = training.begin(); it != training.end();)
            it = it->second.empty() ? training.erase(it) : std::next(it);
        const BowModel model = build_bow(training, codebook);

        auto frame_scores = [&](const Dataset& d, FrameId f) {
            auto it = d.descriptors.find(f);
            if (it == d.descriptors.end()) return std::map<SegmentId, double>{};
            return score_bow(it->second, model, codebook, cfg.ratio);
        };

        if (cfg.method == EvalMethod::bow) {
            for (const auto& p : query.poses.records()) {
                QueryStep qs{p.s, {}};
                for (const auto& [cls, sc] : frame_scores(query, p.frame))
                    if (sc > 0.0) qs.scores[cls] = sc;
                steps.push_back(std::move(qs));
            }
        } else {
            // Predicted class tokens index every map frame as a place.
            std::vector<PlaceTokens> places;
            spans.clear();
            for (const auto& p : map.poses.records()) {
                PlaceTokens pt{p.frame.index, p.frame, {}};
                if (auto c = detail::predicted_class(frame_scores(map, p.frame))) pt.tokens.push_back(*c);
                spans[pt.place_id] = {{p.s - 0.5 * step, p.s + 0.5 * step}};
                places.push_back(std::move(pt));
            }
            const auto index = build_class_index(places, std::max<std::size_t>(segments.size(), 1));
            for (const auto& p : query.poses.records()) {
                QueryStep qs{p.s, {}};
                std::vector<SegmentId> tokens;
                if (auto c = detail::predicted_class(frame_scores(query, p.frame))) tokens.push_back(*c);
                qs.scores = score_class_index(tokens, index);
                steps.push_back(std::move(qs));
            }
        }
    }

    // Test-sequence selection by viewpoint overlap.
    std::set<GridCell> map_cells, seg_cells;
    for (const auto& p : map.poses.records()) map_cells.insert(grid_cell(p.x, p.y, cfg.grid_cell));
    for (const auto& seg : segments) {
        auto cells = segment_cells(seg, map.poses, cfg.grid_cell);
        seg_cells.insert(cells.begin(), cells.end());
    }
    std::vector<RunCells> candidates;
    for (double start : start_locations(cfg.mcl)) {
        RunCells rc{start, {}};
        for (const auto& p : query.poses.records())
            if (p.s >= start) rc.cells.insert(grid_cell(p.x, p.y, cfg.grid_cell));
        candidates.push_back(std::move(rc));
        out.candidate_starts.push_back(start);
    }
    const auto retained = filter_test_sequences(candidates, map_cells, seg_cells, cfg.overlap);

    for (double start : retained) out.runs.push_back(run_localization(cfg.mcl, steps, spans, start));
    out.table = evaluate_topx(out.runs, cfg.mcl);
    return out;
}

}  // namespace mmseg
