#pragma once

// On-disk formats. Record streams are JSON lines; reports are pretty-printed
// JSON documents. Every parse error names the file and line.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mmseg/dataset.hpp"
#include "mmseg/mcl.hpp"
#include "mmseg/pipeline.hpp"
#include "mmseg/segment_miner.hpp"
#include "mmseg/synthworld.hpp"

namespace mmseg::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kHeaderFile = "header.json";
inline constexpr const char* kTracksFile = "tracks.jsonl";
inline constexpr const char* kBoxesFile = "boxes.jsonl";
inline constexpr const char* kPosesFile = "poses.jsonl";
inline constexpr const char* kDescriptorsFile = "descriptors.jsonl";
inline constexpr const char* kTruthFile = "truth.jsonl";

namespace detail {

inline std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError(p.string() + ": cannot open");
    return in;
}

inline std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(p.string() + ": cannot write");
    return out;
}

/// Calls `fn(record)` for each non-blank line; errors carry file:line.
template <typename Fn>
void for_each_record(const fs::path& p, Fn&& fn) {
    auto in = open_in(p);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(json::parse(line));
        } catch (const json::exception& e) {
            throw DataError(p.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(p.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline json read_document(const fs::path& p) {
    auto in = open_in(p);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(p.string() + ": " + e.what());
    }
}

inline void write_document(const fs::path& p, const json& j) {
    auto out = open_out(p);
    out << j.dump(2) << '\n';
}

inline json box_json(const BoxRect& b) {
    return {{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max}, {"y_max", b.y_max}};
}

inline BoxRect box_from(const json& j) {
    return {j.at("x_min").get<double>(), j.at("y_min").get<double>(), j.at("x_max").get<double>(),
            j.at("y_max").get<double>()};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset directory

inline json header_json(const DatasetHeader& h) {
    return {{"image_width", h.image_width}, {"image_height", h.image_height}, {"frame_count", h.frame_count},
            {"map_length", h.map_length},   {"season", h.season}};
}

inline DatasetHeader header_from(const json& j) {
    DatasetHeader h;
    h.image_width = j.at("image_width").get<int>();
    h.image_height = j.at("image_height").get<int>();
    h.frame_count = j.at("frame_count").get<std::int64_t>();
    h.map_length = j.at("map_length").get<double>();
    h.season = j.value("season", std::string{});
    h.validate();
    return h;
}

inline void write_dataset(const fs::path& dir, const Dataset& d) {
    fs::create_directories(dir);
    detail::write_document(dir / kHeaderFile, header_json(d.header));
    {
        auto out = detail::open_out(dir / kTracksFile);
        for (const auto& ft : d.tracks)
            for (const auto& u : ft.updates)
                out << json{{"id", u.trajectory_id}, {"frame", ft.frame.index}, {"x", u.x}, {"y", u.y}}.dump()
                    << '\n';
    }
    {
        auto out = detail::open_out(dir / kBoxesFile);
        for (const auto& b : d.boxes) {
            json j = detail::box_json(b.rect);
            j["id"] = b.id;
            j["frame"] = b.frame.index;
            out << j.dump() << '\n';
        }
    }
    {
        auto out = detail::open_out(dir / kPosesFile);
        for (const auto& p : d.poses.records())
            out << json{{"frame", p.frame.index}, {"s", p.s}, {"x", p.x}, {"y", p.y}}.dump() << '\n';
    }
    {
        auto out = detail::open_out(dir / kDescriptorsFile);
        for (const auto& [frame, descs] : d.descriptors)
            for (const auto& v : descs) out << json{{"frame", frame.index}, {"vec", v}}.dump() << '\n';
    }
}

inline PoseLog read_poses(const fs::path& file) {
    std::vector<PoseRecord> poses;
    detail::for_each_record(file, [&](const json& j) {
        PoseRecord p{FrameId{j.at("frame").get<std::int64_t>()}, j.at("s").get<double>(), j.at("x").get<double>(),
                     j.at("y").get<double>()};
        if (!poses.empty() && !(poses.back().frame < p.frame)) throw DataError("pose frames must increase");
        if (!poses.empty() && p.s < poses.back().s) throw DataError("travel distance decreases");
        poses.push_back(p);
    });
    return PoseLog(std::move(poses));
}

/// Reads a dataset directory. Descriptors are optional.
inline Dataset read_dataset(const fs::path& dir) {
    Dataset d;
    d.header = header_from(detail::read_document(dir / kHeaderFile));

    detail::for_each_record(dir / kTracksFile, [&](const json& j) {
        const FrameId f{j.at("frame").get<std::int64_t>()};
        if (d.tracks.empty() || d.tracks.back().frame < f) d.tracks.push_back({f, {}});
        else if (d.tracks.back().frame != f) throw DataError("track records are not grouped by frame order");
        const TrackUpdate u{j.at("id").get<std::int64_t>(), j.at("x").get<double>(), j.at("y").get<double>()};
        if (!d.header.extent().contains(u.x, u.y)) throw DataError("track point outside the image extent");
        d.tracks.back().updates.push_back(u);
    });
    detail::for_each_record(dir / kBoxesFile, [&](const json& j) {
        ObjectBox b{j.at("id").get<std::int64_t>(), FrameId{j.at("frame").get<std::int64_t>()}, detail::box_from(j)};
        check_box(b, d.header.extent());
        if (!d.boxes.empty() && b.frame < d.boxes.back().frame)
            throw DataError("box records are not in frame order");
        d.boxes.push_back(b);
    });
    d.poses = read_poses(dir / kPosesFile);
    if (fs::exists(dir / kDescriptorsFile)) {
        std::size_t dim = 0;
        detail::for_each_record(dir / kDescriptorsFile, [&](const json& j) {
            auto vec = j.at("vec").get<std::vector<double>>();
            if (vec.empty()) throw DataError("empty descriptor");
            if (dim == 0) dim = vec.size();
            if (vec.size() != dim) throw DataError("descriptor dimension mismatch");
            d.descriptors[FrameId{j.at("frame").get<std::int64_t>()}].push_back(std::move(vec));
        });
    }
    return d;
}

inline void write_truth(const fs::path& dir, const GroundTruth& t) {
    auto out = detail::open_out(dir / kTruthFile);
    for (const auto& [id, cluster] : t.trajectory_cluster)
        out << json{{"id", id}, {"cluster", cluster}}.dump() << '\n';
}

inline std::optional<GroundTruth> read_truth(const fs::path& dir) {
    if (!fs::exists(dir / kTruthFile)) return std::nullopt;
    GroundTruth t;
    detail::for_each_record(dir / kTruthFile, [&](const json& j) {
        t.trajectory_cluster[j.at("id").get<std::int64_t>()] = j.at("cluster").get<int>();
    });
    return t;
}

// ---------------------------------------------------------------------------
// World spec

inline json world_json(const WorldSpec& w) {
    json clusters = json::array();
    for (const auto& c : w.clusters)
        clusters.push_back({{"anchor_s", c.anchor_s}, {"lateral", c.lateral}, {"radius", c.radius},
                            {"height", c.height}, {"points", c.points}, {"present", c.present}});
    return {{"seed", w.seed},
            {"map_length", w.map_length},
            {"frame_step", w.frame_step},
            {"image_width", w.image_width},
            {"image_height", w.image_height},
            {"horizontal_fov_deg", w.horizontal_fov_deg},
            {"camera_height", w.camera_height},
            {"sensing_range", w.sensing_range},
            {"path_amplitude", w.path_amplitude},
            {"path_wavelength", w.path_wavelength},
            {"seasons", w.seasons},
            {"clusters", clusters},
            {"features_per_frame", w.features_per_frame},
            {"clutter_rate", w.clutter_rate},
            {"box_miss_probability", w.box_miss_probability},
            {"cluster_track_loss", w.cluster_track_loss},
            {"clutter_track_loss", w.clutter_track_loss},
            {"box_padding", w.box_padding},
            {"descriptor_dimension", w.descriptor_dimension},
            {"prototypes_per_cluster", w.prototypes_per_cluster},
            {"clutter_descriptors_per_frame", w.clutter_descriptors_per_frame},
            {"observation_noise", w.observation_noise},
            {"season_noise", w.season_noise}};
}

/// Overlays the keys present in `j` on the default world. `cluster_count` and
/// `coverage` regenerate evenly spaced clusters; an explicit `clusters` array
/// wins over both.
inline WorldSpec world_from(const json& j) {
    WorldSpec w = default_world();
    if (j.contains("cluster_count") || j.contains("coverage") || j.contains("map_length")) {
        const auto count = j.value("cluster_count", std::size_t{5});
        const double coverage = j.value("coverage", 0.2);
        const double length = j.value("map_length", w.map_length);
        if (count == 0) throw DataError("world spec: cluster_count must be positive");
        WorldSpec fresh = make_world(count, coverage, length);
        w.map_length = fresh.map_length;
        w.sensing_range = fresh.sensing_range;
        w.clusters = fresh.clusters;
    }
    auto take = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    try {
        take("seed", w.seed);
        take("frame_step", w.frame_step);
        take("image_width", w.image_width);
        take("image_height", w.image_height);
        take("horizontal_fov_deg", w.horizontal_fov_deg);
        take("camera_height", w.camera_height);
        take("sensing_range", w.sensing_range);
        take("path_amplitude", w.path_amplitude);
        take("path_wavelength", w.path_wavelength);
        take("seasons", w.seasons);
        take("features_per_frame", w.features_per_frame);
        take("clutter_rate", w.clutter_rate);
        take("box_miss_probability", w.box_miss_probability);
        take("cluster_track_loss", w.cluster_track_loss);
        take("clutter_track_loss", w.clutter_track_loss);
        take("box_padding", w.box_padding);
        take("descriptor_dimension", w.descriptor_dimension);
        take("prototypes_per_cluster", w.prototypes_per_cluster);
        take("clutter_descriptors_per_frame", w.clutter_descriptors_per_frame);
        take("observation_noise", w.observation_noise);
        if (j.contains("seasons") && !j.contains("season_noise"))
            w.season_noise.assign(w.seasons.size(), w.season_noise.front());
        take("season_noise", w.season_noise);
        if (j.contains("seasons") && !j.contains("clusters"))
            for (auto& c : w.clusters)
                if (c.present.size() != w.seasons.size()) c.present.clear();
        if (j.contains("clusters")) {
            w.clusters.clear();
            for (const auto& cj : j.at("clusters")) {
                ClusterSpec c;
                c.anchor_s = cj.at("anchor_s").get<double>();
                c.lateral = cj.value("lateral", c.lateral);
                c.radius = cj.value("radius", c.radius);
                c.height = cj.value("height", c.height);
                c.points = cj.value("points", c.points);
                c.present = cj.value("present", std::vector<bool>{});
                w.clusters.push_back(std::move(c));
            }
        }
        w.validate();
    } catch (const json::exception& e) {
        throw DataError(std::string("world spec: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("world spec: ") + e.what());
    }
    return w;
}

// ---------------------------------------------------------------------------
// Segments and reports

inline json segments_json(std::span<const MapSegment> segments, std::size_t discarded) {
    json arr = json::array();
    for (const auto& s : segments) {
        json boxes = json::array();
        for (const auto& [f, b] : s.frame_boxes) {
            json bj = detail::box_json(b);
            bj["frame"] = f.index;
            boxes.push_back(std::move(bj));
        }
        arr.push_back({{"id", s.id},
                       {"trajectory_ids", s.trajectory_ids},
                       {"box_ids", s.box_ids},
                       {"frame_boxes", boxes},
                       {"viewpoint_span", s.viewpoint_span}});
    }
    return {{"class_count", segments.size()},
            {"token_bits", token_width_bits(segments.size())},
            {"discarded_vertices", discarded},
            {"segments", arr}};
}

inline std::vector<MapSegment> segments_from(const json& j) {
    std::vector<MapSegment> out;
    try {
        for (const auto& sj : j.at("segments")) {
            MapSegment s;
            s.id = sj.at("id").get<SegmentId>();
            s.trajectory_ids = sj.at("trajectory_ids").get<std::vector<std::int64_t>>();
            s.box_ids = sj.value("box_ids", std::vector<std::int64_t>{});
            for (const auto& bj : sj.at("frame_boxes"))
                s.frame_boxes[FrameId{bj.at("frame").get<std::int64_t>()}] = detail::box_from(bj);
            s.viewpoint_span = sj.at("viewpoint_span").get<std::vector<double>>();
            out.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("segments: ") + e.what());
    }
    return out;
}

inline std::vector<MapSegment> read_segments(const fs::path& p) {
    try {
        return segments_from(detail::read_document(p));
    } catch (const DataError& e) {
        throw DataError(p.string() + ": " + e.what());
    }
}

inline json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.stddev}}; }

inline json stats_json(const SegmentStats& s) {
    return {{"class_count", s.class_count},
            {"trajectories_per_class", mean_std_json(s.trajectories_per_class)},
            {"R_i", s.retained_image_ratio},
            {"R_p", s.retained_pixel_ratio},
            {"retained_images", s.retained_images},
            {"retained_pixel_percent_per_image", mean_std_json(s.retained_pixel_percent_per_image)}};
}

inline json bias_json(const BiasReport& b) {
    return {{"c_o", b.c_o},
            {"edge_count", b.edge_count},
            {"degenerate_fallback", b.degenerate},
            {"weights",
             {{"min", b.weights.min}, {"max", b.weights.max}, {"mean", b.weights.mean}, {"median", b.weights.median}}}};
}

inline json graph_json(const TrajectoryGraph& g) {
    json edges = json::array();
    for (const auto& e : g.edges()) edges.push_back({e.u, e.v, e.weight});
    return {{"trajectory_vertices", g.trajectory_vertices().size()},
            {"box_vertices", g.box_vertices().size()},
            {"box_vertex_base", kBoxVertexBase},
            {"edges", edges}};
}

inline void write_annotations(const fs::path& p, std::span<const AnnotationRecord> records) {
    auto out = detail::open_out(p);
    for (const auto& r : records) {
        json j = detail::box_json(r.bbox);
        j["frame"] = r.frame.index;
        j["class_id"] = r.class_id;
        out << j.dump() << '\n';
    }
}

inline json topx_json(const TopXTable& t) {
    json j = json::object();
    for (std::size_t i = 0; i < t.levels.size(); ++i) j[std::to_string(t.levels[i])] = t.accuracy[i];
    return j;
}

inline const char* method_name(EvalMethod m) {
    switch (m) {
        case EvalMethod::bow: return "bow";
        case EvalMethod::class_index: return "class-index";
        case EvalMethod::oracle: return "oracle";
    }
    return "?";
}

inline json eval_report_json(const EvalOutput& e, EvalMethod method, std::size_t hypotheses_per_run) {
    json runs = json::array();
    for (const auto& r : e.runs) {
        json hyps = json::array();
        for (std::size_t i = 0; i < std::min(hypotheses_per_run, r.hypotheses.size()); ++i)
            hyps.push_back({r.hypotheses[i].s, r.hypotheses[i].L});
        runs.push_back({{"start", r.start},
                        {"truth", r.truth},
                        {"updates_applied", r.updates_applied},
                        {"updates_skipped", r.updates_skipped},
                        {"max_delta_error", r.max_delta_error},
                        {"hypotheses", hyps}});
    }
    json correct = json::object();
    for (std::size_t i = 0; i < e.table.levels.size(); ++i)
        correct[std::to_string(e.table.levels[i])] = e.table.correct[i];
    return {{"method", method_name(method)},
            {"class_count", e.class_count},
            {"token_bits", e.token_bits},
            {"candidate_starts", e.candidate_starts},
            {"retained_runs", e.runs.size()},
            {"top_x", topx_json(e.table)},
            {"correct", correct},
            {"runs", runs}};
}

inline json jaccard_json(const JaccardSummary& s) {
    return {{"best", s.best},
            {"flagged_empty", s.flagged},
            {"zero_ratio", s.zero_ratio},
            {"nonzero",
             {{"count", s.nonzero_count}, {"max", s.nonzero_max}, {"mean", s.nonzero_mean}, {"median", s.nonzero_median}}}};
}

inline void write_json(const fs::path& p, const json& j) { detail::write_document(p, j); }
inline json read_json(const fs::path& p) { return detail::read_document(p); }

}  // namespace mmseg::io
