// mmseg: mine minimal map segments from view-sequence maps and evaluate them
// as place classes for topometric localization.
//
// Exit status: 0 success, 2 usage error, 3 data error, 4 internal invariant
// violation.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "mmseg/io.hpp"
#include "mmseg/pipeline.hpp"
#include "mmseg/synthworld.hpp"

namespace fs = std::filesystem;
using namespace mmseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInvariant = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SynthArgs {
    std::string spec;
    std::string out;
    std::optional<std::uint64_t> seed;
};

struct SegmentArgs {
    std::string data;
    std::string out;
    double bias_fraction = 0.2;
    int min_trajectories = 5;
    int min_boxes = 1;
    int bbox_min_pixels = 100;
    std::string affinity = "unit";
    std::string baseline;
    bool local_moves = false;
};

struct EvalArgs {
    std::string map;
    std::string query;
    std::string segments;
    std::string out;
    std::string method = "bow";
    double nms_radius = 10.0;
    double correct_radius = 10.0;
    double d_norm = 1.0;
    double start_spacing = 100.0;
    std::uint64_t seed = 7;
    std::size_t words = 256;
    std::size_t hypotheses_per_run = 200;
};

struct MetricsArgs {
    std::string segments_a, poses_a, segments_b, poses_b, out;
    double cell = 10.0;
};

void run_synth(const SynthArgs& a) {
    WorldSpec world = a.spec.empty() ? default_world() : io::world_from(io::read_json(a.spec));
    if (a.seed) world.seed = *a.seed;
    const fs::path out(a.out);
    fs::create_directories(out);
    io::write_json(out / "world.json", io::world_json(world));
    for (std::size_t s = 0; s < world.seasons.size(); ++s) {
        const auto season = generate_season(world, s);
        const fs::path dir = out / world.seasons[s];
        io::write_dataset(dir, season.dataset);
        io::write_truth(dir, season.truth);
        std::cout << dir.string() << ": " << season.dataset.header.frame_count << " frames, "
                  << season.truth.trajectory_cluster.size() << " trajectories, "
                  << season.dataset.boxes.size() << " boxes\n";
    }
}

double parse_baseline(const std::string& spec) {
    const std::string prefix = "equal-length=";
    if (spec.rfind(prefix, 0) != 0) throw UsageError("--baseline expects equal-length=<meters>");
    try {
        const double length = std::stod(spec.substr(prefix.size()));
        if (!(length > 0.0)) throw UsageError("--baseline length must be positive");
        return length;
    } catch (const std::logic_error&) {
        throw UsageError("--baseline expects equal-length=<meters>");
    }
}

void run_segment(const SegmentArgs& a) {
    if (!(a.bias_fraction > 0.0 && a.bias_fraction <= 1.0)) throw UsageError("--bias-fraction must be in (0, 1]");
    const fs::path data_dir(a.data);
    const fs::path out = a.out.empty() ? data_dir : fs::path(a.out);
    const Dataset data = io::read_dataset(data_dir);
    fs::create_directories(out);

    SegmentationConfig cfg;
    cfg.bias_fraction = a.bias_fraction;
    cfg.affinity = a.affinity == "count" ? AffinityMode::covisibility_count : AffinityMode::unit;
    cfg.mining.min_trajectories_per_segment = a.min_trajectories;
    cfg.mining.min_boxes_per_segment = a.min_boxes;
    cfg.mining.bbox_min_pixels = a.bbox_min_pixels;
    cfg.gaec.local_moves = a.local_moves;

    std::vector<MapSegment> segments;
    std::size_t discarded = 0;
    io::json stats;
    if (!a.baseline.empty()) {
        const double length = parse_baseline(a.baseline);
        const auto builder = build_graph(data, cfg.affinity);
        segments = baseline_equal_length(data.poses, length, builder.trajectories(), data.header.extent());
        const auto frames = data.frames();
        stats = io::stats_json(compute_stats(segments, frames, data.header.extent()));
        stats["baseline_equal_length"] = length;
    } else {
        const auto result = segment_dataset(data, cfg);
        segments = result.mining.segments;
        discarded = result.mining.discarded.size();
        stats = io::stats_json(result.stats);
        stats["bias"] = io::bias_json(result.bias);
        stats["objective"] = result.solve.objective;
        stats["component_count"] = result.solve.component_count;
        stats["contractions"] = result.solve.contraction_log.size();
        if (auto truth = io::read_truth(data_dir)) stats["planted_ari"] = planted_ari(segments, *truth);
        io::write_json(out / "graph.json", io::graph_json(result.graph));
    }
    io::write_json(out / "segments.json", io::segments_json(segments, discarded));
    io::write_json(out / "stats.json", stats);
    io::write_annotations(out / "annotations.jsonl", export_obb_annotations(segments, cfg.mining.bbox_min_pixels));
    std::cout << out.string() << ": " << segments.size() << " segments, R_i=" << stats["R_i"].get<double>()
              << ", R_p=" << stats["R_p"].get<double>() << '\n';
}

void run_eval(const EvalArgs& a) {
    EvalConfig cfg;
    if (a.method == "bow") cfg.method = EvalMethod::bow;
    else if (a.method == "class-index") cfg.method = EvalMethod::class_index;
    else if (a.method == "oracle") cfg.method = EvalMethod::oracle;
    else throw UsageError("--method must be bow, class-index or oracle");

    const fs::path map_dir(a.map);
    const Dataset map = io::read_dataset(map_dir);
    const Dataset query = io::read_dataset(a.query);
    const auto segments = io::read_segments(a.segments.empty() ? map_dir / "segments.json" : fs::path(a.segments));

    cfg.mcl.map_length = map.header.map_length;
    cfg.mcl.distance_norm = a.d_norm;
    cfg.mcl.nms_radius = a.nms_radius;
    cfg.mcl.correct_radius = a.correct_radius;
    cfg.mcl.start_spacing = a.start_spacing;
    cfg.codebook_seed = a.seed;
    cfg.codebook_words = a.words;
    try {
        cfg.mcl.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const auto result = evaluate_localization(map, segments, query, cfg);
    const fs::path out = a.out.empty() ? fs::path(".") : fs::path(a.out);
    fs::create_directories(out);
    io::write_json(out / "topx.json", io::topx_json(result.table));
    io::write_json(out / "eval.json", io::eval_report_json(result, cfg.method, a.hypotheses_per_run));

    std::cout << io::method_name(cfg.method) << ": " << result.runs.size() << " runs, C=" << result.class_count
              << " (" << result.token_bits << "-bit tokens), Top-X";
    for (std::size_t i = 0; i < result.table.levels.size(); ++i)
        std::cout << ' ' << result.table.levels[i] << ':' << result.table.accuracy[i];
    std::cout << '\n';
}

void run_metrics(const MetricsArgs& a) {
    if (!(a.cell > 0.0)) throw UsageError("--cell must be positive");
    const auto seg_a = io::read_segments(a.segments_a);
    const auto seg_b = io::read_segments(a.segments_b);
    const auto poses_a = io::read_poses(a.poses_a);
    const auto poses_b = io::read_poses(a.poses_b);
    const auto summary = jaccard_cross_season(seg_a, poses_a, seg_b, poses_b, a.cell);
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    io::write_json(out, io::jaccard_json(summary));
    std::cout << "zero ratio " << summary.zero_ratio << ", non-zero median " << summary.nonzero_median << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mine minimal map segments and evaluate them for place recognition"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multi-season dataset");
    synth_cmd->add_option("--spec", synth.spec, "World spec JSON (defaults apply to missing keys)");
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();
    synth_cmd->add_option("--seed", synth.seed, "Override the spec seed");

    SegmentArgs seg;
    auto* seg_cmd = app.add_subcommand("segment", "Build the graph, partition it and mine segments");
    seg_cmd->add_option("--data", seg.data, "Dataset directory")->required();
    seg_cmd->add_option("--out", seg.out, "Output directory (default: the dataset directory)");
    seg_cmd->add_option("--bias-fraction", seg.bias_fraction, "Bias rank fraction q")->capture_default_str();
    seg_cmd->add_option("--min-trajectories", seg.min_trajectories, "Minimum trajectories per segment")
        ->capture_default_str();
    seg_cmd->add_option("--min-boxes", seg.min_boxes, "Minimum boxes per segment")->capture_default_str();
    seg_cmd->add_option("--bbox-min-pixels", seg.bbox_min_pixels, "Annotation size filter")->capture_default_str();
    seg_cmd->add_option("--affinity", seg.affinity, "Edge affinity")
        ->check(CLI::IsMember({"unit", "count"}))
        ->capture_default_str();
    seg_cmd->add_option("--baseline", seg.baseline, "equal-length=<meters> replaces mining by tiling");
    seg_cmd->add_flag("--local-moves", seg.local_moves, "Refine GAEC with single-vertex moves");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Multi-start MCL evaluation with Top-X accuracy");
    eval_cmd->add_option("--map", ev.map, "Map dataset directory")->required();
    eval_cmd->add_option("--query", ev.query, "Query dataset directory")->required();
    eval_cmd->add_option("--segments", ev.segments, "Map segments (default: <map>/segments.json)");
    eval_cmd->add_option("--out", ev.out, "Output directory");
    eval_cmd->add_option("--method", ev.method, "bow | class-index | oracle")->capture_default_str();
    eval_cmd->add_option("--nms-radius", ev.nms_radius)->capture_default_str();
    eval_cmd->add_option("--correct-radius", ev.correct_radius)->capture_default_str();
    eval_cmd->add_option("--d-norm", ev.d_norm, "Particle spacing D_o")->capture_default_str();
    eval_cmd->add_option("--start-spacing", ev.start_spacing)->capture_default_str();
    eval_cmd->add_option("--seed", ev.seed, "Codebook seed")->capture_default_str();
    eval_cmd->add_option("--words", ev.words, "Codebook size")->capture_default_str();

    MetricsArgs mt;
    auto* metrics_cmd = app.add_subcommand("metrics", "Cross-season Jaccard similarity of segments");
    metrics_cmd->add_option("--segments-a", mt.segments_a)->required();
    metrics_cmd->add_option("--poses-a", mt.poses_a)->required();
    metrics_cmd->add_option("--segments-b", mt.segments_b)->required();
    metrics_cmd->add_option("--poses-b", mt.poses_b)->required();
    metrics_cmd->add_option("--cell", mt.cell, "Grid cell size [m]")->capture_default_str();
    metrics_cmd->add_option("--out", mt.out, "Output JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*synth_cmd) run_synth(synth);
        else if (*seg_cmd) run_segment(seg);
        else if (*eval_cmd) run_eval(ev);
        else if (*metrics_cmd) run_metrics(mt);
        return kExitOk;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvariantError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}
