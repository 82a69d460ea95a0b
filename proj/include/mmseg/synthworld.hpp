#pragma once

// Deterministic synthetic view-sequence maps. A camera drives at constant
// speed along a gently curving planar path; landmark clusters next to the
// path project to moving image patches and emit point tracks, object boxes and
// cluster-specific descriptors. Background clutter tracks fill the frame up to
// a feature budget and are occluded by landmark patches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmseg/core.hpp"
#include "mmseg/dataset.hpp"
#include "mmseg/random.hpp"

namespace mmseg {

struct ClusterSpec {
    double anchor_s = 0.0;   // travel distance of the path point the cluster sits beside
    double lateral = 8.0;    // signed offset from the path [m], positive = left
    double radius = 3.0;     // horizontal spread of its points [m]
    double height = 5.0;     // points spread over [0.3, height] m
    int points = 40;
    std::vector<bool> present;  // per season; empty = present in all
};

struct WorldSpec {
    std::uint64_t seed = 7;
    double map_length = 1000.0;
    double frame_step = 1.0;  // travel per frame [m]
    int image_width = 640;
    int image_height = 480;
    double horizontal_fov_deg = 90.0;
    double camera_height = 1.5;
    double sensing_range = 50.0;
    double path_amplitude = 15.0;
    double path_wavelength = 500.0;

    std::vector<std::string> seasons = {"WI", "SP", "SU", "AU"};
    std::vector<ClusterSpec> clusters;

    int features_per_frame = 1500;
    double clutter_rate = 1.0;           // share of the remaining budget filled by clutter
    double box_miss_probability = 0.1;
    double cluster_track_loss = 0.01;    // per-frame probability a landmark track is lost
    double clutter_track_loss = 0.05;
    double box_padding = 3.0;            // pixels

    int descriptor_dimension = 32;
    int prototypes_per_cluster = 6;
    int clutter_descriptors_per_frame = 8;
    double observation_noise = 0.35;
    std::vector<double> season_noise = {0.6, 0.6, 0.6, 0.6};  // persistent per-season appearance shift

    void validate() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!(map_length > 0.0) || !(frame_step > 0.0) || image_width <= 0 || image_height <= 0 ||
            !(sensing_range > 0.0) || !(horizontal_fov_deg > 0.0 && horizontal_fov_deg < 180.0))
            throw std::invalid_argument("world: geometry parameters must be positive");
        if (!prob(clutter_rate) || !prob(box_miss_probability) || !prob(cluster_track_loss) ||
            !prob(clutter_track_loss))
            throw std::invalid_argument("world: rates and probabilities must lie in [0, 1]");
        if (seasons.empty() || features_per_frame < 0 || descriptor_dimension <= 0 ||
            prototypes_per_cluster <= 0 || clutter_descriptors_per_frame < 0)
            throw std::invalid_argument("world: counts must be positive");
        if (season_noise.size() != seasons.size())
            throw std::invalid_argument("world: one noise sigma per season required");
        for (const auto& c : clusters) {
            if (c.points <= 0 || !(c.radius > 0.0) || !(c.height > 0.3))
                throw std::invalid_argument("world: cluster counts must be positive");
            if (!c.present.empty() && c.present.size() != seasons.size())
                throw std::invalid_argument("world: cluster presence needs one flag per season");
        }
    }

    bool cluster_present(std::size_t cluster, std::size_t season) const {
        const auto& p = clusters[cluster].present;
        return p.empty() || p[season];
    }
};

/// Evenly spaced clusters whose visibility windows cover `coverage` of the map
/// in total. Lateral offsets alternate sides.
inline WorldSpec make_world(std::size_t cluster_count, double coverage, double map_length = 1000.0) {
    WorldSpec w;
    w.map_length = map_length;
    const double spacing = map_length / static_cast<double>(cluster_count);
    const double window = coverage * spacing;
    const double lateral = 8.0;
    const double radius = 3.0;
    // Visible from about `sensing_range` ahead until it leaves the 90 degree
    // field of view at a forward distance close to the lateral offset.
    w.sensing_range = window + lateral;
    for (std::size_t i = 0; i < cluster_count; ++i) {
        ClusterSpec c;
        const double center = (static_cast<double>(i) + 0.5) * spacing;
        c.anchor_s = center + 0.5 * window + lateral;
        c.lateral = (i % 2 == 0) ? lateral : -lateral;
        c.radius = radius;
        w.clusters.push_back(c);
    }
    return w;
}

/// The default world: 5 clusters covering 20% of a 1 km map, four seasons.
inline WorldSpec default_world() {
    WorldSpec w = make_world(5, 0.2);
    // Seasonal appearance change removes one landmark in summer.
    w.clusters[3].present = {true, true, false, true};
    return w;
}

struct GroundTruth {
    std::map<std::int64_t, int> trajectory_cluster;  // -1 = clutter
    std::map<FrameId, double> travel;
};

struct SeasonData {
    Dataset dataset;
    GroundTruth truth;
};

namespace detail {

// Planar path (u, A sin(2 pi u / lambda)) resampled by arc length.
class ArcPath {
public:
    ArcPath(double amplitude, double wavelength, double length) : a_(amplitude), k_(2.0 * std::numbers::pi / wavelength) {
        const double du = 0.05;
        double u = 0.0, s = 0.0;
        u_.push_back(0.0);
        s_.push_back(0.0);
        while (s < length) {
            const double u1 = u + du;
            const double dx = du;
            const double dy = y(u1) - y(u);
            s += std::hypot(dx, dy);
            u = u1;
            u_.push_back(u);
            s_.push_back(s);
        }
    }

    struct Pose {
        double x, y, heading;
    };

    Pose at(double s) const {
        const double u = param(s);
        return {u, y(u), std::atan(a_ * k_ * std::cos(k_ * u))};
    }

private:
    double y(double u) const { return a_ * std::sin(k_ * u); }
    double param(double s) const {
        if (s <= 0.0) return 0.0;
        auto it = std::lower_bound(s_.begin(), s_.end(), s);
        if (it == s_.end()) return u_.back();
        const auto i = static_cast<std::size_t>(it - s_.begin());
        if (i == 0) return u_.front();
        const double t = (s - s_[i - 1]) / (s_[i] - s_[i - 1]);
        return u_[i - 1] + t * (u_[i] - u_[i - 1]);
    }

    double a_, k_;
    std::vector<double> u_, s_;
};

struct WorldPoint {
    double x, y, z;
};

inline double round_to(double v, double quantum) { return std::round(v / quantum) * quantum; }

}  // namespace detail

/// Generates one season. Identical (spec, season) always yields identical
/// data.
inline SeasonData generate_season(const WorldSpec& spec, std::size_t season) {
    spec.validate();
    if (season >= spec.seasons.size()) throw std::invalid_argument("season index out of range");

    double path_length = spec.map_length + spec.sensing_range;
    for (const auto& c : spec.clusters) path_length = std::max(path_length, c.anchor_s + spec.sensing_range);
    const detail::ArcPath path(spec.path_amplitude, spec.path_wavelength, path_length + 10.0);

    // World geometry and appearance are shared by all seasons.
    std::vector<std::vector<detail::WorldPoint>> cluster_points(spec.clusters.size());
    std::vector<std::vector<Descriptor>> prototypes(spec.clusters.size());
    const auto dim = static_cast<std::size_t>(spec.descriptor_dimension);
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
        const auto& cs = spec.clusters[c];
        Rng rng(mix_seed(spec.seed, 1000 + c));
        const auto anchor = path.at(cs.anchor_s);
        const double cx = anchor.x - std::sin(anchor.heading) * cs.lateral;
        const double cy = anchor.y + std::cos(anchor.heading) * cs.lateral;
        for (int i = 0; i < cs.points; ++i) {
            const double r = cs.radius * std::sqrt(rng.uniform());
            const double a = 2.0 * std::numbers::pi * rng.uniform();
            cluster_points[c].push_back({cx + r * std::cos(a), cy + r * std::sin(a), rng.uniform(0.3, cs.height)});
        }
        Rng drng(mix_seed(spec.seed, 2000 + c));
        for (int p = 0; p < spec.prototypes_per_cluster; ++p) {
            Descriptor d(dim);
            for (double& v : d) v = drng.normal();
            prototypes[c].push_back(std::move(d));
        }
    }
    // Persistent seasonal shift of every prototype.
    std::vector<std::vector<Descriptor>> shifted = prototypes;
    {
        Rng srng(mix_seed(spec.seed, 3000 + season));
        for (auto& protos : shifted)
            for (auto& d : protos)
                for (double& v : d) v += spec.season_noise[season] * srng.normal();
    }

    Rng rng(mix_seed(spec.seed, 10 + season));
    const double width = spec.image_width;
    const double height = spec.image_height;
    const double cx = 0.5 * width, cy = 0.5 * height;
    const double focal = cx / std::tan(0.5 * spec.horizontal_fov_deg * std::numbers::pi / 180.0);

    SeasonData out;
    auto& ds = out.dataset;
    ds.header.image_width = spec.image_width;
    ds.header.image_height = spec.image_height;
    ds.header.map_length = spec.map_length;
    ds.header.season = spec.seasons[season];

    // Seasons sample the path with different phases.
    const double phase = spec.frame_step * static_cast<double>(season % 4) / 4.0;
    std::vector<PoseRecord> poses;

    struct Clutter {
        std::int64_t id;
        double u, v, du, dv;
    };
    std::vector<Clutter> clutter;
    // cluster point -> live track id
    std::vector<std::vector<std::int64_t>> point_track(spec.clusters.size());
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) point_track[c].assign(spec.clusters[c].points, -1);

    std::int64_t next_track = 0;
    std::int64_t next_box = 0;
    std::int64_t frame_index = 0;

    for (;; ++frame_index) {
        const double s = phase + spec.frame_step * static_cast<double>(frame_index);
        if (s > spec.map_length + 1e-9) break;
        const FrameId frame{frame_index};
        const auto cam = path.at(s);
        poses.push_back({frame, detail::round_to(s, 1e-3), detail::round_to(cam.x, 1e-3),
                         detail::round_to(cam.y, 1e-3)});
        out.truth.travel[frame] = s;
        const double tx = std::cos(cam.heading), ty = std::sin(cam.heading);

        FrameTracks ft{frame, {}};
        std::vector<BoxRect> regions;
        std::vector<std::size_t> region_cluster;

        for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
            auto& tracks = point_track[c];
            if (!spec.cluster_present(c, season)) continue;
            bool any = false;
            BoxRect region{};
            for (std::size_t p = 0; p < cluster_points[c].size(); ++p) {
                const auto& wp = cluster_points[c][p];
                const double dx = wp.x - cam.x, dy = wp.y - cam.y;
                const double fwd = dx * tx + dy * ty;
                const double left = -dx * ty + dy * tx;
                bool visible = fwd > 1.0 && fwd <= spec.sensing_range;
                double u = 0.0, v = 0.0;
                if (visible) {
                    u = detail::round_to(cx - focal * left / fwd, 1e-3);
                    v = detail::round_to(cy - focal * (wp.z - spec.camera_height) / fwd, 1e-3);
                    visible = u >= 0.0 && u <= width && v >= 0.0 && v <= height;
                }
                if (!visible) {
                    tracks[p] = -1;
                    continue;
                }
                if (tracks[p] < 0 || rng.bernoulli(spec.cluster_track_loss)) {
                    tracks[p] = next_track++;
                    out.truth.trajectory_cluster[tracks[p]] = static_cast<int>(c);
                }
                ft.updates.push_back({tracks[p], u, v});
                if (!any) region = BoxRect::point(u, v);
                else region.expand(u, v);
                any = true;
            }
            if (any) {
                region.x_min = std::max(0.0, region.x_min - spec.box_padding);
                region.y_min = std::max(0.0, region.y_min - spec.box_padding);
                region.x_max = std::min(width, region.x_max + spec.box_padding);
                region.y_max = std::min(height, region.y_max + spec.box_padding);
                regions.push_back(region);
                region_cluster.push_back(c);
            }
        }
        const auto landmark_features = static_cast<int>(ft.updates.size());

        auto occluded = [&](double u, double v) {
            return std::any_of(regions.begin(), regions.end(),
                               [&](const BoxRect& r) { return membership_test(u, v, r); });
        };

        // Existing clutter flows outward from the focus of expansion.
        std::vector<Clutter> survivors;
        survivors.reserve(clutter.size());
        for (auto c : clutter) {
            c.u = detail::round_to(c.u + c.du + 0.3 * rng.normal(), 1e-3);
            c.v = detail::round_to(c.v + c.dv + 0.3 * rng.normal(), 1e-3);
            c.du *= 1.03;
            c.dv *= 1.03;
            const bool lost = rng.bernoulli(spec.clutter_track_loss);
            if (lost || c.u < 0.0 || c.u > width || c.v < 0.0 || c.v > height || occluded(c.u, c.v)) continue;
            survivors.push_back(c);
        }
        clutter = std::move(survivors);

        const int budget = std::max(0, spec.features_per_frame - landmark_features);
        const auto target = static_cast<std::size_t>(std::lround(spec.clutter_rate * budget));
        if (clutter.size() > target) clutter.resize(target);
        int attempts = 0;
        while (clutter.size() < target && attempts < 20 * spec.features_per_frame + 100) {
            ++attempts;
            const double u = detail::round_to(rng.uniform(0.0, width), 1e-3);
            const double v = detail::round_to(rng.uniform(0.0, height), 1e-3);
            if (occluded(u, v)) continue;
            const std::int64_t id = next_track++;
            out.truth.trajectory_cluster[id] = -1;
            clutter.push_back({id, u, v, 0.02 * (u - cx), 0.02 * (v - cy)});
        }
        for (const auto& c : clutter) ft.updates.push_back({c.id, c.u, c.v});
        ds.tracks.push_back(std::move(ft));

        // Boxes and descriptors for each visible landmark.
        auto& frame_desc = ds.descriptors[frame];
        for (std::size_t r = 0; r < regions.size(); ++r) {
            if (!rng.bernoulli(spec.box_miss_probability) && regions[r].width() > 0.0 &&
                regions[r].height() > 0.0)
                ds.boxes.push_back({next_box++, frame, regions[r]});
            for (const auto& proto : shifted[region_cluster[r]]) {
                Descriptor d(dim);
                for (std::size_t k = 0; k < dim; ++k)
                    d[k] = detail::round_to(proto[k] + spec.observation_noise * rng.normal(), 1e-4);
                frame_desc.push_back(std::move(d));
            }
        }
        for (int k = 0; k < spec.clutter_descriptors_per_frame; ++k) {
            Descriptor d(dim);
            for (double& v : d) v = detail::round_to(rng.normal(), 1e-4);
            frame_desc.push_back(std::move(d));
        }
    }

    ds.header.frame_count = frame_index;
    ds.poses = PoseLog(std::move(poses));
    return out;
}

// ---------------------------------------------------------------------------

/// Adjusted Rand index of two labelings of the same items (contingency-table
/// form). Returns 1 when both labelings are trivially identical.
inline double adjusted_rand_index(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
    if (a.size() != b.size()) throw std::invalid_argument("ARI: labelings differ in length");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    std::map<std::pair<std::int64_t, std::int64_t>, double> table;
    std::map<std::int64_t, double> rows, cols;
    for (std::size_t i = 0; i < n; ++i) {
        table[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    auto pairs = [](double x) { return 0.5 * x * (x - 1.0); };
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [k, v] : table) index += pairs(v);
    for (const auto& [k, v] : rows) sum_rows += pairs(v);
    for (const auto& [k, v] : cols) sum_cols += pairs(v);
    const double expected = sum_rows * sum_cols / pairs(static_cast<double>(n));
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

/// ARI between the mined trajectory grouping (segment id, or one shared group
/// for everything discarded) and the planted cluster labels.
inline double planted_ari(std::span<const MapSegment> segments, const GroundTruth& truth) {
    std::unordered_map<std::int64_t, std::int64_t> mined;
    for (const auto& seg : segments)
        for (std::int64_t t : seg.trajectory_ids) mined[t] = seg.id;
    std::vector<std::int64_t> a, b;
    a.reserve(truth.trajectory_cluster.size());
    b.reserve(truth.trajectory_cluster.size());
    for (const auto& [tid, cluster] : truth.trajectory_cluster) {
        auto it = mined.find(tid);
        a.push_back(it == mined.end() ? -1 : it->second);
        b.push_back(cluster);
    }
    return adjusted_rand_index(a, b);
}

}  // namespace mmseg
