#pragma once

// Topometric Monte Carlo localization along the map's travel-distance axis.
// Particles move with a drift-free motion model and accumulate normalized
// classifier evidence; there is no resampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmseg/core.hpp"
#include "mmseg/segment_miner.hpp"

namespace mmseg {

struct Particle {
    double s = 0.0;  // travel distance [m]
    double L = 0.0;  // accumulated likelihood
};

struct MclConfig {
    double map_length = 100.0;     // D
    double distance_norm = 1.0;    // D_o
    double correct_radius = 10.0;
    double nms_radius = 10.0;
    double start_spacing = 100.0;
    std::vector<int> top_x = {10, 20, 50, 100, 200};

    std::size_t particle_count() const {
        return static_cast<std::size_t>(std::floor(map_length / distance_norm + 1e-9));
    }
    std::size_t start_count() const {
        return static_cast<std::size_t>(std::floor(map_length / start_spacing + 1e-9));
    }
    void validate() const {
        if (!(map_length > 0.0) || !(distance_norm > 0.0) || !(correct_radius > 0.0) ||
            !(nms_radius > 0.0) || !(start_spacing > 0.0) || top_x.empty())
            throw std::invalid_argument("MCL configuration values must be positive");
        for (int x : top_x)
            if (x <= 0) throw std::invalid_argument("Top-X levels must be positive");
        if (particle_count() == 0) throw std::invalid_argument("map shorter than D_o");
    }
};

/// Particles sorted by s; all share the same map length bound.
class ParticleSet {
public:
    ParticleSet(std::vector<Particle> particles, double map_length)
        : particles_(std::move(particles)), map_length_(map_length) {}

    const std::vector<Particle>& particles() const { return particles_; }
    std::vector<Particle>& particles() { return particles_; }
    double map_length() const { return map_length_; }
    std::size_t size() const { return particles_.size(); }

private:
    std::vector<Particle> particles_;
    double map_length_;
};

/// N = floor(D / D_o) particles at s = (i + 0.5) D / N with zero likelihood.
inline ParticleSet init_particles(const MclConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.particle_count();
    const double spacing = cfg.map_length / static_cast<double>(n);
    std::vector<Particle> ps(n);
    for (std::size_t i = 0; i < n; ++i) ps[i] = {(static_cast<double>(i) + 0.5) * spacing, 0.0};
    return ParticleSet(std::move(ps), cfg.map_length);
}

/// Shifts every particle by exactly `ds`, clamped to the map end. Clamping
/// preserves the sort order.
inline void motion_update(ParticleSet& set, double ds) {
    if (ds < 0.0) throw std::invalid_argument("motion update needs ds >= 0");
    for (auto& p : set.particles()) p.s = std::min(p.s + ds, set.map_length());
}

struct TravelInterval {
    double lo = 0.0;
    double hi = 0.0;
};

using SpanMap = std::map<std::int64_t, std::vector<TravelInterval>>;

/// Merges travel-distance samples into intervals. Samples closer than
/// `max_gap` join one interval; each interval is widened by `pad` both ways.
inline std::vector<TravelInterval> spans_from_samples(std::vector<double> samples, double max_gap,
                                                      double pad) {
    std::vector<TravelInterval> out;
    if (samples.empty()) return out;
    std::sort(samples.begin(), samples.end());
    double lo = samples.front(), hi = samples.front();
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i] - hi > max_gap) {
            out.push_back({lo - pad, hi + pad});
            lo = samples[i];
        }
        hi = samples[i];
    }
    out.push_back({lo - pad, hi + pad});
    return out;
}

struct PerceptionOutcome {
    bool applied = false;
    double delta_sum = 0.0;  // sum of applied increments (1 when applied)
};

/// Spreads each class's raw score uniformly over the particles inside its
/// spans, normalizes the increments to sum to one and adds them to L. Skipped
/// when no particle receives a positive increment.
inline PerceptionOutcome perception_update(ParticleSet& set,
                                           const std::map<std::int64_t, double>& raw_scores,
                                           const SpanMap& spans) {
    auto& ps = set.particles();
    std::vector<double> delta(ps.size(), 0.0);
    auto by_s = [](const Particle& p, double s) { return p.s < s; };
    auto s_by = [](double s, const Particle& p) { return s < p.s; };

    for (const auto& [cls, score] : raw_scores) {
        if (score < 0.0 || !std::isfinite(score))
            throw std::invalid_argument("raw score for class " + std::to_string(cls) +
                                        " must be finite and non-negative");
        if (score == 0.0) continue;
        auto it = spans.find(cls);
        if (it == spans.end()) continue;
        std::vector<std::pair<std::size_t, std::size_t>> ranges;
        std::size_t members = 0;
        for (const auto& iv : it->second) {
            const auto first = static_cast<std::size_t>(
                std::lower_bound(ps.begin(), ps.end(), iv.lo, by_s) - ps.begin());
            const auto last = static_cast<std::size_t>(
                std::upper_bound(ps.begin(), ps.end(), iv.hi, s_by) - ps.begin());
            if (first < last) {
                ranges.push_back({first, last});
                members += last - first;
            }
        }
        if (members == 0) continue;
        const double share = score / static_cast<double>(members);
        for (auto [first, last] : ranges)
            for (std::size_t i = first; i < last; ++i) delta[i] += share;
    }

    double total = 0.0;
    for (double d : delta) total += d;
    PerceptionOutcome out;
    if (!(total > 0.0)) return out;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double d = delta[i] / total;
        ps[i].L += d;
        out.delta_sum += d;
    }
    out.applied = true;
    return out;
}

struct Hypothesis {
    double s = 0.0;
    double L = 0.0;
};

using RankedHypotheses = std::vector<Hypothesis>;

/// Sort by L descending (ties: smaller s), then greedily drop any hypothesis
/// closer than `radius` to an already kept one.
inline RankedHypotheses rank_and_nms(const ParticleSet& set, double radius) {
    RankedHypotheses sorted;
    sorted.reserve(set.size());
    for (const auto& p : set.particles()) sorted.push_back({p.s, p.L});
    std::stable_sort(sorted.begin(), sorted.end(), [](const Hypothesis& a, const Hypothesis& b) {
        if (a.L != b.L) return a.L > b.L;
        return a.s < b.s;
    });
    RankedHypotheses kept;
    for (const auto& h : sorted) {
        const bool clear = std::all_of(kept.begin(), kept.end(), [&](const Hypothesis& k) {
            return std::abs(h.s - k.s) >= radius;
        });
        if (clear) kept.push_back(h);
    }
    return kept;
}

struct RunOutcome {
    double start = 0.0;
    double truth = 0.0;  // ground-truth travel distance at the goal
    RankedHypotheses hypotheses;
    std::size_t updates_applied = 0;
    std::size_t updates_skipped = 0;
    double max_delta_error = 0.0;  // max |sum(dL) - 1| over applied updates
};

struct TopXTable {
    std::vector<int> levels;
    std::vector<std::size_t> correct;
    std::vector<double> accuracy;  // percent
    std::size_t runs = 0;
};

/// A run is correct at level X when one of its first X hypotheses is nearer
/// than the correct radius to the truth.
inline TopXTable evaluate_topx(std::span<const RunOutcome> runs, const MclConfig& cfg) {
    TopXTable t;
    t.levels = cfg.top_x;
    t.runs = runs.size();
    for (int x : cfg.top_x) {
        std::size_t ok = 0;
        for (const auto& r : runs) {
            const std::size_t limit = std::min<std::size_t>(static_cast<std::size_t>(x), r.hypotheses.size());
            for (std::size_t i = 0; i < limit; ++i) {
                if (std::abs(r.hypotheses[i].s - r.truth) < cfg.correct_radius) {
                    ++ok;
                    break;
                }
            }
        }
        t.correct.push_back(ok);
        t.accuracy.push_back(runs.empty() ? 0.0 : 100.0 * static_cast<double>(ok) / static_cast<double>(runs.size()));
    }
    return t;
}

/// One query observation: its travel distance and classifier raw scores.
struct QueryStep {
    double s = 0.0;
    std::map<std::int64_t, double> scores;
};

/// Localizes from the first step with s >= start to the last step (the goal).
inline RunOutcome run_localization(const MclConfig& cfg, std::span<const QueryStep> steps,
                                   const SpanMap& spans, double start) {
    RunOutcome out;
    out.start = start;
    auto set = init_particles(cfg);
    const QueryStep* previous = nullptr;
    for (const auto& step : steps) {
        if (step.s < start) continue;
        if (previous != nullptr) motion_update(set, std::max(0.0, step.s - previous->s));
        const auto r = perception_update(set, step.scores, spans);
        if (r.applied) {
            ++out.updates_applied;
            out.max_delta_error = std::max(out.max_delta_error, std::abs(r.delta_sum - 1.0));
        } else {
            ++out.updates_skipped;
        }
        previous = &step;
    }
    if (previous != nullptr) out.truth = previous->s;
    out.hypotheses = rank_and_nms(set, cfg.nms_radius);
    return out;
}

/// Runs starting at k * start_spacing for k = 0 .. floor(D / spacing) - 1.
inline std::vector<double> start_locations(const MclConfig& cfg) {
    std::vector<double> starts;
    for (std::size_t k = 0; k < cfg.start_count(); ++k)
        starts.push_back(static_cast<double>(k) * cfg.start_spacing);
    return starts;
}

struct OverlapThresholds {
    double min_map_overlap = 0.8;
    double min_segment_overlap = 0.10;
};

struct RunCells {
    double start = 0.0;
    std::set<GridCell> cells;
};

/// Keeps runs whose cells overlap the mapped cells by at least 80% and the
/// mined-segment cells by at least 10% (defaults).
inline std::vector<double> filter_test_sequences(std::span<const RunCells> runs,
                                                 const std::set<GridCell>& map_cells,
                                                 const std::set<GridCell>& segment_cells,
                                                 const OverlapThresholds& th = {}) {
    std::vector<double> kept;
    for (const auto& r : runs) {
        if (r.cells.empty()) continue;
        std::size_t in_map = 0, in_seg = 0;
        for (const auto& c : r.cells) {
            in_map += map_cells.count(c);
            in_seg += segment_cells.count(c);
        }
        const double n = static_cast<double>(r.cells.size());
        if (in_map / n < th.min_map_overlap) continue;
        if (in_seg / n < th.min_segment_overlap) continue;
        kept.push_back(r.start);
    }
    return kept;
}

}  // namespace mmseg
