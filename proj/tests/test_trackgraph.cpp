#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mmseg/random.hpp"
#include "mmseg/trackgraph.hpp"

namespace mmseg {
namespace {

// Test oracle: ascending sort, index from the top; zero variance -> q * mean.
double bias_oracle(std::vector<double> w, double q) {
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    double var = 0.0;
    for (double x : w) var += (x - mean) * (x - mean);
    if (var == 0.0) return q * mean;
    std::sort(w.begin(), w.end());
    const auto n = w.size();
    std::size_t k = 1;
    while (static_cast<double>(k) < q * static_cast<double>(n) - 1e-9) ++k;
    return w[n - k];
}

GraphBuilder builder(AffinityMode mode = AffinityMode::unit) {
    return GraphBuilder({ImageExtent{640, 480}, mode, 0.2});
}

TEST(Membership, InclusiveBoundaries) {
    const BoxRect unit{0, 0, 1, 1};
    EXPECT_TRUE(membership_test(0, 0, unit));
    EXPECT_FALSE(membership_test(2, 0, unit));
    EXPECT_TRUE(membership_test(0.5, 0.5, unit));
    EXPECT_TRUE(membership_test(1, 1, unit));
}

TEST(Ingest, PointInsideBoxCreatesUnitEdge) {
    auto b = builder();
    std::vector<TrackUpdate> u{{1, 50, 60}};
    std::vector<ObjectBox> boxes{{9, FrameId{7}, {40, 40, 100, 100}}};
    b.ingest_frame(FrameId{7}, u, boxes);
    ASSERT_EQ(b.graph().edge_count(), 1u);
    EXPECT_EQ(b.graph().edges()[0].u, trajectory_vertex(1));
    EXPECT_EQ(b.graph().edges()[0].v, box_vertex(9));
    EXPECT_DOUBLE_EQ(b.graph().edges()[0].weight, 1.0);
}

TEST(Ingest, PointLeftOfBoxCreatesNoEdge) {
    auto b = builder();
    std::vector<TrackUpdate> u{{1, 39, 60}};
    std::vector<ObjectBox> boxes{{9, FrameId{7}, {40, 40, 100, 100}}};
    b.ingest_frame(FrameId{7}, u, boxes);
    EXPECT_EQ(b.graph().edge_count(), 0u);
    EXPECT_EQ(b.graph().vertex_count(), 2u);
}

TEST(Ingest, PointOnCornerCreatesEdge) {
    auto b = builder();
    std::vector<TrackUpdate> u{{1, 40, 40}};
    std::vector<ObjectBox> boxes{{9, FrameId{7}, {40, 40, 100, 100}}};
    b.ingest_frame(FrameId{7}, u, boxes);
    EXPECT_EQ(b.graph().edge_count(), 1u);
}

TEST(Ingest, OutOfOrderFrameThrows) {
    auto b = builder();
    b.ingest_frame(FrameId{5}, {}, {});
    EXPECT_THROW(b.ingest_frame(FrameId{5}, {}, {}), DataError);
    EXPECT_THROW(b.ingest_frame(FrameId{4}, {}, {}), DataError);
}

TEST(Ingest, PointOutsideImageThrows) {
    auto b = builder();
    std::vector<TrackUpdate> u{{1, 641, 10}};
    EXPECT_THROW(b.ingest_frame(FrameId{0}, u, {}), DataError);
}

TEST(Ingest, LostTrajectoryIdIsNeverReused) {
    auto b = builder();
    std::vector<TrackUpdate> first{{1, 10, 10}};
    b.ingest_frame(FrameId{0}, first, {});
    b.ingest_frame(FrameId{1}, {}, {});
    EXPECT_THROW(b.ingest_frame(FrameId{2}, first, {}), DataError);
}

TEST(Ingest, TrajectoriesAreContiguous) {
    auto b = builder();
    for (int f = 0; f < 5; ++f) {
        std::vector<TrackUpdate> u{{1, 10.0 + f, 10}};
        b.ingest_frame(FrameId{f}, u, {});
    }
    ASSERT_EQ(b.trajectories().size(), 1u);
    EXPECT_NO_THROW(check_trajectory(b.trajectories()[0], ImageExtent{640, 480}));
    EXPECT_EQ(b.trajectories()[0].samples.size(), 5u);
}

TEST(Ingest, CountModeAccumulatesRepeatedBoxIds) {
    auto unit = builder(AffinityMode::unit);
    auto count = builder(AffinityMode::covisibility_count);
    for (int f = 0; f < 3; ++f) {
        std::vector<TrackUpdate> u{{1, 50, 50}};
        std::vector<ObjectBox> boxes{{4, FrameId{f}, {0, 0, 100, 100}}};
        unit.ingest_frame(FrameId{f}, u, boxes);
        count.ingest_frame(FrameId{f}, u, boxes);
    }
    EXPECT_DOUBLE_EQ(unit.graph().edges().at(0).weight, 1.0);
    EXPECT_DOUBLE_EQ(count.graph().edges().at(0).weight, 3.0);
}

// Random ingestion streams keep the graph bipartite and duplicate-free.
TEST(Ingest, RandomStreamsStayValid) {
    Rng rng(2);
    auto b = builder();
    std::int64_t next_id = 0, next_box = 0;
    std::vector<std::int64_t> live;
    for (int f = 0; f < 200; ++f) {
        std::vector<std::int64_t> kept;
        for (auto id : live)
            if (!rng.bernoulli(0.1)) kept.push_back(id);
        while (kept.size() < 30) kept.push_back(next_id++);
        live = kept;
        std::vector<TrackUpdate> u;
        for (auto id : live) u.push_back({id, rng.uniform(0, 640), rng.uniform(0, 480)});
        std::vector<ObjectBox> boxes;
        for (int k = 0; k < 2; ++k) {
            const double x = rng.uniform(0, 500), y = rng.uniform(0, 380);
            boxes.push_back({next_box++, FrameId{f}, {x, y, x + 100, y + 100}});
        }
        b.ingest_frame(FrameId{f}, u, boxes);
        ASSERT_FALSE(validate_graph(b.graph()).has_value()) << "frame " << f;
    }
    for (const auto& e : b.graph().edges()) EXPECT_DOUBLE_EQ(e.weight, 1.0);
}

TEST(Bias, RankStatistic) {
    std::vector<double> w{5, 4, 3, 3, 3, 2, 2, 1, 1, 1};
    EXPECT_DOUBLE_EQ(bias_oracle(w, 0.2), 4.0);
    EXPECT_DOUBLE_EQ(compute_bias(w, 0.2), 4.0);
}

TEST(Bias, DegenerateFallback) {
    std::vector<double> w{1, 1, 1, 1};
    EXPECT_DOUBLE_EQ(bias_oracle(w, 0.2), 0.2);
    EXPECT_DOUBLE_EQ(compute_bias(w, 0.2), 0.2);
}

TEST(Bias, SingleElement) {
    std::vector<double> w{7};
    EXPECT_DOUBLE_EQ(compute_bias(w, 1.0), 7.0);
}

TEST(Bias, RejectsEmptyAndBadFraction) {
    std::vector<double> none;
    EXPECT_THROW(compute_bias(none, 0.2), std::invalid_argument);
    std::vector<double> w{1, 2};
    EXPECT_THROW(compute_bias(w, 0.0), std::invalid_argument);
    EXPECT_THROW(compute_bias(w, 1.5), std::invalid_argument);
}

TEST(Bias, MatchesOracleAndIsPermutationInvariant) {
    Rng rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        const auto n = 1 + rng.below(60);
        std::vector<double> w(n);
        for (double& x : w) x = static_cast<double>(1 + rng.below(6));
        const double q = 0.05 + 0.95 * rng.uniform();
        const double c = compute_bias(w, q);
        EXPECT_DOUBLE_EQ(c, bias_oracle(w, q));
        for (std::size_t i = n; i > 1; --i) std::swap(w[i - 1], w[rng.below(i)]);
        EXPECT_DOUBLE_EQ(compute_bias(w, q), c);
    }
}

TEST(ApplyBias, Subtracts) {
    TrajectoryGraph g;
    g.add_trajectory_vertex(0);
    for (int b = 0; b < 3; ++b) {
        g.add_box_vertex(box_vertex(b));
        g.add_edge(0, box_vertex(b), 1.0);
    }
    auto biased = apply_bias(g, 0.2);
    for (const auto& e : biased.edges()) EXPECT_DOUBLE_EQ(e.weight, 0.8);
    EXPECT_EQ(biased.trajectory_vertices(), g.trajectory_vertices());
    EXPECT_EQ(biased.box_vertices(), g.box_vertices());
    auto same = apply_bias(g, 0.0);
    for (std::size_t i = 0; i < g.edge_count(); ++i) EXPECT_EQ(same.edges()[i].weight, g.edges()[i].weight);
}

TEST(ApplyBias, RankBiasShiftsWeights) {
    TrajectoryGraph g;
    const std::vector<double> w{5, 4, 3, 3, 3, 2, 2, 1, 1, 1};
    g.add_trajectory_vertex(0);
    for (std::size_t b = 0; b < w.size(); ++b) {
        g.add_box_vertex(box_vertex(static_cast<std::int64_t>(b)));
        g.add_edge(0, box_vertex(static_cast<std::int64_t>(b)), w[b]);
    }
    auto biased = apply_bias(g, compute_bias(w, 0.2));
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_DOUBLE_EQ(biased.edges()[i].weight, w[i] - 4.0);
}

TEST(ApplyBias, InverseRestoresWeights) {
    Rng rng(4);
    TrajectoryGraph g;
    g.add_trajectory_vertex(0);
    std::vector<double> w;
    for (int b = 0; b < 50; ++b) {
        g.add_box_vertex(box_vertex(b));
        w.push_back(static_cast<double>(1 + rng.below(9)));
        g.add_edge(0, box_vertex(b), w.back());
    }
    for (double q : {0.05, 0.1, 0.2, 0.4, 0.8}) {
        const double c = compute_bias(w, q);
        auto back = apply_bias(apply_bias(g, c), -c);
        for (std::size_t i = 0; i < w.size(); ++i) EXPECT_DOUBLE_EQ(back.edges()[i].weight, w[i]);
    }
    std::vector<double> ones(10, 1.0);
    TrajectoryGraph u;
    u.add_trajectory_vertex(0);
    u.add_box_vertex(box_vertex(0));
    u.add_edge(0, box_vertex(0), 1.0);
    for (double q : {0.05, 0.1, 0.2, 0.4, 0.8}) {
        const double c = compute_bias(ones, q);
        EXPECT_DOUBLE_EQ(apply_bias(apply_bias(u, c), -c).edges()[0].weight, 1.0);
    }
}

TEST(BiasReport, SummarisesWeights) {
    TrajectoryGraph g;
    g.add_trajectory_vertex(0);
    for (int b = 0; b < 4; ++b) {
        g.add_box_vertex(box_vertex(b));
        g.add_edge(0, box_vertex(b), 1.0);
    }
    auto r = bias_report(g, 0.2);
    EXPECT_TRUE(r.degenerate);
    EXPECT_DOUBLE_EQ(r.c_o, 0.2);
    EXPECT_EQ(r.edge_count, 4u);
    EXPECT_DOUBLE_EQ(r.weights.median, 1.0);
}

}  // namespace
}  // namespace mmseg
