#include <gtest/gtest.h>

#include "mmseg/core.hpp"
#include "mmseg/multicut.hpp"
#include "mmseg/random.hpp"

namespace mmseg {
namespace {

TrajectoryGraph bipartite_path() {
    // t0 - b0 - t1
    TrajectoryGraph g;
    g.add_trajectory_vertex(trajectory_vertex(0));
    g.add_trajectory_vertex(trajectory_vertex(1));
    g.add_box_vertex(box_vertex(0));
    g.add_edge(trajectory_vertex(0), box_vertex(0), 1.0);
    g.add_edge(box_vertex(0), trajectory_vertex(1), 1.0);
    return g;
}

TEST(ValidateGraph, SingleVertexNoEdgesIsOk) {
    TrajectoryGraph g;
    g.add_trajectory_vertex(3);
    EXPECT_FALSE(validate_graph(g).has_value());
}

TEST(ValidateGraph, TrajectoryToTrajectoryEdgeIsNonBipartite) {
    TrajectoryGraph g;
    g.add_trajectory_vertex(0);
    g.add_trajectory_vertex(1);
    g.add_edge(0, 1, 1.0);
    auto v = validate_graph(g);
    ASSERT_TRUE(v.has_value());
    EXPECT_EQ(v->message, "non-bipartite edge");
}

TEST(ValidateGraph, DuplicateEdgeIsReported) {
    auto g = bipartite_path();
    g.add_edge(box_vertex(0), trajectory_vertex(0), 2.0);
    auto v = validate_graph(g);
    ASSERT_TRUE(v.has_value());
    EXPECT_EQ(v->message, "duplicate edge");
}

TEST(ValidateGraph, NonFiniteWeightIsReported) {
    auto g = bipartite_path();
    g.mutable_edges()[1].weight = std::numeric_limits<double>::quiet_NaN();
    auto v = validate_graph(g);
    ASSERT_TRUE(v.has_value());
    EXPECT_EQ(v->message, "non-finite weight");
}

TEST(ValidateGraph, WellFormedBipartiteGraphIsOk) { EXPECT_FALSE(validate_graph(bipartite_path()).has_value()); }

TEST(VertexIds, TrajectoryAndBoxRangesAreDisjoint) {
    EXPECT_FALSE(is_box_vertex(trajectory_vertex(123456789)));
    EXPECT_TRUE(is_box_vertex(box_vertex(0)));
    EXPECT_EQ(box_id_of(box_vertex(42)), 42);
}

TEST(PartitionToMulticut, SingleLabelCutsNothing) {
    auto g = bipartite_path();
    Partition p;
    for (VertexId v : g.vertices()) p.labels[v] = 0;
    auto y = partition_to_multicut(g, p);
    EXPECT_EQ(y.cut_count(), 0u);
}

TEST(PartitionToMulticut, DistinctLabelsCutEverything) {
    auto g = bipartite_path();
    Partition p;
    SegmentId next = 0;
    for (VertexId v : g.vertices()) p.labels[v] = next++;
    auto y = partition_to_multicut(g, p);
    EXPECT_EQ(y.cut_count(), g.edge_count());
}

TEST(PartitionToMulticut, PathCutsOnlyTheLabelBoundary) {
    // a - b - c with {a, b}: 0 and {c}: 1.
    auto g = bipartite_path();
    Partition p;
    p.labels[trajectory_vertex(0)] = 0;
    p.labels[box_vertex(0)] = 0;
    p.labels[trajectory_vertex(1)] = 1;
    auto y = partition_to_multicut(g, p);
    EXPECT_EQ(y.cut, (std::vector<std::uint8_t>{0, 1}));
}

TEST(PartitionToMulticut, UnlabeledVertexThrows) {
    auto g = bipartite_path();
    Partition p;
    p.labels[trajectory_vertex(0)] = 0;
    EXPECT_THROW(partition_to_multicut(g, p), DataError);
}

// Random labelings of random graphs: the induced cut is always feasible and
// its components refine the labeling.
TEST(PartitionToMulticut, RandomLabelingsGiveFeasibleCutsThatRefineLabels) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        TrajectoryGraph g;
        const int n = 2 + static_cast<int>(rng.below(20));
        for (int v = 0; v < n; ++v) g.add_trajectory_vertex(v);
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (rng.bernoulli(0.25)) g.add_edge(u, v, rng.uniform(-1, 1));
        Partition p;
        for (int v = 0; v < n; ++v) p.labels[v] = static_cast<SegmentId>(rng.below(4));
        auto y = partition_to_multicut(g, p);
        ASSERT_TRUE(is_feasible(g, y));
        auto comps = components_of(g, y);
        // Vertices in one component share a label.
        std::map<SegmentId, SegmentId> comp_label;
        for (const auto& [v, c] : comps.labels) {
            auto [it, inserted] = comp_label.emplace(c, p.labels[v]);
            EXPECT_EQ(it->second, p.labels[v]);
        }
    }
}

TEST(PoseLog, RejectsDecreasingTravel) {
    std::vector<PoseRecord> r{{FrameId{0}, 1.0, 0, 0}, {FrameId{1}, 0.5, 0, 0}};
    EXPECT_THROW(PoseLog{r}, DataError);
}

TEST(PoseLog, LooksUpFrames) {
    PoseLog log({{FrameId{2}, 0.0, 1, 2}, {FrameId{5}, 3.0, 4, 5}});
    EXPECT_DOUBLE_EQ(log.at(FrameId{5}).s, 3.0);
    EXPECT_EQ(log.find(FrameId{3}), nullptr);
    EXPECT_THROW(log.at(FrameId{3}), DataError);
}

TEST(Trajectory, ChecksContiguityAndExtent) {
    const ImageExtent extent{100, 100};
    PointTrajectory ok{1, {{FrameId{3}, 1, 1}, {FrameId{4}, 2, 2}}};
    EXPECT_NO_THROW(check_trajectory(ok, extent));
    PointTrajectory gap{2, {{FrameId{3}, 1, 1}, {FrameId{5}, 2, 2}}};
    EXPECT_THROW(check_trajectory(gap, extent), DataError);
    PointTrajectory outside{3, {{FrameId{3}, 101, 1}}};
    EXPECT_THROW(check_trajectory(outside, extent), DataError);
}

}  // namespace
}  // namespace mmseg
