#pragma once

#include <map>
#include <string>
#include <vector>

#include "mmseg/core.hpp"
#include "mmseg/placeclass.hpp"
#include "mmseg/trackgraph.hpp"

namespace mmseg {

struct DatasetHeader {
    int image_width = 0;
    int image_height = 0;
    std::int64_t frame_count = 0;
    double map_length = 0.0;
    std::string season;

    ImageExtent extent() const {
        return {static_cast<double>(image_width), static_cast<double>(image_height)};
    }
    void validate() const {
        if (image_width <= 0 || image_height <= 0) throw DataError("header: image size must be positive");
        if (frame_count < 0) throw DataError("header: negative frame count");
        if (!(map_length > 0.0)) throw DataError("header: map length must be positive");
    }
};

struct FrameTracks {
    FrameId frame;
    std::vector<TrackUpdate> updates;
};

/// One season's view-sequence map: track samples grouped by frame, boxes,
/// poses and per-frame descriptors.
struct Dataset {
    DatasetHeader header;
    std::vector<FrameTracks> tracks;  // ascending frame
    std::vector<ObjectBox> boxes;     // ascending frame
    PoseLog poses;
    std::map<FrameId, std::vector<Descriptor>> descriptors;

    std::vector<FrameId> frames() const {
        std::vector<FrameId> out;
        out.reserve(poses.size());
        for (const auto& p : poses.records()) out.push_back(p.frame);
        return out;
    }
};

}  // namespace mmseg
