#pragma once

// Place classifiers over mined segments: TF-IDF bag of visual words with each
// segment as a document, and an inverted file over predicted segment-class
// tokens.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmseg/core.hpp"
#include "mmseg/random.hpp"

namespace mmseg {

// ---------------------------------------------------------------------------
// Training-set assembly

enum class CropVariant { whole, part };

struct TrainingSample {
    SegmentId class_id = 0;
    FrameId frame;
    BoxRect crop;
};

/// One sample per (segment, frame) whose segment box is at least
/// `bbox_min_pixels` wide and tall. `whole` crops the full image, `part` the
/// segment box.
inline std::vector<TrainingSample> assemble_training_set(std::span<const MapSegment> segments,
                                                         CropVariant variant, int bbox_min_pixels,
                                                         const ImageExtent& extent) {
    std::vector<TrainingSample> out;
    const BoxRect full{0.0, 0.0, extent.width, extent.height};
    for (const auto& seg : segments) {
        for (const auto& [frame, box] : seg.frame_boxes) {
            if (box.width() < bbox_min_pixels || box.height() < bbox_min_pixels) continue;
            out.push_back({seg.id, frame, variant == CropVariant::whole ? full : box});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Codebook

using Descriptor = std::vector<double>;

struct WordAssignment {
    int word = 0;
    double nearest = 0.0;  // distance to the assigned word
    double second = 0.0;   // distance to the runner-up
};

/// Fixed random projection to a low-dimensional space followed by
/// nearest-centroid lookup. Fully determined by (seed, dimension, words).
class Codebook {
public:
    Codebook(std::uint64_t seed, std::size_t dimension, std::size_t word_count,
             std::size_t projected_dimension = 8)
        : dimension_(dimension), words_(word_count), projected_(projected_dimension) {
        if (dimension_ == 0 || words_ < 2 || projected_ == 0)
            throw std::invalid_argument("codebook needs d > 0, W >= 2, k > 0");
        Rng rng(mix_seed(seed, 0xC0DEB00C));
        const double scale = 1.0 / std::sqrt(static_cast<double>(dimension_));
        projection_.resize(projected_ * dimension_);
        for (double& p : projection_) p = rng.normal() * scale;
        centroids_.resize(words_ * projected_);
        for (double& c : centroids_) c = rng.normal();
    }

    std::size_t dimension() const { return dimension_; }
    std::size_t word_count() const { return words_; }

    WordAssignment quantize(std::span<const double> descriptor) const {
        if (descriptor.size() != dimension_)
            throw DataError("descriptor has dimension " + std::to_string(descriptor.size()) +
                            ", codebook expects " + std::to_string(dimension_));
        std::vector<double> z(projected_, 0.0);
        for (std::size_t r = 0; r < projected_; ++r)
            for (std::size_t c = 0; c < dimension_; ++c)
                z[r] += projection_[r * dimension_ + c] * descriptor[c];

        WordAssignment a{0, std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity()};
        for (std::size_t w = 0; w < words_; ++w) {
            double d2 = 0.0;
            for (std::size_t r = 0; r < projected_; ++r) {
                const double diff = z[r] - centroids_[w * projected_ + r];
                d2 += diff * diff;
            }
            if (d2 < a.nearest) {
                a.second = a.nearest;
                a.nearest = d2;
                a.word = static_cast<int>(w);
            } else if (d2 < a.second) {
                a.second = d2;
            }
        }
        a.nearest = std::sqrt(a.nearest);
        a.second = std::sqrt(a.second);
        return a;
    }

private:
    std::size_t dimension_;
    std::size_t words_;
    std::size_t projected_;
    std::vector<double> projection_;
    std::vector<double> centroids_;
};

// ---------------------------------------------------------------------------
// TF-IDF bag of words

using WordHistogram = std::map<int, int>;

struct VisualWordDoc {
    SegmentId class_id = 0;
    WordHistogram words;
};

struct RatioTest {
    bool enabled = true;
    double threshold = 0.8;
};

/// Word histogram of a descriptor set. With the ratio test on, a descriptor
/// votes only if nearest / second-nearest distance < threshold.
inline WordHistogram quantize_all(std::span<const Descriptor> descriptors, const Codebook& codebook,
                                  const RatioTest& ratio = {}) {
    WordHistogram h;
    for (const auto& d : descriptors) {
        const auto a = codebook.quantize(d);
        if (ratio.enabled && !(a.nearest < ratio.threshold * a.second)) continue;
        ++h[a.word];
    }
    return h;
}

struct BowModel {
    std::vector<VisualWordDoc> docs;
    std::vector<int> document_frequency;  // per word
    // word -> (doc index, tf)
    std::vector<std::vector<std::pair<std::size_t, int>>> postings;

    std::size_t doc_count() const { return docs.size(); }
};

/// One document per class. Training descriptors are quantized without the
/// ratio test so every class keeps its full vocabulary.
inline BowModel build_bow(const std::map<SegmentId, std::vector<Descriptor>>& training,
                          const Codebook& codebook) {
    BowModel m;
    m.document_frequency.assign(codebook.word_count(), 0);
    m.postings.resize(codebook.word_count());
    for (const auto& [cls, descs] : training) {
        if (descs.empty())
            throw DataError("class " + std::to_string(cls) + " has no training descriptors");
        VisualWordDoc doc{cls, quantize_all(descs, codebook, RatioTest{false, 0.0})};
        const std::size_t idx = m.docs.size();
        for (const auto& [w, tf] : doc.words) {
            ++m.document_frequency[static_cast<std::size_t>(w)];
            m.postings[static_cast<std::size_t>(w)].push_back({idx, tf});
        }
        m.docs.push_back(std::move(doc));
    }
    return m;
}

/// score(class) = sum_w tf_query(w) * tf_class(w) * idf(w)^2 with
/// idf(w) = ln(C / df(w)). Every class appears in the result.
inline std::map<SegmentId, double> score_bow(const WordHistogram& query, const BowModel& model) {
    std::map<SegmentId, double> scores;
    for (const auto& doc : model.docs) scores[doc.class_id] = 0.0;
    const double c_docs = static_cast<double>(model.doc_count());
    for (const auto& [w, tf_q] : query) {
        const auto wi = static_cast<std::size_t>(w);
        if (wi >= model.document_frequency.size() || model.document_frequency[wi] == 0) continue;
        const double idf = std::log(c_docs / model.document_frequency[wi]);
        for (const auto& [doc, tf_c] : model.postings[wi])
            scores[model.docs[doc].class_id] += tf_q * tf_c * idf * idf;
    }
    return scores;
}

inline std::map<SegmentId, double> score_bow(std::span<const Descriptor> query, const BowModel& model,
                                             const Codebook& codebook, const RatioTest& ratio = {}) {
    return score_bow(quantize_all(query, codebook, ratio), model);
}

// ---------------------------------------------------------------------------
// Segment-class inverted file

/// Bits needed for a class token: ceil(log2 C).
constexpr int token_width_bits(std::size_t class_count) {
    return class_count <= 1 ? 0 : static_cast<int>(std::bit_width(class_count - 1));
}

struct PlaceTokens {
    std::int64_t place_id = 0;
    FrameId frame;
    std::vector<SegmentId> tokens;  // multiset
};

struct Posting {
    std::int64_t place_id = 0;
    FrameId frame;

    auto operator<=>(const Posting&) const = default;
};

struct SegmentClassIndex {
    std::size_t class_count = 0;
    int token_bits = 0;
    std::map<SegmentId, std::vector<Posting>> postings;  // sorted; repeats encode multiplicity
};

inline SegmentClassIndex build_class_index(std::span<const PlaceTokens> places, std::size_t class_count) {
    SegmentClassIndex index;
    index.class_count = class_count;
    index.token_bits = token_width_bits(class_count);
    for (const auto& p : places) {
        for (SegmentId t : p.tokens) {
            if (t < 0 || static_cast<std::size_t>(t) >= class_count)
                throw DataError("class token " + std::to_string(t) + " out of range for C=" +
                                std::to_string(class_count));
            index.postings[t].push_back({p.place_id, p.frame});
        }
    }
    for (auto& [t, list] : index.postings) std::sort(list.begin(), list.end());
    return index;
}

/// Multiset intersection size between the query bag and each indexed place.
/// Places sharing no token are absent from the result.
inline std::map<std::int64_t, double> score_class_index(std::span<const SegmentId> query,
                                                        const SegmentClassIndex& index) {
    std::map<SegmentId, int> q;
    for (SegmentId t : query) ++q[t];
    std::map<std::int64_t, double> scores;
    for (const auto& [token, qcount] : q) {
        auto it = index.postings.find(token);
        if (it == index.postings.end()) continue;
        std::map<std::int64_t, int> per_place;
        for (const auto& posting : it->second) ++per_place[posting.place_id];
        for (const auto& [place, count] : per_place) scores[place] += std::min(qcount, count);
    }
    return scores;
}

}  // namespace mmseg
