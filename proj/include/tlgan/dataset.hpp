#pragma once

#include "tlgan/image.hpp"
#include "tlgan/imaging.hpp"
#include "tlgan/types.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlgan {

namespace nn {
struct TrainingCrop;
}

/// One ground-truth word: its quadrilateral and the (unused but
/// round-tripped) transcript.
struct AnnotationRecord {
    QuadBox quad;
    std::string transcript;

    bool operator==(const AnnotationRecord&) const = default;
};

/// Parse SROIE-style annotation text: one record per line,
/// "x1,y1,x2,y2,x3,y3,x4,y4,transcript". The first eight comma-separated
/// fields are coordinates; everything after the eighth comma (which may
/// itself contain commas) is the transcript. Blank lines are skipped and
/// CRLF endings tolerated. Corner order is normalized to clockwise.
std::vector<AnnotationRecord> parse_annotation(const std::string& text);

/// Inverse of parse_annotation; integer coordinates serialize without a
/// decimal point, so integer records round-trip byte-exactly.
std::string serialize_annotations(const std::vector<AnnotationRecord>& records);

struct DocumentSample {
    std::filesystem::path image_path;
    std::filesystem::path annotation_path;
    std::string split = "train";
    std::vector<AnnotationRecord> annotations;
    std::string stem;
};

/// Load a dataset directory. Three layouts are recognized:
///   1. manifest.json: {"train": [stems...], "test": [stems...]} with
///      files under images/ and annotations/;
///   2. images/ + annotations/ directories matched by stem (all "train");
///   3. SROIE-native: annotation .txt next to each image in one flat dir.
std::vector<DocumentSample> load_dataset(const std::filesystem::path& root);

struct SyntheticDocSpec {
    int width = 256;
    int height = 352;
    int num_lines = 12;
    int min_word_height = 9;
    int max_word_height = 13;
    int min_word_width = 24;
    int max_word_width = 64;
    int min_gap = 10;   // inter-word, and between line bands
    int max_gap = 18;
    int min_ink = 20;   // stroke intensities (dark on light)
    int max_ink = 90;
    int background = 235;
    double noise_sigma = 5.0;
    int margin = 12;
    std::uint64_t seed = 0;
};

struct SynthDoc {
    RasterImage image;
    std::vector<QuadBox> boxes;
};

/// Deterministic synthetic document: noisy light page with glyph-like
/// dark strokes (vertical bars and arcs) inside non-overlapping word
/// boxes. Returns the exact ground-truth boxes.
SynthDoc synth_document(const SyntheticDocSpec& spec);

/// First n entries of a seed-shuffled copy of the pool. Subsets nest:
/// subset_sample(pool, n, s) is a prefix of subset_sample(pool, n+1, s).
template <class T>
std::vector<T> subset_sample(const std::vector<T>& pool, int n, std::uint64_t seed) {
    if (n < 1 || static_cast<std::size_t>(n) > pool.size())
        throw std::invalid_argument("subset_sample: n out of range");
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::uint64_t state = seed * 6364136223846793005ull + 1442695040888963407ull;
    auto next = [&state] {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        return state * 2685821657736338717ull;
    };
    for (std::size_t i = idx.size() - 1; i > 0; --i)
        std::swap(idx[i], idx[next() % (i + 1)]);
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(pool[idx[static_cast<std::size_t>(i)]]);
    return out;
}

struct PairParams {
    PreprocessParams preprocess;
    double map_scale = 0.25;  // 1 / generator stride
    double sigma_ratio = 0.25;
};

/// A preprocessed image with its rendered target map. The map is always
/// 8-bit quantized (the cache storage format), so cached and fresh pairs
/// are bit-identical.
struct TrainingPair {
    RasterImage image;
    HeatMap map;
    double scale_x = 1.0;  // original -> preprocessed coordinates
    double scale_y = 1.0;
    std::string stem;
};

/// Preprocess every sample and render its target map, consulting (and
/// filling) an on-disk cache when cache_dir is non-empty. The cache key
/// hashes the parameters, so changing them invalidates it. Unreadable
/// images are skipped with a warning.
std::vector<TrainingPair> build_training_pairs(const std::vector<DocumentSample>& samples,
                                               const PairParams& params,
                                               const std::filesystem::path& cache_dir = {});

/// Materialize the fixed augmented crop set for a run: crops_per_image
/// random crops of each pair, seeded per crop from `seed`.
std::vector<nn::TrainingCrop> build_crop_pool(const std::vector<TrainingPair>& pairs, int crop,
                                              int crops_per_image, std::uint64_t seed);

}  // namespace tlgan
