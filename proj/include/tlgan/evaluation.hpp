#pragma once

#include "tlgan/types.hpp"

#include <vector>

namespace tlgan {

struct MatchParams {
    double iou_threshold = 0.5;
};

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double hmean = 0.0;
    long matched = 0;
    long num_detections = 0;
    long num_ground_truth = 0;
};

/// Intersection over union of the boxes' axis-aligned bounding
/// rectangles. Zero-area inputs score 0. Exactly symmetric.
double iou(const QuadBox& a, const QuadBox& b);

/// Corpus-level detection scoring: per image, detections and ground truth
/// are matched one-to-one greedily in (IoU desc, det index, gt index)
/// order, a pair counting when IoU >= threshold; precision/recall are
/// micro-averaged over the corpus. An entirely empty corpus scores 1.0 by
/// convention (logged).
EvalReport evaluate(const std::vector<std::vector<QuadBox>>& detections,
                    const std::vector<std::vector<QuadBox>>& ground_truth,
                    const MatchParams& params = {});

/// Matched pairs for one image under the same greedy policy; exposed for
/// the assignment-oracle cross-check.
long match_count(const std::vector<QuadBox>& detections, const std::vector<QuadBox>& ground_truth,
                 const MatchParams& params = {});

}  // namespace tlgan
