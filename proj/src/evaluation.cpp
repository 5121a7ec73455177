#include "tlgan/evaluation.hpp"

#include "tlgan/log.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace tlgan {

double iou(const QuadBox& a, const QuadBox& b) {
    const Vec2 alo = a.min_corner(), ahi = a.max_corner();
    const Vec2 blo = b.min_corner(), bhi = b.max_corner();
    const double area_a = (ahi.x() - alo.x()) * (ahi.y() - alo.y());
    const double area_b = (bhi.x() - blo.x()) * (bhi.y() - blo.y());
    if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
    const double iw = std::min(ahi.x(), bhi.x()) - std::max(alo.x(), blo.x());
    const double ih = std::min(ahi.y(), bhi.y()) - std::max(alo.y(), blo.y());
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (area_a + area_b - inter);
}

long match_count(const std::vector<QuadBox>& detections, const std::vector<QuadBox>& ground_truth,
                 const MatchParams& params) {
    struct Pair {
        double score;
        std::size_t det, gt;
    };
    std::vector<Pair> pairs;
    for (std::size_t d = 0; d < detections.size(); ++d)
        for (std::size_t g = 0; g < ground_truth.size(); ++g) {
            const double s = iou(detections[d], ground_truth[g]);
            if (s >= params.iou_threshold) pairs.push_back({s, d, g});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return std::tie(b.score, a.det, a.gt) < std::tie(a.score, b.det, b.gt);
    });
    std::vector<char> det_used(detections.size(), 0), gt_used(ground_truth.size(), 0);
    long matched = 0;
    for (const Pair& p : pairs) {
        if (det_used[p.det] || gt_used[p.gt]) continue;
        det_used[p.det] = gt_used[p.gt] = 1;
        ++matched;
    }
    return matched;
}

EvalReport evaluate(const std::vector<std::vector<QuadBox>>& detections,
                    const std::vector<std::vector<QuadBox>>& ground_truth,
                    const MatchParams& params) {
    if (detections.size() != ground_truth.size())
        throw std::invalid_argument("evaluate: detection/ground-truth image counts differ");
    if (!(params.iou_threshold > 0.0 && params.iou_threshold <= 1.0))
        throw std::invalid_argument("evaluate: iou_threshold must be in (0,1]");

    EvalReport r;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        r.matched += match_count(detections[i], ground_truth[i], params);
        r.num_detections += static_cast<long>(detections[i].size());
        r.num_ground_truth += static_cast<long>(ground_truth[i].size());
    }

    if (r.num_detections == 0 && r.num_ground_truth == 0)
        log_warning("evaluate: empty corpus, scoring 1.0 by convention");
    r.precision = r.num_detections > 0
                      ? static_cast<double>(r.matched) / static_cast<double>(r.num_detections)
                      : 1.0;
    r.recall = r.num_ground_truth > 0
                   ? static_cast<double>(r.matched) / static_cast<double>(r.num_ground_truth)
                   : 1.0;
    r.hmean = r.precision + r.recall > 0.0
                  ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                  : 0.0;
    return r;
}

}  // namespace tlgan
