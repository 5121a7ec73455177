#include "tlgan/evaluation.hpp"
#include "tlgan/log.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

using namespace tlgan;

namespace {

QuadBox box(double x0, double y0, double x1, double y1) { return QuadBox::rect(x0, y0, x1, y1); }

// Exhaustive maximum one-to-one assignment: try every subset pairing via
// depth-first search over detections. Fine for <= 6 boxes per side.
long best_matching(const std::vector<QuadBox>& det, const std::vector<QuadBox>& gt,
                   double threshold) {
    std::vector<std::vector<int>> ok(det.size());
    for (std::size_t d = 0; d < det.size(); ++d)
        for (std::size_t g = 0; g < gt.size(); ++g)
            if (iou(det[d], gt[g]) >= threshold) ok[d].push_back(static_cast<int>(g));

    std::vector<char> used(gt.size(), 0);
    long best = 0;
    auto dfs = [&](auto&& self, std::size_t d, long acc) -> void {
        if (d == det.size()) {
            best = std::max(best, acc);
            return;
        }
        if (acc + static_cast<long>(det.size() - d) <= best) return;  // cannot improve
        self(self, d + 1, acc);  // leave detection d unmatched
        for (int g : ok[d])
            if (!used[g]) {
                used[g] = 1;
                self(self, d + 1, acc + 1);
                used[g] = 0;
            }
    };
    dfs(dfs, 0, 0);
    return best;
}

std::vector<QuadBox> random_boxes(std::mt19937_64& rng, int max_boxes) {
    std::uniform_int_distribution<int> count(0, max_boxes);
    std::uniform_real_distribution<double> pos(0.0, 80.0), side(4.0, 30.0);
    std::vector<QuadBox> out;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        const double x = pos(rng), y = pos(rng);
        out.push_back(box(x, y, x + side(rng), y + side(rng)));
    }
    return out;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("iou basics") {
    CHECK(iou(box(0, 0, 10, 10), box(0, 0, 10, 10)) == 1.0);
    CHECK(iou(box(0, 0, 10, 10), box(20, 20, 30, 30)) == 0.0);
    CHECK(iou(box(0, 0, 1, 1), box(0.5, 0, 1.5, 1)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(iou(box(0, 0, 0, 10), box(0, 0, 10, 10)) == 0.0);  // zero-area box
    // exactly symmetric
    QuadBox a = box(1.25, 2.5, 7.75, 9.0), b = box(3.0, 1.0, 9.5, 6.25);
    CHECK(iou(a, b) == iou(b, a));
    // non-axis-aligned quads are scored by their bounding rectangles
    QuadBox rot(Vec2(5, 0), Vec2(10, 5), Vec2(5, 10), Vec2(0, 5));
    CHECK(iou(rot, box(0, 0, 10, 10)) == 1.0);
}

TEST_CASE("evaluate hand fixtures") {
    std::vector<std::vector<QuadBox>> det{{box(0, 0, 10, 10), box(20, 0, 30, 10)}};
    std::vector<std::vector<QuadBox>> gt = det;
    EvalReport r = evaluate(det, gt);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.hmean == 1.0);
    CHECK(r.matched == 2);

    // one detection hitting one of two ground-truth boxes
    det = {{box(0, 0, 10, 10)}};
    gt = {{box(0, 0, 10, 10), box(50, 50, 60, 60)}};
    r = evaluate(det, gt);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 0.5);
    CHECK(r.hmean == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    // below-threshold overlap does not match
    det = {{box(0, 0, 10, 10)}};
    gt = {{box(8, 0, 18, 10)}};
    r = evaluate(det, gt, MatchParams{0.5});
    CHECK(r.matched == 0);
    CHECK(r.hmean == 0.0);

    CHECK_THROWS_AS(evaluate({{}, {}}, {{}}), std::invalid_argument);
    CHECK_THROWS_AS(evaluate(det, gt, MatchParams{0.0}), std::invalid_argument);
}

TEST_CASE("empty corpus scores one and logs the convention") {
    std::vector<std::string> warnings;
    set_warning_sink([&](const std::string& msg) { warnings.push_back(msg); });
    EvalReport r = evaluate({{}, {}}, {{}, {}});
    set_warning_sink(nullptr);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.hmean == 1.0);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("empty corpus") != std::string::npos);

    // no detections but ground truth present: recall collapses, not P
    EvalReport miss = evaluate({{}}, {{box(0, 0, 5, 5)}});
    CHECK(miss.precision == 1.0);
    CHECK(miss.recall == 0.0);
    CHECK(miss.hmean == 0.0);
}

TEST_CASE("permutation invariance of matching") {
    set_warning_sink([](const std::string&) {});  // empty corpora are expected here
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<QuadBox> det = random_boxes(rng, 6), gt = random_boxes(rng, 6);
        EvalReport base = evaluate({det}, {gt});
        std::shuffle(det.begin(), det.end(), rng);
        std::shuffle(gt.begin(), gt.end(), rng);
        EvalReport shuffled = evaluate({det}, {gt});
        CHECK(base.matched == shuffled.matched);
    }
    set_warning_sink(nullptr);
}

TEST_CASE("spurious detections and removed ground truth behave monotonically") {
    set_warning_sink([](const std::string&) {});
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<QuadBox> det = random_boxes(rng, 5), gt = random_boxes(rng, 5);
        EvalReport base = evaluate({det}, {gt});

        std::vector<QuadBox> more = det;
        more.push_back(box(200.0 + trial, 200.0, 210.0 + trial, 208.0));
        EvalReport spur = evaluate({more}, {gt});
        CHECK(spur.recall <= base.recall + 1e-12);
        CHECK(spur.precision <= base.precision + 1e-12);

        if (!gt.empty()) {
            std::vector<QuadBox> fewer(gt.begin() + 1, gt.end());
            EvalReport cut = evaluate({det}, {fewer});
            CHECK(cut.precision >= base.precision - 1e-12);
        }
    }
    set_warning_sink(nullptr);
}

TEST_CASE("greedy matching agrees with the exhaustive assignment oracle") {
    std::mt19937_64 rng(9);
    int agree = 0, total = 1000;
    for (int trial = 0; trial < total; ++trial) {
        std::vector<QuadBox> det = random_boxes(rng, 6), gt = random_boxes(rng, 6);
        const long greedy = match_count(det, gt);
        const long best = best_matching(det, gt, 0.5);
        CHECK(greedy <= best);
        if (greedy == best) ++agree;
    }
    // greedy is optimal on the overwhelming majority of instances
    CHECK(agree >= 990);
    MESSAGE("greedy == optimal on ", agree, " of ", total, " instances");
}

}  // TEST_SUITE
