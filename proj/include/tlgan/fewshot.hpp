#pragma once

#include "tlgan/dataset.hpp"
#include "tlgan/evaluation.hpp"
#include "tlgan/imaging.hpp"
#include "tlgan/nn/convert.hpp"
#include "tlgan/training.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlgan {

/// Full-page inference: pad the preprocessed page to a stride multiple
/// with white, run the generator in inference mode, and trim the output
/// back to the page's own map size.
template <class S>
HeatMap infer_map(nn::Generator<S>& g, const RasterImage& image, nn::Workspace<S>& ws) {
    if (image.empty()) throw std::invalid_argument("infer_map: empty image");
    const int stride = g.config().stride;
    const int ph = (image.height + stride - 1) / stride * stride;
    const int pw = (image.width + stride - 1) / stride * stride;

    RasterImage page = RasterImage::u8(ph, pw, 1, 255);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            page.at8(y, x) = static_cast<std::uint8_t>(std::lround(image.luma255(y, x)));

    nn::FeatureMap<S> x = nn::images_to_input<S>({page});
    const nn::FeatureMap<S>& y = g.forward(x, ws, false);
    const float scale = 1.0f / static_cast<float>(stride);
    HeatMap full = nn::output_to_heatmap(y, 0, scale);

    const int mh = std::min<int>(full.height(),
                                 static_cast<int>(std::lround(image.height * double(scale))));
    const int mw = std::min<int>(full.width(),
                                 static_cast<int>(std::lround(image.width * double(scale))));
    if (mh == full.height() && mw == full.width()) return full;
    HeatMap trimmed = HeatMap::zeros(mh, mw, scale);
    trimmed.values = full.values.topLeftCorner(mh, mw);
    return trimmed;
}

/// A document prepared for few-shot runs: its training pair plus the
/// ground-truth boxes in original-image coordinates.
struct FewshotDoc {
    TrainingPair pair;
    std::vector<QuadBox> ground_truth;
    std::string stem;
};

inline std::vector<FewshotDoc> make_fewshot_docs(const std::vector<DocumentSample>& samples,
                                                 const PairParams& params,
                                                 const std::filesystem::path& cache_dir = {}) {
    auto pairs = build_training_pairs(samples, params, cache_dir);
    std::vector<FewshotDoc> docs;
    docs.reserve(pairs.size());
    for (auto& pair : pairs) {
        FewshotDoc doc;
        doc.stem = pair.stem;
        auto it = std::find_if(samples.begin(), samples.end(),
                               [&](const DocumentSample& s) { return s.stem == pair.stem; });
        if (it != samples.end())
            for (const auto& rec : it->annotations) doc.ground_truth.push_back(rec.quad);
        doc.pair = std::move(pair);
        docs.push_back(std::move(doc));
    }
    return docs;
}

/// Detect words on every document with the given generator and score the
/// result against the ground truth.
template <class S>
EvalReport evaluate_generator(nn::Generator<S>& g, const std::vector<FewshotDoc>& docs,
                              const PostprocessParams& post, const MatchParams& match,
                              nn::Workspace<S>& ws) {
    std::vector<std::vector<QuadBox>> detections, ground_truth;
    detections.reserve(docs.size());
    ground_truth.reserve(docs.size());
    for (const auto& doc : docs) {
        HeatMap map = infer_map(g, doc.pair.image, ws);
        detections.push_back(
            localize_from_map(map, post, {doc.pair.scale_x, doc.pair.scale_y}));
        ground_truth.push_back(doc.ground_truth);
    }
    return evaluate(detections, ground_truth, match);
}

struct FewshotRunConfig {
    std::vector<int> n_values{1, 5};
    nn::TrainRunConfig train;
    nn::GeneratorConfig gen;
    nn::DiscriminatorConfig dis;
    nn::FeatureNetConfig phi;
    nn::AdamConfig adam;
    nn::LossWeights weights;
    PostprocessParams post;
    MatchParams match;
};

struct FewshotPoint {
    int n = 0;
    std::vector<std::string> stems;  // training documents, selection order
    EvalReport report;
};

/// Train one model per requested subset size and score each against the
/// evaluation documents. Subsets come from a seed-shuffled pool, so they
/// nest across n and repeat across runs with the same seed. Results land
/// in fewshot.csv under out_dir next to the per-n training directories.
template <class S = float>
std::vector<FewshotPoint> fewshot_experiment(const std::vector<FewshotDoc>& pool,
                                             const std::vector<FewshotDoc>& eval_docs,
                                             const FewshotRunConfig& cfg,
                                             const std::filesystem::path& out_dir) {
    if (cfg.n_values.empty()) throw std::invalid_argument("fewshot: no subset sizes requested");
    for (int n : cfg.n_values)
        if (n < 1 || static_cast<std::size_t>(n) > pool.size())
            throw std::invalid_argument("fewshot: subset size " + std::to_string(n) +
                                        " outside the " + std::to_string(pool.size()) +
                                        "-document pool");
    if (out_dir.empty()) throw std::invalid_argument("fewshot: output directory required");
    std::filesystem::create_directories(out_dir);

    std::ofstream csv(out_dir / "fewshot.csv", std::ios::trunc);
    csv << "n,precision,recall,hmean\n";

    std::vector<FewshotPoint> points;
    for (int n : cfg.n_values) {
        std::vector<FewshotDoc> chosen = subset_sample(pool, n, cfg.train.seed);
        std::vector<TrainingPair> pairs;
        pairs.reserve(chosen.size());
        for (const auto& doc : chosen) pairs.push_back(doc.pair);
        auto crops =
            build_crop_pool(pairs, cfg.train.crop, cfg.train.crops_per_image, cfg.train.seed);

        nn::TrainState<S> st(cfg.gen, cfg.dis, cfg.phi, cfg.adam, cfg.train.seed);
        train_loop(cfg.train, crops, st, cfg.weights, out_dir / ("n_" + std::to_string(n)));
        if (nn::stop_requested().load()) break;

        nn::Workspace<S> ws;
        FewshotPoint pt;
        pt.n = n;
        for (const auto& doc : chosen) pt.stems.push_back(doc.stem);
        pt.report = evaluate_generator(st.g, eval_docs, cfg.post, cfg.match, ws);

        char row[128];
        std::snprintf(row, sizeof(row), "%d,%.9g,%.9g,%.9g\n", pt.n, pt.report.precision,
                      pt.report.recall, pt.report.hmean);
        csv << row;
        csv.flush();
        points.push_back(std::move(pt));
    }
    return points;
}

}  // namespace tlgan
