#include "tlgan/fewshot.hpp"

#include "tlgan/image_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace tlgan;
namespace fs = std::filesystem;

namespace {

nn::GeneratorConfig small_gen() {
    nn::GeneratorConfig cfg;
    cfg.base_channels = 8;
    cfg.num_res_blocks = 2;
    cfg.expand_channels = 16;
    return cfg;
}

nn::DiscriminatorConfig small_dis() {
    nn::DiscriminatorConfig cfg;
    cfg.ladder = {8, 8, 16, 16};
    cfg.dense_hidden = 16;
    cfg.min_input = 8;
    return cfg;
}

SyntheticDocSpec small_page(std::uint64_t seed) {
    SyntheticDocSpec spec;
    spec.width = 128;
    spec.height = 96;
    spec.num_lines = 3;
    spec.min_word_width = 20;
    spec.max_word_width = 40;
    spec.seed = seed;
    return spec;
}

fs::path write_pool_dataset(const char* name, int count) {
    fs::path root = fs::temp_directory_path() / name;
    fs::remove_all(root);
    fs::create_directories(root / "images");
    fs::create_directories(root / "annotations");
    for (int i = 0; i < count; ++i) {
        SynthDoc doc = synth_document(small_page(40 + static_cast<std::uint64_t>(i)));
        std::string stem = "page" + std::to_string(i);
        save_png(doc.image, (root / "images" / (stem + ".png")).string());
        std::vector<AnnotationRecord> recs;
        for (const auto& q : doc.boxes) recs.push_back({q, "w"});
        std::ofstream out(root / "annotations" / (stem + ".txt"), std::ios::binary);
        out << serialize_annotations(recs);
    }
    return root;
}

std::string file_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_SUITE("fewshot") {

TEST_CASE("full-page inference pads and trims around the stride") {
    nn::Generator<float> g(small_gen(), 7);
    nn::Workspace<float> ws;

    SUBCASE("stride-aligned pages come back at exactly quarter size") {
        RasterImage img = RasterImage::u8(72, 52, 1, 200);
        HeatMap map = infer_map(g, img, ws);
        CHECK(map.height() == 18);
        CHECK(map.width() == 13);
        CHECK(map.scale == doctest::Approx(0.25));
        CHECK(map.values.minCoeff() >= 0.0f);
        CHECK(map.values.maxCoeff() <= 1.0f);
    }

    SUBCASE("unaligned pages round to the page's own map size") {
        RasterImage img = RasterImage::u8(67, 45, 1, 200);
        HeatMap map = infer_map(g, img, ws);
        CHECK(map.height() == 17);  // lround(67 / 4)
        CHECK(map.width() == 11);   // lround(45 / 4)
    }

    SUBCASE("inference is deterministic") {
        RasterImage img = RasterImage::u8(40, 40, 1, 128);
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 40; ++x)
                img.at8(y, x) = static_cast<std::uint8_t>((y * 7 + x * 13) % 251);
        HeatMap a = infer_map(g, img, ws);
        HeatMap b = infer_map(g, img, ws);
        CHECK((a.values == b.values).all());
    }

    SUBCASE("empty images are rejected") {
        CHECK_THROWS_AS(infer_map(g, RasterImage{}, ws), std::invalid_argument);
    }
}

TEST_CASE("fewshot experiment trains, scores, and repeats deterministically") {
    fs::path root = write_pool_dataset("tlgan_fewshot_pool", 4);
    PairParams params;
    params.preprocess.short_axis_target = 96;
    auto pool = make_fewshot_docs(load_dataset(root), params);
    REQUIRE(pool.size() == 4);
    for (const auto& doc : pool) {
        CHECK(!doc.ground_truth.empty());
        CHECK(!doc.stem.empty());
    }

    FewshotRunConfig cfg;
    cfg.n_values = {1, 2};
    cfg.gen = small_gen();
    cfg.dis = small_dis();
    cfg.weights.r = 0.0;  // keep the tiny run free of the feature net
    cfg.train.total_steps = 2;
    cfg.train.batch_size = 2;
    cfg.train.crop = 32;
    cfg.train.crops_per_image = 4;
    cfg.train.log_every = 1;
    cfg.train.seed = 9;

    fs::path out_a = fs::temp_directory_path() / "tlgan_fewshot_a";
    fs::remove_all(out_a);
    auto points = fewshot_experiment<float>(pool, pool, cfg, out_a);
    REQUIRE(points.size() == 2);
    CHECK(points[0].n == 1);
    CHECK(points[1].n == 2);
    REQUIRE(points[0].stems.size() == 1);
    REQUIRE(points[1].stems.size() == 2);
    CHECK(points[0].stems[0] == points[1].stems[0]);  // subsets nest
    for (const auto& pt : points) {
        CHECK(pt.report.precision >= 0.0);
        CHECK(pt.report.precision <= 1.0);
        CHECK(pt.report.recall >= 0.0);
        CHECK(pt.report.recall <= 1.0);
        CHECK(pt.report.num_ground_truth > 0);
    }
    CHECK(fs::exists(out_a / "n_1" / "ckpt_last"));
    CHECK(fs::exists(out_a / "n_2" / "loss_log.csv"));

    std::string csv = file_text(out_a / "fewshot.csv");
    CHECK(csv.substr(0, 25) == "n,precision,recall,hmean\n");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    fs::path out_b = fs::temp_directory_path() / "tlgan_fewshot_b";
    fs::remove_all(out_b);
    auto again = fewshot_experiment<float>(pool, pool, cfg, out_b);
    REQUIRE(again.size() == 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
        CHECK(again[i].stems == points[i].stems);
        CHECK(again[i].report.precision == points[i].report.precision);
        CHECK(again[i].report.recall == points[i].report.recall);
        CHECK(again[i].report.hmean == points[i].report.hmean);
    }
    CHECK(file_text(out_b / "fewshot.csv") == csv);

    SUBCASE("bad subset sizes are rejected up front") {
        FewshotRunConfig bad = cfg;
        bad.n_values = {0};
        CHECK_THROWS_AS(fewshot_experiment<float>(pool, pool, bad, out_a),
                        std::invalid_argument);
        bad.n_values = {5};
        CHECK_THROWS_AS(fewshot_experiment<float>(pool, pool, bad, out_a),
                        std::invalid_argument);
        bad.n_values = {};
        CHECK_THROWS_AS(fewshot_experiment<float>(pool, pool, bad, out_a),
                        std::invalid_argument);
    }

    fs::remove_all(root);
    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

}  // TEST_SUITE
