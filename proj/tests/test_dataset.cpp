#include "tlgan/dataset.hpp"

#include "tlgan/evaluation.hpp"
#include "tlgan/geometry.hpp"
#include "tlgan/image_io.hpp"
#include "tlgan/imaging.hpp"
#include "tlgan/log.hpp"
#include "tlgan/training.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

using namespace tlgan;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    REQUIRE(out.good());
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

bool same_image(const RasterImage& a, const RasterImage& b) {
    return a.width == b.width && a.height == b.height && a.channels == b.channels &&
           a.bytes == b.bytes && a.floats == b.floats;
}

// Writes one synthetic document as an images/ + annotations/ dataset.
fs::path write_synth_dataset(const char* name, const SynthDoc& doc) {
    fs::path root = temp_dir(name);
    fs::create_directories(root / "images");
    fs::create_directories(root / "annotations");
    save_png(doc.image, (root / "images" / "doc0.png").string());
    std::vector<AnnotationRecord> records;
    for (const auto& q : doc.boxes) records.push_back({q, "word"});
    write_file(root / "annotations" / "doc0.txt", serialize_annotations(records));
    return root;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("annotation parsing") {
    SUBCASE("integer records round trip byte-exactly") {
        const std::string text =
            "72,25,326,25,326,64,72,64,TAN WOON YANN\n"
            "50,82,440,82,440,121,50,121,BOOK TA .K(TAMAN DAYA) SDN BND\n";
        auto records = parse_annotation(text);
        REQUIRE(records.size() == 2);
        CHECK(records[0].quad.corners[0] == Vec2(72, 25));
        CHECK(records[0].quad.corners[2] == Vec2(326, 64));
        CHECK(records[0].transcript == "TAN WOON YANN");
        CHECK(serialize_annotations(records) == text);
    }

    SUBCASE("transcript keeps embedded commas") {
        auto records = parse_annotation("0,0,9,0,9,9,0,9,a,b\n");
        REQUIRE(records.size() == 1);
        CHECK(records[0].transcript == "a,b");
    }

    SUBCASE("CRLF endings and blank lines are tolerated") {
        auto records = parse_annotation("\r\n1,2,3,2,3,4,1,4,x\r\n\n  \n5,6,7,6,7,8,5,8,y\r\n");
        REQUIRE(records.size() == 2);
        CHECK(records[0].transcript == "x");
        CHECK(records[1].transcript == "y");
    }

    SUBCASE("empty text gives no records") {
        CHECK(parse_annotation("").empty());
        CHECK(parse_annotation("\n\n").empty());
    }

    SUBCASE("counterclockwise corners are normalized to clockwise") {
        // Corners listed bottom-left first, going counterclockwise in
        // y-down coordinates.
        auto records = parse_annotation("0,0,0,10,20,10,20,0,w\n");
        REQUIRE(records.size() == 1);
        CHECK(records[0].quad.signed_area() > 0.0);
        CHECK(records[0].quad.corners[0] == Vec2(0, 0));
        auto lo = records[0].quad.min_corner();
        auto hi = records[0].quad.max_corner();
        CHECK(lo == Vec2(0, 0));
        CHECK(hi == Vec2(20, 10));
    }

    SUBCASE("fractional coordinates survive a round trip") {
        auto records = parse_annotation("0.5,1.25,10.5,1.25,10.5,7.75,0.5,7.75,t\n");
        auto again = parse_annotation(serialize_annotations(records));
        REQUIRE(again.size() == 1);
        CHECK(again[0].quad.corners[0] == records[0].quad.corners[0]);
        CHECK(again[0].quad.corners[2] == records[0].quad.corners[2]);
    }

    SUBCASE("malformed lines report their line number") {
        CHECK_THROWS_WITH_AS(parse_annotation("1,2,3,4,5,6,7,8,ok\n1,2,three,4,5,6,7,8,bad\n"),
                             doctest::Contains("line 2"), DataError);
        CHECK_THROWS_AS(parse_annotation("1,2,3\n"), DataError);
    }
}

TEST_CASE("synthetic documents") {
    SyntheticDocSpec spec;
    spec.seed = 11;

    SUBCASE("same seed reproduces the page, different seed does not") {
        SynthDoc a = synth_document(spec);
        SynthDoc b = synth_document(spec);
        CHECK(same_image(a.image, b.image));
        REQUIRE(a.boxes.size() == b.boxes.size());
        for (std::size_t i = 0; i < a.boxes.size(); ++i)
            for (int c = 0; c < 4; ++c) CHECK(a.boxes[i].corners[c] == b.boxes[i].corners[c]);

        SyntheticDocSpec other = spec;
        other.seed = 12;
        CHECK_FALSE(same_image(a.image, synth_document(other).image));
    }

    SUBCASE("pages hold a sensible number of disjoint word boxes") {
        SynthDoc doc = synth_document(spec);
        CHECK(doc.image.width == spec.width);
        CHECK(doc.image.height == spec.height);
        CHECK(doc.boxes.size() >= 20);
        for (const auto& q : doc.boxes) {
            auto lo = q.min_corner();
            auto hi = q.max_corner();
            CHECK(lo.x() >= spec.margin);
            CHECK(lo.y() >= spec.margin);
            CHECK(hi.x() <= spec.width - spec.margin);
            CHECK(hi.y() <= spec.height - spec.margin);
        }
        for (std::size_t i = 0; i < doc.boxes.size(); ++i)
            for (std::size_t j = i + 1; j < doc.boxes.size(); ++j)
                CHECK(iou(doc.boxes[i], doc.boxes[j]) == 0.0);
    }

    SUBCASE("words are darker than the page background") {
        SynthDoc doc = synth_document(spec);
        REQUIRE(!doc.boxes.empty());
        const auto& q = doc.boxes.front();
        double darkest = 255.0;
        for (int y = static_cast<int>(q.min_corner().y()); y < q.max_corner().y(); ++y)
            for (int x = static_cast<int>(q.min_corner().x()); x < q.max_corner().x(); ++x)
                darkest = std::min(darkest, doc.image.luma255(y, x));
        CHECK(darkest <= spec.max_ink);
    }

    SUBCASE("zero lines gives a blank page") {
        SyntheticDocSpec blank = spec;
        blank.num_lines = 0;
        SynthDoc doc = synth_document(blank);
        CHECK(doc.boxes.empty());
        double darkest = 255.0;
        for (int y = 0; y < doc.image.height; ++y)
            for (int x = 0; x < doc.image.width; ++x)
                darkest = std::min(darkest, doc.image.luma255(y, x));
        CHECK(darkest > spec.max_ink);  // noise only, no strokes
    }

    SUBCASE("a page too small for one word is rejected") {
        SyntheticDocSpec tiny = spec;
        tiny.width = 2 * tiny.margin + tiny.min_word_width - 1;
        CHECK_THROWS_AS(synth_document(tiny), std::invalid_argument);
        tiny = spec;
        tiny.height = 2 * tiny.margin + tiny.min_word_height - 1;
        CHECK_THROWS_AS(synth_document(tiny), std::invalid_argument);
        tiny = spec;
        tiny.num_lines = -1;
        CHECK_THROWS_AS(synth_document(tiny), std::invalid_argument);
    }
}

TEST_CASE("subset sampling") {
    std::vector<int> pool;
    for (int i = 0; i < 11; ++i) pool.push_back(i);

    SUBCASE("subsets nest and stay within the pool") {
        auto five = subset_sample(pool, 5, 42);
        auto three = subset_sample(pool, 3, 42);
        REQUIRE(three.size() == 3);
        REQUIRE(five.size() == 5);
        for (int i = 0; i < 3; ++i) CHECK(three[i] == five[i]);
        std::set<int> unique(five.begin(), five.end());
        CHECK(unique.size() == 5);
        for (int v : five) CHECK((v >= 0 && v <= 10));
    }

    SUBCASE("same seed repeats, seeds differ somewhere") {
        CHECK(subset_sample(pool, 7, 9) == subset_sample(pool, 7, 9));
        int distinct = 0;
        auto base = subset_sample(pool, 7, 0);
        for (std::uint64_t s = 1; s <= 100; ++s)
            if (subset_sample(pool, 7, s) != base) ++distinct;
        CHECK(distinct >= 95);
    }

    SUBCASE("out-of-range sizes are rejected") {
        CHECK_THROWS_AS(subset_sample(pool, 0, 1), std::invalid_argument);
        CHECK_THROWS_AS(subset_sample(pool, 12, 1), std::invalid_argument);
    }
}

TEST_CASE("training pairs") {
    SyntheticDocSpec spec;
    spec.seed = 3;
    SynthDoc doc = synth_document(spec);

    PairParams params;
    params.preprocess.short_axis_target = 256;

    SUBCASE("maps align with the preprocessed image and stay in [0,1]") {
        fs::path root = write_synth_dataset("tlgan_ds_pairs", doc);
        auto samples = load_dataset(root);
        REQUIRE(samples.size() == 1);
        CHECK(samples[0].stem == "doc0");
        CHECK(samples[0].annotations.size() == doc.boxes.size());

        auto pairs = build_training_pairs(samples, params);
        REQUIRE(pairs.size() == 1);
        const auto& pair = pairs[0];
        CHECK(pair.map.scale == doctest::Approx(0.25));
        CHECK(pair.map.height() == std::lround(pair.image.height * params.map_scale));
        CHECK(pair.map.width() == std::lround(pair.image.width * params.map_scale));
        CHECK(pair.map.values.minCoeff() >= 0.0f);
        CHECK(pair.map.values.maxCoeff() <= 1.0f);
        CHECK(pair.map.values.maxCoeff() > 0.9f);  // peak-normalized words
        fs::remove_all(root);
    }

    SUBCASE("a word's map peak sits at the scaled word center") {
        // One wide word on an otherwise empty page; the page fills the
        // content region so preprocessing scales it uniformly.
        RasterImage img = RasterImage::u8(400, 400, 1, 255);
        for (int y = 150; y < 170; ++y)
            for (int x = 100; x < 200; ++x) img.at8(y, x) = 40;
        // A dark frame pins the content region to the full page.
        for (int x = 0; x < 400; ++x) img.at8(0, x) = img.at8(399, x) = 0;
        for (int y = 0; y < 400; ++y) img.at8(y, 0) = img.at8(y, 399) = 0;

        fs::path root = temp_dir("tlgan_ds_scale");
        fs::create_directories(root / "images");
        fs::create_directories(root / "annotations");
        save_png(img, (root / "images" / "word.png").string());
        write_file(root / "annotations" / "word.txt", "100,150,200,150,200,170,100,170,w\n");

        PairParams p;
        p.preprocess.short_axis_target = 100;  // scale 0.25 against the 400px page
        auto pairs = build_training_pairs(load_dataset(root), p);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].scale_x == doctest::Approx(0.25).epsilon(0.02));
        CHECK(pairs[0].image.width == 100);

        // The word's mass centroid lands at its center scaled by
        // preprocess scale (0.25) times map scale (0.25).
        const auto& map = pairs[0].map;
        double mass = 0.0, cx = 0.0, cy = 0.0;
        for (int y = 0; y < map.height(); ++y)
            for (int x = 0; x < map.width(); ++x) {
                double v = map.values(y, x);
                mass += v;
                cx += v * x;
                cy += v * y;
            }
        REQUIRE(mass > 0.0);
        CHECK(cx / mass == doctest::Approx(150.0 * 0.0625).epsilon(0.1));
        CHECK(cy / mass == doctest::Approx(160.0 * 0.0625).epsilon(0.1));
        fs::remove_all(root);
    }

    SUBCASE("no annotations means an all-zero map") {
        fs::path root = temp_dir("tlgan_ds_empty");
        fs::create_directories(root / "images");
        fs::create_directories(root / "annotations");
        save_png(doc.image, (root / "images" / "doc0.png").string());
        write_file(root / "annotations" / "doc0.txt", "");
        auto pairs = build_training_pairs(load_dataset(root), params);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].map.values.maxCoeff() == 0.0f);
        fs::remove_all(root);
    }

    SUBCASE("cache hits reproduce the fresh result bit-exactly") {
        fs::path root = write_synth_dataset("tlgan_ds_cache", doc);
        fs::path cache = temp_dir("tlgan_ds_cache_dir");
        auto samples = load_dataset(root);

        auto fresh = build_training_pairs(samples, params);
        auto first = build_training_pairs(samples, params, cache);
        REQUIRE(fs::exists(cache));
        int cache_files = 0;
        for (const auto& e : fs::directory_iterator(cache)) {
            ++cache_files;
            (void)e;
        }
        CHECK(cache_files == 3);  // image, map, meta

        auto second = build_training_pairs(samples, params, cache);
        REQUIRE(fresh.size() == 1);
        REQUIRE(first.size() == 1);
        REQUIRE(second.size() == 1);
        for (const auto* other : {&first[0], &second[0]}) {
            CHECK(same_image(fresh[0].image, other->image));
            CHECK((fresh[0].map.values == other->map.values).all());
            CHECK(fresh[0].scale_x == other->scale_x);
            CHECK(fresh[0].scale_y == other->scale_y);
        }

        // Changing a parameter keys a new entry instead of reusing stale data.
        PairParams changed = params;
        changed.sigma_ratio = 0.30;
        auto third = build_training_pairs(samples, changed, cache);
        REQUIRE(third.size() == 1);
        CHECK_FALSE((third[0].map.values == fresh[0].map.values).all());
        fs::remove_all(root);
        fs::remove_all(cache);
    }

    SUBCASE("unreadable images are skipped with a warning") {
        fs::path root = write_synth_dataset("tlgan_ds_bad", doc);
        write_file(root / "images" / "broken.png", "not a png");
        write_file(root / "annotations" / "broken.txt", "1,1,5,1,5,5,1,5,x\n");
        int warnings = 0;
        set_warning_sink([&warnings](const std::string&) { ++warnings; });
        auto pairs = build_training_pairs(load_dataset(root), params);
        set_warning_sink(nullptr);
        CHECK(pairs.size() == 1);
        CHECK(warnings >= 1);
        fs::remove_all(root);
    }
}

TEST_CASE("rendered maps localize back to the source words") {
    // Word geometry with comfortable IoU headroom at quarter-resolution
    // maps; smaller words bound the achievable IoU well below 1.
    SyntheticDocSpec spec;
    spec.seed = 5;
    spec.min_word_height = 14;
    spec.max_word_height = 20;
    spec.min_word_width = 36;
    spec.max_word_width = 80;
    spec.min_gap = 14;
    spec.max_gap = 22;
    spec.num_lines = 9;
    SynthDoc doc = synth_document(spec);
    REQUIRE(doc.boxes.size() >= 15);

    fs::path root = write_synth_dataset("tlgan_ds_roundtrip", doc);
    PairParams params;
    params.preprocess.short_axis_target = 256;
    auto pairs = build_training_pairs(load_dataset(root), params);
    REQUIRE(pairs.size() == 1);

    auto detections = localize_from_map(pairs[0].map, PostprocessParams{},
                                        {pairs[0].scale_x, pairs[0].scale_y});
    std::vector<std::vector<QuadBox>> det{detections};
    std::vector<std::vector<QuadBox>> gt{doc.boxes};
    EvalReport report = evaluate(det, gt);
    CHECK(report.hmean >= 0.95);
    fs::remove_all(root);
}

TEST_CASE("manifest splits and crop pools") {
    SUBCASE("manifest.json assigns splits and skips missing stems") {
        SyntheticDocSpec spec;
        spec.seed = 21;
        spec.num_lines = 3;
        fs::path root = temp_dir("tlgan_ds_manifest");
        fs::create_directories(root / "images");
        fs::create_directories(root / "annotations");
        for (int i = 0; i < 3; ++i) {
            spec.seed = 21 + static_cast<std::uint64_t>(i);
            SynthDoc doc = synth_document(spec);
            std::string stem = "doc" + std::to_string(i);
            save_png(doc.image, (root / "images" / (stem + ".png")).string());
            std::vector<AnnotationRecord> recs;
            for (const auto& q : doc.boxes) recs.push_back({q, "w"});
            write_file(root / "annotations" / (stem + ".txt"), serialize_annotations(recs));
        }
        write_file(root / "manifest.json",
                   R"({"train": ["doc0", "doc2", "ghost"], "test": ["doc1"]})");

        int warnings = 0;
        set_warning_sink([&warnings](const std::string&) { ++warnings; });
        auto samples = load_dataset(root);
        set_warning_sink(nullptr);
        REQUIRE(samples.size() == 3);
        CHECK(warnings == 1);  // ghost
        CHECK(samples[0].stem == "doc0");
        CHECK(samples[0].split == "train");
        CHECK(samples[1].stem == "doc1");
        CHECK(samples[1].split == "test");
        CHECK(samples[2].split == "train");
        fs::remove_all(root);
    }

    SUBCASE("crop pools are sized and seeded deterministically") {
        SyntheticDocSpec spec;
        spec.seed = 8;
        SynthDoc doc = synth_document(spec);
        fs::path root = write_synth_dataset("tlgan_ds_crops", doc);
        PairParams params;
        params.preprocess.short_axis_target = 256;
        auto pairs = build_training_pairs(load_dataset(root), params);
        REQUIRE(pairs.size() == 1);

        auto pool = build_crop_pool(pairs, 64, 10, 123);
        REQUIRE(pool.size() == 10);
        for (const auto& crop : pool) {
            CHECK(crop.image.width == 64);
            CHECK(crop.image.height == 64);
            CHECK(crop.map.width() == 16);
            CHECK(crop.map.height() == 16);
        }

        auto again = build_crop_pool(pairs, 64, 10, 123);
        bool all_equal = true;
        for (std::size_t i = 0; i < pool.size(); ++i)
            all_equal = all_equal && same_image(pool[i].image, again[i].image) &&
                        (pool[i].map.values == again[i].map.values).all();
        CHECK(all_equal);

        auto other = build_crop_pool(pairs, 64, 10, 124);
        bool any_diff = false;
        for (std::size_t i = 0; i < pool.size(); ++i)
            any_diff = any_diff || !same_image(pool[i].image, other[i].image);
        CHECK(any_diff);

        CHECK_THROWS_AS(build_crop_pool(pairs, 0, 1, 0), std::invalid_argument);
        fs::remove_all(root);
    }
}

}  // TEST_SUITE
