#include "tlgan/config.hpp"
#include "tlgan/fewshot.hpp"
#include "tlgan/image_io.hpp"
#include "tlgan/nn/checkpoint.hpp"
#include "tlgan/plot.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

using namespace tlgan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

void on_sigint(int) { nn::stop_requested().store(true); }

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Resolved config plus the echo/manifest written into every output dir.
RunConfig finish_config(const std::string& config_path, const CLI::Option* seed_opt,
                        std::uint64_t seed, const CLI::Option* steps_opt, long long steps) {
    RunConfig cfg = config_path.empty() ? parse_run_config("{}") : load_run_config(config_path);
    if (seed_opt->count() > 0) cfg.train.seed = seed;
    if (steps_opt->count() > 0) cfg.train.total_steps = steps;
    return cfg;
}

void write_run_manifest(const fs::path& out_dir, const std::string& command,
                        const RunConfig& cfg) {
    fs::create_directories(out_dir);
    write_text(out_dir / "config.json", dump_run_config(cfg));
    json m;
    m["tool"] = "tlgan";
    m["version"] = kVersion;
    m["command"] = command;
    m["seed"] = cfg.train.seed;
    m["config_hash"] = hex16(config_hash(cfg));
    write_text(out_dir / "run.json", m.dump(2) + "\n");
}

std::string resolve_cache_dir(const RunConfig& cfg) {
    if (!cfg.cache_dir.empty()) return cfg.cache_dir;
    if (const char* env = std::getenv("TLGAN_CACHE_DIR")) return env;
    return {};
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

/// Image files from a dataset root (images/ preferred, else the dir
/// itself), sorted by stem.
std::vector<fs::path> list_images(const fs::path& root) {
    fs::path dir = fs::is_directory(root / "images") ? root / "images" : root;
    if (!fs::is_directory(dir)) throw DataError("no such directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.stem() < b.stem(); });
    return files;
}

std::vector<DocumentSample> training_split(std::vector<DocumentSample> samples) {
    std::vector<DocumentSample> train;
    for (auto& s : samples)
        if (s.split == "train") train.push_back(std::move(s));
    return train.empty() ? samples : train;
}

// ---------------- synth ----------------

struct SynthArgs {
    std::string out;
    int docs = 5;
    std::uint64_t seed = 0;
    std::string preset = "desk";
};

SyntheticDocSpec preset_spec(const std::string& preset) {
    SyntheticDocSpec spec;
    if (preset == "receipt") return spec;  // small, dense text
    if (preset == "desk") {
        spec.min_word_height = 20;
        spec.max_word_height = 28;
        spec.min_word_width = 48;
        spec.max_word_width = 96;
        spec.min_gap = 18;
        spec.max_gap = 26;
        spec.num_lines = 6;
        return spec;
    }
    throw std::invalid_argument("unknown preset '" + preset + "' (use receipt or desk)");
}

int run_synth(const SynthArgs& args, const RunConfig& cfg) {
    fs::create_directories(fs::path(args.out) / "images");
    fs::create_directories(fs::path(args.out) / "annotations");
    std::vector<std::string> stems;
    for (int i = 0; i < args.docs; ++i) {
        SyntheticDocSpec spec = preset_spec(args.preset);
        spec.seed = args.seed + static_cast<std::uint64_t>(i);
        SynthDoc doc = synth_document(spec);
        char stem[32];
        std::snprintf(stem, sizeof(stem), "doc%03d", i);
        save_png(doc.image, (fs::path(args.out) / "images" / (std::string(stem) + ".png")).string());
        std::vector<AnnotationRecord> recs;
        recs.reserve(doc.boxes.size());
        for (const auto& q : doc.boxes) recs.push_back({q, "word"});
        write_text(fs::path(args.out) / "annotations" / (std::string(stem) + ".txt"),
                   serialize_annotations(recs));
        stems.emplace_back(stem);
    }
    json manifest;
    manifest["train"] = stems;
    write_text(fs::path(args.out) / "manifest.json", manifest.dump(2) + "\n");
    write_run_manifest(args.out, "synth", cfg);
    std::printf("synth: wrote %d documents to %s (seed %llu, preset %s)\n", args.docs,
                args.out.c_str(), static_cast<unsigned long long>(args.seed),
                args.preset.c_str());
    return 0;
}

// ---------------- maps ----------------

int run_maps(const std::string& data, const std::string& out, const RunConfig& cfg) {
    auto samples = load_dataset(data);
    if (samples.empty()) throw DataError("maps: no documents in " + data);
    fs::create_directories(out);
    auto pairs = build_training_pairs(samples, cfg.pairs);
    for (const auto& pair : pairs) {
        save_png(pair.image, (fs::path(out) / (pair.stem + ".image.png")).string());
        save_png(heatmap_to_u8(pair.map), (fs::path(out) / (pair.stem + ".map.png")).string());
        json meta;
        meta["scale_x"] = pair.scale_x;
        meta["scale_y"] = pair.scale_y;
        meta["map_scale"] = pair.map.scale;
        write_text(fs::path(out) / (pair.stem + ".json"), meta.dump(2) + "\n");
    }
    write_run_manifest(out, "maps", cfg);
    std::printf("maps: rendered %zu documents into %s\n", pairs.size(), out.c_str());
    return 0;
}

// ---------------- train ----------------

int run_train(const std::string& data, const std::string& out, const RunConfig& cfg) {
    auto samples = training_split(load_dataset(data));
    if (samples.empty()) throw DataError("train: no documents in " + data);
    auto pairs = build_training_pairs(samples, cfg.pairs, resolve_cache_dir(cfg));
    auto crops = build_crop_pool(pairs, cfg.train.crop, cfg.train.crops_per_image,
                                 cfg.train.seed);
    std::printf("train: %zu documents, %zu crops, seed %llu\n", pairs.size(), crops.size(),
                static_cast<unsigned long long>(cfg.train.seed));

    nn::TrainState<float> st(cfg.gen, cfg.dis, cfg.phi, cfg.adam, cfg.train.seed);
    const fs::path resume = fs::path(out) / "ckpt_last";
    if (fs::exists(resume)) {
        load_checkpoint(resume, st);
        std::printf("train: resuming from step %llu\n",
                    static_cast<unsigned long long>(st.step));
    }

    write_run_manifest(out, "train", cfg);
    std::signal(SIGINT, on_sigint);
    nn::StepLosses last = train_loop(cfg.train, crops, st, cfg.weights, out);
    if (nn::stop_requested().load())
        std::printf("train: interrupted, checkpoint saved at step %llu\n",
                    static_cast<unsigned long long>(st.step));
    try {
        plot_loss_curves(fs::path(out) / "loss_log.csv", fs::path(out) / "loss_curves.png");
    } catch (const DataError&) {
        // zero-step runs have no loss rows to chart
    }
    std::printf("train: done at step %llu d_loss %.6g g_adv %.6g content %.6g feature %.6g\n",
                static_cast<unsigned long long>(st.step), last.d_loss, last.g_adv, last.content,
                last.feature);
    return 0;
}

// ---------------- infer / localize ----------------

void load_generator_weights(nn::Generator<float>& g, const fs::path& ckpt) {
    nn::CheckpointReader rd(ckpt);
    if (rd.meta().value("format", "") != "tlgan-train-state")
        throw DataError("infer: not a train-state checkpoint: " + ckpt.string());
    for (auto& p : g.params()) rd.read(p.name, p.value, p.size);
}

int run_infer(const std::string& data, const std::string& ckpt, const std::string& out,
              const RunConfig& cfg) {
    auto files = list_images(data);
    if (files.empty()) throw DataError("infer: no images in " + data);
    nn::Generator<float> g(cfg.gen, 0);
    load_generator_weights(g, ckpt);
    nn::Workspace<float> ws;
    fs::create_directories(out);
    for (const auto& file : files) {
        RasterImage raw = load_image(file.string());
        PreprocessResult pre = preprocess(raw, cfg.preprocess);
        HeatMap map = infer_map(g, pre.image, ws);
        const std::string stem = file.stem().string();
        save_png(heatmap_to_u8(map), (fs::path(out) / (stem + ".pred.png")).string());
        json meta;
        meta["scale_x"] = pre.scale_x;
        meta["scale_y"] = pre.scale_y;
        meta["map_scale"] = map.scale;
        write_text(fs::path(out) / (stem + ".json"), meta.dump(2) + "\n");
    }
    write_run_manifest(out, "infer", cfg);
    std::printf("infer: wrote %zu predicted maps to %s\n", files.size(), out.c_str());
    return 0;
}

json boxes_to_json(const std::vector<QuadBox>& boxes) {
    json arr = json::array();
    for (const auto& q : boxes) {
        json item = json::array();
        for (const auto& c : q.corners) {
            item.push_back(c.x());
            item.push_back(c.y());
        }
        arr.push_back(std::move(item));
    }
    return arr;
}

int run_localize(const std::string& maps_dir, const std::string& out, const RunConfig& cfg) {
    std::vector<fs::path> preds;
    for (const auto& entry : fs::directory_iterator(maps_dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > 9 &&
            name.substr(name.size() - 9) == ".pred.png")
            preds.push_back(entry.path());
    }
    if (preds.empty()) throw DataError("localize: no .pred.png maps in " + maps_dir);
    std::sort(preds.begin(), preds.end());

    json detections;
    for (const auto& pred : preds) {
        std::string stem = pred.filename().string();
        stem = stem.substr(0, stem.size() - 9);
        json meta = json::parse(read_text(fs::path(maps_dir) / (stem + ".json")));
        HeatMap map = heatmap_from_u8(load_image(pred.string()), meta.at("map_scale").get<float>());
        auto boxes = localize_from_map(
            map, cfg.post, {meta.at("scale_x").get<double>(), meta.at("scale_y").get<double>()});
        detections[stem] = boxes_to_json(boxes);
    }
    fs::create_directories(fs::path(out).parent_path().empty() ? "."
                                                               : fs::path(out).parent_path());
    write_text(out, detections.dump(2) + "\n");
    std::printf("localize: wrote detections for %zu documents to %s\n", preds.size(),
                out.c_str());
    return 0;
}

// ---------------- eval ----------------

std::vector<QuadBox> boxes_from_json(const json& arr) {
    std::vector<QuadBox> boxes;
    for (const auto& item : arr) {
        if (!item.is_array() || item.size() != 8)
            throw DataError("eval: each detection needs 8 coordinates");
        boxes.emplace_back(Vec2(item[0], item[1]), Vec2(item[2], item[3]),
                           Vec2(item[4], item[5]), Vec2(item[6], item[7]));
    }
    return boxes;
}

int print_and_store_report(const EvalReport& report, const std::string& out_json) {
    std::printf("precision %.6f recall %.6f hmean %.6f (%lld matched, %lld det, %lld gt)\n",
                report.precision, report.recall, report.hmean,
                static_cast<long long>(report.matched),
                static_cast<long long>(report.num_detections),
                static_cast<long long>(report.num_ground_truth));
    if (!out_json.empty()) {
        json j;
        j["precision"] = report.precision;
        j["recall"] = report.recall;
        j["hmean"] = report.hmean;
        j["matched"] = report.matched;
        j["detections"] = report.num_detections;
        j["ground_truth"] = report.num_ground_truth;
        write_text(out_json, j.dump(2) + "\n");
    }
    return 0;
}

int run_eval(const std::string& det_file, const std::string& gt_dir, const std::string& from_images,
             const std::string& ckpt, const std::string& out_json, const RunConfig& cfg) {
    if (!from_images.empty()) {
        auto samples = load_dataset(from_images);
        if (samples.empty()) throw DataError("eval: no documents in " + from_images);
        auto docs = make_fewshot_docs(samples, cfg.pairs, resolve_cache_dir(cfg));
        nn::Generator<float> g(cfg.gen, 0);
        load_generator_weights(g, ckpt);
        nn::Workspace<float> ws;
        EvalReport report = evaluate_generator(g, docs, cfg.post, cfg.match, ws);
        return print_and_store_report(report, out_json);
    }

    json det_doc = json::parse(read_text(det_file));
    auto samples = load_dataset(gt_dir);
    if (samples.empty()) throw DataError("eval: no ground truth in " + gt_dir);
    std::vector<std::vector<QuadBox>> detections, ground_truth;
    for (const auto& s : samples) {
        std::vector<QuadBox> gt;
        for (const auto& rec : s.annotations) gt.push_back(rec.quad);
        ground_truth.push_back(std::move(gt));
        detections.push_back(det_doc.contains(s.stem) ? boxes_from_json(det_doc.at(s.stem))
                                                      : std::vector<QuadBox>{});
    }
    EvalReport report = evaluate(detections, ground_truth, cfg.match);
    return print_and_store_report(report, out_json);
}

// ---------------- fewshot ----------------

int run_fewshot(const std::string& data, const std::string& out, std::vector<int> n_values,
                const RunConfig& cfg) {
    auto samples = load_dataset(data);
    if (samples.empty()) throw DataError("fewshot: no documents in " + data);
    auto docs = make_fewshot_docs(samples, cfg.pairs, resolve_cache_dir(cfg));

    FewshotRunConfig fcfg;
    fcfg.n_values = std::move(n_values);
    fcfg.train = cfg.train;
    fcfg.gen = cfg.gen;
    fcfg.dis = cfg.dis;
    fcfg.phi = cfg.phi;
    fcfg.adam = cfg.adam;
    fcfg.weights = cfg.weights;
    fcfg.post = cfg.post;
    fcfg.match = cfg.match;

    std::printf("fewshot: %zu-document pool, seed %llu\n", docs.size(),
                static_cast<unsigned long long>(cfg.train.seed));
    write_run_manifest(out, "fewshot", cfg);
    std::signal(SIGINT, on_sigint);
    auto points = fewshot_experiment<float>(docs, docs, fcfg, out);
    for (const auto& pt : points)
        std::printf("fewshot: n=%d precision %.6f recall %.6f hmean %.6f\n", pt.n,
                    pt.report.precision, pt.report.recall, pt.report.hmean);
    if (!points.empty())
        plot_fewshot_curve(fs::path(out) / "fewshot.csv", fs::path(out) / "fewshot.png");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TLGAN document text localization toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    long long steps = 0;
    app.add_option("--config", config_path, "JSON config file")->configurable(false);
    auto* seed_opt = app.add_option("--seed", seed, "override training.seed");
    auto* steps_opt = app.add_option("--steps", steps, "override training.total_steps");

    SynthArgs synth;
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic document dataset");
    cmd_synth->add_option("--out", synth.out, "output dataset directory")->required();
    cmd_synth->add_option("--docs", synth.docs, "number of documents")
        ->check(CLI::PositiveNumber);
    cmd_synth->add_option("--preset", synth.preset, "page style: receipt or desk");

    std::string data, out, ckpt, det, gt, from_images, maps_dir;
    auto* cmd_maps = app.add_subcommand("maps", "preprocess a dataset and render target maps");
    cmd_maps->add_option("--data", data, "dataset directory")->required();
    cmd_maps->add_option("--out", out, "output directory")->required();

    auto* cmd_train = app.add_subcommand("train", "train the localization networks");
    cmd_train->add_option("--data", data, "dataset directory")->required();
    cmd_train->add_option("--out", out, "run output directory")->required();

    auto* cmd_infer = app.add_subcommand("infer", "predict maps for a directory of images");
    cmd_infer->add_option("--data", data, "image or dataset directory")->required();
    cmd_infer->add_option("--ckpt", ckpt, "checkpoint file")->required();
    cmd_infer->add_option("--out", out, "output directory")->required();

    auto* cmd_localize = app.add_subcommand("localize", "turn predicted maps into boxes");
    cmd_localize->add_option("--maps", maps_dir, "directory of .pred.png maps")->required();
    cmd_localize->add_option("--out", out, "detections JSON file")->required();

    auto* cmd_eval = app.add_subcommand("eval", "score detections against ground truth");
    cmd_eval->add_option("--det", det, "detections JSON file");
    cmd_eval->add_option("--gt", gt, "ground-truth dataset directory");
    cmd_eval->add_option("--from-images", from_images,
                         "dataset directory: run inference and scoring in one go");
    cmd_eval->add_option("--ckpt", ckpt, "checkpoint (with --from-images)");
    cmd_eval->add_option("--out", out, "also write the report as JSON");

    std::vector<int> n_values{1, 5};
    auto* cmd_fewshot = app.add_subcommand("fewshot", "train on nested document subsets");
    cmd_fewshot->add_option("--data", data, "document pool dataset")->required();
    cmd_fewshot->add_option("--out", out, "experiment output directory")->required();
    cmd_fewshot->add_option("--n-values", n_values, "subset sizes, e.g. --n-values 1 5");

    std::string loss_csv, fewshot_csv;
    auto* cmd_plot = app.add_subcommand("plot", "chart a loss log or few-shot csv");
    cmd_plot->add_option("--loss", loss_csv, "loss_log.csv to chart");
    cmd_plot->add_option("--fewshot", fewshot_csv, "fewshot.csv to chart");
    cmd_plot->add_option("--out", out, "output PNG")->required();

    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        RunConfig cfg = finish_config(config_path, seed_opt, seed, steps_opt, steps);
        if (app.got_subcommand(cmd_synth)) {
            synth.seed = cfg.train.seed;
            return run_synth(synth, cfg);
        }
        if (app.got_subcommand(cmd_maps)) return run_maps(data, out, cfg);
        if (app.got_subcommand(cmd_train)) return run_train(data, out, cfg);
        if (app.got_subcommand(cmd_infer)) return run_infer(data, ckpt, out, cfg);
        if (app.got_subcommand(cmd_localize)) return run_localize(maps_dir, out, cfg);
        if (app.got_subcommand(cmd_eval)) {
            if (from_images.empty() && (det.empty() || gt.empty()))
                throw std::invalid_argument("eval needs --det and --gt, or --from-images");
            if (!from_images.empty() && ckpt.empty())
                throw std::invalid_argument("eval --from-images needs --ckpt");
            return run_eval(det, gt, from_images, ckpt, out, cfg);
        }
        if (app.got_subcommand(cmd_fewshot)) return run_fewshot(data, out, n_values, cfg);
        if (app.got_subcommand(cmd_plot)) {
            if (loss_csv.empty() == fewshot_csv.empty())
                throw std::invalid_argument("plot needs exactly one of --loss or --fewshot");
            if (!loss_csv.empty())
                plot_loss_curves(loss_csv, out);
            else
                plot_fewshot_curve(fewshot_csv, out);
            return 0;
        }
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical abort: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
