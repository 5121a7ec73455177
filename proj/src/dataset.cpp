#include "tlgan/dataset.hpp"

#include "tlgan/geometry.hpp"
#include "tlgan/image_io.hpp"
#include "tlgan/log.hpp"
#include "tlgan/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <system_error>

namespace tlgan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw DataError("read failed for " + path.string());
    return text;
}

void write_text_file_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

double parse_coord(std::string_view field, std::size_t line_no) {
    field = trim(field);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw DataError("annotation line " + std::to_string(line_no) + ": bad coordinate '" +
                        std::string(field) + "'");
    return value;
}

void append_coord(std::string& out, double v) {
    char buf[32];
    std::to_chars_result res{};
    if (std::floor(v) == v && std::abs(v) < 9.0e15) {
        res = std::to_chars(buf, buf + sizeof(buf), static_cast<long long>(v));
    } else {
        res = std::to_chars(buf, buf + sizeof(buf), v);
    }
    out.append(buf, res.ptr);
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<AnnotationRecord> load_annotation_file(const fs::path& path) {
    try {
        return parse_annotation(read_text_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

template <class T>
std::uint64_t fnv1a_pod(const T& v, std::uint64_t h) {
    static_assert(std::is_trivially_copyable_v<T>);
    return fnv1a(&v, sizeof v, h);
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::vector<AnnotationRecord> parse_annotation(const std::string& text) {
    std::vector<AnnotationRecord> records;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        ++line_no;
        std::size_t eol = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (eol == std::string::npos ? text.size() : eol) - pos);
        pos = (eol == std::string::npos) ? text.size() : eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;

        double coords[8];
        std::string_view rest = line;
        for (int i = 0; i < 8; ++i) {
            std::size_t comma = rest.find(',');
            if (comma == std::string_view::npos)
                throw DataError("annotation line " + std::to_string(line_no) +
                                ": expected 8 comma-separated coordinates");
            coords[i] = parse_coord(rest.substr(0, comma), line_no);
            rest.remove_prefix(comma + 1);
        }

        AnnotationRecord rec;
        rec.quad = QuadBox(Vec2(coords[0], coords[1]), Vec2(coords[2], coords[3]),
                           Vec2(coords[4], coords[5]), Vec2(coords[6], coords[7]));
        if (rec.quad.signed_area() < 0.0) {
            auto c = rec.quad.corners;
            rec.quad = QuadBox(c[0], c[3], c[2], c[1]);
        }
        rec.transcript = std::string(rest);
        records.push_back(std::move(rec));
    }
    return records;
}

std::string serialize_annotations(const std::vector<AnnotationRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        for (const auto& corner : rec.quad.corners) {
            append_coord(out, corner.x());
            out += ',';
            append_coord(out, corner.y());
            out += ',';
        }
        out += rec.transcript;
        out += '\n';
    }
    return out;
}

std::vector<DocumentSample> load_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw DataError("dataset root not found: " + root.string());

    std::vector<DocumentSample> samples;
    auto add_sample = [&samples](const fs::path& image, const fs::path& annotation,
                                 const std::string& split) {
        DocumentSample s;
        s.image_path = image;
        s.annotation_path = annotation;
        s.split = split;
        s.stem = image.stem().string();
        s.annotations = load_annotation_file(annotation);
        samples.push_back(std::move(s));
    };

    const fs::path manifest = root / "manifest.json";
    const fs::path images_dir = root / "images";
    const fs::path annotations_dir = root / "annotations";

    if (fs::exists(manifest)) {
        json doc;
        try {
            doc = json::parse(read_text_file(manifest));
        } catch (const json::exception& e) {
            throw DataError(manifest.string() + ": " + e.what());
        }
        static const char* kExts[] = {".png", ".jpg", ".jpeg"};
        for (const char* split : {"train", "test"}) {
            if (!doc.contains(split)) continue;
            for (const auto& entry : doc.at(split)) {
                std::string stem = entry.get<std::string>();
                fs::path image;
                for (const char* ext : kExts) {
                    fs::path candidate = images_dir / (stem + ext);
                    if (fs::exists(candidate)) {
                        image = candidate;
                        break;
                    }
                }
                fs::path annotation = annotations_dir / (stem + ".txt");
                if (image.empty() || !fs::exists(annotation)) {
                    log_warning("dataset: skipping '" + stem + "' (missing image or annotation)");
                    continue;
                }
                add_sample(image, annotation, split);
            }
        }
    } else if (fs::is_directory(images_dir) && fs::is_directory(annotations_dir)) {
        for (const auto& entry : fs::directory_iterator(images_dir)) {
            if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
            fs::path annotation = annotations_dir / (entry.path().stem().string() + ".txt");
            if (!fs::exists(annotation)) {
                log_warning("dataset: skipping '" + entry.path().stem().string() +
                            "' (no annotation)");
                continue;
            }
            add_sample(entry.path(), annotation, "train");
        }
    } else {
        for (const auto& entry : fs::directory_iterator(root)) {
            if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
            fs::path annotation = entry.path();
            annotation.replace_extension(".txt");
            if (!fs::exists(annotation)) {
                log_warning("dataset: skipping '" + entry.path().stem().string() +
                            "' (no annotation)");
                continue;
            }
            add_sample(entry.path(), annotation, "train");
        }
    }

    std::sort(samples.begin(), samples.end(), [](const DocumentSample& a, const DocumentSample& b) {
        return std::tie(a.stem, a.split) < std::tie(b.stem, b.split);
    });
    return samples;
}

namespace {

struct SynthRng {
    std::mt19937_64 engine;
    bool have_spare = false;
    double spare = 0.0;

    explicit SynthRng(std::uint64_t seed) : engine(seed) {}

    double unit() { return (engine() >> 11) * (1.0 / 9007199254740992.0); }

    int uniform(int lo, int hi) {
        return lo + static_cast<int>(engine() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // Box-Muller, hand rolled so the byte stream does not depend on the
    // standard library's distribution implementations.
    double gaussian() {
        if (have_spare) {
            have_spare = false;
            return spare;
        }
        double u1 = unit();
        while (u1 <= 0.0) u1 = unit();
        double u2 = unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476 * u2;
        spare = r * std::sin(a);
        have_spare = true;
        return r * std::cos(a);
    }
};

void draw_word_glyphs(RasterImage& img, int x, int y, int w, int h, const SyntheticDocSpec& spec,
                      SynthRng& rng) {
    auto clamp_row = [&](int row) { return std::clamp(row, y + 1, y + h - 2); };

    // Vertical bars every few pixels stand in for letter stems.
    for (int xs = x + 1; xs < x + w - 1; xs += rng.uniform(3, 4)) {
        int ink = rng.uniform(spec.min_ink, spec.max_ink);
        int top = clamp_row(y + 1 + rng.uniform(0, 1));
        for (int yy = top; yy <= y + h - 2; ++yy)
            img.at8(yy, xs) = static_cast<std::uint8_t>(ink);
    }

    // Dashed mid-height stroke ties the stems together.
    int row = clamp_row(y + h / 2 + rng.uniform(-1, 1));
    int ink = rng.uniform(spec.min_ink, spec.max_ink);
    for (int xx = x + 1; xx < x + w - 1; ++xx)
        if ((xx - x) % 2 == 0) img.at8(row, xx) = static_cast<std::uint8_t>(ink);

    // One diagonal for variety.
    int span = std::min(w - 2, h - 2);
    if (span > 0) {
        int ink2 = rng.uniform(spec.min_ink, spec.max_ink);
        int xo = x + 1 + rng.uniform(0, std::max(0, w - 2 - span));
        for (int i = 0; i < span; ++i)
            img.at8(clamp_row(y + 1 + i), xo + i) = static_cast<std::uint8_t>(ink2);
    }
}

}  // namespace

SynthDoc synth_document(const SyntheticDocSpec& spec) {
    if (spec.width < 1 || spec.height < 1)
        throw std::invalid_argument("synth_document: non-positive page size");
    if (spec.num_lines < 0) throw std::invalid_argument("synth_document: negative line count");
    if (spec.min_word_height < 3 || spec.min_word_height > spec.max_word_height ||
        spec.min_word_width < 3 || spec.min_word_width > spec.max_word_width ||
        spec.min_gap < 1 || spec.min_gap > spec.max_gap)
        throw std::invalid_argument("synth_document: bad word geometry ranges");
    if (spec.min_ink < 0 || spec.max_ink > 255 || spec.min_ink > spec.max_ink ||
        spec.background < 0 || spec.background > 255)
        throw std::invalid_argument("synth_document: intensities outside [0,255]");
    const int usable_w = spec.width - 2 * spec.margin;
    const int usable_h = spec.height - 2 * spec.margin;
    if (spec.num_lines > 0 && (usable_w < spec.min_word_width || usable_h < spec.min_word_height))
        throw std::invalid_argument("synth_document: page too small for the requested words");

    SynthRng rng(spec.seed);
    SynthDoc doc;
    doc.image = RasterImage::u8(spec.height, spec.width, 1);
    for (auto& b : doc.image.bytes) {
        double v = spec.background + spec.noise_sigma * rng.gaussian();
        b = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }

    int y = spec.margin;
    for (int line = 0; line < spec.num_lines; ++line) {
        int h = rng.uniform(spec.min_word_height, spec.max_word_height);
        if (y + h > spec.height - spec.margin) break;
        int x = spec.margin;
        while (true) {
            int avail = spec.width - spec.margin - x;
            if (avail < spec.min_word_width) break;
            int w = rng.uniform(spec.min_word_width, std::min(spec.max_word_width, avail));
            draw_word_glyphs(doc.image, x, y, w, h, spec, rng);
            doc.boxes.push_back(QuadBox::rect(x, y, x + w, y + h));
            x += w + rng.uniform(spec.min_gap, spec.max_gap);
        }
        y += h + rng.uniform(spec.min_gap, spec.max_gap);
    }
    return doc;
}

namespace {

std::uint64_t pair_cache_key(const DocumentSample& sample, const PairParams& params,
                             std::uintmax_t file_size) {
    std::uint64_t h = 14695981039346656037ull;
    h = fnv1a_pod(params.preprocess.short_axis_target, h);
    h = fnv1a_pod(params.preprocess.lo_frac, h);
    h = fnv1a_pod(params.preprocess.hi_frac, h);
    h = fnv1a_pod(params.preprocess.profile_frac, h);
    h = fnv1a_pod(params.map_scale, h);
    h = fnv1a_pod(params.sigma_ratio, h);
    std::string ann = serialize_annotations(sample.annotations);
    h = fnv1a(ann.data(), ann.size(), h);
    h = fnv1a_pod(file_size, h);
    return h;
}

bool try_load_cached_pair(const fs::path& image_path, const fs::path& map_path,
                          const fs::path& meta_path, TrainingPair& out) {
    std::error_code ec;
    if (!fs::exists(image_path, ec) || !fs::exists(map_path, ec) || !fs::exists(meta_path, ec))
        return false;
    try {
        json meta = json::parse(read_text_file(meta_path));
        out.image = load_image(image_path.string());
        out.map = heatmap_from_u8(load_image(map_path.string()), meta.at("map_scale").get<float>());
        out.scale_x = meta.at("scale_x").get<double>();
        out.scale_y = meta.at("scale_y").get<double>();
        return true;
    } catch (const std::exception& e) {
        log_warning("dataset: discarding unreadable cache entry " + image_path.string() + " (" +
                    e.what() + ")");
        return false;
    }
}

void save_png_atomic(const RasterImage& img, const fs::path& path) {
    fs::path tmp = path;
    tmp += ".tmp";
    save_png(img, tmp.string());
    fs::rename(tmp, path);
}

}  // namespace

std::vector<TrainingPair> build_training_pairs(const std::vector<DocumentSample>& samples,
                                               const PairParams& params,
                                               const fs::path& cache_dir) {
    std::vector<TrainingPair> pairs;
    pairs.reserve(samples.size());
    if (!cache_dir.empty()) fs::create_directories(cache_dir);

    for (const auto& sample : samples) {
        std::error_code ec;
        std::uintmax_t size = fs::file_size(sample.image_path, ec);
        if (ec) {
            log_warning("dataset: skipping unreadable image " + sample.image_path.string());
            continue;
        }
        const std::string key = sample.stem + "-" + hex16(pair_cache_key(sample, params, size));
        const fs::path cached_image = cache_dir / (key + ".image.png");
        const fs::path cached_map = cache_dir / (key + ".map.png");
        const fs::path cached_meta = cache_dir / (key + ".meta.json");

        TrainingPair pair;
        pair.stem = sample.stem;
        if (!cache_dir.empty() &&
            try_load_cached_pair(cached_image, cached_map, cached_meta, pair)) {
            pairs.push_back(std::move(pair));
            continue;
        }

        RasterImage raw;
        try {
            raw = load_image(sample.image_path.string());
        } catch (const DataError& e) {
            log_warning("dataset: skipping " + sample.image_path.string() + " (" + e.what() + ")");
            continue;
        }
        PreprocessResult pre = preprocess(raw, params.preprocess);

        std::vector<QuadBox> quads;
        quads.reserve(sample.annotations.size());
        bool clipped = false;
        for (const auto& rec : sample.annotations) {
            QuadBox q = rec.quad;
            for (auto& c : q.corners) {
                double x = c.x() * pre.scale_x;
                double y = c.y() * pre.scale_y;
                double cx = std::clamp(x, 0.0, static_cast<double>(pre.image.width));
                double cy = std::clamp(y, 0.0, static_cast<double>(pre.image.height));
                if (std::abs(cx - x) > 1e-9 || std::abs(cy - y) > 1e-9) clipped = true;
                c = Vec2(cx, cy);
            }
            quads.push_back(q);
        }
        if (clipped)
            log_warning("dataset: " + sample.stem + " has annotations outside the image, clipped");

        HeatMap map = render_map(pre.image.width, pre.image.height, quads, params.map_scale,
                                 params.sigma_ratio);
        // Quantize through the 8-bit cache format unconditionally so fresh
        // and cached pairs are bit-identical.
        RasterImage map8 = heatmap_to_u8(map);
        pair.image = std::move(pre.image);
        pair.map = heatmap_from_u8(map8, static_cast<float>(params.map_scale));
        pair.scale_x = pre.scale_x;
        pair.scale_y = pre.scale_y;

        if (!cache_dir.empty()) {
            save_png_atomic(pair.image, cached_image);
            save_png_atomic(map8, cached_map);
            json meta;
            meta["stem"] = sample.stem;
            meta["scale_x"] = pair.scale_x;
            meta["scale_y"] = pair.scale_y;
            meta["map_scale"] = params.map_scale;
            write_text_file_atomic(cached_meta, meta.dump(2) + "\n");
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::vector<nn::TrainingCrop> build_crop_pool(const std::vector<TrainingPair>& pairs, int crop,
                                              int crops_per_image, std::uint64_t seed) {
    if (crop < 1) throw std::invalid_argument("build_crop_pool: crop must be positive");
    if (crops_per_image < 0) throw std::invalid_argument("build_crop_pool: negative crop count");
    std::mt19937_64 master(seed);
    std::vector<nn::TrainingCrop> pool;
    pool.reserve(pairs.size() * static_cast<std::size_t>(crops_per_image));
    for (const auto& pair : pairs) {
        for (int c = 0; c < crops_per_image; ++c) {
            CropPair cp = random_crop_pair(pair.image, pair.map, crop, master());
            pool.push_back(nn::TrainingCrop{std::move(cp.image), std::move(cp.map)});
        }
    }
    return pool;
}

}  // namespace tlgan
