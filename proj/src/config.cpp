#include "tlgan/config.hpp"

#include <json.hpp>

#include <fstream>
#include <utility>

namespace tlgan {

using nlohmann::json;

namespace {

/// Wraps one JSON object and checks off keys as they are consumed, so
/// whatever remains at the end is by definition unknown.
class Section {
public:
    Section(json obj, std::string name) : obj_(std::move(obj)), name_(std::move(name)) {
        if (!obj_.is_object())
            throw DataError("config: section '" + name_ + "' must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw DataError("config: bad value for '" + name_ + "." + key + "'");
        }
        obj_.erase(it);
    }

    json take(const char* key) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return json::object();
        json sub = *it;
        obj_.erase(it);
        return sub;
    }

    void finish() const {
        if (!obj_.empty())
            throw DataError("config: unknown key '" + obj_.begin().key() + "' in section '" +
                            name_ + "'");
    }

private:
    json obj_;
    std::string name_;
};

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DataError(std::string("config: ") + e.what());
    }

    RunConfig cfg;
    Section top(doc, "<top>");

    {
        Section s(top.take("preprocess"), "preprocess");
        s.get("short_axis_target", cfg.preprocess.short_axis_target);
        s.get("lo_frac", cfg.preprocess.lo_frac);
        s.get("hi_frac", cfg.preprocess.hi_frac);
        s.get("profile_frac", cfg.preprocess.profile_frac);
        s.finish();
        cfg.pairs.preprocess = cfg.preprocess;
    }
    {
        Section s(top.take("map"), "map");
        s.get("scale", cfg.pairs.map_scale);
        s.get("sigma_ratio", cfg.pairs.sigma_ratio);
        s.finish();
    }
    {
        Section network(top.take("network"), "network");
        {
            Section s(network.take("generator"), "network.generator");
            s.get("base_channels", cfg.gen.base_channels);
            s.get("num_res_blocks", cfg.gen.num_res_blocks);
            s.get("head_kernel", cfg.gen.head_kernel);
            s.get("block_kernel", cfg.gen.block_kernel);
            s.get("stride", cfg.gen.stride);
            s.get("expand_channels", cfg.gen.expand_channels);
            s.finish();
        }
        {
            Section s(network.take("discriminator"), "network.discriminator");
            s.get("ladder", cfg.dis.ladder);
            s.get("kernel", cfg.dis.kernel);
            s.get("leaky_slope", cfg.dis.leaky_slope);
            s.get("dense_hidden", cfg.dis.dense_hidden);
            s.get("min_input", cfg.dis.min_input);
            s.finish();
        }
        network.finish();
    }
    {
        Section s(top.take("training"), "training");
        s.get("batch_size", cfg.train.batch_size);
        s.get("total_steps", cfg.train.total_steps);
        s.get("crop", cfg.train.crop);
        s.get("crops_per_image", cfg.train.crops_per_image);
        s.get("checkpoint_every", cfg.train.checkpoint_every);
        s.get("log_every", cfg.train.log_every);
        s.get("seed", cfg.train.seed);
        s.get("learning_rate", cfg.adam.lr);
        s.get("beta1", cfg.adam.beta1);
        s.get("beta2", cfg.adam.beta2);
        s.get("epsilon", cfg.adam.eps);
        s.get("content_weight", cfg.weights.q);
        s.get("feature_weight", cfg.weights.r);
        s.get("adversarial_weight", cfg.weights.adv);
        s.finish();
    }
    {
        Section s(top.take("postprocess"), "postprocess");
        s.get("threshold", cfg.post.threshold);
        s.get("dilation_kw", cfg.post.dilation_kw);
        s.get("dilation_kh", cfg.post.dilation_kh);
        s.get("dilation_iters", cfg.post.dilation_iters);
        s.get("min_box_area_px", cfg.post.min_box_area_px);
        s.finish();
    }
    {
        Section s(top.take("eval"), "eval");
        s.get("iou_threshold", cfg.match.iou_threshold);
        s.finish();
    }
    {
        Section s(top.take("paths"), "paths");
        s.get("feature_weights", cfg.phi.weights_path);
        s.get("cache_dir", cfg.cache_dir);
        s.finish();
    }
    top.finish();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

std::string dump_run_config(const RunConfig& cfg) {
    json doc;
    doc["preprocess"] = {{"short_axis_target", cfg.preprocess.short_axis_target},
                         {"lo_frac", cfg.preprocess.lo_frac},
                         {"hi_frac", cfg.preprocess.hi_frac},
                         {"profile_frac", cfg.preprocess.profile_frac}};
    doc["map"] = {{"scale", cfg.pairs.map_scale}, {"sigma_ratio", cfg.pairs.sigma_ratio}};
    doc["network"] = {{"generator",
                       {{"base_channels", cfg.gen.base_channels},
                        {"num_res_blocks", cfg.gen.num_res_blocks},
                        {"head_kernel", cfg.gen.head_kernel},
                        {"block_kernel", cfg.gen.block_kernel},
                        {"stride", cfg.gen.stride},
                        {"expand_channels", cfg.gen.expand_channels}}},
                      {"discriminator",
                       {{"ladder", cfg.dis.ladder},
                        {"kernel", cfg.dis.kernel},
                        {"leaky_slope", cfg.dis.leaky_slope},
                        {"dense_hidden", cfg.dis.dense_hidden},
                        {"min_input", cfg.dis.min_input}}}};
    doc["training"] = {{"batch_size", cfg.train.batch_size},
                       {"total_steps", cfg.train.total_steps},
                       {"crop", cfg.train.crop},
                       {"crops_per_image", cfg.train.crops_per_image},
                       {"checkpoint_every", cfg.train.checkpoint_every},
                       {"log_every", cfg.train.log_every},
                       {"seed", cfg.train.seed},
                       {"learning_rate", cfg.adam.lr},
                       {"beta1", cfg.adam.beta1},
                       {"beta2", cfg.adam.beta2},
                       {"epsilon", cfg.adam.eps},
                       {"content_weight", cfg.weights.q},
                       {"feature_weight", cfg.weights.r},
                       {"adversarial_weight", cfg.weights.adv}};
    doc["postprocess"] = {{"threshold", cfg.post.threshold},
                          {"dilation_kw", cfg.post.dilation_kw},
                          {"dilation_kh", cfg.post.dilation_kh},
                          {"dilation_iters", cfg.post.dilation_iters},
                          {"min_box_area_px", cfg.post.min_box_area_px}};
    doc["eval"] = {{"iou_threshold", cfg.match.iou_threshold}};
    doc["paths"] = {{"feature_weights", cfg.phi.weights_path}, {"cache_dir", cfg.cache_dir}};
    return doc.dump(2) + "\n";
}

std::uint64_t config_hash(const RunConfig& cfg) {
    const std::string text = dump_run_config(cfg);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace tlgan
