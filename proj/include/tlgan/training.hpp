#pragma once

#include "tlgan/image.hpp"
#include "tlgan/log.hpp"
#include "tlgan/nn/checkpoint.hpp"
#include "tlgan/nn/convert.hpp"
#include "tlgan/nn/losses.hpp"
#include "tlgan/nn/networks.hpp"
#include "tlgan/nn/optim.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace tlgan::nn {

struct TrainRunConfig {
    int batch_size = 8;
    std::int64_t total_steps = 120000;
    int crop = 128;
    int crops_per_image = 100;
    std::int64_t checkpoint_every = 10000;
    std::int64_t log_every = 100;
    std::uint64_t seed = 0;
};

/// Everything that evolves over a run: both networks, the frozen feature
/// extractor, their optimizers, the sampling rng, and the step counter.
/// Optimizers hold pointers into the networks, so the state is pinned in
/// place once constructed.
template <class S>
class TrainState {
public:
    TrainState(const GeneratorConfig& gcfg, const DiscriminatorConfig& dcfg,
               const FeatureNetConfig& pcfg, const AdamConfig& ocfg, std::uint64_t seed)
        : g(gcfg, seed),
          d(dcfg, seed + 1),
          phi(pcfg),
          g_params(g.params()),
          d_params(d.params()),
          opt_g(ocfg, g_params),
          opt_d(ocfg, d_params),
          rng(seed) {}

    TrainState(const TrainState&) = delete;
    TrainState& operator=(const TrainState&) = delete;

    Generator<S> g;
    Discriminator<S> d;
    FeatureNet<S> phi;
    std::vector<ParamRef<S>> g_params;
    std::vector<ParamRef<S>> d_params;
    Adam<S> opt_g;
    Adam<S> opt_d;
    std::mt19937_64 rng;
    std::uint64_t step = 0;
};

struct StepLosses {
    double d_loss = 0.0;
    double g_adv = 0.0;
    double content = 0.0;
    double feature = 0.0;

    double g_total(const LossWeights& w) const {
        return w.q * content + w.r * feature + w.adv * g_adv;
    }
    bool finite() const {
        return std::isfinite(d_loss) && std::isfinite(g_adv) && std::isfinite(content) &&
               std::isfinite(feature);
    }
};

/// One alternation: a discriminator update on real targets and detached
/// generator outputs, then a generator update on the composite objective.
/// Inputs are image crops in [0,1] and target maps in [-1,1], both as
/// 3-channel batches.
template <class S>
StepLosses train_step(TrainState<S>& st, const FeatureMap<S>& x, const FeatureMap<S>& t,
                      const LossWeights& w, Workspace<S>& ws) {
    if (x.channels() != 3 || t.channels() != 3 || t.batch != x.batch)
        throw std::invalid_argument("train_step: malformed batch");

    StepLosses losses;

    // Generator forward (training mode caches the graph for its update).
    FeatureMap<S> fake = st.g.forward(x, ws, true);

    // Discriminator update on real and detached fake maps.
    zero_grads(st.d_params);
    FeatureMap<S> s_real = st.d.forward(t, ws, true);
    FeatureMap<S> dz = s_real;
    dz.data = (s_real.data.array() - S(1)).matrix() / static_cast<S>(s_real.data.size());
    st.d.backward(dz, ws, true, false);
    FeatureMap<S> s_fake = st.d.forward(fake, ws, true);
    dz = s_fake;
    dz.data = s_fake.data / static_cast<S>(s_fake.data.size());
    st.d.backward(dz, ws, true, false);
    const AdversarialParts adv_now = adversarial_losses(s_real, s_fake);
    losses.d_loss = adv_now.d_loss;
    st.opt_d.step();

    // Generator update: content + feature + adversarial through the
    // updated discriminator.
    zero_grads(st.g_params);
    const double numel = static_cast<double>(fake.data.size());
    losses.content = mean_squared_error(fake, t);
    FeatureMap<S> dfake = fake;
    dfake.data = (fake.data - t.data) * static_cast<S>(2.0 * w.q / numel);

    if (w.r != 0.0) {
        FeatureMap<S> ft = st.phi.forward(t, ws, false);
        FeatureMap<S> fp = st.phi.forward(fake, ws, true);
        losses.feature = mean_squared_error(fp, ft);
        FeatureMap<S> gf = fp;
        const double fnumel = static_cast<double>(fp.data.size());
        gf.data = (fp.data - ft.data) * static_cast<S>(2.0 * w.r / fnumel);
        FeatureMap<S> dff = st.phi.backward_input(gf, ws);
        dfake.data += dff.data;
    }

    if (w.adv != 0.0) {
        FeatureMap<S> s2 = st.d.forward(fake, ws, true);
        losses.g_adv =
            -s2.data.array().template cast<double>().max(1e-7).min(1.0 - 1e-7).log().mean();
        FeatureMap<S> dz2 = s2;
        dz2.data = (s2.data.array() - S(1)).matrix() *
                   static_cast<S>(w.adv / static_cast<double>(s2.data.size()));
        FeatureMap<S> dadv = st.d.backward(dz2, ws, false, true);
        dfake.data += dadv.data;
    } else {
        losses.g_adv = adv_now.g_adv;
    }

    st.g.backward(dfake, ws);
    st.opt_g.step();
    ++st.step;

    if (!losses.finite()) {
        std::ostringstream msg;
        msg << "train_step: non-finite loss at step " << st.step << " (d=" << losses.d_loss
            << " g_adv=" << losses.g_adv << " content=" << losses.content
            << " feature=" << losses.feature << ")";
        throw NumericalError(msg.str());
    }
    return losses;
}

// -------- checkpointing --------

template <class S>
void save_checkpoint(const std::filesystem::path& path, TrainState<S>& st,
                     const nlohmann::json& extra = nlohmann::json::object()) {
    CheckpointWriter wr;
    wr.meta["format"] = "tlgan-train-state";
    wr.meta["step"] = st.step;
    std::ostringstream rngss;
    rngss << st.rng;
    wr.meta["rng"] = rngss.str();
    wr.meta["opt_g_t"] = st.opt_g.t();
    wr.meta["opt_d_t"] = st.opt_d.t();
    wr.meta["extra"] = extra;
    for (const auto& p : st.g_params) wr.add(p.name, p.value, p.size);
    for (const auto& p : st.d_params) wr.add(p.name, p.value, p.size);
    wr.add("opt_g.m", st.opt_g.moment1().data(), st.opt_g.moment1().size());
    wr.add("opt_g.v", st.opt_g.moment2().data(), st.opt_g.moment2().size());
    wr.add("opt_d.m", st.opt_d.moment1().data(), st.opt_d.moment1().size());
    wr.add("opt_d.v", st.opt_d.moment2().data(), st.opt_d.moment2().size());
    wr.write(path);
}

template <class S>
void load_checkpoint(const std::filesystem::path& path, TrainState<S>& st) {
    CheckpointReader rd(path);
    if (rd.meta().value("format", "") != "tlgan-train-state")
        throw DataError("checkpoint: not a train-state archive: " + path.string());
    for (const auto& p : st.g_params) rd.read(p.name, p.value, p.size);
    for (const auto& p : st.d_params) rd.read(p.name, p.value, p.size);
    rd.read("opt_g.m", st.opt_g.moment1().data(), st.opt_g.moment1().size());
    rd.read("opt_g.v", st.opt_g.moment2().data(), st.opt_g.moment2().size());
    rd.read("opt_d.m", st.opt_d.moment1().data(), st.opt_d.moment1().size());
    rd.read("opt_d.v", st.opt_d.moment2().data(), st.opt_d.moment2().size());
    st.step = rd.meta().at("step").get<std::uint64_t>();
    st.opt_g.set_t(rd.meta().at("opt_g_t").get<std::uint64_t>());
    st.opt_d.set_t(rd.meta().at("opt_d_t").get<std::uint64_t>());
    std::istringstream rngss(rd.meta().at("rng").get<std::string>());
    rngss >> st.rng;
    if (!rngss) throw DataError("checkpoint: corrupt rng state in " + path.string());
}

// -------- the run loop --------

/// One materialized crop: an image patch and its aligned target map.
struct TrainingCrop {
    RasterImage image;  // crop x crop, 8-bit gray
    HeatMap map;        // crop * scale square, values in [0,1]
};

/// Externally visible stop request (the CLI's SIGINT handler sets it);
/// the loop finishes the current step, writes a checkpoint, and returns.
inline std::atomic<bool>& stop_requested() {
    static std::atomic<bool> flag{false};
    return flag;
}

namespace detail {
inline void append_loss_row(std::ofstream& csv, std::uint64_t step, const StepLosses& l) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<unsigned long long>(step), l.d_loss, l.g_adv, l.content, l.feature);
    csv << buf;
}
}  // namespace detail

/// Runs (or resumes) training over a pre-generated crop pool, sampling
/// batches uniformly. Writes `loss_log.csv`, periodic `ckpt_<step>` files
/// and a final `ckpt_last` into out_dir. On a non-finite loss a
/// diagnostic checkpoint is written and the error rethrown.
template <class S>
StepLosses train_loop(const TrainRunConfig& cfg, const std::vector<TrainingCrop>& pool,
                      TrainState<S>& st, const LossWeights& w,
                      const std::filesystem::path& out_dir) {
    if (cfg.batch_size < 1) throw std::invalid_argument("train_loop: batch_size must be >= 1");
    if (cfg.total_steps < 0) throw std::invalid_argument("train_loop: negative total_steps");
    if (pool.empty() && cfg.total_steps > 0)
        throw std::invalid_argument("train_loop: empty crop pool");
    std::filesystem::create_directories(out_dir);

    const std::filesystem::path csv_path = out_dir / "loss_log.csv";
    std::ofstream csv;
    if (st.step == 0 || !std::filesystem::exists(csv_path)) {
        csv.open(csv_path, std::ios::trunc);
        csv << "step,d_loss,g_adv,content,feature\n";
    } else {
        csv.open(csv_path, std::ios::app);
    }

    Workspace<S> ws;
    StepLosses last;
    std::vector<RasterImage> images(static_cast<std::size_t>(cfg.batch_size));
    std::vector<HeatMap> maps(static_cast<std::size_t>(cfg.batch_size));

    while (st.step < static_cast<std::uint64_t>(cfg.total_steps)) {
        for (int b = 0; b < cfg.batch_size; ++b) {
            const std::size_t i = static_cast<std::size_t>(st.rng() % pool.size());
            images[static_cast<std::size_t>(b)] = pool[i].image;
            maps[static_cast<std::size_t>(b)] = pool[i].map;
        }
        FeatureMap<S> x = images_to_input<S>(images);
        FeatureMap<S> t = maps_to_target<S>(maps);

        try {
            last = train_step(st, x, t, w, ws);
        } catch (const NumericalError&) {
            save_checkpoint(out_dir / ("diagnostic_" + std::to_string(st.step)), st);
            throw;
        }

        if (cfg.log_every > 0 &&
            (st.step % static_cast<std::uint64_t>(cfg.log_every) == 0 || st.step == 1)) {
            detail::append_loss_row(csv, st.step, last);
            csv.flush();
        }
        if (cfg.checkpoint_every > 0 &&
            st.step % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0 &&
            st.step < static_cast<std::uint64_t>(cfg.total_steps))
            save_checkpoint(out_dir / ("ckpt_" + std::to_string(st.step)), st);
        if (stop_requested().load()) break;
    }

    save_checkpoint(out_dir / "ckpt_last", st);
    return last;
}

}  // namespace tlgan::nn
