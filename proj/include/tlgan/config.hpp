#pragma once

#include "tlgan/dataset.hpp"
#include "tlgan/evaluation.hpp"
#include "tlgan/imaging.hpp"
#include "tlgan/training.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace tlgan {

/// Every knob of a run in one place. Defaults reproduce the full-scale
/// SROIE recipe; config files override fields selectively.
struct RunConfig {
    PreprocessParams preprocess;
    PairParams pairs;  // map scale and sigma ratio; shares preprocess above
    nn::GeneratorConfig gen;
    nn::DiscriminatorConfig dis;
    nn::FeatureNetConfig phi;
    nn::TrainRunConfig train;
    nn::AdamConfig adam;
    nn::LossWeights weights;
    PostprocessParams post;
    MatchParams match;
    std::string cache_dir;
};

/// Parse a JSON config. Missing keys keep their defaults; unknown keys
/// and ill-typed values raise DataError naming the offender, so typos
/// fail fast instead of silently running the defaults.
RunConfig parse_run_config(const std::string& json_text);

RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON echo of a fully resolved config (every field present,
/// keys sorted). Written into run output directories.
std::string dump_run_config(const RunConfig& cfg);

/// Stable hash of the resolved config, for run manifests.
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace tlgan
