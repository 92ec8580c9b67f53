#pragma once

#include <map>
#include <string>

#include "wegpipe/explain.hpp"
#include "wegpipe/label.hpp"
#include "wegpipe/metrics.hpp"
#include "wegpipe/synth.hpp"
#include "wegpipe/train.hpp"
#include "wegpipe/vit.hpp"

namespace wegpipe {

// One configuration document drives every stage; each CLI flag overrides
// its JSON counterpart. All stages are deterministic in (config, seed) and
// communicate only through the documented file formats.
struct PipelineConfig {
    std::string dataset_dir;
    std::string weights_prefix;
    std::string out_dir;
    std::string pred_dir;
    std::string gt_dir;
    std::string out_file;

    ViTConfig vit;
    TrainConfig train;
    SynthConfig synth;
    int64_t gen_count = 100;

    std::string explainer = "dtd"; // dtd | rollout | cam
    std::string blocks = "last";   // "last" | "all" | comma-separated indices
    bool positive_clamp = true;
    double soft_rate = 0.55;
    EpomConfig epom;
    bool use_epom = true;
    bool use_saliency = true;
    bool multi_scale = false;
    int64_t long_side = 0; // 0 keeps the native resolution
    uint64_t seed = 1;
};

PipelineConfig load_pipeline_config(const std::string& path);
std::vector<int64_t> parse_block_set(const std::string& spec, int64_t num_blocks);

// Full per-image pipeline: explain each present class, normalize, upsample
// to the sample's resolution, soft-erase, assemble the initial label and
// apply the EPOM refinement (subject to the config toggles).
PseudoLabel generate_pseudo_label(const ViTModel& model, const Sample& sample, const PipelineConfig& cfg,
                                  const std::string& explainer, RefinedMaps* maps_out = nullptr,
                                  std::map<int64_t, double>* thresholds_out = nullptr);

int cmd_gen_data(const PipelineConfig& cfg);
int cmd_train(const PipelineConfig& cfg);
int cmd_pseudo_label(const PipelineConfig& cfg);
int cmd_eval(const PipelineConfig& cfg);
int cmd_compare(const PipelineConfig& cfg);

int run_cli(int argc, const char* const* argv);

} // namespace wegpipe
