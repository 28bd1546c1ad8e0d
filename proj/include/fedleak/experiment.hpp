#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedleak/craft.hpp"
#include "fedleak/data.hpp"
#include "fedleak/metrics.hpp"
#include "fedleak/model.hpp"
#include "fedleak/reconstruct.hpp"
#include "fedleak/round.hpp"

namespace fedleak {

struct DatasetSpec {
    std::string type;  // synthetic | idx | image_dir | text_corpus | synthetic_text
    // synthetic images
    std::size_t count = 2000;
    std::size_t side = 28;
    std::size_t classes = 2;
    // idx
    std::string images;
    std::string labels;
    bool normalize = true;
    // image_dir / text_corpus
    std::string path;
    // text
    std::size_t max_len = 32;
    std::size_t embed_dim = 16;
    std::size_t vocab = 500;
    std::size_t avg_words = 24;
};

/// How the victim's m-sample training batch is drawn from its pool:
///   random        -- uniform sample (multinomial bin occupancy);
///   spread        -- evenly spaced brightness ranks;
///   distinct_bins -- bin-aware pick maximizing singly-occupied bins, the
///                    capacity-probing composition (falls back to spreading
///                    leftovers when the pool cannot fill m distinct bins).
enum class VictimBatchMode { random, spread, distinct_bins };

struct ExperimentConfig {
    Modality modality = Modality::image;
    DatasetSpec dataset;
    std::size_t n_clients = 5;
    std::size_t victim = 0;
    std::size_t k = 64;
    std::size_t local_epochs = 5;
    double lr = 0.01;
    std::size_t batch_size = 0;  // SGD minibatch, 0 = full batch
    double aux_fraction = 0.1;
    std::size_t batch = 32;  // victim sample count m (honest pools trimmed to the same size)
    std::uint64_t seed = 1;
    MatchThresholds thresholds;
    double codec_scale = 1048576.0;  // 2^20
    double codec_clip = 0.0;         // 0 -> 2^30/scale
    VictimBatchMode victim_batch = VictimBatchMode::random;
    double w2_row_scale = 0.0;  // 0 -> 1.0 for images, 1/k for text
    std::size_t head_hidden = 64;
    std::string head_init = "attack_tuned";  // or "random"
    double head_beta = 0.5;
    double head_target_sat = 1.0;
    bool exclude_top_bin = false;
    // Pad the auxiliary CDF with the feature's known upper bound so the
    // zero-gradient silencing covers every possible input.
    bool aux_include_bound = true;
    int victim_class_filter = -1;  // -1 = none
    std::map<std::string, std::vector<double>> sweep;
    std::string out_dir = "runs";
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json resolved_json(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

struct ExperimentOutcome {
    ExperimentConfig config;
    BinVector bins;
    CraftedModule victim_module;
    AttackerView view;
    RoundTranscript transcript;
    RecoveredBatch recovered;
    TextRecoveryOutput text_out;
    MatchResult match;
    std::vector<ImageSample> truth_images;
    std::vector<TextRecord> truth_texts;
    std::optional<Matrix> embedding;
    Vocabulary vocab;
    std::size_t side = 0;  // image side length (square images)
    std::vector<std::string> warnings;
    double round_ms = 0.0;
    double reconstruct_ms = 0.0;
    double metrics_ms = 0.0;
    double total_ms = 0.0;

    nlohmann::json summary() const;
};

/// Full pipeline: dataset -> split -> craft -> round -> reconstruct -> metrics.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// Writes summary.json, pairs.csv, transcript.json, the aggregate and victim
/// module dumps, and the recovered samples under dir.
void write_artifacts(const ExperimentOutcome& outcome, const std::filesystem::path& dir);

/// `run` entry point: executes the experiment and writes artifacts under
/// out_dir/<config-hash>/. Returns the output directory.
std::filesystem::path cmd_run(const ExperimentConfig& config);

struct SweepRow {
    double axis_value = 0.0;
    double rate = 0.0;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double time_s = 0.0;
};

/// Runs the experiment once per axis value (shared seed) and writes a tidy
/// CSV next to the per-run artifact directories. Axes: k, n_clients,
/// local_epochs, noniid (values are victim class filters, -1 = all).
std::vector<SweepRow> cmd_sweep(const ExperimentConfig& config, const std::string& axis,
                                const std::filesystem::path& csv_path);

/// Human-readable dump of a parameter stream, with crafted-module detection.
std::string inspect_param_file(const std::filesystem::path& path);

}  // namespace fedleak
