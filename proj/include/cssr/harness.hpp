#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cssr/data.hpp"
#include "cssr/metrics.hpp"
#include "cssr/model.hpp"
#include "cssr/scoring.hpp"

namespace cssr {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 64;
    double lr_initial = 0.05;
    std::vector<int> lr_drop_epochs; // 0-based epoch indices, strictly increasing
    double lr_drop_factor = 10.0;    // divide the rate by this at each drop
    double momentum = 0.9;
    uint64_t seed = 0;
    Precision precision = Precision::f64;
    BackboneConfig backbone;
    HeadConfig head;
    AugmentSpec augment;
    std::array<double, 3> score_weights{1.0, 1.0, 1.0};
    std::vector<int> known_classes; // original dataset labels; empty = all

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);

    // 2-d preset: 50 epochs, lr 0.05, batch 64, mlp2d(D=8), k=2, no augmentation.
    static TrainConfig preset_gauss2d(HeadMode mode, uint64_t seed = 0);
    // image preset: 10 epochs, lr 0.05 dropping x10 at epoch 8, batch 64,
    // smallconv(128), k=16, augmentation on.
    static TrainConfig preset_image(HeadMode mode, uint64_t seed = 0);
    // the full-scale schedule: 200 epochs, lr 0.4 dropping x10 at 130 and
    // 190, batch 128, k=64. Kept as a named preset; not used in acceptance.
    static TrainConfig preset_paper(HeadMode mode, uint64_t seed = 0);
};

struct TrainResult {
    Model model;
    std::vector<double> epoch_losses;
    int64_t clamped_probabilities = 0; // diagnostics: log-floor hits
};

// Mini-batch SGD with momentum on the classification loss. Labels must
// already be remapped to 0..m-1. Deterministic under config.seed (per-epoch
// shuffles and augmentation draws derive from it). A non-finite loss aborts
// naming the epoch and batch.
TrainResult train(const TrainConfig& config, const Dataset& train_data);

double closed_accuracy(const Model& model, const Dataset& data);

// ---- the three-step unknown-inference pipeline ----

struct SampleDecision {
    int predicted = -1;
    RawScores raw;
    double fused = 0.0;
    bool accepted = false;
    int final_label = -1; // predicted when accepted, m when rejected
};

// Step 1: class statistics over the training set without augmentation.
// Step 2: score means/deviations over one augmented training pass.
// Then the 95%-TPR threshold is fitted on the fused scores of the
// non-augmented pass (the same scores the acceptance guarantee refers to).
ScoreStats build_score_stats(const Model& model, const Dataset& train_data, const AugmentSpec& augment,
                             uint64_t seed, const std::array<double, 3>& weights,
                             double tpr_target = 0.95);

SampleDecision score_sample(const Model& model, const ScoreStats& stats, const Tensor& input);

std::vector<SampleDecision> score_dataset(const Model& model, const ScoreStats& stats,
                                          const Dataset& data);

// ---- evaluation ----

struct OpenSetTestData {
    Dataset known;   // labels remapped to 0..m-1
    Dataset unknown; // labels ignored
};

EvalReport evaluate_open_set(const Model& model, const ScoreStats& stats, const OpenSetTestData& test,
                             std::optional<int> total_test_classes = std::nullopt);

struct ExperimentReport {
    std::vector<EvalReport> trials;
    std::vector<std::pair<std::string, std::pair<double, double>>> mean_std; // metric -> (mean, std)
};

ExperimentReport aggregate_trials(const std::vector<EvalReport>& trials);

std::string report_to_json(const EvalReport& report);
std::string report_summary(const EvalReport& report);
std::string experiment_to_json(const ExperimentReport& report);

// ---- rendering ----

struct OpenSpaceMap {
    int resolution = 0;
    std::array<double, 4> bounds{}; // x_min, x_max, y_min, y_max
    std::vector<uint8_t> accepted;  // row-major, 255 = accepted
    std::vector<int> predicted;     // per-cell class
};

// Grid sweep of open-set decisions for a 2-d backbone.
OpenSpaceMap render_open_space_map(const Model& model, const ScoreStats& stats,
                                   const std::array<double, 4>& bounds, int resolution);

void write_pgm(const std::string& path, int width, int height, const std::vector<uint8_t>& pixels);
std::vector<uint8_t> class_map_pixels(const OpenSpaceMap& map, int num_classes);

// ---- persistence ----

void save_model(const std::string& path, const Model& model, const TrainConfig& config,
                const ScoreStats* stats = nullptr);

struct LoadedModel {
    Model model;
    TrainConfig config;
    std::optional<ScoreStats> stats;
};

LoadedModel load_model(const std::string& path);

// Copies checkpoint tensors into an existing model; every parameter must
// match by name and shape. Rejects mismatches naming the field.
void load_parameters_into(Model& model, const std::vector<std::pair<std::string, Tensor>>& tensors);

} // namespace cssr
