#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "zood/adam.hpp"
#include "zood/data.hpp"
#include "zood/gmm.hpp"
#include "zood/model.hpp"

namespace zood {

struct TrainConfig {
  int epochs = 20;             // E
  int steps_per_epoch = 50;    // Q, one optimizer step per slot
  int batch_datasets = 4;      // B datasets per step, one task each
  int unique_per_epoch = 25;   // q <= Q slots synthesized fresh
  int periodicity = 10;        // P: epochs after which buffers are replayed
  int context_min = 50;        // n_L
  int context_max = 300;       // n_U, must stay below samples_per_class
  int samples_per_class = 500; // S
  double percentile = 0.9;     // alpha
  int prior_max_dims = 5;      // D bound handed to the prior
  int prior_max_clusters = 5;  // M
  TransformMode transform_mode = TransformMode::kSubspace;
  AdamConfig optimizer;
  std::uint64_t master_seed = 0;
  int threads = 0;  // 0 -> hardware concurrency, capped at batch_datasets
  int synthesis_redraws = 10;  // spec redraw budget per slot

  void validate() const;
};

// In-context task: inlier-only context, balanced shuffled query set.
struct TrainingTask {
  MatrixRM context;
  MatrixRM queries;
  std::vector<int> labels;  // per query row
};

TrainingTask make_training_task(const LabeledDataset& ds, int n_min, int n_max, Rng& rng);

struct LossPoint {
  long long step = 0;
  int epoch = 0;
  double loss = 0.0;
};

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  ModelParamsT<float> params;
  AdamState<float> adam;
  long long step = 0;
  double loss = 0.0;  // mean epoch loss at snapshot
};

struct PretrainResult {
  Checkpoint best;
  std::vector<LossPoint> loss_record;
  std::vector<double> epoch_mean_loss;
  long long transforms_applied = 0;  // slot bookkeeping, testable
};

// Prior-fitting loop. Epochs below the periodicity synthesize q fresh slots
// and fill the rest with freshly transformed copies; later epochs replay the
// stored buffers with fresh transforms on every dataset. Every transformed
// dataset is verified label-preserving before it is consumed.
PretrainResult pretrain(const TrainConfig& train_cfg, const ModelConfig& model_cfg,
                        const Checkpoint* resume = nullptr,
                        const std::function<void(int, double)>& on_epoch = {});

// Checkpoint file errors, each distinct so callers can tell them apart.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckpointHeaderError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointShapeError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointTruncatedError : CheckpointError {
  using CheckpointError::CheckpointError;
};

void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// JSON round trip for config files and checkpoint headers; missing keys fall
// back to the field defaults.
std::string to_json_string(const ModelConfig& c);
ModelConfig model_config_from_json_string(const std::string& text);
std::string to_json_string(const TrainConfig& c);
TrainConfig train_config_from_json_string(const std::string& text);

}  // namespace zood
