#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "zood/data.hpp"
#include "zood/train.hpp"

namespace zood {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed content inside an otherwise readable file; the message names the
// offending line.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shared dataset format: UTF-8 CSV `f0,...,f{d-1},label` plus a JSON sidecar
// `<name>.meta.json` with percentile, inflated dims and the labeling spec.
void write_dataset(const LabeledDataset& ds, const std::string& csv_path);
LabeledDataset read_dataset(const std::string& csv_path);

std::string sidecar_path(const std::string& csv_path);

struct FeatureCsv {
  MatrixRM features;
  std::vector<int> labels;  // empty when the file has no label column
  bool has_labels = false;
};

// Reads a feature CSV; the label column is optional.
FeatureCsv read_feature_csv(const std::string& path);

// `row_index,p_outlier`
void write_scores_csv(const std::string& path, const Vector& p_outlier);
std::vector<double> read_scores_csv(const std::string& path);

// `step,epoch,loss`
void write_loss_csv(const std::string& path, const std::vector<LossPoint>& record);

}  // namespace zood
