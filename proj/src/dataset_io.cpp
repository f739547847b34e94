#include "zood/dataset_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace zood {

using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& token, const std::string& path, std::size_t line) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ParseError(path + ": malformed float at row " + std::to_string(line));
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

json matrix_to_json(const MatrixRM& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixRM matrix_from_json(const json& j) {
  const auto rows = j.size();
  if (rows == 0) throw ParseError("sidecar: empty matrix");
  const auto cols = j.at(0).size();
  MatrixRM m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j.at(i).at(k).get<double>();
  return m;
}

json spec_to_json(const GmmSpec& spec) {
  json weights = json::array();
  for (int i = 0; i < spec.m; ++i) weights.push_back(spec.weights[i]);
  return json{{"m", spec.m},
              {"d", spec.d},
              {"weights", weights},
              {"centers", matrix_to_json(spec.centers)},
              {"diag_covs", matrix_to_json(spec.diag_covs)}};
}

GmmSpec spec_from_json(const json& j) {
  GmmSpec spec;
  spec.m = j.at("m").get<int>();
  spec.d = j.at("d").get<int>();
  const auto& w = j.at("weights");
  spec.weights.resize(static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i)
    spec.weights[static_cast<Eigen::Index>(i)] = w.at(i).get<double>();
  spec.centers = matrix_from_json(j.at("centers"));
  spec.diag_covs = matrix_from_json(j.at("diag_covs"));
  return spec;
}

}  // namespace

std::string sidecar_path(const std::string& csv_path) {
  const std::string suffix = ".csv";
  if (csv_path.size() > suffix.size() &&
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return csv_path.substr(0, csv_path.size() - suffix.size()) + ".meta.json";
  return csv_path + ".meta.json";
}

void write_dataset(const LabeledDataset& ds, const std::string& csv_path) {
  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) throw IoError("write_dataset: cannot open " + csv_path);
  for (int k = 0; k < ds.d(); ++k) out << 'f' << k << ',';
  out << "label\n";
  for (int r = 0; r < ds.n(); ++r) {
    for (int k = 0; k < ds.d(); ++k) out << format_double(ds.features(r, k)) << ',';
    out << ds.labels[static_cast<std::size_t>(r)] << '\n';
  }
  if (!out) throw IoError("write_dataset: write failed for " + csv_path);

  json meta{{"percentile", ds.percentile},
            {"inflated_dims", ds.inflated_dims},
            {"spec", spec_to_json(ds.source_spec)}};
  if (ds.transformed_cov) {
    json blocks = json::array();
    for (const auto& b : ds.transformed_cov->blocks) blocks.push_back(matrix_to_json(b));
    meta["transformed_cov"] = json{{"dims", ds.transformed_cov->dims}, {"blocks", blocks}};
  }
  if (ds.applied_map) {
    json b = json::array();
    for (int i = 0; i < ds.applied_map->dim; ++i) b.push_back(ds.applied_map->b[i]);
    meta["applied_map"] =
        json{{"dim", ds.applied_map->dim},
             {"w", matrix_to_json(ds.applied_map->w)},
             {"b", b},
             {"eigen_floor", ds.applied_map->eigen_floor},
             {"mode", ds.applied_mode == TransformMode::kFull ? "full" : "subspace"}};
  }
  const std::string meta_path = sidecar_path(csv_path);
  std::ofstream meta_out(meta_path, std::ios::trunc);
  if (!meta_out) throw IoError("write_dataset: cannot open " + meta_path);
  meta_out << meta.dump(2) << '\n';
  if (!meta_out) throw IoError("write_dataset: write failed for " + meta_path);
}

FeatureCsv read_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_feature_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.empty()) throw ParseError(path + ": empty header");
  const bool has_labels = header.back() == "label";
  const int d = static_cast<int>(header.size()) - (has_labels ? 1 : 0);
  if (d < 1) throw ParseError(path + ": no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_number = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != d + (has_labels ? 1 : 0))
      throw ParseError(path + ": wrong field count at row " + std::to_string(line_number));
    for (int k = 0; k < d; ++k)
      values.push_back(parse_double(fields[static_cast<std::size_t>(k)], path, line_number));
    if (has_labels) {
      const std::string& tok = fields.back();
      if (tok != "0" && tok != "1")
        throw ParseError(path + ": label must be 0 or 1 at row " + std::to_string(line_number));
      labels.push_back(tok == "1" ? 1 : 0);
    }
    ++rows;
  }
  FeatureCsv out;
  out.has_labels = has_labels;
  out.labels = std::move(labels);
  out.features.resize(static_cast<Eigen::Index>(rows), d);
  for (std::size_t r = 0; r < rows; ++r)
    for (int k = 0; k < d; ++k)
      out.features(static_cast<Eigen::Index>(r), k) = values[r * static_cast<std::size_t>(d) +
                                                             static_cast<std::size_t>(k)];
  return out;
}

LabeledDataset read_dataset(const std::string& csv_path) {
  FeatureCsv csv = read_feature_csv(csv_path);
  if (!csv.has_labels) throw ParseError(csv_path + ": dataset file requires a label column");

  const std::string meta_path = sidecar_path(csv_path);
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw IoError("read_dataset: cannot open " + meta_path);
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw ParseError(meta_path + ": invalid JSON: " + e.what());
  }

  LabeledDataset ds;
  ds.features = std::move(csv.features);
  ds.labels = std::move(csv.labels);
  try {
    ds.percentile = meta.at("percentile").get<double>();
    ds.inflated_dims = meta.at("inflated_dims").get<std::vector<int>>();
    ds.source_spec = spec_from_json(meta.at("spec"));
    if (meta.contains("transformed_cov")) {
      DenseBlockCov block;
      block.dims = meta["transformed_cov"].at("dims").get<std::vector<int>>();
      for (const auto& b : meta["transformed_cov"].at("blocks"))
        block.blocks.push_back(matrix_from_json(b));
      ds.transformed_cov = std::move(block);
    }
    if (meta.contains("applied_map")) {
      const auto& m = meta["applied_map"];
      LinearMap map;
      map.dim = m.at("dim").get<int>();
      map.w = matrix_from_json(m.at("w"));
      const auto& b = m.at("b");
      map.b.resize(static_cast<Eigen::Index>(b.size()));
      for (std::size_t i = 0; i < b.size(); ++i)
        map.b[static_cast<Eigen::Index>(i)] = b.at(i).get<double>();
      map.eigen_floor = m.value("eigen_floor", 0.1);
      ds.applied_map = std::move(map);
      ds.applied_mode = m.value("mode", "subspace") == std::string("full")
                            ? TransformMode::kFull
                            : TransformMode::kSubspace;
    }
  } catch (const json::exception& e) {
    throw ParseError(meta_path + ": missing or invalid field: " + e.what());
  }
  return ds;
}

void write_scores_csv(const std::string& path, const Vector& p_outlier) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_scores_csv: cannot open " + path);
  out << "row_index,p_outlier\n";
  for (Eigen::Index i = 0; i < p_outlier.size(); ++i)
    out << i << ',' << format_double(p_outlier[i]) << '\n';
  if (!out) throw IoError("write_scores_csv: write failed for " + path);
}

std::vector<double> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_scores_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "row_index,p_outlier")
    throw ParseError(path + ": expected header row_index,p_outlier");
  std::vector<double> scores;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2)
      throw ParseError(path + ": wrong field count at row " + std::to_string(line_number));
    scores.push_back(parse_double(fields[1], path, line_number));
  }
  return scores;
}

void write_loss_csv(const std::string& path, const std::vector<LossPoint>& record) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_loss_csv: cannot open " + path);
  out << "step,epoch,loss\n";
  for (const auto& p : record)
    out << p.step << ',' << p.epoch << ',' << format_double(p.loss) << '\n';
  if (!out) throw IoError("write_loss_csv: write failed for " + path);
}

}  // namespace zood
