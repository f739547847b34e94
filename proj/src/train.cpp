#include "zood/train.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "zood/linear_map.hpp"

namespace zood {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (steps_per_epoch < 1) throw std::invalid_argument("TrainConfig: steps_per_epoch must be >= 1");
  if (batch_datasets < 1) throw std::invalid_argument("TrainConfig: batch_datasets must be >= 1");
  if (unique_per_epoch < 1 || unique_per_epoch > steps_per_epoch)
    throw std::invalid_argument("TrainConfig: need 1 <= unique_per_epoch <= steps_per_epoch");
  if (periodicity < 1 || periodicity > epochs)
    throw std::invalid_argument("TrainConfig: need 1 <= periodicity <= epochs");
  if (context_min < 1 || context_min > context_max)
    throw std::invalid_argument("TrainConfig: need 1 <= context_min <= context_max");
  if (context_max >= samples_per_class)
    throw std::invalid_argument("TrainConfig: context_max must be < samples_per_class");
  if (!(percentile > 0.0 && percentile < 1.0))
    throw std::invalid_argument("TrainConfig: percentile must be in (0, 1)");
  if (prior_max_dims < 1 || prior_max_clusters < 1)
    throw std::invalid_argument("TrainConfig: prior bounds must be >= 1");
  if (!(optimizer.lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (synthesis_redraws < 1) throw std::invalid_argument("TrainConfig: synthesis_redraws must be >= 1");
}

TrainingTask make_training_task(const LabeledDataset& ds, int n_min, int n_max, Rng& rng) {
  std::vector<int> inlier_rows, outlier_rows;
  for (int r = 0; r < ds.n(); ++r)
    (ds.labels[static_cast<std::size_t>(r)] == 0 ? inlier_rows : outlier_rows).push_back(r);
  const int s_in = static_cast<int>(inlier_rows.size());
  const int s_out = static_cast<int>(outlier_rows.size());
  if (n_max >= s_in)
    throw std::invalid_argument("make_training_task: context bound must be < inlier count");
  if (n_min < 1 || n_min > n_max)
    throw std::invalid_argument("make_training_task: bad context bounds");

  const int n = static_cast<int>(rng.uniform_int(n_min, n_max));
  std::vector<int> picked = rng.sample_indices(s_in, n);
  std::vector<char> in_context(static_cast<std::size_t>(s_in), 0);
  for (int i : picked) in_context[static_cast<std::size_t>(i)] = 1;

  TrainingTask task;
  task.context.resize(n, ds.d());
  for (int i = 0; i < n; ++i)
    task.context.row(i) = ds.features.row(inlier_rows[static_cast<std::size_t>(picked[static_cast<std::size_t>(i)])]);

  // Queries: every held-out inlier plus the same number of outliers.
  std::vector<int> query_rows;
  for (int i = 0; i < s_in; ++i)
    if (!in_context[static_cast<std::size_t>(i)]) query_rows.push_back(inlier_rows[static_cast<std::size_t>(i)]);
  const int n_test_out = std::min(s_in - n, s_out);
  for (int i : rng.sample_indices(s_out, n_test_out))
    query_rows.push_back(outlier_rows[static_cast<std::size_t>(i)]);
  rng.shuffle(query_rows);

  task.queries.resize(static_cast<Eigen::Index>(query_rows.size()), ds.d());
  task.labels.resize(query_rows.size());
  for (std::size_t i = 0; i < query_rows.size(); ++i) {
    task.queries.row(static_cast<Eigen::Index>(i)) = ds.features.row(query_rows[i]);
    task.labels[i] = ds.labels[static_cast<std::size_t>(query_rows[i])];
  }
  return task;
}

namespace {

LabeledDataset synthesize_slot(const TrainConfig& cfg, Rng& rng) {
  for (int attempt = 0; attempt < cfg.synthesis_redraws; ++attempt) {
    const GmmSpec spec = sample_gmm_spec(cfg.prior_max_dims, cfg.prior_max_clusters, rng);
    try {
      return synthesize_dataset(spec, cfg.samples_per_class, cfg.percentile, rng);
    } catch (const SynthesisError&) {
      // pathological spec; redraw
    }
  }
  throw SynthesisError("pretrain: synthesis failed after redraw budget");
}

LabeledDataset transform_slot(const LabeledDataset& ds, const TrainConfig& cfg, Rng& rng) {
  const int dim = cfg.transform_mode == TransformMode::kSubspace
                      ? static_cast<int>(ds.inflated_dims.size())
                      : ds.d();
  const LinearMap map = sample_linear_map(dim, rng);
  const PreservationReport report = verify_preservation(ds, map, cfg.transform_mode);
  if (report.label_flips != 0)
    throw NumericError("pretrain: transform flipped labels; map rejected");
  return apply_map(ds, map, cfg.transform_mode);
}

struct TaskResult {
  double loss = 0.0;
  std::vector<ArrayT<float>> grads;  // visit order
};

TaskResult run_task(const ModelParamsT<float>& params, const ModelConfig& model_cfg,
                    const TrainingTask& task, Rng adapt_rng) {
  Tape<float> tape;
  const StagedParams<float> staged = stage_params(tape, params, true);
  const FeatureAdapter adapter =
      FeatureAdapter::make(static_cast<int>(task.context.cols()), model_cfg.max_dims, adapt_rng);
  const auto logits =
      pfn_logits_graph(tape, staged, model_cfg, task.context, task.queries, adapter);
  const auto loss = tape.cross_entropy_mean(logits, task.labels);
  tape.backward(loss);

  TaskResult result;
  result.loss = static_cast<double>(tape.value(loss).data[0]);
  visit_params(staged, [&](const std::string&, const Tape<float>::Id& id) {
    result.grads.push_back(tape.grad(id));
  });
  return result;
}

int resolve_threads(const TrainConfig& cfg) {
  int t = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  return std::min(t, cfg.batch_datasets);
}

}  // namespace

PretrainResult pretrain(const TrainConfig& train_cfg, const ModelConfig& model_cfg,
                        const Checkpoint* resume, const std::function<void(int, double)>& on_epoch) {
  train_cfg.validate();
  model_cfg.validate();

  const std::uint64_t master = train_cfg.master_seed;
  ModelParamsT<float> params;
  AdamState<float> adam;
  long long global_step = 0;

  std::vector<ArrayT<float>*> param_ptrs;
  if (resume) {
    params = resume->params;
    adam = resume->adam;
    global_step = resume->step;
  } else {
    Rng init_rng = Rng::derive(master, "init", 0);
    params = init_params<float>(model_cfg, init_rng);
  }
  visit_params(params, [&](const std::string&, ArrayT<float>& a) { param_ptrs.push_back(&a); });
  if (!resume) {
    adam.init(param_ptrs);
  }

  const int E = train_cfg.epochs;
  const int Q = train_cfg.steps_per_epoch;
  const int B = train_cfg.batch_datasets;
  const int q = train_cfg.unique_per_epoch;
  const int P = train_cfg.periodicity;
  const int threads = resolve_threads(train_cfg);

  PretrainResult result;
  result.best.model = model_cfg;
  result.best.train = train_cfg;
  double best_loss = std::numeric_limits<double>::infinity();

  std::vector<std::vector<std::vector<LabeledDataset>>> epoch_buffers;  // first P epochs

  const auto slot_index = [&](int e, int j, int b) {
    return (static_cast<std::uint64_t>(e) * static_cast<std::uint64_t>(Q) +
            static_cast<std::uint64_t>(j)) *
               static_cast<std::uint64_t>(B) +
           static_cast<std::uint64_t>(b);
  };

  for (int e = 0; e < E; ++e) {
    std::vector<std::vector<LabeledDataset>> slots(static_cast<std::size_t>(Q),
                                                   std::vector<LabeledDataset>(static_cast<std::size_t>(B)));
    if (e < P) {
      for (int j = 0; j < Q; ++j) {
        for (int b = 0; b < B; ++b) {
          if (j < q) {
            Rng rng = Rng::derive(master, "synth", slot_index(e, j, b));
            slots[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)] =
                synthesize_slot(train_cfg, rng);
          } else {
            Rng rng = Rng::derive(master, "transform", slot_index(e, j, b));
            slots[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)] = transform_slot(
                slots[static_cast<std::size_t>(j % q)][static_cast<std::size_t>(b)], train_cfg, rng);
            ++result.transforms_applied;
          }
        }
      }
      epoch_buffers.push_back(slots);
    } else {
      const auto& base = epoch_buffers[static_cast<std::size_t>(e % P)];
      for (int j = 0; j < Q; ++j)
        for (int b = 0; b < B; ++b) {
          Rng rng = Rng::derive(master, "transform", slot_index(e, j, b));
          slots[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)] = transform_slot(
              base[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)], train_cfg, rng);
          ++result.transforms_applied;
        }
    }

    double epoch_loss_sum = 0.0;
    for (int j = 0; j < Q; ++j) {
      std::vector<TrainingTask> tasks(static_cast<std::size_t>(B));
      for (int b = 0; b < B; ++b) {
        Rng task_rng = Rng::derive(master, "task",
                                   static_cast<std::uint64_t>(global_step) * B +
                                       static_cast<std::uint64_t>(b));
        tasks[static_cast<std::size_t>(b)] =
            make_training_task(slots[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)],
                               train_cfg.context_min, train_cfg.context_max, task_rng);
      }

      std::vector<TaskResult> results(static_cast<std::size_t>(B));
      const auto worker = [&](int begin, int end) {
        for (int b = begin; b < end; ++b) {
          Rng adapt_rng = Rng::derive(master, "adapt",
                                      static_cast<std::uint64_t>(global_step) * B +
                                          static_cast<std::uint64_t>(b));
          results[static_cast<std::size_t>(b)] =
              run_task(params, model_cfg, tasks[static_cast<std::size_t>(b)], adapt_rng);
        }
      };
      if (threads <= 1) {
        worker(0, B);
      } else {
        std::vector<std::thread> pool;
        const int chunk = (B + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
          const int begin = t * chunk;
          const int end = std::min(B, begin + chunk);
          if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
      }

      // Deterministic combine: mean of task losses, grads summed in task order.
      double step_loss = 0.0;
      std::vector<ArrayT<float>> grad_sum;
      for (int b = 0; b < B; ++b) {
        const auto& r = results[static_cast<std::size_t>(b)];
        step_loss += r.loss;
        if (b == 0) {
          grad_sum = r.grads;
        } else {
          for (std::size_t i = 0; i < grad_sum.size(); ++i)
            for (std::size_t k = 0; k < grad_sum[i].size(); ++k)
              grad_sum[i].data[k] += r.grads[i].data[k];
        }
      }
      step_loss /= B;
      const float inv_b = 1.0f / static_cast<float>(B);
      std::vector<const ArrayT<float>*> grad_ptrs;
      for (auto& g : grad_sum) {
        for (auto& v : g.data) v *= inv_b;
        grad_ptrs.push_back(&g);
      }
      adam_step(param_ptrs, grad_ptrs, adam, train_cfg.optimizer);

      result.loss_record.push_back({global_step, e, step_loss});
      epoch_loss_sum += step_loss;
      ++global_step;
    }

    const double epoch_mean = epoch_loss_sum / Q;
    result.epoch_mean_loss.push_back(epoch_mean);
    if (on_epoch) on_epoch(e, epoch_mean);
    if (epoch_mean < best_loss) {
      best_loss = epoch_mean;
      result.best.params = params;
      result.best.adam = adam;
      result.best.step = global_step;
      result.best.loss = epoch_mean;
    }
  }
  return result;
}

// ---- config (de)serialization ----

namespace {

json model_config_to_json(const ModelConfig& c) {
  return json{{"max_dims", c.max_dims},     {"num_layers", c.num_layers},
              {"hidden", c.hidden},         {"heads", c.heads},
              {"routers", c.routers},       {"ffn_multiplier", c.ffn_multiplier},
              {"precision", c.precision == Precision::kF32 ? "f32" : "f64"}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.max_dims = j.value("max_dims", c.max_dims);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.hidden = j.value("hidden", c.hidden);
  c.heads = j.value("heads", c.heads);
  c.routers = j.value("routers", c.routers);
  c.ffn_multiplier = j.value("ffn_multiplier", c.ffn_multiplier);
  const std::string prec = j.value("precision", "f32");
  if (prec != "f32" && prec != "f64")
    throw std::invalid_argument("ModelConfig: precision must be f32 or f64");
  c.precision = prec == "f32" ? Precision::kF32 : Precision::kF64;
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"steps_per_epoch", c.steps_per_epoch},
              {"batch_datasets", c.batch_datasets},
              {"unique_per_epoch", c.unique_per_epoch},
              {"periodicity", c.periodicity},
              {"context_min", c.context_min},
              {"context_max", c.context_max},
              {"samples_per_class", c.samples_per_class},
              {"percentile", c.percentile},
              {"prior_max_dims", c.prior_max_dims},
              {"prior_max_clusters", c.prior_max_clusters},
              {"transform_mode",
               c.transform_mode == TransformMode::kSubspace ? "subspace" : "full"},
              {"lr", c.optimizer.lr},
              {"beta1", c.optimizer.beta1},
              {"beta2", c.optimizer.beta2},
              {"adam_eps", c.optimizer.eps},
              {"master_seed", c.master_seed},
              {"threads", c.threads},
              {"synthesis_redraws", c.synthesis_redraws}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  c.batch_datasets = j.value("batch_datasets", c.batch_datasets);
  c.unique_per_epoch = j.value("unique_per_epoch", c.unique_per_epoch);
  c.periodicity = j.value("periodicity", c.periodicity);
  c.context_min = j.value("context_min", c.context_min);
  c.context_max = j.value("context_max", c.context_max);
  c.samples_per_class = j.value("samples_per_class", c.samples_per_class);
  c.percentile = j.value("percentile", c.percentile);
  c.prior_max_dims = j.value("prior_max_dims", c.prior_max_dims);
  c.prior_max_clusters = j.value("prior_max_clusters", c.prior_max_clusters);
  const std::string mode = j.value("transform_mode", "subspace");
  if (mode != "subspace" && mode != "full")
    throw std::invalid_argument("TrainConfig: transform_mode must be subspace or full");
  c.transform_mode = mode == "subspace" ? TransformMode::kSubspace : TransformMode::kFull;
  c.optimizer.lr = j.value("lr", c.optimizer.lr);
  c.optimizer.beta1 = j.value("beta1", c.optimizer.beta1);
  c.optimizer.beta2 = j.value("beta2", c.optimizer.beta2);
  c.optimizer.eps = j.value("adam_eps", c.optimizer.eps);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.threads = j.value("threads", c.threads);
  c.synthesis_redraws = j.value("synthesis_redraws", c.synthesis_redraws);
  return c;
}

constexpr char kMagic[8] = {'F', 'O', 'M', 'O', '0', 'D', '1', '\n'};

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  json manifest = json::array();
  std::vector<const ArrayT<float>*> arrays;
  std::uint64_t offset = 0;
  const auto add_entry = [&](const std::string& name, const ArrayT<float>& a) {
    manifest.push_back({{"name", name}, {"shape", a.shape}, {"offset", offset}});
    arrays.push_back(&a);
    offset += a.size() * sizeof(float);
  };
  std::size_t param_count = 0;
  visit_params(cp.params, [&](const std::string& name, const ArrayT<float>& a) {
    add_entry(name, a);
    ++param_count;
  });
  if (cp.adam.m.size() == param_count) {
    std::size_t i = 0;
    visit_params(cp.params, [&](const std::string& name, const ArrayT<float>&) {
      add_entry("adam.m." + name, cp.adam.m[i]);
      add_entry("adam.v." + name, cp.adam.v[i]);
      ++i;
    });
  }

  json header{{"version", 1},
              {"precision", "f32"},
              {"model", model_config_to_json(cp.model)},
              {"train", train_config_to_json(cp.train)},
              {"step", cp.step},
              {"loss", cp.loss},
              {"adam_t", cp.adam.t},
              {"manifest", manifest}};
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
  unsigned char len_le[4] = {static_cast<unsigned char>(len & 0xff),
                             static_cast<unsigned char>((len >> 8) & 0xff),
                             static_cast<unsigned char>((len >> 16) & 0xff),
                             static_cast<unsigned char>((len >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(len_le), 4);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto* a : arrays)
    out.write(reinterpret_cast<const char*>(a->data.data()),
              static_cast<std::streamsize>(a->data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);

  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointHeaderError("load_checkpoint: bad magic");
  unsigned char len_le[4];
  if (!in.read(reinterpret_cast<char*>(len_le), 4))
    throw CheckpointHeaderError("load_checkpoint: missing header length");
  const std::uint32_t len = static_cast<std::uint32_t>(len_le[0]) |
                            (static_cast<std::uint32_t>(len_le[1]) << 8) |
                            (static_cast<std::uint32_t>(len_le[2]) << 16) |
                            (static_cast<std::uint32_t>(len_le[3]) << 24);
  std::string header_str(len, '\0');
  if (!in.read(header_str.data(), len))
    throw CheckpointHeaderError("load_checkpoint: truncated header");

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw CheckpointHeaderError(std::string("load_checkpoint: corrupt header: ") + e.what());
  }
  if (header.value("precision", "") != "f32")
    throw CheckpointHeaderError("load_checkpoint: unsupported precision");

  Checkpoint cp;
  try {
    cp.model = model_config_from_json(header.at("model"));
    cp.train = train_config_from_json(header.at("train"));
    cp.step = header.value("step", 0LL);
    cp.loss = header.value("loss", 0.0);
  } catch (const json::exception& e) {
    throw CheckpointHeaderError(std::string("load_checkpoint: corrupt header: ") + e.what());
  }

  // Expected shapes come from the config, not the file.
  Rng dummy(0);
  cp.params = init_params<float>(cp.model, dummy);
  std::vector<ArrayT<float>*> param_ptrs;
  std::vector<std::string> param_names;
  visit_params(cp.params, [&](const std::string& name, ArrayT<float>& a) {
    param_ptrs.push_back(&a);
    param_names.push_back(name);
  });
  cp.adam.init(param_ptrs);
  cp.adam.t = header.value("adam_t", 0LL);

  const auto find_target = [&](const std::string& name) -> ArrayT<float>* {
    for (std::size_t i = 0; i < param_names.size(); ++i) {
      if (param_names[i] == name) return param_ptrs[i];
      if ("adam.m." + param_names[i] == name) return &cp.adam.m[i];
      if ("adam.v." + param_names[i] == name) return &cp.adam.v[i];
    }
    return nullptr;
  };

  if (!header.contains("manifest") || !header["manifest"].is_array())
    throw CheckpointHeaderError("load_checkpoint: missing manifest");
  std::size_t params_loaded = 0;
  const std::istream::pos_type payload_start = in.tellg();
  for (const auto& entry : header["manifest"]) {
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<std::vector<std::size_t>>();
      offset = entry.at("offset").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw CheckpointHeaderError(std::string("load_checkpoint: corrupt manifest: ") + e.what());
    }
    ArrayT<float>* target = find_target(name);
    if (!target) throw CheckpointShapeError("load_checkpoint: unknown array " + name);
    if (target->shape != shape)
      throw CheckpointShapeError("load_checkpoint: shape mismatch for " + name);
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    if (!in.read(reinterpret_cast<char*>(target->data.data()),
                 static_cast<std::streamsize>(target->data.size() * sizeof(float))))
      throw CheckpointTruncatedError("load_checkpoint: truncated payload at " + name);
    if (name.rfind("adam.", 0) != 0) ++params_loaded;
  }
  if (params_loaded != param_names.size())
    throw CheckpointShapeError("load_checkpoint: manifest does not cover all parameters");
  return cp;
}

std::string to_json_string(const ModelConfig& c) { return model_config_to_json(c).dump(2); }

ModelConfig model_config_from_json_string(const std::string& text) {
  return model_config_from_json(json::parse(text));
}

std::string to_json_string(const TrainConfig& c) { return train_config_to_json(c).dump(2); }

TrainConfig train_config_from_json_string(const std::string& text) {
  return train_config_from_json(json::parse(text));
}

}  // namespace zood
