#include "premir/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <unordered_set>

#include "premir/encoding.hpp"
#include "premir/errors.hpp"
#include "premir/kernels.hpp"
#include "premir/random.hpp"

namespace premir {

using nlohmann::json;

namespace {

bool is_dbn(const std::string& model) { return model == "dbn"; }

std::vector<std::string> pick(std::span<const std::string> ids, std::span<const std::size_t> rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(ids[r]);
  return out;
}

std::vector<Tensor> onehot_tensors(std::span<const RnaSequence> seqs, std::size_t width) {
  std::vector<Tensor> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(to_tensor(one_hot_encode(s, width)));
  return out;
}

std::vector<Tensor> row_tensors(const Matrix& m) {
  std::vector<Tensor> out;
  out.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out.emplace_back(Shape{m.cols()}, std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return out;
}

MetricSummary summarize(const std::vector<FoldResult>& folds, double Metrics::*field) {
  MetricSummary s;
  if (folds.empty()) return s;
  for (const auto& f : folds) s.mean += f.metrics.*field;
  s.mean /= static_cast<double>(folds.size());
  if (folds.size() > 1) {
    double var = 0.0;
    for (const auto& f : folds) var += (f.metrics.*field - s.mean) * (f.metrics.*field - s.mean);
    s.std = std::sqrt(var / static_cast<double>(folds.size() - 1));
  }
  return s;
}

[[noreturn]] void rethrow_with_context(std::exception_ptr error, const std::string& context) {
  try {
    std::rethrow_exception(error);
  } catch (const UsageError& e) {
    throw UsageError(context + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw DataError(context + ": " + e.what());
  }
}

json feature_config_to_json(const FeatureConfig& c) {
  return {{"n_samples", c.n_samples},
          {"n_shuffles", c.n_shuffles},
          {"temperature", c.temperature},
          {"seed", c.seed},
          {"energy",
           {{"gc", c.energy.gc},
            {"au", c.energy.au},
            {"gu", c.energy.gu},
            {"loop_penalty", c.energy.loop_penalty},
            {"min_hairpin", c.energy.min_hairpin}}},
          {"thermo",
           {{"dh_gc", c.thermo.dh_gc},
            {"dh_au", c.thermo.dh_au},
            {"dh_gu", c.thermo.dh_gu},
            {"ds_gc", c.thermo.ds_gc},
            {"ds_au", c.thermo.ds_au},
            {"ds_gu", c.thermo.ds_gu},
            {"strand_concentration", c.thermo.strand_concentration},
            {"gas_constant", c.thermo.gas_constant},
            {"tm_min", c.thermo.tm_min},
            {"tm_max", c.thermo.tm_max}}}};
}

FeatureConfig feature_config_from_json(const json& j) {
  FeatureConfig c;
  c.n_samples = j.at("n_samples").get<std::size_t>();
  c.n_shuffles = j.at("n_shuffles").get<std::size_t>();
  c.temperature = j.at("temperature").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& e = j.at("energy");
  c.energy.gc = e.at("gc").get<double>();
  c.energy.au = e.at("au").get<double>();
  c.energy.gu = e.at("gu").get<double>();
  c.energy.loop_penalty = e.at("loop_penalty").get<double>();
  c.energy.min_hairpin = e.at("min_hairpin").get<std::size_t>();
  const auto& t = j.at("thermo");
  c.thermo.dh_gc = t.at("dh_gc").get<double>();
  c.thermo.dh_au = t.at("dh_au").get<double>();
  c.thermo.dh_gu = t.at("dh_gu").get<double>();
  c.thermo.ds_gc = t.at("ds_gc").get<double>();
  c.thermo.ds_au = t.at("ds_au").get<double>();
  c.thermo.ds_gu = t.at("ds_gu").get<double>();
  c.thermo.strand_concentration = t.at("strand_concentration").get<double>();
  c.thermo.gas_constant = t.at("gas_constant").get<double>();
  c.thermo.tm_min = t.at("tm_min").get<double>();
  c.thermo.tm_max = t.at("tm_max").get<double>();
  return c;
}

json metrics_json(const Metrics& m) {
  return {{"tp", m.tp},
          {"fp", m.fp},
          {"tn", m.tn},
          {"fn", m.fn},
          {"sensitivity", m.sensitivity},
          {"specificity", m.specificity},
          {"accuracy", m.accuracy},
          {"precision", m.precision},
          {"f1", m.f1}};
}

}  // namespace

PreparedData prepare_data(const LabeledDataset& dataset, const PipelineConfig& config) {
  PreparedData data;
  for (const auto& ex : dataset.examples) {
    data.ids.push_back(ex.sequence.id);
    data.labels.push_back(static_cast<int>(ex.label));
    data.sequences.push_back(ex.sequence);
  }
  if (config.uses_features()) {
    FeatureConfig fc = config.features;
    fc.seed = config.seed;
    data.feature_names = subset_names(config.subset);
    data.features = extract_matrix(data.sequences, fc, data.feature_names);
  }
  return data;
}

PreparedData prepare_data(const FeatureTable& table, const PipelineConfig& config) {
  if (!is_dbn(config.model)) {
    throw UsageError("model " + config.model + " trains on sequences, not on a feature CSV");
  }
  const auto selected = select_columns(table, subset_names(config.subset));
  PreparedData data;
  data.ids = selected.ids;
  data.labels = selected.labels;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] < 0) throw DataError("feature row '" + data.ids[i] + "' has no label");
  }
  data.feature_names = selected.names;
  data.features = selected.values;
  return data;
}

TrainedModel fit_model(const PipelineConfig& config, const PreparedData& data,
                       std::span<const std::size_t> train, std::uint64_t seed, FitAudit* audit) {
  if (train.empty()) throw DataError("empty training split");
  std::vector<std::size_t> rows(train.begin(), train.end());
  const bool dbn = is_dbn(config.model);
  if ((dbn || config.balance) && data.features.rows() != data.size()) {
    throw UsageError("pipeline needs features but none were prepared");
  }
  if (!dbn && data.sequences.size() != data.size()) {
    throw UsageError("CNN pipeline needs sequences");
  }

  if (config.balance) {
    const auto stats = fit_normalizer(data.features.select_rows(rows));
    if (audit) audit->normalizer_ids = pick(data.ids, rows);
    std::vector<std::size_t> pos, neg;
    for (std::size_t r : rows) (data.labels[r] == 1 ? pos : neg).push_back(r);
    if (neg.size() > pos.size()) {
      const Matrix neg_x = apply_normalizer(stats, data.features.select_rows(neg));
      const auto neg_ids = pick(data.ids, neg);
      const auto keep = undersample_negatives(neg_x, neg_ids, pos.size(),
                                              derive_seed(seed, stream::kUndersample), config.balance_k);
      if (audit) audit->balance_ids = neg_ids;
      std::unordered_set<std::string> kept(keep.begin(), keep.end());
      std::vector<std::size_t> balanced;
      for (std::size_t r : rows) {
        if (data.labels[r] == 1 || kept.count(data.ids[r])) balanced.push_back(r);
      }
      rows = std::move(balanced);
    }
  }

  std::vector<int> labels;
  for (std::size_t r : rows) labels.push_back(data.labels[r]);
  if (audit) audit->train_ids = pick(data.ids, rows);

  if (dbn) {
    const Matrix x = data.features.select_rows(rows);
    auto stats = fit_normalizer(x);
    if (audit && !config.balance) audit->normalizer_ids = pick(data.ids, rows);
    const Matrix xn = apply_normalizer(stats, x);
    const DbnPlan plan = build_dbn(xn.cols(), config.head);
    PretrainConfig pre = config.pretrain;
    pre.seed = derive_seed(seed, stream::kRbm);
    const auto stack = dbn_pretrain(plan, xn, pre);
    FinetuneConfig fine;
    fine.train = config.train;
    fine.train.seed = seed;
    fine.head_epochs = config.head_epochs;
    TrainedModel model(config.model, dbn_finetune(stack.stack, plan, xn, labels, fine));
    model.feature_names = data.feature_names;
    model.normalizer = std::move(stats);
    model.features = config.features;
    model.features.seed = config.seed;
    model.pretrained_stack = stack.stack;
    model.seed = seed;
    model.config_json = config_to_json(config).dump();
    return model;
  }

  std::vector<RnaSequence> seqs;
  for (std::size_t r : rows) seqs.push_back(data.sequences[r]);
  Network net(build_cnn(parse_model_choice(config.model), config.hyper, kMaxSequenceLength), seed);
  TrainConfig tc = config.train;
  tc.seed = seed;
  train_network(net, onehot_tensors(seqs, kMaxSequenceLength), labels, tc);
  TrainedModel model(config.model, std::move(net));
  model.seed = seed;
  model.config_json = config_to_json(config).dump();
  return model;
}

std::vector<double> predict_rows(TrainedModel& model, const PreparedData& data,
                                 std::span<const std::size_t> rows) {
  if (is_dbn(model.model)) {
    if (data.feature_names != model.feature_names) {
      throw DataError("feature columns do not match the model's recorded features");
    }
    const Matrix x = apply_normalizer(model.normalizer, data.features.select_rows(rows));
    return predict_positive(model.network, row_tensors(x));
  }
  if (data.sequences.size() != data.size()) throw UsageError("CNN prediction needs sequences");
  std::vector<RnaSequence> seqs;
  for (std::size_t r : rows) seqs.push_back(data.sequences[r]);
  return predict_positive(model.network, onehot_tensors(seqs, model.input_width));
}

std::vector<double> predict_sequences(TrainedModel& model, std::span<const RnaSequence> sequences) {
  if (is_dbn(model.model)) {
    const Matrix x = apply_normalizer(model.normalizer,
                                      extract_matrix(sequences, model.features, model.feature_names));
    return predict_positive(model.network, row_tensors(x));
  }
  return predict_positive(model.network, onehot_tensors(sequences, model.input_width));
}

ExperimentReport cross_validate(const PipelineConfig& config, const PreparedData& data,
                                const FoldPlan* plan, int jobs) {
  const auto start = std::chrono::steady_clock::now();
  if (config.repeats < 1) throw UsageError("repeats must be >= 1");
  std::vector<FoldPlan> plans;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    plans.push_back(plan ? *plan
                         : stratified_kfold(data.labels, config.n_folds,
                                            derive_seed(config.seed, stream::kRepeat, r)));
  }
  for (const auto& p : plans) {
    for (const auto& f : p.folds) {
      for (std::size_t i : f.train) {
        if (i >= data.size()) throw DataError("fold plan index out of range");
      }
      for (std::size_t i : f.test) {
        if (i >= data.size()) throw DataError("fold plan index out of range");
      }
    }
  }

  struct Task {
    std::size_t repeat, fold;
  };
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < plans.size(); ++r) {
    for (std::size_t f = 0; f < plans[r].folds.size(); ++f) tasks.push_back({r, f});
  }
  std::vector<FoldResult> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  const auto n_tasks = static_cast<std::ptrdiff_t>(tasks.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs) if (jobs > 1)
  for (std::ptrdiff_t t = 0; t < n_tasks; ++t) {
    const auto [r, f] = tasks[static_cast<std::size_t>(t)];
    const auto& split = plans[r].folds[f];
    try {
      FoldResult res;
      res.repeat = r;
      res.fold = f;
      res.seed = derive_seed(config.seed, stream::kFold, r * plans[r].n_folds + f);
      res.n_train = split.train.size();
      res.n_test = split.test.size();
      auto model = fit_model(config, data, split.train, res.seed, &res.audit);
      const auto scores = predict_rows(model, data, split.test);
      std::vector<int> truth;
      for (std::size_t i : split.test) truth.push_back(data.labels[i]);
      res.metrics = evaluate_scores(scores, truth);
      res.test_ids = pick(data.ids, split.test);
      results[static_cast<std::size_t>(t)] = std::move(res);
    } catch (...) {
      errors[static_cast<std::size_t>(t)] = std::current_exception();
    }
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (errors[t]) {
      rethrow_with_context(errors[t], "repeat " + std::to_string(tasks[t].repeat) + " fold " +
                                          std::to_string(tasks[t].fold));
    }
  }

  ExperimentReport report;
  report.model = config.model;
  report.config_json = config_to_json(config).dump();
  report.folds = std::move(results);
  report.sensitivity = summarize(report.folds, &Metrics::sensitivity);
  report.specificity = summarize(report.folds, &Metrics::specificity);
  report.accuracy = summarize(report.folds, &Metrics::accuracy);
  report.precision = summarize(report.folds, &Metrics::precision);
  report.f1 = summarize(report.folds, &Metrics::f1);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string report_to_json(const ExperimentReport& report) {
  json j;
  j["model"] = report.model;
  j["config"] = json::parse(report.config_json);
  j["folds"] = json::array();
  for (const auto& f : report.folds) {
    json fj = metrics_json(f.metrics);
    fj["repeat"] = f.repeat;
    fj["fold"] = f.fold;
    fj["seed"] = f.seed;
    fj["n_train"] = f.n_train;
    fj["n_test"] = f.n_test;
    j["folds"].push_back(std::move(fj));
  }
  auto summary = [&](double MetricSummary::*field) {
    return json{{"sensitivity", report.sensitivity.*field},
                {"specificity", report.specificity.*field},
                {"accuracy", report.accuracy.*field},
                {"precision", report.precision.*field},
                {"f1", report.f1.*field}};
  };
  j["mean"] = summary(&MetricSummary::mean);
  j["std"] = summary(&MetricSummary::std);
  j["accuracy"] = report.accuracy.mean;
  j["wall_seconds"] = report.wall_seconds;
  return j.dump(2) + "\n";
}

std::string report_table(const ExperimentReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %12s %12s %12s\n", report.model.c_str(), "Sensitivity",
                "Specificity", "Accuracy");
  out += line;
  for (const auto& f : report.folds) {
    char name[48];
    std::snprintf(name, sizeof name, "repeat %zu fold %zu", f.repeat, f.fold);
    std::snprintf(line, sizeof line, "%-16s %12.4f %12.4f %12.4f\n", name, f.metrics.sensitivity,
                  f.metrics.specificity, f.metrics.accuracy);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-16s %12.4f %12.4f %12.4f\n", "mean", report.sensitivity.mean,
                report.specificity.mean, report.accuracy.mean);
  out += line;
  std::snprintf(line, sizeof line, "%-16s %12.4f %12.4f %12.4f\n", "std", report.sensitivity.std,
                report.specificity.std, report.accuracy.std);
  out += line;
  return out;
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["model"] = c.model;
  auto opt = [&](const char* key, const auto& value) {
    if (value) j[key] = *value;
  };
  opt("window", c.hyper.window);
  opt("filters", c.hyper.filters);
  opt("stride", c.hyper.stride);
  opt("window2", c.hyper.window2);
  opt("pool_window", c.hyper.pool_window);
  opt("pool_stride", c.hyper.pool_stride);
  opt("dense_units", c.hyper.dense_units);
  opt("dropout", c.hyper.dropout);
  j["subset"] = c.subset;
  j["head"] = to_string(c.head);
  j["learning_rate"] = c.train.learning_rate;
  j["batch_size"] = c.train.batch_size;
  j["epochs"] = c.train.epochs;
  j["momentum"] = c.train.momentum;
  j["pretrain_learning_rate"] = c.pretrain.learning_rate;
  j["pretrain_epochs"] = c.pretrain.epochs;
  j["pretrain_batch_size"] = c.pretrain.batch_size;
  j["head_epochs"] = c.head_epochs;
  j["n_samples"] = c.features.n_samples;
  j["n_shuffles"] = c.features.n_shuffles;
  j["temperature"] = c.features.temperature;
  j["balance"] = c.balance;
  j["balance_k"] = c.balance_k;
  j["folds"] = c.n_folds;
  j["repeats"] = c.repeats;
  j["seed"] = c.seed;
  return j;
}

std::vector<std::string> config_from_json(const json& j, PipelineConfig& c) {
  std::vector<std::string> used;
  auto get = [&](const char* key, auto& target) {
    if (!j.contains(key)) return;
    used.emplace_back(key);
    try {
      target = j.at(key).get<std::remove_reference_t<decltype(target)>>();
    } catch (const json::exception&) {
      throw UsageError(std::string("config key '") + key + "' has the wrong type");
    }
  };
  auto get_opt = [&](const char* key, auto& target) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
      used.emplace_back(key);
      target.reset();
      return;
    }
    typename std::remove_reference_t<decltype(target)>::value_type v{};
    get(key, v);
    target = v;
  };
  get("model", c.model);
  parse_model_choice(c.model);
  get_opt("window", c.hyper.window);
  get_opt("filters", c.hyper.filters);
  get_opt("stride", c.hyper.stride);
  get_opt("window2", c.hyper.window2);
  get_opt("pool_window", c.hyper.pool_window);
  get_opt("pool_stride", c.hyper.pool_stride);
  get_opt("dense_units", c.hyper.dense_units);
  get_opt("dropout", c.hyper.dropout);
  get("subset", c.subset);
  subset_names(c.subset);
  std::string head = to_string(c.head);
  get("head", head);
  c.head = parse_output_head(head);
  get("learning_rate", c.train.learning_rate);
  get("batch_size", c.train.batch_size);
  get("epochs", c.train.epochs);
  get("momentum", c.train.momentum);
  get("pretrain_learning_rate", c.pretrain.learning_rate);
  get("pretrain_epochs", c.pretrain.epochs);
  get("pretrain_batch_size", c.pretrain.batch_size);
  get("head_epochs", c.head_epochs);
  get("n_samples", c.features.n_samples);
  get("n_shuffles", c.features.n_shuffles);
  get("temperature", c.features.temperature);
  get("balance", c.balance);
  get("balance_k", c.balance_k);
  get("folds", c.n_folds);
  get("repeats", c.repeats);
  get("seed", c.seed);
  return used;
}

std::string model_to_json(const TrainedModel& model) {
  json j;
  j["format"] = "premir-model";
  j["version"] = kModelFormatVersion;
  j["model"] = model.model;
  j["input_width"] = model.input_width;
  j["seed"] = model.seed;
  j["config"] = model.config_json.empty() ? json::object() : json::parse(model.config_json);
  const auto& spec = model.network.spec();
  json net;
  net["input_shape"] = spec.input_shape;
  net["layers"] = json::array();
  for (const auto& l : spec.layers) {
    net["layers"].push_back({{"kind", to_string(l.kind)},
                             {"filters", l.filters},
                             {"window", l.window},
                             {"stride", l.stride},
                             {"units", l.units},
                             {"rate", l.rate},
                             {"activation", to_string(l.activation)},
                             {"frozen", l.frozen}});
  }
  j["network"] = std::move(net);
  const auto params = model.network.parameters();
  j["parameters"] = std::vector<double>(params.begin(), params.end());
  if (is_dbn(model.model)) {
    j["feature_names"] = model.feature_names;
    j["normalizer"] = {{"min", model.normalizer.min}, {"max", model.normalizer.max}};
    j["features"] = feature_config_to_json(model.features);
    j["pretrained_stack"] = json::array();
    for (const auto& rbm : model.pretrained_stack) {
      j["pretrained_stack"].push_back({{"n_visible", rbm.n_visible},
                                       {"n_hidden", rbm.n_hidden},
                                       {"weights", rbm.weights},
                                       {"visible_bias", rbm.visible_bias},
                                       {"hidden_bias", rbm.hidden_bias}});
    }
  }
  return j.dump() + "\n";
}

TrainedModel model_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    throw DataError("model file is truncated or corrupt (not valid JSON)");
  }
  try {
    if (j.at("format").get<std::string>() != "premir-model") throw DataError("not a premir model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("model file version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kModelFormatVersion) + ")");
    }
    NetworkSpec spec;
    spec.input_shape = j.at("network").at("input_shape").get<Shape>();
    for (const auto& lj : j.at("network").at("layers")) {
      LayerSpec l;
      l.kind = parse_layer_kind(lj.at("kind").get<std::string>());
      l.filters = lj.at("filters").get<std::size_t>();
      l.window = lj.at("window").get<std::size_t>();
      l.stride = lj.at("stride").get<std::size_t>();
      l.units = lj.at("units").get<std::size_t>();
      l.rate = lj.at("rate").get<double>();
      l.activation = parse_activation(lj.at("activation").get<std::string>());
      l.frozen = lj.at("frozen").get<bool>();
      spec.layers.push_back(l);
    }
    const std::string name = j.at("model").get<std::string>();
    parse_model_choice(name);
    TrainedModel model(name, Network(spec, 1));
    model.input_width = j.at("input_width").get<std::size_t>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.config_json = j.at("config").dump();
    const auto params = j.at("parameters").get<std::vector<double>>();
    if (params.size() != model.network.parameter_count()) {
      throw DataError("model file has " + std::to_string(params.size()) + " parameters, network needs " +
                      std::to_string(model.network.parameter_count()));
    }
    std::copy(params.begin(), params.end(), model.network.parameters().begin());
    if (is_dbn(name)) {
      model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      for (const auto& f : model.feature_names) feature_index(f);
      model.normalizer.min = j.at("normalizer").at("min").get<std::vector<double>>();
      model.normalizer.max = j.at("normalizer").at("max").get<std::vector<double>>();
      model.features = feature_config_from_json(j.at("features"));
      for (const auto& rj : j.at("pretrained_stack")) {
        RbmParams rbm;
        rbm.n_visible = rj.at("n_visible").get<std::size_t>();
        rbm.n_hidden = rj.at("n_hidden").get<std::size_t>();
        rbm.weights = rj.at("weights").get<std::vector<double>>();
        rbm.visible_bias = rj.at("visible_bias").get<std::vector<double>>();
        rbm.hidden_bias = rj.at("hidden_bias").get<std::vector<double>>();
        if (rbm.weights.size() != rbm.n_visible * rbm.n_hidden || rbm.visible_bias.size() != rbm.n_visible ||
            rbm.hidden_bias.size() != rbm.n_hidden) {
          throw DataError("model file pretrained stack has inconsistent sizes");
        }
        model.pretrained_stack.push_back(std::move(rbm));
      }
      const std::size_t d = model.feature_names.size();
      if (spec.input_shape != Shape{d} || model.normalizer.min.size() != d || model.normalizer.max.size() != d) {
        throw DataError("model file feature pipeline does not match its network input");
      }
    } else if (spec.input_shape != Shape{4, model.input_width}) {
      throw DataError("model file one-hot width does not match its network input");
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is corrupt: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("model file is corrupt: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  write_text_file(path, model_to_json(model));
}

TrainedModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace premir
