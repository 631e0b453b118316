#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "premir/balance.hpp"
#include "premir/features.hpp"
#include "premir/models.hpp"
#include "premir/network.hpp"
#include "premir/rbm.hpp"

namespace premir {

// Everything that determines a training run apart from the data itself.
struct PipelineConfig {
  std::string model = "cnn:best3";
  CnnHyper hyper;
  std::string subset = "selected20";  // DBN input features
  OutputHead head = OutputHead::softmax2;
  TrainConfig train;
  PretrainConfig pretrain;
  std::size_t head_epochs = 100;
  FeatureConfig features;
  bool balance = false;  // undersample training negatives down to the positive count
  std::size_t balance_k = 5;
  std::size_t n_folds = 8;
  std::size_t repeats = 1;
  std::uint64_t seed = 1;

  bool uses_features() const { return model == "dbn" || balance; }
};

// Ids, labels and whichever inputs the pipeline needs: sequences for the
// CNN (and for computing features), a raw feature matrix for the DBN and
// the balancer.
struct PreparedData {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<RnaSequence> sequences;  // empty when built from a feature CSV
  std::vector<std::string> feature_names;
  Matrix features;  // unnormalized, one row per id

  std::size_t size() const { return ids.size(); }
};

// Computes the config's feature subset when the pipeline needs it.
PreparedData prepare_data(const LabeledDataset& dataset, const PipelineConfig& config);
// From a labeled feature CSV; the DBN is the only model that can use it.
PreparedData prepare_data(const FeatureTable& table, const PipelineConfig& config);

struct TrainedModel {
  TrainedModel(std::string name, Network net) : model(std::move(name)), network(std::move(net)) {}

  std::string model;  // "cnn:..." or "dbn"
  Network network;
  std::size_t input_width = kMaxSequenceLength;
  // Feature pipeline, DBN only.
  std::vector<std::string> feature_names;
  NormalizationStats normalizer;
  FeatureConfig features;
  std::vector<RbmParams> pretrained_stack;  // kept for audits, not used to predict
  // Provenance: training seed and the flat pipeline config.
  std::uint64_t seed = 0;
  std::string config_json;
};

// Ids that fed any fitted component of one fold.
struct FitAudit {
  std::vector<std::string> normalizer_ids;
  std::vector<std::string> balance_ids;
  std::vector<std::string> train_ids;
};

/// Fits normalizer, balancer and network on the rows in `train` only.
TrainedModel fit_model(const PipelineConfig& config, const PreparedData& data,
                       std::span<const std::size_t> train, std::uint64_t seed,
                       FitAudit* audit = nullptr);

// Class-1 scores for the given rows.
std::vector<double> predict_rows(TrainedModel& model, const PreparedData& data,
                                 std::span<const std::size_t> rows);
// Class-1 scores for raw sequences; DBN features are computed with the
// model's recorded feature config.
std::vector<double> predict_sequences(TrainedModel& model, std::span<const RnaSequence> sequences);

struct FoldResult {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  Metrics metrics;
  FitAudit audit;  // in memory only
  std::vector<std::string> test_ids;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over folds
};

struct ExperimentReport {
  std::string model;
  std::string config_json;  // flat snapshot, see config_to_json
  std::vector<FoldResult> folds;
  MetricSummary sensitivity, specificity, accuracy, precision, f1;
  double wall_seconds = 0.0;
};

/// Runs `config.repeats` rounds of `plan` (or a fresh stratified plan per
/// repeat when `plan` is null). Fold seeds derive from config.seed by
/// (repeat, fold). Folds run in parallel when jobs > 1; results do not
/// depend on jobs. A failing fold rethrows with its index.
ExperimentReport cross_validate(const PipelineConfig& config, const PreparedData& data,
                                const FoldPlan* plan = nullptr, int jobs = 1);

std::string report_to_json(const ExperimentReport& report);
// Sensitivity / Specificity / Accuracy table, one row per fold plus mean and std.
std::string report_table(const ExperimentReport& report);

// Flat JSON object of every PipelineConfig field.
nlohmann::json config_to_json(const PipelineConfig& config);
// Reads the recognised keys of `j` into `config`; returns the keys it used.
std::vector<std::string> config_from_json(const nlohmann::json& j, PipelineConfig& config);

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const TrainedModel& model);
// Throws DataError on malformed or truncated text and on a version mismatch.
TrainedModel model_from_json(std::string_view text);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace premir
