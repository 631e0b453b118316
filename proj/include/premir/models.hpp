#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "premir/network.hpp"
#include "premir/rbm.hpp"
#include "premir/sequence_io.hpp"

namespace premir {

// Optional overrides for build_cnn; unset fields take the type's default.
struct CnnHyper {
  std::optional<std::size_t> window;       // first convolution, 5-24
  std::optional<std::size_t> filters;      // per convolution, 5-20
  std::optional<std::size_t> stride;       // first convolution, 1-24
  std::optional<std::size_t> window2;      // later convolutions, 5-24
  std::optional<std::size_t> pool_window;  // 1-9
  std::optional<std::size_t> pool_stride;  // 1-9
  std::optional<std::size_t> dense_units;  // type 2 hidden layer, 1-512
  std::optional<double> dropout;           // 0-0.4

  bool operator==(const CnnHyper&) const = default;
};

/// Tested architecture families over a 4 x width one-hot input:
///   1: conv -> max_pool -> dropout -> dense(2) -> softmax
///   2: conv(stride) -> dense(relu) -> dropout -> dense(2) -> softmax
///   3: conv -> conv -> max_pool -> dropout -> dense(2) -> softmax
///   4: conv x3 -> max_pool -> dropout -> dense(2) -> softmax
/// Throws UsageError for an unknown type or an out-of-range hyper-parameter.
NetworkSpec build_cnn(int type, const CnnHyper& hyper = {},
                      std::size_t input_width = kMaxSequenceLength);

// "best2": type 2 with window 18, stride 4, 20 filters, 90 hidden units.
// "best3": type 3 with 12 filters of width 12, then 12 of width 6, pool 6/4.
NetworkSpec build_cnn_preset(std::string_view name, std::size_t input_width = kMaxSequenceLength);

// Presets accept the same overrides as the numbered types.
// A model choice as written on the command line: cnn:1..cnn:4, cnn:best2,
// cnn:best3 or dbn.
struct ModelChoice {
  std::string family;  // "cnn" or "dbn"
  std::string variant;  // "1".."4", "best2", "best3"; empty for dbn

  std::string name() const { return variant.empty() ? family : family + ":" + variant; }
};
ModelChoice parse_model_choice(std::string_view text);
NetworkSpec build_cnn(const ModelChoice& choice, const CnnHyper& hyper = {},
                      std::size_t input_width = kMaxSequenceLength);

// [input_dim, 100, 70, 35] plus the output head.
DbnPlan build_dbn(std::size_t input_dim, OutputHead head = OutputHead::softmax2);

struct Metrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double f1 = 0.0;

  bool operator==(const Metrics&) const = default;
};

// Derived rates; every 0/0 ratio is 0.
Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);
// Confusion counts of predicted vs true labels (1 = positive).
Metrics evaluate(std::span<const int> predicted, std::span<const int> truth);
// Argmax decision on class-1 scores: positive iff score > 0.5.
Metrics evaluate_scores(std::span<const double> scores, std::span<const int> truth);

/// Synthetic stand-in for a pre-miRNA set. Positives are stem-loop hairpins
/// (18-30 bp stem, 4-8 nt loop, 5-10% stem substitutions, short random
/// flanks, 43-154 nt overall); negatives are dinucleotide shuffles of
/// independently drawn hairpins.
LabeledDataset synth_dataset(std::size_t n_pos, std::size_t n_neg, std::uint64_t seed);

}  // namespace premir
