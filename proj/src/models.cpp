#include "premir/models.hpp"

#include <algorithm>
#include <cstdio>

#include "premir/errors.hpp"
#include "premir/random.hpp"
#include "premir/shuffle.hpp"

namespace premir {

namespace {

template <typename T>
T checked(const std::optional<T>& value, T fallback, T lo, T hi, const char* what) {
  const T v = value.value_or(fallback);
  if (v < lo || v > hi) {
    char buf[160];
    if constexpr (std::is_floating_point_v<T>) {
      std::snprintf(buf, sizeof buf, "%s %g outside the allowed range %g–%g", what, v, lo, hi);
    } else {
      std::snprintf(buf, sizeof buf, "%s %zu outside the allowed range %zu–%zu", what,
                    static_cast<std::size_t>(v), static_cast<std::size_t>(lo),
                    static_cast<std::size_t>(hi));
    }
    throw UsageError(buf);
  }
  return v;
}

constexpr std::size_t kMinWindow = 5, kMaxWindow = 24;
constexpr std::size_t kMinFilters = 5, kMaxFilters = 20;
constexpr std::size_t kMaxStride = 24;
constexpr std::size_t kMaxPool = 9;
constexpr double kMaxDropout = 0.4;

char complement(char b) {
  switch (b) {
    case 'A': return 'U';
    case 'U': return 'A';
    case 'G': return 'C';
    default: return 'G';
  }
}

char random_base(Rng& rng) { return "ACGU"[uniform_index(rng, 4)]; }

std::size_t uniform_between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + uniform_index(rng, hi - lo + 1);
}

std::string hairpin(Rng& rng) {
  const std::size_t stem = uniform_between(rng, 18, 30);
  const std::size_t loop = uniform_between(rng, 4, 8);
  std::string arm;
  for (std::size_t i = 0; i < stem; ++i) arm += random_base(rng);
  std::string core = arm;
  for (std::size_t i = 0; i < loop; ++i) core += random_base(rng);
  for (std::size_t i = stem; i-- > 0;) core += complement(arm[i]);

  // Substitutions inside the stem, 5-10% of its bases.
  const double rate = 0.05 + 0.05 * uniform01(rng);
  const auto mutations = static_cast<std::size_t>(rate * static_cast<double>(2 * stem) + 0.5);
  for (std::size_t m = 0; m < mutations; ++m) {
    std::size_t pos = uniform_index(rng, 2 * stem);
    if (pos >= stem) pos += loop;
    char b = core[pos];
    while (b == core[pos]) b = random_base(rng);
    core[pos] = b;
  }

  std::size_t flank = uniform_between(rng, 0, 30);
  if (core.size() + flank < 43) flank = 43 - core.size();
  const std::size_t left = uniform_between(rng, 0, flank);
  std::string out;
  for (std::size_t i = 0; i < left; ++i) out += random_base(rng);
  out += core;
  for (std::size_t i = left; i < flank; ++i) out += random_base(rng);
  return out;
}

std::string synth_id(const char* prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, index + 1);
  return buf;
}

}  // namespace

NetworkSpec build_cnn(int type, const CnnHyper& h, std::size_t input_width) {
  NetworkSpec spec;
  spec.input_shape = {4, input_width};
  auto& L = spec.layers;
  switch (type) {
    case 1: {
      const auto filters = checked<std::size_t>(h.filters, 10, kMinFilters, kMaxFilters, "filters");
      L.push_back(LayerSpec::conv1d(filters,
                                    checked<std::size_t>(h.window, 10, kMinWindow, kMaxWindow, "window"),
                                    checked<std::size_t>(h.stride, 1, 1, kMaxStride, "stride")));
      L.push_back(LayerSpec::max_pool(checked<std::size_t>(h.pool_window, 4, 1, kMaxPool, "pool window"),
                                      checked<std::size_t>(h.pool_stride, 4, 1, kMaxPool, "pool stride")));
      break;
    }
    case 2: {
      L.push_back(LayerSpec::conv1d(checked<std::size_t>(h.filters, 20, kMinFilters, kMaxFilters, "filters"),
                                    checked<std::size_t>(h.window, 18, kMinWindow, kMaxWindow, "window"),
                                    checked<std::size_t>(h.stride, 4, 1, kMaxStride, "stride")));
      L.push_back(LayerSpec::dense(checked<std::size_t>(h.dense_units, 90, 1, 512, "dense units"),
                                   Activation::relu));
      break;
    }
    case 3:
    case 4: {
      const auto filters = checked<std::size_t>(h.filters, 12, kMinFilters, kMaxFilters, "filters");
      const auto window2 = checked<std::size_t>(h.window2, 6, kMinWindow, kMaxWindow, "window2");
      L.push_back(LayerSpec::conv1d(filters,
                                    checked<std::size_t>(h.window, 12, kMinWindow, kMaxWindow, "window"),
                                    checked<std::size_t>(h.stride, 1, 1, kMaxStride, "stride")));
      for (int extra = 0; extra < type - 2; ++extra) L.push_back(LayerSpec::conv1d(filters, window2, 1));
      L.push_back(LayerSpec::max_pool(checked<std::size_t>(h.pool_window, 6, 1, kMaxPool, "pool window"),
                                      checked<std::size_t>(h.pool_stride, 4, 1, kMaxPool, "pool stride")));
      break;
    }
    default:
      throw UsageError("unknown CNN type " + std::to_string(type) + " (expected 1-4)");
  }
  if (type != 2 && h.dense_units) throw UsageError("dense units only apply to CNN type 2");
  if (type != 3 && type != 4 && h.window2) throw UsageError("window2 only applies to CNN types 3 and 4");
  L.push_back(LayerSpec::dropout(checked<double>(h.dropout, 0.3, 0.0, kMaxDropout, "dropout")));
  L.push_back(LayerSpec::dense(2, Activation::identity));
  L.push_back(LayerSpec::softmax());
  infer_shapes(spec);
  return spec;
}

namespace {

// Preset values under any explicit overrides.
std::pair<int, CnnHyper> preset(std::string_view name, const CnnHyper& overrides) {
  CnnHyper h = overrides;
  auto fill = [](auto& field, auto value) {
    if (!field) field = value;
  };
  fill(h.dropout, 0.3);
  if (name == "best2") {
    fill(h.window, std::size_t{18});
    fill(h.stride, std::size_t{4});
    fill(h.filters, std::size_t{20});
    fill(h.dense_units, std::size_t{90});
    return {2, h};
  }
  if (name == "best3") {
    fill(h.window, std::size_t{12});
    fill(h.stride, std::size_t{1});
    fill(h.filters, std::size_t{12});
    fill(h.window2, std::size_t{6});
    fill(h.pool_window, std::size_t{6});
    fill(h.pool_stride, std::size_t{4});
    return {3, h};
  }
  throw UsageError("unknown CNN preset '" + std::string(name) + "' (expected best2 or best3)");
}

}  // namespace

NetworkSpec build_cnn_preset(std::string_view name, std::size_t input_width) {
  const auto [type, h] = preset(name, {});
  return build_cnn(type, h, input_width);
}

ModelChoice parse_model_choice(std::string_view text) {
  if (text == "dbn") return {"dbn", ""};
  if (text.substr(0, 4) == "cnn:") {
    const std::string variant(text.substr(4));
    if (variant == "1" || variant == "2" || variant == "3" || variant == "4" || variant == "best2" ||
        variant == "best3") {
      return {"cnn", variant};
    }
  }
  throw UsageError("unknown model '" + std::string(text) +
                   "' (expected cnn:1..cnn:4, cnn:best2, cnn:best3 or dbn)");
}

NetworkSpec build_cnn(const ModelChoice& choice, const CnnHyper& hyper, std::size_t input_width) {
  if (choice.family != "cnn") throw UsageError("model '" + choice.name() + "' is not a CNN");
  if (choice.variant.rfind("best", 0) == 0) {
    const auto [type, h] = preset(choice.variant, hyper);
    return build_cnn(type, h, input_width);
  }
  return build_cnn(std::stoi(choice.variant), hyper, input_width);
}

DbnPlan build_dbn(std::size_t input_dim, OutputHead head) {
  if (input_dim < 1) throw UsageError("DBN input dimension must be >= 1");
  return {{input_dim, 100, 70, 35}, head};
}

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
  Metrics m{tp, fp, tn, fn};
  const auto TP = static_cast<double>(tp), FP = static_cast<double>(fp);
  const auto TN = static_cast<double>(tn), FN = static_cast<double>(fn);
  m.sensitivity = ratio(TP, TP + FN);
  m.specificity = ratio(TN, TN + FP);
  m.accuracy = ratio(TP + TN, TP + TN + FP + FN);
  m.precision = ratio(TP, TP + FP);
  m.f1 = ratio(2.0 * m.precision * m.sensitivity, m.precision + m.sensitivity);
  return m;
}

Metrics evaluate(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DataError("prediction and label counts differ");
  if (truth.empty()) throw DataError("cannot evaluate on an empty test set");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] == 1;
    const bool t = truth[i] == 1;
    tp += p && t;
    fp += p && !t;
    tn += !p && !t;
    fn += !p && t;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

Metrics evaluate_scores(std::span<const double> scores, std::span<const int> truth) {
  std::vector<int> predicted;
  predicted.reserve(scores.size());
  for (double s : scores) predicted.push_back(s > 0.5 ? 1 : 0);
  return evaluate(predicted, truth);
}

LabeledDataset synth_dataset(std::size_t n_pos, std::size_t n_neg, std::uint64_t seed) {
  std::vector<RnaSequence> pos, neg;
  for (std::size_t k = 0; k < n_pos; ++k) {
    Rng rng(derive_seed(seed, stream::kSynth, k));
    pos.push_back(make_sequence(synth_id("syn_pos_", k), hairpin(rng)));
  }
  for (std::size_t k = 0; k < n_neg; ++k) {
    Rng rng(derive_seed(seed, stream::kSynth, n_pos + k));
    const std::string template_hairpin = hairpin(rng);
    neg.push_back(make_sequence(synth_id("syn_neg_", k), dinucleotide_shuffle(template_hairpin, rng)));
  }
  return make_dataset(std::move(pos), std::move(neg),
                      "synthetic n_pos=" + std::to_string(n_pos) + " n_neg=" + std::to_string(n_neg) +
                          " seed=" + std::to_string(seed));
}

}  // namespace premir
