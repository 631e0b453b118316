#include "premir/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "premir/balance.hpp"
#include "premir/errors.hpp"
#include "premir/features.hpp"
#include "premir/kernels.hpp"
#include "premir/models.hpp"
#include "premir/pipeline.hpp"
#include "premir/random.hpp"

namespace premir {

using nlohmann::json;

namespace {

enum class KeyType { count, real, boolean, text, text_list };

struct KeySpec {
  KeyType type;
  const char* help;
};

// Every configuration key any subcommand accepts. Flags are the key with
// '_' replaced by '-'.
const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table = {
      {"model", {KeyType::text, "cnn:1..cnn:4, cnn:best2, cnn:best3 or dbn"}},
      {"window", {KeyType::count, "filter size of the first convolution (5-24)"}},
      {"filters", {KeyType::count, "filters per convolution (5-20)"}},
      {"stride", {KeyType::count, "stride of the first convolution (1-24)"}},
      {"window2", {KeyType::count, "filter size of later convolutions, types 3/4 (5-24)"}},
      {"pool_window", {KeyType::count, "max-pool window (1-9)"}},
      {"pool_stride", {KeyType::count, "max-pool stride (1-9)"}},
      {"dense_units", {KeyType::count, "hidden units of CNN type 2"}},
      {"dropout", {KeyType::real, "dropout rate before the output layer (0-0.4)"}},
      {"subset", {KeyType::text, "feature subset: full or selected20"}},
      {"head", {KeyType::text, "DBN output head: softmax2 or sigmoid1"}},
      {"learning_rate", {KeyType::real, "SGD learning rate"}},
      {"batch_size", {KeyType::count, "SGD minibatch size"}},
      {"epochs", {KeyType::count, "training epochs (DBN: 0 freezes the pretrained stack)"}},
      {"momentum", {KeyType::real, "SGD momentum (0 = plain SGD)"}},
      {"pretrain_learning_rate", {KeyType::real, "CD-1 learning rate"}},
      {"pretrain_epochs", {KeyType::count, "CD-1 epochs per RBM"}},
      {"pretrain_batch_size", {KeyType::count, "CD-1 minibatch size"}},
      {"head_epochs", {KeyType::count, "head-only epochs when epochs = 0"}},
      {"n_samples", {KeyType::count, "sampled structures for ensemble features"}},
      {"n_shuffles", {KeyType::count, "dinucleotide shuffles for z-scores (>= 10)"}},
      {"temperature", {KeyType::real, "Boltzmann temperature of the structure ensemble"}},
      {"balance", {KeyType::boolean, "undersample training negatives to the positive count"}},
      {"balance_k", {KeyType::count, "k-means clusters for undersampling"}},
      {"folds", {KeyType::count, "cross-validation folds (train: 0 skips cross-validation)"}},
      {"repeats", {KeyType::count, "repeated cross-validation rounds"}},
      {"seed", {KeyType::count, "master seed; every random stream derives from it"}},
      {"jobs", {KeyType::count, "worker threads"}},
      {"positives", {KeyType::text, "FASTA of positive sequences"}},
      {"negatives", {KeyType::text, "FASTA of negative sequences"}},
      {"synthetic", {KeyType::text, "synthetic data set N_POS,N_NEG"}},
      {"features", {KeyType::text, "labeled feature CSV"}},
      {"fasta", {KeyType::text_list, "FASTA file(s) of unlabeled sequences"}},
      {"fold_plan", {KeyType::text, "fold plan JSON to use instead of a fresh split"}},
      {"model_file", {KeyType::text, "trained model file"}},
      {"out", {KeyType::text, "output file"}},
      {"out_dir", {KeyType::text, "output directory"}},
      {"out_ids", {KeyType::text, "output file of selected negative ids"}},
      {"report", {KeyType::text, "JSON report file"}},
      {"n_pos", {KeyType::count, "number of positives"}},
      {"n_neg", {KeyType::count, "number of negatives"}},
      {"target", {KeyType::count, "negatives to keep (0 = as many as positives)"}},
      {"snapshot", {KeyType::text, "where to write the config snapshot"}},
  };
  return table;
}

struct Command {
  const char* name;
  const char* help;
  std::vector<std::string> keys;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> list = {
      {"extract",
       "compute a feature CSV from FASTA input",
       {"fasta", "positives", "negatives", "subset", "n_samples", "n_shuffles", "temperature", "seed",
        "jobs", "out", "snapshot"}},
      {"balance",
       "undersample negatives with k-means and write a stratified fold plan",
       {"features", "target", "balance_k", "folds", "seed", "out", "out_ids", "snapshot"}},
      {"synth", "write a synthetic hairpin data set", {"n_pos", "n_neg", "seed", "out_dir", "snapshot"}},
      {"train",
       "cross-validate and train a model",
       {"model", "window", "filters", "stride", "window2", "pool_window", "pool_stride", "dense_units",
        "dropout", "subset", "head", "learning_rate", "batch_size", "epochs", "momentum",
        "pretrain_learning_rate", "pretrain_epochs", "pretrain_batch_size", "head_epochs", "n_samples",
        "n_shuffles", "temperature", "balance", "balance_k", "folds", "repeats", "seed", "jobs",
        "positives", "negatives", "synthetic", "features", "fold_plan", "out", "report", "snapshot"}},
      {"eval",
       "evaluate a trained model on labeled data",
       {"model_file", "positives", "negatives", "synthetic", "features", "seed", "jobs", "report",
        "snapshot"}},
      {"predict", "score unlabeled sequences with a trained model",
       {"model_file", "fasta", "jobs", "out", "snapshot"}},
  };
  return list;
}

// Defaults of every key a command takes; unset paths are absent.
json command_defaults(const Command& cmd) {
  const json pipeline = config_to_json(PipelineConfig{});
  json d = json::object();
  for (const auto& key : cmd.keys) {
    if (pipeline.contains(key)) d[key] = pipeline[key];
  }
  auto set = [&](const char* key, json value) {
    if (std::find(cmd.keys.begin(), cmd.keys.end(), key) != cmd.keys.end()) d[key] = std::move(value);
  };
  set("jobs", 1);
  set("n_pos", 200);
  set("n_neg", 200);
  set("target", 0);
  set("fasta", json::array());
  if (std::string_view(cmd.name) == "extract") set("subset", "full");
  return d;
}

json parse_value(const std::string& key, const std::string& text) {
  const KeyType type = key_table().at(key).type;
  try {
    std::size_t used = 0;
    switch (type) {
      case KeyType::count: {
        if (text.empty() || text[0] == '-') throw std::invalid_argument("negative");
        const auto v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return v;
      }
      case KeyType::real: {
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return v;
      }
      case KeyType::boolean:
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw std::invalid_argument("bool");
      case KeyType::text:
      case KeyType::text_list:
        return text;
    }
  } catch (const std::logic_error&) {
  }
  throw UsageError("--" + key + ": cannot parse '" + text + "'");
}

void check_type(const std::string& key, const json& value) {
  bool ok = false;
  switch (key_table().at(key).type) {
    case KeyType::count: ok = value.is_number_unsigned() || (value.is_number_integer() && value.get<long long>() >= 0); break;
    case KeyType::real: ok = value.is_number(); break;
    case KeyType::boolean: ok = value.is_boolean(); break;
    case KeyType::text: ok = value.is_string(); break;
    case KeyType::text_list:
      ok = value.is_array() && std::all_of(value.begin(), value.end(), [](const json& v) { return v.is_string(); });
      break;
  }
  if (!ok && !value.is_null()) throw UsageError("config key '" + key + "' has the wrong type");
}

json read_config_file(const std::string& path, const Command& cmd) {
  json file;
  try {
    file = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!file.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
  if (!file.contains("version")) throw UsageError("config file " + path + " lacks a 'version' key");
  if (file["version"] != kConfigVersion) {
    throw UsageError("config file " + path + " has version " + file["version"].dump() + ", expected " +
                     std::to_string(kConfigVersion));
  }
  json out = json::object();
  for (const auto& [key, value] : file.items()) {
    if (key == "version") continue;
    if (key == "command") {
      if (value != cmd.name) {
        throw UsageError("config file " + path + " is for '" + value.dump() + "', not '" + cmd.name + "'");
      }
      continue;
    }
    if (std::find(cmd.keys.begin(), cmd.keys.end(), key) == cmd.keys.end()) {
      throw UsageError("config file " + path + ": unknown key '" + key + "' for " + cmd.name);
    }
    check_type(key, value);
    out[key] = value;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string str(const json& cfg, const char* key) {
  return cfg.contains(key) && cfg[key].is_string() ? cfg[key].get<std::string>() : std::string();
}

std::size_t count(const json& cfg, const char* key) { return cfg.at(key).get<std::size_t>(); }

std::string require(const json& cfg, const char* key) {
  auto v = str(cfg, key);
  if (v.empty()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    throw UsageError("missing required --" + flag);
  }
  return v;
}

void write_snapshot(const json& cfg, const std::string& command, const std::string& fallback) {
  std::string path = str(cfg, "snapshot");
  if (path.empty()) path = fallback;
  if (path.empty()) return;
  json snap = cfg;
  snap.erase("snapshot");
  snap["version"] = kConfigVersion;
  snap["command"] = command;
  write_text_file(path, snap.dump(2) + "\n");
}

std::pair<std::size_t, std::size_t> parse_synthetic(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw UsageError("--synthetic expects N_POS,N_NEG");
  try {
    return {std::stoull(text.substr(0, comma)), std::stoull(text.substr(comma + 1))};
  } catch (const std::logic_error&) {
    throw UsageError("--synthetic expects N_POS,N_NEG, got '" + text + "'");
  }
}

// Labeled sequences from --synthetic or --positives/--negatives.
std::optional<LabeledDataset> labeled_sequences(const json& cfg) {
  const auto synthetic = str(cfg, "synthetic");
  const auto pos = str(cfg, "positives");
  const auto neg = str(cfg, "negatives");
  if (!synthetic.empty()) {
    if (!pos.empty() || !neg.empty()) throw UsageError("--synthetic excludes --positives/--negatives");
    const auto [n_pos, n_neg] = parse_synthetic(synthetic);
    if (n_pos < 1 || n_neg < 1) throw UsageError("--synthetic counts must be >= 1");
    return synth_dataset(n_pos, n_neg, cfg.at("seed").get<std::uint64_t>());
  }
  if (pos.empty() != neg.empty()) throw UsageError("--positives and --negatives go together");
  if (pos.empty()) return std::nullopt;
  return load_dataset(pos, neg);
}

std::vector<std::string> fasta_list(const json& cfg) {
  std::vector<std::string> out;
  if (cfg.contains("fasta")) {
    for (const auto& f : cfg["fasta"]) out.push_back(f.get<std::string>());
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_extract(const json& cfg, std::ostream& out, std::ostream& err) {
  const auto out_path = require(cfg, "out");
  std::vector<RnaSequence> seqs;
  std::vector<int> labels;
  for (const auto& path : fasta_list(cfg)) {
    try {
      for (auto& s : read_fasta_file(path)) {
        seqs.push_back(std::move(s));
        labels.push_back(-1);
      }
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
  }
  if (auto ds = labeled_sequences(cfg)) {
    for (const auto& w : ds->warnings) err << "warning: " << w << "\n";
    for (auto& ex : ds->examples) {
      seqs.push_back(ex.sequence);
      labels.push_back(static_cast<int>(ex.label));
    }
  }
  if (seqs.empty()) throw UsageError("extract needs --fasta or --positives/--negatives");
  std::set<std::string> seen;
  for (const auto& s : seqs) {
    if (!seen.insert(s.id).second) throw DataError("duplicate sequence id '" + s.id + "'");
  }

  FeatureConfig fc;
  fc.n_samples = count(cfg, "n_samples");
  fc.n_shuffles = count(cfg, "n_shuffles");
  fc.temperature = cfg.at("temperature").get<double>();
  fc.seed = cfg.at("seed").get<std::uint64_t>();
  FeatureTable table;
  table.names = subset_names(cfg.at("subset").get<std::string>());
  for (const auto& s : seqs) table.ids.push_back(s.id);
  table.labels = labels;
  table.values = extract_matrix(seqs, fc, table.names);
  write_text_file(out_path, write_feature_csv(table));
  write_snapshot(cfg, "extract", out_path + ".config.json");
  out << "wrote " << seqs.size() << " rows x " << table.names.size() << " features to " << out_path << "\n";
  return kExitOk;
}

int cmd_balance(const json& cfg, std::ostream& out, std::ostream&) {
  const auto out_plan = require(cfg, "out");
  const auto table = parse_feature_csv(read_text_file(require(cfg, "features")));
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    if (table.labels[i] < 0) throw DataError("feature row '" + table.ids[i] + "' has no label");
    (table.labels[i] == 1 ? pos : neg).push_back(i);
  }
  std::size_t target = count(cfg, "target");
  if (target == 0) target = pos.size();
  const auto seed = cfg.at("seed").get<std::uint64_t>();

  const auto stats = fit_normalizer(table.values);
  std::vector<std::string> neg_ids;
  for (std::size_t i : neg) neg_ids.push_back(table.ids[i]);
  const auto chosen = undersample_negatives(apply_normalizer(stats, table.values.select_rows(neg)), neg_ids,
                                            target, seed, count(cfg, "balance_k"));

  std::vector<std::string> ids;
  std::vector<int> labels;
  for (std::size_t i : pos) {
    ids.push_back(table.ids[i]);
    labels.push_back(1);
  }
  for (const auto& id : chosen) {
    ids.push_back(id);
    labels.push_back(0);
  }
  const auto plan = stratified_kfold(labels, count(cfg, "folds"), seed);
  write_text_file(out_plan, fold_plan_to_json(plan, ids));
  if (const auto out_ids = str(cfg, "out_ids"); !out_ids.empty()) {
    std::string text;
    for (const auto& id : chosen) text += id + "\n";
    write_text_file(out_ids, text);
  }
  write_snapshot(cfg, "balance", out_plan + ".config.json");
  out << "kept " << chosen.size() << " of " << neg.size() << " negatives; " << plan.n_folds
      << " folds, test sizes";
  for (const auto& f : plan.folds) out << " " << f.test.size();
  out << "\n";
  return kExitOk;
}

int cmd_synth(const json& cfg, std::ostream& out, std::ostream&) {
  const std::filesystem::path dir = require(cfg, "out_dir");
  const auto n_pos = count(cfg, "n_pos");
  const auto n_neg = count(cfg, "n_neg");
  if (n_pos < 1 || n_neg < 1) throw UsageError("--n-pos and --n-neg must be >= 1");
  const auto ds = synth_dataset(n_pos, n_neg, cfg.at("seed").get<std::uint64_t>());
  std::vector<RnaSequence> pos, neg;
  for (const auto& ex : ds.examples) (ex.label == Label::positive ? pos : neg).push_back(ex.sequence);
  std::filesystem::create_directories(dir);
  write_fasta_file(dir / "positives.fa", pos);
  write_fasta_file(dir / "negatives.fa", neg);
  write_snapshot(cfg, "synth", (dir / "synth.config.json").string());
  out << "wrote " << pos.size() << " positives and " << neg.size() << " negatives to " << dir.string()
      << "\n";
  return kExitOk;
}

int cmd_train(const json& cfg, std::ostream& out, std::ostream& err) {
  const auto out_path = require(cfg, "out");
  PipelineConfig pc;
  config_from_json(cfg, pc);
  const int jobs = static_cast<int>(std::max<std::size_t>(1, count(cfg, "jobs")));
  // Reject a bad architecture before any data is read.
  if (pc.model == "dbn") {
    if (pc.hyper != CnnHyper{}) throw UsageError("CNN hyper-parameters do not apply to the DBN");
  } else {
    build_cnn(parse_model_choice(pc.model), pc.hyper);
  }

  PreparedData data;
  const auto features = str(cfg, "features");
  auto sequences = labeled_sequences(cfg);
  if (!features.empty()) {
    if (sequences) throw UsageError("--features excludes sequence inputs");
    data = prepare_data(parse_feature_csv(read_text_file(features)), pc);
  } else if (sequences) {
    for (const auto& w : sequences->warnings) err << "warning: " << w << "\n";
    data = prepare_data(*sequences, pc);
  } else {
    throw UsageError("train needs --synthetic, --positives/--negatives or --features");
  }

  json report;
  if (pc.n_folds == 1) throw UsageError("--folds must be 0 (no cross-validation) or >= 2");
  if (pc.n_folds >= 2) {
    std::optional<FoldPlan> plan;
    if (const auto plan_path = str(cfg, "fold_plan"); !plan_path.empty()) {
      plan = fold_plan_from_json(read_text_file(plan_path), data.ids);
    }
    const auto cv = cross_validate(pc, data, plan ? &*plan : nullptr, jobs);
    out << report_table(cv);
    report = json::parse(report_to_json(cv));
  }

  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto model = fit_model(pc, data, all, derive_seed(pc.seed, stream::kFinalFit));
  save_model(out_path, model);
  const auto train_metrics = evaluate_scores(predict_rows(model, data, all), data.labels);
  if (pc.n_folds < 2) {
    report["model"] = pc.model;
    report["config"] = config_to_json(pc);
    report["accuracy"] = train_metrics.accuracy;
  }
  report["training_accuracy"] = train_metrics.accuracy;
  report["model_file"] = out_path;

  std::string report_path = str(cfg, "report");
  if (report_path.empty()) report_path = out_path + ".report.json";
  write_text_file(report_path, report.dump(2) + "\n");
  write_snapshot(cfg, "train", out_path + ".config.json");
  out << "model written to " << out_path << ", report to " << report_path << "\n";
  return kExitOk;
}

int cmd_eval(const json& cfg, std::ostream& out, std::ostream&) {
  const auto model_path = require(cfg, "model_file");
  auto model = load_model(model_path);
  std::vector<double> scores;
  std::vector<int> truth;
  const auto features = str(cfg, "features");
  if (!features.empty()) {
    if (model.model != "dbn") throw UsageError("a CNN model evaluates sequences, not a feature CSV");
    const auto table = select_columns(parse_feature_csv(read_text_file(features)), model.feature_names);
    PreparedData data{table.ids, table.labels, {}, table.names, table.values};
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
      if (data.labels[i] < 0) throw DataError("feature row '" + data.ids[i] + "' has no label");
    }
    std::vector<std::size_t> rows(data.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    scores = predict_rows(model, data, rows);
    truth = data.labels;
  } else if (auto ds = labeled_sequences(cfg)) {
    scores = predict_sequences(model, ds->sequences());
    for (const auto& ex : ds->examples) truth.push_back(static_cast<int>(ex.label));
  } else {
    throw UsageError("eval needs --synthetic, --positives/--negatives or --features");
  }
  const auto m = evaluate_scores(scores, truth);
  char line[160];
  std::snprintf(line, sizeof line, "%12s %12s %12s\n%12.4f %12.4f %12.4f\n", "Sensitivity", "Specificity",
                "Accuracy", m.sensitivity, m.specificity, m.accuracy);
  out << line;
  const auto report_path = str(cfg, "report");
  if (!report_path.empty()) {
    json r = {{"model_file", model_path}, {"model", model.model},   {"tp", m.tp},
              {"fp", m.fp},                {"tn", m.tn},             {"fn", m.fn},
              {"sensitivity", m.sensitivity}, {"specificity", m.specificity},
              {"accuracy", m.accuracy},    {"precision", m.precision}, {"f1", m.f1}};
    write_text_file(report_path, r.dump(2) + "\n");
    write_snapshot(cfg, "eval", report_path + ".config.json");
  } else {
    write_snapshot(cfg, "eval", "");
  }
  return kExitOk;
}

int cmd_predict(const json& cfg, std::ostream& out, std::ostream&) {
  auto model = load_model(require(cfg, "model_file"));
  std::vector<RnaSequence> seqs;
  for (const auto& path : fasta_list(cfg)) {
    try {
      for (auto& s : read_fasta_file(path)) seqs.push_back(std::move(s));
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
  }
  if (seqs.empty()) throw UsageError("predict needs --fasta with at least one sequence");
  const auto scores = predict_sequences(model, seqs);
  std::string csv = "id,score_positive,label\n";
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    char num[32];
    std::snprintf(num, sizeof num, "%.17g", scores[i]);
    csv += seqs[i].id + "," + num + "," + (scores[i] > 0.5 ? "positive" : "negative") + "\n";
  }
  const auto out_path = str(cfg, "out");
  if (out_path.empty()) {
    out << csv;
    write_snapshot(cfg, "predict", "");
  } else {
    write_text_file(out_path, csv);
    write_snapshot(cfg, "predict", out_path + ".config.json");
  }
  return kExitOk;
}

int dispatch(const std::string& name, const json& cfg, std::ostream& out, std::ostream& err) {
  if (name == "extract") return cmd_extract(cfg, out, err);
  if (name == "balance") return cmd_balance(cfg, out, err);
  if (name == "synth") return cmd_synth(cfg, out, err);
  if (name == "train") return cmd_train(cfg, out, err);
  if (name == "eval") return cmd_eval(cfg, out, err);
  return cmd_predict(cfg, out, err);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pre-miRNA classification with a sequence CNN or a feature DBN", "premir"};
  app.require_subcommand(1);

  struct Bound {
    CLI::App* app;
    const Command* cmd;
    std::string config_path;
    std::map<std::string, std::vector<std::string>> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& cmd : commands()) {
    auto b = std::make_unique<Bound>();
    b->cmd = &cmd;
    b->app = app.add_subcommand(cmd.name, cmd.help);
    b->app->add_option("--config", b->config_path, "flat JSON config; flags override its values");
    for (const auto& key : cmd.keys) {
      const auto& spec = key_table().at(key);
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (key == "window") flag += ",--filter";
      auto& slot = b->values[key];
      CLI::Option* opt = nullptr;
      if (spec.type == KeyType::boolean) {
        opt = b->app->add_flag_function(flag, [&slot](std::int64_t) { slot = {"true"}; }, spec.help);
      } else {
        opt = b->app->add_option(flag, slot, spec.help);
        if (spec.type != KeyType::text_list) opt->expected(1);
      }
      b->options[key] = opt;
    }
    bound.push_back(std::move(b));
  }

  std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (const auto& b : bound) {
      if (!b->app->parsed()) continue;
      json cfg = command_defaults(*b->cmd);
      if (!b->config_path.empty()) cfg.update(read_config_file(b->config_path, *b->cmd));
      for (const auto& [key, opt] : b->options) {
        if (opt->count() == 0) continue;
        const auto& vals = b->values[key];
        if (key_table().at(key).type == KeyType::text_list) {
          cfg[key] = vals;
        } else {
          cfg[key] = parse_value(key, vals.back());
        }
      }
      for (auto it = cfg.begin(); it != cfg.end();) {
        it = it->is_null() ? cfg.erase(it) : std::next(it);
      }
      kernels::set_threads(static_cast<int>(cfg.value("jobs", std::size_t{1})));
      return dispatch(b->cmd->name, cfg, out, err);
    }
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace premir
