#include "premir/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <unordered_map>

#include "premir/errors.hpp"
#include "premir/random.hpp"
#include "premir/shuffle.hpp"

namespace premir {

namespace {

constexpr char kBases[] = "ACGU";

double safe_div(double num, double den) { return den != 0.0 ? num / den : 0.0; }

std::vector<std::string> build_names() {
  std::vector<std::string> names;
  for (char a : std::string_view(kBases)) {
    for (char b : std::string_view(kBases)) names.push_back({a, b});
  }
  for (char a : std::string_view(kBases)) {
    for (char b : std::string_view(kBases)) {
      for (char c : std::string_view(kBases)) names.push_back({a, b, c});
    }
  }
  for (const char* n :
       {"A+U%", "G+C%", "L",
        "dP", "dG", "dF", "MFEI1", "MFEI2", "MFEI3", "MFEI4", "MFEI5",
        "BP/GC", "BP/GU", "BP/AU", "G/C", "Avg_BP_Stem",
        "|A-U|/L", "|G-C|/L", "|G-U|/L",
        "|A-U|%/n_stems", "|G-C|%/n_stems", "|G-U|%/n_stems",
        "IH", "IL", "IC", "%L",
        "dH", "dH/L", "dS", "dS/L", "Tm", "Tm/L",
        "Freq", "dQ", "dD", "dPs", "EAFE", "CE/L", "Diff",
        "zP", "zG", "zD", "zQ", "zSP"}) {
    names.emplace_back(n);
  }
  return names;
}

const std::unordered_map<std::string, std::size_t>& name_index() {
  static const auto index = [] {
    std::unordered_map<std::string, std::size_t> m;
    const auto& names = feature_names();
    for (std::size_t i = 0; i < names.size(); ++i) m.emplace(names[i], i);
    return m;
  }();
  return index;
}

int code(char c) {
  switch (c) {
    case 'A': return 0;
    case 'C': return 1;
    case 'G': return 2;
    default: return 3;
  }
}

// Folding measures compared against the shuffled background.
struct FoldMeasures {
  double dp = 0.0, dg = 0.0, dd = 0.0, dq = 0.0, dps = 0.0;
};

FoldMeasures measure(std::string_view bases, std::size_t n_samples, Rng& rng,
                     const FeatureConfig& config) {
  const double len = static_cast<double>(bases.size());
  const auto ss = fold(bases, config.energy);
  FoldMeasures m;
  m.dp = 2.0 * static_cast<double>(ss.pairs.size()) / len;
  m.dg = ss.energy / len;
  BoltzmannEnsemble ensemble(bases, config.temperature, config.energy);
  if (!ensemble.has_pairs()) return m;
  const auto samples = ensemble.sample(n_samples, rng);
  const auto summary = summarize_ensemble(bases, samples, ss, ensemble.ensemble_free_energy(),
                                          config.energy);
  for (const auto& [name, value] : summary) {
    if (name == "dD") m.dd = value;
    if (name == "dQ") m.dq = value;
    if (name == "dPs") m.dps = value;
  }
  return m;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = build_names();
  return names;
}

const std::vector<std::string>& selected20_names() {
  static const std::vector<std::string> names = {
      "A+U%", "AG", "AU", "CU", "GA", "UU", "MFEI4", "dPs", "EAFE", "Freq",
      "dH/L", "Tm", "Tm/L", "|G-C|/L", "|A-U|%/n_stems", "|G-U|%/n_stems", "L", "CE/L", "zG", "zSP"};
  return names;
}

const std::vector<std::string>& subset_names(std::string_view subset) {
  if (subset == "full") return feature_names();
  if (subset == "selected20") return selected20_names();
  throw UsageError("unknown feature subset '" + std::string(subset) + "' (expected full or selected20)");
}

std::size_t feature_index(std::string_view name) {
  const auto& index = name_index();
  auto it = index.find(std::string(name));
  if (it == index.end()) throw DataError("unknown feature '" + std::string(name) + "'");
  return it->second;
}

FeatureVector::FeatureVector() : values_(feature_names().size(), 0.0) {}

void FeatureVector::merge(const NamedValues& part) {
  for (const auto& [name, value] : part) set(name, value);
}

std::vector<double> FeatureVector::select(const std::vector<std::string>& names) const {
  std::vector<double> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back((*this)[n]);
  return out;
}

NamedValues composition_features(const RnaSequence& seq) {
  const std::string& s = seq.bases;
  const std::size_t n = s.size();
  if (n < 2) throw DataError("sequence '" + seq.id + "' too short for dinucleotide frequency (XY)");
  if (n < 3) throw DataError("sequence '" + seq.id + "' too short for trinucleotide frequency (XYZ)");

  std::array<double, 16> di{};
  std::array<double, 64> tri{};
  for (std::size_t k = 0; k + 1 < n; ++k) di[code(s[k]) * 4 + code(s[k + 1])] += 1.0;
  for (std::size_t k = 0; k + 2 < n; ++k) {
    tri[code(s[k]) * 16 + code(s[k + 1]) * 4 + code(s[k + 2])] += 1.0;
  }
  const auto& names = feature_names();
  NamedValues out;
  for (std::size_t i = 0; i < 16; ++i) out.emplace_back(names[i], di[i] / static_cast<double>(n - 1));
  for (std::size_t i = 0; i < 64; ++i) out.emplace_back(names[16 + i], tri[i] / static_cast<double>(n - 2));
  const auto au = static_cast<double>(std::count_if(s.begin(), s.end(), [](char c) { return c == 'A' || c == 'U'; }));
  out.emplace_back("A+U%", au / static_cast<double>(n));
  out.emplace_back("G+C%", (static_cast<double>(n) - au) / static_cast<double>(n));
  out.emplace_back("L", static_cast<double>(n));
  return out;
}

NamedValues structure_features(const RnaSequence& seq, const SecondaryStructure& ss) {
  const double len = static_cast<double>(seq.length());
  const double pairs = static_cast<double>(ss.pairs.size());
  const double total_bases = 2.0 * pairs;
  const double stems = static_cast<double>(ss.stem_count);
  const double loops = static_cast<double>(ss.loop_count);
  const double gc_count = static_cast<double>(
      std::count_if(seq.bases.begin(), seq.bases.end(), [](char c) { return c == 'G' || c == 'C'; }));
  const double gc_frac = gc_count / len;
  const double au_frac = 1.0 - gc_frac;
  const double au = static_cast<double>(ss.au_pairs);
  const double gc = static_cast<double>(ss.gc_pairs);
  const double gu = static_cast<double>(ss.gu_pairs);
  const double dg = ss.energy / len;

  NamedValues out;
  out.emplace_back("dP", total_bases / len);
  out.emplace_back("dG", dg);
  out.emplace_back("dF", tree_connectivity(ss));
  out.emplace_back("MFEI1", safe_div(dg, gc_frac));
  out.emplace_back("MFEI2", safe_div(dg, stems));
  out.emplace_back("MFEI3", safe_div(dg, loops));
  out.emplace_back("MFEI4", safe_div(dg, total_bases));
  out.emplace_back("MFEI5", safe_div(dg, au_frac));
  out.emplace_back("BP/GC", safe_div(total_bases, gc));
  out.emplace_back("BP/GU", safe_div(total_bases, gu));
  out.emplace_back("BP/AU", safe_div(total_bases, au));
  out.emplace_back("G/C", gc_count);
  out.emplace_back("Avg_BP_Stem", safe_div(pairs, stems));
  out.emplace_back("|A-U|/L", au / len);
  out.emplace_back("|G-C|/L", gc / len);
  out.emplace_back("|G-U|/L", gu / len);
  out.emplace_back("|A-U|%/n_stems", safe_div(safe_div(au, pairs), stems));
  out.emplace_back("|G-C|%/n_stems", safe_div(safe_div(gc, pairs), stems));
  out.emplace_back("|G-U|%/n_stems", safe_div(safe_div(gu, pairs), stems));
  out.emplace_back("IH", static_cast<double>(ss.hairpin_length));
  out.emplace_back("IL", static_cast<double>(ss.loop_length));
  out.emplace_back("IC", static_cast<double>(ss.max_consecutive_pairs));
  out.emplace_back("%L", safe_div(static_cast<double>(ss.loop_length), static_cast<double>(ss.hairpin_length)));
  return out;
}

NamedValues thermo_features(const RnaSequence& seq, const SecondaryStructure& ss, const ThermoTable& t) {
  const double len = static_cast<double>(seq.length());
  const double au = static_cast<double>(ss.au_pairs);
  const double gc = static_cast<double>(ss.gc_pairs);
  const double gu = static_cast<double>(ss.gu_pairs);
  const double dh = gc * t.dh_gc + au * t.dh_au + gu * t.dh_gu;
  const double ds = gc * t.ds_gc + au * t.ds_au + gu * t.ds_gu;
  double tm = 0.0;
  if (!ss.pairs.empty()) {
    const double cation = t.gas_constant * std::log(t.strand_concentration / 4.0);
    const double kelvin = 1000.0 * dh / (ds + cation);
    tm = std::clamp(kelvin - 273.15, t.tm_min, t.tm_max);
  }
  return {{"dH", dh}, {"dH/L", dh / len}, {"dS", ds}, {"dS/L", ds / len}, {"Tm", tm}, {"Tm/L", tm / len}};
}

NamedValues summarize_ensemble(std::string_view bases, std::span<const std::vector<BasePair>> samples,
                               const SecondaryStructure& mfe, double efe, const EnergyModel& model) {
  const std::size_t n = bases.size();
  const double len = static_cast<double>(n);
  NamedValues out;
  if (samples.empty()) {
    for (const char* name : {"Freq", "dQ", "dD", "dPs", "EAFE", "CE/L", "Diff"}) out.emplace_back(name, 0.0);
    return out;
  }
  const double count = static_cast<double>(samples.size());
  std::map<BasePair, double> prob;
  std::size_t mfe_hits = 0;
  for (const auto& s : samples) {
    if (s == mfe.pairs) ++mfe_hits;
    for (const auto& p : s) prob[p] += 1.0;
  }
  double dq = 0.0;
  double dd = 0.0;
  std::vector<double> paired(n, 0.0);
  std::vector<double> pos_entropy(n, 0.0);
  std::vector<BasePair> centroid;
  for (auto& [pair, p] : prob) {
    p /= count;
    dq -= p * std::log(p);
    dd += p * (1.0 - p);
    paired[pair.i] += p;
    paired[pair.j] += p;
    pos_entropy[pair.i] -= p * std::log(p);
    pos_entropy[pair.j] -= p * std::log(p);
    if (p > 0.5) centroid.push_back(pair);
  }
  double dps = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double q = 1.0 - paired[k];
    if (q > 1e-15) pos_entropy[k] -= q * std::log(q);
    dps += pos_entropy[k];
  }
  const double ce = evaluate_energy(bases, centroid, model);
  out.emplace_back("Freq", static_cast<double>(mfe_hits) / count);
  out.emplace_back("dQ", dq / len);
  out.emplace_back("dD", dd / len);
  out.emplace_back("dPs", dps / len);
  out.emplace_back("EAFE", efe / len);
  out.emplace_back("CE/L", ce / len);
  out.emplace_back("Diff", std::abs(mfe.energy - efe) / len);
  return out;
}

NamedValues ensemble_features(const RnaSequence& seq, std::size_t n_samples, std::uint64_t seed,
                              double temperature, const EnergyModel& model) {
  if (n_samples < 1) throw UsageError("ensemble sampling needs n_samples >= 1");
  BoltzmannEnsemble ensemble(seq.bases, temperature, model);
  if (!ensemble.has_pairs()) return summarize_ensemble(seq.bases, {}, {}, 0.0, model);
  const auto mfe = fold(seq.bases, model);
  Rng rng(seed);
  const auto samples = ensemble.sample(n_samples, rng);
  return summarize_ensemble(seq.bases, samples, mfe, ensemble.ensemble_free_energy(), model);
}

NamedValues zscore_features(const RnaSequence& seq, std::size_t n_shuffles, std::uint64_t seed,
                            const FeatureConfig& config) {
  if (n_shuffles < 10) throw UsageError("z-scores need at least 10 shuffles");
  Rng base_rng(derive_seed(seed, stream::kShuffle));
  const FoldMeasures x = measure(seq.bases, config.n_samples, base_rng, config);

  std::vector<FoldMeasures> background;
  background.reserve(n_shuffles);
  for (std::size_t k = 0; k < n_shuffles; ++k) {
    Rng rng(derive_seed(seed, stream::kShuffle, k + 1));
    const std::string shuffled = dinucleotide_shuffle(seq.bases, rng);
    background.push_back(measure(shuffled, config.n_samples, rng, config));
  }

  auto z = [&](double FoldMeasures::*field) {
    double mean = 0.0;
    for (const auto& b : background) mean += b.*field;
    mean /= static_cast<double>(background.size());
    double var = 0.0;
    for (const auto& b : background) var += (b.*field - mean) * (b.*field - mean);
    const double sd = std::sqrt(var / static_cast<double>(background.size() - 1));
    // Identical shuffles leave only rounding noise in sd.
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) return 0.0;
    return (x.*field - mean) / sd;
  };
  return {{"zP", z(&FoldMeasures::dp)},
          {"zG", z(&FoldMeasures::dg)},
          {"zD", z(&FoldMeasures::dd)},
          {"zQ", z(&FoldMeasures::dq)},
          {"zSP", z(&FoldMeasures::dps)}};
}

FeatureVector extract_all(const RnaSequence& seq, const FeatureConfig& config) {
  const std::uint64_t seq_seed = derive_seed(config.seed, content_hash(seq.bases));
  FeatureVector fv;
  fv.merge(composition_features(seq));
  const auto ss = fold(seq.bases, config.energy);
  fv.merge(structure_features(seq, ss));
  fv.merge(thermo_features(seq, ss, config.thermo));
  fv.merge(ensemble_features(seq, config.n_samples, derive_seed(seq_seed, stream::kEnsemble),
                             config.temperature, config.energy));
  fv.merge(zscore_features(seq, config.n_shuffles, seq_seed, config));
  const auto values = fv.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw NumericError("non-finite value for feature " + feature_names()[i]);
  }
  return fv;
}

Matrix extract_matrix(std::span<const RnaSequence> sequences, const FeatureConfig& config,
                      const std::vector<std::string>& names) {
  Matrix out(sequences.size(), names.size());
  std::vector<std::size_t> columns;
  for (const auto& n : names) columns.push_back(feature_index(n));
  std::string first_error;
  std::ptrdiff_t first_index = -1;
  bool first_numeric = false;
  const auto count = static_cast<std::ptrdiff_t>(sequences.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      const auto fv = extract_all(sequences[static_cast<std::size_t>(i)], config);
      auto row = out.row(static_cast<std::size_t>(i));
      for (std::size_t c = 0; c < columns.size(); ++c) row[c] = fv.values()[columns[c]];
    } catch (const std::exception& e) {
#pragma omp critical
      {
        if (first_index < 0 || i < first_index) {
          first_index = i;
          first_error = "sequence '" + sequences[static_cast<std::size_t>(i)].id + "': " + e.what();
          first_numeric = dynamic_cast<const NumericError*>(&e) != nullptr;
        }
      }
    }
  }
  if (first_index >= 0) {
    if (first_numeric) throw NumericError(first_error);
    throw DataError(first_error);
  }
  return out;
}

NormalizationStats fit_normalizer(const Matrix& train) {
  if (train.empty()) throw DataError("cannot fit a normalizer on an empty matrix");
  NormalizationStats stats{std::vector<double>(train.row(0).begin(), train.row(0).end()),
                           std::vector<double>(train.row(0).begin(), train.row(0).end())};
  for (std::size_t r = 1; r < train.rows(); ++r) {
    auto row = train.row(r);
    for (std::size_t c = 0; c < train.cols(); ++c) {
      stats.min[c] = std::min(stats.min[c], row[c]);
      stats.max[c] = std::max(stats.max[c], row[c]);
    }
  }
  return stats;
}

std::vector<double> apply_normalizer(const NormalizationStats& stats, std::span<const double> row) {
  if (row.size() != stats.min.size()) throw DataError("feature row width does not match the normalizer");
  std::vector<double> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) {
    const double range = stats.max[c] - stats.min[c];
    out[c] = range > 0.0 ? std::clamp((row[c] - stats.min[c]) / range, 0.0, 1.0) : 0.0;
  }
  return out;
}

Matrix apply_normalizer(const NormalizationStats& stats, const Matrix& rows) {
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto v = apply_normalizer(stats, rows.row(r));
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

std::string write_feature_csv(const FeatureTable& table) {
  std::string out = "id,label";
  for (const auto& n : table.names) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    out += table.ids[r];
    out += ',';
    out += table.labels[r] < 0 ? "unknown" : std::string(to_string(static_cast<Label>(table.labels[r])));
    for (double v : table.values.row(r)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

FeatureTable parse_feature_csv(std::string_view text) {
  FeatureTable table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (header) {
      if (cells.size() < 3 || cells[0] != "id" || cells[1] != "label") {
        throw DataError("feature CSV header must start with id,label");
      }
      for (std::size_t c = 2; c < cells.size(); ++c) {
        feature_index(cells[c]);
        table.names.emplace_back(cells[c]);
      }
      table.values = Matrix(0, table.names.size());
      header = false;
      continue;
    }
    if (cells.size() != table.names.size() + 2) {
      throw DataError("feature CSV line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.names.size() + 2) + " columns");
    }
    table.ids.emplace_back(cells[0]);
    table.labels.push_back(cells[1] == "unknown" ? -1 : static_cast<int>(parse_label(cells[1])));
    std::vector<double> row;
    for (std::size_t c = 2; c < cells.size(); ++c) {
      const std::string cell(cells[c]);
      char* endp = nullptr;
      const double v = std::strtod(cell.c_str(), &endp);
      if (endp == cell.c_str() || *endp != '\0' || !std::isfinite(v)) {
        throw DataError("feature CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    table.values.append_row(row);
  }
  if (header) throw DataError("feature CSV is empty");
  return table;
}

FeatureTable select_columns(const FeatureTable& table, const std::vector<std::string>& names) {
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    auto it = std::find(table.names.begin(), table.names.end(), n);
    if (it == table.names.end()) throw DataError("feature CSV lacks column '" + n + "'");
    cols.push_back(static_cast<std::size_t>(it - table.names.begin()));
  }
  FeatureTable out{names, table.ids, table.labels, Matrix(table.ids.size(), names.size())};
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) out.values(r, c) = table.values(r, cols[c]);
  }
  return out;
}

}  // namespace premir
