#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "premir/folding.hpp"
#include "premir/matrix.hpp"
#include "premir/sequence_io.hpp"

namespace premir {

// Per-pair nearest-neighbour-shaped constants for the melting-temperature
// model. Enthalpy in kcal/mol, entropy in cal/(mol K).
struct ThermoTable {
  double dh_gc = -10.6;
  double dh_au = -7.9;
  double dh_gu = -5.0;
  double ds_gc = -27.2;
  double ds_au = -22.2;
  double ds_gu = -14.0;
  double strand_concentration = 1e-4;  // mol/L
  double gas_constant = 1.987;         // cal/(mol K)
  double tm_min = 0.0;                 // clamp range, degrees C
  double tm_max = 100.0;
};

struct FeatureConfig {
  std::size_t n_samples = 200;   // stochastic tracebacks for ensemble features
  std::size_t n_shuffles = 100;  // dinucleotide shuffles for z-scores
  double temperature = 1.0;      // Boltzmann weighting exp(-E / temperature)
  std::uint64_t seed = 1;
  EnergyModel energy;
  ThermoTable thermo;
};

using NamedValues = std::vector<std::pair<std::string, double>>;

// Canonical order of the full catalogue.
const std::vector<std::string>& feature_names();
const std::vector<std::string>& selected20_names();
// "full" or "selected20"; throws UsageError otherwise.
const std::vector<std::string>& subset_names(std::string_view subset);
std::size_t feature_index(std::string_view name);

class FeatureVector {
 public:
  FeatureVector();

  double operator[](std::string_view name) const { return values_[feature_index(name)]; }
  void set(std::string_view name, double value) { values_[feature_index(name)] = value; }
  void merge(const NamedValues& part);
  std::span<const double> values() const { return values_; }
  std::vector<double> select(const std::vector<std::string>& names) const;

 private:
  std::vector<double> values_;
};

/// XY frequencies (count / (L-1)), XYZ frequencies (count / (L-2)), A+U%,
/// G+C% (fractions) and L. Requires L >= 3.
NamedValues composition_features(const RnaSequence& seq);

/// MFE-structure features: dP, dG, dF, MFEI1..5, BP/X, G/C, Avg_BP_Stem,
/// |X-Y|/L, |X-Y|%/n_stems, IH, IL, IC, %L. Zero denominators give 0.
NamedValues structure_features(const RnaSequence& seq, const SecondaryStructure& ss);

/// dH, dS (per-pair sums), their /L forms, Tm = 1000 dH / (dS + R ln(C/4))
/// in degrees C clamped to [tm_min, tm_max], and Tm/L. No pairs gives 0.
NamedValues thermo_features(const RnaSequence& seq, const SecondaryStructure& ss,
                            const ThermoTable& table = {});

/// Ensemble features from a set of sampled structures: Freq (share of
/// samples equal to the MFE structure), dQ (pair-probability Shannon entropy
/// / L), dD (sum p(1-p) / L), dPs (mean positional entropy), EAFE (EFE / L),
/// CE/L (energy of the p > 0.5 centroid / L) and Diff (|MFE - EFE| / L).
NamedValues summarize_ensemble(std::string_view bases,
                               std::span<const std::vector<BasePair>> samples,
                               const SecondaryStructure& mfe, double ensemble_free_energy,
                               const EnergyModel& model = {});

// Samples n_samples structures from the Boltzmann ensemble and summarizes
// them. A sequence that admits no pair at all yields zeros.
NamedValues ensemble_features(const RnaSequence& seq, std::size_t n_samples, std::uint64_t seed,
                              double temperature = 1.0, const EnergyModel& model = {});

/// zP, zG, zD, zQ, zSP: (x - mean) / std of dP, dG, dD, dQ and dPs against
/// n_shuffles dinucleotide shuffles (sample std). std = 0 gives 0.
/// Requires n_shuffles >= 10.
NamedValues zscore_features(const RnaSequence& seq, std::size_t n_shuffles, std::uint64_t seed,
                            const FeatureConfig& config = {});

// Every catalogue feature. Random streams are keyed on (config.seed, bases).
FeatureVector extract_all(const RnaSequence& seq, const FeatureConfig& config = {});

// One row per sequence restricted to `names`; parallel over sequences.
Matrix extract_matrix(std::span<const RnaSequence> sequences, const FeatureConfig& config,
                      const std::vector<std::string>& names);

struct NormalizationStats {
  std::vector<double> min;
  std::vector<double> max;
};

/// Per-column min and max of the training matrix.
NormalizationStats fit_normalizer(const Matrix& train);
// (x - min) / (max - min) clamped to [0,1]; constant columns map to 0.
std::vector<double> apply_normalizer(const NormalizationStats& stats, std::span<const double> row);
Matrix apply_normalizer(const NormalizationStats& stats, const Matrix& rows);

// Feature CSV: header `id,label,<names...>`; label is positive, negative or
// unknown (-1 in `labels`).
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::string> ids;
  std::vector<int> labels;
  Matrix values;
};

std::string write_feature_csv(const FeatureTable& table);
FeatureTable parse_feature_csv(std::string_view text);
// Keeps only the named columns, in the given order.
FeatureTable select_columns(const FeatureTable& table, const std::vector<std::string>& names);

}  // namespace premir
