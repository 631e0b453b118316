#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "premir/random.hpp"
#include "premir/sequence_io.hpp"

namespace premir {

// Simplified pairing energy model, units kcal/mol-like (more negative is
// more stable). A structure's energy is the sum of its pair scores plus
// loop_penalty for every pair (i,j) whose inner neighbour (i+1,j-1) is not
// itself a pair, i.e. every pair that opens a loop.
struct EnergyModel {
  double gc = -3.0;
  double au = -2.0;
  double gu = -1.0;
  double loop_penalty = 0.5;
  std::size_t min_hairpin = 3;

  bool can_pair(char a, char b) const;
  // Score for a pairable couple; 0 otherwise.
  double pair_score(char a, char b) const;
};

struct BasePair {
  std::size_t i;
  std::size_t j;
  bool operator==(const BasePair&) const = default;
  auto operator<=>(const BasePair&) const = default;
};

struct SecondaryStructure {
  std::string dot_bracket;
  std::vector<BasePair> pairs;  // sorted by i
  double energy = 0.0;
  std::size_t stem_count = 0;
  std::size_t loop_count = 0;
  std::size_t hairpin_count = 0;
  std::size_t hairpin_length = 0;  // first paired base to last paired base
  std::size_t loop_length = 0;     // unpaired bases in hairpin loops
  std::size_t max_consecutive_pairs = 0;
  std::size_t au_pairs = 0;
  std::size_t gc_pairs = 0;
  std::size_t gu_pairs = 0;
};

/// Minimum-energy structure over non-crossing pairings with hairpin loops of
/// at least `min_hairpin` bases. O(n^3) time, O(n^2) memory. Traceback prefers
/// pairing over leaving a base unpaired, and the leftmost partner on ties.
SecondaryStructure fold(std::string_view bases, const EnergyModel& model = {});
inline SecondaryStructure fold(const RnaSequence& seq, const EnergyModel& model = {}) {
  return fold(seq.bases, model);
}

double evaluate_energy(std::string_view bases, std::span<const BasePair> pairs,
                       const EnergyModel& model = {});

// Builds a structure record (dot-bracket, energy, stem/loop statistics) from
// a pair list. Throws DataError when the pairs are crossing, reuse an index,
// are not canonical or violate the minimum hairpin size.
SecondaryStructure make_structure(std::string_view bases, std::vector<BasePair> pairs,
                                  const EnergyModel& model = {});

std::string to_dot_bracket(std::span<const BasePair> pairs, std::size_t length);
std::vector<BasePair> parse_dot_bracket(std::string_view dot_bracket);

// |A-U|, |G-C|, |G-U|, total_bases, stems, loops, Avg_BP_Stem, IH, IL, IC, %L.
std::map<std::string, double> pairing_stats(const SecondaryStructure& ss);

// Algebraic connectivity (second-smallest Laplacian eigenvalue) of the
// coarse-grained tree: one vertex per loop plus the exterior loop, one edge
// per stem. Zero when the structure has no stems.
double tree_connectivity(const SecondaryStructure& ss);

// True when the structure closes more than one hairpin loop.
bool has_multiple_loops(const SecondaryStructure& ss);
// Drops examples whose minimum-energy structure has several hairpin loops.
LabeledDataset filter_multiple_loops(const LabeledDataset& dataset, const EnergyModel& model = {});

/// Boltzmann-weighted structure ensemble of one sequence under EnergyModel,
/// weights exp(-E / temperature). Holds the summed-weight DP tables needed
/// for stochastic traceback; tables are rescaled per nucleotide to avoid
/// overflow.
class BoltzmannEnsemble {
 public:
  BoltzmannEnsemble(std::string_view bases, double temperature, const EnergyModel& model = {});

  double mfe() const { return mfe_; }
  // -T ln Z.
  double ensemble_free_energy() const { return efe_; }
  // False when no pair is possible at all (the ensemble is the empty structure).
  bool has_pairs() const { return has_pairs_; }

  std::vector<BasePair> sample(Rng& rng) const;
  std::vector<std::vector<BasePair>> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t idx(std::size_t a, std::size_t b) const { return a * (n_ + 1) + b; }

  std::string bases_;
  EnergyModel model_;
  double temperature_;
  std::size_t n_;
  double scale_ = 1.0;  // per-nucleotide factor
  double penalty_weight_ = 1.0;
  double mfe_ = 0.0;
  double efe_ = 0.0;
  bool has_pairs_ = false;
  std::vector<double> q_, qb_, qx_;
};

}  // namespace premir
