#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace premir {

// Width of the CNN input; also the hard cap on accepted sequence length.
inline constexpr std::size_t kMaxSequenceLength = 160;

struct RnaSequence {
  std::string id;
  std::string bases;  // over {A,C,G,U}

  std::size_t length() const { return bases.size(); }
  bool operator==(const RnaSequence&) const = default;
};

enum class Label : int { negative = 0, positive = 1 };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct LabeledExample {
  RnaSequence sequence;
  Label label;
};

struct LabeledDataset {
  std::vector<LabeledExample> examples;
  std::string provenance;
  std::vector<std::string> warnings;

  std::size_t size() const { return examples.size(); }
  std::size_t count(Label label) const;
  std::vector<Label> labels() const;
  std::vector<RnaSequence> sequences() const;
};

// Uppercases, maps T to U and validates against the RnaSequence invariants.
// Throws DataError with the record id on any violation.
RnaSequence make_sequence(std::string id, std::string_view raw_bases);

/// Parses FASTA text. Sequence lines are concatenated, whitespace is ignored,
/// lowercase is normalized and T becomes U. Errors: empty record body, foreign
/// character, duplicate id, length above kMaxSequenceLength, text before the
/// first header.
std::vector<RnaSequence> parse_fasta(std::string_view text);

std::string serialize_fasta(std::span<const RnaSequence> records, std::size_t line_width = 60);

std::vector<RnaSequence> read_fasta_file(const std::filesystem::path& path);
void write_fasta_file(const std::filesystem::path& path, std::span<const RnaSequence> records);

// Builds a dataset from two record lists; ids must be unique across both.
LabeledDataset make_dataset(std::vector<RnaSequence> positives, std::vector<RnaSequence> negatives,
                            std::string provenance);

/// Reads positives and negatives from two FASTA files. An empty class is
/// allowed and recorded in `warnings`; parse errors carry the file path.
LabeledDataset load_dataset(const std::filesystem::path& positive_path,
                            const std::filesystem::path& negative_path);

// Two-column manifest `id,label` with a header row.
std::string manifest_csv(const LabeledDataset& dataset);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace premir
