#include "premir/sequence_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "premir/errors.hpp"

namespace premir {

std::string_view to_string(Label label) {
  return label == Label::positive ? "positive" : "negative";
}

Label parse_label(std::string_view text) {
  if (text == "positive" || text == "1") return Label::positive;
  if (text == "negative" || text == "0") return Label::negative;
  throw DataError("unknown label '" + std::string(text) + "'");
}

std::size_t LabeledDataset::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      examples.begin(), examples.end(), [&](const auto& e) { return e.label == label; }));
}

std::vector<Label> LabeledDataset::labels() const {
  std::vector<Label> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

std::vector<RnaSequence> LabeledDataset::sequences() const {
  std::vector<RnaSequence> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.sequence);
  return out;
}

RnaSequence make_sequence(std::string id, std::string_view raw_bases) {
  if (id.empty()) throw DataError("record with empty id");
  std::string bases;
  bases.reserve(raw_bases.size());
  for (char raw : raw_bases) {
    if (std::isspace(static_cast<unsigned char>(raw))) continue;
    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
    if (c == 'T') c = 'U';
    if (c != 'A' && c != 'C' && c != 'G' && c != 'U') {
      throw DataError("record '" + id + "': invalid character '" + std::string(1, raw) + "'");
    }
    bases.push_back(c);
  }
  if (bases.empty()) throw DataError("record '" + id + "': empty sequence");
  if (bases.size() > kMaxSequenceLength) {
    throw DataError("record '" + id + "': length " + std::to_string(bases.size()) +
                    " exceeds maximum " + std::to_string(kMaxSequenceLength));
  }
  return RnaSequence{std::move(id), std::move(bases)};
}

std::vector<RnaSequence> parse_fasta(std::string_view text) {
  std::vector<RnaSequence> records;
  std::unordered_set<std::string> seen;
  std::string current_id;
  std::string current_body;
  bool in_record = false;

  auto flush = [&] {
    if (!in_record) return;
    if (!seen.insert(current_id).second) {
      throw DataError("duplicate id '" + current_id + "'");
    }
    records.push_back(make_sequence(current_id, current_body));
    current_body.clear();
  };

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!line.empty() && line.front() == '>') {
      flush();
      std::string_view header = line.substr(1);
      auto start = header.find_first_not_of(" \t");
      if (start == std::string_view::npos) {
        throw DataError("line " + std::to_string(line_no) + ": header without id");
      }
      header = header.substr(start);
      current_id = std::string(header.substr(0, header.find_first_of(" \t")));
      in_record = true;
    } else if (line.find_first_not_of(" \t") != std::string_view::npos) {
      if (!in_record) {
        throw DataError("line " + std::to_string(line_no) + ": sequence data before first header");
      }
      current_body.append(line);
    }
    if (end == text.size()) break;
  }
  flush();
  return records;
}

std::string serialize_fasta(std::span<const RnaSequence> records, std::size_t line_width) {
  std::string out;
  for (const auto& r : records) {
    out += '>';
    out += r.id;
    out += '\n';
    for (std::size_t i = 0; i < r.bases.size(); i += line_width) {
      out.append(r.bases, i, line_width);
      out += '\n';
    }
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<RnaSequence> read_fasta_file(const std::filesystem::path& path) {
  std::string text = read_text_file(path);
  try {
    return parse_fasta(text);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_fasta_file(const std::filesystem::path& path, std::span<const RnaSequence> records) {
  write_text_file(path, serialize_fasta(records));
}

LabeledDataset make_dataset(std::vector<RnaSequence> positives, std::vector<RnaSequence> negatives,
                            std::string provenance) {
  LabeledDataset ds;
  ds.provenance = std::move(provenance);
  std::unordered_set<std::string> seen;
  auto add = [&](std::vector<RnaSequence>& records, Label label) {
    for (auto& r : records) {
      if (!seen.insert(r.id).second) throw DataError("duplicate id '" + r.id + "' across classes");
      ds.examples.push_back({std::move(r), label});
    }
  };
  add(positives, Label::positive);
  add(negatives, Label::negative);
  if (ds.count(Label::positive) == 0) ds.warnings.emplace_back("positive class is empty");
  if (ds.count(Label::negative) == 0) ds.warnings.emplace_back("negative class is empty");
  return ds;
}

LabeledDataset load_dataset(const std::filesystem::path& positive_path,
                            const std::filesystem::path& negative_path) {
  auto pos = read_fasta_file(positive_path);
  auto neg = read_fasta_file(negative_path);
  auto ds = make_dataset(std::move(pos), std::move(neg),
                         "positives: " + positive_path.string() +
                             "; negatives: " + negative_path.string());
  return ds;
}

std::string manifest_csv(const LabeledDataset& dataset) {
  std::string out = "id,label\n";
  for (const auto& e : dataset.examples) {
    out += e.sequence.id;
    out += ',';
    out += to_string(e.label);
    out += '\n';
  }
  return out;
}

}  // namespace premir
