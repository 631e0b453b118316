#include "premir/folding.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "premir/errors.hpp"

namespace premir {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTolerance = 1e-9;

enum class PairKind { none, au, gc, gu };

PairKind classify(char a, char b) {
  if (a > b) std::swap(a, b);
  if (a == 'A' && b == 'U') return PairKind::au;
  if (a == 'C' && b == 'G') return PairKind::gc;
  if (a == 'G' && b == 'U') return PairKind::gu;
  return PairKind::none;
}

// Half-open segment tables: [a, b) with 0 <= a <= b <= n.
struct MfeTables {
  std::size_t n;
  std::vector<double> e, eb, ex;
  std::size_t idx(std::size_t a, std::size_t b) const { return a * (n + 1) + b; }
};

MfeTables fill_mfe(std::string_view s, const EnergyModel& m) {
  const std::size_t n = s.size();
  MfeTables t{n, std::vector<double>((n + 1) * (n + 1), 0.0),
              std::vector<double>((n + 1) * (n + 1), kInf),
              std::vector<double>((n + 1) * (n + 1), 0.0)};
  const std::size_t min_span = m.min_hairpin + 2;
  for (std::size_t len = 1; len <= n; ++len) {
    for (std::size_t a = 0; a + len <= n; ++a) {
      const std::size_t b = a + len;
      if (len >= min_span && m.can_pair(s[a], s[b - 1])) {
        const double stacked = t.eb[t.idx(a + 1, b - 1)];
        const double opened = m.loop_penalty + t.ex[t.idx(a + 1, b - 1)];
        t.eb[t.idx(a, b)] = m.pair_score(s[a], s[b - 1]) + std::min(stacked, opened);
      }
      double best = t.e[t.idx(a + 1, b)];
      for (std::size_t k = a + min_span; k < b; ++k) {
        const double v = t.eb[t.idx(a, k)] + t.e[t.idx(k, b)];
        if (v < best) best = v;
      }
      t.ex[t.idx(a, b)] = best;
      t.e[t.idx(a, b)] = std::min(best, t.eb[t.idx(a, b)]);
    }
  }
  return t;
}

bool same(double x, double y) { return std::abs(x - y) <= kTieTolerance; }

void traceback(std::string_view s, const EnergyModel& m, const MfeTables& t,
               std::vector<BasePair>& pairs) {
  const std::size_t min_span = m.min_hairpin + 2;
  // kind 0: E segment, 1: Eb (a pairs b-1), 2: Ex
  struct Frame { std::size_t a, b; int kind; };
  std::vector<Frame> stack{{0, t.n, 0}};
  while (!stack.empty()) {
    auto [a, b, kind] = stack.back();
    stack.pop_back();
    if (a >= b) continue;
    if (kind == 1) {
      pairs.push_back({a, b - 1});
      const double inner = t.eb[t.idx(a, b)] - m.pair_score(s[a], s[b - 1]);
      if (same(inner, t.eb[t.idx(a + 1, b - 1)])) {
        stack.push_back({a + 1, b - 1, 1});
      } else {
        stack.push_back({a + 1, b - 1, 2});
      }
      continue;
    }
    const double target = kind == 0 ? t.e[t.idx(a, b)] : t.ex[t.idx(a, b)];
    const std::size_t last = kind == 0 ? b : b - 1;
    bool done = false;
    for (std::size_t k = a + min_span; k <= last; ++k) {
      const double eb = t.eb[t.idx(a, k)];
      if (eb == kInf) continue;
      if (same(eb + t.e[t.idx(k, b)], target)) {
        stack.push_back({k, b, 0});
        stack.push_back({a, k, 1});
        done = true;
        break;
      }
    }
    if (!done) stack.push_back({a + 1, b, 0});
  }
}

void check_pairs(std::string_view bases, const std::vector<BasePair>& pairs,
                 const EnergyModel& m, std::vector<std::ptrdiff_t>& partner) {
  partner.assign(bases.size(), -1);
  for (const auto& p : pairs) {
    if (p.i >= p.j || p.j >= bases.size()) throw DataError("invalid base pair index");
    if (partner[p.i] >= 0 || partner[p.j] >= 0) throw DataError("base paired twice");
    if (!m.can_pair(bases[p.i], bases[p.j])) throw DataError("non-canonical base pair");
    if (p.j - p.i - 1 < m.min_hairpin) throw DataError("hairpin loop below minimum size");
    partner[p.i] = static_cast<std::ptrdiff_t>(p.j);
    partner[p.j] = static_cast<std::ptrdiff_t>(p.i);
  }
  std::vector<std::size_t> open;
  for (std::size_t k = 0; k < bases.size(); ++k) {
    if (partner[k] < 0) continue;
    if (static_cast<std::size_t>(partner[k]) > k) {
      open.push_back(k);
    } else {
      if (open.empty() || open.back() != static_cast<std::size_t>(partner[k])) {
        throw DataError("crossing base pairs");
      }
      open.pop_back();
    }
  }
}

}  // namespace

bool EnergyModel::can_pair(char a, char b) const { return classify(a, b) != PairKind::none; }

double EnergyModel::pair_score(char a, char b) const {
  switch (classify(a, b)) {
    case PairKind::au: return au;
    case PairKind::gc: return gc;
    case PairKind::gu: return gu;
    default: return 0.0;
  }
}

SecondaryStructure fold(std::string_view bases, const EnergyModel& model) {
  const auto tables = fill_mfe(bases, model);
  std::vector<BasePair> pairs;
  traceback(bases, model, tables, pairs);
  return make_structure(bases, std::move(pairs), model);
}

double evaluate_energy(std::string_view bases, std::span<const BasePair> pairs,
                       const EnergyModel& model) {
  std::vector<std::ptrdiff_t> partner(bases.size(), -1);
  for (const auto& p : pairs) partner[p.i] = static_cast<std::ptrdiff_t>(p.j);
  double energy = 0.0;
  for (const auto& p : pairs) {
    energy += model.pair_score(bases[p.i], bases[p.j]);
    const bool stacked = p.i + 1 < p.j - 1 && partner[p.i + 1] == static_cast<std::ptrdiff_t>(p.j - 1);
    if (!stacked) energy += model.loop_penalty;
  }
  return energy;
}

std::string to_dot_bracket(std::span<const BasePair> pairs, std::size_t length) {
  std::string db(length, '.');
  for (const auto& p : pairs) {
    db[p.i] = '(';
    db[p.j] = ')';
  }
  return db;
}

std::vector<BasePair> parse_dot_bracket(std::string_view dot_bracket) {
  std::vector<BasePair> pairs;
  std::vector<std::size_t> open;
  for (std::size_t k = 0; k < dot_bracket.size(); ++k) {
    const char c = dot_bracket[k];
    if (c == '(') {
      open.push_back(k);
    } else if (c == ')') {
      if (open.empty()) throw DataError("unbalanced dot-bracket string");
      pairs.push_back({open.back(), k});
      open.pop_back();
    } else if (c != '.') {
      throw DataError(std::string("invalid dot-bracket character '") + c + "'");
    }
  }
  if (!open.empty()) throw DataError("unbalanced dot-bracket string");
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

SecondaryStructure make_structure(std::string_view bases, std::vector<BasePair> pairs,
                                  const EnergyModel& model) {
  std::sort(pairs.begin(), pairs.end());
  std::vector<std::ptrdiff_t> partner;
  check_pairs(bases, pairs, model, partner);

  SecondaryStructure ss;
  ss.dot_bracket = to_dot_bracket(pairs, bases.size());
  ss.energy = evaluate_energy(bases, pairs, model);

  std::size_t run = 0;
  for (const auto& p : pairs) {
    switch (classify(bases[p.i], bases[p.j])) {
      case PairKind::au: ++ss.au_pairs; break;
      case PairKind::gc: ++ss.gc_pairs; break;
      case PairKind::gu: ++ss.gu_pairs; break;
      default: break;
    }
    const bool continues = p.i > 0 && p.j + 1 < bases.size() &&
                           partner[p.i - 1] == static_cast<std::ptrdiff_t>(p.j + 1);
    if (continues) {
      ++run;
    } else {
      ++ss.stem_count;
      run = 1;
    }
    ss.max_consecutive_pairs = std::max(ss.max_consecutive_pairs, run);

    bool hairpin = true;
    for (std::size_t k = p.i + 1; k < p.j && hairpin; ++k) hairpin = partner[k] < 0;
    if (hairpin) {
      ++ss.hairpin_count;
      ss.loop_length += p.j - p.i - 1;
    }
  }

  // Loops: maximal unpaired runs lying inside at least one pair.
  std::size_t depth = 0;
  bool in_run = false;
  for (std::size_t k = 0; k < bases.size(); ++k) {
    if (partner[k] >= 0) {
      in_run = false;
      if (static_cast<std::size_t>(partner[k]) > k) {
        ++depth;
      } else {
        --depth;
      }
    } else if (depth > 0 && !in_run) {
      ++ss.loop_count;
      in_run = true;
    }
  }

  if (!pairs.empty()) {
    std::size_t last = 0;
    for (const auto& p : pairs) last = std::max(last, p.j);
    ss.hairpin_length = last - pairs.front().i + 1;
  }
  ss.pairs = std::move(pairs);
  return ss;
}

std::map<std::string, double> pairing_stats(const SecondaryStructure& ss) {
  const double n_pairs = static_cast<double>(ss.pairs.size());
  const double stems = static_cast<double>(ss.stem_count);
  std::map<std::string, double> out;
  out["|A-U|"] = static_cast<double>(ss.au_pairs);
  out["|G-C|"] = static_cast<double>(ss.gc_pairs);
  out["|G-U|"] = static_cast<double>(ss.gu_pairs);
  out["total_bases"] = 2.0 * n_pairs;
  out["stems"] = stems;
  out["loops"] = static_cast<double>(ss.loop_count);
  out["Avg_BP_Stem"] = stems > 0 ? n_pairs / stems : 0.0;
  out["IH"] = static_cast<double>(ss.hairpin_length);
  out["IL"] = static_cast<double>(ss.loop_length);
  out["IC"] = static_cast<double>(ss.max_consecutive_pairs);
  out["%L"] = ss.hairpin_length > 0
                  ? static_cast<double>(ss.loop_length) / static_cast<double>(ss.hairpin_length)
                  : 0.0;
  return out;
}

double tree_connectivity(const SecondaryStructure& ss) {
  if (ss.pairs.empty()) return 0.0;
  const std::size_t n = ss.dot_bracket.size();
  std::vector<std::ptrdiff_t> partner(n, -1);
  for (const auto& p : ss.pairs) {
    partner[p.i] = static_cast<std::ptrdiff_t>(p.j);
    partner[p.j] = static_cast<std::ptrdiff_t>(p.i);
  }
  // Vertex 0 is the exterior loop; stem s closes vertex s + 1.
  std::vector<std::size_t> stem_of(n, 0);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> enclosing;  // stack of innermost-pair vertices
  std::size_t stems = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (partner[k] < 0) continue;
    const auto j = static_cast<std::size_t>(partner[k]);
    if (j > k) {
      const bool continues = k > 0 && j + 1 < n && partner[k - 1] == static_cast<std::ptrdiff_t>(j + 1);
      if (!continues) {
        ++stems;
        const std::size_t parent = enclosing.empty() ? 0 : enclosing.back();
        edges.emplace_back(parent, stems);
      }
      stem_of[k] = continues ? stem_of[k - 1] : stems;
      enclosing.push_back(stem_of[k]);
    } else {
      enclosing.pop_back();
    }
  }
  const auto vertices = static_cast<Eigen::Index>(stems + 1);
  Eigen::MatrixXd laplacian = Eigen::MatrixXd::Zero(vertices, vertices);
  for (auto [u, v] : edges) {
    const auto a = static_cast<Eigen::Index>(u);
    const auto b = static_cast<Eigen::Index>(v);
    laplacian(a, a) += 1.0;
    laplacian(b, b) += 1.0;
    laplacian(a, b) -= 1.0;
    laplacian(b, a) -= 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian, Eigen::EigenvaluesOnly);
  return std::max(0.0, solver.eigenvalues()(1));
}

bool has_multiple_loops(const SecondaryStructure& ss) { return ss.hairpin_count > 1; }

LabeledDataset filter_multiple_loops(const LabeledDataset& dataset, const EnergyModel& model) {
  LabeledDataset out;
  out.provenance = dataset.provenance + "; multi-loop structures removed";
  out.warnings = dataset.warnings;
  for (const auto& e : dataset.examples) {
    if (!has_multiple_loops(fold(e.sequence.bases, model))) out.examples.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------

BoltzmannEnsemble::BoltzmannEnsemble(std::string_view bases, double temperature,
                                     const EnergyModel& model)
    : bases_(bases), model_(model), temperature_(temperature), n_(bases.size()) {
  if (!(temperature > 0.0)) throw DataError("ensemble temperature must be positive");
  const std::size_t n = n_;
  const std::size_t min_span = model.min_hairpin + 2;

  for (std::size_t a = 0; a < n && !has_pairs_; ++a) {
    for (std::size_t b = a + min_span - 1; b < n; ++b) {
      if (model.can_pair(bases[a], bases[b])) {
        has_pairs_ = true;
        break;
      }
    }
  }

  mfe_ = fill_mfe(bases, model).e[n];  // idx(0, n) == n
  // Choose the per-nucleotide scale so that the rescaled Z is near exp(0).
  scale_ = n > 0 ? std::exp(mfe_ / (static_cast<double>(n) * temperature)) : 1.0;
  penalty_weight_ = std::exp(-model.loop_penalty / temperature);

  const std::size_t cells = (n + 1) * (n + 1);
  q_.assign(cells, 1.0);
  qx_.assign(cells, 1.0);
  qb_.assign(cells, 0.0);
  const double s2 = scale_ * scale_;
  for (std::size_t len = 1; len <= n; ++len) {
    for (std::size_t a = 0; a + len <= n; ++a) {
      const std::size_t b = a + len;
      double qb = 0.0;
      if (len >= min_span && model.can_pair(bases[a], bases[b - 1])) {
        const double w = std::exp(-model.pair_score(bases[a], bases[b - 1]) / temperature) * s2;
        qb = w * (qb_[idx(a + 1, b - 1)] + penalty_weight_ * qx_[idx(a + 1, b - 1)]);
      }
      double qx = q_[idx(a + 1, b)] * scale_;
      for (std::size_t k = a + min_span; k < b; ++k) qx += qb_[idx(a, k)] * q_[idx(k, b)];
      qb_[idx(a, b)] = qb;
      qx_[idx(a, b)] = qx;
      q_[idx(a, b)] = qx + qb;
    }
  }
  const double log_z = std::log(q_[idx(0, n)]) - static_cast<double>(n) * std::log(scale_);
  efe_ = -temperature * log_z;
}

std::vector<BasePair> BoltzmannEnsemble::sample(Rng& rng) const {
  std::vector<BasePair> pairs;
  const std::size_t min_span = model_.min_hairpin + 2;
  struct Frame { std::size_t a, b; int kind; };  // 0: Q, 1: Qb, 2: Qx
  std::vector<Frame> stack{{0, n_, 0}};
  while (!stack.empty()) {
    auto [a, b, kind] = stack.back();
    stack.pop_back();
    if (a >= b) continue;
    if (kind == 1) {
      pairs.push_back({a, b - 1});
      const double stacked = qb_[idx(a + 1, b - 1)];
      const double opened = penalty_weight_ * qx_[idx(a + 1, b - 1)];
      const double r = uniform01(rng) * (stacked + opened);
      stack.push_back({a + 1, b - 1, r < stacked ? 1 : 2});
      continue;
    }
    const double total = kind == 0 ? q_[idx(a, b)] : qx_[idx(a, b)];
    double r = uniform01(rng) * total;
    const double unpaired = q_[idx(a + 1, b)] * scale_;
    if (r < unpaired) {
      stack.push_back({a + 1, b, 0});
      continue;
    }
    r -= unpaired;
    const std::size_t last = kind == 0 ? b : b - 1;
    std::size_t chosen = 0;
    for (std::size_t k = a + min_span; k <= last; ++k) {
      const double w = qb_[idx(a, k)] * q_[idx(k, b)];
      if (w <= 0.0) continue;
      chosen = k;
      if (r < w) break;
      r -= w;
    }
    if (chosen == 0) {
      // Rounding left r past every option; fall back to the unpaired branch.
      stack.push_back({a + 1, b, 0});
      continue;
    }
    stack.push_back({chosen, b, 0});
    stack.push_back({a, chosen, 1});
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::vector<std::vector<BasePair>> BoltzmannEnsemble::sample(std::size_t count, Rng& rng) const {
  std::vector<std::vector<BasePair>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample(rng));
  return out;
}

}  // namespace premir
