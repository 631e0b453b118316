#include "premir/balance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "premir/errors.hpp"
#include "premir/kernels.hpp"
#include "premir/random.hpp"

namespace premir {

namespace {

double sq_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

Matrix kmeanspp_init(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centroids(0, points.cols());
  std::vector<bool> chosen(n, false);
  std::size_t first = uniform_index(rng, n);
  chosen[first] = true;
  centroids.append_row(points.row(first));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_distance(points.row(i), points.row(first));

  while (centroids.rows() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > r) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // rounding left r past the last positive weight
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every remaining point duplicates a centroid; take an unused index.
      std::vector<std::size_t> unused;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) unused.push_back(i);
      }
      pick = unused[uniform_index(rng, unused.size())];
    }
    chosen[pick] = true;
    centroids.append_row(points.row(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_distance(points.row(i), points.row(pick)));
    }
  }
  return centroids;
}

}  // namespace

ClusterAssignment kmeans(const Matrix& points, std::size_t k, std::uint64_t seed) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  if (n == 0) throw DataError("k-means needs at least one point");
  if (k == 0) throw UsageError("k-means needs k >= 1");
  if (k > n) {
    throw UsageError("k-means with k=" + std::to_string(k) + " but only " + std::to_string(n) +
                     " points");
  }
  for (double v : points.data()) {
    if (!std::isfinite(v)) throw DataError("k-means input contains a non-finite value");
  }

  Rng rng(derive_seed(seed, stream::kKmeans));
  ClusterAssignment result;
  result.k = k;
  result.centroids = kmeanspp_init(points, k, rng);
  result.labels.assign(n, k);
  std::vector<std::size_t> labels(n);
  std::vector<double> sq(n);

  for (std::size_t iter = 0; iter < kKmeansMaxIterations; ++iter) {
    double inertia = kernels::assign_nearest(n, k, dim, points.data(), result.centroids.data(),
                                             labels, sq);
    // Repair empty clusters: move the point farthest from its centroid.
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t l : labels) ++sizes[l];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (sizes[labels[i]] > 1 && (sizes[labels[far]] <= 1 || sq[i] > sq[far])) far = i;
      }
      --sizes[labels[far]];
      ++sizes[c];
      labels[far] = c;
      inertia -= sq[far];
      sq[far] = 0.0;
      std::copy(points.row(far).begin(), points.row(far).end(), result.centroids.row(c).begin());
    }
    result.inertia_history.push_back(inertia);
    result.inertia = inertia;
    result.iterations = iter + 1;
    if (labels == result.labels) break;
    result.labels = labels;

    Matrix sums(k, dim);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = sums.row(labels[i]);
      auto src = points.row(i);
      for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      auto dst = result.centroids.row(c);
      auto src = sums.row(c);
      for (std::size_t d = 0; d < dim; ++d) dst[d] = src[d] / static_cast<double>(sizes[c]);
    }
  }
  return result;
}

std::vector<std::string> undersample_negatives(const Matrix& negatives,
                                               std::span<const std::string> ids,
                                               std::size_t target, std::uint64_t seed,
                                               std::size_t k) {
  const std::size_t n = negatives.rows();
  if (ids.size() != n) throw DataError("undersampling: id count does not match feature rows");
  if (target > n) {
    throw UsageError("undersampling target " + std::to_string(target) + " exceeds the " +
                     std::to_string(n) + " available negatives");
  }
  if (target == 0) return {};
  const auto clusters = kmeans(negatives, std::min(k, n), seed);

  std::vector<std::vector<std::size_t>> members(clusters.k);
  for (std::size_t i = 0; i < n; ++i) members[clusters.labels[i]].push_back(i);

  // Singletons have no pairwise distance; they only compete when every
  // cluster is a singleton.
  const bool all_singletons =
      std::all_of(members.begin(), members.end(), [](const auto& m) { return m.size() < 2; });
  std::size_t best = clusters.k;
  double best_mean = 0.0;
  for (std::size_t c = 0; c < clusters.k; ++c) {
    const auto& m = members[c];
    if (m.empty() || (m.size() < 2 && !all_singletons)) continue;
    double mean = 0.0;
    if (m.size() >= 2) {
      double sum = 0.0;
      for (std::size_t a = 0; a < m.size(); ++a) {
        for (std::size_t b = a + 1; b < m.size(); ++b) {
          sum += std::sqrt(sq_distance(negatives.row(m[a]), negatives.row(m[b])));
        }
      }
      mean = sum / (static_cast<double>(m.size()) * static_cast<double>(m.size() - 1) / 2.0);
    }
    if (best == clusters.k || mean < best_mean) {
      best = c;
      best_mean = mean;
    }
  }

  std::vector<std::size_t> chosen = members[best];
  Rng rng(derive_seed(seed, stream::kUndersample));
  if (chosen.size() >= target) {
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(target);
  } else {
    std::vector<std::pair<double, std::size_t>> rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (clusters.labels[i] != best) {
        rest.emplace_back(sq_distance(negatives.row(i), clusters.centroids.row(best)), i);
      }
    }
    std::sort(rest.begin(), rest.end());
    for (std::size_t r = 0; chosen.size() < target; ++r) chosen.push_back(rest[r].second);
  }
  std::vector<std::string> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(ids[i]);
  return out;
}

FoldPlan stratified_kfold(std::span<const int> labels, std::size_t n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw UsageError("cross-validation needs at least 2 folds");
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;
  plan.folds.resize(n_folds);
  Rng rng(derive_seed(seed, stream::kFolds));
  std::vector<std::size_t> fold_of(labels.size());
  for (int cls : classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    if (idx.size() < n_folds) {
      throw DataError("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                      " members, fewer than the " + std::to_string(n_folds) + " folds");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t r = 0; r < idx.size(); ++r) fold_of[idx[r]] = r % n_folds;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t f = 0; f < n_folds; ++f) {
      (f == fold_of[i] ? plan.folds[f].test : plan.folds[f].train).push_back(i);
    }
  }
  return plan;
}

FoldPlan stratified_kfold(const LabeledDataset& dataset, std::size_t n_folds, std::uint64_t seed) {
  std::vector<int> labels;
  for (const auto& ex : dataset.examples) labels.push_back(static_cast<int>(ex.label));
  return stratified_kfold(labels, n_folds, seed);
}

std::string fold_plan_to_json(const FoldPlan& plan, std::span<const std::string> ids) {
  nlohmann::json j;
  j["n_folds"] = plan.n_folds;
  j["seed"] = plan.seed;
  j["folds"] = nlohmann::json::array();
  for (const auto& fold : plan.folds) {
    nlohmann::json f;
    f["train"] = nlohmann::json::array();
    f["test"] = nlohmann::json::array();
    for (std::size_t i : fold.train) f["train"].push_back(ids[i]);
    for (std::size_t i : fold.test) f["test"].push_back(ids[i]);
    j["folds"].push_back(std::move(f));
  }
  return j.dump(2) + "\n";
}

FoldPlan fold_plan_from_json(std::string_view text, std::span<const std::string> ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
  try {
    const auto j = nlohmann::json::parse(text);
    FoldPlan plan;
    plan.n_folds = j.at("n_folds").get<std::size_t>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("folds")) {
      FoldSplit split;
      for (const auto& part : {"train", "test"}) {
        for (const auto& id : f.at(part)) {
          auto it = index.find(id.get<std::string>());
          if (it == index.end()) {
            throw DataError("fold plan references unknown id '" + id.get<std::string>() + "'");
          }
          (std::string_view(part) == "train" ? split.train : split.test).push_back(it->second);
        }
      }
      plan.folds.push_back(std::move(split));
    }
    if (plan.folds.size() != plan.n_folds) throw DataError("fold plan n_folds does not match its folds");
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed fold plan JSON: ") + e.what());
  }
}

}  // namespace premir
