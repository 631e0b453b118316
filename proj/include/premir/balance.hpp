#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "premir/matrix.hpp"
#include "premir/sequence_io.hpp"

namespace premir {

struct ClusterAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> labels;
  Matrix centroids;  // k x dim
  double inertia = 0.0;
  // Inertia after every assignment step; non-increasing.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
};

inline constexpr std::size_t kKmeansMaxIterations = 300;

/// Lloyd's algorithm from a k-means++ start. Stops when the assignment is
/// stable or after kKmeansMaxIterations. A cluster that empties out is
/// re-seeded with the point farthest from its centroid.
ClusterAssignment kmeans(const Matrix& points, std::size_t k, std::uint64_t seed);

/// Picks `target` negatives: clusters them with kmeans(k), takes the cluster
/// with the lowest mean pairwise Euclidean distance, samples `target` ids from
/// it or, if it is too small, takes all of it and fills up with the points of
/// other clusters nearest to its centroid.
std::vector<std::string> undersample_negatives(const Matrix& negatives,
                                               std::span<const std::string> ids,
                                               std::size_t target, std::uint64_t seed,
                                               std::size_t k = 5);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct FoldPlan {
  std::size_t n_folds = 0;
  std::uint64_t seed = 0;
  std::vector<FoldSplit> folds;
};

/// Class-stratified k-fold plan over indices 0..labels.size()-1. Each class
/// is shuffled with the seed and dealt round-robin into the folds.
FoldPlan stratified_kfold(std::span<const int> labels, std::size_t n_folds, std::uint64_t seed);
FoldPlan stratified_kfold(const LabeledDataset& dataset, std::size_t n_folds, std::uint64_t seed);

// JSON with fold -> train/test id lists; reading maps ids back to indices.
std::string fold_plan_to_json(const FoldPlan& plan, std::span<const std::string> ids);
FoldPlan fold_plan_from_json(std::string_view text, std::span<const std::string> ids);

}  // namespace premir
