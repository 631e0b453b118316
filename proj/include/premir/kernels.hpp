#pragma once

#include <cstddef>
#include <span>

// Hot inner loops, each in two flavours: a plain serial reference and an
// OpenMP version parallel over independent outputs. Every output element is
// accumulated in the same order in both, so results are bitwise identical
// for any thread count. The library calls the parallel versions; the serial
// ones are kept for tests and the benchmark.
namespace premir::kernels {

// Number of threads the parallel kernels use (wraps omp_set_num_threads).
void set_threads(int threads);
int max_threads();

struct ConvShape {
  std::size_t channels;  // input channels
  std::size_t length;    // input length
  std::size_t filters;
  std::size_t window;
  std::size_t stride;
  std::size_t out_length() const { return (length - window) / stride + 1; }
};

// out[f, t] = bias[f] + sum_{c,k} weights[f, c, k] * in[c, t*stride + k]
void conv1d_forward_serial(const ConvShape& s, std::span<const double> in,
                           std::span<const double> weights, std::span<const double> bias,
                           std::span<double> out);
void conv1d_forward(const ConvShape& s, std::span<const double> in,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> out);

// out = W x + b, W is [rows, cols] row-major.
void dense_forward_serial(std::size_t rows, std::size_t cols, std::span<const double> x,
                          std::span<const double> weights, std::span<const double> bias,
                          std::span<double> out);
void dense_forward(std::size_t rows, std::size_t cols, std::span<const double> x,
                   std::span<const double> weights, std::span<const double> bias,
                   std::span<double> out);

// Nearest-centroid assignment over row-major points [n, dim] and centroids
// [k, dim]. Writes labels and squared distances; returns their sum.
double assign_nearest_serial(std::size_t n, std::size_t k, std::size_t dim,
                             std::span<const double> points, std::span<const double> centroids,
                             std::span<std::size_t> labels, std::span<double> sq_dist);
double assign_nearest(std::size_t n, std::size_t k, std::size_t dim,
                      std::span<const double> points, std::span<const double> centroids,
                      std::span<std::size_t> labels, std::span<double> sq_dist);

}  // namespace premir::kernels
