#include "premir/kernels.hpp"

#include <omp.h>

#include <limits>

namespace premir::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;

inline double conv_output(const ConvShape& s, std::span<const double> in,
                          std::span<const double> w, double bias, std::size_t f, std::size_t t) {
  double acc = bias;
  const std::size_t start = t * s.stride;
  for (std::size_t c = 0; c < s.channels; ++c) {
    const double* wr = w.data() + (f * s.channels + c) * s.window;
    const double* xr = in.data() + c * s.length + start;
    for (std::size_t k = 0; k < s.window; ++k) acc += wr[k] * xr[k];
  }
  return acc;
}

inline double row_dot(std::size_t cols, const double* w, const double* x, double bias) {
  double acc = bias;
  for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
  return acc;
}

inline double nearest(std::size_t k, std::size_t dim, const double* p, const double* centroids,
                      std::size_t& label) {
  double best = std::numeric_limits<double>::infinity();
  label = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double* c = centroids + j * dim;
    double d = 0.0;
    for (std::size_t q = 0; q < dim; ++q) {
      const double diff = p[q] - c[q];
      d += diff * diff;
    }
    if (d < best) {
      best = d;
      label = j;
    }
  }
  return best;
}
}  // namespace

void set_threads(int threads) { omp_set_num_threads(threads < 1 ? 1 : threads); }
int max_threads() { return omp_get_max_threads(); }

void conv1d_forward_serial(const ConvShape& s, std::span<const double> in,
                           std::span<const double> weights, std::span<const double> bias,
                           std::span<double> out) {
  const std::size_t lo = s.out_length();
  for (std::size_t f = 0; f < s.filters; ++f) {
    for (std::size_t t = 0; t < lo; ++t) out[f * lo + t] = conv_output(s, in, weights, bias[f], f, t);
  }
}

void conv1d_forward(const ConvShape& s, std::span<const double> in,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> out) {
  const std::size_t lo = s.out_length();
  const std::size_t total = s.filters * lo;
  const bool parallel = total * s.channels * s.window >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t idx = 0; idx < total; ++idx) {
    const std::size_t f = idx / lo;
    const std::size_t t = idx % lo;
    out[idx] = conv_output(s, in, weights, bias[f], f, t);
  }
}

void dense_forward_serial(std::size_t rows, std::size_t cols, std::span<const double> x,
                          std::span<const double> weights, std::span<const double> bias,
                          std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = row_dot(cols, weights.data() + r * cols, x.data(), bias[r]);
}

void dense_forward(std::size_t rows, std::size_t cols, std::span<const double> x,
                   std::span<const double> weights, std::span<const double> bias,
                   std::span<double> out) {
  const bool parallel = rows * cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = row_dot(cols, weights.data() + r * cols, x.data(), bias[r]);
  }
}

double assign_nearest_serial(std::size_t n, std::size_t k, std::size_t dim,
                             std::span<const double> points, std::span<const double> centroids,
                             std::span<std::size_t> labels, std::span<double> sq_dist) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sq_dist[i] = nearest(k, dim, points.data() + i * dim, centroids.data(), labels[i]);
    total += sq_dist[i];
  }
  return total;
}

double assign_nearest(std::size_t n, std::size_t k, std::size_t dim,
                      std::span<const double> points, std::span<const double> centroids,
                      std::span<std::size_t> labels, std::span<double> sq_dist) {
  const bool parallel = n * k * dim >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < n; ++i) {
    sq_dist[i] = nearest(k, dim, points.data() + i * dim, centroids.data(), labels[i]);
  }
  // Fixed-order reduction keeps the sum identical to the serial kernel.
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += sq_dist[i];
  return total;
}

}  // namespace premir::kernels
