#include "dpcorr/mechanism.hpp"

#include <cmath>

namespace dpcorr {

namespace {

void check_release_input(const CountStream& true_counts) {
  if (true_counts.kind() != StreamKind::True)
    throw Error(ErrorKind::InvalidArgument, "release expects a true count stream, got " +
                                                std::string(to_string(true_counts.kind())));
}

inline double cell_noise(std::uint64_t key, std::size_t cell, double lambda) {
  CounterRng rng(key, cell);
  return sample_laplace(lambda, rng);
}

}  // namespace

double laplace_scale(const PrivacyParams& params) { return params.lambda(); }

double laplace_from_uniform(double u, double lambda) {
  if (u == 0.0) return 0.0;
  const double sign = u > 0.0 ? 1.0 : -1.0;
  return -lambda * sign * std::log1p(-2.0 * std::abs(u));
}

double sample_laplace(double lambda, CounterRng& rng) {
  return laplace_from_uniform(rng.uniform_centered(), lambda);
}

CountStream release_stream_serial(const CountStream& true_counts, const PrivacyParams& params,
                                  RandomSeed seed) {
  check_release_input(true_counts);
  const double lambda = laplace_scale(params);
  const std::uint64_t key = derive_key(seed.value, StreamDomain::Release, 0);
  Matrix out = true_counts.values();
  const std::size_t m = out.cols();
  for (std::size_t t = 0; t < out.rows(); ++t)
    for (std::size_t l = 0; l < m; ++l) out(t, l) += cell_noise(key, t * m + l, lambda);
  return CountStream::noisy(std::move(out));
}

CountStream release_stream(const CountStream& true_counts, const PrivacyParams& params, RandomSeed seed) {
  check_release_input(true_counts);
  const double lambda = laplace_scale(params);
  const std::uint64_t key = derive_key(seed.value, StreamDomain::Release, 0);
  Matrix out = true_counts.values();
  const std::size_t m = out.cols();
  const auto steps = static_cast<std::ptrdiff_t>(out.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < steps; ++t) {
    const auto row = static_cast<std::size_t>(t);
    for (std::size_t l = 0; l < m; ++l) out(row, l) += cell_noise(key, row * m + l, lambda);
  }
  return CountStream::noisy(std::move(out));
}

}  // namespace dpcorr
