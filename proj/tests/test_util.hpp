#ifndef LATSIM_TESTS_TEST_UTIL_HPP_
#define LATSIM_TESTS_TEST_UTIL_HPP_

// Shared fixtures and oracles for the test suites. Nothing here calls the
// code paths it is used to check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "latsim/autoencoder.hpp"

namespace latsim::testing_util {

inline std::vector<Eigen::MatrixXd> random_windows(int n, Eigen::Index L, Eigen::Index d,
                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Eigen::MatrixXd> out;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd w(L, d);
    for (Eigen::Index r = 0; r < L; ++r)
      for (Eigen::Index c = 0; c < d; ++c) w(r, c) = g(rng);
    out.push_back(std::move(w));
  }
  return out;
}

// Each channel is a mixture of two sinusoids with a random phase, drawn from a
// small frequency set, then column-standardized.
inline std::vector<Eigen::MatrixXd> sinusoid_windows(int n, Eigen::Index L, Eigen::Index d,
                                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_int_distribution<int> freq(1, 3);
  std::uniform_real_distribution<double> amp(0.3, 1.0);
  std::vector<Eigen::MatrixXd> out;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd w(L, d);
    for (Eigen::Index c = 0; c < d; ++c) {
      const double f1 = freq(rng), f2 = freq(rng) + 0.5, p1 = phase(rng), p2 = phase(rng);
      const double a2 = amp(rng);
      for (Eigen::Index t = 0; t < L; ++t) {
        const double x = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(L);
        w(t, c) = std::sin(f1 * x + p1) + a2 * std::sin(f2 * x + p2);
      }
      const double mean = w.col(c).mean();
      const double sd = std::sqrt((w.col(c).array() - mean).square().sum() / static_cast<double>(L - 1));
      w.col(c) = ((w.col(c).array() - mean) / sd).matrix();
    }
    out.push_back(std::move(w));
  }
  return out;
}

// Central-difference gradient of the reconstruction loss. For each parameter
// group returns max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, floor).
inline std::vector<std::pair<std::string, double>> finite_difference_check(
    const std::vector<Eigen::MatrixXd>& windows, const ModelParams<double>& params,
    const ModelParams<double>& analytic, double step, double floor = 1e-6) {
  std::vector<std::pair<std::string, double>> report;
  ModelParams<double> probe = params;
  ModelParams<double>::zip(
      [&](const std::string& name, auto& p, const auto& g) {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          const double saved = p(i);
          p(i) = saved + step;
          const double up = reconstruction_loss<double>(windows, probe);
          p(i) = saved - step;
          const double down = reconstruction_loss<double>(windows, probe);
          p(i) = saved;
          const double numeric = (up - down) / (2.0 * step);
          const double denom = std::max({std::abs(g(i)), std::abs(numeric), floor});
          worst = std::max(worst, std::abs(g(i) - numeric) / denom);
        }
        report.emplace_back(name, worst);
      },
      probe, analytic);
  return report;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("latsim_" + tag + "_" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace latsim::testing_util

#endif  // LATSIM_TESTS_TEST_UTIL_HPP_
