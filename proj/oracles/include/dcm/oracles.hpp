#pragma once
// Slow reference implementations written independently of the library code
// they check, plus the check suites shared by the acceptance binary and the
// `dcm selftest` subcommand.

#include "dcm/autograd.hpp"
#include "dcm/baseline_losses.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace dcm::oracle {

// ---------------------------------------------------------------------------
// Brute-force references

double pearson(std::span<const double> x, std::span<const double> y);
/// rank_i = 1 + #{v < v_i} + (#{v == v_i} - 1) / 2, by direct counting.
std::vector<double> counting_ranks(std::span<const double> v);
double spearman(std::span<const double> x, std::span<const double> y);
/// Tau-b by enumerating every pair.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

struct EigenPairs {
  /// Descending.
  Vector values;
  /// Column i pairs with values(i).
  Matrix vectors;
};
/// Cyclic Jacobi rotations on a symmetric matrix.
EigenPairs jacobi_eigen(const Matrix& symmetric, double tol = 1e-15, int max_sweeps = 100);
/// Top-2 PCA coordinates using jacobi_eigen, with the largest-magnitude
/// loading of each axis made positive.
Matrix pca_coordinates(const Matrix& features);

/// Supervised contrastive loss by explicit loops over anchors, positives and
/// denominator terms.
double supcon(const FeatureGrid& features, double temperature);

// ---------------------------------------------------------------------------
// Finite differences

using ScalarFn = std::function<double(const std::vector<double>&)>;
std::vector<double> central_difference(const ScalarFn& f, std::vector<double> x, double h = 1e-6);
/// ||a - b|| / max(||a||, ||b||); 0 when both norms are below 1e-12.
double relative_error(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Check suites

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Every hand-computed loss example, each to 1e-6.
std::vector<CheckResult> loss_value_checks();

/// Analytic-vs-central-difference gradient checks for the MLR, KD-MSE and five
/// baseline losses; configs_per_loss random inputs each, every hinge argument
/// at least 1e-3 from its kink. One result per loss, reporting the worst
/// relative error (tolerance 1e-4).
std::vector<CheckResult> gradient_checks(int configs_per_loss, std::uint64_t seed);

/// correlate against the brute-force references on random vector pairs
/// (n <= 50, half with ties) to 1e-10, plus the exact tau-b worked example.
std::vector<CheckResult> correlation_checks(int pairs, std::uint64_t seed);

/// Prints one "PASS|FAIL name: detail" line per check; true if all pass.
bool report(std::span<const CheckResult> results, std::ostream& out);

/// All three suites; true if everything passes.
bool run_selftest(std::ostream& out, std::uint64_t seed = 7);

}  // namespace dcm::oracle
