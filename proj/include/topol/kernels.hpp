#pragma once

// Data-parallel kernels. Each has a serial reference and an OpenMP variant that
// must produce identical results; tests compare the two and bench/ times them.

#include <cstdint>
#include <span>
#include <vector>

#include "topol/corpus.hpp"
#include "topol/manifold.hpp"
#include "topol/matrix.hpp"

namespace topol::kernels {

/// Brute-force kNN of queries against reference rows. With `exclude_self`, query i
/// is reference row i and is skipped. Results sorted by (distance, index).
void knn_serial(const MatrixF& reference, const MatrixF& queries, std::size_t k, manifold::Metric metric,
                bool exclude_self, manifold::KnnGraph& out);
void knn_parallel(const MatrixF& reference, const MatrixF& queries, std::size_t k, manifold::Metric metric,
                  bool exclude_self, manifold::KnnGraph& out);

/// One random-boundary draw of the permutation null.
struct NullDraw {
  double m_bar = 0;
  double s_bar = 0;
  bool s_defined = false;
  std::size_t eligible = 0;
};

struct NullProblem {
  const MatrixD* coords = nullptr;
  std::span<const std::uint32_t> community;  // per document
  std::size_t n_communities = 0;
  std::span<const corpus::Regime> regimes;   // original labels
  std::size_t tau = 3;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
};

/// Draw i shuffles the label column with derive_seed(seed, i) and rebuilds the field.
std::vector<NullDraw> permutation_null_serial(const NullProblem& problem);
std::vector<NullDraw> permutation_null_parallel(const NullProblem& problem);

}  // namespace topol::kernels
