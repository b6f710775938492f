#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "topol/matrix.hpp"

namespace topol::manifold {

enum class Metric { euclidean, cosine };

Metric parse_metric(std::string_view name);
std::string to_string(Metric metric);

/// Distance between two rows. Cosine distance is 1 - cos, clamped at 0;
/// a zero row has cosine distance 1 to everything.
double distance(std::span<const float> x, std::span<const float> y, Metric metric);

/// Fixed-width neighbor lists, sorted by (distance, index) ascending.
struct KnnGraph {
  std::size_t n = 0;
  std::size_t k = 0;
  Metric metric = Metric::euclidean;
  std::vector<std::uint32_t> index;  // n * k
  std::vector<float> dist;           // n * k

  std::span<const std::uint32_t> neighbors(std::size_t i) const { return {index.data() + i * k, k}; }
  std::span<const float> distances(std::size_t i) const { return {dist.data() + i * k, k}; }
};

struct KnnOptions {
  bool parallel = true;
};

/// Exact brute-force kNN of every row among the other rows. k >= n is clamped to n-1 with a warning.
KnnGraph build_knn(const MatrixF& x, std::size_t k, Metric metric, KnnOptions opts = {});

/// Exact kNN of each query row among the reference rows (no self exclusion).
KnnGraph build_knn_query(const MatrixF& reference, const MatrixF& queries, std::size_t k, Metric metric,
                         KnnOptions opts = {});

/// Symmetric sparse weighted graph in CSR form. Weights lie in (0, 1].
struct FuzzyGraph {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;  // n + 1
  std::vector<std::uint32_t> targets;
  std::vector<double> weights;

  std::size_t edge_count() const noexcept { return targets.size(); }  // directed entries
  double weight(std::size_t i, std::size_t j) const;                  // 0 when absent
};

/// Local bandwidth search result for one node.
struct SmoothKnn {
  double rho = 0;
  double sigma = 1;
};

inline constexpr double kMinSigma = 1e-3;

/// Binary search for sigma with sum_j exp(-max(0, d_j - rho) / sigma) = log2(count), floored at kMinSigma.
double solve_sigma(std::span<const float> distances, double rho);

/// rho = nearest distance, sigma from solve_sigma.
SmoothKnn smooth_knn(std::span<const float> sorted_distances);

/// Per-node membership strengths before symmetrization (row i holds node i's k neighbors).
std::vector<double> membership_strengths(const KnnGraph& graph);

/// UMAP fuzzy union: w = a + b - a*b over the directed memberships.
FuzzyGraph fuzzy_simplicial_set(const KnnGraph& graph);

/// Number of connected components of the fuzzy graph.
std::size_t connected_components(const FuzzyGraph& graph);

/// Least-squares fit of 1 / (1 + a x^(2b)) to the min_dist/spread target curve.
std::pair<double, double> fit_ab(double min_dist, double spread);

enum class InitMode { automatic, spectral, random };

struct UmapParams {
  std::size_t n_neighbors = 15;
  std::size_t n_components = 2;
  double min_dist = 0.1;
  double spread = 1.0;
  int n_epochs = 200;
  double learning_rate = 1.0;
  double repulsion_strength = 1.0;
  int negative_sample_rate = 5;
  Metric metric = Metric::cosine;
  InitMode init = InitMode::automatic;  // spectral when the graph is connected
  bool parallel = false;                // Hogwild SGD; not bit-reproducible
};

struct ProjectionModel {
  MatrixF coords;  // n x d training layout
  std::vector<std::string> ids;
  UmapParams params;
  double a = 0;
  double b = 0;
  std::uint64_t seed = 0;
  bool spectral_init = false;
  std::shared_ptr<const MatrixF> training;  // required by transform

  std::size_t dim() const noexcept { return coords.cols(); }
};

/// Fits a UMAP layout. Deterministic for fixed (x, params, seed) unless params.parallel.
ProjectionModel fit_umap(const MatrixF& x, const UmapParams& params, std::uint64_t seed,
                         std::vector<std::string> ids = {});

/// Places new rows into a fitted layout without changing the model.
MatrixF transform(const ProjectionModel& model, const MatrixF& x_new);

/// Stores coords as a matrix file with a JSON header carrying hyperparameters, seed, ids, a and b.
void save_projection(const ProjectionModel& model, const std::filesystem::path& path);
ProjectionModel load_projection(const std::filesystem::path& path, std::shared_ptr<const MatrixF> training);

namespace detail {

/// Spectral layout from the symmetric normalized Laplacian. Empty matrix when it cannot be computed.
MatrixD spectral_layout(const FuzzyGraph& graph, std::size_t dim);

struct Edges {
  std::vector<std::uint32_t> head, tail;
  std::vector<double> epochs_per_sample;
};

/// Edge list with UMAP's per-edge sampling schedule. Edges below max/n_epochs are dropped.
Edges make_epoch_schedule(const FuzzyGraph& graph, int n_epochs);

/// Runs the layout SGD in place. `move_tail` is false when tails are frozen reference points.
void optimize_layout(MatrixF& head_coords, const MatrixF* tail_coords, const Edges& edges, double a, double b,
                     int n_epochs, double initial_alpha, double gamma, int negative_sample_rate,
                     std::uint64_t seed, bool parallel);

}  // namespace detail

}  // namespace topol::manifold
