#include "topol/manifold.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "topol/embed.hpp"
#include "topol/kernels.hpp"
#include "topol/log.hpp"
#include "topol/rng.hpp"

namespace topol::manifold {

Metric parse_metric(std::string_view name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "cosine") return Metric::cosine;
  throw InvalidArgument("unknown metric '" + std::string(name) + "'");
}

std::string to_string(Metric metric) { return metric == Metric::euclidean ? "euclidean" : "cosine"; }

double distance(std::span<const float> x, std::span<const float> y, Metric metric) {
  if (metric == Metric::euclidean) {
    double s = 0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      double t = double(x[c]) - y[c];
      s += t * t;
    }
    return std::sqrt(s);
  }
  double dot = 0, nx = 0, ny = 0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    dot += double(x[c]) * y[c];
    nx += double(x[c]) * x[c];
    ny += double(y[c]) * y[c];
  }
  const double denom = std::sqrt(nx) * std::sqrt(ny);
  return denom > 0 ? std::max(0.0, 1.0 - dot / denom) : 1.0;
}

KnnGraph build_knn(const MatrixF& x, std::size_t k, Metric metric, KnnOptions opts) {
  if (x.rows() < 2) throw InvalidArgument("kNN needs at least 2 points");
  if (k < 1) throw InvalidArgument("kNN needs k >= 1");
  if (k >= x.rows()) {
    log::warn("k=" + std::to_string(k) + " >= n=" + std::to_string(x.rows()) + "; clamped to " +
              std::to_string(x.rows() - 1));
    k = x.rows() - 1;
  }
  KnnGraph g;
  if (opts.parallel) kernels::knn_parallel(x, x, k, metric, true, g);
  else kernels::knn_serial(x, x, k, metric, true, g);
  return g;
}

KnnGraph build_knn_query(const MatrixF& reference, const MatrixF& queries, std::size_t k, Metric metric,
                         KnnOptions opts) {
  if (reference.rows() < 1) throw InvalidArgument("kNN reference set is empty");
  if (reference.cols() != queries.cols()) throw InvalidArgument("kNN query dimension mismatch");
  if (k < 1) throw InvalidArgument("kNN needs k >= 1");
  k = std::min(k, reference.rows());
  KnnGraph g;
  if (opts.parallel) kernels::knn_parallel(reference, queries, k, metric, false, g);
  else kernels::knn_serial(reference, queries, k, metric, false, g);
  return g;
}

double FuzzyGraph::weight(std::size_t i, std::size_t j) const {
  for (auto e = offsets[i]; e < offsets[i + 1]; ++e)
    if (targets[e] == j) return weights[e];
  return 0.0;
}

double solve_sigma(std::span<const float> d, double rho) {
  if (d.empty()) return 1.0;
  const double target = std::log2(static_cast<double>(d.size()));
  double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
  for (int iter = 0; iter < 64; ++iter) {
    double psum = 0;
    for (float dj : d) psum += std::exp(-std::max(0.0, double(dj) - rho) / mid);
    if (std::abs(psum - target) < 1e-5) break;
    if (psum > target) {
      hi = mid;
      mid = (lo + hi) / 2.0;
    } else {
      lo = mid;
      mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
    }
  }
  return std::max(mid, kMinSigma);
}

SmoothKnn smooth_knn(std::span<const float> d) {
  SmoothKnn out;
  if (d.empty()) return out;
  out.rho = d.front();
  out.sigma = solve_sigma(d, out.rho);
  return out;
}

std::vector<double> membership_strengths(const KnnGraph& graph) {
  std::vector<double> w(graph.n * graph.k);
  for (std::size_t i = 0; i < graph.n; ++i) {
    const auto d = graph.distances(i);
    const auto s = smooth_knn(d);
    for (std::size_t t = 0; t < graph.k; ++t)
      w[i * graph.k + t] = std::exp(-std::max(0.0, double(d[t]) - s.rho) / s.sigma);
  }
  return w;
}

FuzzyGraph fuzzy_simplicial_set(const KnnGraph& graph) {
  const auto w = membership_strengths(graph);
  std::vector<std::map<std::uint32_t, double>> directed(graph.n);
  for (std::size_t i = 0; i < graph.n; ++i) {
    const auto nb = graph.neighbors(i);
    for (std::size_t t = 0; t < graph.k; ++t)
      if (nb[t] != i) directed[i][nb[t]] = w[i * graph.k + t];
  }
  FuzzyGraph out;
  out.n = graph.n;
  out.offsets.assign(graph.n + 1, 0);
  std::vector<std::map<std::uint32_t, double>> sym(graph.n);
  for (std::size_t i = 0; i < graph.n; ++i) {
    for (const auto& [j, a] : directed[i]) {
      auto it = directed[j].find(static_cast<std::uint32_t>(i));
      const double b = it == directed[j].end() ? 0.0 : it->second;
      const double s = a + b - a * b;
      if (s > 0) {
        sym[i][j] = s;
        sym[j][static_cast<std::uint32_t>(i)] = s;
      }
    }
  }
  for (std::size_t i = 0; i < graph.n; ++i) {
    out.offsets[i + 1] = out.offsets[i] + sym[i].size();
    for (const auto& [j, s] : sym[i]) {
      out.targets.push_back(j);
      out.weights.push_back(s);
    }
  }
  return out;
}

std::size_t connected_components(const FuzzyGraph& graph) {
  std::vector<bool> seen(graph.n, false);
  std::size_t components = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < graph.n; ++s) {
    if (seen[s]) continue;
    ++components;
    seen[s] = true;
    stack.push_back(s);
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto e = graph.offsets[u]; e < graph.offsets[u + 1]; ++e)
        if (!seen[graph.targets[e]]) {
          seen[graph.targets[e]] = true;
          stack.push_back(graph.targets[e]);
        }
    }
  }
  return components;
}

std::pair<double, double> fit_ab(double min_dist, double spread) {
  if (!(spread > 0) || !(min_dist >= 0)) throw InvalidArgument("min_dist must be >= 0 and spread > 0");
  constexpr int kPoints = 300;
  std::vector<double> xs(kPoints), ys(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    xs[i] = spread * 3.0 * i / (kPoints - 1);
    ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
  }
  auto residuals = [&](double a, double b, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    r.resize(kPoints);
    if (jac) jac->resize(kPoints, 2);
    for (int i = 0; i < kPoints; ++i) {
      const double x = xs[i];
      const double p = x > 0 ? std::pow(x, 2.0 * b) : 0.0;
      const double denom = 1.0 + a * p;
      r[i] = 1.0 / denom - ys[i];
      if (jac) {
        (*jac)(i, 0) = -p / (denom * denom);
        (*jac)(i, 1) = x > 0 ? -a * p * 2.0 * std::log(x) / (denom * denom) : 0.0;
      }
    }
  };
  // Levenberg-Marquardt from (1, 1).
  double a = 1.0, b = 1.0, lambda = 1e-3;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  residuals(a, b, r, &jac);
  double cost = r.squaredNorm();
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::Matrix2d jtj = jac.transpose() * jac;
    Eigen::Vector2d g = jac.transpose() * r;
    Eigen::Matrix2d lhs = jtj;
    lhs.diagonal() += lambda * jtj.diagonal();
    Eigen::Vector2d step = lhs.ldlt().solve(-g);
    Eigen::VectorXd r_new;
    residuals(a + step[0], b + step[1], r_new, nullptr);
    const double cost_new = r_new.squaredNorm();
    if (cost_new < cost) {
      a += step[0];
      b += step[1];
      const bool converged = cost - cost_new < 1e-15 * std::max(1.0, cost);
      cost = cost_new;
      lambda = std::max(lambda / 10.0, 1e-12);
      residuals(a, b, r, &jac);
      if (converged || step.norm() < 1e-12) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
  return {a, b};
}

namespace detail {

namespace {

void fix_signs(Eigen::MatrixXd& vecs) {
  for (Eigen::Index c = 0; c < vecs.cols(); ++c) {
    Eigen::Index arg = 0;
    vecs.col(c).cwiseAbs().maxCoeff(&arg);
    if (vecs(arg, c) < 0) vecs.col(c) *= -1.0;
  }
}

}  // namespace

MatrixD spectral_layout(const FuzzyGraph& graph, std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(graph.n);
  const auto want = static_cast<Eigen::Index>(dim) + 1;
  if (want >= n) return {};
  Eigen::VectorXd deg = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (auto e = graph.offsets[i]; e < graph.offsets[i + 1]; ++e) deg[i] += graph.weights[e];
  if ((deg.array() <= 0).any()) return {};
  Eigen::VectorXd inv_sqrt = deg.array().rsqrt();

  Eigen::MatrixXd vecs;  // n x dim, ordered by ascending Laplacian eigenvalue (trivial one removed)
  constexpr Eigen::Index kDenseLimit = 2500;
  if (n <= kDenseLimit) {
    Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (auto e = graph.offsets[i]; e < graph.offsets[i + 1]; ++e) {
        const auto j = static_cast<Eigen::Index>(graph.targets[e]);
        lap(i, j) -= graph.weights[e] * inv_sqrt[i] * inv_sqrt[j];
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
    if (solver.info() != Eigen::Success) return {};
    vecs = solver.eigenvectors().middleCols(1, want - 1);
  } else {
    // Subspace iteration on (I + D^-1/2 W D^-1/2) / 2, whose top eigenvectors
    // are the bottom Laplacian eigenvectors.
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(graph.edge_count());
    for (Eigen::Index i = 0; i < n; ++i)
      for (auto e = graph.offsets[i]; e < graph.offsets[i + 1]; ++e) {
        const auto j = static_cast<Eigen::Index>(graph.targets[e]);
        trips.emplace_back(i, j, 0.5 * graph.weights[e] * inv_sqrt[i] * inv_sqrt[j]);
      }
    Eigen::SparseMatrix<double> op(n, n);
    op.setFromTriplets(trips.begin(), trips.end());
    const Eigen::Index block = std::min<Eigen::Index>(n, want + 8);
    Rng rng(0x5eed);
    Eigen::MatrixXd y(n, block);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = gaussian(rng);
    for (int iter = 0; iter < 300; ++iter) {
      Eigen::MatrixXd z = op * y + 0.5 * y;
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
      y = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
    }
    Eigen::MatrixXd small = y.transpose() * (op * y + 0.5 * y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(small);
    Eigen::MatrixXd ritz = y * solver.eigenvectors();
    // Ascending order of the operator means descending order here; reverse.
    vecs.resize(n, want - 1);
    for (Eigen::Index c = 0; c < want - 1; ++c) vecs.col(c) = ritz.col(block - 2 - c);
  }
  fix_signs(vecs);
  MatrixD out(graph.n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < want - 1; ++c) out(i, c) = vecs(i, c);
  return out;
}

Edges make_epoch_schedule(const FuzzyGraph& graph, int n_epochs) {
  Edges edges;
  double w_max = 0;
  for (double w : graph.weights) w_max = std::max(w_max, w);
  if (w_max <= 0) return edges;
  const double cutoff = w_max / static_cast<double>(n_epochs);
  for (std::size_t i = 0; i < graph.n; ++i)
    for (auto e = graph.offsets[i]; e < graph.offsets[i + 1]; ++e) {
      const double w = graph.weights[e];
      if (w < cutoff) continue;
      edges.head.push_back(static_cast<std::uint32_t>(i));
      edges.tail.push_back(graph.targets[e]);
      edges.epochs_per_sample.push_back(w_max / w);
    }
  return edges;
}

namespace {

inline double clip(double v) { return std::clamp(v, -4.0, 4.0); }

struct EdgeState {
  std::vector<double> next_sample;
  std::vector<double> next_negative;
  std::vector<double> epochs_per_negative;
};

template <bool MoveTail>
void process_edge(std::size_t e, int epoch, float* head, float* tail, std::size_t dim, std::size_t n_tail,
                  const Edges& edges, EdgeState& st, double a, double b, double alpha, double gamma, Rng& rng,
                  bool same_set) {
  if (st.next_sample[e] > epoch) return;
  const auto j = edges.head[e];
  const auto k = edges.tail[e];
  float* cur = head + std::size_t(j) * dim;
  float* other = tail + std::size_t(k) * dim;
  double d2 = 0;
  for (std::size_t c = 0; c < dim; ++c) {
    double t = double(cur[c]) - other[c];
    d2 += t * t;
  }
  double coeff = 0;
  if (d2 > 0) coeff = (-2.0 * a * b * std::pow(d2, b - 1.0)) / (a * std::pow(d2, b) + 1.0);
  for (std::size_t c = 0; c < dim; ++c) {
    const double g = clip(coeff * (double(cur[c]) - other[c]));
    cur[c] = static_cast<float>(cur[c] + g * alpha);
    if constexpr (MoveTail) other[c] = static_cast<float>(other[c] - g * alpha);
  }
  st.next_sample[e] += edges.epochs_per_sample[e];

  const int n_neg = static_cast<int>((epoch - st.next_negative[e]) / st.epochs_per_negative[e]);
  for (int p = 0; p < n_neg; ++p) {
    const auto s = uniform_below(rng, n_tail);
    const float* neg = tail + s * dim;
    double nd2 = 0;
    for (std::size_t c = 0; c < dim; ++c) {
      double t = double(cur[c]) - neg[c];
      nd2 += t * t;
    }
    double rc = 0;
    if (nd2 > 0) {
      rc = 2.0 * gamma * b / ((0.001 + nd2) * (a * std::pow(nd2, b) + 1.0));
    } else if (same_set && s == j) {
      continue;
    }
    for (std::size_t c = 0; c < dim; ++c) {
      const double g = rc > 0 ? clip(rc * (double(cur[c]) - neg[c])) : 4.0;
      cur[c] = static_cast<float>(cur[c] + g * alpha);
    }
  }
  st.next_negative[e] += n_neg * st.epochs_per_negative[e];
}

}  // namespace

void optimize_layout(MatrixF& head_coords, const MatrixF* tail_coords, const Edges& edges, double a, double b,
                     int n_epochs, double initial_alpha, double gamma, int negative_sample_rate,
                     std::uint64_t seed, bool parallel) {
  const bool same_set = tail_coords == nullptr;
  const std::size_t dim = head_coords.cols();
  float* head = head_coords.values().data();
  // Frozen tails are copied so the caller's reference layout is never touched.
  MatrixF frozen = same_set ? MatrixF{} : *tail_coords;
  float* tail = same_set ? head : frozen.values().data();
  const std::size_t n_tail = same_set ? head_coords.rows() : frozen.rows();
  if (n_tail == 0 || edges.head.empty()) return;

  EdgeState st;
  st.next_sample = edges.epochs_per_sample;
  st.epochs_per_negative.resize(edges.head.size());
  for (std::size_t e = 0; e < edges.head.size(); ++e)
    st.epochs_per_negative[e] = edges.epochs_per_sample[e] / negative_sample_rate;
  st.next_negative = st.epochs_per_negative;

  Rng rng(seed);
  const auto n_edges = static_cast<std::ptrdiff_t>(edges.head.size());
  for (int epoch = 0; epoch < n_epochs; ++epoch) {
    const double alpha = initial_alpha * (1.0 - static_cast<double>(epoch) / n_epochs);
    if (!parallel) {
      for (std::ptrdiff_t e = 0; e < n_edges; ++e) {
        if (same_set)
          process_edge<true>(std::size_t(e), epoch, head, tail, dim, n_tail, edges, st, a, b, alpha, gamma, rng, true);
        else
          process_edge<false>(std::size_t(e), epoch, head, tail, dim, n_tail, edges, st, a, b, alpha, gamma, rng,
                              false);
      }
    } else {
#pragma omp parallel
      {
        int tid = 0;
#ifdef _OPENMP
        tid = omp_get_thread_num();
#endif
        Rng local(derive_seed(seed, std::uint64_t(epoch) * 1024 + std::uint64_t(tid)));
#pragma omp for schedule(static)
        for (std::ptrdiff_t e = 0; e < n_edges; ++e) {
          if (same_set)
            process_edge<true>(std::size_t(e), epoch, head, tail, dim, n_tail, edges, st, a, b, alpha, gamma, local,
                               true);
          else
            process_edge<false>(std::size_t(e), epoch, head, tail, dim, n_tail, edges, st, a, b, alpha, gamma, local,
                                false);
        }
      }
    }
  }
}

}  // namespace detail

namespace {

void check_finite(const MatrixF& x) {
  for (float v : x.values())
    if (!std::isfinite(v)) throw InvalidArgument("input matrix contains non-finite values");
}

void rescale_columns(MatrixF& coords) {
  for (std::size_t c = 0; c < coords.cols(); ++c) {
    float lo = std::numeric_limits<float>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
      lo = std::min(lo, coords(i, c));
      hi = std::max(hi, coords(i, c));
    }
    const float range = hi - lo;
    for (std::size_t i = 0; i < coords.rows(); ++i)
      coords(i, c) = range > 0 ? 10.0f * (coords(i, c) - lo) / range : 0.0f;
  }
}

}  // namespace

ProjectionModel fit_umap(const MatrixF& x, const UmapParams& params, std::uint64_t seed,
                         std::vector<std::string> ids) {
  const std::size_t n = x.rows(), m = x.cols(), d = params.n_components;
  if (n < 2) throw InvalidArgument("UMAP needs at least 2 points");
  if (d < 1) throw InvalidArgument("output dimension must be >= 1");
  if (d >= m)
    throw InvalidArgument("output dimension d=" + std::to_string(d) + " must be below input dimension m=" +
                          std::to_string(m));
  if (params.n_epochs < 1) throw InvalidArgument("n_epochs must be >= 1");
  if (params.n_neighbors < 1) throw InvalidArgument("n_neighbors must be >= 1");
  check_finite(x);
  if (!ids.empty() && ids.size() != n) throw InvalidArgument("ids do not match rows");

  const auto knn = build_knn(x, params.n_neighbors, params.metric);
  const auto graph = fuzzy_simplicial_set(knn);
  const auto [a, b] = fit_ab(params.min_dist, params.spread);

  ProjectionModel model;
  model.params = params;
  model.params.n_neighbors = knn.k;
  model.a = a;
  model.b = b;
  model.seed = seed;
  model.ids = std::move(ids);
  model.training = std::make_shared<const MatrixF>(x);

  Rng rng(derive_seed(seed, 0));
  MatrixF coords(n, d);
  bool spectral = false;
  if (params.init != InitMode::random && connected_components(graph) == 1) {
    auto layout = detail::spectral_layout(graph, d);
    if (!layout.empty()) {
      double max_abs = 0;
      for (double v : layout.values()) max_abs = std::max(max_abs, std::abs(v));
      const double expansion = max_abs > 0 ? 10.0 / max_abs : 1.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c)
          coords(i, c) = static_cast<float>(layout(i, c) * expansion + 1e-4 * gaussian(rng));
      spectral = true;
    }
  }
  if (!spectral) {
    if (params.init == InitMode::spectral) log::warn("spectral initialization unavailable; using gaussian init");
    for (auto& v : coords.values()) v = static_cast<float>(gaussian(rng));
  }
  rescale_columns(coords);
  model.spectral_init = spectral;

  const auto edges = detail::make_epoch_schedule(graph, params.n_epochs);
  detail::optimize_layout(coords, nullptr, edges, a, b, params.n_epochs, params.learning_rate,
                          params.repulsion_strength, params.negative_sample_rate, derive_seed(seed, 1),
                          params.parallel);
  for (float v : coords.values())
    if (!std::isfinite(v)) throw Error("UMAP layout diverged (non-finite coordinates)");
  model.coords = std::move(coords);
  return model;
}

MatrixF transform(const ProjectionModel& model, const MatrixF& x_new) {
  if (!model.training) throw InvalidArgument("projection model has no training data attached");
  if (x_new.cols() != model.training->cols())
    throw InvalidArgument("transform input has " + std::to_string(x_new.cols()) + " columns, model expects " +
                          std::to_string(model.training->cols()));
  check_finite(x_new);
  const std::size_t q = x_new.rows(), d = model.dim();
  MatrixF out(q, d);
  if (q == 0) return out;

  const auto knn = build_knn_query(*model.training, x_new, model.params.n_neighbors, model.params.metric);
  const std::size_t k = knn.k;
  // Out-of-sample memberships use zero local connectivity (rho = 0).
  std::vector<double> w(q * k);
  for (std::size_t i = 0; i < q; ++i) {
    const auto dists = knn.distances(i);
    const double sigma = solve_sigma(dists, 0.0);
    double total = 0;
    for (std::size_t t = 0; t < k; ++t) {
      w[i * k + t] = std::exp(-double(dists[t]) / sigma);
      total += w[i * k + t];
    }
    auto row = out.row(i);
    for (std::size_t t = 0; t < k; ++t) {
      const auto src = model.coords.row(knn.neighbors(i)[t]);
      const double frac = total > 0 ? w[i * k + t] / total : 1.0 / k;
      for (std::size_t c = 0; c < d; ++c) row[c] = static_cast<float>(row[c] + frac * src[c]);
    }
  }

  const int epochs = std::max(1, model.params.n_epochs / 3);
  double w_max = 0;
  for (double v : w) w_max = std::max(w_max, v);
  detail::Edges edges;
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      const double v = w[i * k + t];
      if (v <= 0 || v < w_max / epochs) continue;
      edges.head.push_back(static_cast<std::uint32_t>(i));
      edges.tail.push_back(knn.neighbors(i)[t]);
      edges.epochs_per_sample.push_back(w_max / v);
    }
  // During the fit every point is pulled as head and as tail of each symmetric edge but pushed only
  // as head. With frozen tails only the head half remains, so halving the negative rate keeps the
  // attraction/repulsion balance the training layout converged under.
  const int negative_rate = std::max(1, model.params.negative_sample_rate / 2);
  detail::optimize_layout(out, &model.coords, edges, model.a, model.b, epochs, model.params.learning_rate / 4.0,
                          model.params.repulsion_strength, negative_rate, derive_seed(model.seed, 2), false);
  return out;
}

void save_projection(const ProjectionModel& model, const std::filesystem::path& path) {
  const auto& p = model.params;
  nlohmann::json header{{"kind", "umap"},
                        {"n_neighbors", p.n_neighbors},
                        {"n_components", p.n_components},
                        {"min_dist", p.min_dist},
                        {"spread", p.spread},
                        {"n_epochs", p.n_epochs},
                        {"learning_rate", p.learning_rate},
                        {"repulsion_strength", p.repulsion_strength},
                        {"negative_sample_rate", p.negative_sample_rate},
                        {"metric", to_string(p.metric)},
                        {"a", model.a},
                        {"b", model.b},
                        {"seed", model.seed},
                        {"spectral_init", model.spectral_init}};
  auto ids = model.ids;
  if (ids.empty())
    for (std::size_t i = 0; i < model.coords.rows(); ++i) ids.push_back(std::to_string(i));
  embed::save_matrix(path, model.coords, ids, "umap", header);
}

ProjectionModel load_projection(const std::filesystem::path& path, std::shared_ptr<const MatrixF> training) {
  auto loaded = embed::load_matrix(path);
  const auto& h = loaded.extra;
  ProjectionModel model;
  try {
    model.params.n_neighbors = h.at("n_neighbors").get<std::size_t>();
    model.params.n_components = h.at("n_components").get<std::size_t>();
    model.params.min_dist = h.at("min_dist").get<double>();
    model.params.spread = h.at("spread").get<double>();
    model.params.n_epochs = h.at("n_epochs").get<int>();
    model.params.learning_rate = h.at("learning_rate").get<double>();
    model.params.repulsion_strength = h.at("repulsion_strength").get<double>();
    model.params.negative_sample_rate = h.at("negative_sample_rate").get<int>();
    model.params.metric = parse_metric(h.at("metric").get<std::string>());
    model.a = h.at("a").get<double>();
    model.b = h.at("b").get<double>();
    model.seed = h.at("seed").get<std::uint64_t>();
    model.spectral_init = h.value("spectral_init", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("projection header malformed: " + std::string(e.what()));
  }
  if (training && training->rows() != loaded.matrix.rows())
    throw FormatError("projection rows do not match training matrix rows");
  model.coords = std::move(loaded.matrix);
  model.ids = std::move(loaded.ids);
  model.training = std::move(training);
  return model;
}

}  // namespace topol::manifold
