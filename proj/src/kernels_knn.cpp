#include <algorithm>
#include <cmath>
#include <utility>

#include "topol/kernels.hpp"

namespace topol::kernels {
namespace {

using manifold::Metric;

std::vector<double> row_norms(const MatrixF& x) {
  std::vector<double> norms(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0;
    for (float v : x.row(i)) s += double(v) * v;
    norms[i] = std::sqrt(s);
  }
  return norms;
}

struct Scratch {
  std::vector<std::pair<double, std::uint32_t>> candidates;
};

void query_one(const MatrixF& reference, const MatrixF& queries, std::size_t q, std::size_t k, Metric metric,
               bool exclude_self, const std::vector<double>& ref_norms, const std::vector<double>& query_norms,
               Scratch& scratch, manifold::KnnGraph& out) {
  auto& cand = scratch.candidates;
  cand.clear();
  const auto x = queries.row(q);
  for (std::size_t j = 0; j < reference.rows(); ++j) {
    if (exclude_self && j == q) continue;
    const auto y = reference.row(j);
    double d;
    if (metric == Metric::euclidean) {
      double s = 0;
      for (std::size_t c = 0; c < x.size(); ++c) {
        double t = double(x[c]) - y[c];
        s += t * t;
      }
      d = std::sqrt(s);
    } else {
      double dot = 0;
      for (std::size_t c = 0; c < x.size(); ++c) dot += double(x[c]) * y[c];
      const double denom = query_norms[q] * ref_norms[j];
      d = denom > 0 ? std::max(0.0, 1.0 - dot / denom) : 1.0;
    }
    cand.emplace_back(d, static_cast<std::uint32_t>(j));
  }
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
  for (std::size_t t = 0; t < k; ++t) {
    out.index[q * k + t] = cand[t].second;
    out.dist[q * k + t] = static_cast<float>(cand[t].first);
  }
}

void prepare(const MatrixF& reference, const MatrixF& queries, std::size_t k, Metric metric,
             manifold::KnnGraph& out) {
  out.n = queries.rows();
  out.k = k;
  out.metric = metric;
  out.index.assign(out.n * k, 0);
  out.dist.assign(out.n * k, 0.0f);
  (void)reference;
}

}  // namespace

void knn_serial(const MatrixF& reference, const MatrixF& queries, std::size_t k, Metric metric, bool exclude_self,
                manifold::KnnGraph& out) {
  prepare(reference, queries, k, metric, out);
  std::vector<double> rn, qn;
  if (metric == Metric::cosine) {
    rn = row_norms(reference);
    qn = row_norms(queries);
  }
  Scratch scratch;
  for (std::size_t q = 0; q < queries.rows(); ++q)
    query_one(reference, queries, q, k, metric, exclude_self, rn, qn, scratch, out);
}

void knn_parallel(const MatrixF& reference, const MatrixF& queries, std::size_t k, Metric metric,
                  bool exclude_self, manifold::KnnGraph& out) {
  prepare(reference, queries, k, metric, out);
  std::vector<double> rn, qn;
  if (metric == Metric::cosine) {
    rn = row_norms(reference);
    qn = row_norms(queries);
  }
  const auto n = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel
  {
    Scratch scratch;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t q = 0; q < n; ++q)
      query_one(reference, queries, static_cast<std::size_t>(q), k, metric, exclude_self, rn, qn, scratch, out);
  }
}

}  // namespace topol::kernels
