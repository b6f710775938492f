#include <cmath>
#include <limits>

#include "topol/kernels.hpp"
#include "topol/rng.hpp"
#include "topol/stats.hpp"

namespace topol::kernels {
namespace {

struct Scratch {
  std::vector<corpus::Regime> labels;
  std::vector<double> sum_a, sum_b;
  std::vector<std::size_t> n_a, n_b;
  std::vector<std::vector<double>> vectors;
};

void check(const NullProblem& p) {
  if (p.coords == nullptr) throw InvalidArgument("permutation null needs coordinates");
  if (p.community.size() != p.coords->rows() || p.regimes.size() != p.coords->rows())
    throw InvalidArgument("permutation null inputs are misaligned");
  for (auto c : p.community)
    if (c >= p.n_communities) throw InvalidArgument("community id out of range");
}

// Mirrors field::build_field followed by the stats reductions, without allocations per draw.
NullDraw evaluate(const NullProblem& p, Scratch& s) {
  const std::size_t d = p.coords->cols();
  const std::size_t nc = p.n_communities;
  s.sum_a.assign(nc * d, 0.0);
  s.sum_b.assign(nc * d, 0.0);
  s.n_a.assign(nc, 0);
  s.n_b.assign(nc, 0);
  for (std::size_t i = 0; i < p.community.size(); ++i) {
    const auto c = p.community[i];
    const bool is_a = s.labels[i] == corpus::Regime::A;
    double* acc = (is_a ? s.sum_a.data() : s.sum_b.data()) + c * d;
    const auto r = p.coords->row(i);
    for (std::size_t j = 0; j < d; ++j) acc[j] += r[j];
    ++(is_a ? s.n_a : s.n_b)[c];
  }
  s.vectors.clear();
  for (std::size_t c = 0; c < nc; ++c) {
    if (s.n_a[c] < p.tau || s.n_b[c] < p.tau) continue;
    std::vector<double> v(d);
    const double na = static_cast<double>(s.n_a[c]);
    const double nb = static_cast<double>(s.n_b[c]);
    for (std::size_t j = 0; j < d; ++j) v[j] = s.sum_b[c * d + j] / nb - s.sum_a[c * d + j] / na;
    s.vectors.push_back(std::move(v));
  }
  NullDraw out;
  out.eligible = s.vectors.size();
  if (s.vectors.empty()) return out;
  double msum = 0;
  std::vector<std::size_t> usable;
  for (std::size_t t = 0; t < s.vectors.size(); ++t) {
    const double m = stats::norm(s.vectors[t]);
    msum += m;
    if (m > 0) usable.push_back(t);
  }
  out.m_bar = msum / static_cast<double>(s.vectors.size());
  if (usable.size() >= 2) {
    double csum = 0;
    std::size_t pairs = 0;
    for (std::size_t x = 0; x < usable.size(); ++x)
      for (std::size_t y = x + 1; y < usable.size(); ++y) {
        csum += stats::cosine(s.vectors[usable[x]], s.vectors[usable[y]]);
        ++pairs;
      }
    out.s_bar = csum / static_cast<double>(pairs);
    out.s_defined = true;
  } else {
    out.s_bar = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

NullDraw draw(const NullProblem& p, std::size_t i, Scratch& s) {
  s.labels.assign(p.regimes.begin(), p.regimes.end());
  corpus::shuffle_labels(s.labels, derive_seed(p.seed, i));
  return evaluate(p, s);
}

}  // namespace

std::vector<NullDraw> permutation_null_serial(const NullProblem& problem) {
  check(problem);
  std::vector<NullDraw> out(problem.permutations);
  Scratch s;
  for (std::size_t i = 0; i < problem.permutations; ++i) out[i] = draw(problem, i, s);
  return out;
}

std::vector<NullDraw> permutation_null_parallel(const NullProblem& problem) {
  check(problem);
  std::vector<NullDraw> out(problem.permutations);
  const auto n = static_cast<std::ptrdiff_t>(problem.permutations);
#pragma omp parallel
  {
    Scratch s;
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = draw(problem, static_cast<std::size_t>(i), s);
  }
  return out;
}

}  // namespace topol::kernels
