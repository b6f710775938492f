#include <set>

#include "common.hpp"
#include "topol/kernels.hpp"
#include "topol/manifold.hpp"

using namespace topol;
using namespace topol::manifold;
using testing::contains;
using testing::message_of;

namespace {

/// All-pairs oracle in double precision: ascending (distance, index), self excluded.
std::vector<std::vector<std::uint32_t>> brute_force(const MatrixF& x, std::size_t k, Metric metric) {
  std::vector<std::vector<std::uint32_t>> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::vector<std::pair<double, std::uint32_t>> d;
    for (std::size_t j = 0; j < x.rows(); ++j) {
      if (j == i) continue;
      double s = 0, na = 0, nb = 0, dot = 0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double a = x(i, c), b = x(j, c);
        s += (a - b) * (a - b);
        dot += a * b;
        na += a * a;
        nb += b * b;
      }
      const double dist = metric == Metric::euclidean ? std::sqrt(s) : 1.0 - dot / std::sqrt(na * nb);
      d.emplace_back(dist, static_cast<std::uint32_t>(j));
    }
    std::sort(d.begin(), d.end());
    for (std::size_t r = 0; r < k; ++r) out[i].push_back(d[r].second);
  }
  return out;
}

MatrixF line_points() { return MatrixF(4, 1, std::vector<float>{0, 1, 2, 10}); }

UmapParams blob_params(std::size_t d) {
  UmapParams p;
  p.n_neighbors = 15;
  p.n_components = d;
  p.metric = Metric::euclidean;
  return p;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(q * double(v.size() - 1))];
}

}  // namespace

TEST_SUITE("manifold") {
  TEST_CASE("line example with ties broken by lower index") {
    const auto g = build_knn(line_points(), 1, Metric::euclidean);
    CHECK(g.neighbors(0)[0] == 1);
    CHECK(g.neighbors(1)[0] == 0);
    CHECK(g.neighbors(2)[0] == 1);
    CHECK(g.neighbors(3)[0] == 2);
    CHECK(g.distances(3)[0] == 8.0f);
  }

  TEST_CASE("k = n-1 gives complete lists and k >= n is clamped") {
    const auto g = build_knn(line_points(), 3, Metric::euclidean);
    for (std::size_t i = 0; i < 4; ++i) {
      std::set<std::uint32_t> s(g.neighbors(i).begin(), g.neighbors(i).end());
      CHECK(s.size() == 3);
      CHECK_FALSE(s.count(static_cast<std::uint32_t>(i)));
    }
    testing::CaptureWarnings w;
    const auto c = build_knn(line_points(), 9, Metric::euclidean);
    CHECK(c.k == 3);
    REQUIRE(w.messages.size() == 1);
    CHECK(contains(w.messages[0], "clamp"));
  }

  TEST_CASE("duplicate points have zero distance") {
    const MatrixF x(3, 2, std::vector<float>{1, 1, 1, 1, 5, 5});
    const auto g = build_knn(x, 1, Metric::euclidean);
    CHECK(g.neighbors(0)[0] == 1);
    CHECK(g.distances(0)[0] == 0.0f);
  }

  TEST_CASE("exact kNN equals the brute-force oracle") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const std::size_t n = 50 + seed * 80;
      const auto x = testing::gaussian_rows(n, 3 + seed * 5, seed);
      for (auto metric : {Metric::euclidean, Metric::cosine}) {
        const std::size_t k = 10;
        const auto g = build_knn(x, k, metric);
        const auto oracle = brute_force(x, k, metric);
        std::size_t agree = 0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t r = 0; r < k; ++r) agree += g.neighbors(i)[r] == oracle[i][r];
        CHECK(agree == n * k);
        for (std::size_t i = 0; i < n; ++i)
          CHECK(std::is_sorted(g.distances(i).begin(), g.distances(i).end()));
      }
    }
  }

  TEST_CASE("serial and parallel kNN kernels agree") {
    const auto x = testing::gaussian_rows(300, 20, 9);
    KnnGraph a, b;
    kernels::knn_serial(x, x, 12, Metric::cosine, true, a);
    kernels::knn_parallel(x, x, 12, Metric::cosine, true, b);
    CHECK(a.index == b.index);
    CHECK(a.dist == b.dist);
  }

  TEST_CASE("single neighbor has weight one and one-sided weights symmetrize to one") {
    const MatrixF two(2, 2, std::vector<float>{0, 0, 3, 4});
    const auto f = fuzzy_simplicial_set(build_knn(two, 1, Metric::euclidean));
    CHECK(f.weight(0, 1) == 1.0);
    CHECK(f.weight(1, 0) == 1.0);
    // 0 -> 1 is nearest for 0; 2 points far right pick each other, so 0-1 is one-sided from 0
    const MatrixF x(3, 1, std::vector<float>{0, 5, 5.5f});
    const auto g = build_knn(x, 1, Metric::euclidean);
    CHECK(g.neighbors(0)[0] == 1);
    CHECK(g.neighbors(1)[0] == 2);
    const auto fx = fuzzy_simplicial_set(g);
    CHECK(fx.weight(0, 1) == 1.0);
    CHECK(fx.weight(1, 0) == 1.0);
  }

  TEST_CASE("sigma search on five neighbors") {
    const std::vector<float> d{0.5f, 0.8f, 1.1f, 1.7f, 2.6f};
    const auto s = smooth_knn(d);
    CHECK(s.rho == doctest::Approx(0.5));
    double sum = 0;
    for (float x : d) sum += std::exp(-std::max(0.0, double(x) - s.rho) / s.sigma);
    CHECK(std::abs(sum - std::log2(5.0)) <= 1e-5);
    // scipy brentq on the same equation
    CHECK(s.sigma == doctest::Approx(0.7103780561856555).epsilon(1e-4));
  }

  TEST_CASE("identical points get uniform weights and floored sigma") {
    const MatrixF x(5, 3, 2.0f);
    const auto g = build_knn(x, 3, Metric::euclidean);
    const auto s = smooth_knn(g.distances(0));
    CHECK(s.sigma >= kMinSigma);
    const auto f = fuzzy_simplicial_set(g);
    for (std::size_t i = 0; i < f.n; ++i)
      for (std::size_t e = f.offsets[i]; e < f.offsets[i + 1]; ++e) CHECK(f.weights[e] == 1.0);
  }

  TEST_CASE("fuzzy graph is symmetric with weights in (0, 1]") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto x = testing::gaussian_rows(120, 6, 100 + seed);
      const auto f = fuzzy_simplicial_set(build_knn(x, 8, Metric::euclidean));
      for (std::size_t i = 0; i < f.n; ++i)
        for (std::size_t e = f.offsets[i]; e < f.offsets[i + 1]; ++e) {
          const auto j = f.targets[e];
          CHECK(j != i);
          CHECK(f.weights[e] > 0.0);
          CHECK(f.weights[e] <= 1.0);
          CHECK(f.weight(j, i) == f.weights[e]);
        }
    }
  }

  TEST_CASE("curve parameters match a least-squares reference") {
    // scipy curve_fit on the same 300-point target
    auto [a, b] = fit_ab(0.1, 1.0);
    CHECK(a == doctest::Approx(1.57694346).epsilon(1e-4));
    CHECK(b == doctest::Approx(0.89506088).epsilon(1e-4));
    std::tie(a, b) = fit_ab(0.5, 1.0);
    CHECK(a == doctest::Approx(0.58303002).epsilon(1e-4));
    CHECK(b == doctest::Approx(1.33416699).epsilon(1e-4));
  }

  TEST_CASE("trustworthiness oracle matches the reference implementation") {
    const auto x = testing::read_table(testing::fixture("trust_x.txt"));
    const auto y = testing::read_table(testing::fixture("trust_y.txt"));
    REQUIRE(x.rows() == 20);
    CHECK(testing::trustworthiness(x, y, 3) == doctest::Approx(0.8611111111111112).epsilon(1e-12));
    CHECK(testing::trustworthiness(x, x, 3) == doctest::Approx(1.0));
  }

  TEST_CASE("fit is deterministic, finite and leaves the input untouched") {
    const auto x = testing::blobs(300, 16, 6.0, 4);
    const auto copy = x;
    const auto m1 = fit_umap(x, blob_params(2), 123);
    const auto m2 = fit_umap(x, blob_params(2), 123);
    CHECK(x == copy);
    CHECK(m1.coords == m2.coords);
    for (float v : m1.coords.values()) CHECK(std::isfinite(v));
    const auto m3 = fit_umap(x, blob_params(2), 124);
    CHECK_FALSE(m1.coords == m3.coords);
  }

  TEST_CASE("trustworthiness on three blobs in 2 and 50 dimensions") {
    const auto x16 = testing::blobs(300, 16, 6.0, 5);
    CHECK(testing::trustworthiness(x16, fit_umap(x16, blob_params(2), 1).coords, 15) >= 0.90);
    const auto x64 = testing::blobs(300, 64, 6.0, 5);
    CHECK(testing::trustworthiness(x64, fit_umap(x64, blob_params(50), 1).coords, 15) >= 0.90);
  }

  TEST_CASE("duplicated row lands next to its twin") {
    auto x = testing::blobs(300, 16, 6.0, 6);
    const auto src = x.row(10);
    std::copy(src.begin(), src.end(), x.row(200).begin());
    const auto u = fit_umap(x, blob_params(2), 3).coords;
    std::vector<double> pd;
    auto dist = [&](std::size_t i, std::size_t j) {
      double s = 0;
      for (std::size_t c = 0; c < u.cols(); ++c) s += (u(i, c) - u(j, c)) * (u(i, c) - u(j, c));
      return std::sqrt(s);
    };
    for (std::size_t i = 0; i < u.rows(); ++i)
      for (std::size_t j = i + 1; j < u.rows(); ++j) pd.push_back(dist(i, j));
    CHECK(dist(10, 200) <= percentile(pd, 0.01));
  }

  TEST_CASE("rejects d >= m and non-finite input") {
    const auto x = testing::blobs(60, 4, 6.0, 7);
    CHECK_THROWS_AS(fit_umap(x, blob_params(4), 0), InvalidArgument);
    auto bad = x;
    bad(3, 1) = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(fit_umap(bad, blob_params(2), 0), InvalidArgument);
  }

  TEST_CASE("transform of training rows reproduces their coordinates") {
    const auto x = testing::blobs(300, 16, 6.0, 8);
    const auto model = fit_umap(x, blob_params(2), 11);
    const auto before = model.coords;
    const auto t1 = transform(model, x);
    const auto t2 = transform(model, x);
    CHECK(t1 == t2);
    CHECK(model.coords == before);
    std::vector<double> err;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double s = 0;
      for (std::size_t c = 0; c < 2; ++c) s += (t1(i, c) - before(i, c)) * (t1(i, c) - before(i, c));
      err.push_back(std::sqrt(s));
    }
    const double mean = std::accumulate(err.begin(), err.end(), 0.0) / double(err.size());
    CHECK(mean <= 0.5);
    CHECK(percentile(err, 0.95) <= 0.5);
    CHECK_THROWS_AS(transform(model, MatrixF(2, 15, 0.0f)), InvalidArgument);
  }

  TEST_CASE("projection round trip") {
    testing::TempDir dir("projection");
    const auto x = testing::blobs(90, 8, 6.0, 9);
    auto training = std::make_shared<const MatrixF>(x);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < 90; ++i) ids.push_back("d" + std::to_string(i));
    const auto model = fit_umap(x, blob_params(3), 5, ids);
    save_projection(model, dir.path / "p.bin");
    const auto back = load_projection(dir.path / "p.bin", training);
    CHECK(back.coords == model.coords);
    CHECK(back.ids == ids);
    CHECK(back.a == model.a);
    CHECK(back.b == model.b);
    CHECK(back.seed == 5);
    CHECK(back.params.n_components == 3);
    CHECK(transform(back, x) == transform(model, x));
  }
}
