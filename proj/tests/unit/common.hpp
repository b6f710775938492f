#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <doctest.h>

#include "topol/checksum.hpp"
#include "topol/log.hpp"
#include "topol/matrix.hpp"
#include "topol/rng.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(TOPOL_FIXTURES) / name; }

inline std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "<no exception>";
}

inline bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("topol-" + tag + "-" + std::to_string(std::hash<std::string>{}(tag + std::to_string(::getpid()))));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

/// Collects warnings for the lifetime of the object.
struct CaptureWarnings {
  std::vector<std::string> messages;
  topol::log::Sink previous;
  CaptureWarnings() {
    previous = topol::log::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~CaptureWarnings() { topol::log::set_warning_sink(previous); }
};

inline topol::MatrixF gaussian_rows(std::size_t n, std::size_t m, std::uint64_t seed, double scale = 1.0) {
  topol::Rng rng(seed);
  topol::MatrixF x(n, m);
  for (auto& v : x.values()) v = static_cast<float>(scale * topol::gaussian(rng));
  return x;
}

/// Three blobs with the given center separation, n/3 rows each. labels[i] is the blob of row i.
inline topol::MatrixF blobs(std::size_t n, std::size_t m, double separation, std::uint64_t seed,
                            std::vector<std::uint32_t>* labels = nullptr) {
  topol::Rng rng(seed);
  topol::MatrixF x(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = i * 3 / n;
    if (labels) labels->push_back(static_cast<std::uint32_t>(b));
    for (std::size_t j = 0; j < m; ++j)
      x(i, j) = static_cast<float>((j == b ? separation : 0.0) + topol::gaussian(rng));
  }
  return x;
}

/// Adjusted Rand index (Hubert and Arabie).
inline double adjusted_rand(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> table;
  std::map<std::uint32_t, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, v] : table) index += c2(v);
  for (const auto& [_, v] : ra) sa += c2(v);
  for (const auto& [_, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// Trustworthiness (Venna and Kaski) with exact euclidean neighbors in both spaces.
template <class MX, class MY>
double trustworthiness(const MX& x, const MY& y, std::size_t k) {
  const std::size_t n = x.rows();
  auto sq = [](const auto& m, std::size_t i, std::size_t j) {
    double s = 0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double d = double(m(i, c)) - double(m(j, c));
      s += d * d;
    }
    return s;
  };
  double penalty = 0;
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
      if (p == i) return q != i;
      if (q == i) return false;
      return sq(x, i, p) < sq(x, i, q);
    });
    for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;  // rank 0 is i itself
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
      if (p == i) return q != i;
      if (q == i) return false;
      return sq(y, i, p) < sq(y, i, q);
    });
    for (std::size_t r = 1; r <= k; ++r) {
      const std::size_t j = order[r];
      if (rank[j] > k) penalty += static_cast<double>(rank[j] - k);
    }
  }
  const double nk = static_cast<double>(n), kk = static_cast<double>(k);
  return 1.0 - 2.0 / (nk * kk * (2.0 * nk - 3.0 * kk - 1.0)) * penalty;
}

inline topol::MatrixD read_table(const std::filesystem::path& path) {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::istringstream in(topol::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    double v;
    std::size_t c = 0;
    while (ls >> v) {
      values.push_back(v);
      ++c;
    }
    if (c == 0) continue;
    cols = c;
    ++rows;
  }
  return topol::MatrixD(rows, cols, std::move(values));
}

}  // namespace testing
