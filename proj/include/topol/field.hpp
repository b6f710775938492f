#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "topol/cluster.hpp"
#include "topol/corpus.hpp"
#include "topol/matrix.hpp"

namespace topol::field {

inline constexpr std::size_t kDefaultTau = 3;

/// A community's members split by regime (document indices in corpus order).
struct TopicCluster {
  std::uint32_t topic = 0;
  std::vector<std::uint32_t> members_a;
  std::vector<std::uint32_t> members_b;

  std::size_t n_a() const noexcept { return members_a.size(); }
  std::size_t n_b() const noexcept { return members_b.size(); }
  std::size_t size() const noexcept { return n_a() + n_b(); }
};

struct CentroidPair {
  std::vector<double> mu_a;
  std::vector<double> mu_b;
};

struct PolarityVector {
  std::uint32_t topic = 0;
  std::vector<double> v;  // mu_b - mu_a; zeros when ineligible
  double magnitude = 0;
  bool eligible = false;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  CentroidPair centroids;  // empty when ineligible
};

struct PolarityField {
  std::size_t d = 0;
  std::size_t tau = kDefaultTau;
  std::vector<PolarityVector> topics;
  std::string boundary;  // human-readable description of the boundary spec
  std::size_t n_a = 0;
  std::size_t n_b = 0;

  std::size_t eligible_count() const noexcept;
  std::vector<const PolarityVector*> eligible() const;
};

/// One cluster per community. `ids` are the documents the partition is indexed by,
/// and must match the assignment ids position by position.
std::vector<TopicCluster> split_clusters(const cluster::Partition& partition, std::span<const std::string> ids,
                                         const corpus::RegimeAssignment& assignment);

/// Per-regime arithmetic means of member rows. Throws when either side is empty.
CentroidPair compute_centroids(const TopicCluster& cluster, const MatrixD& coords);

PolarityVector polarity_vector(const CentroidPair& pair, std::uint32_t topic = 0);

/// Throws when no topic reaches n_a >= tau and n_b >= tau.
PolarityField build_field(const cluster::Partition& partition, const corpus::RegimeAssignment& assignment,
                          const MatrixD& coords, std::size_t tau = kDefaultTau, std::string boundary = {});

nlohmann::json to_json(const PolarityField& field);
PolarityField field_from_json(const nlohmann::json& j);

}  // namespace topol::field
