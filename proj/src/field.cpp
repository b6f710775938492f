#include "topol/field.hpp"

#include <cmath>

namespace topol::field {

std::size_t PolarityField::eligible_count() const noexcept {
  std::size_t c = 0;
  for (const auto& t : topics) c += t.eligible ? 1 : 0;
  return c;
}

std::vector<const PolarityVector*> PolarityField::eligible() const {
  std::vector<const PolarityVector*> out;
  for (const auto& t : topics)
    if (t.eligible) out.push_back(&t);
  return out;
}

std::vector<TopicCluster> split_clusters(const cluster::Partition& partition, std::span<const std::string> ids,
                                         const corpus::RegimeAssignment& assignment) {
  if (ids.size() != partition.community_of.size() || ids.size() != assignment.size())
    throw InvalidArgument("partition and assignment cover different documents");
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] != assignment.ids()[i]) throw InvalidArgument("id mismatch between partition and assignment: " + ids[i]);
  std::vector<TopicCluster> out(partition.count);
  for (std::size_t c = 0; c < out.size(); ++c) out[c].topic = static_cast<std::uint32_t>(c);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto c = partition.community_of[i];
    if (c >= out.size()) throw InvalidArgument("community id out of range");
    auto& side = assignment[i] == corpus::Regime::A ? out[c].members_a : out[c].members_b;
    side.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

namespace {

std::vector<double> mean_of(const std::vector<std::uint32_t>& members, const MatrixD& coords) {
  std::vector<double> mu(coords.cols(), 0.0);
  for (auto i : members) {
    if (i >= coords.rows()) throw InvalidArgument("member index outside coordinates");
    const auto r = coords.row(i);
    for (std::size_t c = 0; c < mu.size(); ++c) mu[c] += r[c];
  }
  for (auto& x : mu) x /= static_cast<double>(members.size());
  return mu;
}

}  // namespace

CentroidPair compute_centroids(const TopicCluster& cluster, const MatrixD& coords) {
  if (cluster.members_a.empty()) throw InvalidArgument("topic " + std::to_string(cluster.topic) + " has no regime A members");
  if (cluster.members_b.empty()) throw InvalidArgument("topic " + std::to_string(cluster.topic) + " has no regime B members");
  return {mean_of(cluster.members_a, coords), mean_of(cluster.members_b, coords)};
}

PolarityVector polarity_vector(const CentroidPair& pair, std::uint32_t topic) {
  if (pair.mu_a.size() != pair.mu_b.size()) throw InvalidArgument("centroid dimensions differ");
  PolarityVector pv;
  pv.topic = topic;
  pv.v.resize(pair.mu_a.size());
  double s = 0;
  for (std::size_t c = 0; c < pv.v.size(); ++c) {
    pv.v[c] = pair.mu_b[c] - pair.mu_a[c];
    s += pv.v[c] * pv.v[c];
  }
  pv.magnitude = std::sqrt(s);
  pv.eligible = true;
  pv.centroids = pair;
  return pv;
}

PolarityField build_field(const cluster::Partition& partition, const corpus::RegimeAssignment& assignment,
                          const MatrixD& coords, std::size_t tau, std::string boundary) {
  if (coords.rows() != assignment.size()) throw InvalidArgument("coordinates do not match the assignment");
  if (tau < 1) throw InvalidArgument("eligibility threshold must be at least 1");
  const auto clusters = split_clusters(partition, assignment.ids(), assignment);
  PolarityField f;
  f.d = coords.cols();
  f.tau = tau;
  f.boundary = std::move(boundary);
  f.n_a = assignment.n_a();
  f.n_b = assignment.n_b();
  for (const auto& c : clusters) {
    PolarityVector pv;
    if (c.n_a() >= tau && c.n_b() >= tau) {
      pv = polarity_vector(compute_centroids(c, coords), c.topic);
    } else {
      pv.topic = c.topic;
      pv.v.assign(f.d, 0.0);
    }
    pv.n_a = c.n_a();
    pv.n_b = c.n_b();
    f.topics.push_back(std::move(pv));
  }
  if (f.eligible_count() == 0)
    throw InvalidArgument("no topic has at least " + std::to_string(tau) +
                          " documents in both regimes; revise the boundary or lower tau");
  return f;
}

nlohmann::json to_json(const PolarityField& field) {
  nlohmann::json topics = nlohmann::json::array();
  for (const auto& t : field.topics) {
    nlohmann::json jt{{"id", t.topic}, {"n_A", t.n_a}, {"n_B", t.n_b}, {"eligible", t.eligible},
                      {"v", t.v},      {"magnitude", t.magnitude}};
    jt["mu_A"] = t.eligible ? nlohmann::json(t.centroids.mu_a) : nlohmann::json(nullptr);
    jt["mu_B"] = t.eligible ? nlohmann::json(t.centroids.mu_b) : nlohmann::json(nullptr);
    topics.push_back(std::move(jt));
  }
  return {{"d", field.d},
          {"tau", field.tau},
          {"boundary", {{"spec", field.boundary}, {"n_A", field.n_a}, {"n_B", field.n_b}}},
          {"eligible", field.eligible_count()},
          {"topics", std::move(topics)}};
}

PolarityField field_from_json(const nlohmann::json& j) {
  try {
    PolarityField f;
    f.d = j.at("d").get<std::size_t>();
    f.tau = j.value("tau", kDefaultTau);
    f.boundary = j.at("boundary").at("spec").get<std::string>();
    f.n_a = j.at("boundary").at("n_A").get<std::size_t>();
    f.n_b = j.at("boundary").at("n_B").get<std::size_t>();
    for (const auto& jt : j.at("topics")) {
      PolarityVector pv;
      pv.topic = jt.at("id").get<std::uint32_t>();
      pv.n_a = jt.at("n_A").get<std::size_t>();
      pv.n_b = jt.at("n_B").get<std::size_t>();
      pv.eligible = jt.at("eligible").get<bool>();
      pv.v = jt.at("v").get<std::vector<double>>();
      pv.magnitude = jt.at("magnitude").get<double>();
      if (pv.eligible) {
        pv.centroids.mu_a = jt.at("mu_A").get<std::vector<double>>();
        pv.centroids.mu_b = jt.at("mu_B").get<std::vector<double>>();
      }
      if (pv.v.size() != f.d) throw FormatError("field vector has wrong dimension");
      f.topics.push_back(std::move(pv));
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed field JSON: ") + e.what());
  }
}

}  // namespace topol::field
