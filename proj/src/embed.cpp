#include "topol/embed.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "topol/checksum.hpp"
#include "topol/http.hpp"
#include "topol/rng.hpp"

namespace topol::embed {

using nlohmann::json;

void EmbeddingMatrix::validate() const {
  if (ids.size() != rows.rows())
    throw InvalidArgument("embedding ids (" + std::to_string(ids.size()) + ") do not match rows (" +
                          std::to_string(rows.rows()) + ")");
  if (rows.cols() < 2) throw InvalidArgument("embedding dimension must be >= 2");
  for (std::size_t i = 0; i < rows.rows(); ++i)
    for (float v : rows.row(i))
      if (!std::isfinite(v)) throw InvalidArgument("non-finite embedding value in row '" + ids[i] + "'");
}

ProviderKind parse_provider_kind(std::string_view name) {
  if (name == "remote") return ProviderKind::remote;
  if (name == "file") return ProviderKind::file;
  if (name == "synthetic") return ProviderKind::synthetic;
  throw InvalidArgument("unknown provider kind '" + std::string(name) + "'");
}

std::string to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::remote: return "remote";
    case ProviderKind::file: return "file";
    case ProviderKind::synthetic: return "synthetic";
  }
  return "?";
}

void ProviderConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (max_in_flight < 1) throw InvalidArgument("max in-flight must be >= 1");
  if (kind == ProviderKind::remote && (endpoint.empty() || model.empty()))
    throw InvalidArgument("remote provider requires endpoint and model");
  if (kind == ProviderKind::file && path.empty()) throw InvalidArgument("file provider requires a path");
  if (kind == ProviderKind::synthetic && dim < 2) throw InvalidArgument("synthetic dimension must be >= 2");
}

std::vector<float> synthetic_embedding(std::string_view text, std::size_t dim) {
  // FNV-1a over the bytes seeds a SplitMix64 stream; Box-Muller gives gaussian coordinates.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::uint64_t state = h;
  auto next01 = [&] {
    state += 0x9E3779B97F4A7C15ull;
    return (static_cast<double>(splitmix64(state) >> 11) + 0.5) * 0x1.0p-53;
  };
  std::vector<double> g(dim);
  for (std::size_t i = 0; i < dim; i += 2) {
    double r = std::sqrt(-2.0 * std::log(next01()));
    double t = 2.0 * 3.14159265358979323846 * next01();
    g[i] = r * std::cos(t);
    if (i + 1 < dim) g[i + 1] = r * std::sin(t);
  }
  double norm = 0;
  for (double v : g) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(g[i] / norm);
  return out;
}

void check_alignment(const EmbeddingMatrix& matrix, std::span<const std::string> ids) {
  const auto n = std::min(matrix.ids.size(), ids.size());
  for (std::size_t i = 0; i < n; ++i)
    if (matrix.ids[i] != ids[i])
      throw InvalidArgument("embedding ids do not align with corpus: first offending id '" + ids[i] +
                            "' at position " + std::to_string(i) + " (file has '" + matrix.ids[i] + "')");
  if (matrix.ids.size() != ids.size()) {
    const auto& offending = ids.size() > n ? ids[n] : matrix.ids[n];
    throw InvalidArgument("embedding ids do not align with corpus: first offending id '" + offending +
                          "' at position " + std::to_string(n) + " (length " + std::to_string(matrix.ids.size()) +
                          " vs " + std::to_string(ids.size()) + ")");
  }
}

namespace {

void normalize_rows(MatrixF& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    double norm = 0;
    for (float v : r) norm += double(v) * v;
    norm = std::sqrt(norm);
    if (norm > 0 && std::abs(norm - 1.0) > 1e-6)
      for (auto& v : r) v = static_cast<float>(v / norm);
  }
}

std::vector<std::vector<float>> request_batch(const ProviderConfig& cfg, const http::Url& url,
                                              std::span<const std::string> texts) {
  json body{{"model", cfg.model}, {"input", json::array()}};
  for (const auto& t : texts) body["input"].push_back(t);
  const auto payload = body.dump();
  auto headers = http::bearer_from_env(cfg.auth_env);
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(cfg.timeout_seconds * 1000));
  http::Response last;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(cfg.backoff_base * (1ll << (attempt - 1)));
    last = http::post_json(url, payload, headers, timeout);
    if (last.ok()) break;
    if (!http::retryable(last)) break;
  }
  if (!last.ok()) {
    throw Error("embedding request failed after retries: " +
                (last.status ? "HTTP " + std::to_string(last.status) + ": " + last.body.substr(0, 200)
                             : "transport error: " + last.error));
  }
  json reply;
  try {
    reply = json::parse(last.body);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("embedding response is not JSON: ") + e.what());
  }
  if (!reply.contains("data") || !reply["data"].is_array())
    throw FormatError("embedding response lacks a data array");
  const auto& data = reply["data"];
  if (data.size() != texts.size())
    throw FormatError("embedding response has " + std::to_string(data.size()) + " items for " +
                      std::to_string(texts.size()) + " inputs");
  std::vector<std::vector<float>> out(texts.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& item = data[i];
    std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : i;
    if (index >= out.size() || !out[index].empty()) throw FormatError("embedding response has a bad index");
    out[index] = item.at("embedding").get<std::vector<float>>();
  }
  return out;
}

EmbeddingMatrix embed_remote(std::span<const std::string> ids, std::span<const std::string> texts,
                             const ProviderConfig& cfg) {
  const auto url = http::parse_url(cfg.endpoint);
  const std::size_t n = texts.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<std::vector<std::vector<float>>> results(batches);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::optional<std::string> failure;

  auto worker = [&] {
    while (true) {
      auto b = next.fetch_add(1);
      if (b >= batches) return;
      {
        std::lock_guard lock(err_mu);
        if (failure) return;
      }
      const auto lo = b * cfg.batch_size;
      const auto hi = std::min(n, lo + cfg.batch_size);
      try {
        results[b] = request_batch(cfg, url, texts.subspan(lo, hi - lo));
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (!failure) failure = e.what();
      }
    }
  };

  const auto threads = std::min(cfg.max_in_flight, std::max<std::size_t>(batches, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) throw Error(*failure);

  std::size_t dim = 0;
  for (const auto& batch : results)
    for (const auto& row : batch) {
      if (dim == 0) dim = row.size();
      if (row.size() != dim)
        throw FormatError("embedding dimension mismatch across responses: " + std::to_string(dim) + " vs " +
                          std::to_string(row.size()));
    }
  MatrixF m(n, dim);
  std::size_t r = 0;
  for (const auto& batch : results)
    for (const auto& row : batch) std::copy(row.begin(), row.end(), m.row(r++).begin());
  return EmbeddingMatrix{std::move(m), {ids.begin(), ids.end()}, cfg.model};
}

}  // namespace

EmbeddingMatrix embed_texts(std::span<const std::string> ids, std::span<const std::string> texts,
                            const ProviderConfig& provider) {
  provider.validate();
  if (ids.size() != texts.size()) throw InvalidArgument("ids and texts differ in length");
  if (texts.empty()) throw InvalidArgument("nothing to embed");
  EmbeddingMatrix out;
  switch (provider.kind) {
    case ProviderKind::synthetic: {
      MatrixF m(texts.size(), provider.dim);
      for (std::size_t i = 0; i < texts.size(); ++i) {
        auto v = synthetic_embedding(texts[i], provider.dim);
        std::copy(v.begin(), v.end(), m.row(i).begin());
      }
      out = EmbeddingMatrix{std::move(m), {ids.begin(), ids.end()}, "synthetic-" + std::to_string(provider.dim)};
      break;
    }
    case ProviderKind::file:
      out = load_embeddings(provider.path);
      check_alignment(out, ids);
      break;
    case ProviderKind::remote:
      out = embed_remote(ids, texts, provider);
      break;
  }
  if (provider.normalize) normalize_rows(out.rows);
  out.validate();
  return out;
}

EmbeddingMatrix embed_corpus(const corpus::Corpus& corpus, const ProviderConfig& provider) {
  auto ids = corpus.ids();
  auto texts = corpus.texts();
  return embed_texts(ids, texts, provider);
}

namespace {

constexpr char kMagic[8] = {'T', 'O', 'P', 'O', 'L', 'M', 'X', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 8 + 4 + 4 + 8 + 8;

template <class T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(std::string_view bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return value;
}

std::uint32_t ids_crc(const std::vector<std::string>& ids) {
  std::string joined;
  for (const auto& id : ids) {
    joined += id;
    joined.push_back('\n');
  }
  return crc32(joined);
}

}  // namespace

std::string encode_matrix(const MatrixF& m) {
  std::string out;
  out.reserve(kHeaderBytes + m.values().size() * 4 + 4);
  out.append(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.cols());
  for (float v : m.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  put_le<std::uint32_t>(out, crc32(out));
  return out;
}

MatrixF decode_matrix(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes + 4) throw FormatError("matrix file truncated (header)");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError("matrix file has bad magic bytes");
  const auto stored_crc = get_le<std::uint32_t>(bytes, bytes.size() - 4);
  if (crc32(bytes.substr(0, bytes.size() - 4)) != stored_crc)
    throw FormatError("matrix file checksum mismatch (corrupt or truncated)");
  if (get_le<std::uint32_t>(bytes, 8) != kVersion) throw FormatError("unsupported matrix file version");
  const auto rows = get_le<std::uint64_t>(bytes, 16);
  const auto cols = get_le<std::uint64_t>(bytes, 24);
  if (cols != 0 && rows > (bytes.size() / 4) / cols) throw FormatError("matrix file shape exceeds data");
  if (bytes.size() != kHeaderBytes + rows * cols * 4 + 4) throw FormatError("matrix file size does not match shape");
  std::vector<float> data(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, kHeaderBytes + 4 * i));
  return MatrixF(rows, cols, std::move(data));
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

void save_matrix(const std::filesystem::path& path, const MatrixF& m, const std::vector<std::string>& ids,
                 const std::string& model_tag, const json& extra) {
  if (ids.size() != m.rows()) throw InvalidArgument("ids do not match matrix rows");
  const auto bytes = encode_matrix(m);
  json side{{"format", "topol-matrix"},
            {"version", kVersion},
            {"n", m.rows()},
            {"m", m.cols()},
            {"model_tag", model_tag},
            {"data_crc32", crc32(bytes)},
            {"ids_crc32", ids_crc(ids)},
            {"ids", ids}};
  if (!extra.empty()) side["extra"] = extra;
  write_file_atomic(path, bytes);
  write_file_atomic(sidecar_path(path), side.dump(1) + "\n");
}

LoadedMatrix load_matrix(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  auto m = decode_matrix(bytes);
  json side;
  try {
    side = json::parse(read_file(sidecar_path(path)));
  } catch (const json::parse_error& e) {
    throw FormatError("matrix sidecar is not valid JSON: " + std::string(e.what()));
  }
  LoadedMatrix out;
  try {
    out.ids = side.at("ids").get<std::vector<std::string>>();
    out.model_tag = side.at("model_tag").get<std::string>();
    if (side.at("n").get<std::size_t>() != m.rows() || side.at("m").get<std::size_t>() != m.cols())
      throw FormatError("matrix sidecar shape does not match binary");
    if (side.at("data_crc32").get<std::uint32_t>() != crc32(bytes))
      throw FormatError("matrix sidecar checksum does not match binary");
    if (side.at("ids_crc32").get<std::uint32_t>() != ids_crc(out.ids))
      throw FormatError("matrix sidecar ids checksum mismatch");
    out.extra = side.value("extra", json::object());
  } catch (const json::exception& e) {
    throw FormatError("matrix sidecar malformed: " + std::string(e.what()));
  }
  if (out.ids.size() != m.rows()) throw FormatError("matrix sidecar id count does not match rows");
  out.matrix = std::move(m);
  return out;
}

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  matrix.validate();
  save_matrix(path, matrix.rows, matrix.ids, matrix.model_tag);
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  auto loaded = load_matrix(path);
  EmbeddingMatrix out{std::move(loaded.matrix), std::move(loaded.ids), std::move(loaded.model_tag)};
  out.validate();
  return out;
}

}  // namespace topol::embed
