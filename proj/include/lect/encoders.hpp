#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lect/common.hpp"
#include "lect/http_client.hpp"

namespace lect {

/// Rows are nodes, columns embedding coordinates.
using EmbeddingMatrix = Matrix;

/// Raised when encoding a specific node fails.
class EncodeError : public Error {
 public:
  EncodeError(const std::string& what, std::size_t node_index)
      : Error("node " + std::to_string(node_index) + ": " + what), node_index_(node_index) {}
  std::size_t node_index() const { return node_index_; }

 private:
  std::size_t node_index_;
};

/// Frozen text encoder: a deterministic map from text to a dim()-vector.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::size_t dim() const = 0;
  /// Identifier used in cache keys and run manifests.
  virtual std::string id() const = 0;
  virtual std::vector<double> encode(const std::string& text) const = 0;

  /// Encodes a contiguous batch; rows follow input order. The default runs
  /// encode() per text across up to `threads` workers.
  virtual EmbeddingMatrix encode_batch(std::span<const std::string> texts,
                                       unsigned threads) const;
};

/// Lowercases, splits on non-alphanumeric boundaries and returns the tokens.
std::vector<std::string> tokenize(const std::string& text);

/// Signed feature hashing: every token adds +-1 to one of `dim` buckets; the
/// result is L2-normalized unless it is all zero.
std::vector<double> hash_encode(const std::string& text, std::size_t dim, std::uint64_t seed);

class HashEncoder final : public TextEncoder {
 public:
  explicit HashEncoder(std::size_t dim = 384, std::uint64_t seed = 0);
  std::size_t dim() const override { return dim_; }
  std::string id() const override;
  std::vector<double> encode(const std::string& text) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct RemoteEncoderConfig {
  std::string endpoint;
  std::string model;  // optional, forwarded as "model" when non-empty
  std::size_t dim = 384;
  std::size_t batch_size = 64;
  unsigned concurrency = 4;
  RetryPolicy retry;
  std::string token;  // defaults to $LECT_EMBED_TOKEN
};

/// Client for an embeddings service speaking
///   POST {"input": [str, ...]} -> {"data": [{"embedding": [float, ...]}, ...]}.
class RemoteEncoder final : public TextEncoder {
 public:
  RemoteEncoder(RemoteEncoderConfig config, std::shared_ptr<HttpTransport> transport,
                JsonPostClient::Sleeper sleeper = {});
  std::size_t dim() const override { return config_.dim; }
  std::string id() const override;
  std::vector<double> encode(const std::string& text) const override;
  EmbeddingMatrix encode_batch(std::span<const std::string> texts,
                               unsigned threads) const override;

 private:
  Matrix request(std::span<const std::string> texts, std::size_t first_index) const;

  RemoteEncoderConfig config_;
  JsonPostClient client_;
};

/// Row i is encoder.encode(texts[i]); independent of the worker schedule.
EmbeddingMatrix encode_all(std::span<const std::string> texts, const TextEncoder& encoder,
                           unsigned threads = 1);

// Embedding cache: magic "LECTEMB1", u64 rows, u64 cols, u64 seed, then
// rows*cols little-endian float32 values in row-major order.
struct EmbeddingCacheKey {
  std::uint64_t graph_hash = 0;
  std::string encoder_id;
  std::size_t dim = 0;
  std::uint64_t seed = 0;

  std::string file_name() const;
};

void save_embeddings(const EmbeddingMatrix& embeddings, std::uint64_t seed,
                     const std::filesystem::path& path);
/// Returns the matrix and the seed stored in the header.
std::pair<EmbeddingMatrix, std::uint64_t> load_embeddings(const std::filesystem::path& path);

/// Loads from cache_dir when present, otherwise encodes and stores.
EmbeddingMatrix cached_encode(std::span<const std::string> texts, const TextEncoder& encoder,
                              const EmbeddingCacheKey& key,
                              const std::filesystem::path& cache_dir, unsigned threads = 1);

}  // namespace lect
