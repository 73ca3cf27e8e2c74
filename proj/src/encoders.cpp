#include "lect/encoders.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <future>
#include <mutex>
#include <sstream>
#include <thread>

#include "lect/rng.hpp"

namespace lect {

static_assert(std::endian::native == std::endian::little,
              "binary artifact formats assume a little-endian host");

EmbeddingMatrix TextEncoder::encode_batch(std::span<const std::string> texts,
                                          unsigned threads) const {
  const auto rows = static_cast<Eigen::Index>(texts.size());
  EmbeddingMatrix out(rows, static_cast<Eigen::Index>(dim()));
  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto vec = encode(texts[i]);
      if (vec.size() != dim()) throw EncodeError("dimension mismatch", i);
      for (std::size_t j = 0; j < vec.size(); ++j) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vec[j];
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(texts.size(), 1));
  if (workers == 1) {
    fill(0, texts.size());
    return out;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (texts.size() + workers - 1) / workers;
  for (std::size_t begin = 0; begin < texts.size(); begin += chunk) {
    jobs.push_back(std::async(std::launch::async, fill, begin, std::min(begin + chunk, texts.size())));
  }
  for (auto& job : jobs) job.get();
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<double> hash_encode(const std::string& text, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error("hash_encode: dim must be positive");
  std::vector<double> v(dim, 0.0);
  for (const auto& token : tokenize(text)) {
    const std::uint64_t h = splitmix64(fnv1a64(token) ^ splitmix64(seed));
    const std::size_t bucket = static_cast<std::size_t>(h % dim);
    v[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
  }
  return v;
}

HashEncoder::HashEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw Error("HashEncoder: dim must be positive");
}

std::string HashEncoder::id() const { return "hash-v1"; }

std::vector<double> HashEncoder::encode(const std::string& text) const {
  return hash_encode(text, dim_, seed_);
}

RemoteEncoder::RemoteEncoder(RemoteEncoderConfig config, std::shared_ptr<HttpTransport> transport,
                             JsonPostClient::Sleeper sleeper)
    : config_(std::move(config)),
      client_(std::move(transport), config_.endpoint,
              [&]() -> std::string {
                if (!config_.token.empty()) return config_.token;
                const char* env = std::getenv("LECT_EMBED_TOKEN");
                return env ? env : "";
              }(),
              config_.retry, std::move(sleeper)) {
  if (config_.batch_size == 0) throw Error("RemoteEncoder: batch_size must be positive");
  if (config_.dim == 0) throw Error("RemoteEncoder: dim must be positive");
  if (config_.concurrency == 0) config_.concurrency = 1;
}

std::string RemoteEncoder::id() const {
  return "remote:" + (config_.model.empty() ? config_.endpoint : config_.model);
}

std::vector<double> RemoteEncoder::encode(const std::string& text) const {
  const Matrix row = request(std::span<const std::string>(&text, 1), 0);
  return std::vector<double>(row.data(), row.data() + row.size());
}

Matrix RemoteEncoder::request(std::span<const std::string> texts, std::size_t first_index) const {
  nlohmann::json payload = {{"input", std::vector<std::string>(texts.begin(), texts.end())}};
  if (!config_.model.empty()) payload["model"] = config_.model;
  nlohmann::json response;
  try {
    response = client_.post(payload);
  } catch (const Error& e) {
    throw EncodeError(e.what(), first_index);
  }
  if (!response.contains("data") || !response.at("data").is_array()) {
    throw EncodeError("embedding response has no \"data\" array", first_index);
  }
  const auto& data = response.at("data");
  if (data.size() != texts.size()) {
    throw EncodeError("embedding response count mismatch: sent " + std::to_string(texts.size()) +
                          ", received " + std::to_string(data.size()),
                      first_index);
  }
  Matrix out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(config_.dim));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& item = data[i];
    if (!item.contains("embedding") || !item.at("embedding").is_array()) {
      throw EncodeError("embedding entry missing", first_index + i);
    }
    const auto& vec = item.at("embedding");
    if (vec.size() != config_.dim) {
      throw EncodeError("dimension mismatch: expected " + std::to_string(config_.dim) + ", got " +
                            std::to_string(vec.size()),
                        first_index + i);
    }
    for (std::size_t j = 0; j < vec.size(); ++j) {
      const double x = vec[j].get<double>();
      if (!std::isfinite(x)) throw EncodeError("non-finite embedding value", first_index + i);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
    }
  }
  return out;
}

EmbeddingMatrix RemoteEncoder::encode_batch(std::span<const std::string> texts, unsigned) const {
  const std::size_t n = texts.size();
  EmbeddingMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(config_.dim));
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < n; s += config_.batch_size) starts.push_back(s);

  // Batches are claimed in order by at most `concurrency` workers; the first
  // failure (by batch index) is reported.
  std::mutex mu;
  std::size_t next = 0;
  std::optional<std::pair<std::size_t, EncodeError>> failure;
  auto worker = [&] {
    for (;;) {
      std::size_t b;
      {
        std::lock_guard lock(mu);
        if (next >= starts.size() || failure) return;
        b = next++;
      }
      const std::size_t begin = starts[b];
      const std::size_t count = std::min(config_.batch_size, n - begin);
      try {
        Matrix rows = request(texts.subspan(begin, count), begin);
        std::lock_guard lock(mu);
        out.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) = rows;
      } catch (const EncodeError& e) {
        std::lock_guard lock(mu);
        if (!failure || failure->first > b) failure.emplace(b, e);
        return;
      }
    }
  };
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(config_.concurrency, std::max<std::size_t>(starts.size(), 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) throw failure->second;
  return out;
}

EmbeddingMatrix encode_all(std::span<const std::string> texts, const TextEncoder& encoder,
                           unsigned threads) {
  EmbeddingMatrix out = encoder.encode_batch(texts, threads);
  if (out.rows() != static_cast<Eigen::Index>(texts.size()) ||
      out.cols() != static_cast<Eigen::Index>(encoder.dim())) {
    throw Error("encode_all: dimension mismatch");
  }
  if (!out.allFinite()) throw Error("encode_all: non-finite embedding");
  return out;
}

std::string EmbeddingCacheKey::file_name() const {
  std::ostringstream key;
  key << graph_hash << '|' << encoder_id << '|' << dim << '|' << seed;
  std::ostringstream name;
  name << "emb_" << std::hex << fnv1a64(key.str()) << ".bin";
  return name.str();
}

namespace {
constexpr char kEmbeddingMagic[8] = {'L', 'E', 'C', 'T', 'E', 'M', 'B', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}
template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("embedding cache: truncated file");
  return value;
}
}  // namespace

void save_embeddings(const EmbeddingMatrix& embeddings, std::uint64_t seed,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding cache " + path.string());
  out.write(kEmbeddingMagic, sizeof(kEmbeddingMagic));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(embeddings.rows()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(embeddings.cols()));
  write_pod<std::uint64_t>(out, seed);
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    for (Eigen::Index j = 0; j < embeddings.cols(); ++j) {
      write_pod<float>(out, static_cast<float>(embeddings(i, j)));
    }
  }
}

std::pair<EmbeddingMatrix, std::uint64_t> load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding cache " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kEmbeddingMagic, sizeof(magic)) != 0) {
    throw Error("embedding cache " + path.string() + ": bad magic");
  }
  const auto rows = read_pod<std::uint64_t>(in);
  const auto cols = read_pod<std::uint64_t>(in);
  const auto seed = read_pod<std::uint64_t>(in);
  EmbeddingMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = read_pod<float>(in);
  }
  return {std::move(m), seed};
}

EmbeddingMatrix cached_encode(std::span<const std::string> texts, const TextEncoder& encoder,
                              const EmbeddingCacheKey& key,
                              const std::filesystem::path& cache_dir, unsigned threads) {
  const auto path = cache_dir / key.file_name();
  if (std::filesystem::exists(path)) {
    auto [m, seed] = load_embeddings(path);
    if (m.rows() == static_cast<Eigen::Index>(texts.size()) &&
        m.cols() == static_cast<Eigen::Index>(encoder.dim()) && seed == key.seed) {
      return m;
    }
  }
  EmbeddingMatrix m = encode_all(texts, encoder, threads);
  // Round through float32 so cached and freshly computed runs agree bitwise.
  m = m.cast<float>().cast<double>();
  std::filesystem::create_directories(cache_dir);
  save_embeddings(m, key.seed, path);
  return m;
}

}  // namespace lect
