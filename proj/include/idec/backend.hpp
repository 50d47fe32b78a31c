#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace idec {

using TokenId = std::int32_t;

struct BackendMeta {
  std::size_t vocab_size = 0;
  TokenId eos_token_id = 0;
  std::string tokenizer_fingerprint;
  std::size_t max_context = 0;

  bool operator==(const BackendMeta&) const = default;
};

// Throws ValidationError unless 0 <= eos < V, V > 0 and the fingerprint is set.
void validate(const BackendMeta& meta);

// Raw pre-softmax scores over the vocabulary.
struct LogitVector {
  std::vector<double> scores;

  std::size_t size() const { return scores.size(); }
  double operator[](std::size_t i) const { return scores[i]; }
  std::span<const double> view() const { return scores; }

  bool operator==(const LogitVector&) const = default;
};

// Throws ValidationError if the length differs from V or an entry is not finite.
void validate(const LogitVector& logits, const BackendMeta& meta);

// Prompt text plus the shared generated prefix.
struct Session {
  std::string prompt_text;
  std::vector<TokenId> generated_ids;
};

// A source of next-token logits. Implementations must tolerate concurrent
// next_logits calls on distinct sessions.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendMeta meta() const = 0;
  virtual LogitVector next_logits(const Session& session) const = 0;
  // EOS and padding are dropped; ids >= V raise ValidationError.
  virtual std::string detokenize(std::span<const TokenId> ids) const = 0;
  virtual std::string name() const = 0;

  // True when the same session always yields the same logits.
  virtual bool deterministic() const { return true; }
  // True when requests are slow enough that issuing the base and contrast
  // requests of one step concurrently pays off.
  virtual bool prefers_concurrent_requests() const { return false; }
};

// Throws ValidationError when the two backends cannot be contrasted token by token.
void check_compatible(const Backend& base, const Backend& contrast);

// Byte-level vocabulary shared by the toy backends: ids 0..255 are bytes,
// then BOS and EOS.
namespace byte_vocab {
inline constexpr TokenId kBos = 256;
inline constexpr TokenId kEos = 257;
inline constexpr std::size_t kSize = 258;
inline constexpr const char* kFingerprint = "byte-v1";

std::string detokenize(std::span<const TokenId> ids);
std::vector<TokenId> tokenize(std::string_view text);
}  // namespace byte_vocab

// Memoizes next_logits by (prompt, prefix). Only meaningful for
// deterministic inner backends. The cache is cleared wholesale when it
// reaches `max_entries`.
class CachingBackend final : public Backend {
 public:
  explicit CachingBackend(std::shared_ptr<const Backend> inner, std::size_t max_entries = 1 << 16);

  BackendMeta meta() const override { return inner_->meta(); }
  LogitVector next_logits(const Session& session) const override;
  std::string detokenize(std::span<const TokenId> ids) const override {
    return inner_->detokenize(ids);
  }
  std::string name() const override { return inner_->name(); }
  bool deterministic() const override { return inner_->deterministic(); }
  bool prefers_concurrent_requests() const override {
    return inner_->prefers_concurrent_requests();
  }

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::shared_ptr<const Backend> inner_;
  std::size_t max_entries_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<std::string, std::vector<TokenId>>, LogitVector> cache_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

}  // namespace idec
