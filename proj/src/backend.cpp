#include "idec/backend.hpp"

#include <cmath>

#include "idec/errors.hpp"

namespace idec {

void validate(const BackendMeta& meta) {
  if (meta.vocab_size == 0) throw ValidationError("backend vocab_size must be > 0");
  if (meta.eos_token_id < 0 || static_cast<std::size_t>(meta.eos_token_id) >= meta.vocab_size) {
    throw ValidationError("backend eos_token_id out of range");
  }
  if (meta.tokenizer_fingerprint.empty()) {
    throw ValidationError("backend tokenizer_fingerprint is empty");
  }
}

void validate(const LogitVector& logits, const BackendMeta& meta) {
  if (logits.size() != meta.vocab_size) {
    throw ValidationError("logit vector has length " + std::to_string(logits.size()) +
                          ", expected " + std::to_string(meta.vocab_size));
  }
  for (double s : logits.scores) {
    if (!std::isfinite(s)) throw ValidationError("logit vector contains a non-finite score");
  }
}

void check_compatible(const Backend& base, const Backend& contrast) {
  const BackendMeta a = base.meta();
  const BackendMeta b = contrast.meta();
  if (a.vocab_size != b.vocab_size) {
    throw ValidationError("incompatible backends: vocab sizes " + std::to_string(a.vocab_size) +
                          " vs " + std::to_string(b.vocab_size));
  }
  if (a.tokenizer_fingerprint != b.tokenizer_fingerprint) {
    throw ValidationError("incompatible backends: tokenizer fingerprints '" +
                          a.tokenizer_fingerprint + "' vs '" + b.tokenizer_fingerprint + "'");
  }
}

namespace byte_vocab {

std::string detokenize(std::span<const TokenId> ids) {
  std::string out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= kSize) {
      throw ValidationError("token id " + std::to_string(id) + " out of range");
    }
    if (id < 256) out += static_cast<char>(static_cast<unsigned char>(id));
  }
  return out;
}

std::vector<TokenId> tokenize(std::string_view text) {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(static_cast<TokenId>(c));
  return ids;
}

}  // namespace byte_vocab

CachingBackend::CachingBackend(std::shared_ptr<const Backend> inner, std::size_t max_entries)
    : inner_(std::move(inner)), max_entries_(max_entries) {}

LogitVector CachingBackend::next_logits(const Session& session) const {
  auto key = std::make_pair(session.prompt_text, session.generated_ids);
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  LogitVector logits = inner_->next_logits(session);
  std::lock_guard lock(mu_);
  ++misses_;
  if (cache_.size() >= max_entries_) cache_.clear();
  cache_.emplace(std::move(key), logits);
  return logits;
}

std::size_t CachingBackend::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t CachingBackend::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

}  // namespace idec
