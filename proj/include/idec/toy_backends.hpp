#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "idec/backend.hpp"

namespace idec {

// Shared plumbing for the byte-vocabulary toy models: metadata,
// detokenization and the context-length check. Scores are produced from
// integer hashing and fixed tables only, so results are bit-identical on
// every platform.
class ByteToyBackend : public Backend {
 public:
  explicit ByteToyBackend(std::size_t max_context) : max_context_(max_context) {}

  BackendMeta meta() const override;
  LogitVector next_logits(const Session& session) const final;
  std::string detokenize(std::span<const TokenId> ids) const override;

 protected:
  virtual std::vector<double> score(const Session& session) const = 0;

 private:
  std::size_t max_context_;
};

// Unstructured but reproducible logits: every score is a 64-bit hash of
// (seed, prompt, prefix, token id) mapped onto [-4, 4] in steps of 0.001.
class HashLM final : public ByteToyBackend {
 public:
  explicit HashLM(std::uint64_t seed = 0, std::size_t max_context = 8192)
      : ByteToyBackend(max_context), seed_(seed) {}
  std::string name() const override { return "toy:hash:" + std::to_string(seed_); }

 protected:
  std::vector<double> score(const Session& session) const override;

 private:
  std::uint64_t seed_;
};

// Spells out a fixed target string, then EOS.
class EchoLM final : public ByteToyBackend {
 public:
  explicit EchoLM(std::string target, std::size_t max_context = 8192)
      : ByteToyBackend(max_context), target_(std::move(target)) {}
  std::string name() const override { return "toy:echo:" + target_; }

  static constexpr double kOnTrack = 4.0;
  static constexpr double kOffTrack = -4.0;

 protected:
  std::vector<double> score(const Session& session) const override;

 private:
  std::string target_;
};

// Configuration of BiasedInstructionLM. Every answer starts at its base
// weight; each rule whose keyword occurs in the prompt adds its deltas.
struct BiasedLMConfig {
  struct Rule {
    std::string keyword;
    std::map<std::string, double> delta;
  };

  std::vector<std::string> answers;
  std::map<std::string, double> base_weights;
  std::vector<Rule> rules;
  double floor = -8.0;
  // EOS score once the prefix has left every answer.
  double off_track_eos = 4.0;
  std::size_t max_context = 8192;

  // Emits `with_trigger` when `trigger` occurs in the prompt, `without`
  // otherwise.
  static BiasedLMConfig simple(const std::string& trigger, const std::string& with_trigger,
                               const std::string& without);

  static BiasedLMConfig from_json(const nlohmann::json& j);
  static BiasedLMConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;
};

// Chooses among a closed set of answer strings with prompt-dependent
// weights. At each step the next byte of every answer consistent with the
// generated prefix scores that answer's weight (max over answers sharing
// the byte), a completed answer scores its weight on EOS, and all other
// tokens score `floor`.
class BiasedInstructionLM final : public ByteToyBackend {
 public:
  explicit BiasedInstructionLM(BiasedLMConfig config);
  std::string name() const override { return "toy:biased"; }

  // Answer weights for a given prompt.
  std::map<std::string, double> answer_weights(std::string_view prompt) const;
  const BiasedLMConfig& config() const { return config_; }

 protected:
  std::vector<double> score(const Session& session) const override;

 private:
  BiasedLMConfig config_;
};

}  // namespace idec
