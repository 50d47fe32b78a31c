#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "idec/backend.hpp"
#include "idec/prompts.hpp"
#include "idec/rng.hpp"

namespace idec {

// baseline    base prompt only
// id          base prompt contrasted with the noisy prompt on the same model
// cd          expert (base) contrasted with an amateur model, both on the base prompt
// id_amateur  base prompt contrasted with the noisy prompt on a separate amateur model
// noisy_only  noisy prompt only
enum class DecodeMode { baseline, id, cd, id_amateur, noisy_only };
enum class SamplerKind { greedy, top_k };

std::string to_string(DecodeMode mode);
DecodeMode decode_mode_from_string(std::string_view name);
std::string to_string(SamplerKind kind);
SamplerKind sampler_from_string(std::string_view name);

// True for modes that read the noisy prompt.
bool uses_noisy_prompt(DecodeMode mode);
// True for modes that need a second, separate backend.
bool needs_amateur(DecodeMode mode);

struct DecodeConfig {
  DecodeMode mode = DecodeMode::baseline;
  double epsilon = 0.3;
  std::size_t max_new_tokens = 128;
  SamplerKind sampler = SamplerKind::greedy;
  std::size_t top_k = 40;
  double temperature = 0.7;
  std::uint64_t seed = 0;
  // Amateur temperature; set exactly when mode == cd.
  std::optional<double> cd_tau;
  // Plausibility head: tokens with p >= cd_alpha * max p survive.
  double cd_alpha = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
};

struct StepRecord {
  double base_logit_max = 0.0;
  std::optional<double> contrast_logit_max;
  TokenId chosen_id = 0;
  // chosen_id differs from the argmax of the base logits
  bool flipped = false;
};

struct DecodeTrace {
  // Every chosen token, including a final EOS.
  std::vector<TokenId> token_ids;
  std::vector<StepRecord> per_step;
  // Generated prefix fed to the base and contrast sessions before each
  // step, recorded only when DecodeOptions::record_prefixes is set.
  std::vector<std::vector<TokenId>> base_prefixes;
  std::vector<std::vector<TokenId>> contrast_prefixes;
  bool stopped_at_eos = false;

  std::size_t flips() const;
};

struct DecodeResult {
  std::string text;
  DecodeTrace trace;
};

struct DecodeOptions {
  bool record_prefixes = false;
};

// z - epsilon * z_noisy, elementwise. Throws ValidationError on length mismatch.
LogitVector combine_logits(const LogitVector& z, const LogitVector& z_noisy, double epsilon);

// Lowest index among the maxima.
TokenId greedy_token(const LogitVector& logits);

// Contrastive-decoding step: restrict to the head {v : p[v] >= alpha * max p}
// of the expert distribution, then pick the token maximizing
// log p_expert[v] - log softmax(z_amateur / tau)[v]. Ties go to the lowest id.
TokenId cd_step(const LogitVector& z_expert, const LogitVector& z_amateur, double tau,
                double alpha);

// Temperature scaling, then top-k truncation, then a categorical draw.
// Candidates are ordered by (score desc, id asc) before the draw.
TokenId sample_top_k(const LogitVector& logits, std::size_t k, double temperature, Rng& rng);

// Runs the decoding loop for one prompt bundle. `contrast` must be null for
// baseline, noisy_only and id (id reuses `base`), and set for cd and
// id_amateur. Both sessions are extended with the same chosen token after
// every step. The loop stops on EOS (not emitted) or after max_new_tokens.
DecodeResult decode(const PromptBundle& bundle, const Backend& base, const Backend* contrast,
                    const DecodeConfig& cfg, const DecodeOptions& options = {});

}  // namespace idec
