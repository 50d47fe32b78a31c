#include "idec/engine.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "idec/errors.hpp"
#include "idec/kernels.hpp"

namespace idec {

std::string to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::baseline: return "baseline";
    case DecodeMode::id: return "id";
    case DecodeMode::cd: return "cd";
    case DecodeMode::id_amateur: return "id_amateur";
    case DecodeMode::noisy_only: return "noisy_only";
  }
  return "unknown";
}

DecodeMode decode_mode_from_string(std::string_view name) {
  std::string n(name);
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "baseline") return DecodeMode::baseline;
  if (n == "id") return DecodeMode::id;
  if (n == "cd") return DecodeMode::cd;
  if (n == "id_amateur") return DecodeMode::id_amateur;
  if (n == "noisy_only") return DecodeMode::noisy_only;
  throw ConfigError("unknown decode mode: " + std::string(name));
}

std::string to_string(SamplerKind kind) {
  return kind == SamplerKind::greedy ? "greedy" : "top_k";
}

SamplerKind sampler_from_string(std::string_view name) {
  if (name == "greedy") return SamplerKind::greedy;
  if (name == "top_k" || name == "top-k") return SamplerKind::top_k;
  throw ConfigError("unknown sampler: " + std::string(name));
}

bool uses_noisy_prompt(DecodeMode mode) {
  return mode == DecodeMode::id || mode == DecodeMode::id_amateur ||
         mode == DecodeMode::noisy_only;
}

bool needs_amateur(DecodeMode mode) {
  return mode == DecodeMode::cd || mode == DecodeMode::id_amateur;
}

void DecodeConfig::validate() const {
  if (!std::isfinite(epsilon)) throw ConfigError("epsilon must be finite");
  if (sampler == SamplerKind::top_k) {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0 when sampling");
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
  }
  if (mode == DecodeMode::cd) {
    if (!cd_tau) throw ConfigError("cd mode requires cd_tau");
    if (!(*cd_tau > 0.0)) throw ConfigError("cd_tau must be > 0");
    if (!(cd_alpha > 0.0 && cd_alpha <= 1.0)) throw ConfigError("cd_alpha must lie in (0, 1]");
    if (sampler != SamplerKind::greedy) throw ConfigError("cd mode supports greedy selection only");
  } else if (cd_tau) {
    throw ConfigError("cd_tau is only valid in cd mode");
  }
}

nlohmann::json DecodeConfig::to_json() const {
  nlohmann::json j{{"mode", to_string(mode)},
                   {"epsilon", epsilon},
                   {"max_new_tokens", max_new_tokens},
                   {"sampler", to_string(sampler)},
                   {"seed", seed}};
  if (sampler == SamplerKind::top_k) {
    j["top_k"] = top_k;
    j["temperature"] = temperature;
  }
  if (mode == DecodeMode::cd) {
    j["cd_tau"] = *cd_tau;
    j["cd_alpha"] = cd_alpha;
  }
  return j;
}

std::size_t DecodeTrace::flips() const {
  return static_cast<std::size_t>(
      std::count_if(per_step.begin(), per_step.end(), [](const StepRecord& s) { return s.flipped; }));
}

LogitVector combine_logits(const LogitVector& z, const LogitVector& z_noisy, double epsilon) {
  if (z.size() != z_noisy.size()) {
    throw ValidationError("combine_logits: length mismatch " + std::to_string(z.size()) + " vs " +
                          std::to_string(z_noisy.size()));
  }
  LogitVector out;
  out.scores.resize(z.size());
  kernels::combine(z.view(), z_noisy.view(), epsilon, out.scores);
  return out;
}

TokenId greedy_token(const LogitVector& logits) {
  if (logits.size() == 0) throw ValidationError("argmax of an empty logit vector");
  return static_cast<TokenId>(kernels::argmax(logits.view()));
}

TokenId cd_step(const LogitVector& z_expert, const LogitVector& z_amateur, double tau,
                double alpha) {
  if (z_expert.size() != z_amateur.size()) {
    throw ValidationError("cd_step: length mismatch");
  }
  if (z_expert.size() == 0) throw ValidationError("cd_step: empty logits");
  if (!(tau > 0.0)) throw ConfigError("cd_step: tau must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("cd_step: alpha must lie in (0, 1]");

  const std::size_t n = z_expert.size();
  std::vector<double> log_expert(n);
  kernels::log_softmax(z_expert.view(), log_expert);

  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) scaled[i] = z_amateur[i] / tau;
  std::vector<double> log_amateur(n);
  kernels::log_softmax(scaled, log_amateur);

  // p[v] >= alpha * max p  <=>  log p[v] >= log alpha + max log p
  const double threshold = std::log(alpha) + kernels::max_value(log_expert);
  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    if (log_expert[v] < threshold) continue;
    const double s = log_expert[v] - log_amateur[v];
    if (!best || s > best_score) {
      best = v;
      best_score = s;
    }
  }
  // The expert's own argmax always passes the threshold.
  return static_cast<TokenId>(*best);
}

TokenId sample_top_k(const LogitVector& logits, std::size_t k, double temperature, Rng& rng) {
  if (logits.size() == 0) throw ValidationError("sample_top_k: empty logits");
  if (!(temperature > 0.0)) throw ConfigError("sample_top_k: temperature must be > 0");
  if (k < 1) throw ConfigError("sample_top_k: k must be >= 1");

  const std::size_t n = logits.size();
  k = std::min(k, n);
  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) scaled[i] = logits[i] / temperature;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scaled[a] > scaled[b] || (scaled[a] == scaled[b] && a < b);
                    });
  order.resize(k);

  std::vector<double> head(k);
  for (std::size_t i = 0; i < k; ++i) head[i] = scaled[order[i]];
  std::vector<double> probs(k);
  kernels::serial::softmax(head, probs);

  const double u = uniform_unit(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<TokenId>(order[i]);
  }
  // Rounding left the cumulative sum a hair below 1; take the last candidate
  // with nonzero mass.
  for (std::size_t i = k; i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<TokenId>(order[i]);
  }
  return static_cast<TokenId>(order[0]);
}

DecodeResult decode(const PromptBundle& bundle, const Backend& base, const Backend* contrast,
                    const DecodeConfig& cfg, const DecodeOptions& options) {
  cfg.validate();

  const Backend* second = nullptr;
  std::string primary_prompt = bundle.base_prompt;
  std::string second_prompt;
  switch (cfg.mode) {
    case DecodeMode::baseline:
    case DecodeMode::noisy_only:
      if (contrast) throw ConfigError(to_string(cfg.mode) + " mode takes no contrast backend");
      if (cfg.mode == DecodeMode::noisy_only) primary_prompt = bundle.noisy_prompt;
      break;
    case DecodeMode::id:
      if (contrast && contrast != &base) {
        throw ConfigError("id mode contrasts the base backend with itself; use id_amateur");
      }
      second = &base;
      second_prompt = bundle.noisy_prompt;
      break;
    case DecodeMode::id_amateur:
    case DecodeMode::cd:
      if (!contrast) throw ConfigError(to_string(cfg.mode) + " mode requires an amateur backend");
      check_compatible(base, *contrast);
      second = contrast;
      second_prompt = cfg.mode == DecodeMode::cd ? bundle.base_prompt : bundle.noisy_prompt;
      break;
  }

  const BackendMeta meta = base.meta();
  validate(meta);
  const bool concurrent = second && (base.prefers_concurrent_requests() ||
                                     second->prefers_concurrent_requests());

  Rng rng(cfg.seed);
  Session primary{std::move(primary_prompt), {}};
  Session secondary{std::move(second_prompt), {}};
  DecodeResult result;
  auto& trace = result.trace;

  for (std::size_t step = 0; step < cfg.max_new_tokens; ++step) {
    if (options.record_prefixes) {
      trace.base_prefixes.push_back(primary.generated_ids);
      if (second) trace.contrast_prefixes.push_back(secondary.generated_ids);
    }

    LogitVector z;
    std::optional<LogitVector> z_contrast;
    if (second && concurrent) {
      auto pending = std::async(std::launch::async,
                                [&] { return second->next_logits(secondary); });
      z = base.next_logits(primary);
      z_contrast = pending.get();
    } else {
      z = base.next_logits(primary);
      if (second) z_contrast = second->next_logits(secondary);
    }
    validate(z, meta);
    if (z_contrast) validate(*z_contrast, meta);

    StepRecord rec;
    rec.base_logit_max = kernels::max_value(z.view());
    if (z_contrast) rec.contrast_logit_max = kernels::max_value(z_contrast->view());
    const TokenId base_choice = greedy_token(z);

    TokenId chosen = 0;
    if (cfg.mode == DecodeMode::cd) {
      chosen = cd_step(z, *z_contrast, *cfg.cd_tau, cfg.cd_alpha);
    } else {
      const LogitVector scores =
          z_contrast ? combine_logits(z, *z_contrast, cfg.epsilon) : std::move(z);
      chosen = cfg.sampler == SamplerKind::greedy
                   ? greedy_token(scores)
                   : sample_top_k(scores, cfg.top_k, cfg.temperature, rng);
    }
    rec.chosen_id = chosen;
    rec.flipped = chosen != base_choice;
    trace.per_step.push_back(rec);
    trace.token_ids.push_back(chosen);

    if (chosen == meta.eos_token_id) {
      trace.stopped_at_eos = true;
      break;
    }
    primary.generated_ids.push_back(chosen);
    if (second) secondary.generated_ids.push_back(chosen);
  }

  result.text = base.detokenize(primary.generated_ids);
  return result;
}

}  // namespace idec
