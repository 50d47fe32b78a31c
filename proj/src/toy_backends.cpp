#include "idec/toy_backends.hpp"

#include <algorithm>

#include "idec/errors.hpp"
#include "idec/rng.hpp"
#include "idec/taskio.hpp"

namespace idec {

BackendMeta ByteToyBackend::meta() const {
  return {byte_vocab::kSize, byte_vocab::kEos, byte_vocab::kFingerprint, max_context_};
}

LogitVector ByteToyBackend::next_logits(const Session& session) const {
  if (session.prompt_text.size() + session.generated_ids.size() > max_context_) {
    throw LengthError("context of " +
                      std::to_string(session.prompt_text.size() + session.generated_ids.size()) +
                      " tokens exceeds max_context " + std::to_string(max_context_));
  }
  for (TokenId id : session.generated_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= byte_vocab::kSize) {
      throw ValidationError("session contains out-of-range token id " + std::to_string(id));
    }
  }
  return LogitVector{score(session)};
}

std::string ByteToyBackend::detokenize(std::span<const TokenId> ids) const {
  return byte_vocab::detokenize(ids);
}

std::vector<double> HashLM::score(const Session& session) const {
  std::uint64_t h = fnv1a64(session.prompt_text, splitmix64(seed_));
  for (TokenId id : session.generated_ids) {
    h = splitmix64(h ^ static_cast<std::uint64_t>(id));
  }
  std::vector<double> scores(byte_vocab::kSize);
  for (std::size_t v = 0; v < scores.size(); ++v) {
    const std::uint64_t x = splitmix64(h ^ splitmix64(v));
    scores[v] = (static_cast<double>(x % 8001) - 4000.0) / 1000.0;
  }
  return scores;
}

std::vector<double> EchoLM::score(const Session& session) const {
  std::vector<double> scores(byte_vocab::kSize, kOffTrack);
  const std::string prefix = byte_vocab::detokenize(session.generated_ids);
  const bool on_track = prefix.size() == session.generated_ids.size() &&
                        target_.compare(0, prefix.size(), prefix) == 0 &&
                        prefix.size() <= target_.size();
  if (on_track && prefix.size() < target_.size()) {
    scores[static_cast<unsigned char>(target_[prefix.size()])] = kOnTrack;
  } else {
    scores[byte_vocab::kEos] = kOnTrack;
  }
  return scores;
}

BiasedLMConfig BiasedLMConfig::simple(const std::string& trigger, const std::string& with_trigger,
                                      const std::string& without) {
  BiasedLMConfig cfg;
  cfg.answers = {with_trigger, without};
  cfg.base_weights = {{with_trigger, 0.0}, {without, 1.0}};
  cfg.rules.push_back({trigger, {{with_trigger, 2.0}}});
  return cfg;
}

BiasedLMConfig BiasedLMConfig::from_json(const nlohmann::json& j) {
  BiasedLMConfig cfg;
  try {
    cfg.answers = j.at("answers").get<std::vector<std::string>>();
    if (j.contains("base")) cfg.base_weights = j.at("base").get<std::map<std::string, double>>();
    if (j.contains("rules")) {
      for (const auto& r : j.at("rules")) {
        cfg.rules.push_back(
            {r.at("keyword").get<std::string>(), r.at("delta").get<std::map<std::string, double>>()});
      }
    }
    cfg.floor = j.value("floor", cfg.floor);
    cfg.off_track_eos = j.value("off_track_eos", cfg.off_track_eos);
    cfg.max_context = j.value("max_context", cfg.max_context);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("biased LM config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

BiasedLMConfig BiasedLMConfig::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

nlohmann::json BiasedLMConfig::to_json() const {
  nlohmann::json rules_json = nlohmann::json::array();
  for (const auto& r : rules) rules_json.push_back({{"keyword", r.keyword}, {"delta", r.delta}});
  return {{"answers", answers},         {"base", base_weights}, {"rules", rules_json},
          {"floor", floor},             {"off_track_eos", off_track_eos},
          {"max_context", max_context}};
}

void BiasedLMConfig::validate() const {
  if (answers.empty()) throw ConfigError("biased LM needs at least one answer");
  auto known = [&](const std::string& a) {
    return std::find(answers.begin(), answers.end(), a) != answers.end();
  };
  for (const auto& a : answers) {
    if (a.empty()) throw ConfigError("biased LM answers must be non-empty");
  }
  for (const auto& [a, _] : base_weights) {
    if (!known(a)) throw ConfigError("biased LM base weight for unknown answer '" + a + "'");
  }
  for (const auto& r : rules) {
    if (r.keyword.empty()) throw ConfigError("biased LM rule with empty keyword");
    for (const auto& [a, _] : r.delta) {
      if (!known(a)) throw ConfigError("biased LM rule delta for unknown answer '" + a + "'");
    }
  }
}

BiasedInstructionLM::BiasedInstructionLM(BiasedLMConfig config)
    : ByteToyBackend(config.max_context), config_(std::move(config)) {
  config_.validate();
}

std::map<std::string, double> BiasedInstructionLM::answer_weights(std::string_view prompt) const {
  std::map<std::string, double> w;
  for (const auto& a : config_.answers) {
    auto it = config_.base_weights.find(a);
    w[a] = it == config_.base_weights.end() ? 0.0 : it->second;
  }
  for (const auto& rule : config_.rules) {
    if (prompt.find(rule.keyword) == std::string_view::npos) continue;
    for (const auto& [a, d] : rule.delta) w[a] += d;
  }
  return w;
}

std::vector<double> BiasedInstructionLM::score(const Session& session) const {
  std::vector<double> scores(byte_vocab::kSize, config_.floor);
  const bool all_bytes = std::all_of(session.generated_ids.begin(), session.generated_ids.end(),
                                     [](TokenId id) { return id < 256; });
  const std::string prefix = byte_vocab::detokenize(session.generated_ids);
  const auto weights = answer_weights(session.prompt_text);

  std::vector<bool> assigned(byte_vocab::kSize, false);
  bool on_track = false;
  if (all_bytes) {
    for (const auto& a : config_.answers) {
      if (a.size() < prefix.size() || a.compare(0, prefix.size(), prefix) != 0) continue;
      const double w = weights.at(a);
      const std::size_t slot = a.size() == prefix.size()
                                   ? static_cast<std::size_t>(byte_vocab::kEos)
                                   : static_cast<unsigned char>(a[prefix.size()]);
      scores[slot] = assigned[slot] ? std::max(scores[slot], w) : w;
      assigned[slot] = true;
      on_track = true;
    }
  }
  if (!on_track) scores[byte_vocab::kEos] = config_.off_track_eos;
  return scores;
}

}  // namespace idec
