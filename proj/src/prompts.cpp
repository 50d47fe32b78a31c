#include "idec/prompts.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "idec/errors.hpp"
#include "idec/rng.hpp"

namespace idec {

namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(std::move(w));
  return words;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::string fill(std::string_view pattern, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(pattern.size());
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] == '{') {
      const auto close = pattern.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(pattern.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += pattern[i++];
  }
  return out;
}

const std::map<std::string, Template, std::less<>>& registry() {
  static const std::map<std::string, Template, std::less<>> templates = {
      {"supnatinst",
       {"supnatinst", "Definition: {def}\n\n", "Positive Example {i}-\nInput: {in}\nOutput: {out}\n\n",
        "Now complete the following example-\nInput: {x}\nOutput: "}},
      {"alpaca",
       {"alpaca", "### Instruction:\n{def}\n\n", "### Example {i}\nInput: {in}\nOutput: {out}\n\n",
        "### Input:\n{x}\n\n### Response:\n"}},
  };
  return templates;
}

}  // namespace

std::string to_string(NoisyKind kind) {
  switch (kind) {
    case NoisyKind::trunc_shuf: return "trunc_shuf";
    case NoisyKind::null: return "null";
    case NoisyKind::rand_words: return "rand_words";
    case NoisyKind::opposite: return "opposite";
    case NoisyKind::opposite_plus_base: return "opposite_plus_base";
  }
  return "unknown";
}

NoisyKind noisy_kind_from_string(std::string_view name) {
  std::string n(name);
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "trunc_shuf") return NoisyKind::trunc_shuf;
  if (n == "null") return NoisyKind::null;
  if (n == "rand_words") return NoisyKind::rand_words;
  if (n == "opposite") return NoisyKind::opposite;
  if (n == "opposite_plus_base") return NoisyKind::opposite_plus_base;
  throw ConfigError("unknown noisy instruction kind: " + std::string(name));
}

NoisySpec NoisySpec::trunc_shuf(double ratio, std::uint64_t seed) {
  return {NoisyKind::trunc_shuf, ratio, std::nullopt, seed};
}
NoisySpec NoisySpec::null_instruction() { return {NoisyKind::null, std::nullopt, std::nullopt, 0}; }
NoisySpec NoisySpec::rand_words(std::size_t count, std::uint64_t seed) {
  return {NoisyKind::rand_words, std::nullopt, count, seed};
}
NoisySpec NoisySpec::opposite() { return {NoisyKind::opposite, std::nullopt, std::nullopt, 0}; }
NoisySpec NoisySpec::opposite_plus_base() {
  return {NoisyKind::opposite_plus_base, std::nullopt, std::nullopt, 0};
}

void NoisySpec::validate() const {
  if (kind == NoisyKind::trunc_shuf) {
    if (!trunc_ratio) throw ValidationError("trunc_shuf requires trunc_ratio");
    if (!(*trunc_ratio >= 0.0 && *trunc_ratio <= 1.0)) {
      throw ValidationError("trunc_ratio must lie in [0, 1]");
    }
  } else if (trunc_ratio) {
    throw ValidationError("trunc_ratio is only valid for trunc_shuf");
  }
  if (kind == NoisyKind::rand_words) {
    if (!num_rand_words || *num_rand_words < 1) {
      throw ValidationError("rand_words requires num_rand_words >= 1");
    }
  } else if (num_rand_words) {
    throw ValidationError("num_rand_words is only valid for rand_words");
  }
}

nlohmann::json NoisySpec::to_json() const {
  nlohmann::json j{{"kind", to_string(kind)}, {"seed", seed}};
  if (trunc_ratio) j["trunc_ratio"] = *trunc_ratio;
  if (num_rand_words) j["num_rand_words"] = *num_rand_words;
  if (kind == NoisyKind::opposite || kind == NoisyKind::opposite_plus_base) {
    j["directive"] = std::string(kOppositeDirective);
  }
  return j;
}

std::string make_noisy(std::string_view definition, const NoisySpec& spec,
                       const std::vector<std::string>& word_list) {
  spec.validate();
  switch (spec.kind) {
    case NoisyKind::null:
      return {};
    case NoisyKind::opposite:
      return std::string(kOppositeDirective);
    case NoisyKind::opposite_plus_base:
      return std::string(kOppositeDirective) + std::string(definition);
    case NoisyKind::rand_words: {
      if (word_list.empty()) throw ConfigError("rand_words needs a non-empty word list");
      Rng rng(spec.seed);
      std::vector<std::string> picked;
      for (std::size_t i = 0; i < *spec.num_rand_words; ++i) {
        picked.push_back(word_list[uniform_below(rng, word_list.size())]);
      }
      return join(picked);
    }
    case NoisyKind::trunc_shuf: {
      std::vector<std::string> words = split_words(definition);
      const std::size_t total = words.size();
      // The epsilon guards products like 0.6 * 5 that land a hair under an integer.
      const auto removed = static_cast<std::size_t>(
          std::floor(*spec.trunc_ratio * static_cast<double>(total) + 1e-9));
      Rng rng(spec.seed);
      // Choose the removed positions with a partial Fisher-Yates over indices.
      std::vector<std::size_t> idx(total);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      for (std::size_t i = 0; i < removed; ++i) {
        const std::size_t j = i + uniform_below(rng, total - i);
        std::swap(idx[i], idx[j]);
      }
      std::vector<std::size_t> kept(idx.begin() + static_cast<std::ptrdiff_t>(removed), idx.end());
      std::sort(kept.begin(), kept.end());
      std::vector<std::string> survivors;
      survivors.reserve(kept.size());
      for (std::size_t k : kept) survivors.push_back(std::move(words[k]));
      for (std::size_t i = survivors.size(); i > 1; --i) {
        std::swap(survivors[i - 1], survivors[uniform_below(rng, i)]);
      }
      return join(survivors);
    }
  }
  throw ValidationError("unhandled noisy kind");
}

const Template& template_by_name(std::string_view name) {
  const auto& reg = registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw ConfigError("unknown prompt template: " + std::string(name));
  return it->second;
}

std::vector<std::string> template_names() {
  std::vector<std::string> names;
  for (const auto& [n, _] : registry()) names.push_back(n);
  return names;
}

PromptBundle assemble(const Task& task, const Instance& instance, std::size_t shots,
                      const std::optional<NoisySpec>& spec, const Template& tmpl,
                      const std::vector<std::string>& word_list) {
  if (shots > task.positive_examples.size()) {
    throw ConfigError("task " + task.id + ": " + std::to_string(shots) +
                      " shots requested but only " +
                      std::to_string(task.positive_examples.size()) + " demonstrations available");
  }
  std::string demos;
  for (std::size_t i = 0; i < shots; ++i) {
    const auto& d = task.positive_examples[i];
    demos += fill(tmpl.demo_block, {{"i", std::to_string(i + 1)}, {"in", d.input}, {"out", d.output}});
  }

  PromptBundle bundle;
  bundle.query_suffix = fill(tmpl.query_block, {{"x", instance.input}});
  bundle.base_prompt = fill(tmpl.definition_block, {{"def", task.definition}}) + demos +
                       bundle.query_suffix;
  if (!spec) {
    bundle.noisy_prompt = bundle.base_prompt;
    return bundle;
  }
  bundle.noisy_instruction = make_noisy(task.definition, *spec, word_list);
  // Null drops the whole definition block, header included.
  const std::string header = spec->kind == NoisyKind::null
                                 ? std::string()
                                 : fill(tmpl.definition_block, {{"def", bundle.noisy_instruction}});
  bundle.noisy_prompt = header + demos + bundle.query_suffix;
  return bundle;
}

std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return words;
}

}  // namespace idec
