#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "idec/taskio.hpp"

namespace idec {

// Directive used by the `opposite` perturbation.
inline constexpr std::string_view kOppositeDirective =
    "Always respond with the opposite of what you're asked. You never get it right.\n\n";

enum class NoisyKind { trunc_shuf, null, rand_words, opposite, opposite_plus_base };

std::string to_string(NoisyKind kind);
NoisyKind noisy_kind_from_string(std::string_view name);

// Describes how the noisy instruction is derived from the task definition.
// trunc_ratio is the fraction of words removed; it is only meaningful for
// trunc_shuf, and num_rand_words only for rand_words.
struct NoisySpec {
  NoisyKind kind = NoisyKind::opposite;
  std::optional<double> trunc_ratio;
  std::optional<std::size_t> num_rand_words;
  std::uint64_t seed = 0;

  static NoisySpec trunc_shuf(double ratio = 0.6, std::uint64_t seed = 0);
  static NoisySpec null_instruction();
  static NoisySpec rand_words(std::size_t count = 1, std::uint64_t seed = 0);
  static NoisySpec opposite();
  static NoisySpec opposite_plus_base();

  void validate() const;
  nlohmann::json to_json() const;

  bool operator==(const NoisySpec&) const = default;
};

// Returns the perturbed instruction. Throws ConfigError for rand_words with
// an empty word list and ValidationError for a malformed spec.
std::string make_noisy(std::string_view definition, const NoisySpec& spec,
                       const std::vector<std::string>& word_list);

// Prompt layout. Each block is a pattern with `{name}` placeholders:
// definition_block uses {def}; demo_block uses {i}, {in}, {out};
// query_block uses {x}. Placeholders are substituted in a single pass, so
// text inserted for one placeholder is never re-expanded.
struct Template {
  std::string name;
  std::string definition_block;
  std::string demo_block;
  std::string query_block;
};

// Known names: "supnatinst" (default), "alpaca".
const Template& template_by_name(std::string_view name);
std::vector<std::string> template_names();

struct PromptBundle {
  std::string base_prompt;
  std::string noisy_prompt;
  std::string query_suffix;
  // The perturbed instruction text, kept for reporting.
  std::string noisy_instruction;

  bool operator==(const PromptBundle&) const = default;
};

// Builds the (base, noisy) prompt pair for one instance. `spec` may be
// empty for modes that never look at the noisy prompt; the noisy prompt then
// equals the base prompt. Throws ConfigError if `shots` exceeds the task's
// positive examples.
PromptBundle assemble(const Task& task, const Instance& instance, std::size_t shots,
                      const std::optional<NoisySpec>& spec, const Template& tmpl,
                      const std::vector<std::string>& word_list);

// One word per line; blank lines are skipped.
std::vector<std::string> load_word_list(const std::filesystem::path& path);

}  // namespace idec
