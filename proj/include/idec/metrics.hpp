#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "idec/taskio.hpp"

namespace idec {

struct ScoreRecord {
  double rouge_l = 0.0;
  bool exact_match = false;
  std::optional<bool> adherent;
  std::optional<bool> coherent;

  nlohmann::ordered_json to_json() const;
  bool operator==(const ScoreRecord&) const = default;
};

// Lowercase (ASCII), split on whitespace, drop tokens made only of punctuation.
std::vector<std::string> rouge_tokenize(std::string_view text);

// Longest common subsequence length over token sequences.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// LCS-based F1, maximized over references. 0 for an empty candidate.
double rouge_l(std::string_view candidate, std::span<const std::string> references);

// Trimmed, case-sensitive equality with any reference.
bool exact_match(std::string_view candidate, std::span<const std::string> references);

// Trimmed candidate is a member of the label space. Throws ValidationError
// for an empty label space.
bool label_adherence(std::string_view candidate, const std::set<std::string>& label_space);

// Removes '.', '\n', '?' and '!', trims, lowercases.
std::string coherence_normalize(std::string_view text);

// Normalized candidate equals a normalized keyword of expanded[gold].
// Throws ConfigError when gold has no entry.
bool label_coherence(std::string_view candidate, const std::string& gold,
                     const std::map<std::string, std::set<std::string>>& expanded);

// All metrics for one response. Label metrics are filled only for tasks with
// a label space; each label also counts as its own keyword for coherence.
ScoreRecord score_response(std::string_view response, const Instance& instance, const Task& task);

// Rouge-L for many (candidate, references) pairs; OpenMP-parallel over pairs.
std::vector<double> rouge_l_batch(std::span<const std::string> candidates,
                                  std::span<const std::vector<std::string>> references);

namespace serial {
std::vector<double> rouge_l_batch(std::span<const std::string> candidates,
                                  std::span<const std::vector<std::string>> references);
}  // namespace serial

}  // namespace idec
