#include "idec/metrics.hpp"

#include <algorithm>
#include <cctype>

#include "idec/errors.hpp"

namespace idec {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool punctuation_only(std::string_view tok) {
  return std::all_of(tok.begin(), tok.end(),
                     [](unsigned char c) { return std::ispunct(c) != 0; });
}

}  // namespace

nlohmann::ordered_json ScoreRecord::to_json() const {
  nlohmann::ordered_json j{{"rouge_l", rouge_l}, {"exact_match", exact_match}};
  if (adherent) j["adherent"] = *adherent;
  if (coherent) j["coherent"] = *coherent;
  return j;
}

std::vector<std::string> rouge_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !punctuation_only(cur)) tokens.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (is_space(c)) {
      flush();
    } else {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return tokens;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  // One rolling row over b.
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = a[i - 1] == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

double rouge_l(std::string_view candidate, std::span<const std::string> references) {
  const auto cand = rouge_tokenize(candidate);
  if (cand.empty()) return 0.0;
  double best = 0.0;
  for (const auto& ref_text : references) {
    const auto ref = rouge_tokenize(ref_text);
    if (ref.empty()) continue;
    // 2PR / (P + R) with P = lcs/|C| and R = lcs/|R| reduces to
    // 2 lcs / (|C| + |R|), which is exact for small integer ratios.
    const auto lcs = static_cast<double>(lcs_length(cand, ref));
    const double f1 = 2.0 * lcs / static_cast<double>(cand.size() + ref.size());
    best = std::max(best, f1);
  }
  return best;
}

bool exact_match(std::string_view candidate, std::span<const std::string> references) {
  const auto c = trim(candidate);
  return std::any_of(references.begin(), references.end(),
                     [&](const std::string& r) { return trim(r) == c; });
}

bool label_adherence(std::string_view candidate, const std::set<std::string>& label_space) {
  if (label_space.empty()) throw ValidationError("label_adherence: empty label space");
  const auto c = trim(candidate);
  return std::any_of(label_space.begin(), label_space.end(),
                     [&](const std::string& l) { return l == c; });
}

std::string coherence_normalize(std::string_view text) {
  std::string stripped;
  stripped.reserve(text.size());
  for (char c : text) {
    if (c == '.' || c == '\n' || c == '?' || c == '!') continue;
    stripped += c;
  }
  std::string out(trim(stripped));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool label_coherence(std::string_view candidate, const std::string& gold,
                     const std::map<std::string, std::set<std::string>>& expanded) {
  auto it = expanded.find(gold);
  if (it == expanded.end()) {
    throw ConfigError("label_coherence: gold label '" + gold + "' has no expanded keywords");
  }
  const std::string c = coherence_normalize(candidate);
  return std::any_of(it->second.begin(), it->second.end(),
                     [&](const std::string& k) { return coherence_normalize(k) == c; });
}

ScoreRecord score_response(std::string_view response, const Instance& instance, const Task& task) {
  ScoreRecord rec;
  rec.rouge_l = rouge_l(response, instance.references);
  rec.exact_match = exact_match(response, instance.references);
  if (task.label_space) {
    rec.adherent = label_adherence(response, *task.label_space);
    std::map<std::string, std::set<std::string>> keywords;
    for (const auto& label : *task.label_space) keywords[label].insert(label);
    if (task.expanded_labels) {
      for (const auto& [label, ks] : *task.expanded_labels) keywords[label].insert(ks.begin(), ks.end());
    }
    bool coherent = false;
    for (const auto& gold : instance.references) {
      if (keywords.contains(gold) && label_coherence(response, gold, keywords)) {
        coherent = true;
        break;
      }
    }
    rec.coherent = coherent;
  }
  return rec;
}

std::vector<double> rouge_l_batch(std::span<const std::string> candidates,
                                  std::span<const std::vector<std::string>> references) {
  if (candidates.size() != references.size()) {
    throw ValidationError("rouge_l_batch: candidate/reference count mismatch");
  }
  std::vector<double> out(candidates.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic, 16) if (n >= 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = rouge_l(candidates[i], references[i]);
  return out;
}

namespace serial {

std::vector<double> rouge_l_batch(std::span<const std::string> candidates,
                                  std::span<const std::vector<std::string>> references) {
  if (candidates.size() != references.size()) {
    throw ValidationError("rouge_l_batch: candidate/reference count mismatch");
  }
  std::vector<double> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.push_back(rouge_l(candidates[i], references[i]));
  }
  return out;
}

}  // namespace serial

}  // namespace idec
