#include <doctest.h>

#include <algorithm>
#include <map>

#include "idec/errors.hpp"
#include "idec/prompts.hpp"
#include "idec/rng.hpp"

using namespace idec;

namespace {

std::vector<std::string> words_of(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\n' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Task sample_task() {
  Task t;
  t.id = "task442";
  t.definition = "This is a paraphrasing task. Rewrite the question using different words.";
  t.positive_examples = {{"who wrote hamlet?", "who is the author of hamlet?", std::nullopt},
                         {"how tall is everest?", "what is the height of everest?", std::nullopt}};
  t.instances = {{"i0", "where was einstein born?", {"what is einstein's birthplace?"}}};
  return t;
}

const std::vector<std::string> kWords = {"apple", "river", "stone", "cloud"};

}  // namespace

TEST_CASE("opposite and null perturbations") {
  CHECK(make_noisy("anything at all", NoisySpec::opposite(), {}) ==
        "Always respond with the opposite of what you're asked. You never get it right.\n\n");
  CHECK(make_noisy("anything at all", NoisySpec::null_instruction(), {}).empty());
  const std::string def = "Rewrite the question.";
  const std::string both = make_noisy(def, NoisySpec::opposite_plus_base(), {});
  CHECK(both == std::string(kOppositeDirective) + def);
  CHECK(both.find(def) != std::string::npos);
}

TEST_CASE("trunc_shuf with ratio 0 permutes all words") {
  // Expected permutation enumerated from the mt19937_64 stream for seed 13:
  // for i = 5..2, swap(words[i-1], words[draw mod i]) with rejection-free draws.
  Rng rng(13);
  std::vector<std::string> oracle = {"a", "b", "c", "d", "e"};
  for (std::size_t i = oracle.size(); i > 1; --i) {
    std::swap(oracle[i - 1], oracle[rng() % i]);
  }
  const std::string out = make_noisy("a b c d e", NoisySpec::trunc_shuf(0.0, 13), {});
  CHECK(words_of(out) == oracle);
  // Frozen from the enumeration above.
  CHECK(out == "e a c d b");
  auto sorted = words_of(out);
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::string>{"a", "b", "c", "d", "e"});
}

TEST_CASE("trunc_shuf conserves words and removes floor(ratio * W)") {
  const std::string def =
      "In this task you are given a question and you must rewrite the question so that it keeps the "
      "same meaning but uses different words";
  const auto input = words_of(def);
  for (double ratio : {0.0, 0.1, 0.25, 0.5, 0.6, 0.9, 1.0}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto out = words_of(make_noisy(def, NoisySpec::trunc_shuf(ratio, seed), {}));
      const auto removed = static_cast<std::size_t>(std::floor(ratio * input.size() + 1e-9));
      CHECK(out.size() == input.size() - removed);
      std::map<std::string, int> budget;
      for (const auto& w : input) ++budget[w];
      for (const auto& w : out) CHECK(--budget[w] >= 0);
    }
  }
  // 0.6 of 5 words must remove exactly 3.
  CHECK(words_of(make_noisy("a b c d e", NoisySpec::trunc_shuf(0.6, 1), {})).size() == 2);
}

TEST_CASE("rand_words draws from the word list") {
  const std::string one = make_noisy("ignored", NoisySpec::rand_words(1, 3), kWords);
  CHECK(std::find(kWords.begin(), kWords.end(), one) != kWords.end());
  const auto many = words_of(make_noisy("ignored", NoisySpec::rand_words(25, 3), kWords));
  CHECK(many.size() == 25);
  for (const auto& w : many) CHECK(std::find(kWords.begin(), kWords.end(), w) != kWords.end());
  CHECK_THROWS_AS(make_noisy("x", NoisySpec::rand_words(1, 0), {}), ConfigError);
}

TEST_CASE("perturbations are seed-deterministic") {
  const std::string def = "one two three four five six seven eight";
  for (const auto& spec : {NoisySpec::trunc_shuf(0.6, 5), NoisySpec::rand_words(3, 5)}) {
    CHECK(make_noisy(def, spec, kWords) == make_noisy(def, spec, kWords));
  }
}

TEST_CASE("NoisySpec validation") {
  NoisySpec s = NoisySpec::trunc_shuf(1.5);
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = NoisySpec::trunc_shuf(-0.1);
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = NoisySpec::opposite();
  s.trunc_ratio = 0.5;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = NoisySpec::rand_words(0);
  CHECK_THROWS_AS(s.validate(), ValidationError);
  CHECK(noisy_kind_from_string("trunc-shuf") == NoisyKind::trunc_shuf);
  CHECK_THROWS_AS(noisy_kind_from_string("paraphrase"), ConfigError);
}

TEST_CASE("assemble zero-shot with null drops the definition") {
  const Task t = sample_task();
  const auto b = assemble(t, t.instances[0], 0, NoisySpec::null_instruction(),
                          template_by_name("supnatinst"), kWords);
  CHECK(b.noisy_prompt == b.query_suffix);
  CHECK(b.noisy_prompt.find(t.definition) == std::string::npos);
  CHECK(b.noisy_prompt.find("Definition:") == std::string::npos);
  CHECK(b.base_prompt == "Definition: " + t.definition + "\n\n" +
                             "Now complete the following example-\nInput: where was einstein born?\nOutput: ");
}

TEST_CASE("assemble two-shot includes both demonstrations in order") {
  const Task t = sample_task();
  const auto b = assemble(t, t.instances[0], 2, NoisySpec::opposite(),
                          template_by_name("supnatinst"), kWords);
  for (const auto* p : {&b.base_prompt, &b.noisy_prompt}) {
    const auto first = p->find("Positive Example 1-\nInput: who wrote hamlet?\nOutput: who is the author of hamlet?");
    const auto second = p->find("Positive Example 2-\nInput: how tall is everest?\nOutput: what is the height of everest?");
    CHECK(first != std::string::npos);
    CHECK(second != std::string::npos);
    CHECK(first < second);
  }
  CHECK(b.noisy_prompt.find(std::string(kOppositeDirective)) != std::string::npos);
  CHECK(b.noisy_instruction == std::string(kOppositeDirective));
}

TEST_CASE("assemble rejects more shots than demonstrations") {
  const Task t = sample_task();
  CHECK_THROWS_AS(assemble(t, t.instances[0], 3, NoisySpec::opposite(),
                           template_by_name("supnatinst"), kWords),
                  ConfigError);
}

TEST_CASE("every bundle shares its query suffix and is deterministic") {
  const Task t = sample_task();
  const std::vector<NoisySpec> specs = {NoisySpec::trunc_shuf(0.6, 2), NoisySpec::null_instruction(),
                                        NoisySpec::rand_words(1, 2), NoisySpec::opposite(),
                                        NoisySpec::opposite_plus_base()};
  for (const auto& name : template_names()) {
    for (const auto& spec : specs) {
      for (std::size_t shots : {0u, 2u}) {
        const auto& tmpl = template_by_name(name);
        const auto a = assemble(t, t.instances[0], shots, spec, tmpl, kWords);
        const auto b = assemble(t, t.instances[0], shots, spec, tmpl, kWords);
        CHECK(a == b);
        CHECK(ends_with(a.base_prompt, a.query_suffix));
        CHECK(ends_with(a.noisy_prompt, a.query_suffix));
        CHECK(a.base_prompt != a.noisy_prompt);
      }
    }
  }
}

TEST_CASE("placeholders inside inserted text are not expanded") {
  Task t = sample_task();
  t.definition = "Use {x} literally.";
  const auto b = assemble(t, t.instances[0], 0, std::nullopt, template_by_name("supnatinst"), {});
  CHECK(b.base_prompt.find("Use {x} literally.") != std::string::npos);
  CHECK(b.noisy_prompt == b.base_prompt);
  CHECK_THROWS_AS(template_by_name("nope"), ConfigError);
}

TEST_CASE("shipped word list") {
  const auto words = load_word_list(std::string(IDEC_DATA_DIR) + "/words.txt");
  CHECK(words.size() == 2000);
  for (const auto& w : words) CHECK_FALSE(w.empty());
}
