#include <doctest.h>

#include <cmath>
#include <random>

#include "idec/backend.hpp"
#include "idec/errors.hpp"
#include "idec/toy_backends.hpp"

using namespace idec;

namespace {

// Independent restatement of the hash model's scoring rule.
std::uint64_t ref_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double ref_hash_score(std::uint64_t seed, const std::string& prompt,
                      const std::vector<TokenId>& ids, std::size_t v) {
  std::uint64_t h = ref_mix(seed);
  for (unsigned char c : prompt) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  for (TokenId id : ids) h = ref_mix(h ^ static_cast<std::uint64_t>(id));
  const std::uint64_t x = ref_mix(h ^ ref_mix(v));
  return (static_cast<double>(x % 8001) - 4000.0) / 1000.0;
}

class FakeBackend final : public Backend {
 public:
  FakeBackend(std::size_t vocab, std::string fingerprint) : meta_{vocab, 0, std::move(fingerprint), 16} {}
  BackendMeta meta() const override { return meta_; }
  LogitVector next_logits(const Session&) const override {
    return LogitVector{std::vector<double>(meta_.vocab_size, 0.0)};
  }
  std::string detokenize(std::span<const TokenId>) const override { return {}; }
  std::string name() const override { return "fake"; }

 private:
  BackendMeta meta_;
};

}  // namespace

TEST_CASE("toy byte backends expose a 258-token vocabulary") {
  const HashLM hash;
  const EchoLM echo("OK");
  for (const Backend* b : {static_cast<const Backend*>(&hash), static_cast<const Backend*>(&echo)}) {
    const BackendMeta m = b->meta();
    CHECK(m.vocab_size == 258);
    CHECK(m.eos_token_id == 257);
    CHECK(m.tokenizer_fingerprint == "byte-v1");
    CHECK(b->meta() == m);
    CHECK_NOTHROW(validate(m));
  }
}

TEST_CASE("meta validation") {
  CHECK_THROWS_AS(validate(BackendMeta{0, 0, "x", 10}), ValidationError);
  CHECK_THROWS_AS(validate(BackendMeta{10, 10, "x", 10}), ValidationError);
  CHECK_THROWS_AS(validate(BackendMeta{10, -1, "x", 10}), ValidationError);
  CHECK_THROWS_AS(validate(BackendMeta{10, 1, "", 10}), ValidationError);
  const BackendMeta m{3, 0, "x", 10};
  CHECK_THROWS_AS(validate(LogitVector{{1.0, 2.0}}, m), ValidationError);
  CHECK_THROWS_AS(validate(LogitVector{{1.0, NAN, 2.0}}, m), ValidationError);
  CHECK_THROWS_AS(validate(LogitVector{{1.0, INFINITY, 2.0}}, m), ValidationError);
}

TEST_CASE("echo model spells its target") {
  const EchoLM echo("OK");
  Session s{"Say OK.", {}};
  auto z = echo.next_logits(s);
  // Table lookup: target[0] is the only on-track token.
  CHECK(std::max_element(z.scores.begin(), z.scores.end()) - z.scores.begin() == 'O');
  CHECK(z[static_cast<std::size_t>('O')] == EchoLM::kOnTrack);
  s.generated_ids.push_back('O');
  z = echo.next_logits(s);
  CHECK(std::max_element(z.scores.begin(), z.scores.end()) - z.scores.begin() == 'K');
  s.generated_ids.push_back('K');
  z = echo.next_logits(s);
  CHECK(std::max_element(z.scores.begin(), z.scores.end()) - z.scores.begin() == byte_vocab::kEos);
}

TEST_CASE("next_logits is a pure function of the session") {
  const HashLM hash(11);
  const auto biased = BiasedInstructionLM(BiasedLMConfig::simple("opposite", "True", "False"));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Session s{"prompt " + std::to_string(rng() % 1000), {}};
    const auto len = rng() % 8;
    for (std::size_t i = 0; i < len; ++i) s.generated_ids.push_back(static_cast<TokenId>(rng() % 256));
    CHECK(hash.next_logits(s) == hash.next_logits(s));
    CHECK(biased.next_logits(s) == biased.next_logits(s));
  }
}

TEST_CASE("hash model matches its scoring rule bit for bit") {
  const HashLM hash(3);
  const Session s{"Definition: test\n\nInput: x\nOutput: ", {72, 105}};
  const auto z = hash.next_logits(s);
  REQUIRE(z.size() == 258);
  for (std::size_t v = 0; v < z.size(); ++v) {
    CHECK(z[v] == ref_hash_score(3, s.prompt_text, s.generated_ids, v));
    CHECK(z[v] >= -4.0);
    CHECK(z[v] <= 4.0);
  }
  CHECK(hash.next_logits({"other prompt", {72, 105}}) != z);
}

TEST_CASE("context overflow raises a length error") {
  const HashLM hash(0, 8);
  CHECK_NOTHROW(hash.next_logits({"abcdef", {1, 2}}));
  CHECK_THROWS_AS(hash.next_logits({"abcdef", {1, 2, 3}}), LengthError);
  CHECK_THROWS_AS(hash.next_logits({"abc", {300}}), ValidationError);
}

TEST_CASE("detokenize") {
  const HashLM hash;
  CHECK(hash.detokenize(std::vector<TokenId>{}).empty());
  const auto ids = byte_vocab::tokenize("True");
  CHECK(hash.detokenize(ids) == "True");
  std::vector<TokenId> with_eos = ids;
  with_eos.push_back(byte_vocab::kEos);
  with_eos.insert(with_eos.begin(), byte_vocab::kBos);
  CHECK(hash.detokenize(with_eos) == "True");
  CHECK_THROWS_AS(hash.detokenize(std::vector<TokenId>{258}), ValidationError);
  CHECK_THROWS_AS(hash.detokenize(std::vector<TokenId>{-1}), ValidationError);
}

TEST_CASE("biased model follows its answer tables") {
  BiasedLMConfig cfg;
  cfg.answers = {"True", "False", "Tru"};
  cfg.base_weights = {{"True", 2.0}, {"False", 1.0}, {"Tru", 0.5}};
  cfg.rules = {{"trigger", {{"False", 3.0}}}};
  const BiasedInstructionLM lm(cfg);

  auto z = lm.next_logits({"no keyword", {}});
  CHECK(z[static_cast<std::size_t>('T')] == 2.0);  // max over True and Tru
  CHECK(z[static_cast<std::size_t>('F')] == 1.0);
  CHECK(z[0] == -8.0);
  CHECK(z[byte_vocab::kEos] == -8.0);

  z = lm.next_logits({"has trigger", {}});
  CHECK(z[static_cast<std::size_t>('F')] == 4.0);

  z = lm.next_logits({"no keyword", byte_vocab::tokenize("Tru")});
  CHECK(z[static_cast<std::size_t>('e')] == 2.0);
  CHECK(z[byte_vocab::kEos] == 0.5);  // "Tru" is complete

  z = lm.next_logits({"no keyword", byte_vocab::tokenize("X")});
  CHECK(z[byte_vocab::kEos] == cfg.off_track_eos);

  const auto w = lm.answer_weights("trigger");
  CHECK(w.at("False") == 4.0);
}

TEST_CASE("simple biased config switches answers on the trigger") {
  const BiasedInstructionLM lm(BiasedLMConfig::simple("opposite", "True", "False"));
  auto greedy = [&](const std::string& prompt) {
    Session s{prompt, {}};
    for (int i = 0; i < 10; ++i) {
      const auto z = lm.next_logits(s);
      const auto id = static_cast<TokenId>(std::max_element(z.scores.begin(), z.scores.end()) -
                                           z.scores.begin());
      if (id == byte_vocab::kEos) break;
      s.generated_ids.push_back(id);
    }
    return lm.detokenize(s.generated_ids);
  };
  CHECK(greedy("answer the opposite") == "True");
  CHECK(greedy("answer plainly") == "False");
}

TEST_CASE("biased config validation") {
  CHECK_THROWS_AS(BiasedLMConfig::from_json(nlohmann::json{{"answers", nlohmann::json::array()}}),
                  ConfigError);
  CHECK_THROWS_AS(BiasedLMConfig::from_json(
                      {{"answers", {"a"}}, {"rules", {{{"keyword", "k"}, {"delta", {{"b", 1.0}}}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(BiasedLMConfig::from_json({{"nothing", 1}}), ParseError);
  const auto cfg = BiasedLMConfig::load(std::string(IDEC_FIXTURES) + "/toy/biased_lm.json");
  CHECK(BiasedLMConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
}

TEST_CASE("paired compatibility") {
  const HashLM a;
  const EchoLM b("x");
  CHECK_NOTHROW(check_compatible(a, b));
  CHECK_THROWS_AS(check_compatible(a, FakeBackend(258, "other")), ValidationError);
  CHECK_THROWS_AS(check_compatible(a, FakeBackend(100, "byte-v1")), ValidationError);
}

TEST_CASE("caching backend returns the inner logits") {
  auto inner = std::make_shared<HashLM>(9);
  const CachingBackend cache(inner, 4);
  const Session s{"p", {1, 2, 3}};
  CHECK(cache.next_logits(s) == inner->next_logits(s));
  CHECK(cache.next_logits(s) == inner->next_logits(s));
  CHECK(cache.hits() == 1);
  CHECK(cache.misses() == 1);
  for (int i = 0; i < 10; ++i) {
    const Session t{"q" + std::to_string(i), {}};
    CHECK(cache.next_logits(t) == inner->next_logits(t));
  }
  CHECK(cache.meta() == inner->meta());
}
