#include <doctest.h>

#include <cmath>
#include <random>

#include "idec/engine.hpp"
#include "idec/errors.hpp"
#include "idec/taskio.hpp"
#include "idec/toy_backends.hpp"

using namespace idec;

namespace {

LogitVector lv(std::vector<double> v) { return LogitVector{std::move(v)}; }

PromptBundle hash_bundle(std::uint64_t i) {
  const std::string q = "Input: item " + std::to_string(i) + "\nOutput: ";
  return {"Definition: do task " + std::to_string(i * 7) + "\n\n" + q, q, q, ""};
}

DecodeConfig config(DecodeMode mode, double eps, std::size_t max_new = 16) {
  DecodeConfig c;
  c.mode = mode;
  c.epsilon = eps;
  c.max_new_tokens = max_new;
  return c;
}

// Argmax through an explicit softmax, computed naively.
std::size_t argmax_of_softmax(const std::vector<double>& v) {
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  std::vector<double> p(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += p[i] = std::exp(v[i] - m);
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (p[i] / s > p[best] / s) best = i;
  return best;
}

}  // namespace

TEST_CASE("combine_logits hand arithmetic") {
  const auto a = combine_logits(lv({2.0, 1.0}), lv({3.0, 0.0}), 0.3);
  CHECK(std::abs(a[0] - 1.1) <= 1e-12);
  CHECK(std::abs(a[1] - 1.0) <= 1e-12);
  CHECK(greedy_token(a) == 0);
  const auto b = combine_logits(lv({2.0, 1.0}), lv({3.0, 0.0}), 0.5);
  CHECK(std::abs(b[0] - 0.5) <= 1e-12);
  CHECK(std::abs(b[1] - 1.0) <= 1e-12);
  CHECK(greedy_token(b) == 1);
  CHECK(combine_logits(lv({2.0, -7.25}), lv({3.0, 11.0}), 0.0) == lv({2.0, -7.25}));
  CHECK_THROWS_AS(combine_logits(lv({1.0}), lv({1.0, 2.0}), 0.3), ValidationError);
}

TEST_CASE("argmax of softmax equals argmax") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-20.0, 20.0);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> v(1 + rng() % 40);
    for (auto& x : v) x = d(rng);
    if (t % 3 == 0) v[rng() % v.size()] = v[0];  // force ties
    CHECK(greedy_token(lv(v)) == static_cast<TokenId>(argmax_of_softmax(v)));
  }
}

TEST_CASE("greedy choices are shift invariant") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> d(-40, 40);
  for (int t = 0; t < 500; ++t) {
    // Quarter-integer values keep every sum exact, so ties survive the shift.
    std::vector<double> z(12), zn(12);
    for (auto& x : z) x = d(rng) / 4.0;
    for (auto& x : zn) x = d(rng) / 4.0;
    const double c = d(rng) / 4.0, cn = d(rng) / 4.0;
    std::vector<double> zs = z, zns = zn;
    for (auto& x : zs) x += c;
    for (auto& x : zns) x += cn;
    CHECK(greedy_token(combine_logits(lv(z), lv(zn), 0.5)) ==
          greedy_token(combine_logits(lv(zs), lv(zns), 0.5)));
  }
}

TEST_CASE("id with epsilon zero reproduces baseline") {
  for (std::uint64_t i = 0; i < 30; ++i) {
    const HashLM lm(i);
    const auto bundle = hash_bundle(i);
    const auto base = decode(bundle, lm, nullptr, config(DecodeMode::baseline, 0.3));
    const auto id = decode(bundle, lm, nullptr, config(DecodeMode::id, 0.0));
    CHECK(base.text == id.text);
    CHECK(base.trace.token_ids == id.trace.token_ids);
    CHECK(id.trace.flips() == 0);
  }
}

TEST_CASE("trace bookkeeping and shared prefixes") {
  const HashLM lm(8);
  const auto bundle = hash_bundle(3);
  const auto r = decode(bundle, lm, nullptr, config(DecodeMode::id, 0.8, 24), {true});
  REQUIRE(r.trace.per_step.size() == r.trace.token_ids.size());
  REQUIRE(r.trace.base_prefixes.size() == r.trace.token_ids.size());
  REQUIRE(r.trace.contrast_prefixes.size() == r.trace.token_ids.size());
  for (std::size_t t = 0; t < r.trace.token_ids.size(); ++t) {
    CHECK(r.trace.base_prefixes[t] == r.trace.contrast_prefixes[t]);
    CHECK(r.trace.base_prefixes[t].size() == t);
    CHECK(r.trace.per_step[t].chosen_id == r.trace.token_ids[t]);
    CHECK(r.trace.per_step[t].contrast_logit_max.has_value());
  }
  CHECK(r.trace.token_ids.size() <= 24);
  const auto again = decode(bundle, lm, nullptr, config(DecodeMode::id, 0.8, 24));
  CHECK(again.text == r.text);
  CHECK(again.trace.token_ids == r.trace.token_ids);
}

TEST_CASE("echo model stops at EOS without emitting it") {
  const EchoLM echo("OK");
  const auto r = decode({"p", "p", "p", ""}, echo, nullptr, config(DecodeMode::baseline, 0.3));
  CHECK(r.text == "OK");
  CHECK(r.trace.stopped_at_eos);
  CHECK(r.trace.token_ids.back() == byte_vocab::kEos);
  const auto capped = decode({"p", "p", "p", ""}, echo, nullptr, config(DecodeMode::baseline, 0.3, 1));
  CHECK(capped.text == "O");
  CHECK_FALSE(capped.trace.stopped_at_eos);
}

TEST_CASE("contrastive decoding step") {
  CHECK(cd_step(lv({3.0, 2.9, -5.0}), lv({4.0, 0.0, 0.0}), 1.0, 0.1) == 1);
  // Identical models: the score is constant over the head, lowest id wins.
  CHECK(cd_step(lv({1.0, 1.2, 1.1, -9.0}), lv({1.0, 1.2, 1.1, -9.0}), 1.0, 0.1) == 0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> e(30), a(30);
    for (auto& x : e) x = d(rng);
    for (auto& x : a) x = d(rng);
    CHECK(cd_step(lv(e), lv(a), 0.5 + (t % 4), 1.0) == greedy_token(lv(e)));
  }
  CHECK_THROWS_AS(cd_step(lv({1.0}), lv({1.0, 2.0}), 1.0, 0.1), ValidationError);
}

TEST_CASE("top-k sampling") {
  const LogitVector z = lv({0.5, 2.0, 1.9, -1.0, 0.0});
  Rng a(42), b(42);
  std::vector<TokenId> xs, ys;
  for (int i = 0; i < 50; ++i) {
    xs.push_back(sample_top_k(z, 3, 0.7, a));
    ys.push_back(sample_top_k(z, 3, 0.7, b));
  }
  CHECK(xs == ys);
  for (TokenId x : xs) CHECK((x == 1 || x == 2 || x == 0));
  Rng c(9);
  for (int i = 0; i < 50; ++i) CHECK(sample_top_k(z, 5, 1e-6, c) == 1);
  for (int i = 0; i < 20; ++i) CHECK(sample_top_k(z, 1, 5.0, c) == 1);

  const HashLM lm(5);
  DecodeConfig cfg = config(DecodeMode::id, 0.3, 20);
  cfg.sampler = SamplerKind::top_k;
  cfg.seed = 17;
  const auto bundle = hash_bundle(1);
  CHECK(decode(bundle, lm, nullptr, cfg).trace.token_ids ==
        decode(bundle, lm, nullptr, cfg).trace.token_ids);
  cfg.temperature = 1e-6;
  DecodeConfig greedy = config(DecodeMode::id, 0.3, 20);
  CHECK(decode(bundle, lm, nullptr, cfg).trace.token_ids ==
        decode(bundle, lm, nullptr, greedy).trace.token_ids);
}

TEST_CASE("configuration and backend pairing errors") {
  const HashLM lm;
  const HashLM other(1);
  const auto bundle = hash_bundle(0);
  DecodeConfig cd = config(DecodeMode::cd, 0.3);
  CHECK_THROWS_AS(cd.validate(), ConfigError);  // tau missing
  cd.cd_tau = 1.0;
  CHECK_NOTHROW(cd.validate());
  CHECK_THROWS_AS(decode(bundle, lm, nullptr, cd), ConfigError);
  CHECK_NOTHROW(decode(bundle, lm, &other, cd));
  cd.sampler = SamplerKind::top_k;
  CHECK_THROWS_AS(cd.validate(), ConfigError);

  DecodeConfig id = config(DecodeMode::id, 0.3);
  id.cd_tau = 1.0;
  CHECK_THROWS_AS(id.validate(), ConfigError);
  id.cd_tau.reset();
  CHECK_THROWS_AS(decode(bundle, lm, &other, id), ConfigError);
  CHECK_THROWS_AS(decode(bundle, lm, nullptr, config(DecodeMode::id_amateur, 0.3)), ConfigError);
  CHECK_THROWS_AS(decode(bundle, lm, &other, config(DecodeMode::baseline, 0.3)), ConfigError);

  DecodeConfig bad = config(DecodeMode::baseline, 0.3);
  bad.sampler = SamplerKind::top_k;
  bad.top_k = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.top_k = 3;
  bad.temperature = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = config(DecodeMode::cd, 0.3);
  bad.cd_tau = 1.0;
  bad.cd_alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  for (auto m : {DecodeMode::baseline, DecodeMode::id, DecodeMode::cd, DecodeMode::id_amateur,
                 DecodeMode::noisy_only})
    CHECK(decode_mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(decode_mode_from_string("beam"), ConfigError);
}

TEST_CASE("id_amateur and noisy_only use the expected prompts") {
  const EchoLM amateur("zz");
  const HashLM expert(2);
  const auto bundle = hash_bundle(4);
  const auto r = decode(bundle, expert, &amateur, config(DecodeMode::id_amateur, 0.3));
  CHECK_FALSE(r.trace.token_ids.empty());
  const auto noisy = decode(bundle, expert, nullptr, config(DecodeMode::noisy_only, 0.3));
  const auto manual = decode({bundle.noisy_prompt, bundle.noisy_prompt, bundle.query_suffix, ""},
                             expert, nullptr, config(DecodeMode::baseline, 0.3));
  CHECK(noisy.trace.token_ids == manual.trace.token_ids);
}

TEST_CASE("opposite instruction flips biased predictions") {
  // Oracle: the two answers differ in the first byte and every later byte is
  // forced, so greedy ID decoding picks True iff
  //   w_T(base) - eps * w_T(noisy) > w_F(base) - eps * w_F(noisy),
  // with ties going to 'F' (the lower byte). Weights come straight from the
  // fixture's keyword table.
  const std::string fx = IDEC_FIXTURES;
  const auto cfg_json = nlohmann::json::parse(read_file(fx + "/toy/biased_lm.json"));
  const auto weight = [&](const std::string& prompt, const std::string& ans) {
    double w = cfg_json.at("base").at(ans).get<double>();
    for (const auto& r : cfg_json.at("rules"))
      if (prompt.find(r.at("keyword").get<std::string>()) != std::string::npos && r.at("delta").contains(ans))
        w += r.at("delta").at(ans).get<double>();
    return w;
  };
  const BiasedInstructionLM lm(BiasedLMConfig::from_json(cfg_json));
  const Task task = load_task(fx + "/toy/tasks/toy_bool_a.json");
  REQUIRE(task.instances.size() == 10);

  std::vector<std::string> baseline;
  for (const auto& inst : task.instances) {
    const auto b = assemble(task, inst, 0, std::nullopt, template_by_name("supnatinst"), {});
    baseline.push_back(decode(b, lm, nullptr, config(DecodeMode::baseline, 0.3)).text);
  }

  for (double eps : {0.0, 0.5}) {
    std::size_t changed = 0;
    for (std::size_t i = 0; i < task.instances.size(); ++i) {
      const auto b = assemble(task, task.instances[i], 0, NoisySpec::opposite(),
                              template_by_name("supnatinst"), {});
      const auto r = decode(b, lm, nullptr, config(DecodeMode::id, eps));
      const double t = weight(b.base_prompt, "True") - eps * weight(b.noisy_prompt, "True");
      const double f = weight(b.base_prompt, "False") - eps * weight(b.noisy_prompt, "False");
      CHECK(r.text == (t > f ? "True" : "False"));
      if (r.text != baseline[i]) ++changed;
    }
    if (eps == 0.0) CHECK(changed == 0);
    else CHECK(changed >= 1);
  }
}
