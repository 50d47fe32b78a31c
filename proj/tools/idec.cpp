// Command-line front end: run, sweep, serve, winrate, degradation.

#include <csignal>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "idec/analysis.hpp"
#include "idec/errors.hpp"
#include "idec/remote_backend.hpp"
#include "idec/runner.hpp"
#include "idec/taskio.hpp"

#ifndef IDEC_DATA_DIR
#define IDEC_DATA_DIR "data"
#endif

namespace {

using nlohmann::json;

struct RunFlags {
  std::string tasks;
  std::size_t instances_per_task = 100;
  std::optional<std::uint64_t> instance_seed;
  std::string labels_fixture;
  std::string word_list = std::string(IDEC_DATA_DIR) + "/words.txt";
  std::string template_name = "supnatinst";
  std::string mode = "baseline";
  std::string noisy;
  std::optional<double> epsilon;
  double trunc_ratio = 0.6;
  std::size_t num_rand_words = 1;
  std::uint64_t noisy_seed = 0;
  std::size_t shots = 0;
  std::optional<std::size_t> top_k;
  double temperature = 0.7;
  std::uint64_t seed = 0;
  std::size_t max_new_tokens = 128;
  std::string backend;
  std::string amateur_backend;
  std::optional<double> cd_tau;
  double cd_alpha = 0.1;
  std::string report;
  bool resume = false;
  int jobs = 1;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--tasks", f.tasks, "Directory of task JSON files")->envname("IDEC_TASKS");
  cmd->add_option("--instances-per-task", f.instances_per_task, "Instances evaluated per task")
      ->envname("IDEC_INSTANCES_PER_TASK");
  cmd->add_option("--instance-seed", f.instance_seed,
                  "Sample instances with this seed instead of taking the first N");
  cmd->add_option("--labels-fixture", f.labels_fixture, "Label-space fixture JSON")
      ->envname("IDEC_LABELS_FIXTURE");
  cmd->add_option("--word-list", f.word_list, "Word list for rand_words")->envname("IDEC_WORD_LIST");
  cmd->add_option("--template", f.template_name, "Prompt template name");
  cmd->add_option("--mode", f.mode, "baseline | id | cd | id_amateur | noisy_only")
      ->envname("IDEC_MODE");
  cmd->add_option("--noisy", f.noisy,
                  "trunc_shuf | null | rand_words | opposite | opposite_plus_base")
      ->envname("IDEC_NOISY");
  cmd->add_option("--epsilon", f.epsilon, "Contrast weight (default 0.3, or 0.2 with shots)")
      ->envname("IDEC_EPSILON");
  cmd->add_option("--trunc-ratio", f.trunc_ratio, "Fraction of words removed by trunc_shuf");
  cmd->add_option("--num-rand-words", f.num_rand_words, "Words drawn by rand_words");
  cmd->add_option("--noisy-seed", f.noisy_seed, "Seed for trunc_shuf and rand_words");
  cmd->add_option("--shots", f.shots, "Positive demonstrations per prompt");
  cmd->add_option("--top-k", f.top_k, "Sample from the top k tokens instead of greedy");
  cmd->add_option("--temperature", f.temperature, "Sampling temperature");
  cmd->add_option("--seed", f.seed, "Sampling seed")->envname("IDEC_SEED");
  cmd->add_option("--max-new-tokens", f.max_new_tokens, "Generation length limit");
  cmd->add_option("--backend", f.backend, "toy:hash[:SEED] | toy:echo:TEXT | toy:biased:PATH | URL")
      ->envname("IDEC_BACKEND");
  cmd->add_option("--amateur-backend", f.amateur_backend, "Amateur model for cd / id_amateur")
      ->envname("IDEC_AMATEUR_BACKEND");
  cmd->add_option("--cd-tau", f.cd_tau, "Amateur temperature (cd mode)");
  cmd->add_option("--cd-alpha", f.cd_alpha, "Plausibility threshold (cd mode)");
  cmd->add_option("--report", f.report, "Report directory")->envname("IDEC_REPORT");
  cmd->add_flag("--resume", f.resume, "Skip work already present in the report directory");
  cmd->add_option("--jobs", f.jobs, "Worker threads over tasks")->envname("IDEC_JOBS");
}

idec::RunSpec to_spec(const RunFlags& f) {
  idec::RunSpec s;
  s.tasks_dir = f.tasks;
  s.instances_per_task = f.instances_per_task;
  s.instance_seed = f.instance_seed;
  if (!f.labels_fixture.empty()) s.labels_fixture = f.labels_fixture;
  s.word_list = f.word_list;
  s.template_name = f.template_name;
  s.shots = f.shots;

  s.decode.mode = idec::decode_mode_from_string(f.mode);
  s.decode.epsilon = f.epsilon.value_or(idec::default_epsilon(f.shots));
  s.decode.max_new_tokens = f.max_new_tokens;
  if (f.top_k) {
    s.decode.sampler = idec::SamplerKind::top_k;
    s.decode.top_k = *f.top_k;
    s.decode.temperature = f.temperature;
  }
  s.decode.seed = f.seed;
  s.decode.cd_tau = f.cd_tau;
  s.decode.cd_alpha = f.cd_alpha;

  if (!f.noisy.empty()) {
    idec::NoisySpec n;
    n.kind = idec::noisy_kind_from_string(f.noisy);
    n.seed = f.noisy_seed;
    if (n.kind == idec::NoisyKind::trunc_shuf) n.trunc_ratio = f.trunc_ratio;
    if (n.kind == idec::NoisyKind::rand_words) n.num_rand_words = f.num_rand_words;
    s.noisy = n;
  }

  s.backend = f.backend;
  if (!f.amateur_backend.empty()) s.amateur_backend = f.amateur_backend;
  s.report_dir = f.report;
  s.resume = f.resume;
  s.jobs = f.jobs;
  return s;
}

idec::RunResult load_result(const std::string& path) {
  return idec::RunResult::from_json(json::parse(idec::read_file(path)));
}

// "name=path" pairs.
std::map<std::string, idec::RunResult> load_named(const std::vector<std::string>& items) {
  std::map<std::string, idec::RunResult> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw idec::ConfigError("expected NAME=PATH, got " + item);
    out.emplace(item.substr(0, eq), load_result(item.substr(eq + 1)));
  }
  return out;
}

idec::LogitServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instructive decoding engine and evaluation harness"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Decode and score every task");
  add_run_flags(run_cmd, run_flags);

  RunFlags sweep_flags;
  idec::EpsilonGrid grid{-0.5, 0.5, 0.01};
  auto* sweep_cmd = app.add_subcommand("sweep", "Run once per epsilon on a grid");
  add_run_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--eps-lo", grid.lo, "Lowest epsilon");
  sweep_cmd->add_option("--eps-hi", grid.hi, "Highest epsilon");
  sweep_cmd->add_option("--eps-step", grid.step, "Grid step");

  std::string serve_backend;
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a backend over the logit wire protocol");
  serve_cmd->add_option("--backend", serve_backend, "Backend to expose")->required();
  serve_cmd->add_option("--host", serve_host, "Bind address");
  serve_cmd->add_option("--port", serve_port, "Port");

  std::string win_a, win_b;
  auto* win_cmd = app.add_subcommand("winrate", "Per-task Rouge-L wins between two reports");
  win_cmd->add_option("a", win_a, "result.json of run A")->required();
  win_cmd->add_option("b", win_b, "result.json of run B")->required();

  std::string deg_baseline;
  std::vector<std::string> deg_noisy, deg_id;
  auto* deg_cmd = app.add_subcommand("degradation", "Correlate noisy-only degradation with ID gain");
  deg_cmd->add_option("--baseline", deg_baseline, "Baseline result.json")->required();
  deg_cmd->add_option("--noisy-only", deg_noisy, "VARIANT=result.json (repeatable)")->required();
  deg_cmd->add_option("--id", deg_id, "VARIANT=result.json (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? idec::kExitOk : idec::kExitUsage;
  }

  try {
    if (*run_cmd) return idec::run(to_spec(run_flags), std::cerr);
    if (*sweep_cmd) return idec::sweep(to_spec(sweep_flags), grid, std::cerr);

    if (*serve_cmd) {
      idec::LogitServer server(idec::make_backend(serve_backend));
      if (!server.bind(serve_host, serve_port)) {
        std::cerr << "error: cannot bind " << serve_host << ":" << serve_port << '\n';
        return idec::kExitRunError;
      }
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cerr << "serving " << serve_backend << " on " << serve_host << ":" << serve_port << '\n';
      server.listen();
      g_server = nullptr;
      return idec::kExitOk;
    }

    if (*win_cmd) {
      const auto w = idec::winning_rate(load_result(win_a), load_result(win_b));
      std::cout << json{{"a_wins", w.a_wins}, {"b_wins", w.b_wins}, {"ties", w.ties}}.dump() << '\n';
      return idec::kExitOk;
    }

    if (*deg_cmd) {
      const auto res = idec::degradation_vs_boost(load_result(deg_baseline), load_named(deg_noisy),
                                                  load_named(deg_id));
      json points = json::array();
      for (const auto& p : res.points) {
        points.push_back({{"variant", p.variant}, {"degradation", p.degradation}, {"boost", p.boost}});
      }
      json task_points = json::array();
      for (const auto& p : res.task_points) {
        task_points.push_back({{"variant", p.variant},
                               {"task_id", p.task_id},
                               {"degradation", p.degradation},
                               {"boost", p.boost}});
      }
      json out{{"points", points}, {"r", res.r}, {"task_points", task_points},
               {"task_r", res.task_r ? json(*res.task_r) : json(nullptr)}};
      std::cout << out.dump(2) << '\n';
      return idec::kExitOk;
    }
  } catch (const idec::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return idec::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return idec::kExitRunError;
  }
  return idec::kExitUsage;
}
