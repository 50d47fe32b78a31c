#include "idec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "idec/errors.hpp"

namespace idec {

namespace {

using nlohmann::json;

json means_to_json(const MetricMeans& m) {
  json j{{"rouge_l", m.rouge_l}, {"exact_match", m.exact_match}};
  if (m.label_adherence) j["label_adherence"] = *m.label_adherence;
  if (m.label_coherence) j["label_coherence"] = *m.label_coherence;
  return j;
}

MetricMeans means_from_json(const json& j) {
  MetricMeans m;
  m.rouge_l = j.at("rouge_l").get<double>();
  m.exact_match = j.at("exact_match").get<double>();
  if (j.contains("label_adherence")) m.label_adherence = j.at("label_adherence").get<double>();
  if (j.contains("label_coherence")) m.label_coherence = j.at("label_coherence").get<double>();
  return m;
}

std::string fmt_double(double v) { return json(v).dump(); }

void require_unit(const json& obj, const char* key, const std::string& where, bool optional) {
  if (!obj.contains(key)) {
    if (optional) return;
    throw ValidationError(where + ": missing '" + key + "'");
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw ValidationError(where + ": '" + key + "' must be a number");
  const double d = v.get<double>();
  if (!(d >= 0.0 && d <= 1.0)) throw ValidationError(where + ": '" + key + "' outside [0, 1]");
}

void require_same_tasks(const RunResult& a, const RunResult& b, const std::string& what) {
  if (a.per_task.size() != b.per_task.size() ||
      !std::equal(a.per_task.begin(), a.per_task.end(), b.per_task.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw ValidationError(what + ": runs cover different task sets");
  }
}

}  // namespace

json RunResult::to_json() const {
  json per = json::object();
  for (const auto& [id, ts] : per_task) {
    json t = means_to_json(ts.means);
    t["n_scored"] = ts.n_scored;
    t["n_errors"] = ts.n_errors;
    per[id] = std::move(t);
  }
  return {{"config", config}, {"per_task", per}, {"overall", means_to_json(overall)}};
}

RunResult RunResult::from_json(const json& j) {
  validate_run_result(j);
  RunResult r;
  r.config = j.at("config");
  for (const auto& [id, t] : j.at("per_task").items()) {
    TaskScores ts;
    ts.means = means_from_json(t);
    ts.n_scored = t.at("n_scored").get<std::size_t>();
    ts.n_errors = t.at("n_errors").get<std::size_t>();
    r.per_task.emplace(id, ts);
  }
  r.overall = means_from_json(j.at("overall"));
  return r;
}

std::string RunResult::to_csv() const {
  std::ostringstream out;
  out << "task_id,metric,value\n";
  auto rows = [&](const std::string& id, const MetricMeans& m) {
    out << id << ",rouge_l," << fmt_double(m.rouge_l) << '\n';
    out << id << ",exact_match," << fmt_double(m.exact_match) << '\n';
    if (m.label_adherence) out << id << ",label_adherence," << fmt_double(*m.label_adherence) << '\n';
    if (m.label_coherence) out << id << ",label_coherence," << fmt_double(*m.label_coherence) << '\n';
  };
  for (const auto& [id, ts] : per_task) rows(id, ts.means);
  rows("__overall__", overall);
  return out.str();
}

void validate_run_result(const json& j) {
  if (!j.is_object()) throw ValidationError("run result: not an object");
  for (const char* key : {"config", "per_task", "overall"}) {
    if (!j.contains(key)) throw ValidationError(std::string("run result: missing '") + key + "'");
  }
  if (!j.at("config").is_object()) throw ValidationError("run result: 'config' must be an object");
  if (!j.at("per_task").is_object()) throw ValidationError("run result: 'per_task' must be an object");
  for (const auto& [id, t] : j.at("per_task").items()) {
    const std::string where = "run result task " + id;
    if (!t.is_object()) throw ValidationError(where + ": not an object");
    require_unit(t, "rouge_l", where, false);
    require_unit(t, "exact_match", where, false);
    require_unit(t, "label_adherence", where, true);
    require_unit(t, "label_coherence", where, true);
    for (const char* key : {"n_scored", "n_errors"}) {
      if (!t.contains(key) || !t.at(key).is_number_unsigned()) {
        throw ValidationError(where + ": '" + key + "' must be a non-negative integer");
      }
    }
  }
  const json& o = j.at("overall");
  if (!o.is_object()) throw ValidationError("run result: 'overall' must be an object");
  require_unit(o, "rouge_l", "run result overall", false);
  require_unit(o, "exact_match", "run result overall", false);
  require_unit(o, "label_adherence", "run result overall", true);
  require_unit(o, "label_coherence", "run result overall", true);
}

TaskScores summarize(const std::vector<InstanceRecord>& records) {
  TaskScores ts;
  double rouge = 0.0, em = 0.0, la = 0.0, lc = 0.0;
  std::size_t n_la = 0, n_lc = 0;
  for (const auto& r : records) {
    if (!r.scores) {
      ++ts.n_errors;
      continue;
    }
    ++ts.n_scored;
    rouge += r.scores->rouge_l;
    em += r.scores->exact_match ? 1.0 : 0.0;
    if (r.scores->adherent) {
      la += *r.scores->adherent ? 1.0 : 0.0;
      ++n_la;
    }
    if (r.scores->coherent) {
      lc += *r.scores->coherent ? 1.0 : 0.0;
      ++n_lc;
    }
  }
  if (ts.n_scored > 0) {
    ts.means.rouge_l = rouge / static_cast<double>(ts.n_scored);
    ts.means.exact_match = em / static_cast<double>(ts.n_scored);
  }
  if (n_la) ts.means.label_adherence = la / static_cast<double>(n_la);
  if (n_lc) ts.means.label_coherence = lc / static_cast<double>(n_lc);
  return ts;
}

MetricMeans overall_means(const std::map<std::string, TaskScores>& per_task) {
  MetricMeans m;
  double rouge = 0.0, em = 0.0, la = 0.0, lc = 0.0;
  std::size_t n = 0, n_la = 0, n_lc = 0;
  for (const auto& [_, ts] : per_task) {
    if (ts.n_scored == 0) continue;
    ++n;
    rouge += ts.means.rouge_l;
    em += ts.means.exact_match;
    if (ts.means.label_adherence) {
      la += *ts.means.label_adherence;
      ++n_la;
    }
    if (ts.means.label_coherence) {
      lc += *ts.means.label_coherence;
      ++n_lc;
    }
  }
  if (n) {
    m.rouge_l = rouge / static_cast<double>(n);
    m.exact_match = em / static_cast<double>(n);
  }
  if (n_la) m.label_adherence = la / static_cast<double>(n_la);
  if (n_lc) m.label_coherence = lc / static_cast<double>(n_lc);
  return m;
}

RunResult make_run_result(const std::vector<TaskOutcome>& outcomes, json config) {
  RunResult r;
  r.config = std::move(config);
  for (const auto& o : outcomes) r.per_task[o.task_id] = summarize(o.records);
  r.overall = overall_means(r.per_task);
  return r;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("pearson: series differ in length");
  if (xs.size() < 2) throw ValidationError("pearson: need at least two points");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedCorrelationError("pearson: zero variance, correlation undefined");
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

DegradationAnalysis degradation_vs_boost(const RunResult& baseline,
                                         const std::map<std::string, RunResult>& noisy_only,
                                         const std::map<std::string, RunResult>& id_runs) {
  std::set<std::string> variants;
  for (const auto& [v, _] : noisy_only) variants.insert(v);
  std::set<std::string> id_variants;
  for (const auto& [v, _] : id_runs) id_variants.insert(v);
  if (variants != id_variants) {
    throw ValidationError("degradation_vs_boost: noisy-only and id runs cover different variants");
  }

  DegradationAnalysis out;
  std::vector<double> xs, ys, txs, tys;
  for (const auto& v : variants) {
    const RunResult& noisy = noisy_only.at(v);
    const RunResult& id = id_runs.at(v);
    require_same_tasks(baseline, noisy, "degradation_vs_boost");
    require_same_tasks(baseline, id, "degradation_vs_boost");
    DegradationPoint p{v, "", baseline.overall.rouge_l - noisy.overall.rouge_l,
                       id.overall.rouge_l - baseline.overall.rouge_l};
    xs.push_back(p.degradation);
    ys.push_back(p.boost);
    out.points.push_back(p);
    for (const auto& [task, ts] : baseline.per_task) {
      DegradationPoint tp{v, task, ts.means.rouge_l - noisy.per_task.at(task).means.rouge_l,
                          id.per_task.at(task).means.rouge_l - ts.means.rouge_l};
      txs.push_back(tp.degradation);
      tys.push_back(tp.boost);
      out.task_points.push_back(tp);
    }
  }
  out.r = pearson(xs, ys);
  try {
    out.task_r = pearson(txs, tys);
  } catch (const ValidationError&) {
    out.task_r.reset();
  }
  return out;
}

WinningRate winning_rate(const RunResult& a, const RunResult& b) {
  require_same_tasks(a, b, "winning_rate");
  WinningRate w;
  for (const auto& [task, ts] : a.per_task) {
    const double ra = ts.means.rouge_l;
    const double rb = b.per_task.at(task).means.rouge_l;
    if (ra > rb) {
      ++w.a_wins;
    } else if (rb > ra) {
      ++w.b_wins;
    } else {
      ++w.ties;
    }
  }
  return w;
}

std::vector<double> epsilon_values(const EpsilonGrid& grid) {
  if (!(grid.step > 0.0)) throw ValidationError("epsilon grid: step must be > 0");
  if (!(grid.lo <= grid.hi)) throw ValidationError("epsilon grid: lo must not exceed hi");
  const auto count =
      static_cast<std::size_t>(std::floor((grid.hi - grid.lo) / grid.step + 1e-9)) + 1;
  std::vector<double> values;
  values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double e = std::round((grid.lo + static_cast<double>(i) * grid.step) * 1e9) / 1e9;
    values.push_back(e == 0.0 ? 0.0 : e);
  }
  return values;
}

std::vector<SweepPoint> epsilon_sweep(const std::vector<Task>& tasks,
                                      std::shared_ptr<const Backend> backend,
                                      const NoisySpec& variant, const EpsilonGrid& grid,
                                      EvalSettings settings) {
  const std::vector<double> eps = epsilon_values(grid);
  if (backend->deterministic()) backend = std::make_shared<CachingBackend>(backend);
  settings.decode.mode = DecodeMode::id;
  settings.noisy = variant;

  std::vector<SweepPoint> points;
  points.reserve(eps.size());
  for (double e : eps) {
    settings.decode.epsilon = e;
    const auto outcomes = evaluate(tasks, *backend, nullptr, settings);
    for (const auto& o : outcomes) {
      const std::string where = "epsilon " + fmt_double(e) + ", task " + o.task_id + ": ";
      if (o.fatal_error) throw Error(where + *o.fatal_error);
      for (const auto& r : o.records) {
        if (r.error) throw Error(where + "instance " + r.instance_id + ": " + *r.error);
      }
    }
    points.push_back({e, make_run_result(outcomes, json::object()).overall.rouge_l});
  }
  return points;
}

}  // namespace idec
