// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include "cli_helpers.hpp"
#include "oracles.hpp"
#include "pseudocal/error.hpp"
#include "pseudocal/report.hpp"
#include "pseudocal/serialization.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace pseudocal;
using report::Method;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

constexpr int kSeeds = 10;

synth::ShiftSpec benchmark_spec(std::uint64_t seed) {
  synth::ShiftSpec s;
  s.classes = 5;
  s.dim = 10;
  s.n_source = 2000;
  s.n_target = 2000;
  s.mean_shift = 3.5;
  s.seed = seed;
  return s;
}

synth::TrainConfig benchmark_recipe(std::uint64_t seed) {
  synth::TrainConfig c;
  c.epochs = 300;
  c.learning_rate = 0.5;
  c.gamma = 3.0;
  c.seed = seed;
  return c;
}

struct BenchRun {
  synth::SyntheticTask task;
  std::unique_ptr<synth::TrainedClassifier> model;
  report::ExperimentResult result;
};

BenchRun bench(const synth::ShiftSpec& spec, const std::vector<Method>& methods) {
  BenchRun run;
  run.task = synth::generate(spec);
  run.model = std::make_unique<synth::TrainedClassifier>(synth::train(run.task, benchmark_recipe(spec.seed)));
  report::EvaluateOptions opt;
  opt.seed = spec.seed;
  run.result = report::evaluate_all(*run.model, run.task, methods, opt);
  return run;
}

// ---------------------------------------------------------------------------

Outcome ece_oracle() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> n_dist(1, 50), c_dist(2, 5), m_dist(1, 5);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = m_dist(rng);
    const auto b = oracle::random_batch(rng, n_dist(rng), c_dist(rng));
    const double got = metrics::ece(PredictionBatch(b.logits, b.labels), m);
    worst = std::max(worst, std::abs(got - oracle::brute_force_ece(b.logits, b.labels, m)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 5.0, fmt("max |diff| %.3g, %.2fs", worst, secs)};
}

Outcome temperature_oracle() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> n_dist(2, 20), c_dist(2, 5);
  std::uniform_real_distribution<double> scale(0.5, 6.0);
  double worst = 0.0, fit_secs = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto b = oracle::random_batch(rng, n_dist(rng), c_dist(rng), scale(rng));
    const auto t0 = Clock::now();
    const double t = scalers::fit_temperature(PredictionBatch(b.logits, b.labels)).temperature;
    fit_secs += seconds_since(t0);
    worst = std::max(worst, std::abs(t - oracle::grid_temperature(b.logits, b.labels, 100000)));
  }
  return {worst <= 1e-2 && fit_secs < 30.0, fmt("max |T - T_grid| %.3g, fit time %.2fs", worst, fit_secs)};
}

Outcome decomposition_identity() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> n_dist(1, 40), c_dist(2, 5);
  std::uniform_real_distribution<double> temp(0.05, 20.0);
  double worst = 0.0;
  int no_wrong = 0, no_correct = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto b = oracle::random_batch(rng, n_dist(rng), c_dist(rng));
    // Force the edge cases on some trials by relabelling to the argmax or away from it.
    const PredictionBatch probe(b.logits);
    const auto pred = probe.predictions();
    if (trial % 10 == 0) b.labels = pred;
    if (trial % 10 == 1)
      for (std::size_t i = 0; i < pred.size(); ++i) b.labels[i] = (pred[i] + 1) % static_cast<int>(b.logits.cols());
    const auto d = scalers::nll_decomposition(PredictionBatch(b.logits, b.labels), temp(rng));
    no_wrong += d.n_wrong == 0;
    no_correct += d.n_correct == 0;
    const double n = static_cast<double>(d.n_correct + d.n_wrong);
    const double weighted = d.n_correct / n * d.correct_term + d.n_wrong / n * d.wrong_term;
    worst = std::max(worst, std::abs(d.total - weighted));
  }
  return {worst <= 1e-9 && no_wrong > 0 && no_correct > 0,
          fmt("max |diff| %.3g, %d batches with N_w=0, %d with N_c=0", worst, no_wrong, no_correct)};
}

Outcome argmax_invariance() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> n_dist(1, 100), c_dist(2, 10);
  std::uniform_real_distribution<double> log_t(std::log(0.05), std::log(20.0));
  std::size_t flips = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto b = oracle::random_batch(rng, n_dist(rng), c_dist(rng));
    const PredictionBatch batch(b.logits, b.labels);
    const auto before = batch.predictions();
    const double t = trial == 0 ? 0.05 : trial == 1 ? 20.0 : std::exp(log_t(rng));
    const auto after = scalers::apply(Calibrator::from_temperature(t), batch).predictions();
    for (std::size_t i = 0; i < before.size(); ++i) flips += before[i] != after[i];
    total += before.size();
  }
  return {flips == 0, fmt("%zu of %zu predictions changed", flips, total)};
}

Outcome nesting() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> n_dist(20, 200), c_dist(2, 6);
  int violations = 0;
  double worst = -INFINITY;
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = oracle::random_batch(rng, n_dist(rng), c_dist(rng));
    const PredictionBatch batch(b.logits, b.labels);
    const double nt = scalers::calibrated_nll(scalers::fit_temperature(batch), batch);
    const double nv = scalers::calibrated_nll(scalers::fit_vector(batch), batch);
    const double nm = scalers::calibrated_nll(scalers::fit_matrix(batch), batch);
    worst = std::max({worst, nm - nv, nv - nt});
    if (nm > nv + 1e-6 || nv > nt + 1e-6) ++violations;
  }
  return {violations == 0, fmt("%d violations, max step-up %.3g", violations, worst)};
}

Outcome efficacy(std::vector<BenchRun>& runs) {
  const auto t0 = Clock::now();
  int wins = 0;
  double gap = 0.0, acc = 0.0, none = 0.0, pc = 0.0, orc = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    runs.push_back(bench(benchmark_spec(static_cast<std::uint64_t>(s)),
                         {Method::none, Method::temp_oracle, Method::pseudocal, Method::pseudo_label,
                          Method::filtered_pl, Method::pseudocal_same}));
    const auto& r = runs.back().result;
    wins += r.at(Method::pseudocal).ece < r.at(Method::none).ece;
    gap += std::abs(r.at(Method::pseudocal).ece - r.at(Method::temp_oracle).ece);
    acc += r.at(Method::none).accuracy;
    none += r.at(Method::none).ece;
    pc += r.at(Method::pseudocal).ece;
    orc += r.at(Method::temp_oracle).ece;
  }
  const double secs = seconds_since(t0);
  gap /= kSeeds;
  acc /= kSeeds;
  const bool in_band = acc >= 0.6 && acc <= 0.8;
  return {wins >= 8 && gap <= 0.05 && in_band && secs < 60.0,
          fmt("wins %d/10, mean |ECE_pc - ECE_oracle| %.4f, accuracy %.3f, ECE none/oracle/pc %.4f/%.4f/%.4f, %.1fs",
              wins, gap, acc, none / kSeeds, orc / kSeeds, pc / kSeeds, secs)};
}

Outcome ablation(const std::vector<BenchRun>& runs) {
  const auto t0 = Clock::now();
  auto mean_of = [&](Method m) {
    double s = 0.0;
    for (const auto& r : runs) s += r.result.at(m).ece;
    return s / static_cast<double>(runs.size());
  };
  const double pc = mean_of(Method::pseudocal);
  const double pl = mean_of(Method::pseudo_label);
  const double fpl = mean_of(Method::filtered_pl);
  const double same = mean_of(Method::pseudocal_same);
  int at_floor = 0, grid_agrees = 0;
  for (const auto& r : runs) {
    const double t = r.result.at(Method::pseudo_label).temperature.value();
    at_floor += t == scalers::kMinTemperature;
    const auto logits = r.model->logits(r.task.target_inputs);
    const auto pseudo = PredictionBatch(logits).predictions();
    const double grid = oracle::grid_temperature(logits, pseudo, 2000);
    grid_agrees += grid == scalers::kMinTemperature;
  }
  const double secs = seconds_since(t0);
  const bool ordered = pc < pl && pc < fpl && pc < same;
  return {ordered && at_floor == kSeeds && grid_agrees == kSeeds && secs < 120.0,
          fmt("ECE pseudocal %.4f, pseudo_label %.4f, filtered_pl %.4f, same_label %.4f; "
              "pseudo_label T at 0.05 in %d/10 (grid oracle %d/10)",
              pc, pl, fpl, same, at_floor, grid_agrees)};
}

Outcome lambda_sensitivity() {
  const auto t0 = Clock::now();
  const std::vector<double> lambdas = {0.51, 0.55, 0.6, 0.65, 0.7, 0.8, 0.9};
  const std::vector<LabelMode> modes = {LabelMode::hard, LabelMode::soft};
  std::vector<report::SweepRow> rows;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto task = synth::generate(benchmark_spec(s));
    const auto model = synth::train(task, benchmark_recipe(s));
    auto part = report::lambda_sweep(model, task, lambdas, modes, {s});
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const std::vector<double> medium = {0.6, 0.65, 0.7}, ends = {0.51, 0.9};
  const double mid = report::mean_sweep_ece(rows, medium);
  const double edge = report::mean_sweep_ece(rows, ends);
  auto per_mode = [&](LabelMode mode, const std::vector<double>& set) {
    std::vector<report::SweepRow> sub;
    for (const auto& r : rows)
      if (r.label_mode == mode) sub.push_back(r);
    return report::mean_sweep_ece(sub, set);
  };
  const double secs = seconds_since(t0);
  return {mid <= edge && secs < 120.0,
          fmt("medium %.4f vs ends %.4f (hard %.4f/%.4f, soft %.4f/%.4f), %.1fs", mid, edge,
              per_mode(LabelMode::hard, medium), per_mode(LabelMode::hard, ends),
              per_mode(LabelMode::soft, medium), per_mode(LabelMode::soft, ends), secs)};
}

Outcome partial_set() {
  int wins = 0;
  double none = 0.0, pc = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    auto spec = benchmark_spec(static_cast<std::uint64_t>(s));
    spec.class_priors_target = std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0, 0.0};
    const auto run = bench(spec, {Method::none, Method::pseudocal});
    wins += run.result.at(Method::pseudocal).ece < run.result.at(Method::none).ece;
    none += run.result.at(Method::none).ece;
    pc += run.result.at(Method::pseudocal).ece;
  }
  return {wins >= 7, fmt("wins %d/10, mean ECE none %.4f, pseudocal %.4f", wins, none / kSeeds, pc / kSeeds)};
}

Outcome overfitting_curve() {
  auto spec = benchmark_spec(0);
  spec.mean_shift = 6.0;  // large shift: target NLL turns upward while the error stays flat
  const auto task = synth::generate(spec);
  auto cfg = benchmark_recipe(0);
  cfg.gamma = 1.0;
  cfg.epochs = 3000;
  cfg.track_history = true;
  const auto model = synth::train(task, cfg);
  const auto s = report::analyze_history(model.history);
  return {s.nll_ratio >= 1.2 && s.max_error_change <= 0.02,
          fmt("best epoch %d, NLL %.4f -> %.4f (x%.3f), max error change %.4f", s.best_epoch, s.min_nll,
              s.final_nll, s.nll_ratio, s.max_error_change)};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const auto dir = cli::scratch("acceptance_determinism");
  const std::string task = (dir / "task.json").string();
  const std::string model = (dir / "model.json").string();
  const std::string ens = (dir / "ens.json").string();
  const std::string io = " --task " + task + " --model " + model;
  struct Step {
    std::string name, args, out;
    std::vector<std::string> extra_outputs;
  };
  const std::vector<Step> steps = {
      {"generate", "generate --classes 4 --dim 6 --n-source 400 --n-target 400 --mean-shift 3 --seed 9", task, {}},
      {"train", "train --task " + task + " --epochs 80 --gamma 3 --seed 9 --history " + (dir / "hist.csv").string(),
       model, {(dir / "hist.csv").string()}},
      {"train-ensemble", "train --task " + task + " --epochs 40 --ensemble 2 --seed 9", ens, {}},
      {"calibrate", "calibrate" + io + " --provenance " + (dir / "prov.csv").string(), (dir / "cal.json").string(),
       {(dir / "prov.csv").string()}},
      {"evaluate",
       "evaluate" + io + " --runs 2 --methods none,oracle,tempscal,vector,matrix,pseudocal,pseudo_label,"
                         "filtered_pl,pseudocal_same,beta_mixup --table " + (dir / "table.txt").string(),
       (dir / "eval.json").string(), {(dir / "table.txt").string()}},
      {"sweep", "sweep" + io + " --lambdas 0.6,0.9 --runs 2", (dir / "sweep.csv").string(), {}},
  };
  std::vector<std::string> mismatched;
  for (const auto& step : steps) {
    std::vector<std::string> first;
    for (int rep = 0; rep < 2; ++rep) {
      const auto r = cli::run(step.args + " --out " + step.out);
      if (r.exit_code != 0) return {false, step.name + " failed: " + r.output};
      std::vector<std::string> docs = {cli::slurp(step.out)};
      for (const auto& e : step.extra_outputs) docs.push_back(cli::slurp(e));
      if (rep == 0) first = docs;
      else if (docs != first) mismatched.push_back(step.name);
    }
  }
  std::string detail = fmt("%zu subcommand runs compared", steps.size());
  for (const auto& m : mismatched) detail += ", differs: " + m;
  return {mismatched.empty(), detail};
}

// Correspondence of pseudo-target correctness with real correctness when the
// real labels are replaced by a random permutation of themselves.
double permuted_correspondence(const Model& model, const PseudoTargetSet& pseudo, const std::vector<int>& labels,
                               std::mt19937_64& rng, int draws) {
  const auto mixed_pred = PredictionBatch(model.logits(pseudo.inputs)).predictions();
  double total = 0.0;
  std::vector<int> shuffled = labels;
  for (int d = 0; d < draws; ++d) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::size_t agree = 0;
    for (std::size_t k = 0; k < pseudo.size(); ++k) {
      const auto& prov = pseudo.provenance[k];
      const int dominant_pl = prov.dominant_index == prov.index_a ? prov.label_a : prov.label_b;
      const bool pseudo_ok = mixed_pred[k] == pseudo.hard_labels[k];
      const bool real_ok = dominant_pl == shuffled[prov.dominant_index];
      agree += pseudo_ok == real_ok;
    }
    total += static_cast<double>(agree) / static_cast<double>(pseudo.size());
  }
  return total / draws;
}

Outcome correspondence(const std::vector<BenchRun>& runs) {
  std::mt19937_64 rng(12);
  int beats = 0, serialized = 0;
  double mean_rate = 0.0, mean_chance = 0.0;
  for (const auto& r : runs) {
    const double rate = r.result.correspondence_rate.value();
    const auto doc = io::to_json(r.result);
    serialized += doc.contains("correspondence_rate") && doc.at("correspondence_rate").get<double>() == rate;
    MixupConfig cfg = r.result.mixup;
    cfg.seed = r.result.seed;
    const auto pseudo = synthesize(*r.model, r.task.target_inputs, cfg);
    const double recomputed = correspondence_rate(*r.model, pseudo, *r.task.target_labels);
    const double chance = permuted_correspondence(*r.model, pseudo, *r.task.target_labels, rng, 50);
    std::fprintf(stderr, "  seed %llu: rate %.4f recomputed %.4f chance %.4f\n",
                 static_cast<unsigned long long>(r.result.seed), rate, recomputed, chance);
    beats += rate > chance && std::abs(recomputed - rate) < 1e-12;
    mean_rate += rate;
    mean_chance += chance;
  }
  const double n = static_cast<double>(runs.size());
  return {beats >= 9 && serialized == static_cast<int>(runs.size()),
          fmt("above chance in %d/10, mean rate %.3f vs chance %.3f (published reference: >60%%), serialized %d/10",
              beats, mean_rate / n, mean_chance / n, serialized)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<BenchRun> benchmark;
  const std::vector<Criterion> criteria = {
      {"ece matches brute-force oracle", ece_oracle},
      {"temperature fit matches grid oracle", temperature_oracle},
      {"nll decomposition identity", decomposition_identity},
      {"temperature keeps predicted classes", argmax_invariance},
      {"matrix <= vector <= temperature nll", nesting},
      {"pseudocal efficacy on shifted benchmark", [&] { return efficacy(benchmark); }},
      {"ablation ordering", [&] { return ablation(benchmark); }},
      {"medium lambda beats the extremes", lambda_sensitivity},
      {"partial-set robustness", partial_set},
      {"nll overfitting curve", overfitting_curve},
      {"cli determinism", determinism},
      {"correspondence above chance", [&] { return correspondence(benchmark); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += !out.pass;
    std::printf("[%s] %2zu %s: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
