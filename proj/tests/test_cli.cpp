#include "cli_helpers.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>

namespace fs = std::filesystem;

namespace {

struct Pipeline {
  fs::path dir, task, model;
};

Pipeline make_pipeline(const std::string& name, const std::string& extra = "") {
  Pipeline p;
  p.dir = cli::scratch(name);
  p.task = p.dir / "task.json";
  p.model = p.dir / "model.json";
  auto gen = cli::run("generate --classes 3 --dim 5 --n-source 300 --n-target 300 --mean-shift 2 --seed 3 " +
                      extra + " --out " + p.task.string());
  REQUIRE_MESSAGE(gen.exit_code == 0, gen.output);
  auto tr = cli::run("train --task " + p.task.string() + " --epochs 60 --gamma 3 --seed 3 --out " + p.model.string());
  REQUIRE_MESSAGE(tr.exit_code == 0, tr.output);
  return p;
}

}  // namespace

TEST_CASE("generate, train, calibrate and evaluate") {
  const auto p = make_pipeline("cli_smoke");
  const auto cal = cli::run("calibrate --task " + p.task.string() + " --model " + p.model.string() +
                            " --out " + (p.dir / "cal.json").string() +
                            " --provenance " + (p.dir / "prov.csv").string());
  REQUIRE_MESSAGE(cal.exit_code == 0, cal.output);
  CHECK(cal.output.find("temperature") != std::string::npos);
  const auto cal_doc = nlohmann::json::parse(cli::slurp(p.dir / "cal.json"));
  CHECK(cal_doc.at("kind") == "calibrator");
  CHECK(cli::slurp(p.dir / "prov.csv").rfind("index_a,index_b,lambda", 0) == 0);

  const auto ev = cli::run("evaluate --task " + p.task.string() + " --model " + p.model.string() +
                           " --runs 2 --bins-dir " + (p.dir / "bins").string() +
                           " --out " + (p.dir / "result.json").string());
  REQUIRE_MESSAGE(ev.exit_code == 0, ev.output);
  CHECK(ev.output.find("PseudoCal") != std::string::npos);
  const auto doc = nlohmann::json::parse(cli::slurp(p.dir / "result.json"));
  CHECK(doc.at("runs").size() == 2);
  bool has_pc = false;
  for (const auto& m : doc.at("runs")[0].at("methods")) has_pc |= m.at("method") == "pseudocal";
  CHECK(has_pc);
  CHECK(fs::exists(p.dir / "bins"));
  CHECK_FALSE(fs::is_empty(p.dir / "bins"));
}

TEST_CASE("lambda of one half is a usage error") {
  const auto p = make_pipeline("cli_lambda");
  const auto r = cli::run("calibrate --task " + p.task.string() + " --model " + p.model.string() +
                          " --lambda 0.5 --out " + (p.dir / "cal.json").string());
  CHECK(r.exit_code == 2);
  CHECK_FALSE(fs::exists(p.dir / "cal.json"));
}

TEST_CASE("scoring a task without target labels is a data access error") {
  const auto p = make_pipeline("cli_strip", "--strip-target-labels");
  const auto r = cli::run("evaluate --task " + p.task.string() + " --model " + p.model.string() +
                          " --methods none,oracle --out " + (p.dir / "r.json").string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("data_access") != std::string::npos);

  // Source-free calibration still works.
  const auto cal = cli::run("calibrate --task " + p.task.string() + " --model " + p.model.string() +
                            " --out " + (p.dir / "cal.json").string());
  CHECK(cal.exit_code == 0);
}

TEST_CASE("commands never modify their inputs") {
  const auto p = make_pipeline("cli_readonly");
  const auto task_before = cli::slurp(p.task);
  const auto model_before = cli::slurp(p.model);
  cli::run("calibrate --task " + p.task.string() + " --model " + p.model.string() + " --out " +
           (p.dir / "c.json").string());
  cli::run("evaluate --task " + p.task.string() + " --model " + p.model.string() + " --runs 1 --out " +
           (p.dir / "e.json").string());
  cli::run("sweep --task " + p.task.string() + " --model " + p.model.string() +
           " --lambdas 0.6,0.8 --runs 1 --out " + (p.dir / "s.csv").string());
  CHECK(cli::slurp(p.task) == task_before);
  CHECK(cli::slurp(p.model) == model_before);
  CHECK(cli::slurp(p.dir / "s.csv").rfind("lambda,label_mode", 0) == 0);
}

TEST_CASE("json config supplies options") {
  const auto p = make_pipeline("cli_config");
  {
    std::ofstream cfg(p.dir / "cfg.json");
    cfg << R"({"lambda": 0.8, "label_mode": "soft"})";
  }
  const auto r = cli::run("calibrate --task " + p.task.string() + " --model " + p.model.string() +
                          " --config " + (p.dir / "cfg.json").string() + " --out " + (p.dir / "c.json").string());
  CHECK_MESSAGE(r.exit_code == 0, r.output);
}

TEST_CASE("unknown subcommands and options are usage errors") {
  CHECK(cli::run("frobnicate").exit_code == 2);
  CHECK(cli::run("generate --out /tmp/x.json --bogus 1").exit_code == 2);
  CHECK(cli::run("--help").exit_code == 0);
}
