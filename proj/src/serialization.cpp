#include "pseudocal/serialization.hpp"

#include "pseudocal/error.hpp"

#include <fstream>

namespace pseudocal::io {

namespace {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, Eigen::Index cols_if_empty = 0) {
  if (!j.is_array()) throw Error(ErrorKind::io, "expected a matrix (array of arrays)");
  if (j.empty()) return Matrix(0, cols_if_empty);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorKind::io, "ragged matrix in document");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Json row_to_json(const Row& r) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < r.size(); ++i) out.push_back(r[i]);
  return out;
}

Row row_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  Row r(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r[static_cast<Eigen::Index>(i)] = v[i];
  return r;
}

void expect_kind(const Json& j, std::string_view kind) {
  if (!j.is_object()) throw Error(ErrorKind::io, "document is not a JSON object");
  const int version = j.value("schema_version", -1);
  if (version != kSchemaVersion) {
    throw Error(ErrorKind::io, "unsupported schema_version " + std::to_string(version));
  }
  const std::string actual = j.value("kind", "");
  if (actual != kind) {
    throw Error(ErrorKind::io, "expected a '" + std::string(kind) + "' document, got '" + actual + "'");
  }
}

Json header(std::string_view kind) {
  return Json{{"schema_version", kSchemaVersion}, {"kind", std::string(kind)}};
}

// Wraps nlohmann parse/type errors in the library error type.
template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::io, std::string("malformed document: ") + e.what());
  }
}

}  // namespace

Json to_json(const synth::ShiftSpec& spec) {
  Json j{{"classes", spec.classes},
         {"dim", spec.dim},
         {"n_source", spec.n_source},
         {"n_target", spec.n_target},
         {"mean_shift", spec.mean_shift},
         {"rotation", spec.rotation},
         {"cluster_std", spec.cluster_std},
         {"class_separation", spec.class_separation},
         {"source_val_fraction", spec.source_val_fraction},
         {"seed", spec.seed}};
  j["class_priors_target"] = spec.class_priors_target ? Json(*spec.class_priors_target) : Json(nullptr);
  return j;
}

synth::ShiftSpec shift_spec_from_json(const Json& j) {
  return guarded([&] {
    synth::ShiftSpec s;
    s.classes = j.at("classes").get<int>();
    s.dim = j.at("dim").get<int>();
    s.n_source = j.at("n_source").get<int>();
    s.n_target = j.at("n_target").get<int>();
    s.mean_shift = j.at("mean_shift").get<double>();
    s.rotation = j.at("rotation").get<double>();
    s.cluster_std = j.at("cluster_std").get<double>();
    s.class_separation = j.at("class_separation").get<double>();
    s.source_val_fraction = j.at("source_val_fraction").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("class_priors_target") && !j["class_priors_target"].is_null()) {
      s.class_priors_target = j["class_priors_target"].get<std::vector<double>>();
    }
    return s;
  });
}

Json to_json(const synth::SyntheticTask& task) {
  Json j = header("task");
  j["spec"] = to_json(task.spec);
  j["source"] = {{"inputs", matrix_to_json(task.source_inputs)}, {"labels", task.source_labels}};
  j["source_val"] = {{"inputs", matrix_to_json(task.source_val_inputs)},
                     {"labels", task.source_val_labels}};
  j["target"] = {{"inputs", matrix_to_json(task.target_inputs)}};
  j["target"]["labels"] = task.target_labels ? Json(*task.target_labels) : Json(nullptr);
  return j;
}

synth::SyntheticTask task_from_json(const Json& j) {
  expect_kind(j, "task");
  return guarded([&] {
    synth::SyntheticTask t;
    t.spec = shift_spec_from_json(j.at("spec"));
    const Eigen::Index d = t.spec.dim;
    t.source_inputs = matrix_from_json(j.at("source").at("inputs"), d);
    t.source_labels = j.at("source").at("labels").get<std::vector<int>>();
    t.source_val_inputs = matrix_from_json(j.at("source_val").at("inputs"), d);
    t.source_val_labels = j.at("source_val").at("labels").get<std::vector<int>>();
    t.target_inputs = matrix_from_json(j.at("target").at("inputs"), d);
    const Json& labels = j.at("target").value("labels", Json(nullptr));
    if (!labels.is_null()) t.target_labels = labels.get<std::vector<int>>();
    if (static_cast<Eigen::Index>(t.source_labels.size()) != t.source_inputs.rows() ||
        static_cast<Eigen::Index>(t.source_val_labels.size()) != t.source_val_inputs.rows() ||
        (t.target_labels &&
         static_cast<Eigen::Index>(t.target_labels->size()) != t.target_inputs.rows())) {
      throw Error(ErrorKind::io, "task document label counts differ from input rows");
    }
    return t;
  });
}

Json to_json(const synth::TrainConfig& c) {
  return Json{{"epochs", c.epochs},         {"learning_rate", c.learning_rate},
              {"gamma", c.gamma},           {"hidden_units", c.hidden_units},
              {"seed", c.seed},             {"bootstrap", c.bootstrap},
              {"track_history", c.track_history}};
}

synth::TrainConfig train_config_from_json(const Json& j) {
  return guarded([&] {
    synth::TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.hidden_units = j.at("hidden_units").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.bootstrap = j.at("bootstrap").get<bool>();
    c.track_history = j.at("track_history").get<bool>();
    return c;
  });
}

Json to_json(const synth::TrainedClassifier& model) {
  Json j = header("classifier");
  j["architecture"] = model.has_hidden_layer() ? "mlp" : "logistic";
  j["gamma"] = model.gamma();
  j["train_config"] = to_json(model.config());
  if (model.has_hidden_layer()) {
    j["hidden_weight"] = matrix_to_json(model.hidden_weight());
    j["hidden_bias"] = row_to_json(model.hidden_bias());
  }
  j["output_weight"] = matrix_to_json(model.output_weight());
  j["output_bias"] = row_to_json(model.output_bias());
  if (!model.history.empty()) {
    Json h = Json::array();
    for (const auto& p : model.history) {
      h.push_back({{"epoch", p.epoch},
                   {"source_loss", p.source_loss},
                   {"target_error", p.target_error},
                   {"target_nll", p.target_nll}});
    }
    j["history"] = std::move(h);
  }
  return j;
}

synth::TrainedClassifier classifier_from_json(const Json& j) {
  expect_kind(j, "classifier");
  return guarded([&] {
    Matrix w1;
    Row b1;
    if (j.at("architecture").get<std::string>() == "mlp") {
      w1 = matrix_from_json(j.at("hidden_weight"));
      b1 = row_from_json(j.at("hidden_bias"));
    }
    synth::TrainedClassifier model(std::move(w1), std::move(b1), matrix_from_json(j.at("output_weight")),
                                   row_from_json(j.at("output_bias")), j.at("gamma").get<double>(),
                                   train_config_from_json(j.at("train_config")));
    if (j.contains("history")) {
      for (const auto& p : j["history"]) {
        model.history.push_back({p.at("epoch").get<int>(), p.at("source_loss").get<double>(),
                                 p.at("target_error").get<double>(), p.at("target_nll").get<double>()});
      }
    }
    return model;
  });
}

Json to_json(const synth::EnsembleModel& model) {
  Json j = header("ensemble");
  Json members = Json::array();
  for (const auto& m : model.members()) members.push_back(to_json(m));
  j["members"] = std::move(members);
  return j;
}

std::unique_ptr<Model> model_from_json(const Json& j) {
  const std::string kind = j.is_object() ? j.value("kind", "") : "";
  if (kind == "ensemble") {
    expect_kind(j, "ensemble");
    std::vector<synth::TrainedClassifier> members;
    for (const auto& m : j.at("members")) members.push_back(classifier_from_json(m));
    return std::make_unique<synth::EnsembleModel>(std::move(members));
  }
  return std::make_unique<synth::TrainedClassifier>(classifier_from_json(j));
}

Json to_json(const Calibrator& c) {
  Json j = header("calibrator");
  j["type"] = std::string(to_string(c.kind));
  j["tag"] = c.tag;
  j["converged"] = c.converged;
  switch (c.kind) {
    case CalibratorKind::identity:
      break;
    case CalibratorKind::temperature:
      j["temperature"] = c.temperature;
      break;
    case CalibratorKind::vector:
      j["scale"] = row_to_json(c.scale);
      j["bias"] = row_to_json(c.bias);
      break;
    case CalibratorKind::matrix:
      j["weight"] = matrix_to_json(c.weight);
      j["bias"] = row_to_json(c.bias);
      break;
  }
  return j;
}

Calibrator calibrator_from_json(const Json& j) {
  expect_kind(j, "calibrator");
  return guarded([&] {
    Calibrator c;
    const std::string type = j.at("type").get<std::string>();
    c.tag = j.value("tag", "");
    c.converged = j.value("converged", true);
    if (type == "identity") {
      c.kind = CalibratorKind::identity;
    } else if (type == "temperature") {
      c.kind = CalibratorKind::temperature;
      c.temperature = j.at("temperature").get<double>();
    } else if (type == "vector") {
      c.kind = CalibratorKind::vector;
      c.scale = row_from_json(j.at("scale"));
      c.bias = row_from_json(j.at("bias"));
    } else if (type == "matrix") {
      c.kind = CalibratorKind::matrix;
      c.weight = matrix_from_json(j.at("weight"));
      c.bias = row_from_json(j.at("bias"));
    } else {
      throw Error(ErrorKind::io, "unknown calibrator type '" + type + "'");
    }
    c.validate();
    return c;
  });
}

Json to_json(const MixupConfig& cfg) {
  Json j{{"lambda_policy", cfg.lambda_policy == LambdaPolicy::fixed ? "fixed" : "beta"},
         {"label_mode", std::string(to_string(cfg.label_mode))},
         {"pairing", std::string(to_string(cfg.pairing))},
         {"epochs", cfg.epochs},
         {"batch_size", cfg.batch_size},
         {"seed", cfg.seed}};
  if (cfg.lambda_policy == LambdaPolicy::fixed) {
    j["lambda"] = cfg.lambda;
  } else {
    j["beta_alpha"] = cfg.beta_alpha;
  }
  return j;
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const report::ExperimentResult& r, bool include_timing) {
  Json j = header("result");
  j["task"] = to_json(r.task);
  j["seed"] = r.seed;
  j["bins"] = r.bins;
  j["mixup"] = to_json(r.mixup);
  Json rows = Json::array();
  for (const auto& m : r.methods) {
    rows.push_back({{"method", std::string(report::to_string(m.method))},
                    {"ece", m.ece},
                    {"nll", m.nll},
                    {"brier", m.brier},
                    {"accuracy", m.accuracy},
                    {"temperature", optional_number(m.temperature)},
                    {"converged", m.converged}});
  }
  j["methods"] = std::move(rows);
  j["correspondence_rate"] = optional_number(r.correspondence_rate);
  j["pseudo_set_size"] = r.pseudo_set_size ? Json(*r.pseudo_set_size) : Json(nullptr);
  if (include_timing) j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j;
}

Json to_json(const report::MethodSummary& s) {
  return Json{{"method", std::string(report::to_string(s.method))},
              {"ece", s.ece},
              {"nll", s.nll},
              {"brier", s.brier},
              {"accuracy", s.accuracy},
              {"temperature", optional_number(s.temperature)},
              {"runs", s.runs}};
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::io, "cannot parse " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace pseudocal::io
