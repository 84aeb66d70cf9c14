/*
 * Copyright 2026 The fedcs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "fedcs/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fedcs/dp_accountant.h"
#include "fedcs/error.h"
#include "fedcs/metrics.h"
#include "json.hpp"

namespace fedcs::sim {
namespace {

using nlohmann::json;

void CheckKeys(const json& j, const std::string& where,
               std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) {
      throw FormatError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <typename T>
void Get(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("config key '") + key + "': " + e.what());
  }
}

std::string ActivationName(ml::Activation a) {
  return a == ml::Activation::kRelu ? "relu" : "sigmoid";
}

ml::Activation ParseActivation(const std::string& s) {
  if (s == "relu") return ml::Activation::kRelu;
  if (s == "sigmoid") return ml::Activation::kSigmoid;
  throw FormatError("unknown activation '" + s + "'");
}

std::string LossName(ml::LossKind l) {
  return l == ml::LossKind::kCategorical ? "categorical" : "binary";
}

ml::LossKind ParseLoss(const std::string& s) {
  if (s == "categorical") return ml::LossKind::kCategorical;
  if (s == "binary") return ml::LossKind::kBinary;
  throw FormatError("unknown loss '" + s + "'");
}

[[noreturn]] void Rethrow(const Error& e, const std::string& prefix) {
  const std::string msg = prefix + e.what();
  switch (e.code()) {
    case ErrorCode::kInvalidArgument:
      throw InvalidArgument(msg);
    case ErrorCode::kNumericFailure:
      throw NumericFailure(msg);
    case ErrorCode::kRange:
      throw RangeError(msg);
    case ErrorCode::kProtocol:
      throw ProtocolError(msg);
    case ErrorCode::kFormat:
      throw FormatError(msg);
    case ErrorCode::kIo:
      throw IoError(msg);
  }
  throw Error(e.code(), msg);
}

struct LoadedData {
  ml::Dataset train;
  ml::Dataset test;
};

LoadedData LoadData(const ExperimentConfig& cfg, size_t input_dim) {
  LoadedData d;
  if (cfg.data.kind == "idx") {
    d.train = ml::LoadIdxFiles(cfg.data.train_images, cfg.data.train_labels);
    d.test = ml::LoadIdxFiles(cfg.data.test_images, cfg.data.test_labels);
    return d;
  }
  const auto side = static_cast<size_t>(std::llround(std::sqrt(input_dim)));
  if (side * side != input_dim) {
    throw InvalidArgument("synthetic data needs a square input width");
  }
  ml::SyntheticSpec spec;
  spec.side = side;
  spec.num_classes = cfg.loss == ml::LossKind::kBinary
                         ? 2
                         : static_cast<int>(ml::ModelSpec::Parse(
                                                cfg.layers, cfg.activation,
                                                cfg.loss)
                                                .widths.back());
  spec.noise = cfg.data.noise;
  spec.jitter = cfg.data.jitter;
  spec.task_seed = cfg.data.task_seed;
  spec.records = cfg.num_clients * cfg.data.per_client;
  spec.seed = DeriveSeed(cfg.data.task_seed, "train");
  d.train = ml::MakeSynthetic(spec);
  spec.records = cfg.data.test_records;
  spec.seed = DeriveSeed(cfg.data.task_seed, "test");
  d.test = ml::MakeSynthetic(spec);
  return d;
}

}  // namespace

void ExperimentConfig::Validate() const {
  hp.Validate(scheme);
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw InvalidArgument("ratio must lie in (0, 1]");
  }
  if (chunks < 1) throw InvalidArgument("chunks must be >= 1");
  if (num_clients < 1) throw InvalidArgument("clients must be >= 1");
  if (std::llround(hp.C * static_cast<double>(num_clients)) < 1) {
    throw InvalidArgument("round(C * N) is zero: no clients per round");
  }
  if (fl::IsPrivate(scheme)) {
    if (!(hp.sigma > 0.0)) {
      throw InvalidArgument("private scheme " +
                            std::string(fl::SchemeName(scheme)) +
                            " needs sigma > 0");
    }
    if (weighting && *weighting != fl::Weighting::kUniform) {
      throw InvalidArgument("private schemes only support uniform weighting");
    }
  } else if (hp.sigma != 0.0) {
    throw InvalidArgument("sigma is only valid for private schemes");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("delta must lie in (0, 1)");
  }
  if (lambda_max < 1) throw InvalidArgument("lambda_max must be >= 1");
  if (eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
  if (format != "csv" && format != "jsonl") {
    throw InvalidArgument("format must be csv or jsonl");
  }
  if (early_stop_metric != "accuracy" &&
      early_stop_metric != "balanced_accuracy" &&
      early_stop_metric != "auroc") {
    throw InvalidArgument("unknown early-stop metric " + early_stop_metric);
  }
  solver.Validate();
  ml::ModelSpec::Parse(layers, activation, loss);
  if (data.kind == "idx") {
    for (const std::string* p : {&data.train_images, &data.train_labels,
                                 &data.test_images, &data.test_labels}) {
      if (p->empty() || !std::filesystem::exists(*p)) {
        throw IoError("data file not found: '" + *p + "'");
      }
    }
  } else if (data.kind == "synthetic") {
    if (data.per_client < 1 || data.test_records < 1) {
      throw InvalidArgument("synthetic data needs per_client, test_records");
    }
  } else {
    throw InvalidArgument("data source must be synthetic or idx");
  }
}

ExperimentConfig ParseConfig(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  CheckKeys(j, "config",
            {"scheme", "ratio", "chunks", "shuffle_seed", "master_seed",
             "hyper", "privacy", "weighting", "solver", "secure_agg", "model",
             "data", "partition", "eval_every", "early_stop", "output",
             "format", "record_wallclock", "comment"});
  ExperimentConfig c;
  std::string s;
  if (j.contains("scheme")) {
    Get(j, "scheme", s);
    c.scheme = fl::ParseScheme(s);
  }
  Get(j, "ratio", c.ratio);
  Get(j, "chunks", c.chunks);
  Get(j, "shuffle_seed", c.shuffle_seed);
  Get(j, "master_seed", c.master_seed);
  Get(j, "eval_every", c.eval_every);
  Get(j, "output", c.output);
  Get(j, "format", c.format);
  Get(j, "record_wallclock", c.record_wallclock);
  if (j.contains("weighting")) {
    Get(j, "weighting", s);
    c.weighting = fl::ParseWeighting(s);
  }
  if (j.contains("hyper")) {
    const json& h = j["hyper"];
    CheckKeys(h, "hyper",
              {"eta", "eta_g", "rho", "S", "sigma", "C", "rounds",
               "local_epochs", "batch_size"});
    Get(h, "eta", c.hp.eta);
    Get(h, "eta_g", c.hp.eta_g);
    Get(h, "rho", c.hp.rho);
    if (h.contains("S") && h["S"].is_string()) {
      if (h["S"].get<std::string>() != "calibrate") {
        throw FormatError("hyper.S must be a number or \"calibrate\"");
      }
      c.calibrate_S = true;
    } else {
      Get(h, "S", c.hp.S);
    }
    Get(h, "sigma", c.hp.sigma);
    Get(h, "C", c.hp.C);
    Get(h, "rounds", c.hp.rounds);
    Get(h, "local_epochs", c.hp.local_epochs);
    Get(h, "batch_size", c.hp.batch_size);
  }
  if (j.contains("privacy")) {
    const json& p = j["privacy"];
    CheckKeys(p, "privacy", {"delta", "lambda_max"});
    Get(p, "delta", c.delta);
    Get(p, "lambda_max", c.lambda_max);
  }
  if (j.contains("solver")) {
    const json& o = j["solver"];
    CheckKeys(o, "solver",
              {"lambda", "lambda_relative", "memory", "max_iters", "grad_tol",
               "obj_rel_tol", "continuation", "dp_lambda_scale"});
    Get(o, "lambda", c.solver.lambda);
    Get(o, "lambda_relative", c.solver.lambda_relative);
    Get(o, "memory", c.solver.memory);
    Get(o, "max_iters", c.solver.max_iters);
    Get(o, "grad_tol", c.solver.grad_tol);
    Get(o, "obj_rel_tol", c.solver.obj_rel_tol);
    Get(o, "continuation", c.solver.continuation);
    Get(o, "dp_lambda_scale", c.dp_lambda_scale);
  }
  if (j.contains("secure_agg")) {
    CheckKeys(j["secure_agg"], "secure_agg", {"frac_bits"});
    Get(j["secure_agg"], "frac_bits", c.frac_bits);
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    CheckKeys(m, "model", {"layers", "activation", "loss"});
    Get(m, "layers", c.layers);
    if (m.contains("activation")) {
      Get(m, "activation", s);
      c.activation = ParseActivation(s);
    }
    if (m.contains("loss")) {
      Get(m, "loss", s);
      c.loss = ParseLoss(s);
    }
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    CheckKeys(d, "data",
              {"source", "per_client", "test_records", "noise", "jitter",
               "task_seed", "train_images", "train_labels", "test_images",
               "test_labels"});
    Get(d, "source", c.data.kind);
    Get(d, "per_client", c.data.per_client);
    Get(d, "test_records", c.data.test_records);
    Get(d, "noise", c.data.noise);
    Get(d, "jitter", c.data.jitter);
    Get(d, "task_seed", c.data.task_seed);
    Get(d, "train_images", c.data.train_images);
    Get(d, "train_labels", c.data.train_labels);
    Get(d, "test_images", c.data.test_images);
    Get(d, "test_labels", c.data.test_labels);
  }
  if (j.contains("partition")) {
    const json& p = j["partition"];
    CheckKeys(p, "partition",
              {"clients", "mode", "classes_per_client", "ensure_class",
               "downsample"});
    Get(p, "clients", c.num_clients);
    if (p.contains("mode")) {
      Get(p, "mode", s);
      if (s == "iid") {
        c.partition.mode = ml::PartitionMode::kIid;
      } else if (s == "label-skew") {
        c.partition.mode = ml::PartitionMode::kLabelSkew;
      } else {
        throw FormatError("partition.mode must be iid or label-skew");
      }
    }
    Get(p, "classes_per_client", c.partition.classes_per_client);
    Get(p, "ensure_class", c.partition.ensure_class);
    Get(p, "downsample", c.downsample);
  }
  if (j.contains("early_stop")) {
    CheckKeys(j["early_stop"], "early_stop", {"patience", "metric"});
    Get(j["early_stop"], "patience", c.early_stop_patience);
    Get(j["early_stop"], "metric", c.early_stop_metric);
  }
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg = ParseConfig(ss.str());
  // Data paths are relative to the config file.
  const std::filesystem::path base =
      std::filesystem::path(path).parent_path();
  for (std::string* p : {&cfg.data.train_images, &cfg.data.train_labels,
                         &cfg.data.test_images, &cfg.data.test_labels}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) {
      *p = (base / *p).string();
    }
  }
  return cfg;
}

std::string ConfigToJson(const ExperimentConfig& c) {
  json j;
  j["scheme"] = std::string(fl::SchemeName(c.scheme));
  j["ratio"] = c.ratio;
  j["chunks"] = c.chunks;
  j["shuffle_seed"] = c.shuffle_seed;
  j["master_seed"] = c.master_seed;
  j["hyper"] = {{"eta", c.hp.eta},
                {"eta_g", c.hp.eta_g},
                {"rho", c.hp.rho},
                {"sigma", c.hp.sigma},
                {"C", c.hp.C},
                {"rounds", c.hp.rounds},
                {"local_epochs", c.hp.local_epochs},
                {"batch_size", c.hp.batch_size}};
  if (c.calibrate_S) {
    j["hyper"]["S"] = "calibrate";
  } else {
    j["hyper"]["S"] = c.hp.S;
  }
  j["privacy"] = {{"delta", c.delta}, {"lambda_max", c.lambda_max}};
  if (c.weighting) j["weighting"] = std::string(fl::WeightingName(*c.weighting));
  j["solver"] = {{"lambda", c.solver.lambda},
                 {"lambda_relative", c.solver.lambda_relative},
                 {"memory", c.solver.memory},
                 {"max_iters", c.solver.max_iters},
                 {"grad_tol", c.solver.grad_tol},
                 {"obj_rel_tol", c.solver.obj_rel_tol},
                 {"continuation", c.solver.continuation},
                 {"dp_lambda_scale", c.dp_lambda_scale}};
  j["secure_agg"] = {{"frac_bits", c.frac_bits}};
  j["model"] = {{"layers", c.layers},
                {"activation", ActivationName(c.activation)},
                {"loss", LossName(c.loss)}};
  if (c.data.kind == "idx") {
    j["data"] = {{"source", "idx"},
                 {"train_images", c.data.train_images},
                 {"train_labels", c.data.train_labels},
                 {"test_images", c.data.test_images},
                 {"test_labels", c.data.test_labels}};
  } else {
    j["data"] = {{"source", "synthetic"},
                 {"per_client", c.data.per_client},
                 {"test_records", c.data.test_records},
                 {"noise", c.data.noise},
                 {"jitter", c.data.jitter},
                 {"task_seed", c.data.task_seed}};
  }
  j["partition"] = {
      {"clients", c.num_clients},
      {"mode", c.partition.mode == ml::PartitionMode::kIid ? "iid"
                                                           : "label-skew"},
      {"classes_per_client", c.partition.classes_per_client},
      {"ensure_class", c.partition.ensure_class},
      {"downsample", c.downsample}};
  j["eval_every"] = c.eval_every;
  j["early_stop"] = {{"patience", c.early_stop_patience},
                     {"metric", c.early_stop_metric}};
  j["output"] = c.output;
  j["format"] = c.format;
  j["record_wallclock"] = c.record_wallclock;
  return j.dump(2);
}

double BandwidthCost(double r, size_t n, size_t rounds, double C) {
  return r * static_cast<double>(n) * 32.0 * static_cast<double>(rounds) * C;
}

double MetricOf(const RoundRecord& rec, const std::string& metric) {
  if (metric == "accuracy") return rec.accuracy;
  if (metric == "balanced_accuracy") return rec.balanced_accuracy;
  if (metric == "auroc") return rec.auroc;
  throw InvalidArgument("unknown metric '" + metric + "'");
}

EarlyStopDecision EarlyStop(const std::vector<RoundRecord>& records,
                            size_t patience, const std::string& metric) {
  if (patience < 1) throw InvalidArgument("early_stop: patience must be >= 1");
  EarlyStopDecision d;
  double best = -std::numeric_limits<double>::infinity();
  size_t since = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    const double v = MetricOf(records[i], metric);
    if (v > best) {
      best = v;
      d.best_index = i;
      d.best_round = records[i].round;
      since = 0;
    } else if (++since >= patience) {
      d.stop = true;
      d.stop_index = i;
      return d;
    }
  }
  d.stop_index = records.empty() ? 0 : records.size() - 1;
  return d;
}

ExperimentResult RunExperiment(
    const ExperimentConfig& cfg,
    const std::function<void(const RoundRecord&)>& on_record) {
  cfg.Validate();
  const ml::ModelSpec spec =
      ml::ModelSpec::Parse(cfg.layers, cfg.activation, cfg.loss);
  LoadedData data = LoadData(cfg, spec.widths.front());
  if (data.train.features() != spec.widths.front() ||
      data.test.features() != spec.widths.front()) {
    throw InvalidArgument("model input width differs from data features");
  }

  Rng part_rng(DeriveSeed(cfg.master_seed, "partition"));
  ml::Partition part =
      ml::MakePartition(data.train, cfg.num_clients, cfg.partition, part_rng);
  if (cfg.downsample) part = ml::DownsamplePartition(data.train, part, part_rng);
  std::vector<ml::Dataset> clients;
  clients.reserve(part.size());
  for (const auto& p : part) clients.push_back(data.train.Subset(p));

  const ml::Mlp model(spec);
  Rng init_rng(DeriveSeed(cfg.master_seed, "init"));
  std::vector<double> w0 = model.Init(init_rng);

  fl::FederationConfig fc;
  fc.scheme = cfg.scheme;
  fc.hp = cfg.hp;
  fc.weighting = cfg.weighting;
  fc.ratio = fl::NonPrivate(cfg.scheme) == fl::Scheme::kStd ? 1.0 : cfg.ratio;
  fc.chunks = cfg.chunks;
  fc.shuffle_seed = cfg.shuffle_seed;
  fc.solver = cfg.solver;
  fc.dp_lambda_scale = cfg.dp_lambda_scale;
  fc.master_seed = cfg.master_seed;
  fc.frac_bits = cfg.frac_bits;
  fl::Federation fed(model, std::move(clients), fc, std::move(w0));
  if (cfg.calibrate_S) {
    fed.set_sensitivity(fl::CalibrateSensitivity(fed.CalibrationNorms()));
  }

  std::optional<dp::MomentsAccountant> accountant;
  if (fl::IsPrivate(cfg.scheme)) {
    accountant.emplace(cfg.hp.sigma, cfg.hp.C, cfg.lambda_max);
  }

  ExperimentResult result;
  result.n = fed.n();
  result.S = fed.config().hp.S;
  const double r = fc.ratio;
  size_t iterations = 0;
  for (size_t t = 1; t <= cfg.hp.rounds; ++t) {
    const auto start = std::chrono::steady_clock::now();
    fl::RoundReport rep;
    try {
      rep = fed.Step();
    } catch (const Error& e) {
      Rethrow(e, "round " + std::to_string(t) + ": ");
    }
    iterations += rep.solver_iterations;
    if (t % cfg.eval_every != 0 && t != cfg.hp.rounds) continue;

    const ml::EvalReport ev = ml::Evaluate(
        model.Predict(data.test, fed.state().w), data.test.labels,
        data.test.num_classes);
    RoundRecord rec;
    rec.round = t;
    rec.scheme = std::string(fl::SchemeName(cfg.scheme));
    rec.r = r;
    rec.epsilon = accountant ? accountant->Spend(t, cfg.delta).epsilon
                             : std::numeric_limits<double>::infinity();
    rec.cost_bits = BandwidthCost(r, result.n, t, cfg.hp.C);
    rec.accuracy = ev.accuracy;
    rec.balanced_accuracy = ev.balanced_accuracy;
    rec.auroc = ev.auroc;
    rec.solver_iterations = iterations;
    if (cfg.record_wallclock) {
      rec.wallclock_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    }
    iterations = 0;
    result.records.push_back(rec);
    if (on_record) on_record(rec);
    if (cfg.early_stop_patience > 0) {
      const EarlyStopDecision d = EarlyStop(
          result.records, cfg.early_stop_patience, cfg.early_stop_metric);
      if (d.stop) {
        result.early_stop = d;
        break;
      }
    }
  }
  result.final_weights = fed.state().w;
  return result;
}

}  // namespace fedcs::sim
