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


// fedcs command line: run experiments, query the privacy accountant and
// probe the compressive-sensing codec.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedcs/bpdn.h"
#include "fedcs/cs_codec.h"
#include "fedcs/dp_accountant.h"
#include "fedcs/error.h"
#include "fedcs/experiment.h"
#include "fedcs/results.h"

namespace {

using fedcs::sim::FormatNumber;

int ExitCodeFor(fedcs::ErrorCode code) {
  switch (code) {
    case fedcs::ErrorCode::kInvalidArgument:
      return 2;
    case fedcs::ErrorCode::kNumericFailure:
      return 3;
    case fedcs::ErrorCode::kRange:
      return 4;
    case fedcs::ErrorCode::kProtocol:
      return 5;
    case fedcs::ErrorCode::kFormat:
      return 6;
    case fedcs::ErrorCode::kIo:
      return 7;
  }
  return 1;
}

struct RunArgs {
  std::string config;
  std::optional<std::string> scheme;
  std::optional<double> ratio;
  std::optional<double> sigma;
  std::optional<size_t> rounds;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

int Run(const RunArgs& a) {
  fedcs::sim::ExperimentConfig cfg = fedcs::sim::LoadConfig(a.config);
  if (a.scheme) cfg.scheme = fedcs::fl::ParseScheme(*a.scheme);
  if (a.ratio) cfg.ratio = *a.ratio;
  if (a.sigma) cfg.hp.sigma = *a.sigma;
  if (a.rounds) cfg.hp.rounds = *a.rounds;
  if (a.seed) cfg.master_seed = *a.seed;
  if (a.out) cfg.output = *a.out;
  if (a.format) cfg.format = *a.format;
  cfg.Validate();

  const auto format = fedcs::sim::ParseFormat(cfg.format);
  std::optional<fedcs::sim::ResultWriter> writer;
  const bool to_stdout = cfg.output.empty() || cfg.output == "-";
  if (!to_stdout) {
    writer.emplace(cfg.output, format);
  } else if (format == fedcs::sim::ResultFormat::kCsv) {
    std::cout << fedcs::sim::CsvHeader() << '\n';
  }
  const auto result = fedcs::sim::RunExperiment(
      cfg, [&](const fedcs::sim::RoundRecord& rec) {
        if (writer) {
          writer->Write(rec);
        } else {
          std::cout << (format == fedcs::sim::ResultFormat::kCsv
                            ? fedcs::sim::CsvRow(rec)
                            : fedcs::sim::JsonLine(rec))
                    << std::endl;
        }
      });
  if (result.early_stop) {
    std::cerr << "early stop at round "
              << result.records[result.early_stop->stop_index].round
              << ", best round " << result.early_stop->best_round << '\n';
  }
  return 0;
}

struct AccountantArgs {
  double sigma = 1.0;
  double q = 1.0;
  size_t steps = 1;
  double delta = 1e-5;
  int lambda_max = 64;
};

int Accountant(const AccountantArgs& a) {
  fedcs::dp::PrivacyParams params{a.sigma, a.q, a.delta, a.steps};
  params.Validate();
  const fedcs::dp::MomentsAccountant acc(a.sigma, a.q, a.lambda_max);
  const fedcs::dp::PrivacySpend spend = acc.Spend(a.steps, a.delta);
  std::cout << "sigma,q,steps,delta,epsilon,lambda_star\n"
            << FormatNumber(a.sigma) << ',' << FormatNumber(a.q) << ','
            << a.steps << ',' << FormatNumber(a.delta) << ','
            << FormatNumber(spend.epsilon) << ',' << spend.lambda_star
            << "\n\nlambda,log_moment,epsilon\n";
  const std::vector<double> eps = acc.EpsilonCurve(a.steps, a.delta);
  for (size_t i = 0; i < eps.size(); ++i) {
    std::cout << i + 1 << ',' << FormatNumber(acc.log_moments()[i]) << ','
              << FormatNumber(eps[i]) << '\n';
  }
  return 0;
}

struct CodecArgs {
  size_t n = 1000;
  size_t m = 300;
  size_t p = 1;
  size_t sparsity = 20;
  double noise_std = 0.0;
  size_t trials = 10;
  uint64_t seed = 1;
  double lambda = 0.0;  // 0 picks the default rule
  size_t max_iters = 500;
  bool per_trial = false;
};

int Codec(const CodecArgs& a) {
  const auto cfg = fedcs::cs::SensingConfig::Make(a.n, a.m, a.p, a.seed);
  if (a.sparsity < 1 || a.sparsity > a.n) {
    throw fedcs::InvalidArgument("sparsity must lie in [1, n]");
  }
  if (a.trials < 1) throw fedcs::InvalidArgument("trials must be >= 1");
  fedcs::bpdn::SolverOptions opts;
  opts.max_iters = a.max_iters;
  if (a.lambda > 0.0) {
    opts.lambda = a.lambda;
  } else if (a.noise_std > 0.0) {
    opts.lambda = fedcs::bpdn::UniversalThreshold(a.noise_std,
                                                  cfg.rows_per_chunk());
  } else {
    opts.lambda = 1e-6;
    opts.lambda_relative = true;
  }
  std::vector<double> errors;
  if (a.per_trial) std::cout << "trial,rel_error,iterations\n";
  for (size_t t = 0; t < a.trials; ++t) {
    fedcs::Rng rng(fedcs::DeriveSeed(a.seed, "codec-trial", t));
    std::vector<double> x(a.n, 0.0);
    for (size_t i : fedcs::SeededSubset(a.n, a.sparsity, rng())) {
      x[i] = (rng() & 1) ? 1.0 : -1.0;
    }
    fedcs::cs::CompressedUpdate y = fedcs::cs::Compress(x, cfg);
    if (a.noise_std > 0.0) {
      std::normal_distribution<double> noise(0.0, a.noise_std);
      for (double& v : y.coeffs) v += noise(rng);
    }
    const fedcs::bpdn::Decompression rec = fedcs::bpdn::Decompress(y, opts);
    double num = 0.0;
    double den = 0.0;
    for (size_t i = 0; i < a.n; ++i) {
      num += (rec.x[i] - x[i]) * (rec.x[i] - x[i]);
      den += x[i] * x[i];
    }
    errors.push_back(std::sqrt(num / den));
    if (a.per_trial) {
      std::cout << t << ',' << FormatNumber(errors.back()) << ','
                << rec.total_iterations() << '\n';
    }
  }
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  const double mean =
      std::accumulate(errors.begin(), errors.end(), 0.0) / errors.size();
  const double median =
      sorted.size() % 2 ? sorted[sorted.size() / 2]
                        : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                 sorted[sorted.size() / 2]);
  const auto recovered = std::count_if(errors.begin(), errors.end(),
                                       [](double e) { return e <= 1e-2; });
  if (a.per_trial) std::cout << '\n';
  std::cout << "n,m,p,sparsity,noise_std,trials,mean_rel_error,"
               "median_rel_error,max_rel_error,recovered\n"
            << a.n << ',' << a.m << ',' << a.p << ',' << a.sparsity << ','
            << FormatNumber(a.noise_std) << ',' << a.trials << ','
            << FormatNumber(mean) << ',' << FormatNumber(median) << ','
            << FormatNumber(sorted.back()) << ',' << recovered << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning with compressive sensing and DP"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a config");
  run_cmd->add_option("--config", run.config, "JSON config file")->required();
  run_cmd->add_option("--scheme", run.scheme, "Override the scheme");
  run_cmd->add_option("--ratio", run.ratio, "Override compression ratio r");
  run_cmd->add_option("--sigma", run.sigma, "Override noise multiplier");
  run_cmd->add_option("--rounds", run.rounds, "Override T_cl");
  run_cmd->add_option("--seed", run.seed, "Override the master seed");
  run_cmd->add_option("--out", run.out, "Result file ('-' for stdout)");
  run_cmd->add_option("--format", run.format, "csv or jsonl");

  AccountantArgs acc;
  auto* acc_cmd = app.add_subcommand("accountant", "Privacy spend (epsilon)");
  acc_cmd->add_option("--sigma", acc.sigma, "Noise multiplier")->required();
  acc_cmd->add_option("--q", acc.q, "Sampling probability")->required();
  acc_cmd->add_option("--steps", acc.steps, "Composed rounds")->required();
  acc_cmd->add_option("--delta", acc.delta, "Target delta")->required();
  acc_cmd->add_option("--lambda-max", acc.lambda_max, "Largest moment order");

  CodecArgs codec;
  auto* codec_cmd = app.add_subcommand("codec", "Planted-sparse recovery");
  codec_cmd->add_option("--n", codec.n, "Vector length");
  codec_cmd->add_option("--m", codec.m, "Measurements");
  codec_cmd->add_option("--p", codec.p, "Chunks");
  codec_cmd->add_option("--sparsity", codec.sparsity, "Nonzeros U");
  codec_cmd->add_option("--noise-std", codec.noise_std, "Measurement noise");
  codec_cmd->add_option("--trials", codec.trials, "Number of trials");
  codec_cmd->add_option("--seed", codec.seed, "Seed");
  codec_cmd->add_option("--lambda", codec.lambda, "L1 weight (0 = default)");
  codec_cmd->add_option("--max-iters", codec.max_iters, "Solver budget");
  codec_cmd->add_flag("--per-trial", codec.per_trial, "Print every trial");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return Run(run);
    if (*acc_cmd) return Accountant(acc);
    if (*codec_cmd) return Codec(codec);
  } catch (const fedcs::Error& e) {
    std::cerr << "error: " << fedcs::ErrorCodeName(e.code()) << ": "
              << e.what() << '\n';
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
