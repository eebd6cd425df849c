#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbandit/bandit.hpp"
#include "kbandit/design_opt.hpp"

namespace kbandit {

struct ExperimentConfig {
  std::string experiment;  // g_optimal | kernel_rbf | ips_vs_rips | bandit_regret | bandit_pe
  std::string scale = "desk";  // desk | paper; fills unset scale parameters

  int d = -1;                  // g_optimal / bandit ambient dimension
  int n = -1;                  // arm count (-1: d(d+1)/2 for g_optimal)
  int m = -1;                  // kernel grid parameter
  std::vector<int> m_list;     // ips_vs_rips sizes
  std::vector<long> T_grid;

  std::string noise = "gaussian";  // gaussian | student_t | none
  double sigma = 1.0;
  int student_dof = 3;
  double kernel_noise = 0.05;       // kernel experiment noise parameter
  bool kernel_noise_is_std = false; // default reads it as a variance
  double misspec_h = 0.0;

  int replications = 16;
  std::uint64_t seed = 1;
  std::string output_path = "results.csv";
  int parallelism = 1;

  double delta = 0.05;
  double gamma = -1.0;  // -1: experiment default (0 / 0.005 / 0)
  double bandwidth = 0.025;

  int solver_iters = -1;  // -1: experiment default
  double solver_lr0 = 1.0;

  std::string algo = "rips";  // bandit experiments: rips | ptr
  long horizon = 20000;
  double eps_target = 0.05;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

// Fills scale-dependent defaults (d, m, grids, gamma) for fields left unset.
void apply_defaults(ExperimentConfig& c);

struct ResultRow {
  std::string experiment;
  std::string estimator;
  long T = 0;
  int rep = 0;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

// Ground-truth instance shared by the estimation experiments: arms, metric
// directions, and the linear values of the target on both.
struct Scenario {
  ArmSet arms;
  std::vector<DualVector> metric_directions;
  VectorXd metric_truth;  // <theta*, v> per metric direction
  VectorXd arm_truth;     // <theta*, phi(x_i)> per arm
  double reward_bound = 0.0;
  double theta_norm = 0.0;
};

// Unit-norm Gaussian arms with a two-scale covariance; theta* = 1/sqrt(d).
Scenario gen_g_optimal_scenario(int d, int n, std::uint64_t seed);

// Squared grid on [0,1] with an RBF kernel; theta* is a fixed seeded smooth
// dual combination with unit RKHS norm.
Scenario gen_kernel_scenario(int m, double bandwidth, std::uint64_t seed);

// Standard basis arms in dimension m^2 + m, combinatorial-style directions
// v_i = sum_{j<=m} e_j + e_{i+m}, theta* = -1.
Scenario gen_ips_vs_rips_scenario(int m, std::uint64_t seed);

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  nlohmann::json summary;
};

ExperimentOutput run_experiment(const ExperimentConfig& config);

// CSV (header experiment,estimator,T,rep,metric,value,seed) next to a JSON
// summary; byte-stable for identical inputs.
void emit_results(const std::vector<ResultRow>& rows, const nlohmann::json& summary,
                  const std::string& output_path);

std::string summary_json_path(const std::string& output_path);

}  // namespace kbandit
