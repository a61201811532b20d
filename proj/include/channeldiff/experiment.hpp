#pragma once

#include "channeldiff/metrics.hpp"
#include "channeldiff/trainer.hpp"

namespace channeldiff::experiment {

// End-to-end pipeline settings. Every randomized stage takes
// seed * 1000 + stage counter (0 data, 1 teacher, 2 student, 3 scratch
// student, 4 prediction) so reruns with one root seed are reproducible.
struct ExperimentConfig {
  unsigned long long seed = 7;
  std::string out_dir = "experiment_out";

  dataset::DatasetConfig data;   // training pool; n_samples includes val split
  int n_eval = 16;               // extra held-out sequences

  neural::DenoiserConfig model;  // teacher architecture; student adds streams
  train::TrainConfig teacher;
  train::TrainConfig student;

  bool run_student = true;
  bool no_teacher = false;  // also train a from-scratch student for comparison
  bool write_features = true;
};

ExperimentConfig load_experiment_config(const std::string& path);

struct ExperimentResult {
  std::string report_path;
  metrics::MetricReport physics;
  metrics::MetricReport teacher;
  metrics::MetricReport student;        // zeroed when run_student is false
  metrics::MetricReport student_scratch;  // zeroed unless no_teacher
  double student_initial_loss = 0;  // first-batch loss, teacher-initialized
  double scratch_initial_loss = 0;  // first-batch loss, random init
  std::vector<metrics::RankRow> ranking;
};

// Runs generate -> features -> train -> predict -> eval, writing
// features/, checkpoints/, predictions/ and report.json (report_v1).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace channeldiff::experiment
