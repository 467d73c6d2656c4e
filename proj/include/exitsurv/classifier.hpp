#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exitsurv/data.hpp"
#include "exitsurv/linalg.hpp"

#include "json.hpp"

namespace exitsurv {

// Self-normalizing activation; constants from the SELU fixed-point
// equations (lambda ~ 1.0507, alpha ~ 1.6733).
double selu(double x);
double selu_derivative(double x);

struct TrainConfig {
  int epochs = 70;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;
  int hidden = 32;
  std::uint64_t seed = 0;
  int smote_k = 5;
};

// One hidden layer, sigmoid output = P(positive class).
struct MlpModel {
  int input = kNumFeatures;
  int hidden = 0;
  std::vector<double> w1;  // hidden x input, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;
  std::vector<double> input_mean;  // standardization constants
  std::vector<double> input_sd;
  TrainConfig config;  // echo of the training setup
};

// Flattened parameters: w1 rows, then b1, w2, b2.
std::vector<double> mlp_pack(const MlpModel& m);
void mlp_unpack(MlpModel& m, const std::vector<double>& theta);

// Mean binary cross-entropy over the rows of x (standardized through the
// model's constants), and its gradient in pack order. Exposed so the
// backpropagation can be checked against finite differences.
double mlp_loss(const MlpModel& m, const Matrix& x, const std::vector<int>& y);
std::vector<double> mlp_loss_gradient(const MlpModel& m, const Matrix& x,
                                      const std::vector<int>& y);

struct Resampled {
  Matrix x;
  std::vector<int> y;
  long n_synthetic = 0;
};

// Plain geometric oversampling: synthetic minority points drawn uniformly
// on segments toward one of the k nearest minority neighbors, until the
// classes balance. Originals are preserved, in order, ahead of synthetics.
Resampled smote_resample(const Matrix& x, const std::vector<int>& y, int k,
                         std::uint64_t seed);

// Adam on shuffled mini-batches for config.epochs epochs; deterministic
// for a given seed. Standardization constants are frozen from x.
MlpModel train_mlp(const Matrix& x, const std::vector<int>& y,
                   const TrainConfig& config);

double predict_proba(const MlpModel& m, const FeatureVector& x);

// Positive iff p strictly exceeds the threshold.
bool classify(double p, double threshold = 0.5);

struct MetricsReport {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  double precision_pos = 0.0, recall_pos = 0.0;
  double precision_neg = 0.0, recall_neg = 0.0;
  double accuracy = 0.0;
  // Zero-denominator metrics are reported as 0 with the flag cleared.
  bool precision_pos_defined = false, recall_pos_defined = false;
  bool precision_neg_defined = false, recall_neg_defined = false;
};

MetricsReport metrics(const std::vector<int>& predicted,
                      const std::vector<int>& actual);

nlohmann::json metrics_to_json(const MetricsReport& m);
nlohmann::json mlp_to_json(const MlpModel& m);
MlpModel mlp_from_json(const nlohmann::json& j);
void save_mlp(const MlpModel& m, const std::string& path);
MlpModel load_mlp(const std::string& path);

}  // namespace exitsurv
