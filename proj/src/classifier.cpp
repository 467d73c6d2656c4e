#include "exitsurv/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "exitsurv/rng.hpp"

namespace exitsurv {

namespace {

// Fixed points of the self-normalizing map (Klambauer et al. constants).
constexpr double kSeluLambda = 1.0507009873554805;
constexpr double kSeluAlpha = 1.6732632423543773;

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

double selu(double x) {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

double selu_derivative(double x) {
  return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

std::vector<double> mlp_pack(const MlpModel& m) {
  std::vector<double> theta;
  theta.reserve(m.w1.size() + m.b1.size() + m.w2.size() + 1);
  theta.insert(theta.end(), m.w1.begin(), m.w1.end());
  theta.insert(theta.end(), m.b1.begin(), m.b1.end());
  theta.insert(theta.end(), m.w2.begin(), m.w2.end());
  theta.push_back(m.b2);
  return theta;
}

void mlp_unpack(MlpModel& m, const std::vector<double>& theta) {
  size_t nw1 = static_cast<size_t>(m.hidden) * m.input;
  size_t nh = static_cast<size_t>(m.hidden);
  if (theta.size() != nw1 + 2 * nh + 1)
    throw std::invalid_argument("mlp_unpack: parameter vector has wrong length");
  m.w1.assign(theta.begin(), theta.begin() + static_cast<long>(nw1));
  m.b1.assign(theta.begin() + static_cast<long>(nw1),
              theta.begin() + static_cast<long>(nw1 + nh));
  m.w2.assign(theta.begin() + static_cast<long>(nw1 + nh),
              theta.begin() + static_cast<long>(nw1 + 2 * nh));
  m.b2 = theta.back();
}

namespace {

// Forward/backward over a set of rows. Gradient layout matches mlp_pack;
// loss is the batch mean of y*softplus(-z) + (1-y)*softplus(z).
double batch_gradient(const MlpModel& m, const Matrix& x,
                      const std::vector<int>& y, const std::vector<int>& rows,
                      std::vector<double>* grad) {
  int h = m.hidden, in = m.input;
  if (grad) grad->assign(static_cast<size_t>(h) * in + 2 * h + 1, 0.0);
  double loss = 0.0;
  std::vector<double> xs(static_cast<size_t>(in));
  std::vector<double> z1(static_cast<size_t>(h)), a1(static_cast<size_t>(h));
  double inv_b = 1.0 / static_cast<double>(rows.size());

  for (int r : rows) {
    for (int j = 0; j < in; ++j)
      xs[static_cast<size_t>(j)] =
          (x(r, j) - m.input_mean[static_cast<size_t>(j)]) /
          m.input_sd[static_cast<size_t>(j)];
    for (int u = 0; u < h; ++u) {
      double s = m.b1[static_cast<size_t>(u)];
      const double* wrow = m.w1.data() + static_cast<size_t>(u) * in;
      for (int j = 0; j < in; ++j) s += wrow[j] * xs[static_cast<size_t>(j)];
      z1[static_cast<size_t>(u)] = s;
      a1[static_cast<size_t>(u)] = selu(s);
    }
    double zeta = m.b2;
    for (int u = 0; u < h; ++u)
      zeta += m.w2[static_cast<size_t>(u)] * a1[static_cast<size_t>(u)];
    double yi = static_cast<double>(y[static_cast<size_t>(r)]);
    loss += (yi * softplus(-zeta) + (1.0 - yi) * softplus(zeta)) * inv_b;

    if (!grad) continue;
    double dzeta = (sigmoid(zeta) - yi) * inv_b;
    double* gw1 = grad->data();
    double* gb1 = gw1 + static_cast<size_t>(h) * in;
    double* gw2 = gb1 + h;
    double& gb2 = (*grad)[static_cast<size_t>(h) * in + 2 * h];
    gb2 += dzeta;
    for (int u = 0; u < h; ++u) {
      gw2[u] += dzeta * a1[static_cast<size_t>(u)];
      double dz1 = dzeta * m.w2[static_cast<size_t>(u)] *
                   selu_derivative(z1[static_cast<size_t>(u)]);
      gb1[u] += dz1;
      double* gw1row = gw1 + static_cast<size_t>(u) * in;
      for (int j = 0; j < in; ++j) gw1row[j] += dz1 * xs[static_cast<size_t>(j)];
    }
  }
  return loss;
}

std::vector<int> all_rows(int n) {
  std::vector<int> rows(static_cast<size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

double mlp_loss(const MlpModel& m, const Matrix& x, const std::vector<int>& y) {
  if (x.cols != m.input || static_cast<size_t>(x.rows) != y.size())
    throw std::invalid_argument("mlp_loss: dimension mismatch");
  return batch_gradient(m, x, y, all_rows(x.rows), nullptr);
}

std::vector<double> mlp_loss_gradient(const MlpModel& m, const Matrix& x,
                                      const std::vector<int>& y) {
  if (x.cols != m.input || static_cast<size_t>(x.rows) != y.size())
    throw std::invalid_argument("mlp_loss_gradient: dimension mismatch");
  std::vector<double> grad;
  batch_gradient(m, x, y, all_rows(x.rows), &grad);
  return grad;
}

Resampled smote_resample(const Matrix& x, const std::vector<int>& y, int k,
                         std::uint64_t seed) {
  if (static_cast<size_t>(x.rows) != y.size())
    throw std::invalid_argument("smote_resample: dimension mismatch");
  if (k < 1) throw std::invalid_argument("smote_resample: k must be >= 1");

  long n_pos = std::count(y.begin(), y.end(), 1);
  long n_neg = static_cast<long>(y.size()) - n_pos;
  int minority_label = n_pos <= n_neg ? 1 : 0;
  long n_min = std::min(n_pos, n_neg);
  long deficit = std::max(n_pos, n_neg) - n_min;

  Resampled out;
  out.y = y;
  if (deficit == 0) {
    out.x = x;
    return out;
  }
  if (n_min < 2)
    throw std::runtime_error(
        "smote_resample: minority class needs at least 2 members");

  std::vector<int> minority;
  for (size_t i = 0; i < y.size(); ++i)
    if (y[i] == minority_label) minority.push_back(static_cast<int>(i));

  // k nearest minority neighbors of each minority point, by squared
  // Euclidean distance (ties by index for determinism).
  int kk = static_cast<int>(std::min<long>(k, n_min - 1));
  size_t m = minority.size();
  std::vector<std::vector<int>> nearest(m);
  std::vector<std::pair<double, int>> dist(m - 1);
  for (size_t a = 0; a < m; ++a) {
    dist.clear();
    for (size_t b = 0; b < m; ++b) {
      if (b == a) continue;
      double d2 = 0.0;
      for (int j = 0; j < x.cols; ++j) {
        double d = x(minority[a], j) - x(minority[b], j);
        d2 += d * d;
      }
      dist.emplace_back(d2, minority[b]);
    }
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    nearest[a].reserve(static_cast<size_t>(kk));
    for (int i = 0; i < kk; ++i) nearest[a].push_back(dist[static_cast<size_t>(i)].second);
  }

  out.x = Matrix(x.rows + static_cast<int>(deficit), x.cols);
  std::copy(x.a.begin(), x.a.end(), out.x.a.begin());
  Rng rng(seed);
  for (long s = 0; s < deficit; ++s) {
    size_t a = rng.uniform_int(m);
    int base = minority[a];
    int nn = nearest[a][rng.uniform_int(static_cast<size_t>(kk))];
    double u = rng.uniform01();
    int row = x.rows + static_cast<int>(s);
    for (int j = 0; j < x.cols; ++j)
      out.x(row, j) = x(base, j) + u * (x(nn, j) - x(base, j));
    out.y.push_back(minority_label);
  }
  out.n_synthetic = deficit;
  return out;
}

MlpModel train_mlp(const Matrix& x, const std::vector<int>& y,
                   const TrainConfig& config) {
  int n = x.rows, in = x.cols;
  if (static_cast<size_t>(n) != y.size())
    throw std::invalid_argument("train_mlp: dimension mismatch");
  if (n < 2) throw std::invalid_argument("train_mlp: need at least 2 rows");
  if (config.epochs < 1 || config.batch_size < 1 || config.hidden < 1 ||
      !(config.learning_rate > 0.0))
    throw std::invalid_argument("train_mlp: bad configuration");

  MlpModel m;
  m.input = in;
  m.hidden = config.hidden;
  m.config = config;
  m.input_mean.assign(static_cast<size_t>(in), 0.0);
  m.input_sd.assign(static_cast<size_t>(in), 1.0);
  for (int j = 0; j < in; ++j) {
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += x(i, j);
    mu /= n;
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      double d = x(i, j) - mu;
      v += d * d;
    }
    double sd = std::sqrt(v / n);
    m.input_mean[static_cast<size_t>(j)] = mu;
    // A constant column carries no signal; unit scale keeps it inert
    // instead of dividing by zero.
    m.input_sd[static_cast<size_t>(j)] = sd > 0.0 ? sd : 1.0;
  }

  // LeCun-normal initialization, the self-normalizing pairing for selu.
  Rng rng(config.seed);
  m.w1.resize(static_cast<size_t>(config.hidden) * in);
  m.b1.assign(static_cast<size_t>(config.hidden), 0.0);
  m.w2.resize(static_cast<size_t>(config.hidden));
  double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  double s2 = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  for (double& w : m.w1) w = s1 * rng.normal();
  for (double& w : m.w2) w = s2 * rng.normal();
  m.b2 = 0.0;

  size_t np = m.w1.size() + m.b1.size() + m.w2.size() + 1;
  std::vector<double> theta = mlp_pack(m);
  std::vector<double> adam_m(np, 0.0), adam_v(np, 0.0), grad;
  long step = 0;
  std::vector<int> order = all_rows(n);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fresh pass order each epoch, deterministic from the seed.
    for (size_t i = order.size() - 1; i > 0; --i) {
      size_t j = rng.uniform_int(i + 1);
      std::swap(order[i], order[j]);
    }
    for (int start = 0; start < n; start += config.batch_size) {
      int stop = std::min(n, start + config.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + stop);
      double loss = batch_gradient(m, x, y, batch, &grad);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_mlp: non-finite loss at epoch " +
                                 std::to_string(epoch + 1));
      ++step;
      double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (size_t i = 0; i < np; ++i) {
        adam_m[i] = config.beta1 * adam_m[i] + (1.0 - config.beta1) * grad[i];
        adam_v[i] = config.beta2 * adam_v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        theta[i] -= config.learning_rate * (adam_m[i] / bc1) /
                    (std::sqrt(adam_v[i] / bc2) + config.epsilon);
      }
      mlp_unpack(m, theta);
    }
  }
  return m;
}

double predict_proba(const MlpModel& m, const FeatureVector& x) {
  if (m.input != kNumFeatures)
    throw std::invalid_argument("predict_proba: model does not take " +
                                std::to_string(kNumFeatures) + " inputs");
  double zeta = m.b2;
  for (int u = 0; u < m.hidden; ++u) {
    double s = m.b1[static_cast<size_t>(u)];
    const double* wrow = m.w1.data() + static_cast<size_t>(u) * m.input;
    for (int j = 0; j < m.input; ++j)
      s += wrow[j] * (x[static_cast<size_t>(j)] - m.input_mean[static_cast<size_t>(j)]) /
           m.input_sd[static_cast<size_t>(j)];
    zeta += m.w2[static_cast<size_t>(u)] * selu(s);
  }
  return sigmoid(zeta);
}

bool classify(double p, double threshold) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("classify: probability outside [0,1]");
  return p > threshold;
}

MetricsReport metrics(const std::vector<int>& predicted,
                      const std::vector<int>& actual) {
  if (predicted.size() != actual.size())
    throw std::invalid_argument("metrics: length mismatch");
  if (predicted.empty()) throw std::invalid_argument("metrics: empty input");
  MetricsReport r;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == 1 && actual[i] == 1) ++r.tp;
    else if (predicted[i] == 1 && actual[i] == 0) ++r.fp;
    else if (predicted[i] == 0 && actual[i] == 1) ++r.fn;
    else ++r.tn;
  }
  auto ratio = [](long num, long den, double& out, bool& defined) {
    defined = den > 0;
    out = defined ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  ratio(r.tp, r.tp + r.fp, r.precision_pos, r.precision_pos_defined);
  ratio(r.tp, r.tp + r.fn, r.recall_pos, r.recall_pos_defined);
  ratio(r.tn, r.tn + r.fn, r.precision_neg, r.precision_neg_defined);
  ratio(r.tn, r.tn + r.fp, r.recall_neg, r.recall_neg_defined);
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(predicted.size());
  return r;
}

nlohmann::json metrics_to_json(const MetricsReport& m) {
  nlohmann::json j;
  j["precision_pos"] = m.precision_pos;
  j["recall_pos"] = m.recall_pos;
  j["precision_neg"] = m.precision_neg;
  j["recall_neg"] = m.recall_neg;
  j["accuracy"] = m.accuracy;
  j["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
  nlohmann::json undef = nlohmann::json::array();
  if (!m.precision_pos_defined) undef.push_back("precision_pos");
  if (!m.recall_pos_defined) undef.push_back("recall_pos");
  if (!m.precision_neg_defined) undef.push_back("precision_neg");
  if (!m.recall_neg_defined) undef.push_back("recall_neg");
  j["undefined"] = undef;
  return j;
}

nlohmann::json mlp_to_json(const MlpModel& m) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["input"] = m.input;
  j["hidden"] = m.hidden;
  j["w1"] = m.w1;
  j["b1"] = m.b1;
  j["w2"] = m.w2;
  j["b2"] = m.b2;
  j["input_mean"] = m.input_mean;
  j["input_sd"] = m.input_sd;
  j["config"] = {{"epochs", m.config.epochs},
                 {"learning_rate", m.config.learning_rate},
                 {"beta1", m.config.beta1},
                 {"beta2", m.config.beta2},
                 {"epsilon", m.config.epsilon},
                 {"batch_size", m.config.batch_size},
                 {"hidden", m.config.hidden},
                 {"seed", m.config.seed},
                 {"smote_k", m.config.smote_k}};
  return j;
}

MlpModel mlp_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported model format version");
  MlpModel m;
  m.input = j.at("input").get<int>();
  m.hidden = j.at("hidden").get<int>();
  m.w1 = j.at("w1").get<std::vector<double>>();
  m.b1 = j.at("b1").get<std::vector<double>>();
  m.w2 = j.at("w2").get<std::vector<double>>();
  m.b2 = j.at("b2").get<double>();
  m.input_mean = j.at("input_mean").get<std::vector<double>>();
  m.input_sd = j.at("input_sd").get<std::vector<double>>();
  const auto& c = j.at("config");
  m.config.epochs = c.at("epochs").get<int>();
  m.config.learning_rate = c.at("learning_rate").get<double>();
  m.config.beta1 = c.at("beta1").get<double>();
  m.config.beta2 = c.at("beta2").get<double>();
  m.config.epsilon = c.at("epsilon").get<double>();
  m.config.batch_size = c.at("batch_size").get<int>();
  m.config.hidden = c.at("hidden").get<int>();
  m.config.seed = c.at("seed").get<std::uint64_t>();
  m.config.smote_k = c.at("smote_k").get<int>();
  return m;
}

void save_mlp(const MlpModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << mlp_to_json(m).dump(2) << '\n';
}

MlpModel load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json j;
  in >> j;
  return mlp_from_json(j);
}

}  // namespace exitsurv
