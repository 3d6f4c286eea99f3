#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "botwatch/detectors.hpp"
#include "botwatch/error.hpp"

namespace botwatch {

std::vector<std::size_t> default_autoencoder_layers(std::size_t dims) {
  const std::size_t half = std::max<std::size_t>((dims + 1) / 2, 1);
  const std::size_t quarter = std::max<std::size_t>((dims + 3) / 4, 1);
  return {dims, half, quarter, half, dims};
}

Autoencoder::Autoencoder(std::vector<std::size_t> layer_sizes, std::uint64_t seed)
    : layers_(std::move(layer_sizes)) {
  if (layers_.size() < 2) fail(ErrorCode::InvalidArgument, "autoencoder needs at least two layers");
  if (layers_.front() != layers_.back()) {
    fail(ErrorCode::InvalidArgument, "autoencoder output width must equal input width");
  }
  for (auto s : layers_) {
    if (s == 0) fail(ErrorCode::InvalidArgument, "autoencoder layer of width 0");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const double fan_in = static_cast<double>(layers_[l]);
    const double fan_out = static_cast<double>(layers_[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    std::vector<double> w(layers_[l + 1] * layers_[l]);
    for (auto& v : w) v = u(rng);
    weights_.push_back(std::move(w));
    biases_.emplace_back(layers_[l + 1], 0.0);
  }
}

void Autoencoder::forward(std::span<const double> x, std::vector<std::vector<double>>& act) const {
  const std::size_t depth = weights_.size();
  act.resize(depth + 1);
  act[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t in = layers_[l], out = layers_[l + 1];
    auto& a = act[l + 1];
    a.resize(out);
    const auto& w = weights_[l];
    for (std::size_t o = 0; o < out; ++o) {
      double s = biases_[l][o];
      const double* wr = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) s += wr[i] * act[l][i];
      a[o] = (l + 1 == depth) ? s : std::tanh(s);
    }
  }
}

std::vector<double> Autoencoder::reconstruct(std::span<const double> x) const {
  if (x.size() != layers_.front()) fail(ErrorCode::ManifestMismatch, "autoencoder input width mismatch");
  std::vector<std::vector<double>> act;
  forward(x, act);
  return act.back();
}

double Autoencoder::score(std::span<const double> x) const {
  const auto y = reconstruct(x);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s;
}

double Autoencoder::loss(const Matrix& x) const {
  if (x.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) total += score(x.row(r));
  return total / (static_cast<double>(x.rows()) * static_cast<double>(layers_.front()));
}

// Adds d(||x - x_hat||^2) / d(params) to grad.
void Autoencoder::accumulate_gradient(std::span<const double> x, std::vector<double>& grad,
                                      std::vector<std::vector<double>>& act,
                                      std::vector<std::vector<double>>& delta) const {
  forward(x, act);
  const std::size_t depth = weights_.size();
  delta.resize(depth + 1);
  auto& top = delta[depth];
  top.resize(layers_.back());
  for (std::size_t i = 0; i < top.size(); ++i) top[i] = 2.0 * (act[depth][i] - x[i]);

  // Offsets of each layer inside the flat parameter vector.
  std::vector<std::size_t> offset(depth);
  std::size_t pos = 0;
  for (std::size_t l = 0; l < depth; ++l) {
    offset[l] = pos;
    pos += weights_[l].size() + biases_[l].size();
  }

  for (std::size_t l = depth; l-- > 0;) {
    const std::size_t in = layers_[l], out = layers_[l + 1];
    const auto& d = delta[l + 1];
    double* gw = grad.data() + offset[l];
    double* gb = gw + weights_[l].size();
    for (std::size_t o = 0; o < out; ++o) {
      const double dv = d[o];
      double* row = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) row[i] += dv * act[l][i];
      gb[o] += dv;
    }
    if (l == 0) break;
    auto& prev = delta[l];
    prev.assign(in, 0.0);
    const auto& w = weights_[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += wr[i] * d[o];
    }
    for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - act[l][i] * act[l][i];
  }
}

std::vector<double> Autoencoder::gradient(const Matrix& x) const {
  std::vector<double> grad(parameters().size(), 0.0);
  if (x.rows() == 0) return grad;
  std::vector<std::vector<double>> act, delta;
  for (std::size_t r = 0; r < x.rows(); ++r) accumulate_gradient(x.row(r), grad, act, delta);
  const double scale = 1.0 / (static_cast<double>(x.rows()) * static_cast<double>(layers_.front()));
  for (auto& g : grad) g *= scale;
  return grad;
}

std::vector<double> Autoencoder::parameters() const {
  std::vector<double> flat;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    flat.insert(flat.end(), weights_[l].begin(), weights_[l].end());
    flat.insert(flat.end(), biases_[l].begin(), biases_[l].end());
  }
  return flat;
}

void Autoencoder::set_parameters(std::span<const double> flat) {
  std::size_t pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (pos + weights_[l].size() + biases_[l].size() > flat.size()) {
      fail(ErrorCode::InvalidArgument, "parameter vector too short");
    }
    std::copy_n(flat.begin() + static_cast<long>(pos), weights_[l].size(), weights_[l].begin());
    pos += weights_[l].size();
    std::copy_n(flat.begin() + static_cast<long>(pos), biases_[l].size(), biases_[l].begin());
    pos += biases_[l].size();
  }
  if (pos != flat.size()) fail(ErrorCode::InvalidArgument, "parameter vector size mismatch");
}

Autoencoder Autoencoder::fit(const Matrix& x, const AutoencoderParams& p,
                             std::vector<double>* loss_history) {
  if (x.rows() == 0) fail(ErrorCode::EmptyTraining, "autoencoder needs training rows");
  if (!(p.learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be positive");
  auto layers = p.layer_sizes.empty() ? default_autoencoder_layers(x.cols()) : p.layer_sizes;
  if (layers.front() != x.cols()) fail(ErrorCode::InvalidArgument, "autoencoder input width mismatch");
  Autoencoder net(layers, p.seed);

  const std::size_t n = x.rows();
  const std::size_t batch = (p.batch_size == 0 || p.batch_size > n) ? n : p.batch_size;
  std::vector<double> params = net.parameters();
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t t = 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(p.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<double> grad(params.size());
  std::vector<std::vector<double>> act, delta;
  const double d = static_cast<double>(x.cols());

  for (std::size_t epoch = 0; epoch < p.epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i) net.accumulate_gradient(x.row(order[i]), grad, act, delta);
      const double scale = 1.0 / (static_cast<double>(stop - start) * d);
      ++t;
      if (p.optimizer == Optimizer::Adam) {
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t k = 0; k < params.size(); ++k) {
          const double g = grad[k] * scale;
          m[k] = beta1 * m[k] + (1.0 - beta1) * g;
          v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
          params[k] -= p.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
        }
      } else {
        for (std::size_t k = 0; k < params.size(); ++k) params[k] -= p.learning_rate * grad[k] * scale;
      }
      net.set_parameters(params);
    }
    const double l = net.loss(x);
    if (!std::isfinite(l)) {
      fail(ErrorCode::DivergedLoss, "autoencoder loss diverged at epoch " + std::to_string(epoch + 1));
    }
    if (loss_history) loss_history->push_back(l);
  }
  return net;
}

nlohmann::json Autoencoder::to_json() const {
  return {{"layers", layers_}, {"weights", weights_}, {"biases", biases_}};
}

Autoencoder Autoencoder::from_json(const nlohmann::json& j) {
  Autoencoder a;
  a.layers_ = j.at("layers").get<std::vector<std::size_t>>();
  a.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
  a.biases_ = j.at("biases").get<std::vector<std::vector<double>>>();
  if (a.layers_.size() < 2 || a.weights_.size() + 1 != a.layers_.size() ||
      a.biases_.size() != a.weights_.size()) {
    fail(ErrorCode::ModelFormat, "autoencoder layer structure malformed");
  }
  for (std::size_t l = 0; l < a.weights_.size(); ++l) {
    if (a.weights_[l].size() != a.layers_[l] * a.layers_[l + 1] || a.biases_[l].size() != a.layers_[l + 1]) {
      fail(ErrorCode::ModelFormat, "autoencoder weight shape malformed");
    }
  }
  return a;
}

}  // namespace botwatch
