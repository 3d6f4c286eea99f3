#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "botwatch/matrix.hpp"

namespace botwatch {

enum class DetectorKind { IsolationForest, EllipticEnvelope, LocalOutlierFactor, OneClassSvm, Autoencoder };

inline constexpr DetectorKind kAllDetectorKinds[] = {
    DetectorKind::IsolationForest, DetectorKind::EllipticEnvelope,
    DetectorKind::LocalOutlierFactor, DetectorKind::OneClassSvm, DetectorKind::Autoencoder};

/// Short names: if, ee, lof, osvm, ae.
std::string to_string(DetectorKind k);
DetectorKind parse_detector_kind(std::string_view text);

/// Numeric hyperparameters by name. Unknown names are rejected at fit time.
using ParamMap = std::map<std::string, double>;

/// A trained one-class model. Scores are oriented so that higher means more
/// anomalous for every kind.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual DetectorKind kind() const noexcept = 0;
  virtual std::size_t dims() const noexcept = 0;
  virtual double score(std::span<const double> x) const = 0;
  virtual nlohmann::json to_json() const = 0;

  std::vector<double> score_all(const Matrix& x) const;
};

/// Defaults for data of dimension `dims`.
ParamMap default_params(DetectorKind kind, std::size_t dims);
std::unique_ptr<Detector> fit_detector(DetectorKind kind, const Matrix& x, const ParamMap& params);
std::unique_ptr<Detector> detector_from_json(DetectorKind kind, const nlohmann::json& j);

// --- Isolation forest -------------------------------------------------------

struct IsolationForestParams {
  std::size_t n_trees = 100;
  std::size_t subsample = 256;
  std::uint64_t seed = 1;
};

/// Average unsuccessful-search path length of a BST over n points:
/// c(n) = 2 H(n-1) - 2 (n-1) / n, with c(0) = c(1) = 0.
double average_path_length(std::size_t n);
/// 2^(-mean_path / c(n)).
double isolation_score(double mean_path, std::size_t n);

class IsolationForest final : public Detector {
 public:
  struct Node {
    std::int32_t feature = -1;  ///< -1 for leaves
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t size = 0;
  };
  using Tree = std::vector<Node>;

  static IsolationForest fit(const Matrix& x, const IsolationForestParams& p);
  static IsolationForest from_json(const nlohmann::json& j);

  DetectorKind kind() const noexcept override { return DetectorKind::IsolationForest; }
  std::size_t dims() const noexcept override { return dims_; }
  double score(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

  /// Mean isolation depth of x over all trees.
  double mean_path_length(std::span<const double> x) const;
  std::size_t sample_size() const noexcept { return sample_size_; }

 private:
  std::vector<Tree> trees_;
  std::size_t sample_size_ = 0;
  std::size_t dims_ = 0;
};

// --- Elliptic envelope --------------------------------------------------------

struct EllipticEnvelopeParams {
  double ridge = 1e-6;  ///< added to the covariance diagonal
};

class EllipticEnvelope final : public Detector {
 public:
  /// Throws Error(SingularCovariance) when the covariance cannot be factored.
  static EllipticEnvelope fit(const Matrix& x, const EllipticEnvelopeParams& p);
  static EllipticEnvelope from_json(const nlohmann::json& j);
  /// Model from explicit location and covariance.
  static EllipticEnvelope from_moments(std::vector<double> mean, const Matrix& covariance);

  DetectorKind kind() const noexcept override { return DetectorKind::EllipticEnvelope; }
  std::size_t dims() const noexcept override { return mean_.size(); }
  /// Mahalanobis distance to the fitted mean.
  double score(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

  const std::vector<double>& mean() const noexcept { return mean_; }

 private:
  std::vector<double> mean_;
  Matrix precision_;
};

// --- Local outlier factor -----------------------------------------------------

struct LofParams {
  std::size_t k = 20;
  std::size_t max_train = 5000;
  std::uint64_t seed = 1;
};

/// Lower bound on reachability distances; keeps lrd finite on duplicates.
inline constexpr double kMinReachDistance = 1e-10;

class LocalOutlierFactor final : public Detector {
 public:
  /// Throws Error(KTooLarge) unless k < n.
  static LocalOutlierFactor fit(const Matrix& x, const LofParams& p);
  static LocalOutlierFactor from_json(const nlohmann::json& j);

  DetectorKind kind() const noexcept override { return DetectorKind::LocalOutlierFactor; }
  std::size_t dims() const noexcept override { return train_.cols(); }
  /// LOF_k of a query against the training set.
  double score(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

 private:
  Matrix train_;
  std::size_t k_ = 0;
  std::vector<double> k_distance_;
  std::vector<double> lrd_;
};

// --- One-class SVM ------------------------------------------------------------

struct OneClassSvmParams {
  double nu = 0.05;
  double gamma = 0.0;  ///< 0 selects 1/dims
  double tolerance = 1e-4;
  std::size_t max_iterations = 0;  ///< 0 selects max(10^6, 100 n)
  std::size_t cache_bytes = 64u << 20;
  std::size_t max_train = 4000;
  std::uint64_t seed = 1;
};

struct SmoResult {
  std::vector<double> alpha;
  double rho = 0.0;
  double objective = 0.0;  ///< 0.5 alpha^T K alpha
  double kkt_violation = 0.0;
  std::size_t iterations = 0;
};

/// Solves min 0.5 a^T K a s.t. 0 <= a_i <= 1/(nu n), sum a = 1 with
/// maximal-violating-pair SMO. Throws Error(NonConvergence).
SmoResult solve_one_class_dual(const Matrix& x, double nu, double gamma, double tolerance,
                               std::size_t max_iterations, std::size_t cache_bytes);

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

class OneClassSvm final : public Detector {
 public:
  static OneClassSvm fit(const Matrix& x, const OneClassSvmParams& p);
  static OneClassSvm from_json(const nlohmann::json& j);

  DetectorKind kind() const noexcept override { return DetectorKind::OneClassSvm; }
  std::size_t dims() const noexcept override { return support_.cols(); }
  /// -g(x); positive means outside the learned support.
  double score(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

  /// g(x) = sum_i alpha_i K(x_i, x) - rho.
  double decision(std::span<const double> x) const;
  const std::vector<double>& coefficients() const noexcept { return coef_; }
  double rho() const noexcept { return rho_; }
  std::size_t support_count() const noexcept { return coef_.size(); }
  const SmoResult& training() const noexcept { return training_; }

 private:
  Matrix support_;
  std::vector<double> coef_;
  double rho_ = 0.0;
  double gamma_ = 0.0;
  SmoResult training_;  // not persisted
};

// --- Autoencoder ----------------------------------------------------------------

enum class Optimizer { Sgd, Adam };

struct AutoencoderParams {
  std::vector<std::size_t> layer_sizes;  ///< empty selects d, d/2, d/4, d/2, d
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;  ///< 0 means full batch
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 1;
};

std::vector<std::size_t> default_autoencoder_layers(std::size_t dims);

class Autoencoder final : public Detector {
 public:
  /// Randomly initialized network (Xavier uniform).
  Autoencoder(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

  /// Throws Error(DivergedLoss) if the loss becomes non-finite.
  static Autoencoder fit(const Matrix& x, const AutoencoderParams& p,
                         std::vector<double>* loss_history = nullptr);
  static Autoencoder from_json(const nlohmann::json& j);

  DetectorKind kind() const noexcept override { return DetectorKind::Autoencoder; }
  std::size_t dims() const noexcept override { return layers_.front(); }
  /// Squared reconstruction error ||x - x_hat||^2.
  double score(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

  std::vector<double> reconstruct(std::span<const double> x) const;
  /// Mean over rows of ||x - x_hat||^2 / d.
  double loss(const Matrix& x) const;
  /// Gradient of loss() with respect to parameters(), same layout.
  std::vector<double> gradient(const Matrix& x) const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);
  const std::vector<std::size_t>& layers() const noexcept { return layers_; }

 private:
  Autoencoder() = default;
  void forward(std::span<const double> x, std::vector<std::vector<double>>& act) const;
  void accumulate_gradient(std::span<const double> x, std::vector<double>& grad,
                           std::vector<std::vector<double>>& act,
                           std::vector<std::vector<double>>& delta) const;

  std::vector<std::size_t> layers_;
  // weights_[l] is layers_[l+1] x layers_[l], row-major
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> biases_;
};

}  // namespace botwatch
