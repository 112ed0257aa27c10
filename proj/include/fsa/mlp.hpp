#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fsa {

/// Two-hidden-layer classifier: input -> h1 -> h2 -> 2, ReLU activations,
/// softmax output, cross-entropy loss, Adam updates.
struct MlpConfig {
    int input_dim = 0;
    int hidden1 = 256;
    int hidden2 = 64;
    double learning_rate = 1e-3;
    double dropout = 0.0;
    int batch_size = 128;
    int max_epochs = 50;
    int patience = 5;                 // epochs without validation improvement
    double validation_fraction = 0.2;
    uint64_t seed = 0;
};

class Mlp {
public:
    Mlp() = default;
    Mlp(int input_dim, int hidden1, int hidden2);

    /// Entry-addressed initialization: weight (layer, i, j) depends only on
    /// (seed, layer, i, j), so shared sub-blocks match across input widths.
    /// Layer-1 scale is sqrt(2/h1) (input-width independent); deeper layers
    /// use He fan-in scaling. Biases start at zero.
    void init(uint64_t seed);

    int input_dim() const { return static_cast<int>(w1_.cols()); }

    /// Row-wise class probabilities; rows sum to 1.
    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;

    /// Increase iff p1 > p2 strictly (ties classify as decrease).
    std::vector<int> classify(const Eigen::MatrixXd& x) const;

    /// Mean cross-entropy of labels y in {0,1} (1 = first output neuron).
    double loss(const Eigen::MatrixXd& x, const Eigen::VectorXi& y) const;

    /// Deterministic loss + gradient of every parameter (no dropout).
    double loss_and_gradients(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                              Eigen::VectorXd& grad) const;

    // Flat parameter view in a fixed order (w1,b1,w2,b2,w3,b3), row-major.
    Eigen::Index parameter_count() const;
    double get_parameter(Eigen::Index i) const;
    void set_parameter(Eigen::Index i, double v);

    std::string to_json() const;
    static Mlp from_json(const std::string& text);

private:
    friend struct MlpTrainer;
    Eigen::MatrixXd w1_, w2_, w3_;
    Eigen::VectorXd b1_, b2_, b3_;
};

struct MlpTrainResult {
    Mlp model;
    double validation_loss = 0.0;
    int epochs_run = 0;
    bool aborted_nan = false;  // NaN loss; model invalid
};

/// Trains with a random 20% validation split, mini-batches, early stopping,
/// and best-weight restore. Inputs must already be standardized.
MlpTrainResult train_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                         const MlpConfig& config);

struct GridSearchResult {
    MlpTrainResult best;
    double learning_rate = 0.0;
    double dropout = 0.0;
    std::vector<std::string> diagnostics;  // aborted grid points etc.
};

/// The 3x3 learning-rate / dropout grid; the point with the lowest
/// validation loss wins. Throws when every point aborts.
GridSearchResult fit_mlp_grid(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                              MlpConfig base,
                              const std::vector<double>& learning_rates = {1e-5, 1e-3, 1e-1},
                              const std::vector<double>& dropouts = {0.0, 0.2, 0.4});

}  // namespace fsa
