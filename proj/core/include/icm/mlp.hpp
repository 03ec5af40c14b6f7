#pragma once

#include "icm/la.hpp"
#include "icm/rng.hpp"

namespace icm::num {

// Two-hidden-layer perceptron with ReLU activations, optional batch
// normalization after each hidden affine, and an optional skip that feeds
// the first `skip_prefix` input columns directly into the output layer.
struct MlpSpec {
  int input_dim = 0;
  int hidden1 = 0;
  int hidden2 = 0;
  int output_dim = 1;
  bool batch_norm = false;
  int skip_prefix = 0;

  int output_input_dim() const { return hidden2 + skip_prefix; }
  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

struct BatchNormParams {
  Vector scale;
  Vector shift;
  // Exponential moving averages used in inference mode; not trainable.
  Vector running_mean;
  Vector running_var;
};

struct MlpParams {
  Matrix w1, w2, w3;  // each layer stored rows-out by cols-in
  Vector b1, b2, b3;
  BatchNormParams bn1, bn2;
};

struct BnCache {
  Vector mean;
  Vector inv_std;
  Matrix x_hat;
};

// Forward intermediates needed by the backward pass.  Only training-mode
// caches are valid inputs to mlp_backward.
struct MlpCache {
  bool training = false;
  Matrix input;
  Matrix pre1, act1;  // first hidden: post-norm pre-activation, post-ReLU
  Matrix pre2, act2;
  BnCache bn1, bn2;
};

struct MlpGrads {
  MlpParams params;   // gradients for trainable fields (bn running stats unused)
  Matrix input;       // gradient with respect to the input batch
};

// He-uniform weights (bound sqrt(6 / fan_in)), zero biases, identity norm.
MlpParams he_init(const MlpSpec& spec, RngStream& rng);
MlpParams zeros_like(const MlpSpec& spec);

// Returns the output batch.  In training mode batch statistics normalize
// each hidden feature and the running moments are updated in `params`;
// in inference mode the running moments are used and `params` is const.
Matrix mlp_forward(const MlpSpec& spec, MlpParams& params, const Matrix& input,
                   bool training, MlpCache* cache = nullptr);

// Backpropagates `grad_output` (and optionally an extra gradient injected
// at the first post-activation, `grad_act1`) through a training-mode cache.
MlpGrads mlp_backward(const MlpSpec& spec, const MlpParams& params, const MlpCache& cache,
                      const Matrix& grad_output, const Matrix* grad_act1 = nullptr);

// Trainable parameters as one flat vector (batch norm running stats are
// state, not parameters, and are excluded).
int param_count(const MlpSpec& spec);
Vector flatten(const MlpSpec& spec, const MlpParams& params);
void unflatten(const MlpSpec& spec, const Vector& flat, MlpParams& params);
Vector flatten_grads(const MlpSpec& spec, const MlpParams& grads);

}  // namespace icm::num
