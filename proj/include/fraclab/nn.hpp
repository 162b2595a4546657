#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fraclab/common.hpp"

namespace fraclab {

enum class Activation { kRelu };

// Fixed MLP topology: affine layers with ReLU on the hidden ones, optional
// batch normalization between affine and ReLU. The output layer is raw logits.
struct Architecture {
  std::vector<int> layer_widths;  // input, hidden..., output
  Activation activation = Activation::kRelu;
  bool use_batch_norm = false;

  void validate() const;
  int input_dim() const { return layer_widths.front(); }
  int output_dim() const { return layer_widths.back(); }
  int num_affine() const { return static_cast<int>(layer_widths.size()) - 1; }
  size_t param_count() const;
};

struct LayerSlice {
  size_t begin = 0;
  size_t end = 0;  // half-open
  size_t size() const { return end - begin; }
};

// Flat, ordered view of all trainable parameters: the diffusing particle.
// Layout per affine layer: W (row-major out x in), b, then gamma, beta when
// batch norm is on (hidden layers only).
struct ParamVector {
  std::vector<double> values;
  std::vector<LayerSlice> layer_offsets;  // one slice per affine layer
  size_t dim() const { return values.size(); }
};

struct Gradient {
  std::vector<double> values;
};

enum class OptimizerKind { kSgd, kAdamw };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 0.001;
  double weight_decay = 0.0;
  int batch_size = 256;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  // The regime the displacement analysis assumes: small step, no decay.
  bool theory_regime() const {
    return learning_rate <= 0.01 && weight_decay == 0.0;
  }
};

struct OptimizerState {
  std::vector<double> m;  // adamw first moment
  std::vector<double> v;  // adamw second moment
  int64_t step = 0;
};

// Non-owning view of a classification minibatch (row-major features).
struct Batch {
  const double* features = nullptr;
  const int32_t* labels = nullptr;
  int count = 0;
  int input_dim = 0;
  int classes = 0;
};

ParamVector init_params(const Architecture& arch, uint64_t seed);

struct LossGrad {
  double loss = 0.0;
  Gradient grad;
};

// Mean cross-entropy over the batch and its exact reverse-mode gradient.
// Throws NumericsError when activations stop being finite.
LossGrad loss_and_grad(const ParamVector& params, const Batch& batch,
                       const Architecture& arch);
double loss_only(const ParamVector& params, const Batch& batch,
                 const Architecture& arch);
// Argmax class predictions. With batch norm on, the statistics of the
// evaluated batch are used, so the model stays a pure function of
// (params, batch).
void predict(const ParamVector& params, const Batch& batch,
             const Architecture& arch, std::vector<int32_t>& out);

void optimizer_step(ParamVector& params, const Gradient& grad,
                    const OptimizerConfig& opt, OptimizerState& state);

double displacement(const ParamVector& params, const ParamVector& reference);
std::vector<double> per_layer_displacement(const ParamVector& params,
                                           const ParamVector& reference);

}  // namespace fraclab
