#include "fraclab/nn.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "fraclab/rng.hpp"

namespace fraclab {

namespace {

constexpr double kBnEps = 1e-5;

void check_layout(const ParamVector& a, const ParamVector& b) {
  if (a.dim() != b.dim() || a.layer_offsets.size() != b.layer_offsets.size()) {
    throw std::invalid_argument("param vectors have mismatched layout");
  }
  for (size_t l = 0; l < a.layer_offsets.size(); ++l) {
    if (a.layer_offsets[l].begin != b.layer_offsets[l].begin ||
        a.layer_offsets[l].end != b.layer_offsets[l].end) {
      throw std::invalid_argument("param vectors have mismatched layer slices");
    }
  }
}

void check_batch(const Batch& batch, const Architecture& arch) {
  if (batch.count <= 0) {
    throw DataError("empty batch");
  }
  if (batch.input_dim != arch.input_dim()) {
    throw DataError("batch feature width " + std::to_string(batch.input_dim) +
                    " does not match architecture input " +
                    std::to_string(arch.input_dim()));
  }
  if (batch.classes != arch.output_dim()) {
    throw DataError("batch class count does not match architecture output");
  }
}

// Offsets of W, b (and gamma, beta) inside the slice of affine layer l.
struct LayerView {
  const double* w;
  const double* b;
  const double* gamma;  // null without batch norm
  const double* beta;
  int in;
  int out;
};

LayerView layer_view(const ParamVector& params, const Architecture& arch,
                     int l) {
  const LayerSlice s = params.layer_offsets[static_cast<size_t>(l)];
  const int in = arch.layer_widths[static_cast<size_t>(l)];
  const int out = arch.layer_widths[static_cast<size_t>(l) + 1];
  const bool bn = arch.use_batch_norm && l < arch.num_affine() - 1;
  LayerView v{};
  v.w = params.values.data() + s.begin;
  v.b = v.w + static_cast<size_t>(in) * static_cast<size_t>(out);
  v.gamma = bn ? v.b + out : nullptr;
  v.beta = bn ? v.gamma + out : nullptr;
  v.in = in;
  v.out = out;
  return v;
}

struct ForwardCache {
  // acts[0] is the input batch; acts[l+1] the post-activation of layer l
  std::vector<std::vector<double>> acts;
  // pre-activation z = Wx+b per layer; bn caches for hidden layers
  std::vector<std::vector<double>> zs;
  std::vector<std::vector<double>> bn_xhat;
  std::vector<std::vector<double>> bn_mean;
  std::vector<std::vector<double>> bn_var;
  std::vector<double> probs;  // softmax, row-major
};

void forward(const ParamVector& params, const Batch& batch,
             const Architecture& arch, ForwardCache& fc, bool keep_cache) {
  const int n_aff = arch.num_affine();
  const int B = batch.count;
  fc.acts.assign(static_cast<size_t>(n_aff) + 1, {});
  if (keep_cache) {
    fc.zs.assign(static_cast<size_t>(n_aff), {});
    fc.bn_xhat.assign(static_cast<size_t>(n_aff), {});
    fc.bn_mean.assign(static_cast<size_t>(n_aff), {});
    fc.bn_var.assign(static_cast<size_t>(n_aff), {});
  }
  fc.acts[0].assign(batch.features,
                    batch.features + static_cast<size_t>(B) * batch.input_dim);

  for (int l = 0; l < n_aff; ++l) {
    const LayerView lv = layer_view(params, arch, l);
    const bool hidden = l < n_aff - 1;
    const bool bn = arch.use_batch_norm && hidden;
    std::vector<double>& x = fc.acts[static_cast<size_t>(l)];
    std::vector<double> z(static_cast<size_t>(B) * lv.out);

    for (int i = 0; i < B; ++i) {
      const double* xi = x.data() + static_cast<size_t>(i) * lv.in;
      double* zi = z.data() + static_cast<size_t>(i) * lv.out;
      for (int o = 0; o < lv.out; ++o) {
        const double* wrow = lv.w + static_cast<size_t>(o) * lv.in;
        double acc = lv.b[o];
        for (int k = 0; k < lv.in; ++k) {
          acc += wrow[k] * xi[k];
        }
        zi[o] = acc;
      }
    }

    std::vector<double> y;
    if (bn) {
      std::vector<double> mu(static_cast<size_t>(lv.out), 0.0);
      std::vector<double> var(static_cast<size_t>(lv.out), 0.0);
      for (int i = 0; i < B; ++i) {
        for (int o = 0; o < lv.out; ++o) {
          mu[static_cast<size_t>(o)] += z[static_cast<size_t>(i) * lv.out + o];
        }
      }
      for (int o = 0; o < lv.out; ++o) {
        mu[static_cast<size_t>(o)] /= B;
      }
      for (int i = 0; i < B; ++i) {
        for (int o = 0; o < lv.out; ++o) {
          const double d = z[static_cast<size_t>(i) * lv.out + o] -
                           mu[static_cast<size_t>(o)];
          var[static_cast<size_t>(o)] += d * d;
        }
      }
      for (int o = 0; o < lv.out; ++o) {
        var[static_cast<size_t>(o)] /= B;
      }
      std::vector<double> xhat(z.size());
      y.resize(z.size());
      for (int i = 0; i < B; ++i) {
        for (int o = 0; o < lv.out; ++o) {
          const size_t idx = static_cast<size_t>(i) * lv.out + o;
          xhat[idx] = (z[idx] - mu[static_cast<size_t>(o)]) /
                      std::sqrt(var[static_cast<size_t>(o)] + kBnEps);
          y[idx] = lv.gamma[o] * xhat[idx] + lv.beta[o];
        }
      }
      if (keep_cache) {
        fc.bn_xhat[static_cast<size_t>(l)] = std::move(xhat);
        fc.bn_mean[static_cast<size_t>(l)] = std::move(mu);
        fc.bn_var[static_cast<size_t>(l)] = std::move(var);
      }
    } else {
      y = z;
    }

    if (hidden) {
      for (double& v : y) {
        v = v > 0.0 ? v : 0.0;
      }
    }
    for (double v : y) {
      if (!std::isfinite(v)) {
        throw NumericsError("non-finite activation in layer " +
                            std::to_string(l));
      }
    }
    if (keep_cache) {
      fc.zs[static_cast<size_t>(l)] = std::move(z);
    }
    fc.acts[static_cast<size_t>(l) + 1] = std::move(y);
  }
}

// softmax + mean cross-entropy; fills fc.probs, returns loss
double softmax_loss(const Batch& batch, ForwardCache& fc) {
  const int B = batch.count;
  const int k = batch.classes;
  const std::vector<double>& logits = fc.acts.back();
  fc.probs.resize(logits.size());
  double loss = 0.0;
  for (int i = 0; i < B; ++i) {
    const double* zi = logits.data() + static_cast<size_t>(i) * k;
    double* pi = fc.probs.data() + static_cast<size_t>(i) * k;
    double zmax = zi[0];
    for (int c = 1; c < k; ++c) {
      zmax = std::max(zmax, zi[c]);
    }
    double sum = 0.0;
    for (int c = 0; c < k; ++c) {
      pi[c] = std::exp(zi[c] - zmax);
      sum += pi[c];
    }
    for (int c = 0; c < k; ++c) {
      pi[c] /= sum;
    }
    const int32_t y = batch.labels[i];
    if (y < 0 || y >= k) {
      throw DataError("label out of range");
    }
    loss -= std::log(std::max(pi[y], 1e-300));
  }
  loss /= B;
  if (!std::isfinite(loss)) {
    throw NumericsError("non-finite loss");
  }
  return loss;
}

}  // namespace

void Architecture::validate() const {
  if (layer_widths.size() < 2) {
    throw ConfigError("architecture needs at least 2 layers");
  }
  for (int w : layer_widths) {
    if (w < 1) {
      throw ConfigError("layer width must be >= 1");
    }
  }
}

size_t Architecture::param_count() const {
  size_t d = 0;
  for (int l = 0; l < num_affine(); ++l) {
    const size_t in = static_cast<size_t>(layer_widths[static_cast<size_t>(l)]);
    const size_t out =
        static_cast<size_t>(layer_widths[static_cast<size_t>(l) + 1]);
    d += in * out + out;
    if (use_batch_norm && l < num_affine() - 1) {
      d += 2 * out;
    }
  }
  return d;
}

void OptimizerConfig::validate() const {
  // 0 is allowed as the frozen-dynamics degenerate case
  if (learning_rate < 0.0) {
    throw ConfigError("learning_rate must be nonnegative");
  }
  if (weight_decay < 0.0) {
    throw ConfigError("weight_decay must be nonnegative");
  }
  if (batch_size < 1) {
    throw ConfigError("batch_size must be positive");
  }
}

ParamVector init_params(const Architecture& arch, uint64_t seed) {
  arch.validate();
  Rng rng(derive_seed(seed, {0x696e6974ULL}));  // substream tag
  ParamVector p;
  p.values.reserve(arch.param_count());
  p.layer_offsets.resize(static_cast<size_t>(arch.num_affine()));
  for (int l = 0; l < arch.num_affine(); ++l) {
    const int in = arch.layer_widths[static_cast<size_t>(l)];
    const int out = arch.layer_widths[static_cast<size_t>(l) + 1];
    const size_t begin = p.values.size();
    // Kaiming fan-in normal keeps the initial loss near ln(classes) for ReLU.
    const double stddev = std::sqrt(2.0 / in);
    for (int i = 0; i < in * out; ++i) {
      p.values.push_back(stddev * rng.normal());
    }
    for (int i = 0; i < out; ++i) {
      p.values.push_back(0.0);  // bias
    }
    if (arch.use_batch_norm && l < arch.num_affine() - 1) {
      for (int i = 0; i < out; ++i) {
        p.values.push_back(1.0);  // gamma
      }
      for (int i = 0; i < out; ++i) {
        p.values.push_back(0.0);  // beta
      }
    }
    p.layer_offsets[static_cast<size_t>(l)] = {begin, p.values.size()};
  }
  return p;
}

LossGrad loss_and_grad(const ParamVector& params, const Batch& batch,
                       const Architecture& arch) {
  check_batch(batch, arch);
  const int n_aff = arch.num_affine();
  const int B = batch.count;

  ForwardCache fc;
  forward(params, batch, arch, fc, /*keep_cache=*/true);

  LossGrad out;
  out.loss = softmax_loss(batch, fc);
  out.grad.values.assign(params.dim(), 0.0);

  // delta = dL/d(logits) = (p - onehot)/B
  const int k = batch.classes;
  std::vector<double> delta(fc.probs);
  for (int i = 0; i < B; ++i) {
    delta[static_cast<size_t>(i) * k + batch.labels[i]] -= 1.0;
  }
  for (double& d : delta) {
    d /= B;
  }

  for (int l = n_aff - 1; l >= 0; --l) {
    const LayerView lv = layer_view(params, arch, l);
    const LayerSlice s = params.layer_offsets[static_cast<size_t>(l)];
    const bool hidden = l < n_aff - 1;
    const bool bn = arch.use_batch_norm && hidden;
    const std::vector<double>& x = fc.acts[static_cast<size_t>(l)];

    // delta currently holds dL/d(post-activation of layer l)
    if (hidden) {
      const std::vector<double>& a = fc.acts[static_cast<size_t>(l) + 1];
      for (size_t i = 0; i < delta.size(); ++i) {
        if (a[i] <= 0.0) {
          delta[i] = 0.0;
        }
      }
    }

    double* gw = out.grad.values.data() + s.begin;
    double* gb = gw + static_cast<size_t>(lv.in) * lv.out;

    if (bn) {
      // delta is dL/dy with y = gamma*xhat + beta; convert to dL/dz
      const std::vector<double>& xhat = fc.bn_xhat[static_cast<size_t>(l)];
      const std::vector<double>& var = fc.bn_var[static_cast<size_t>(l)];
      double* ggamma = gb + lv.out;
      double* gbeta = ggamma + lv.out;
      std::vector<double> sum_dy(static_cast<size_t>(lv.out), 0.0);
      std::vector<double> sum_dy_xhat(static_cast<size_t>(lv.out), 0.0);
      for (int i = 0; i < B; ++i) {
        for (int o = 0; o < lv.out; ++o) {
          const size_t idx = static_cast<size_t>(i) * lv.out + o;
          sum_dy[static_cast<size_t>(o)] += delta[idx];
          sum_dy_xhat[static_cast<size_t>(o)] += delta[idx] * xhat[idx];
        }
      }
      for (int o = 0; o < lv.out; ++o) {
        ggamma[o] = sum_dy_xhat[static_cast<size_t>(o)];
        gbeta[o] = sum_dy[static_cast<size_t>(o)];
      }
      for (int i = 0; i < B; ++i) {
        for (int o = 0; o < lv.out; ++o) {
          const size_t idx = static_cast<size_t>(i) * lv.out + o;
          const double inv_std =
              1.0 / std::sqrt(var[static_cast<size_t>(o)] + kBnEps);
          delta[idx] = lv.gamma[o] * inv_std *
                       (delta[idx] - sum_dy[static_cast<size_t>(o)] / B -
                        xhat[idx] * sum_dy_xhat[static_cast<size_t>(o)] / B);
        }
      }
    }

    // delta is now dL/dz with z = Wx + b
    std::vector<double> next_delta;
    if (l > 0) {
      next_delta.assign(static_cast<size_t>(B) * lv.in, 0.0);
    }
    for (int i = 0; i < B; ++i) {
      const double* xi = x.data() + static_cast<size_t>(i) * lv.in;
      const double* di = delta.data() + static_cast<size_t>(i) * lv.out;
      for (int o = 0; o < lv.out; ++o) {
        const double d = di[o];
        double* gwrow = gw + static_cast<size_t>(o) * lv.in;
        for (int c = 0; c < lv.in; ++c) {
          gwrow[c] += d * xi[c];
        }
        gb[o] += d;
      }
      if (l > 0) {
        double* ndi = next_delta.data() + static_cast<size_t>(i) * lv.in;
        for (int o = 0; o < lv.out; ++o) {
          const double d = di[o];
          const double* wrow = lv.w + static_cast<size_t>(o) * lv.in;
          for (int c = 0; c < lv.in; ++c) {
            ndi[c] += d * wrow[c];
          }
        }
      }
    }
    delta = std::move(next_delta);
  }
  return out;
}

double loss_only(const ParamVector& params, const Batch& batch,
                 const Architecture& arch) {
  check_batch(batch, arch);
  ForwardCache fc;
  forward(params, batch, arch, fc, /*keep_cache=*/false);
  return softmax_loss(batch, fc);
}

void predict(const ParamVector& params, const Batch& batch,
             const Architecture& arch, std::vector<int32_t>& out) {
  check_batch(batch, arch);
  ForwardCache fc;
  forward(params, batch, arch, fc, /*keep_cache=*/false);
  const int k = batch.classes;
  out.resize(static_cast<size_t>(batch.count));
  const std::vector<double>& logits = fc.acts.back();
  for (int i = 0; i < batch.count; ++i) {
    const double* zi = logits.data() + static_cast<size_t>(i) * k;
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (zi[c] > zi[best]) {
        best = c;
      }
    }
    out[static_cast<size_t>(i)] = best;
  }
}

void optimizer_step(ParamVector& params, const Gradient& grad,
                    const OptimizerConfig& opt, OptimizerState& state) {
  if (grad.values.size() != params.dim()) {
    throw std::invalid_argument("gradient dim does not match params");
  }
  const double lr = opt.learning_rate;
  if (opt.kind == OptimizerKind::kSgd) {
    // coupled L2 for sgd; exact params - lr*grad when weight_decay == 0
    if (opt.weight_decay == 0.0) {
      for (size_t i = 0; i < params.dim(); ++i) {
        params.values[i] -= lr * grad.values[i];
      }
    } else {
      for (size_t i = 0; i < params.dim(); ++i) {
        params.values[i] -=
            lr * (grad.values[i] + opt.weight_decay * params.values[i]);
      }
    }
    return;
  }
  // AdamW: decoupled weight decay
  if (state.m.size() != params.dim()) {
    state.m.assign(params.dim(), 0.0);
    state.v.assign(params.dim(), 0.0);
    state.step = 0;
  }
  state.step += 1;
  const double b1 = opt.beta1;
  const double b2 = opt.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.dim(); ++i) {
    const double g = grad.values[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params.values[i] -= lr * (mhat / (std::sqrt(vhat) + opt.epsilon) +
                              opt.weight_decay * params.values[i]);
  }
}

double displacement(const ParamVector& params, const ParamVector& reference) {
  check_layout(params, reference);
  double s = 0.0;
  for (size_t i = 0; i < params.dim(); ++i) {
    const double d = params.values[i] - reference.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<double> per_layer_displacement(const ParamVector& params,
                                           const ParamVector& reference) {
  check_layout(params, reference);
  std::vector<double> out;
  out.reserve(params.layer_offsets.size());
  for (const LayerSlice& s : params.layer_offsets) {
    double acc = 0.0;
    for (size_t i = s.begin; i < s.end; ++i) {
      const double d = params.values[i] - reference.values[i];
      acc += d * d;
    }
    out.push_back(std::sqrt(acc));
  }
  return out;
}

}  // namespace fraclab
