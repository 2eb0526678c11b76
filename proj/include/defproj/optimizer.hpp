#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>

#include "defproj/errors.hpp"
#include "defproj/tensor.hpp"

namespace defproj {

struct ParamUpdate {
  std::string name;
  Tensor* value = nullptr;
  const Tensor* grad = nullptr;
};

// Adaptive-moment update with decoupled weight decay and bias correction,
// the stock recipe for fine-tuning BERT-family models. The learning rate for
// each step is supplied by the caller (the trainer owns the schedule).
struct AdamWConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.01f;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<const ParamUpdate> params, float lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), t_);
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), t_);
    for (const ParamUpdate& p : params) {
      if (!p.grad->all_finite())
        throw numeric_error("non-finite gradient for parameter " + p.name);
      if (p.grad->shape != p.value->shape)
        throw data_error("gradient shape mismatch for parameter " + p.name);
      Slot& slot = slots_[p.name];
      if (slot.m.numel() == 0) {
        slot.m = Tensor::zeros(p.value->shape);
        slot.v = Tensor::zeros(p.value->shape);
      }
      float* w = p.value->data.data();
      const float* g = p.grad->data.data();
      float* m = slot.m.data.data();
      float* v = slot.v.data.data();
      const std::size_t n = p.value->numel();
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0f - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0f - cfg_.beta2) * g[i] * g[i];
        const float mhat = static_cast<float>(m[i] / bc1);
        const float vhat = static_cast<float>(v[i] / bc2);
        w[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                      cfg_.weight_decay * w[i]);
      }
    }
  }

  long step_count() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  struct Slot {
    Tensor m, v;
  };

  std::map<std::string, Slot> slots_;
  AdamWConfig cfg_;
  long t_ = 0;
};

}  // namespace defproj
