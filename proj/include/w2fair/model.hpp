#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace w2fair {

// Probability floor inside log() and cross-entropy denominators.
inline constexpr double kProbFloor = 1e-12;

// Dense row-major matrix; rows = fan-out, cols = fan-in.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c) {}
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return a[static_cast<std::size_t>(r) * cols + c];
  }
};

using Vec = std::vector<double>;

// Fully-connected tanh network with a softmax head. sizes holds
// input width, hidden widths, class count.
struct ModelParams {
  std::vector<int> sizes;
  std::vector<Mat> weights;  // weights[l]: sizes[l+1] x sizes[l]
  std::vector<Vec> biases;
  std::uint64_t init_seed = 0;

  int num_classes() const { return sizes.back(); }
  int num_features() const { return sizes.front(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
// Deterministic in (sizes, seed); draws run layer by layer in row-major
// order.
ModelParams init_params(std::span<const int> sizes, std::uint64_t seed);

struct ForwardTrace {
  std::vector<Vec> activations;  // [0] = input, then each tanh layer output
  Vec logits;
  Vec probs;  // softmax of logits
};

ForwardTrace forward(const ModelParams& params, std::span<const double> x);

// 1-based argmax of the class probabilities; ties go to the smallest index.
int predict(const ModelParams& params, std::span<const double> x);

struct Gradients {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
};

Gradients zero_gradients(const ModelParams& params);

// Reverse-mode gradients for one example, accumulated into acc.
// out_grad is the loss derivative with respect to the softmax outputs
// (probabilities), so cross-entropy terms and injected distribution
// penalties are summed there before the call; the softmax Jacobian is
// applied inside. Exactly linear in out_grad.
void backward(const ModelParams& params, const ForwardTrace& trace,
              std::span<const double> out_grad, Gradients& acc);

// -log of the true-class probability, floored at kProbFloor.
double cross_entropy(std::span<const double> probs, int true_class);

// Adds scale * d(cross_entropy)/d(probs) into out_grad.
void cross_entropy_grad(std::span<const double> probs, int true_class,
                        double scale, std::span<double> out_grad);

void sgd_step(ModelParams& params, const Gradients& grads, double lr);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  long step = 0;
  Gradients m;  // first and second moments, zero until the first step
  Gradients v;
};

AdamState make_adam(const ModelParams& params, double lr, double beta1,
                    double beta2, double eps);

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state);

// Versioned JSON container with layer shapes and the init seed; byte-stable
// across runs for identical parameters.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace w2fair
