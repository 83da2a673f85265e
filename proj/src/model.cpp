#include "w2fair/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "w2fair/rng.hpp"

namespace w2fair {

namespace {

using nlohmann::json;

void require_sizes(std::span<const int> sizes) {
  if (sizes.size() < 2)
    throw std::invalid_argument("model: need at least input and output sizes");
  for (int s : sizes)
    if (s < 1) throw std::invalid_argument("model: layer sizes must be >= 1");
}

void require_input(const ModelParams& params, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.num_features())
    throw std::invalid_argument("model: input width mismatch");
}

}  // namespace

ModelParams init_params(std::span<const int> sizes, std::uint64_t seed) {
  require_sizes(sizes);
  ModelParams params;
  params.sizes.assign(sizes.begin(), sizes.end());
  params.init_seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Mat w(fan_out, fan_in);
    for (double& v : w.a) v = rng.uniform(-limit, limit);
    params.weights.push_back(std::move(w));
    params.biases.emplace_back(fan_out, 0.0);
  }
  return params;
}

ForwardTrace forward(const ModelParams& params, std::span<const double> x) {
  require_input(params, x);
  ForwardTrace trace;
  trace.activations.emplace_back(x.begin(), x.end());
  const int layers = params.num_layers();
  for (int l = 0; l < layers; ++l) {
    const Mat& w = params.weights[l];
    const Vec& b = params.biases[l];
    const Vec& in = trace.activations.back();
    Vec out(w.rows);
    for (int r = 0; r < w.rows; ++r) {
      double z = b[r];
      const double* row = &w.a[static_cast<std::size_t>(r) * w.cols];
      for (int c = 0; c < w.cols; ++c) z += row[c] * in[c];
      out[r] = z;
    }
    if (l + 1 < layers) {
      for (double& v : out) v = std::tanh(v);
      trace.activations.push_back(std::move(out));
    } else {
      trace.logits = std::move(out);
    }
  }
  const double zmax = *std::max_element(trace.logits.begin(), trace.logits.end());
  trace.probs.resize(trace.logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < trace.logits.size(); ++k) {
    trace.probs[k] = std::exp(trace.logits[k] - zmax);
    sum += trace.probs[k];
  }
  for (double& p : trace.probs) p /= sum;
  return trace;
}

int predict(const ModelParams& params, std::span<const double> x) {
  const ForwardTrace trace = forward(params, x);
  int best = 0;
  for (int k = 1; k < static_cast<int>(trace.probs.size()); ++k)
    if (trace.probs[k] > trace.probs[best]) best = k;
  return best + 1;
}

Gradients zero_gradients(const ModelParams& params) {
  Gradients g;
  for (int l = 0; l < params.num_layers(); ++l) {
    g.weights.emplace_back(params.weights[l].rows, params.weights[l].cols);
    g.biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return g;
}

void backward(const ModelParams& params, const ForwardTrace& trace,
              std::span<const double> out_grad, Gradients& acc) {
  const int layers = params.num_layers();
  const int classes = params.num_classes();
  if (static_cast<int>(out_grad.size()) != classes)
    throw std::invalid_argument("backward: out_grad width mismatch");
  if (static_cast<int>(trace.activations.size()) != layers ||
      static_cast<int>(trace.probs.size()) != classes)
    throw std::invalid_argument("backward: trace does not match params");

  // softmax Jacobian: dL/dz_j = p_j * (g_j - sum_k g_k p_k)
  double dot = 0.0;
  for (int k = 0; k < classes; ++k) dot += out_grad[k] * trace.probs[k];
  Vec delta(classes);
  for (int k = 0; k < classes; ++k)
    delta[k] = trace.probs[k] * (out_grad[k] - dot);

  for (int l = layers - 1; l >= 0; --l) {
    const Mat& w = params.weights[l];
    const Vec& in = trace.activations[l];
    Mat& gw = acc.weights[l];
    Vec& gb = acc.biases[l];
    for (int r = 0; r < w.rows; ++r) {
      const double d = delta[r];
      gb[r] += d;
      double* grow = &gw.a[static_cast<std::size_t>(r) * w.cols];
      for (int c = 0; c < w.cols; ++c) grow[c] += d * in[c];
    }
    if (l == 0) break;
    Vec prev(w.cols, 0.0);
    for (int r = 0; r < w.rows; ++r) {
      const double d = delta[r];
      const double* row = &w.a[static_cast<std::size_t>(r) * w.cols];
      for (int c = 0; c < w.cols; ++c) prev[c] += d * row[c];
    }
    // tanh'(z) expressed through the stored activation
    for (int c = 0; c < w.cols; ++c) prev[c] *= 1.0 - in[c] * in[c];
    delta = std::move(prev);
  }
}

double cross_entropy(std::span<const double> probs, int true_class) {
  if (true_class < 1 || true_class > static_cast<int>(probs.size()))
    throw std::domain_error("cross_entropy: class id out of range");
  return -std::log(std::max(probs[true_class - 1], kProbFloor));
}

void cross_entropy_grad(std::span<const double> probs, int true_class,
                        double scale, std::span<double> out_grad) {
  if (true_class < 1 || true_class > static_cast<int>(probs.size()))
    throw std::domain_error("cross_entropy_grad: class id out of range");
  if (out_grad.size() != probs.size())
    throw std::invalid_argument("cross_entropy_grad: width mismatch");
  const int k = true_class - 1;
  out_grad[k] += scale * (-1.0 / std::max(probs[k], kProbFloor));
}

void sgd_step(ModelParams& params, const Gradients& grads, double lr) {
  for (int l = 0; l < params.num_layers(); ++l) {
    const Mat& gw = grads.weights[l];
    Mat& w = params.weights[l];
    for (std::size_t i = 0; i < w.a.size(); ++i) w.a[i] -= lr * gw.a[i];
    for (std::size_t i = 0; i < params.biases[l].size(); ++i)
      params.biases[l][i] -= lr * grads.biases[l][i];
  }
}

AdamState make_adam(const ModelParams& params, double lr, double beta1,
                    double beta2, double eps) {
  if (!(lr > 0.0) || !(eps > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("make_adam: invalid hyperparameters");
  AdamState st;
  st.lr = lr;
  st.beta1 = beta1;
  st.beta2 = beta2;
  st.eps = eps;
  st.m = zero_gradients(params);
  st.v = zero_gradients(params);
  return st;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state) {
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, state.step);
  const double c2 = 1.0 - std::pow(state.beta2, state.step);
  const auto update = [&](double& p, double g, double& m, double& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    p -= state.lr * (m / c1) / (std::sqrt(v / c2) + state.eps);
  };
  for (int l = 0; l < params.num_layers(); ++l) {
    Mat& w = params.weights[l];
    for (std::size_t i = 0; i < w.a.size(); ++i)
      update(w.a[i], grads.weights[l].a[i], state.m.weights[l].a[i],
             state.v.weights[l].a[i]);
    for (std::size_t i = 0; i < params.biases[l].size(); ++i)
      update(params.biases[l][i], grads.biases[l][i], state.m.biases[l][i],
             state.v.biases[l][i]);
  }
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  json doc;
  doc["format"] = "w2fair-model";
  doc["version"] = 1;
  doc["activation"] = "tanh";
  doc["sizes"] = params.sizes;
  doc["init_seed"] = params.init_seed;
  json weights = json::array();
  for (const Mat& w : params.weights) weights.push_back(w.a);
  doc["weights"] = std::move(weights);
  doc["biases"] = params.biases;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path + ": " + e.what());
  }
  if (doc.value("format", "") != "w2fair-model")
    throw std::runtime_error("load_checkpoint: " + path +
                             ": not a model checkpoint");
  if (doc.value("version", 0) != 1)
    throw std::runtime_error("load_checkpoint: " + path +
                             ": unsupported checkpoint version");

  ModelParams params;
  doc.at("sizes").get_to(params.sizes);
  require_sizes(params.sizes);
  params.init_seed = doc.value("init_seed", 0ULL);
  const json& weights = doc.at("weights");
  const json& biases = doc.at("biases");
  if (weights.size() != params.sizes.size() - 1 ||
      biases.size() != params.sizes.size() - 1)
    throw std::runtime_error("load_checkpoint: " + path + ": layer count mismatch");
  for (std::size_t l = 0; l + 1 < params.sizes.size(); ++l) {
    Mat w(params.sizes[l + 1], params.sizes[l]);
    std::vector<double> flat;
    weights[l].get_to(flat);
    if (flat.size() != w.a.size())
      throw std::runtime_error("load_checkpoint: " + path + ": weight shape mismatch");
    w.a = std::move(flat);
    params.weights.push_back(std::move(w));
    Vec b;
    biases[l].get_to(b);
    if (b.size() != static_cast<std::size_t>(params.sizes[l + 1]))
      throw std::runtime_error("load_checkpoint: " + path + ": bias shape mismatch");
    params.biases.push_back(std::move(b));
  }
  return params;
}

}  // namespace w2fair
