#include "rankgrad/model.hpp"

#include "rankgrad/config.hpp"
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace rankgrad {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'G', 'C'};
constexpr std::uint16_t kFormatVersion = 1;

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "tabular") return ModelKind::tabular;
  if (s == "linear") return ModelKind::linear;
  if (s == "mlp") return ModelKind::mlp;
  throw ConfigError("unknown model kind: " + s);
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::tabular: return "tabular";
    case ModelKind::linear: return "linear";
    case ModelKind::mlp: return "mlp";
  }
  return "?";
}

void GradVector::add_scaled(const GradVector& other, double scale) {
  if (other.size() != size()) throw std::invalid_argument("GradVector: dimension mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += scale * other.values[i];
  accumulated += other.accumulated;
}

void GradVector::scale(double factor) {
  for (auto& v : values) v *= factor;
}

double GradVector::inf_norm() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

bool GradVector::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void ModelArch::validate() const {
  if (input_dim == 0) throw std::invalid_argument("ModelArch: input_dim must be positive");
  if (actions < 2) throw std::invalid_argument("ModelArch: need at least 2 actions");
  if (kind != ModelKind::mlp && !hidden.empty()) {
    throw std::invalid_argument("ModelArch: hidden layers are mlp-only");
  }
  if (kind == ModelKind::mlp && hidden.empty()) {
    throw std::invalid_argument("ModelArch: mlp needs at least one hidden layer");
  }
  for (auto h : hidden) {
    if (h == 0) throw std::invalid_argument("ModelArch: zero-width hidden layer");
  }
  if (squash && !(squash_cap > 0.0)) {
    throw std::invalid_argument("ModelArch: squash_cap must be positive");
  }
}

std::size_t ModelArch::param_count() const {
  switch (kind) {
    case ModelKind::tabular:
      return static_cast<std::size_t>(input_dim) * actions;
    case ModelKind::linear:
      return static_cast<std::size_t>(actions) * input_dim;
    case ModelKind::mlp: {
      std::size_t n = 0;
      std::uint32_t in = input_dim;
      for (auto h : hidden) {
        n += static_cast<std::size_t>(h) * in + h;
        in = h;
      }
      n += static_cast<std::size_t>(actions) * in + actions;
      return n;
    }
  }
  return 0;
}

LambdaModel::LambdaModel(const ModelArch& arch) : arch_(arch) {
  arch_.validate();
  params_.assign(arch_.param_count(), 0.0);
}

LambdaModel LambdaModel::random_init(const ModelArch& arch, std::uint64_t seed, double half_range) {
  LambdaModel m(arch);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-half_range, half_range);
  for (auto& p : m.params_) p = unif(rng);
  return m;
}

std::vector<double> LambdaModel::one_hot(StateId state) const {
  if (state >= arch_.input_dim) throw std::invalid_argument("LambdaModel: state id out of range");
  std::vector<double> x(arch_.input_dim, 0.0);
  x[state] = 1.0;
  return x;
}

std::vector<double> LambdaModel::forward(StateId state) const {
  if (arch_.kind == ModelKind::tabular) {
    if (state >= arch_.input_dim) throw std::invalid_argument("LambdaModel: state id out of range");
    std::vector<double> z(params_.begin() + static_cast<std::ptrdiff_t>(state) * arch_.actions,
                          params_.begin() + static_cast<std::ptrdiff_t>(state + 1) * arch_.actions);
    if (arch_.squash) {
      for (auto& v : z) v = arch_.squash_cap * stable_sigmoid(v);
    }
    return z;
  }
  if (!arch_.one_hot_input) {
    throw std::logic_error("LambdaModel: state-id forward requires one_hot_input");
  }
  auto x = one_hot(state);
  return forward_impl(x.data(), nullptr);
}

std::vector<double> LambdaModel::forward(std::span<const double> features) const {
  if (arch_.kind == ModelKind::tabular) {
    throw std::logic_error("LambdaModel: tabular model takes state ids, not features");
  }
  if (features.size() != arch_.input_dim) {
    throw std::invalid_argument("LambdaModel: feature dimension mismatch");
  }
  return forward_impl(features.data(), nullptr);
}

// acts (when non-null) receives the post-activation vector of every layer,
// starting with the input copy; used by backward_impl.
std::vector<double> LambdaModel::forward_impl(const double* features,
                                              std::vector<std::vector<double>>* acts) const {
  std::vector<double> cur(features, features + arch_.input_dim);
  if (acts) acts->push_back(cur);
  std::size_t off = 0;
  std::uint32_t in = arch_.input_dim;

  auto dense = [&](std::uint32_t out_dim, bool tanh_act) {
    std::vector<double> out(out_dim, 0.0);
    for (std::uint32_t i = 0; i < out_dim; ++i) {
      double acc = 0.0;
      const double* w = params_.data() + off + static_cast<std::size_t>(i) * in;
      for (std::uint32_t j = 0; j < in; ++j) acc += w[j] * cur[j];
      out[i] = acc;
    }
    off += static_cast<std::size_t>(out_dim) * in;
    if (arch_.kind == ModelKind::mlp) {
      for (std::uint32_t i = 0; i < out_dim; ++i) out[i] += params_[off + i];
      off += out_dim;
    }
    if (tanh_act) {
      for (auto& v : out) v = std::tanh(v);
    }
    cur = std::move(out);
    in = out_dim;
    if (acts) acts->push_back(cur);
  };

  if (arch_.kind == ModelKind::linear) {
    dense(arch_.actions, false);
  } else {
    for (auto h : arch_.hidden) dense(h, true);
    dense(arch_.actions, false);
  }
  if (arch_.squash) {
    for (auto& v : cur) v = arch_.squash_cap * stable_sigmoid(v);
    if (acts) acts->back() = cur;
  }
  return cur;
}

GradVector LambdaModel::backward(StateId state, std::span<const double> upstream) const {
  if (arch_.kind == ModelKind::tabular) {
    if (state >= arch_.input_dim) throw std::invalid_argument("LambdaModel: state id out of range");
    if (upstream.size() != arch_.actions) throw std::invalid_argument("upstream dimension mismatch");
    GradVector g(params_.size());
    std::size_t base = static_cast<std::size_t>(state) * arch_.actions;
    for (std::uint32_t i = 0; i < arch_.actions; ++i) {
      double u = upstream[i];
      if (arch_.squash) {
        double s = stable_sigmoid(params_[base + i]);
        u *= arch_.squash_cap * s * (1.0 - s);
      }
      g.values[base + i] = u;
    }
    g.accumulated = 1;
    return g;
  }
  if (!arch_.one_hot_input) {
    throw std::logic_error("LambdaModel: state-id backward requires one_hot_input");
  }
  auto x = one_hot(state);
  return backward_impl(x.data(), upstream);
}

GradVector LambdaModel::backward(std::span<const double> features,
                                 std::span<const double> upstream) const {
  if (arch_.kind == ModelKind::tabular) {
    throw std::logic_error("LambdaModel: tabular model takes state ids, not features");
  }
  if (features.size() != arch_.input_dim) {
    throw std::invalid_argument("LambdaModel: feature dimension mismatch");
  }
  return backward_impl(features.data(), upstream);
}

GradVector LambdaModel::backward_impl(const double* features,
                                      std::span<const double> upstream) const {
  if (upstream.size() != arch_.actions) throw std::invalid_argument("upstream dimension mismatch");
  std::vector<std::vector<double>> acts;
  forward_impl(features, &acts);

  std::vector<std::uint32_t> widths;
  widths.push_back(arch_.input_dim);
  if (arch_.kind == ModelKind::mlp) {
    for (auto h : arch_.hidden) widths.push_back(h);
  }
  widths.push_back(arch_.actions);

  // Offset of each layer's weight block in the flat parameter vector.
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    offsets.push_back(off);
    off += static_cast<std::size_t>(widths[l + 1]) * widths[l];
    if (arch_.kind == ModelKind::mlp) off += widths[l + 1];
  }

  GradVector g(params_.size());
  std::vector<double> delta(upstream.begin(), upstream.end());
  if (arch_.squash) {
    const auto& lam = acts.back();
    for (std::uint32_t i = 0; i < arch_.actions; ++i) {
      double s = lam[i] / arch_.squash_cap;  // sigmoid(z)
      delta[i] *= arch_.squash_cap * s * (1.0 - s);
    }
  }

  for (std::size_t l = widths.size() - 1; l-- > 0;) {
    std::uint32_t out_dim = widths[l + 1];
    std::uint32_t in_dim = widths[l];
    const auto& input_act = acts[l];
    std::size_t w_off = offsets[l];
    std::size_t b_off = w_off + static_cast<std::size_t>(out_dim) * in_dim;
    std::vector<double> prev(in_dim, 0.0);
    for (std::uint32_t i = 0; i < out_dim; ++i) {
      double d = delta[i];
      double* gw = g.values.data() + w_off + static_cast<std::size_t>(i) * in_dim;
      const double* w = params_.data() + w_off + static_cast<std::size_t>(i) * in_dim;
      for (std::uint32_t j = 0; j < in_dim; ++j) {
        gw[j] += d * input_act[j];
        prev[j] += d * w[j];
      }
      if (arch_.kind == ModelKind::mlp) g.values[b_off + i] += d;
    }
    if (l > 0) {
      // Input to this layer was a tanh output: fold in tanh'(z) = 1 - a^2.
      for (std::uint32_t j = 0; j < in_dim; ++j) prev[j] *= 1.0 - input_act[j] * input_act[j];
    }
    delta = std::move(prev);
  }
  g.accumulated = 1;
  return g;
}

void sgd_update(LambdaModel& model, const GradVector& grad, double lr) {
  if (grad.size() != model.param_count()) throw std::invalid_argument("sgd_update: dim mismatch");
  auto& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad.values[i];
}

void SgdOptimizer::step(LambdaModel& model, const GradVector& grad) {
  if (momentum == 0.0) {
    sgd_update(model, grad, lr);
    return;
  }
  if (velocity.size() != grad.size()) velocity.assign(grad.size(), 0.0);
  auto& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad.values[i];
    p[i] -= lr * velocity[i];
  }
}

FiniteDiffReport finite_difference_check(const LambdaModel& model, const LossClosure& loss,
                                         double tolerance, double step) {
  FiniteDiffReport rep;
  LossEval center = loss(model);
  if (!std::isfinite(center.loss) || !center.grad.all_finite()) {
    rep.nonfinite = true;
    return rep;
  }
  if (center.grad.size() != model.param_count()) {
    throw std::invalid_argument("finite_difference_check: gradient dimension mismatch");
  }
  if (center.at_kink) {
    rep.kink_excluded = true;
    rep.pass = true;
    return rep;
  }
  const std::size_t n = model.param_count();
  rep.analytic = center.grad.values;
  rep.numeric.assign(n, 0.0);
  rep.rel_error.assign(n, 0.0);
  LambdaModel work = model;
  for (std::size_t c = 0; c < n; ++c) {
    double orig = work.params()[c];
    work.params()[c] = orig + step;
    LossEval plus = loss(work);
    work.params()[c] = orig - step;
    LossEval minus = loss(work);
    work.params()[c] = orig;
    if (plus.at_kink || minus.at_kink) {
      rep.kink_excluded = true;
      continue;
    }
    if (!std::isfinite(plus.loss) || !std::isfinite(minus.loss)) {
      rep.nonfinite = true;
      return rep;
    }
    double numeric = (plus.loss - minus.loss) / (2.0 * step);
    rep.numeric[c] = numeric;
    double a = rep.analytic[c];
    double denom = std::max(std::abs(a), std::abs(numeric));
    double rel = denom < 1e-6 ? 0.0 : std::abs(a - numeric) / denom;
    rep.rel_error[c] = rel;
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_coordinate = c;
    }
  }
  rep.pass = rep.max_rel_error < tolerance;
  return rep;
}

namespace {

void put_u16_le(std::ofstream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

void put_u32_le(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_f64_le(std::ofstream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint16_t get_u16_le(std::ifstream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32_le(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64_le(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const LambdaModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  put_u16_le(out, kFormatVersion);
  out.put(static_cast<char>(model.arch().kind));
  std::vector<std::uint32_t> dims;
  dims.push_back(model.arch().input_dim);
  for (auto h : model.arch().hidden) dims.push_back(h);
  dims.push_back(model.arch().actions);
  put_u32_le(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32_le(out, d);
  for (double p : model.params()) put_f64_le(out, p);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

LambdaModel load_checkpoint(const std::string& path, bool squash, double squash_cap) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path);
  }
  std::uint16_t version = get_u16_le(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  int kind_tag = in.get();
  if (kind_tag < 0 || kind_tag > 2) throw std::runtime_error("bad checkpoint kind tag");
  std::uint32_t dim_count = get_u32_le(in);
  if (dim_count < 2 || dim_count > 64) throw std::runtime_error("bad checkpoint dim count");
  std::vector<std::uint32_t> dims(dim_count);
  for (auto& d : dims) d = get_u32_le(in);
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);

  ModelArch arch;
  arch.kind = static_cast<ModelKind>(kind_tag);
  arch.input_dim = dims.front();
  arch.actions = dims.back();
  arch.hidden.assign(dims.begin() + 1, dims.end() - 1);
  arch.squash = squash;
  arch.squash_cap = squash_cap;
  if (arch.kind != ModelKind::mlp && !arch.hidden.empty()) {
    throw std::runtime_error("checkpoint dims inconsistent with kind");
  }
  LambdaModel model(arch);
  for (auto& p : model.params()) {
    p = get_f64_le(in);
    if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
  }
  in.peek();
  if (!in.eof()) throw std::runtime_error("trailing bytes in checkpoint: " + path);
  return model;
}

}  // namespace rankgrad
