#include "magnet/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace magnet {

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename Real>
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <typename Real>
void layer_norm(const Matrix<Real>& x, const Matrix<Real>& gain, const Matrix<Real>& bias,
                Matrix<Real>& xhat, Matrix<Real>& y, Vector<Real>& rstd) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  xhat.resize(rows, cols);
  y.resize(rows, cols);
  rstd.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Real mean = x.row(r).mean();
    const Real var = (x.row(r).array() - mean).square().mean();
    rstd(r) = Real(1) / std::sqrt(var + Real(kLayerNormEps));
    xhat.row(r) = (x.row(r).array() - mean) * rstd(r);
    y.row(r) = xhat.row(r).array() * gain.row(0).array() + bias.row(0).array();
  }
}

template <typename Real>
Matrix<Real> layer_norm_backward(const Matrix<Real>& dy, const Matrix<Real>& xhat,
                                 const Vector<Real>& rstd, const Matrix<Real>& gain,
                                 Matrix<Real>& dgain, Matrix<Real>& dbias) {
  dgain.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  Matrix<Real> dxhat = dy.array().rowwise() * gain.row(0).array();
  Matrix<Real> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Real mean_d = dxhat.row(r).mean();
    const Real mean_dx = (dxhat.row(r).array() * xhat.row(r).array()).mean();
    dx.row(r) = rstd(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
  }
  return dx;
}

template <typename Real>
constexpr Real kGeluC = Real(0.7978845608028654);  // sqrt(2/pi)

template <typename Real>
Real gelu(Real x) {
  return Real(0.5) * x * (Real(1) + std::tanh(kGeluC<Real> * (x + Real(0.044715) * x * x * x)));
}

template <typename Real>
Real gelu_grad(Real x) {
  const Real inner = kGeluC<Real> * (x + Real(0.044715) * x * x * x);
  const Real t = std::tanh(inner);
  return Real(0.5) * (Real(1) + t) +
         Real(0.5) * x * (Real(1) - t * t) * kGeluC<Real> * (Real(1) + Real(3 * 0.044715) * x * x);
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("model." + field + ": " + why);
  };
  if (d_model < 1) fail("d_model", "must be positive");
  if (n_heads < 1) fail("n_heads", "must be positive");
  if (d_model % n_heads != 0) fail("n_heads", "must divide d_model");
  if (n_layers < 1) fail("n_layers", "must be positive");
  if (!(ffn_mult > 0.0)) fail("ffn_mult", "must be positive");
  if (levels < 1) fail("levels", "must be positive");
  if (vocab < 1) fail("vocab", "must be positive");
  if (max_length < 1) fail("max_length", "must be positive");
  if (cond_count < 0) fail("cond_count", "must be non-negative");
  if (!(cond_dropout >= 0.0 && cond_dropout <= 1.0)) fail("cond_dropout", "must lie in [0, 1]");
  if (window < -1) fail("window", "must be -1 (full) or >= 0");
}

int ModelConfig::ffn_dim() const {
  return std::max(1, static_cast<int>(std::lround(ffn_mult * d_model)));
}

int sequence_length(Layout layout, int levels, int length) {
  return layout == Layout::kPlain ? length : length + levels - 1;
}

int output_row(Layout layout, int level, int t) { return layout == Layout::kPlain ? t : t + level; }

TokenGrid model_input(const TokenGrid& grid, Layout layout) {
  if (layout == Layout::kPlain) return grid;
  const int steps = grid.length() + grid.levels() - 1;
  TokenGrid input(grid.levels(), steps, grid.vocab(), grid.pad_id());
  for (int k = 0; k < grid.levels(); ++k) {
    for (int t = 0; t < grid.length(); ++t) {
      const int position = t + k + 1;  // delayed step t + k, shifted by one
      if (position < steps) input.set(k, position, grid.at(k, t));
    }
  }
  return input;
}

AttnMask level_attention(const ModelConfig& config, int level, int length) {
  if (level == 0 || config.window < 0) return full_mask(length);
  return restricted_mask(length, config.window);
}

std::string to_string(Layout layout) { return layout == Layout::kPlain ? "plain" : "delayed"; }

Layout parse_layout(const std::string& text) {
  if (text == "plain") return Layout::kPlain;
  if (text == "delayed") return Layout::kDelayed;
  throw std::invalid_argument("unknown layout '" + text + "' (expected plain or delayed)");
}

template <typename Real>
BasicToyModel<Real>::BasicToyModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int d = config_.d_model;
  const int f = config_.ffn_dim();
  for (int k = 0; k < config_.levels; ++k)
    tok_emb_.push_back(add_param("tok_emb." + std::to_string(k), config_.vocab + 2, d));
  pos_emb_ = add_param("pos_emb", config_.max_positions(), d);
  cond_emb_ = add_param("cond_emb", config_.cond_count + 1, d);
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    LayerIndex li{};
    li.ln1_g = add_param(p + "ln1.gain", 1, d);
    li.ln1_b = add_param(p + "ln1.bias", 1, d);
    li.wq = add_param(p + "attn.wq", d, d);
    li.wk = add_param(p + "attn.wk", d, d);
    li.wv = add_param(p + "attn.wv", d, d);
    li.wo = add_param(p + "attn.wo", d, d);
    li.bo = add_param(p + "attn.bo", 1, d);
    li.ln2_g = add_param(p + "ln2.gain", 1, d);
    li.ln2_b = add_param(p + "ln2.bias", 1, d);
    li.w1 = add_param(p + "ffn.w1", d, f);
    li.b1 = add_param(p + "ffn.b1", 1, f);
    li.w2 = add_param(p + "ffn.w2", f, d);
    li.b2 = add_param(p + "ffn.b2", 1, d);
    layers_.push_back(li);
  }
  lnf_g_ = add_param("final_ln.gain", 1, d);
  lnf_b_ = add_param("final_ln.bias", 1, d);
  for (int k = 0; k < config_.levels; ++k) {
    head_w_.push_back(add_param("head." + std::to_string(k) + ".w", d, config_.vocab));
    head_b_.push_back(add_param("head." + std::to_string(k) + ".b", 1, config_.vocab));
  }
  init_parameters();
}

template <typename Real>
int BasicToyModel<Real>::add_param(const std::string& name, int rows, int cols) {
  params_.push_back({name, Matrix<Real>::Zero(rows, cols), Matrix<Real>::Zero(rows, cols)});
  return static_cast<int>(params_.size()) - 1;
}

template <typename Real>
void BasicToyModel<Real>::init_parameters() {
  std::mt19937_64 rng(config_.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config_.d_model));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& p : params_) {
    const bool is_gain = p.name.ends_with(".gain");
    const bool is_bias = p.name.ends_with(".bias") || p.name.ends_with(".b") ||
                         p.name.ends_with(".bo") || p.name.ends_with(".b1") ||
                         p.name.ends_with(".b2");
    if (is_gain) {
      p.value.setOnes();
    } else if (is_bias) {
      p.value.setZero();
    } else {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Real>(dist(rng));
    }
  }
}

template <typename Real>
std::size_t BasicToyModel<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename Real>
int BasicToyModel<Real>::cond_row(int cond) const {
  if (cond == kNullCondition) return config_.cond_count;
  if (cond < 0 || cond >= config_.cond_count) {
    throw std::invalid_argument("condition label " + std::to_string(cond) + " outside [0, " +
                                std::to_string(config_.cond_count) + ")");
  }
  return cond;
}

template <typename Real>
Activations<Real> BasicToyModel<Real>::run(const TokenGrid& input, int cond, const AttnMask& mask) const {
  const int length = input.length();
  if (input.levels() != config_.levels || input.vocab() != config_.vocab) {
    throw std::invalid_argument("input grid geometry does not match the model (K=" +
                                std::to_string(config_.levels) + ", N=" + std::to_string(config_.vocab) + ")");
  }
  if (length > config_.max_positions()) throw std::invalid_argument("input longer than the positional table");
  if (mask.size() != length) throw std::invalid_argument("attention mask size does not match input length");

  const int d = config_.d_model;
  const int heads = config_.n_heads;
  const int dh = config_.head_dim();
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dh));

  Activations<Real> acts;
  acts.input = input;
  acts.cond_row = cond_row(cond);
  acts.mask = &mask;

  Matrix<Real> x(length, d);
  const auto& pos = params_[pos_emb_].value;
  const auto& cemb = params_[cond_emb_].value;
  for (int p = 0; p < length; ++p) {
    x.row(p) = pos.row(p) + cemb.row(acts.cond_row);
    for (int k = 0; k < config_.levels; ++k) x.row(p) += params_[tok_emb_[k]].value.row(input.at(k, p));
  }

  acts.layers.resize(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerIndex& li = layers_[l];
    auto& a = acts.layers[l];
    a.x = x;
    layer_norm<Real>(a.x, params_[li.ln1_g].value, params_[li.ln1_b].value, a.xhat1, a.y1, a.rstd1);
    a.q.noalias() = a.y1 * params_[li.wq].value;
    a.k.noalias() = a.y1 * params_[li.wk].value;
    a.v.noalias() = a.y1 * params_[li.wv].value;
    a.ctx.resize(length, d);
    a.probs.resize(heads);
    for (int h = 0; h < heads; ++h) {
      Matrix<Real> scores = (a.q.middleCols(h * dh, dh) * a.k.middleCols(h * dh, dh).transpose()) * scale;
      for (int q = 0; q < length; ++q) {
        Real row_max = -std::numeric_limits<Real>::infinity();
        for (int k = 0; k < length; ++k)
          if (mask.allowed(q, k)) row_max = std::max(row_max, scores(q, k));
        Real sum = 0;
        for (int k = 0; k < length; ++k) {
          const Real e = mask.allowed(q, k) ? std::exp(scores(q, k) - row_max) : Real(0);
          scores(q, k) = e;
          sum += e;
        }
        scores.row(q) /= sum;
      }
      a.ctx.middleCols(h * dh, dh).noalias() = scores * a.v.middleCols(h * dh, dh);
      a.probs[h] = std::move(scores);
    }
    a.x_mid = a.x;
    a.x_mid.noalias() += a.ctx * params_[li.wo].value;
    a.x_mid.rowwise() += params_[li.bo].value.row(0);
    layer_norm<Real>(a.x_mid, params_[li.ln2_g].value, params_[li.ln2_b].value, a.xhat2, a.y2, a.rstd2);
    a.h_pre.noalias() = a.y2 * params_[li.w1].value;
    a.h_pre.rowwise() += params_[li.b1].value.row(0);
    a.h = a.h_pre.unaryExpr([](Real v) { return gelu(v); });
    x = a.x_mid;
    x.noalias() += a.h * params_[li.w2].value;
    x.rowwise() += params_[li.b2].value.row(0);
  }
  acts.x_final = x;
  layer_norm<Real>(acts.x_final, params_[lnf_g_].value, params_[lnf_b_].value, acts.xhat_f, acts.y_f, acts.rstd_f);
  return acts;
}

template <typename Real>
Matrix<Real> BasicToyModel<Real>::head_logits(const Activations<Real>& acts, int level) const {
  if (level < 0 || level >= config_.levels) throw std::invalid_argument("level out of range");
  Matrix<Real> logits = acts.y_f * params_[head_w_[level]].value;
  logits.rowwise() += params_[head_b_[level]].value.row(0);
  return logits;
}

template <typename Real>
void BasicToyModel<Real>::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

template <typename Real>
void BasicToyModel<Real>::backward(const Activations<Real>& acts, const std::vector<Matrix<Real>>& dlogits) {
  const int length = acts.input.length();
  const int d = config_.d_model;
  const int dh = config_.head_dim();
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dh));
  const AttnMask& mask = *acts.mask;

  Matrix<Real> dy = Matrix<Real>::Zero(length, d);
  for (std::size_t k = 0; k < dlogits.size() && k < head_w_.size(); ++k) {
    const auto& g = dlogits[k];
    if (g.size() == 0) continue;
    params_[head_w_[k]].grad.noalias() += acts.y_f.transpose() * g;
    params_[head_b_[k]].grad.row(0) += g.colwise().sum();
    dy.noalias() += g * params_[head_w_[k]].value.transpose();
  }
  Matrix<Real> dx = layer_norm_backward<Real>(dy, acts.xhat_f, acts.rstd_f, params_[lnf_g_].value,
                                              params_[lnf_g_].grad, params_[lnf_b_].grad);

  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const LayerIndex& li = layers_[l];
    const auto& a = acts.layers[l];

    // Feed-forward sublayer.
    params_[li.w2].grad.noalias() += a.h.transpose() * dx;
    params_[li.b2].grad.row(0) += dx.colwise().sum();
    Matrix<Real> dh_act = dx * params_[li.w2].value.transpose();
    Matrix<Real> dh_pre = dh_act.array() * a.h_pre.unaryExpr([](Real v) { return gelu_grad(v); }).array();
    params_[li.w1].grad.noalias() += a.y2.transpose() * dh_pre;
    params_[li.b1].grad.row(0) += dh_pre.colwise().sum();
    Matrix<Real> dy2 = dh_pre * params_[li.w1].value.transpose();
    Matrix<Real> dx_mid = dx + layer_norm_backward<Real>(dy2, a.xhat2, a.rstd2, params_[li.ln2_g].value,
                                                         params_[li.ln2_g].grad, params_[li.ln2_b].grad);

    // Attention sublayer.
    params_[li.wo].grad.noalias() += a.ctx.transpose() * dx_mid;
    params_[li.bo].grad.row(0) += dx_mid.colwise().sum();
    Matrix<Real> dctx = dx_mid * params_[li.wo].value.transpose();
    Matrix<Real> dq(length, d), dk(length, d), dv(length, d);
    for (int h = 0; h < config_.n_heads; ++h) {
      const auto& probs = a.probs[h];
      const auto dctx_h = dctx.middleCols(h * dh, dh);
      Matrix<Real> dprobs = dctx_h * a.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh).noalias() = probs.transpose() * dctx_h;
      Matrix<Real> dscores(length, length);
      for (int q = 0; q < length; ++q) {
        const Real dot = (dprobs.row(q).array() * probs.row(q).array()).sum();
        for (int k = 0; k < length; ++k) {
          dscores(q, k) = mask.allowed(q, k) ? probs(q, k) * (dprobs(q, k) - dot) * scale : Real(0);
        }
      }
      dq.middleCols(h * dh, dh).noalias() = dscores * a.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = dscores.transpose() * a.q.middleCols(h * dh, dh);
    }
    params_[li.wq].grad.noalias() += a.y1.transpose() * dq;
    params_[li.wk].grad.noalias() += a.y1.transpose() * dk;
    params_[li.wv].grad.noalias() += a.y1.transpose() * dv;
    Matrix<Real> dy1 = dq * params_[li.wq].value.transpose();
    dy1.noalias() += dk * params_[li.wk].value.transpose();
    dy1.noalias() += dv * params_[li.wv].value.transpose();
    dx = dx_mid + layer_norm_backward<Real>(dy1, a.xhat1, a.rstd1, params_[li.ln1_g].value,
                                            params_[li.ln1_g].grad, params_[li.ln1_b].grad);
  }

  auto& pos_grad = params_[pos_emb_].grad;
  for (int p = 0; p < length; ++p) {
    pos_grad.row(p) += dx.row(p);
    for (int k = 0; k < config_.levels; ++k) params_[tok_emb_[k]].grad.row(acts.input.at(k, p)) += dx.row(p);
  }
  params_[cond_emb_].grad.row(acts.cond_row) += dx.colwise().sum();
}

template <typename Real>
template <typename Other>
BasicToyModel<Other> BasicToyModel<Real>::cast() const {
  BasicToyModel<Other> out(config_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.params_[i].value = params_[i].value.template cast<Other>();
    out.params_[i].grad.setZero();
  }
  return out;
}

template <typename Real>
Matrix<Real> forward(const BasicToyModel<Real>& model, const TokenGrid& grid, int level, int cond,
                     const AttnMask& mask) {
  const ModelConfig& config = model.config();
  if (grid.levels() != config.levels || level < 0 || level >= config.levels) {
    throw std::invalid_argument("forward: level/shape mismatch");
  }
  TokenGrid scoped = grid;
  if (config.layout == Layout::kPlain) {
    for (int k = level + 1; k < grid.levels(); ++k)
      for (int t = 0; t < grid.length(); ++t) scoped.set(k, t, grid.mask_id());
  }
  const TokenGrid input = model_input(scoped, config.layout);
  const auto acts = model.run(input, cond, mask);
  const Matrix<Real> all = model.head_logits(acts, level);
  Matrix<Real> out(grid.length(), config.vocab);
  for (int t = 0; t < grid.length(); ++t) out.row(t) = all.row(output_row(config.layout, level, t));
  return out;
}

template <typename Real>
double masked_ce_loss(const Matrix<Real>& logits, std::span<const TokenId> targets,
                      std::span<const std::uint8_t> mask_row) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size() || targets.size() != mask_row.size()) {
    throw std::invalid_argument("masked_ce_loss: shape mismatch");
  }
  double total = 0.0;
  int count = 0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    if (!mask_row[t]) continue;
    const double row_max = static_cast<double>(logits.row(t).maxCoeff());
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) sum += std::exp(static_cast<double>(logits(t, j)) - row_max);
    total += std::log(sum) + row_max - static_cast<double>(logits(t, targets[t]));
    ++count;
  }
  if (count == 0) throw std::invalid_argument("masked_ce_loss: mask selects no positions");
  return total / count;
}

template <typename Real>
Matrix<Real> masked_ce_grad(const Matrix<Real>& logits, std::span<const TokenId> targets,
                            std::span<const std::uint8_t> mask_row, double scale) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size() || targets.size() != mask_row.size()) {
    throw std::invalid_argument("masked_ce_grad: shape mismatch");
  }
  const auto count = std::count(mask_row.begin(), mask_row.end(), 1);
  if (count == 0) throw std::invalid_argument("masked_ce_grad: mask selects no positions");
  Matrix<Real> grad = Matrix<Real>::Zero(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    if (!mask_row[t]) continue;
    const Real row_max = logits.row(t).maxCoeff();
    grad.row(t) = (logits.row(t).array() - row_max).exp();
    grad.row(t) /= grad.row(t).sum();
    grad(t, targets[t]) -= Real(1);
    grad.row(t) *= static_cast<Real>(scale / static_cast<double>(count));
  }
  return grad;
}

template class BasicToyModel<float>;
template class BasicToyModel<double>;
template BasicToyModel<double> BasicToyModel<float>::cast<double>() const;
template BasicToyModel<float> BasicToyModel<double>::cast<float>() const;
template BasicToyModel<float> BasicToyModel<float>::cast<float>() const;
template BasicToyModel<double> BasicToyModel<double>::cast<double>() const;

template Matrix<float> forward(const BasicToyModel<float>&, const TokenGrid&, int, int, const AttnMask&);
template Matrix<double> forward(const BasicToyModel<double>&, const TokenGrid&, int, int, const AttnMask&);
template double masked_ce_loss(const Matrix<float>&, std::span<const TokenId>, std::span<const std::uint8_t>);
template double masked_ce_loss(const Matrix<double>&, std::span<const TokenId>, std::span<const std::uint8_t>);
template Matrix<float> masked_ce_grad(const Matrix<float>&, std::span<const TokenId>,
                                      std::span<const std::uint8_t>, double);
template Matrix<double> masked_ce_grad(const Matrix<double>&, std::span<const TokenId>,
                                       std::span<const std::uint8_t>, double);

}  // namespace magnet
