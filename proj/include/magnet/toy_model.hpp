#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "magnet/attention_masks.hpp"
#include "magnet/token_grid.hpp"

namespace magnet {

/// How a K x T grid maps onto transformer positions.
///
/// kPlain: position t carries every level at time t, and the level-k head at
/// position t predicts (k, t). Used by the non-autoregressive model.
///
/// kDelayed: positions follow the delay pattern shifted right by one step.
/// Position p carries delayed step p - 1 (position 0 is all padding) and the
/// level-k head at position p predicts delayed step p, i.e. (k, p - k). One
/// causal pass therefore yields next-step predictions for every level, and
/// the same positions serve masked prediction in hybrid models.
enum class Layout { kPlain, kDelayed };

/// Condition value that selects the learned unconditional row.
inline constexpr int kNullCondition = -1;

struct ModelConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  double ffn_mult = 4.0;
  int levels = 4;
  int vocab = 32;
  int max_length = 64;
  int cond_count = 4;
  double cond_dropout = 0.3;
  int window = 5;  // restricted attention radius for levels > 0; -1 = full
  Layout layout = Layout::kPlain;
  std::uint64_t seed = 0;

  void validate() const;
  int ffn_dim() const;
  int head_dim() const { return d_model / n_heads; }
  /// Positional table rows; covers both layouts.
  int max_positions() const { return max_length + levels; }
};

/// Sequence length the model sees for a T-step grid.
int sequence_length(Layout layout, int levels, int length);
/// Position whose level-k head predicts (level, t).
int output_row(Layout layout, int level, int t);
/// Model input ids (K x sequence_length) for a grid under a layout. The grid
/// is used as given: masked cells stay MASK, padding slots become PAD.
TokenGrid model_input(const TokenGrid& grid, Layout layout);

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Real>
struct Parameter {
  std::string name;
  Matrix<Real> value;
  Matrix<Real> grad;
};

/// Everything the backward pass needs from one forward pass.
template <typename Real>
struct Activations {
  struct Layer {
    Matrix<Real> x;            // residual input
    Matrix<Real> xhat1, y1;    // attention pre-norm
    Eigen::Matrix<Real, Eigen::Dynamic, 1> rstd1;
    Matrix<Real> q, k, v;
    std::vector<Matrix<Real>> probs;  // per head, L x L
    Matrix<Real> ctx;
    Matrix<Real> x_mid;
    Matrix<Real> xhat2, y2;    // ffn pre-norm
    Eigen::Matrix<Real, Eigen::Dynamic, 1> rstd2;
    Matrix<Real> h_pre, h;
  };

  TokenGrid input;
  int cond_row = 0;
  const AttnMask* mask = nullptr;
  std::vector<Layer> layers;
  Matrix<Real> x_final;
  Matrix<Real> xhat_f, y_f;
  Eigen::Matrix<Real, Eigen::Dynamic, 1> rstd_f;
};

/// Small pre-norm transformer over token grids.
///
/// The input at every position is the sum of one embedding per level (each
/// level has its own table with MASK and PAD rows), a learned positional
/// embedding and a condition embedding. Each level has its own output head.
template <typename Real>
class BasicToyModel {
 public:
  explicit BasicToyModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter<Real>>& parameters() { return params_; }
  const std::vector<Parameter<Real>>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  /// Runs the trunk on explicit input ids (K x L, as built by model_input).
  /// The mask must outlive the returned activations.
  Activations<Real> run(const TokenGrid& input, int cond, const AttnMask& mask) const;
  /// L x N logits of one level head.
  Matrix<Real> head_logits(const Activations<Real>& acts, int level) const;

  /// Accumulates parameter gradients. `dlogits[k]` is either empty or the
  /// L x N gradient of the loss with respect to head k's logits.
  void backward(const Activations<Real>& acts, const std::vector<Matrix<Real>>& dlogits);
  void zero_grad();

  template <typename Other>
  BasicToyModel<Other> cast() const;

 private:
  struct LayerIndex {
    int ln1_g, ln1_b, wq, wk, wv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  int add_param(const std::string& name, int rows, int cols);
  void init_parameters();
  int cond_row(int cond) const;

  ModelConfig config_;
  std::vector<Parameter<Real>> params_;
  std::vector<int> tok_emb_;
  int pos_emb_ = 0;
  int cond_emb_ = 0;
  std::vector<LayerIndex> layers_;
  int lnf_g_ = 0;
  int lnf_b_ = 0;
  std::vector<int> head_w_;
  std::vector<int> head_b_;

  template <typename>
  friend class BasicToyModel;
};

using ToyModel = BasicToyModel<float>;

/// Level-scoped forward: T x N logits for `level`.
///
/// In the plain layout, levels above `level` are replaced by MASK before the
/// pass, so they never influence the prediction. In the delayed layout the
/// grid is used as given.
template <typename Real>
Matrix<Real> forward(const BasicToyModel<Real>& model, const TokenGrid& grid, int level, int cond,
                     const AttnMask& mask);

/// Default attention for non-autoregressive prediction of a level in the plain
/// layout: full for level 0, restricted for the others.
AttnMask level_attention(const ModelConfig& config, int level, int length);

/// Mean cross-entropy over positions with mask_row set.
template <typename Real>
double masked_ce_loss(const Matrix<Real>& logits, std::span<const TokenId> targets,
                      std::span<const std::uint8_t> mask_row);

/// Gradient of masked_ce_loss times `scale`.
template <typename Real>
Matrix<Real> masked_ce_grad(const Matrix<Real>& logits, std::span<const TokenId> targets,
                            std::span<const std::uint8_t> mask_row, double scale = 1.0);

/// Checkpoint: `path` holds a JSON manifest and `path.bin` the float32 blob.
void save_checkpoint(const ToyModel& model, const std::filesystem::path& path);
ToyModel load_checkpoint(const std::filesystem::path& path);

std::string to_string(Layout layout);
Layout parse_layout(const std::string& text);

extern template class BasicToyModel<float>;
extern template class BasicToyModel<double>;

}  // namespace magnet
