#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "slu/numerics.hpp"

namespace slu {

// Matrices are drawn from uniform(-kInitRange, kInitRange); biases start at
// zero except the LSTM forget bias.
inline constexpr double kInitRange = 0.08;
inline constexpr double kForgetBiasInit = 1.0;

enum class CellKind { kLstm, kGru };

// Gate order for all per-gate arrays: input, forget, output, candidate.
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::array<RealMatrix, 4> wx;  // H x D
  std::array<RealMatrix, 4> wh;  // H x H
  std::array<RealVector, 4> b;   // H

  static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  static LstmParams initialized(std::size_t input_dim, std::size_t hidden_dim,
                                SeededRng& rng);
  void collect(const std::string& prefix, TensorList& out);
};

struct StepTrace {
  RealVector x, h_prev, c_prev;
  RealVector i, f, o, g;
  RealVector c, tanh_c, h;
};

StepTrace lstm_step(const LstmParams& params, std::span<const double> x,
                    std::span<const double> h_prev, std::span<const double> c_prev);

struct LstmStepGrads {
  RealVector x, h_prev, c_prev;
};

// Accumulates parameter gradients into `grads` and returns input gradients.
LstmStepGrads lstm_step_backward(const LstmParams& params, const StepTrace& trace,
                                 std::span<const double> dh, std::span<const double> dc,
                                 LstmParams& grads);

// Two-gate recurrence with the reset gate applied to h_prev inside the
// candidate:
//   r = σ(W_xr x + W_hr h + b_r)      z = σ(W_xz x + W_hz h + b_z)
//   n = tanh(W_xn x + W_hn (r ⊙ h) + b_n)
//   h' = z ⊙ h + (1 − z) ⊙ n
// Gate order: reset, update, candidate.
struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::array<RealMatrix, 3> wx;
  std::array<RealMatrix, 3> wh;
  std::array<RealVector, 3> b;

  static GruParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  static GruParams initialized(std::size_t input_dim, std::size_t hidden_dim,
                               SeededRng& rng);
  void collect(const std::string& prefix, TensorList& out);
};

struct GruTrace {
  RealVector x, h_prev;
  RealVector r, z, n, rh;
  RealVector h;
};

GruTrace gru_step(const GruParams& params, std::span<const double> x,
                  std::span<const double> h_prev);

struct GruStepGrads {
  RealVector x, h_prev;
};

GruStepGrads gru_step_backward(const GruParams& params, const GruTrace& trace,
                               std::span<const double> dh, GruParams& grads);

using CellParams = std::variant<LstmParams, GruParams>;

CellParams make_cell(CellKind kind, std::size_t input_dim, std::size_t hidden_dim,
                     SeededRng& rng);
CellParams zeros_like(const CellParams& cell);
CellKind cell_kind(const CellParams& cell);
std::size_t cell_input_dim(const CellParams& cell);
std::size_t cell_hidden_dim(const CellParams& cell);
void collect(CellParams& cell, const std::string& prefix, TensorList& out);

struct UnrollTrace {
  std::vector<StepTrace> lstm;
  std::vector<GruTrace> gru;
};

// Runs the cell left to right from zero state.
std::vector<RealVector> unroll(const CellParams& cell, std::span<const RealVector> xs,
                               UnrollTrace* trace = nullptr);
std::vector<RealVector> unroll_backward(const CellParams& cell, const UnrollTrace& trace,
                                        std::span<const RealVector> dhs, CellParams& grads);

// Unidirectional or bidirectional recurrent layer. Bidirectional outputs are
// concat(h_fw[t], h_bw[t]) with the backward pass re-aligned to input order.
struct Encoder {
  CellParams fw;
  std::optional<CellParams> bw;

  static Encoder create(CellKind kind, bool bidirectional, std::size_t input_dim,
                        std::size_t hidden_dim, SeededRng& rng);
  Encoder zeros_like() const;
  bool bidirectional() const { return bw.has_value(); }
  std::size_t input_dim() const { return cell_input_dim(fw); }
  std::size_t hidden_dim() const { return cell_hidden_dim(fw); }
  std::size_t output_dim() const { return bidirectional() ? 2 * hidden_dim() : hidden_dim(); }
  void collect(const std::string& prefix, TensorList& out);

  struct Trace {
    UnrollTrace fw, bw;
  };
  std::vector<RealVector> run(std::span<const RealVector> xs, Trace* trace = nullptr) const;
  std::vector<RealVector> backprop(const Trace& trace, std::span<const RealVector> dstates,
                                   Encoder& grads) const;
};

struct BidirOutput {
  std::vector<RealVector> states;  // 2H each
  RealVector fw_last;              // forward state at the last step
  RealVector bw_first;             // backward state at the first step
};

BidirOutput bidir_unroll(const CellParams& fw, const CellParams& bw,
                         std::span<const RealVector> sequence,
                         Encoder::Trace* trace = nullptr);

enum class AttentionKind { kNone, kPlain, kWithContext };

// score_t = u^T tanh(P s_t + b). The plain variant keeps u fixed at 1/A in
// every entry and does not expose it as a parameter; the with-context variant
// learns u.
struct AttentionParams {
  RealMatrix projection;  // A x S
  RealVector bias;        // A
  RealVector context;     // A
  bool has_learned_context = false;

  static AttentionParams create(std::size_t state_dim, std::size_t attention_dim,
                                bool learned_context, SeededRng& rng);
  AttentionParams zeros_like() const;
  void collect(const std::string& prefix, TensorList& out);
};

struct AttentionTrace {
  std::vector<RealVector> states;
  std::vector<RealVector> hidden;
  RealVector weights;
};

struct AttentionResult {
  RealVector pooled;
  RealVector weights;
};

AttentionResult attention_pool(std::span<const RealVector> states,
                               const AttentionParams& params,
                               AttentionTrace* trace = nullptr);
std::vector<RealVector> attention_backward(const AttentionParams& params,
                                           const AttentionTrace& trace,
                                           std::span<const double> dpooled,
                                           AttentionParams& grads);

struct Affine {
  RealMatrix weight;  // out x in
  RealVector bias;

  static Affine create(std::size_t out_dim, std::size_t in_dim, SeededRng& rng);
  Affine zeros_like() const;
  RealVector apply(std::span<const double> x) const;
  // grads += dy x^T; dx += W^T dy
  void backward(std::span<const double> x, std::span<const double> dy, Affine& grads,
                std::span<double> dx) const;
  void collect(const std::string& prefix, TensorList& out);
};

// Inverted dropout: survivors are scaled by 1/(1 - rate) during training;
// identity at inference. When `mask` is given it receives the per-entry
// multiplier for the backward pass.
RealVector dropout_apply(std::span<const double> v, double rate, bool training,
                         SeededRng& rng, std::vector<double>* mask = nullptr);

}  // namespace slu
