#include "slu/cells.hpp"

#include <algorithm>
#include <cmath>

#include "slu/error.hpp"

namespace slu {
namespace {

constexpr const char* kLstmGateNames[4] = {"i", "f", "o", "g"};
constexpr const char* kGruGateNames[3] = {"r", "z", "n"};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void check_dim(std::span<const double> v, std::size_t expected, const char* what) {
  if (v.size() != expected) {
    fail(ErrorKind::kInvalidArgument, std::string(what) + ": expected dimension " +
                                          std::to_string(expected) + ", got " +
                                          std::to_string(v.size()));
  }
}

template <std::size_t N>
void init_gates(std::array<RealMatrix, N>& wx, std::array<RealMatrix, N>& wh,
                std::array<RealVector, N>& b, std::size_t input_dim, std::size_t hidden_dim) {
  for (std::size_t k = 0; k < N; ++k) {
    wx[k] = RealMatrix(hidden_dim, input_dim);
    wh[k] = RealMatrix(hidden_dim, hidden_dim);
    b[k] = RealVector(hidden_dim);
  }
}

template <std::size_t N>
void collect_gates(std::array<RealMatrix, N>& wx, std::array<RealMatrix, N>& wh,
                   std::array<RealVector, N>& b, const char* const (&names)[N],
                   const std::string& prefix, TensorList& out) {
  for (std::size_t k = 0; k < N; ++k) append_tensor(out, prefix + "W_x" + names[k], wx[k]);
  for (std::size_t k = 0; k < N; ++k) append_tensor(out, prefix + "W_h" + names[k], wh[k]);
  for (std::size_t k = 0; k < N; ++k) append_tensor(out, prefix + "b_" + names[k], b[k]);
}

// pre = W_x x + W_h h + b
RealVector gate_preactivation(const RealMatrix& wx, const RealMatrix& wh, const RealVector& b,
                              std::span<const double> x, std::span<const double> h) {
  RealVector pre = b;
  mat_vec_acc(wx, x, pre);
  mat_vec_acc(wh, h, pre);
  return pre;
}

}  // namespace

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  init_gates(p.wx, p.wh, p.b, input_dim, hidden_dim);
  return p;
}

LstmParams LstmParams::initialized(std::size_t input_dim, std::size_t hidden_dim,
                                   SeededRng& rng) {
  LstmParams p = zeros(input_dim, hidden_dim);
  for (std::size_t k = 0; k < 4; ++k) {
    fill_uniform(p.wx[k].span(), -kInitRange, kInitRange, rng);
    fill_uniform(p.wh[k].span(), -kInitRange, kInitRange, rng);
  }
  p.b[1].fill(kForgetBiasInit);
  return p;
}

void LstmParams::collect(const std::string& prefix, TensorList& out) {
  collect_gates(wx, wh, b, kLstmGateNames, prefix, out);
}

StepTrace lstm_step(const LstmParams& params, std::span<const double> x,
                    std::span<const double> h_prev, std::span<const double> c_prev) {
  check_dim(x, params.input_dim, "lstm_step x");
  check_dim(h_prev, params.hidden_dim, "lstm_step h_prev");
  check_dim(c_prev, params.hidden_dim, "lstm_step c_prev");
  const std::size_t hidden = params.hidden_dim;
  StepTrace t;
  t.x = RealVector({x.begin(), x.end()});
  t.h_prev = RealVector({h_prev.begin(), h_prev.end()});
  t.c_prev = RealVector({c_prev.begin(), c_prev.end()});
  t.i = gate_preactivation(params.wx[0], params.wh[0], params.b[0], x, h_prev);
  t.f = gate_preactivation(params.wx[1], params.wh[1], params.b[1], x, h_prev);
  t.o = gate_preactivation(params.wx[2], params.wh[2], params.b[2], x, h_prev);
  t.g = gate_preactivation(params.wx[3], params.wh[3], params.b[3], x, h_prev);
  t.c = RealVector(hidden);
  t.tanh_c = RealVector(hidden);
  t.h = RealVector(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    t.i[j] = sigmoid(t.i[j]);
    t.f[j] = sigmoid(t.f[j]);
    t.o[j] = sigmoid(t.o[j]);
    t.g[j] = std::tanh(t.g[j]);
    t.c[j] = t.f[j] * c_prev[j] + t.i[j] * t.g[j];
    t.tanh_c[j] = std::tanh(t.c[j]);
    t.h[j] = t.o[j] * t.tanh_c[j];
  }
  return t;
}

LstmStepGrads lstm_step_backward(const LstmParams& params, const StepTrace& t,
                                 std::span<const double> dh, std::span<const double> dc,
                                 LstmParams& grads) {
  const std::size_t hidden = params.hidden_dim;
  check_dim(dh, hidden, "lstm_step_backward dh");
  check_dim(dc, hidden, "lstm_step_backward dc");
  std::array<RealVector, 4> da;
  for (auto& v : da) v = RealVector(hidden);
  LstmStepGrads out{RealVector(params.input_dim), RealVector(hidden), RealVector(hidden)};
  for (std::size_t j = 0; j < hidden; ++j) {
    const double d_o = dh[j] * t.tanh_c[j];
    const double d_c = dc[j] + dh[j] * t.o[j] * (1.0 - t.tanh_c[j] * t.tanh_c[j]);
    const double d_i = d_c * t.g[j];
    const double d_g = d_c * t.i[j];
    const double d_f = d_c * t.c_prev[j];
    out.c_prev[j] = d_c * t.f[j];
    da[0][j] = d_i * t.i[j] * (1.0 - t.i[j]);
    da[1][j] = d_f * t.f[j] * (1.0 - t.f[j]);
    da[2][j] = d_o * t.o[j] * (1.0 - t.o[j]);
    da[3][j] = d_g * (1.0 - t.g[j] * t.g[j]);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    outer_acc(grads.wx[k], da[k], t.x);
    outer_acc(grads.wh[k], da[k], t.h_prev);
    add_to(grads.b[k], da[k]);
    mat_t_vec_acc(params.wx[k], da[k], out.x);
    mat_t_vec_acc(params.wh[k], da[k], out.h_prev);
  }
  return out;
}

GruParams GruParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  GruParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  init_gates(p.wx, p.wh, p.b, input_dim, hidden_dim);
  return p;
}

GruParams GruParams::initialized(std::size_t input_dim, std::size_t hidden_dim,
                                 SeededRng& rng) {
  GruParams p = zeros(input_dim, hidden_dim);
  for (std::size_t k = 0; k < 3; ++k) {
    fill_uniform(p.wx[k].span(), -kInitRange, kInitRange, rng);
    fill_uniform(p.wh[k].span(), -kInitRange, kInitRange, rng);
  }
  return p;
}

void GruParams::collect(const std::string& prefix, TensorList& out) {
  collect_gates(wx, wh, b, kGruGateNames, prefix, out);
}

GruTrace gru_step(const GruParams& params, std::span<const double> x,
                  std::span<const double> h_prev) {
  check_dim(x, params.input_dim, "gru_step x");
  check_dim(h_prev, params.hidden_dim, "gru_step h_prev");
  const std::size_t hidden = params.hidden_dim;
  GruTrace t;
  t.x = RealVector({x.begin(), x.end()});
  t.h_prev = RealVector({h_prev.begin(), h_prev.end()});
  t.r = gate_preactivation(params.wx[0], params.wh[0], params.b[0], x, h_prev);
  t.z = gate_preactivation(params.wx[1], params.wh[1], params.b[1], x, h_prev);
  t.rh = RealVector(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    t.r[j] = sigmoid(t.r[j]);
    t.z[j] = sigmoid(t.z[j]);
    t.rh[j] = t.r[j] * h_prev[j];
  }
  t.n = gate_preactivation(params.wx[2], params.wh[2], params.b[2], x, t.rh);
  t.h = RealVector(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    t.n[j] = std::tanh(t.n[j]);
    t.h[j] = t.z[j] * h_prev[j] + (1.0 - t.z[j]) * t.n[j];
  }
  return t;
}

GruStepGrads gru_step_backward(const GruParams& params, const GruTrace& t,
                               std::span<const double> dh, GruParams& grads) {
  const std::size_t hidden = params.hidden_dim;
  check_dim(dh, hidden, "gru_step_backward dh");
  GruStepGrads out{RealVector(params.input_dim), RealVector(hidden)};
  RealVector da_n(hidden), da_z(hidden), da_r(hidden), d_rh(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    const double d_n = dh[j] * (1.0 - t.z[j]);
    const double d_z = dh[j] * (t.h_prev[j] - t.n[j]);
    out.h_prev[j] = dh[j] * t.z[j];
    da_n[j] = d_n * (1.0 - t.n[j] * t.n[j]);
    da_z[j] = d_z * t.z[j] * (1.0 - t.z[j]);
  }
  outer_acc(grads.wx[2], da_n, t.x);
  outer_acc(grads.wh[2], da_n, t.rh);
  add_to(grads.b[2], da_n);
  mat_t_vec_acc(params.wx[2], da_n, out.x);
  mat_t_vec_acc(params.wh[2], da_n, d_rh);
  for (std::size_t j = 0; j < hidden; ++j) {
    const double d_r = d_rh[j] * t.h_prev[j];
    out.h_prev[j] += d_rh[j] * t.r[j];
    da_r[j] = d_r * t.r[j] * (1.0 - t.r[j]);
  }
  const RealVector* das[2] = {&da_r, &da_z};
  for (std::size_t k = 0; k < 2; ++k) {
    outer_acc(grads.wx[k], *das[k], t.x);
    outer_acc(grads.wh[k], *das[k], t.h_prev);
    add_to(grads.b[k], *das[k]);
    mat_t_vec_acc(params.wx[k], *das[k], out.x);
    mat_t_vec_acc(params.wh[k], *das[k], out.h_prev);
  }
  return out;
}

CellParams make_cell(CellKind kind, std::size_t input_dim, std::size_t hidden_dim,
                     SeededRng& rng) {
  if (kind == CellKind::kLstm) return LstmParams::initialized(input_dim, hidden_dim, rng);
  return GruParams::initialized(input_dim, hidden_dim, rng);
}

CellParams zeros_like(const CellParams& cell) {
  return std::visit(Overloaded{
                        [](const LstmParams& p) -> CellParams {
                          return LstmParams::zeros(p.input_dim, p.hidden_dim);
                        },
                        [](const GruParams& p) -> CellParams {
                          return GruParams::zeros(p.input_dim, p.hidden_dim);
                        },
                    },
                    cell);
}

CellKind cell_kind(const CellParams& cell) {
  return std::holds_alternative<LstmParams>(cell) ? CellKind::kLstm : CellKind::kGru;
}

std::size_t cell_input_dim(const CellParams& cell) {
  return std::visit([](const auto& p) { return p.input_dim; }, cell);
}

std::size_t cell_hidden_dim(const CellParams& cell) {
  return std::visit([](const auto& p) { return p.hidden_dim; }, cell);
}

void collect(CellParams& cell, const std::string& prefix, TensorList& out) {
  std::visit([&](auto& p) { p.collect(prefix, out); }, cell);
}

std::vector<RealVector> unroll(const CellParams& cell, std::span<const RealVector> xs,
                               UnrollTrace* trace) {
  const std::size_t hidden = cell_hidden_dim(cell);
  std::vector<RealVector> hs;
  hs.reserve(xs.size());
  if (trace != nullptr) {
    trace->lstm.clear();
    trace->gru.clear();
  }
  std::visit(Overloaded{
                 [&](const LstmParams& p) {
                   RealVector h(hidden), c(hidden);
                   for (const RealVector& x : xs) {
                     StepTrace step = lstm_step(p, x, h, c);
                     h = step.h;
                     c = step.c;
                     hs.push_back(h);
                     if (trace != nullptr) trace->lstm.push_back(std::move(step));
                   }
                 },
                 [&](const GruParams& p) {
                   RealVector h(hidden);
                   for (const RealVector& x : xs) {
                     GruTrace step = gru_step(p, x, h);
                     h = step.h;
                     hs.push_back(h);
                     if (trace != nullptr) trace->gru.push_back(std::move(step));
                   }
                 },
             },
             cell);
  return hs;
}

std::vector<RealVector> unroll_backward(const CellParams& cell, const UnrollTrace& trace,
                                        std::span<const RealVector> dhs, CellParams& grads) {
  const std::size_t hidden = cell_hidden_dim(cell);
  const std::size_t steps = dhs.size();
  std::vector<RealVector> dxs(steps);
  std::visit(Overloaded{
                 [&](const LstmParams& p) {
                   require(trace.lstm.size() == steps, "unroll_backward: trace length mismatch");
                   auto& g = std::get<LstmParams>(grads);
                   RealVector dh_next(hidden), dc_next(hidden);
                   for (std::size_t t = steps; t-- > 0;) {
                     RealVector dh = dhs[t];
                     add_to(dh, dh_next);
                     LstmStepGrads sg = lstm_step_backward(p, trace.lstm[t], dh, dc_next, g);
                     dxs[t] = std::move(sg.x);
                     dh_next = std::move(sg.h_prev);
                     dc_next = std::move(sg.c_prev);
                   }
                 },
                 [&](const GruParams& p) {
                   require(trace.gru.size() == steps, "unroll_backward: trace length mismatch");
                   auto& g = std::get<GruParams>(grads);
                   RealVector dh_next(hidden);
                   for (std::size_t t = steps; t-- > 0;) {
                     RealVector dh = dhs[t];
                     add_to(dh, dh_next);
                     GruStepGrads sg = gru_step_backward(p, trace.gru[t], dh, g);
                     dxs[t] = std::move(sg.x);
                     dh_next = std::move(sg.h_prev);
                   }
                 },
             },
             cell);
  return dxs;
}

Encoder Encoder::create(CellKind kind, bool bidirectional, std::size_t input_dim,
                        std::size_t hidden_dim, SeededRng& rng) {
  Encoder e{make_cell(kind, input_dim, hidden_dim, rng), std::nullopt};
  if (bidirectional) e.bw = make_cell(kind, input_dim, hidden_dim, rng);
  return e;
}

Encoder Encoder::zeros_like() const {
  Encoder e{slu::zeros_like(fw), std::nullopt};
  if (bw) e.bw = slu::zeros_like(*bw);
  return e;
}

void Encoder::collect(const std::string& prefix, TensorList& out) {
  slu::collect(fw, prefix + "fw.", out);
  if (bw) slu::collect(*bw, prefix + "bw.", out);
}

std::vector<RealVector> Encoder::run(std::span<const RealVector> xs, Trace* trace) const {
  std::vector<RealVector> fw_states = unroll(fw, xs, trace ? &trace->fw : nullptr);
  if (!bw) return fw_states;
  std::vector<RealVector> reversed(xs.rbegin(), xs.rend());
  std::vector<RealVector> bw_states = unroll(*bw, reversed, trace ? &trace->bw : nullptr);
  const std::size_t steps = xs.size();
  std::vector<RealVector> out(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    out[t] = concat(fw_states[t], bw_states[steps - 1 - t]);
  }
  return out;
}

std::vector<RealVector> Encoder::backprop(const Trace& trace,
                                          std::span<const RealVector> dstates,
                                          Encoder& grads) const {
  const std::size_t steps = dstates.size();
  if (!bw) return unroll_backward(fw, trace.fw, dstates, grads.fw);
  const std::size_t hidden = hidden_dim();
  std::vector<RealVector> d_fw(steps), d_bw(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& d = dstates[t].values();
    d_fw[t] = RealVector(std::vector<double>(d.begin(), d.begin() + static_cast<long>(hidden)));
    // backward-direction step index for original position t
    d_bw[steps - 1 - t] =
        RealVector(std::vector<double>(d.begin() + static_cast<long>(hidden), d.end()));
  }
  std::vector<RealVector> dxs = unroll_backward(fw, trace.fw, d_fw, grads.fw);
  std::vector<RealVector> dxs_rev = unroll_backward(*bw, trace.bw, d_bw, *grads.bw);
  for (std::size_t t = 0; t < steps; ++t) add_to(dxs[t], dxs_rev[steps - 1 - t]);
  return dxs;
}

BidirOutput bidir_unroll(const CellParams& fw, const CellParams& bw,
                         std::span<const RealVector> sequence, Encoder::Trace* trace) {
  require(!sequence.empty(), "bidir_unroll: empty sequence");
  require(cell_hidden_dim(fw) == cell_hidden_dim(bw) &&
              cell_input_dim(fw) == cell_input_dim(bw),
          "bidir_unroll: forward and backward cells differ in shape");
  Encoder encoder{fw, bw};
  BidirOutput out;
  out.states = encoder.run(sequence, trace);
  const std::size_t hidden = cell_hidden_dim(fw);
  const auto& last = out.states.back().values();
  const auto& first = out.states.front().values();
  out.fw_last = RealVector(std::vector<double>(last.begin(), last.begin() + static_cast<long>(hidden)));
  out.bw_first = RealVector(std::vector<double>(first.begin() + static_cast<long>(hidden), first.end()));
  return out;
}

AttentionParams AttentionParams::create(std::size_t state_dim, std::size_t attention_dim,
                                        bool learned_context, SeededRng& rng) {
  AttentionParams p;
  p.projection = RealMatrix(attention_dim, state_dim);
  fill_uniform(p.projection.span(), -kInitRange, kInitRange, rng);
  p.bias = RealVector(attention_dim);
  p.has_learned_context = learned_context;
  if (learned_context) {
    p.context = RealVector(attention_dim);
    fill_uniform(p.context.span(), -kInitRange, kInitRange, rng);
  } else {
    p.context = RealVector(attention_dim, 1.0 / static_cast<double>(attention_dim));
  }
  return p;
}

AttentionParams AttentionParams::zeros_like() const {
  AttentionParams p;
  p.projection = RealMatrix(projection.rows(), projection.cols());
  p.bias = RealVector(bias.dim());
  p.context = RealVector(context.dim());
  p.has_learned_context = has_learned_context;
  return p;
}

void AttentionParams::collect(const std::string& prefix, TensorList& out) {
  append_tensor(out, prefix + "projection", projection);
  append_tensor(out, prefix + "bias", bias);
  if (has_learned_context) append_tensor(out, prefix + "context", context);
}

AttentionResult attention_pool(std::span<const RealVector> states,
                               const AttentionParams& params, AttentionTrace* trace) {
  require(!states.empty(), "attention_pool: empty input");
  const std::size_t steps = states.size();
  const std::size_t state_dim = params.projection.cols();
  std::vector<RealVector> hidden(steps);
  RealVector scores(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    check_dim(states[t], state_dim, "attention_pool state");
    hidden[t] = params.bias;
    mat_vec_acc(params.projection, states[t], hidden[t]);
    for (double& a : hidden[t].values()) a = std::tanh(a);
    scores[t] = dot(params.context, hidden[t]);
  }
  AttentionResult result{RealVector(state_dim), softmax(scores)};
  for (std::size_t t = 0; t < steps; ++t) {
    const double w = result.weights[t];
    for (std::size_t j = 0; j < state_dim; ++j) result.pooled[j] += w * states[t][j];
  }
  if (trace != nullptr) {
    trace->states.assign(states.begin(), states.end());
    trace->hidden = std::move(hidden);
    trace->weights = result.weights;
  }
  return result;
}

std::vector<RealVector> attention_backward(const AttentionParams& params,
                                           const AttentionTrace& trace,
                                           std::span<const double> dpooled,
                                           AttentionParams& grads) {
  const std::size_t steps = trace.states.size();
  const std::size_t state_dim = params.projection.cols();
  const std::size_t attn_dim = params.bias.dim();
  std::vector<RealVector> dstates(steps);
  RealVector dweights(steps);
  double mean = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    dstates[t] = RealVector(state_dim);
    for (std::size_t j = 0; j < state_dim; ++j) dstates[t][j] = trace.weights[t] * dpooled[j];
    dweights[t] = dot(dpooled, trace.states[t]);
    mean += trace.weights[t] * dweights[t];
  }
  RealVector dz(attn_dim);
  for (std::size_t t = 0; t < steps; ++t) {
    const double dscore = trace.weights[t] * (dweights[t] - mean);
    const RealVector& a = trace.hidden[t];
    if (params.has_learned_context) {
      for (std::size_t k = 0; k < attn_dim; ++k) grads.context[k] += dscore * a[k];
    }
    for (std::size_t k = 0; k < attn_dim; ++k) {
      dz[k] = dscore * params.context[k] * (1.0 - a[k] * a[k]);
    }
    outer_acc(grads.projection, dz, trace.states[t]);
    add_to(grads.bias, dz);
    mat_t_vec_acc(params.projection, dz, dstates[t]);
  }
  return dstates;
}

Affine Affine::create(std::size_t out_dim, std::size_t in_dim, SeededRng& rng) {
  Affine a{RealMatrix(out_dim, in_dim), RealVector(out_dim)};
  fill_uniform(a.weight.span(), -kInitRange, kInitRange, rng);
  return a;
}

Affine Affine::zeros_like() const {
  return Affine{RealMatrix(weight.rows(), weight.cols()), RealVector(bias.dim())};
}

RealVector Affine::apply(std::span<const double> x) const {
  check_dim(x, weight.cols(), "affine input");
  RealVector y = bias;
  mat_vec_acc(weight, x, y);
  return y;
}

void Affine::backward(std::span<const double> x, std::span<const double> dy, Affine& grads,
                      std::span<double> dx) const {
  outer_acc(grads.weight, dy, x);
  add_to(grads.bias, dy);
  mat_t_vec_acc(weight, dy, dx);
}

void Affine::collect(const std::string& prefix, TensorList& out) {
  append_tensor(out, prefix + "weight", weight);
  append_tensor(out, prefix + "bias", bias);
}

RealVector dropout_apply(std::span<const double> v, double rate, bool training,
                         SeededRng& rng, std::vector<double>* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    fail(ErrorKind::kInvalidArgument, "dropout_apply: rate must lie in [0, 1)");
  }
  RealVector out({v.begin(), v.end()});
  if (mask != nullptr) mask->assign(v.size(), 1.0);
  if (!training || rate == 0.0) return out;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double m = rng.bernoulli(rate) ? 0.0 : keep_scale;
    out[i] *= m;
    if (mask != nullptr) (*mask)[i] = m;
  }
  return out;
}

}  // namespace slu
