// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "muco/error.hpp"
#include "muco/rng.hpp"

namespace muco {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitScale = 0.02;

struct LayerOffsets {
  std::size_t ln1_gain, ln1_bias, wqkv, bqkv, wo, bo, ln2_gain, ln2_bias, w1, b1, w2, b2;
};

struct Offsets {
  std::size_t tok_emb, pos_emb;
  std::vector<LayerOffsets> layers;
  std::size_t final_gain, final_bias;
  std::size_t total;
};

Offsets compute_offsets(const EncoderConfig& c) {
  Offsets o{};
  std::size_t at = 0;
  auto take = [&](std::size_t n) {
    const auto off = at;
    at += n;
    return off;
  };
  const auto d = c.dim;
  const auto f = c.ffn_dim();
  o.tok_emb = take(c.vocab_size * d);
  o.pos_emb = take(c.max_seq * d);
  for (std::size_t l = 0; l < c.layers; ++l) {
    LayerOffsets lo{};
    lo.ln1_gain = take(d);
    lo.ln1_bias = take(d);
    lo.wqkv = take(d * 3 * d);
    lo.bqkv = take(3 * d);
    lo.wo = take(d * d);
    lo.bo = take(d);
    lo.ln2_gain = take(d);
    lo.ln2_bias = take(d);
    lo.w1 = take(d * f);
    lo.b1 = take(f);
    lo.w2 = take(f * d);
    lo.b2 = take(d);
    o.layers.push_back(lo);
  }
  o.final_gain = take(d);
  o.final_bias = take(d);
  o.total = at;
  return o;
}

// y = x W + b, W stored (in, out) row-major.
Matrix affine(const Matrix& x, const double* w, const double* b, std::size_t out) {
  Matrix y(x.rows(), out);
  const auto in = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* yr = &y(r, 0);
    for (std::size_t j = 0; j < out; ++j) yr[j] = b[j];
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = x(r, k);
      if (xv == 0.0) continue;
      const double* wk = w + k * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += xv * wk[j];
    }
  }
  return y;
}

// Given dy for y = x W + b: accumulates dW, db and returns dx.
Matrix affine_backward(const Matrix& x, const double* w, const Matrix& dy, double* dw,
                       double* db) {
  const auto in = x.cols();
  const auto out = dy.cols();
  Matrix dx(x.rows(), in);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* dyr = &dy(r, 0);
    for (std::size_t j = 0; j < out; ++j) db[j] += dyr[j];
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = x(r, k);
      const double* wk = w + k * out;
      double* dwk = dw + k * out;
      double acc = 0.0;
      for (std::size_t j = 0; j < out; ++j) {
        dwk[j] += xv * dyr[j];
        acc += wk[j] * dyr[j];
      }
      dx(r, k) = acc;
    }
  }
  return dx;
}

void layer_norm(const Matrix& x, const double* gain, const double* bias, Matrix& xhat,
                std::vector<double>& rstd, Matrix& y) {
  const auto n = x.cols();
  xhat = Matrix(x.rows(), n);
  y = Matrix(x.rows(), n);
  rstd.assign(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += x(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= static_cast<double>(n);
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    rstd[r] = rs;
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (x(r, c) - mean) * rs;
      y(r, c) = gain[c] * xhat(r, c) + bias[c];
    }
  }
}

Matrix layer_norm_backward(const Matrix& xhat, const std::vector<double>& rstd,
                           const double* gain, const Matrix& dy, double* dgain,
                           double* dbias) {
  const auto n = xhat.cols();
  Matrix dx(xhat.rows(), n);
  std::vector<double> dxhat(n);
  for (std::size_t r = 0; r < xhat.rows(); ++r) {
    double mean_d = 0.0;
    double mean_dx = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      dgain[c] += dy(r, c) * xhat(r, c);
      dbias[c] += dy(r, c);
      dxhat[c] = dy(r, c) * gain[c];
      mean_d += dxhat[c];
      mean_dx += dxhat[c] * xhat(r, c);
    }
    mean_d /= static_cast<double>(n);
    mean_dx /= static_cast<double>(n);
    for (std::size_t c = 0; c < n; ++c) {
      dx(r, c) = rstd[r] * (dxhat[c] - mean_d - xhat(r, c) * mean_dx);
    }
  }
  return dx;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
}

void add_into(Matrix& dst, const Matrix& src) {
  auto& d = dst.data();
  const auto& s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size == 0 || dim == 0 || heads == 0 || layers == 0 || max_seq == 0) {
    throw Error(ErrorCode::kInvalidConfig, "encoder sizes must be >= 1");
  }
  if (dim % heads != 0) throw Error(ErrorCode::kInvalidConfig, "dim must be divisible by heads");
}

std::vector<Segment> parameter_layout(const EncoderConfig& cfg) {
  cfg.validate();
  const auto o = compute_offsets(cfg);
  const auto d = cfg.dim;
  const auto f = cfg.ffn_dim();
  std::vector<Segment> segs;
  segs.push_back({"tok_emb", o.tok_emb, cfg.vocab_size * d});
  segs.push_back({"pos_emb", o.pos_emb, cfg.max_seq * d});
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto& lo = o.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    segs.push_back({p + "ln1.gain", lo.ln1_gain, d});
    segs.push_back({p + "ln1.bias", lo.ln1_bias, d});
    segs.push_back({p + "attn.wqkv", lo.wqkv, d * 3 * d});
    segs.push_back({p + "attn.bqkv", lo.bqkv, 3 * d});
    segs.push_back({p + "attn.wo", lo.wo, d * d});
    segs.push_back({p + "attn.bo", lo.bo, d});
    segs.push_back({p + "ln2.gain", lo.ln2_gain, d});
    segs.push_back({p + "ln2.bias", lo.ln2_bias, d});
    segs.push_back({p + "ffn.w1", lo.w1, d * f});
    segs.push_back({p + "ffn.b1", lo.b1, f});
    segs.push_back({p + "ffn.w2", lo.w2, f * d});
    segs.push_back({p + "ffn.b2", lo.b2, d});
  }
  segs.push_back({"final_ln.gain", o.final_gain, d});
  segs.push_back({"final_ln.bias", o.final_bias, d});
  return segs;
}

EncoderState make_encoder_state(const EncoderConfig& cfg, std::vector<double> params) {
  auto segs = parameter_layout(cfg);
  const auto total = segs.back().offset + segs.back().size;
  if (params.size() != total) {
    throw Error(ErrorCode::kInvalidConfig, "parameter vector has " +
                                               std::to_string(params.size()) +
                                               " values, layout needs " + std::to_string(total));
  }
  for (double v : params) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidConfig, "non-finite parameter");
  }
  return EncoderState(cfg, std::move(segs), std::move(params));
}

EncoderState EncoderState::zeros(const EncoderConfig& cfg) {
  const auto total = compute_offsets(cfg).total;
  return make_encoder_state(cfg, std::vector<double>(total, 0.0));
}

EncoderState EncoderState::init(const EncoderConfig& cfg) {
  auto state = zeros(cfg);
  Rng rng(cfg.seed);
  for (const auto& seg : state.segments_) {
    auto values = std::span<double>(state.params_).subspan(seg.offset, seg.size);
    const bool is_gain = seg.name.ends_with(".gain");
    const bool is_bias = seg.name.ends_with(".bias") || seg.name.ends_with(".bqkv") ||
                         seg.name.ends_with(".bo") || seg.name.ends_with(".b1") ||
                         seg.name.ends_with(".b2");
    for (double& v : values) {
      if (is_gain) {
        v = 1.0;
      } else if (is_bias) {
        v = 0.0;
      } else {
        v = kInitScale * rng.normal();
      }
    }
  }
  return state;
}

const Segment& EncoderState::find(std::string_view name) const {
  for (const auto& s : segments_) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::kInvalidConfig, "no parameter segment named " + std::string(name));
}

std::span<double> EncoderState::segment(std::string_view name) {
  const auto& s = find(name);
  return std::span<double>(params_).subspan(s.offset, s.size);
}

std::span<const double> EncoderState::segment(std::string_view name) const {
  const auto& s = find(name);
  return std::span<const double>(params_).subspan(s.offset, s.size);
}

bool EncoderActivations::attends(std::size_t from, std::size_t to) const {
  if (to > from) return false;
  if (attention_mode == AttentionMode::kCausal) return true;
  return token_turn[to] == kPrefixTurn || token_turn[to] == token_turn[from];
}

EncoderActivations forward(const EncoderState& state, const PackedSequence& packed) {
  const auto& cfg = state.config();
  const auto n = packed.size();
  if (n > cfg.max_seq) {
    throw Error(ErrorCode::kSequenceTooLong, "sequence of " + std::to_string(n) +
                                                 " tokens exceeds max_seq " +
                                                 std::to_string(cfg.max_seq));
  }
  for (int id : packed.token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw Error(ErrorCode::kTokenOutOfVocab, "token id " + std::to_string(id));
    }
  }
  const auto o = compute_offsets(cfg);
  const double* p = state.params().data();
  const auto d = cfg.dim;
  const auto f = cfg.ffn_dim();
  const auto heads = cfg.heads;
  const auto hd = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  EncoderActivations a;
  a.token_ids = packed.token_ids;
  a.token_turn = packed.token_turn;
  if (a.token_turn.size() != n) a.token_turn.assign(n, 0);
  a.attention_mode = packed.attention_mode;

  a.embedded = Matrix(n, d);
  for (std::size_t t = 0; t < n; ++t) {
    const double* te = p + o.tok_emb + static_cast<std::size_t>(packed.token_ids[t]) * d;
    const double* pe = p + o.pos_emb + t * d;
    for (std::size_t c = 0; c < d; ++c) a.embedded(t, c) = te[c] + pe[c];
  }

  Matrix x = a.embedded;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto& lo = o.layers[l];
    LayerActivations la;
    la.input = x;
    layer_norm(x, p + lo.ln1_gain, p + lo.ln1_bias, la.ln1_xhat, la.ln1_rstd, la.ln1_out);
    la.qkv = affine(la.ln1_out, p + lo.wqkv, p + lo.bqkv, 3 * d);

    la.probs.assign(heads * n * n, 0.0);
    la.attn_concat = Matrix(n, d);
    std::vector<double> scores(n);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* qi = &la.qkv(i, h * hd);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          if (!a.attends(i, j)) continue;
          const double* kj = &la.qkv(j, d + h * hd);
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
          scores[j] = s * scale;
          mx = std::max(mx, scores[j]);
        }
        double* prow = &la.probs[(h * n + i) * n];
        double sum = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          if (!a.attends(i, j)) continue;
          prow[j] = std::exp(scores[j] - mx);
          sum += prow[j];
        }
        double* out = &la.attn_concat(i, h * hd);
        for (std::size_t j = 0; j <= i; ++j) {
          if (!a.attends(i, j)) continue;
          prow[j] /= sum;
          const double* vj = &la.qkv(j, 2 * d + h * hd);
          for (std::size_t c = 0; c < hd; ++c) out[c] += prow[j] * vj[c];
        }
      }
    }
    x = affine(la.attn_concat, p + lo.wo, p + lo.bo, d);
    add_into(x, la.input);
    la.mid = x;

    layer_norm(x, p + lo.ln2_gain, p + lo.ln2_bias, la.ln2_xhat, la.ln2_rstd, la.ln2_out);
    la.ffn_pre = affine(la.ln2_out, p + lo.w1, p + lo.b1, f);
    la.ffn_act = Matrix(n, f);
    for (std::size_t i = 0; i < la.ffn_pre.size(); ++i) {
      la.ffn_act.data()[i] = gelu(la.ffn_pre.data()[i]);
    }
    x = affine(la.ffn_act, p + lo.w2, p + lo.b2, d);
    add_into(x, la.mid);
    a.layers.push_back(std::move(la));
  }
  a.final_input = x;
  layer_norm(x, p + o.final_gain, p + o.final_bias, a.final_xhat, a.final_rstd, a.hidden);
  return a;
}

EncoderGradients backward(const EncoderState& state, const EncoderActivations& a,
                          const Matrix& d_hidden) {
  const auto& cfg = state.config();
  const auto o = compute_offsets(cfg);
  const double* p = state.params().data();
  const auto n = a.hidden.rows();
  const auto d = cfg.dim;
  const auto heads = cfg.heads;
  const auto hd = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  if (d_hidden.rows() != n || d_hidden.cols() != d) {
    throw Error(ErrorCode::kInvalidConfig, "d_hidden shape does not match activations");
  }

  EncoderGradients g;
  g.params.assign(state.param_count(), 0.0);
  double* gp = g.params.data();

  Matrix dx = layer_norm_backward(a.final_xhat, a.final_rstd, p + o.final_gain, d_hidden,
                                  gp + o.final_gain, gp + o.final_bias);

  for (std::size_t li = cfg.layers; li-- > 0;) {
    const auto& lo = o.layers[li];
    const auto& la = a.layers[li];

    // Feed-forward block; dx is the gradient of the layer output.
    Matrix d_act = affine_backward(la.ffn_act, p + lo.w2, dx, gp + lo.w2, gp + lo.b2);
    for (std::size_t i = 0; i < d_act.size(); ++i) {
      d_act.data()[i] *= gelu_grad(la.ffn_pre.data()[i]);
    }
    Matrix d_ln2 = affine_backward(la.ln2_out, p + lo.w1, d_act, gp + lo.w1, gp + lo.b1);
    Matrix d_mid = layer_norm_backward(la.ln2_xhat, la.ln2_rstd, p + lo.ln2_gain, d_ln2,
                                       gp + lo.ln2_gain, gp + lo.ln2_bias);
    add_into(d_mid, dx);

    // Attention block.
    Matrix d_concat = affine_backward(la.attn_concat, p + lo.wo, d_mid, gp + lo.wo, gp + lo.bo);
    Matrix d_qkv(n, 3 * d);
    std::vector<double> dprob(n);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* prow = &la.probs[(h * n + i) * n];
        const double* dout = &d_concat(i, h * hd);
        double dot = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          if (!a.attends(i, j)) continue;
          const double* vj = &la.qkv(j, 2 * d + h * hd);
          double* dvj = &d_qkv(j, 2 * d + h * hd);
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) {
            s += dout[c] * vj[c];
            dvj[c] += prow[j] * dout[c];
          }
          dprob[j] = s;
          dot += prow[j] * s;
        }
        const double* qi = &la.qkv(i, h * hd);
        double* dqi = &d_qkv(i, h * hd);
        for (std::size_t j = 0; j <= i; ++j) {
          if (!a.attends(i, j)) continue;
          const double ds = prow[j] * (dprob[j] - dot) * scale;
          const double* kj = &la.qkv(j, d + h * hd);
          double* dkj = &d_qkv(j, d + h * hd);
          for (std::size_t c = 0; c < hd; ++c) {
            dqi[c] += ds * kj[c];
            dkj[c] += ds * qi[c];
          }
        }
      }
    }
    Matrix d_ln1 = affine_backward(la.ln1_out, p + lo.wqkv, d_qkv, gp + lo.wqkv, gp + lo.bqkv);
    Matrix d_in = layer_norm_backward(la.ln1_xhat, la.ln1_rstd, p + lo.ln1_gain, d_ln1,
                                      gp + lo.ln1_gain, gp + lo.ln1_bias);
    add_into(d_in, d_mid);
    dx = std::move(d_in);
  }

  for (std::size_t t = 0; t < n; ++t) {
    double* te = gp + o.tok_emb + static_cast<std::size_t>(a.token_ids[t]) * d;
    double* pe = gp + o.pos_emb + t * d;
    for (std::size_t c = 0; c < d; ++c) {
      te[c] += dx(t, c);
      pe[c] += dx(t, c);
    }
  }
  g.input = std::move(dx);
  return g;
}

EmbeddingMatrix extract_embeddings(const Matrix& hidden, const PackedSequence& packed,
                                   std::size_t image_index, Role role, Variant variant) {
  const auto d = hidden.cols();
  std::vector<RowLabel> labels;
  std::vector<double> values;
  values.reserve(packed.emb_positions.size() * d);
  for (std::size_t e = 0; e < packed.emb_positions.size(); ++e) {
    const auto row = hidden.row(packed.emb_positions[e]);
    values.insert(values.end(), row.begin(), row.end());
    labels.push_back({image_index, packed.turn_of_position[e], role, variant});
  }
  return EmbeddingMatrix::normalized(std::move(labels), d, std::move(values));
}

Matrix embedding_backward(const Matrix& hidden, const PackedSequence& packed,
                          const Matrix& d_embeddings) {
  const auto d = hidden.cols();
  if (d_embeddings.rows() != packed.emb_positions.size() || d_embeddings.cols() != d) {
    throw Error(ErrorCode::kLabelMismatch, "embedding gradient shape mismatch");
  }
  Matrix dh(hidden.rows(), d);
  for (std::size_t e = 0; e < packed.emb_positions.size(); ++e) {
    const auto h = hidden.row(packed.emb_positions[e]);
    const auto gu = d_embeddings.row(e);
    double sq = 0.0;
    for (double v : h) sq += v * v;
    const double norm = std::sqrt(sq);
    // u = h / |h|; du/dh = (I - u u^T) / |h|
    double dot = 0.0;
    for (std::size_t c = 0; c < d; ++c) dot += gu[c] * h[c] / norm;
    auto out = dh.row(packed.emb_positions[e]);
    for (std::size_t c = 0; c < d; ++c) out[c] += (gu[c] - dot * h[c] / norm) / norm;
  }
  return dh;
}

}  // namespace muco
