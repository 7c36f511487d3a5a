#include "domaincraft/model/transformer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "domaincraft/error.hpp"
#include "domaincraft/model/subword.hpp"
#include "domaincraft/util/rng.hpp"

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

namespace domaincraft {
namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;
using CRow = Eigen::Map<const Eigen::RowVectorXd>;
using MRow = Eigen::Map<Eigen::RowVectorXd>;

// Eigen's vector kernels split work by address alignment, so the same
// weights at a different heap offset can round differently. Model calls run
// on 64-byte aligned copies.
using Aligned = std::vector<double, Eigen::aligned_allocator<double>>;

constexpr double kLnEps = 1e-5;
constexpr double kMasked = -1e30;

// Subnormal intermediates (underflowing softmax tails and their gradients)
// slow training several-fold; they are flushed to zero for the duration of
// each model call.
class FlushDenormals {
 public:
#if defined(__SSE2__)
  FlushDenormals() : saved_(_mm_getcsr()) {
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
  }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

}  // namespace

// ---------------------------------------------------------------------------
// Layout

ParamLayout::ParamLayout(const ModelConfig& c) {
  const auto add = [&](std::string name, int rows, int cols) {
    tensors_.push_back({std::move(name), rows, cols, total_});
    total_ += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  };
  const auto add_ln = [&](const std::string& p) {
    add(p + ".g", 1, c.width);
    add(p + ".b", 1, c.width);
  };
  const auto add_attn = [&](const std::string& p) {
    for (const char* m : {"q", "k", "v", "o"}) {
      add(p + ".w" + m, c.width, c.width);
      add(p + ".b" + m, 1, c.width);
    }
  };
  const auto add_ff = [&](const std::string& p) {
    add(p + ".w1", c.width, c.ff_width);
    add(p + ".b1", 1, c.ff_width);
    add(p + ".w2", c.ff_width, c.width);
    add(p + ".b2", 1, c.width);
  };
  add("embed", c.vocab_size, c.width);
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    add_ln(p + ".ln1");
    add_attn(p + ".attn");
    add_ln(p + ".ln2");
    add_ff(p + ".ff");
  }
  add_ln("enc.ln");
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "dec." + std::to_string(l);
    add_ln(p + ".ln1");
    add_attn(p + ".self");
    add_ln(p + ".ln2");
    add_attn(p + ".cross");
    add_ln(p + ".ln3");
    add_ff(p + ".ff");
  }
  add_ln("dec.ln");
  add("out.w", c.width, c.vocab_size);
  add("out.b", 1, c.vocab_size);
}

const TensorInfo& ParamLayout::find(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw Error(ErrorKind::kValidation, "no tensor named " + std::string(name));
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const ParamLayout layout(config);
  ModelParams params{config, std::vector<double>(layout.total(), 0.0)};
  Rng rng(seed);
  for (const auto& t : layout.tensors()) {
    double* p = params.values.data() + t.offset;
    const std::string_view name = t.name;
    const bool is_gain = name.ends_with(".g");
    const bool is_bias = t.rows == 1 && !is_gain;
    if (is_gain) {
      std::fill(p, p + t.size(), 1.0);
    } else if (is_bias) {
      // zero
    } else if (name == "embed") {
      const double sd = 1.0 / std::sqrt(static_cast<double>(config.width));
      for (std::size_t i = 0; i < t.size(); ++i) p[i] = sd * rng.normal();
    } else if (name == "out.w") {
      // Small output weights keep the initial predictive distribution close
      // to uniform.
      for (std::size_t i = 0; i < t.size(); ++i) p[i] = 0.02 * rng.normal();
    } else {
      const double a = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
      for (std::size_t i = 0; i < t.size(); ++i) p[i] = a * (2.0 * rng.uniform01() - 1.0);
    }
  }
  return params;
}

bool ModelParams::all_finite() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

Batch make_batch(std::span<const Example> examples, int max_len) {
  Batch b;
  b.size = static_cast<int>(examples.size());
  const std::size_t max_out = static_cast<std::size_t>(std::max(0, max_len - 2));
  for (const auto& e : examples) {
    b.src_len = std::max(b.src_len, std::min(static_cast<int>(e.encoder_input.size()), max_len));
    b.tgt_len = std::max(b.tgt_len,
                         static_cast<int>(std::min(e.output.size(), max_out)) + 2);
  }
  b.src.assign(static_cast<std::size_t>(b.size * b.src_len), SubwordModel::kPad);
  b.dec_in.assign(static_cast<std::size_t>(b.size * b.tgt_len), SubwordModel::kPad);
  b.labels.assign(static_cast<std::size_t>(b.size * b.tgt_len), -1);
  for (int i = 0; i < b.size; ++i) {
    const auto& e = examples[static_cast<std::size_t>(i)];
    const auto n_src = std::min(e.encoder_input.size(), static_cast<std::size_t>(max_len));
    for (std::size_t t = 0; t < n_src; ++t) {
      b.src[static_cast<std::size_t>(i * b.src_len) + t] = e.encoder_input[t];
    }
    if (n_src < e.encoder_input.size() && n_src > 0) {
      b.src[static_cast<std::size_t>(i * b.src_len) + n_src - 1] = e.encoder_input.back();
    }
    b.src_lengths.push_back(static_cast<int>(n_src));

    const std::size_t n_out = std::min(e.output.size(), max_out);
    const std::size_t row = static_cast<std::size_t>(i * b.tgt_len);
    b.dec_in[row] = SubwordModel::kBos;
    b.dec_in[row + 1] = e.decoder_tag;
    for (std::size_t t = 0; t < n_out; ++t) {
      b.dec_in[row + 2 + t] = e.output[t];
      b.labels[row + 1 + t] = e.output[t];
    }
    b.labels[row + 1 + n_out] = SubwordModel::kEos;
    b.label_count += n_out + 1;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Layers

namespace {

struct LinearRef {
  std::size_t w = 0, b = 0;
  int in = 0, out = 0;
};
struct LnRef {
  std::size_t g = 0, b = 0;
  int d = 0;
};
struct AttnRef {
  LinearRef q, k, v, o;
};
struct EncRef {
  LnRef ln1;
  AttnRef attn;
  LnRef ln2;
  LinearRef ff1, ff2;
};
struct DecRef {
  LnRef ln1;
  AttnRef self;
  LnRef ln2;
  AttnRef cross;
  LnRef ln3;
  LinearRef ff1, ff2;
};
struct ModelRef {
  std::size_t embed = 0;
  std::vector<EncRef> enc;
  LnRef enc_ln;
  std::vector<DecRef> dec;
  LnRef dec_ln;
  LinearRef out;
  int d = 0, heads = 0, vocab = 0;
};

ModelRef resolve(const ParamLayout& layout, const ModelConfig& c) {
  const auto lin = [&](const std::string& w, const std::string& b) {
    const auto& tw = layout.find(w);
    return LinearRef{tw.offset, layout.find(b).offset, tw.rows, tw.cols};
  };
  const auto ln = [&](const std::string& p) {
    return LnRef{layout.find(p + ".g").offset, layout.find(p + ".b").offset, c.width};
  };
  const auto attn = [&](const std::string& p) {
    return AttnRef{lin(p + ".wq", p + ".bq"), lin(p + ".wk", p + ".bk"),
                   lin(p + ".wv", p + ".bv"), lin(p + ".wo", p + ".bo")};
  };
  ModelRef r;
  r.d = c.width;
  r.heads = c.heads;
  r.vocab = c.vocab_size;
  r.embed = layout.find("embed").offset;
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    r.enc.push_back({ln(p + ".ln1"), attn(p + ".attn"), ln(p + ".ln2"),
                     lin(p + ".ff.w1", p + ".ff.b1"), lin(p + ".ff.w2", p + ".ff.b2")});
  }
  r.enc_ln = ln("enc.ln");
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "dec." + std::to_string(l);
    r.dec.push_back({ln(p + ".ln1"), attn(p + ".self"), ln(p + ".ln2"),
                     attn(p + ".cross"), ln(p + ".ln3"),
                     lin(p + ".ff.w1", p + ".ff.b1"), lin(p + ".ff.w2", p + ".ff.b2")});
  }
  r.dec_ln = ln("dec.ln");
  r.out = lin("out.w", "out.b");
  return r;
}

struct Ctx {
  const double* P;
  double* G;  // null when gradients are not requested
  const ModelRef& R;
  DropoutRates rates;
  Rng* rng;
};

void linear_fwd(const Ctx& c, const LinearRef& L, const Mat& x, Mat& y) {
  y.noalias() = x * CMap(c.P + L.w, L.in, L.out);
  y.rowwise() += CRow(c.P + L.b, L.out);
}

// dx is overwritten unless accumulate is set.
void linear_bwd(const Ctx& c, const LinearRef& L, const Mat& x, const Mat& dy,
                Mat* dx, bool accumulate = false) {
  MMap(c.G + L.w, L.in, L.out).noalias() += x.transpose() * dy;
  MRow(c.G + L.b, L.out) += dy.colwise().sum();
  if (dx != nullptr) {
    if (accumulate) {
      dx->noalias() += dy * CMap(c.P + L.w, L.in, L.out).transpose();
    } else {
      dx->noalias() = dy * CMap(c.P + L.w, L.in, L.out).transpose();
    }
  }
}

struct LnCache {
  Mat xhat;
  Vec rstd;
};

void ln_fwd(const Ctx& c, const LnRef& L, const Mat& x, Mat& y, LnCache* cache) {
  const Eigen::Index n = x.rows();
  const double inv_d = 1.0 / static_cast<double>(L.d);
  Mat xhat(n, L.d);
  Vec rstd(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).sum() * inv_d;
    const auto centered = (x.row(r).array() - mean).eval();
    const double var = centered.square().sum() * inv_d;
    rstd(r) = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(r) = centered * rstd(r);
  }
  y = (xhat.array().rowwise() * CRow(c.P + L.g, L.d).array()).matrix();
  y.rowwise() += CRow(c.P + L.b, L.d);
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
}

void ln_bwd(const Ctx& c, const LnRef& L, const Mat& dy, const LnCache& cache, Mat& dx) {
  MRow(c.G + L.g, L.d) += (dy.array() * cache.xhat.array()).matrix().colwise().sum();
  MRow(c.G + L.b, L.d) += dy.colwise().sum();
  const Mat dxhat = (dy.array().rowwise() * CRow(c.P + L.g, L.d).array()).matrix();
  const double inv_d = 1.0 / static_cast<double>(L.d);
  dx.resize(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).sum() * inv_d;
    const double m2 = dxhat.row(r).dot(cache.xhat.row(r)) * inv_d;
    dx.row(r) = (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2) *
                cache.rstd(r);
  }
}

void dropout_fwd(Mat& x, double p, Rng* rng, Mat& mask) {
  if (rng == nullptr || p <= 0.0) {
    mask.resize(0, 0);
    return;
  }
  const double keep = 1.0 / (1.0 - p);
  mask.resize(x.rows(), x.cols());
  double* m = mask.data();
  for (Eigen::Index i = 0; i < mask.size(); ++i) m[i] = rng->uniform01() < p ? 0.0 : keep;
  x.array() *= mask.array();
}

void dropout_bwd(Mat& dx, const Mat& mask) {
  if (mask.size() > 0) dx.array() *= mask.array();
}

struct AttnCache {
  Mat q, k, v, ctx;
  std::vector<Mat> probs;
  std::vector<Mat> masks;
};

// Multi-head attention of xq (B*Lq rows) over xkv (B*Lk rows). Keys at or
// beyond key_len[b] are masked; `causal` also hides keys after the query.
void attn_fwd(const Ctx& c, const AttnRef& A, const Mat& xq, const Mat& xkv, int B,
              int Lq, int Lk, std::span<const int> key_len, bool causal, Mat& out,
              AttnCache& cache) {
  const int d = c.R.d;
  const int H = c.R.heads;
  const int dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  linear_fwd(c, A.q, xq, cache.q);
  linear_fwd(c, A.k, xkv, cache.k);
  linear_fwd(c, A.v, xkv, cache.v);
  cache.ctx.setZero(static_cast<Eigen::Index>(B) * Lq, d);
  cache.probs.resize(static_cast<std::size_t>(B * H));
  cache.masks.resize(static_cast<std::size_t>(B * H));
  for (int b = 0; b < B; ++b) {
    const int klen = key_len[static_cast<std::size_t>(b)];
    for (int h = 0; h < H; ++h) {
      const auto Q = cache.q.block(b * Lq, h * dh, Lq, dh);
      const auto K = cache.k.block(b * Lk, h * dh, Lk, dh);
      const auto V = cache.v.block(b * Lk, h * dh, Lk, dh);
      Mat& P = cache.probs[static_cast<std::size_t>(b * H + h)];
      P.noalias() = Q * K.transpose();
      P *= scale;
      for (int i = 0; i < Lq; ++i) {
        const int limit = causal ? std::min(klen, i + 1) : klen;
        for (int j = limit; j < Lk; ++j) P(i, j) = kMasked;
        const double mx = P.row(i).maxCoeff();
        P.row(i) = (P.row(i).array() - mx).exp();
        P.row(i) /= P.row(i).sum();
      }
      Mat& M = cache.masks[static_cast<std::size_t>(b * H + h)];
      if (c.rng != nullptr && c.rates.attention > 0.0) {
        Mat dropped = P;
        dropout_fwd(dropped, c.rates.attention, c.rng, M);
        cache.ctx.block(b * Lq, h * dh, Lq, dh).noalias() = dropped * V;
      } else {
        M.resize(0, 0);
        cache.ctx.block(b * Lq, h * dh, Lq, dh).noalias() = P * V;
      }
    }
  }
  linear_fwd(c, A.o, cache.ctx, out);
}

// dxq is overwritten; dxkv is overwritten unless accumulate_kv is set.
void attn_bwd(const Ctx& c, const AttnRef& A, const Mat& xq, const Mat& xkv, int B,
              int Lq, int Lk, const Mat& dout, const AttnCache& cache, Mat& dxq,
              Mat& dxkv, bool accumulate_kv) {
  const int d = c.R.d;
  const int H = c.R.heads;
  const int dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat dctx;
  linear_bwd(c, A.o, cache.ctx, dout, &dctx);
  Mat dq = Mat::Zero(cache.q.rows(), d);
  Mat dk = Mat::Zero(cache.k.rows(), d);
  Mat dv = Mat::Zero(cache.v.rows(), d);
  Mat dP;
  for (int b = 0; b < B; ++b) {
    for (int h = 0; h < H; ++h) {
      const auto Q = cache.q.block(b * Lq, h * dh, Lq, dh);
      const auto K = cache.k.block(b * Lk, h * dh, Lk, dh);
      const auto V = cache.v.block(b * Lk, h * dh, Lk, dh);
      const auto dC = dctx.block(b * Lq, h * dh, Lq, dh);
      const Mat& P = cache.probs[static_cast<std::size_t>(b * H + h)];
      const Mat& M = cache.masks[static_cast<std::size_t>(b * H + h)];
      if (M.size() > 0) {
        const Mat Pd = (P.array() * M.array()).matrix();
        dv.block(b * Lk, h * dh, Lk, dh).noalias() = Pd.transpose() * dC;
        dP.noalias() = dC * V.transpose();
        dP.array() *= M.array();
      } else {
        dv.block(b * Lk, h * dh, Lk, dh).noalias() = P.transpose() * dC;
        dP.noalias() = dC * V.transpose();
      }
      const Vec rowdot = (dP.array() * P.array()).rowwise().sum();
      Mat dS = (P.array() * (dP.array().colwise() - rowdot.array())).matrix();
      dS *= scale;
      dq.block(b * Lq, h * dh, Lq, dh).noalias() = dS * K;
      dk.block(b * Lk, h * dh, Lk, dh).noalias() = dS.transpose() * Q;
    }
  }
  linear_bwd(c, A.q, xq, dq, &dxq);
  linear_bwd(c, A.k, xkv, dk, &dxkv, accumulate_kv);
  linear_bwd(c, A.v, xkv, dv, &dxkv, true);
}

struct FfCache {
  Mat hidden;  // post-ReLU
  Mat mask;
};

void ff_fwd(const Ctx& c, const LinearRef& w1, const LinearRef& w2, const Mat& x,
            Mat& out, FfCache& cache) {
  linear_fwd(c, w1, x, cache.hidden);
  cache.hidden = cache.hidden.cwiseMax(0.0);
  linear_fwd(c, w2, cache.hidden, out);
  dropout_fwd(out, c.rates.hidden, c.rng, cache.mask);
}

void ff_bwd(const Ctx& c, const LinearRef& w1, const LinearRef& w2, const Mat& x,
            Mat dout, const FfCache& cache, Mat& dx) {
  dropout_bwd(dout, cache.mask);
  Mat dh;
  linear_bwd(c, w2, cache.hidden, dout, &dh);
  dh.array() *= (cache.hidden.array() > 0.0).cast<double>();
  linear_bwd(c, w1, x, dh, &dx);
}

struct EncCache {
  LnCache ln1, ln2;
  Mat h1, h2;
  AttnCache attn;
  Mat m1;
  FfCache ff;
};

struct DecCache {
  LnCache ln1, ln2, ln3;
  Mat h1, h2, h3;
  AttnCache self, cross;
  Mat m1, m2;
  FfCache ff;
};

struct Embedded {
  Mat x;
  Mat mask;
};

Mat positional_table(int max_len, int d) {
  Mat pe(max_len, d);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / d);
      pe(pos, i) = std::sin(pos * freq);
      if (i + 1 < d) pe(pos, i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

void embed_fwd(const Ctx& c, const Mat& pe, std::span<const int> ids, int L, Embedded& e) {
  const int d = c.R.d;
  const double s = std::sqrt(static_cast<double>(d));
  e.x.resize(static_cast<Eigen::Index>(ids.size()), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    e.x.row(static_cast<Eigen::Index>(r)) =
        CRow(c.P + c.R.embed + static_cast<std::size_t>(ids[r]) * d, d) * s +
        pe.row(static_cast<Eigen::Index>(r % static_cast<std::size_t>(L)));
  }
  dropout_fwd(e.x, c.rates.hidden, c.rng, e.mask);
}

void embed_bwd(const Ctx& c, std::span<const int> ids, Mat dx, const Embedded& e) {
  const int d = c.R.d;
  const double s = std::sqrt(static_cast<double>(d));
  dropout_bwd(dx, e.mask);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    MRow(c.G + c.R.embed + static_cast<std::size_t>(ids[r]) * d, d) +=
        dx.row(static_cast<Eigen::Index>(r)) * s;
  }
}

struct Forward {
  Embedded src_emb, tgt_emb;
  std::vector<EncCache> enc;
  std::vector<Mat> enc_inputs;  // input of each encoder layer
  LnCache enc_ln;
  Mat enc_out;
  std::vector<DecCache> dec;
  std::vector<Mat> dec_inputs;
  LnCache dec_ln;
  Mat dec_out;
};

void encode(const Ctx& c, const Mat& pe, const Batch& b, Forward& f) {
  embed_fwd(c, pe, b.src, b.src_len, f.src_emb);
  Mat x = f.src_emb.x;
  f.enc.resize(c.R.enc.size());
  f.enc_inputs.resize(c.R.enc.size());
  for (std::size_t l = 0; l < c.R.enc.size(); ++l) {
    const EncRef& L = c.R.enc[l];
    EncCache& k = f.enc[l];
    f.enc_inputs[l] = x;
    ln_fwd(c, L.ln1, x, k.h1, &k.ln1);
    Mat a;
    attn_fwd(c, L.attn, k.h1, k.h1, b.size, b.src_len, b.src_len, b.src_lengths, false, a,
             k.attn);
    dropout_fwd(a, c.rates.hidden, c.rng, k.m1);
    x += a;
    ln_fwd(c, L.ln2, x, k.h2, &k.ln2);
    Mat g;
    ff_fwd(c, L.ff1, L.ff2, k.h2, g, k.ff);
    x += g;
  }
  ln_fwd(c, c.R.enc_ln, x, f.enc_out, &f.enc_ln);
}

void decode(const Ctx& c, const Mat& pe, const Batch& b, Forward& f) {
  embed_fwd(c, pe, b.dec_in, b.tgt_len, f.tgt_emb);
  Mat y = f.tgt_emb.x;
  const std::vector<int> self_len(static_cast<std::size_t>(b.size), b.tgt_len);
  f.dec.resize(c.R.dec.size());
  f.dec_inputs.resize(c.R.dec.size());
  for (std::size_t l = 0; l < c.R.dec.size(); ++l) {
    const DecRef& L = c.R.dec[l];
    DecCache& k = f.dec[l];
    f.dec_inputs[l] = y;
    ln_fwd(c, L.ln1, y, k.h1, &k.ln1);
    Mat a;
    attn_fwd(c, L.self, k.h1, k.h1, b.size, b.tgt_len, b.tgt_len, self_len, true, a, k.self);
    dropout_fwd(a, c.rates.hidden, c.rng, k.m1);
    y += a;
    ln_fwd(c, L.ln2, y, k.h2, &k.ln2);
    attn_fwd(c, L.cross, k.h2, f.enc_out, b.size, b.tgt_len, b.src_len, b.src_lengths, false,
             a, k.cross);
    dropout_fwd(a, c.rates.hidden, c.rng, k.m2);
    y += a;
    ln_fwd(c, L.ln3, y, k.h3, &k.ln3);
    Mat g;
    ff_fwd(c, L.ff1, L.ff2, k.h3, g, k.ff);
    y += g;
  }
  ln_fwd(c, c.R.dec_ln, y, f.dec_out, &f.dec_ln);
}

std::vector<Eigen::Index> labelled_rows(const Batch& b) {
  std::vector<Eigen::Index> rows;
  rows.reserve(b.label_count);
  for (std::size_t i = 0; i < b.labels.size(); ++i) {
    if (b.labels[i] >= 0) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// Seq2Seq

Seq2Seq::Seq2Seq(const ModelParams& params) : params_(params), layout_(params.config) {
  if (params_.values.size() != layout_.total()) {
    throw Error(ErrorKind::kValidation, "parameter buffer does not match model config");
  }
}

double Seq2Seq::loss(const Batch& batch, std::span<double> grad,
                     const DropoutRates& dropout, Rng* rng) const {
  const FlushDenormals ftz;
  const ModelConfig& cfg = params_.config;
  const ModelRef R = resolve(layout_, cfg);
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != layout_.total()) {
    throw Error(ErrorKind::kValidation, "gradient buffer does not match model config");
  }
  if (batch.label_count == 0) return 0.0;
  const Aligned P(params_.values.begin(), params_.values.end());
  Aligned G(want_grad ? grad.size() : 0, 0.0);
  const Ctx c{P.data(), want_grad ? G.data() : nullptr, R, dropout, rng};
  const Mat pe = positional_table(std::max({batch.src_len, batch.tgt_len, 1}), cfg.width);

  Forward f;
  encode(c, pe, batch, f);
  decode(c, pe, batch, f);

  const auto rows = labelled_rows(batch);
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Mat hs(n, cfg.width);
  for (Eigen::Index i = 0; i < n; ++i) hs.row(i) = f.dec_out.row(rows[static_cast<std::size_t>(i)]);
  Mat logits;
  linear_fwd(c, R.out, hs, logits);

  double total = 0.0;
  Mat dlogits(n, cfg.vocab_size);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = batch.labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
    const double mx = logits.row(i).maxCoeff();
    const auto ex = (logits.row(i).array() - mx).exp().eval();
    const double sum = ex.sum();
    total += std::log(sum) + mx - logits(i, label);
    if (want_grad) {
      dlogits.row(i) = ex / sum;
      dlogits(i, label) -= 1.0;
    }
  }
  const double loss = total / static_cast<double>(n);
  if (!std::isfinite(loss)) throw Error(ErrorKind::kNumeric, "non-finite loss");
  if (!want_grad) return loss;

  dlogits /= static_cast<double>(n);
  Mat dhs;
  linear_bwd(c, R.out, hs, dlogits, &dhs);
  Mat ddec = Mat::Zero(f.dec_out.rows(), cfg.width);
  for (Eigen::Index i = 0; i < n; ++i) ddec.row(rows[static_cast<std::size_t>(i)]) = dhs.row(i);

  // Decoder stack, last layer first.
  Mat dy;
  ln_bwd(c, R.dec_ln, ddec, f.dec_ln, dy);
  Mat denc = Mat::Zero(f.enc_out.rows(), cfg.width);
  for (std::size_t l = R.dec.size(); l-- > 0;) {
    const DecRef& L = R.dec[l];
    const DecCache& k = f.dec[l];
    Mat dh, dtmp, dkv;
    ff_bwd(c, L.ff1, L.ff2, k.h3, dy, k.ff, dh);
    ln_bwd(c, L.ln3, dh, k.ln3, dtmp);
    dy += dtmp;

    Mat da = dy;
    dropout_bwd(da, k.m2);
    attn_bwd(c, L.cross, k.h2, f.enc_out, batch.size, batch.tgt_len, batch.src_len, da,
             k.cross, dh, denc, true);
    ln_bwd(c, L.ln2, dh, k.ln2, dtmp);
    dy += dtmp;

    da = dy;
    dropout_bwd(da, k.m1);
    attn_bwd(c, L.self, k.h1, k.h1, batch.size, batch.tgt_len, batch.tgt_len, da, k.self,
             dh, dkv, false);
    dh += dkv;
    ln_bwd(c, L.ln1, dh, k.ln1, dtmp);
    dy += dtmp;
  }
  embed_bwd(c, batch.dec_in, dy, f.tgt_emb);

  Mat dx;
  ln_bwd(c, R.enc_ln, denc, f.enc_ln, dx);
  for (std::size_t l = R.enc.size(); l-- > 0;) {
    const EncRef& L = R.enc[l];
    const EncCache& k = f.enc[l];
    Mat dh, dtmp, dkv;
    ff_bwd(c, L.ff1, L.ff2, k.h2, dx, k.ff, dh);
    ln_bwd(c, L.ln2, dh, k.ln2, dtmp);
    dx += dtmp;

    Mat da = dx;
    dropout_bwd(da, k.m1);
    attn_bwd(c, L.attn, k.h1, k.h1, batch.size, batch.src_len, batch.src_len, da, k.attn, dh,
             dkv, false);
    dh += dkv;
    ln_bwd(c, L.ln1, dh, k.ln1, dtmp);
    dx += dtmp;
  }
  embed_bwd(c, batch.src, dx, f.src_emb);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += G[i];
  return loss;
}

std::vector<double> Seq2Seq::logits(const Batch& batch) const {
  const FlushDenormals ftz;
  const ModelConfig& cfg = params_.config;
  const ModelRef R = resolve(layout_, cfg);
  const Aligned P(params_.values.begin(), params_.values.end());
  const Ctx c{P.data(), nullptr, R, {}, nullptr};
  const Mat pe = positional_table(std::max({batch.src_len, batch.tgt_len, 1}), cfg.width);
  Forward f;
  encode(c, pe, batch, f);
  decode(c, pe, batch, f);
  const auto rows = labelled_rows(batch);
  Mat hs(static_cast<Eigen::Index>(rows.size()), cfg.width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    hs.row(static_cast<Eigen::Index>(i)) = f.dec_out.row(rows[i]);
  }
  Mat out;
  linear_fwd(c, R.out, hs, out);
  return {out.data(), out.data() + out.size()};
}

namespace {

// Incremental decoder state for a batch of sequences: cached self-attention
// keys/values per layer and projected encoder keys/values for cross
// attention.
class IncrementalDecoder {
 public:
  IncrementalDecoder(const Ctx& c, const ModelConfig& cfg, const Forward& f,
                     const Batch& batch, int max_steps)
      : c_(c),
        cfg_(cfg),
        batch_(batch),
        max_steps_(max_steps),
        pe_(positional_table(max_steps, cfg.width)) {
    const int B = batch.size;
    for (const DecRef& L : c.R.dec) {
      Mat k, v;
      linear_fwd(c, L.cross.k, f.enc_out, k);
      linear_fwd(c, L.cross.v, f.enc_out, v);
      cross_k_.push_back(std::move(k));
      cross_v_.push_back(std::move(v));
      self_k_.push_back(Mat::Zero(static_cast<Eigen::Index>(B) * max_steps, cfg.width));
      self_v_.push_back(Mat::Zero(static_cast<Eigen::Index>(B) * max_steps, cfg.width));
    }
  }

  // Feeds one token per sequence at position `t`; returns B x vocab logits.
  Mat step(const std::vector<int>& tokens, int t) {
    const int B = batch_.size;
    const int d = cfg_.width;
    const int H = cfg_.heads;
    const int dh = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double s = std::sqrt(static_cast<double>(d));
    Mat y(B, d);
    for (int b = 0; b < B; ++b) {
      y.row(b) = CRow(c_.P + c_.R.embed + static_cast<std::size_t>(tokens[static_cast<std::size_t>(b)]) * d, d) * s +
                 pe_.row(t);
    }
    Mat h, q, k, v, ctx(B, d), a;
    for (std::size_t l = 0; l < c_.R.dec.size(); ++l) {
      const DecRef& L = c_.R.dec[l];
      ln_fwd(c_, L.ln1, y, h, nullptr);
      linear_fwd(c_, L.self.q, h, q);
      linear_fwd(c_, L.self.k, h, k);
      linear_fwd(c_, L.self.v, h, v);
      for (int b = 0; b < B; ++b) {
        self_k_[l].row(static_cast<Eigen::Index>(b) * max_steps_ + t) = k.row(b);
        self_v_[l].row(static_cast<Eigen::Index>(b) * max_steps_ + t) = v.row(b);
      }
      for (int b = 0; b < B; ++b) {
        for (int hh = 0; hh < H; ++hh) {
          const auto K = self_k_[l].block(static_cast<Eigen::Index>(b) * max_steps_, hh * dh, t + 1, dh);
          const auto V = self_v_[l].block(static_cast<Eigen::Index>(b) * max_steps_, hh * dh, t + 1, dh);
          Eigen::RowVectorXd sc = q.block(b, hh * dh, 1, dh) * K.transpose();
          sc *= scale;
          sc = (sc.array() - sc.maxCoeff()).exp();
          sc /= sc.sum();
          ctx.block(b, hh * dh, 1, dh).noalias() = sc * V;
        }
      }
      linear_fwd(c_, L.self.o, ctx, a);
      y += a;

      ln_fwd(c_, L.ln2, y, h, nullptr);
      linear_fwd(c_, L.cross.q, h, q);
      const int Ls = batch_.src_len;
      for (int b = 0; b < B; ++b) {
        const int klen = batch_.src_lengths[static_cast<std::size_t>(b)];
        for (int hh = 0; hh < H; ++hh) {
          const auto K = cross_k_[l].block(static_cast<Eigen::Index>(b) * Ls, hh * dh, klen, dh);
          const auto V = cross_v_[l].block(static_cast<Eigen::Index>(b) * Ls, hh * dh, klen, dh);
          Eigen::RowVectorXd sc = q.block(b, hh * dh, 1, dh) * K.transpose();
          sc *= scale;
          sc = (sc.array() - sc.maxCoeff()).exp();
          sc /= sc.sum();
          ctx.block(b, hh * dh, 1, dh).noalias() = sc * V;
        }
      }
      linear_fwd(c_, L.cross.o, ctx, a);
      y += a;

      ln_fwd(c_, L.ln3, y, h, nullptr);
      Mat hidden;
      linear_fwd(c_, L.ff1, h, hidden);
      hidden = hidden.cwiseMax(0.0);
      linear_fwd(c_, L.ff2, hidden, a);
      y += a;
    }
    ln_fwd(c_, c_.R.dec_ln, y, h, nullptr);
    Mat out;
    linear_fwd(c_, c_.R.out, h, out);
    return out;
  }

 private:
  const Ctx& c_;
  const ModelConfig& cfg_;
  const Batch& batch_;
  int max_steps_;
  Mat pe_;
  std::vector<Mat> cross_k_, cross_v_, self_k_, self_v_;
};

}  // namespace

std::vector<std::vector<int>> Seq2Seq::greedy(std::span<const std::vector<int>> encoder_inputs,
                                              int tag, int max_len) const {
  const FlushDenormals ftz;
  const ModelConfig& cfg = params_.config;
  const ModelRef R = resolve(layout_, cfg);
  const Aligned P(params_.values.begin(), params_.values.end());
  const Ctx c{P.data(), nullptr, R, {}, nullptr};
  const int max_out = std::max(0, std::min(max_len, cfg.max_len - 2));
  std::vector<std::vector<int>> results;
  results.reserve(encoder_inputs.size());

  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < encoder_inputs.size(); start += kChunk) {
    const std::size_t end = std::min(encoder_inputs.size(), start + kChunk);
    std::vector<Example> examples;
    for (std::size_t i = start; i < end; ++i) examples.push_back({encoder_inputs[i], tag, {}});
    const Batch batch = make_batch(examples, cfg.max_len);
    const Mat pe = positional_table(std::max(batch.src_len, 1), cfg.width);
    Forward f;
    encode(c, pe, batch, f);

    const int B = batch.size;
    IncrementalDecoder dec(c, cfg, f, batch, max_out + 2);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(B));
    std::vector<bool> done(static_cast<std::size_t>(B), false);
    dec.step(std::vector<int>(static_cast<std::size_t>(B), SubwordModel::kBos), 0);
    std::vector<int> current(static_cast<std::size_t>(B), tag);
    for (int t = 1; t <= max_out; ++t) {
      const Mat logits = dec.step(current, t);
      bool all_done = true;
      for (int b = 0; b < B; ++b) {
        const auto ub = static_cast<std::size_t>(b);
        if (done[ub]) continue;
        // Only content pieces and EOS are valid outputs.
        int best = SubwordModel::kEos;
        double best_score = logits(b, SubwordModel::kEos);
        for (int id = SubwordModel::kNumSpecials; id < cfg.vocab_size; ++id) {
          if (logits(b, id) > best_score) {
            best_score = logits(b, id);
            best = id;
          }
        }
        if (best == SubwordModel::kEos) {
          done[ub] = true;
        } else {
          out[ub].push_back(best);
          all_done = false;
        }
        current[ub] = best;
      }
      if (all_done) break;
    }
    for (auto& o : out) results.push_back(std::move(o));
  }
  return results;
}

std::vector<double> Seq2Seq::incremental_logits(const std::vector<int>& encoder_input, int tag,
                                                const std::vector<int>& forced) const {
  const FlushDenormals ftz;
  const ModelConfig& cfg = params_.config;
  const ModelRef R = resolve(layout_, cfg);
  const Aligned P(params_.values.begin(), params_.values.end());
  const Ctx c{P.data(), nullptr, R, {}, nullptr};
  const std::vector<Example> examples = {{encoder_input, tag, {}}};
  const Batch batch = make_batch(examples, cfg.max_len);
  const Mat pe = positional_table(std::max(batch.src_len, 1), cfg.width);
  Forward f;
  encode(c, pe, batch, f);
  const int steps = static_cast<int>(forced.size()) + 2;
  IncrementalDecoder dec(c, cfg, f, batch, steps);
  std::vector<int> inputs = {SubwordModel::kBos, tag};
  inputs.insert(inputs.end(), forced.begin(), forced.end());
  std::vector<double> out;
  for (int t = 0; t < steps; ++t) {
    const Mat logits = dec.step({inputs[static_cast<std::size_t>(t)]}, t);
    if (t == 0) continue;
    out.insert(out.end(), logits.data(), logits.data() + logits.size());
  }
  return out;
}

}  // namespace domaincraft
