#include "adlgen/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "adlgen/rng.hpp"
#include "json.hpp"

namespace adlgen {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using MapM = Eigen::Map<Mat>;
using MapC = Eigen::Map<const Mat>;

constexpr double kLnEps = 1e-5;

MapC cview(const std::vector<double>& p, const ParamLayout::Entry& e) {
  return MapC(p.data() + e.offset, e.rows, e.cols);
}
MapM mview(std::vector<double>& p, const ParamLayout::Entry& e) {
  return MapM(p.data() + e.offset, e.rows, e.cols);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Numerically stable binary cross-entropy from a logit.
double bce_logit(double z, double y) {
  return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / M_SQRT2)); }
double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x / M_SQRT2)) + x * phi;
}

struct LnStats {
  Mat xhat;
  Vec inv_std;
};

Mat layernorm(const Mat& x, MapC g, MapC b, LnStats* st) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Mat out(n, d);
  if (st) {
    st->xhat.resize(n, d);
    st->inv_std.resize(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    const Eigen::RowVectorXd xhat = ((x.row(i).array() - mu) * inv).matrix();
    out.row(i) =
        (xhat.array() * g.col(0).transpose().array() + b.col(0).transpose().array()).matrix();
    if (st) {
      st->xhat.row(i) = xhat;
      st->inv_std(i) = inv;
    }
  }
  return out;
}

Mat layernorm_backward(const Mat& dy, const LnStats& st, MapC g, MapM dg, MapM db) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  Mat dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd dxhat =
        (dy.row(i).array() * g.col(0).transpose().array()).matrix();
    dg.col(0) += (dy.row(i).array() * st.xhat.row(i).array()).matrix().transpose();
    db.col(0) += dy.row(i).transpose();
    const double m1 = dxhat.mean();
    const double m2 = (dxhat.array() * st.xhat.row(i).array()).mean();
    dx.row(i) =
        ((dxhat.array() - m1 - st.xhat.row(i).array() * m2) * st.inv_std(i)).matrix();
  }
  return dx;
}

struct LayerWork {
  LnStats ln1, ln2;
  Mat a1, q, k, v;
  std::vector<Mat> attn;  // per-head attention weights, L x L
  Mat o;
  Mat a2, h1, gelu_h1;
  Mat drop_attn, drop_ffn;  // inverted-dropout masks; empty when inactive
};

struct ForwardWork {
  Mat cat;  // per-position concat(sensor, sign) rows, pre-projection
  std::vector<int> token_rows, sign_rows, hour_rows, day_rows, dur_rows;
  int activity_row = -1;
  std::vector<LayerWork> layers;
  LnStats lnf;
};

void check_temporal(const TemporalFeature& t) {
  if (t.hour < 0 || t.hour > 23 || t.day < 0 || t.day > 6 || t.duration_bin < 0 ||
      t.duration_bin >= kDurationBins) {
    throw std::out_of_range("model: temporal feature out of range");
  }
}

Mat embed_impl(std::span<const SignedToken> tokens, std::span<const TemporalFeature> temporal,
               const std::string& activity, const ModelWeights& w, ForwardWork* work) {
  const auto& cfg = w.config;
  const auto& L = w.layout();
  const auto n = static_cast<Eigen::Index>(tokens.size());
  if (n < 1) throw std::invalid_argument("embed: empty context");
  if (n > cfg.max_len) throw std::invalid_argument("embed: context longer than max_len");
  if (tokens.size() != temporal.size())
    throw std::invalid_argument("embed: tokens/temporal length mismatch");

  const auto sens = cview(w.params, L.sensor_table);
  const auto sign = cview(w.params, L.sign_table);
  const auto proj = cview(w.params, L.proj);
  const auto pos = cview(w.params, L.pos_table);
  const auto cb = cview(w.params, L.temporal_codebook);
  const auto act = cview(w.params, L.activity_table);
  const double wp = w.omega_p();
  const double wt = w.omega_t();
  const int a_row = w.activity_index(activity);
  const int h = cfg.d_half();

  Mat cat(n, cfg.d_model);
  Mat out(n, cfg.d_model);
  if (work) {
    work->token_rows.resize(static_cast<std::size_t>(n));
    work->sign_rows.resize(static_cast<std::size_t>(n));
    work->hour_rows.resize(static_cast<std::size_t>(n));
    work->day_rows.resize(static_cast<std::size_t>(n));
    work->dur_rows.resize(static_cast<std::size_t>(n));
    work->activity_row = a_row;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const SignedToken t = tokens[static_cast<std::size_t>(i)];
    if (t.value == 0 || t.index() > cfg.vocab_size)
      throw std::out_of_range("embed: token index out of range");
    check_temporal(temporal[static_cast<std::size_t>(i)]);
    const int trow = t.index() - 1;
    const int srow = t.activating() ? 1 : 0;
    cat.row(i).head(h) = sens.row(trow);
    cat.row(i).tail(h) = sign.row(srow);
    const int hr = kHourRow + temporal[static_cast<std::size_t>(i)].hour;
    const int dr = kDayRow + temporal[static_cast<std::size_t>(i)].day;
    const int br = kDurRow + temporal[static_cast<std::size_t>(i)].duration_bin;
    out.row(i) =
        cat.row(i) * proj + wp * pos.row(i) + wt * (cb.row(hr) + cb.row(dr) + cb.row(br));
    if (work) {
      work->token_rows[static_cast<std::size_t>(i)] = trow;
      work->sign_rows[static_cast<std::size_t>(i)] = srow;
      work->hour_rows[static_cast<std::size_t>(i)] = hr;
      work->day_rows[static_cast<std::size_t>(i)] = dr;
      work->dur_rows[static_cast<std::size_t>(i)] = br;
    }
  }
  out.row(0) += act.row(a_row);
  if (work) work->cat = std::move(cat);
  return out;
}

Mat run_forward(std::span<const SignedToken> tokens, std::span<const TemporalFeature> temporal,
                const std::string& activity, const ModelWeights& w, ForwardWork* work,
                Rng* drop_rng = nullptr) {
  const auto& cfg = w.config;
  const auto& L = w.layout();
  Mat x = embed_impl(tokens, temporal, activity, w, work);
  if (work) work->layers.resize(static_cast<std::size_t>(cfg.n_layers));

  const Eigen::Index n = x.rows();
  const int dh = cfg.d_model / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double p_drop = drop_rng ? cfg.dropout : 0.0;
  auto dropout_mask = [&](Eigen::Index rows, Eigen::Index cols) {
    Mat mask(rows, cols);
    const double keep = 1.0 - p_drop;
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r)
        mask(r, c) = drop_rng->uniform01() < p_drop ? 0.0 : 1.0 / keep;
    return mask;
  };

  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& ly = L.layers[static_cast<std::size_t>(l)];
    LayerWork tmp;
    LayerWork& lw = work ? work->layers[static_cast<std::size_t>(l)] : tmp;

    const Mat a1 = layernorm(x, cview(w.params, ly.ln1_g), cview(w.params, ly.ln1_b), &lw.ln1);
    lw.a1 = a1;
    const Mat q =
        (a1 * cview(w.params, ly.wq)).rowwise() + cview(w.params, ly.bq).col(0).transpose();
    const Mat k =
        (a1 * cview(w.params, ly.wk)).rowwise() + cview(w.params, ly.bk).col(0).transpose();
    const Mat v =
        (a1 * cview(w.params, ly.wv)).rowwise() + cview(w.params, ly.bv).col(0).transpose();
    lw.q = q;
    lw.k = k;
    lw.v = v;

    Mat o(n, cfg.d_model);
    lw.attn.assign(static_cast<std::size_t>(cfg.n_heads), Mat());
    for (int hd = 0; hd < cfg.n_heads; ++hd) {
      const auto qh = q.middleCols(hd * dh, dh);
      const auto kh = k.middleCols(hd * dh, dh);
      const auto vh = v.middleCols(hd * dh, dh);
      const Mat scores = qh * kh.transpose() * scale;
      Mat p = Mat::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        // Causal mask: position i attends only to positions <= i.
        const auto row = scores.row(i).head(i + 1);
        const double mx = row.maxCoeff();
        const Eigen::RowVectorXd ex = (row.array() - mx).exp();
        p.row(i).head(i + 1) = ex / ex.sum();
      }
      o.middleCols(hd * dh, dh) = p * vh;
      lw.attn[static_cast<std::size_t>(hd)] = std::move(p);
    }
    lw.o = o;
    Mat attn_branch = (o * cview(w.params, ly.wo)).rowwise() +
                      cview(w.params, ly.bo).col(0).transpose();
    if (p_drop > 0.0) {
      lw.drop_attn = dropout_mask(n, cfg.d_model);
      attn_branch = attn_branch.cwiseProduct(lw.drop_attn);
    }
    x = x + attn_branch;

    const Mat a2 = layernorm(x, cview(w.params, ly.ln2_g), cview(w.params, ly.ln2_b), &lw.ln2);
    lw.a2 = a2;
    const Mat h1 =
        (a2 * cview(w.params, ly.w1)).rowwise() + cview(w.params, ly.b1).col(0).transpose();
    lw.h1 = h1;
    const Mat g = h1.unaryExpr([](double vv) { return gelu(vv); });
    lw.gelu_h1 = g;
    Mat ffn_branch = (g * cview(w.params, ly.w2)).rowwise() +
                     cview(w.params, ly.b2).col(0).transpose();
    if (p_drop > 0.0) {
      lw.drop_ffn = dropout_mask(n, cfg.d_model);
      ffn_branch = ffn_branch.cwiseProduct(lw.drop_ffn);
    }
    x = x + ffn_branch;
  }

  return layernorm(x, cview(w.params, L.lnf_g), cview(w.params, L.lnf_b),
                   work ? &work->lnf : nullptr);
}

HeadOutputs heads_at(const Eigen::RowVectorXd& y, const ModelWeights& w) {
  const auto& L = w.layout();
  HeadOutputs h;
  h.sensor_logits = (y * cview(w.params, L.head_sensor_w)).transpose() +
                    cview(w.params, L.head_sensor_b).col(0);
  h.sign_logit = (y * cview(w.params, L.head_sign_w))(0) + w.params[L.head_sign_b.offset];
  h.duration_logits = (y * cview(w.params, L.head_dur_w)).transpose() +
                      cview(w.params, L.head_dur_b).col(0);
  h.special_logit =
      (y * cview(w.params, L.head_special_w))(0) + w.params[L.head_special_b.offset];
  return h;
}

void run_backward(const Mat& dy_final, const ForwardWork& work, const ModelWeights& w,
                  std::vector<double>& grad) {
  const auto& cfg = w.config;
  const auto& L = w.layout();
  const Eigen::Index n = dy_final.rows();
  const int dh = cfg.d_model / cfg.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat dx = layernorm_backward(dy_final, work.lnf, cview(w.params, L.lnf_g),
                              mview(grad, L.lnf_g), mview(grad, L.lnf_b));

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const auto& ly = L.layers[static_cast<std::size_t>(l)];
    const LayerWork& lw = work.layers[static_cast<std::size_t>(l)];

    // FFN block; dx is the gradient at the block output.
    const Mat dffn = lw.drop_ffn.size() ? dx.cwiseProduct(lw.drop_ffn).eval() : dx;
    mview(grad, ly.b2).col(0) += dffn.colwise().sum().transpose();
    mview(grad, ly.w2) += lw.gelu_h1.transpose() * dffn;
    const Mat dg = dffn * cview(w.params, ly.w2).transpose();
    const Mat dh1 = dg.cwiseProduct(lw.h1.unaryExpr([](double vv) { return gelu_grad(vv); }));
    mview(grad, ly.b1).col(0) += dh1.colwise().sum().transpose();
    mview(grad, ly.w1) += lw.a2.transpose() * dh1;
    const Mat da2 = dh1 * cview(w.params, ly.w1).transpose();
    dx = dx + layernorm_backward(da2, lw.ln2, cview(w.params, ly.ln2_g),
                                 mview(grad, ly.ln2_g), mview(grad, ly.ln2_b));

    // Attention block.
    const Mat dattn = lw.drop_attn.size() ? dx.cwiseProduct(lw.drop_attn).eval() : dx;
    mview(grad, ly.bo).col(0) += dattn.colwise().sum().transpose();
    mview(grad, ly.wo) += lw.o.transpose() * dattn;
    const Mat do_ = dattn * cview(w.params, ly.wo).transpose();

    Mat dq(n, cfg.d_model), dk(n, cfg.d_model), dv(n, cfg.d_model);
    for (int hd = 0; hd < cfg.n_heads; ++hd) {
      const auto qh = lw.q.middleCols(hd * dh, dh);
      const auto kh = lw.k.middleCols(hd * dh, dh);
      const auto vh = lw.v.middleCols(hd * dh, dh);
      const Mat& p = lw.attn[static_cast<std::size_t>(hd)];
      const auto doh = do_.middleCols(hd * dh, dh);
      const Mat dp = doh * vh.transpose();
      dv.middleCols(hd * dh, dh) = p.transpose() * doh;
      Mat ds(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        // Masked columns have p = 0, so their ds vanishes automatically.
        const double dot = dp.row(i).cwiseProduct(p.row(i)).sum();
        ds.row(i) = p.row(i).cwiseProduct(
            (dp.row(i).array() - dot).matrix());
      }
      dq.middleCols(hd * dh, dh) = ds * kh * scale;
      dk.middleCols(hd * dh, dh) = ds.transpose() * qh * scale;
    }
    mview(grad, ly.bq).col(0) += dq.colwise().sum().transpose();
    mview(grad, ly.bk).col(0) += dk.colwise().sum().transpose();
    mview(grad, ly.bv).col(0) += dv.colwise().sum().transpose();
    mview(grad, ly.wq) += lw.a1.transpose() * dq;
    mview(grad, ly.wk) += lw.a1.transpose() * dk;
    mview(grad, ly.wv) += lw.a1.transpose() * dv;
    const Mat da1 = dq * cview(w.params, ly.wq).transpose() +
                    dk * cview(w.params, ly.wk).transpose() +
                    dv * cview(w.params, ly.wv).transpose();
    dx = dx + layernorm_backward(da1, lw.ln1, cview(w.params, ly.ln1_g),
                                 mview(grad, ly.ln1_g), mview(grad, ly.ln1_b));
  }

  // Embedding backward.
  const auto proj = cview(w.params, L.proj);
  const auto pos = cview(w.params, L.pos_table);
  const auto cb = cview(w.params, L.temporal_codebook);
  const double wp = w.omega_p();
  const double wt = w.omega_t();
  auto dsens = mview(grad, L.sensor_table);
  auto dsign = mview(grad, L.sign_table);
  auto dproj = mview(grad, L.proj);
  auto dpos = mview(grad, L.pos_table);
  auto dcb = mview(grad, L.temporal_codebook);
  auto dact = mview(grad, L.activity_table);
  auto domega = mview(grad, L.omega);
  const int h = cfg.d_half();

  dact.row(work.activity_row) += dx.row(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd de = dx.row(i);
    const auto ui = static_cast<std::size_t>(i);
    dpos.row(i) += wp * de;
    domega(0, 0) += pos.row(i).dot(de);
    const Eigen::RowVectorXd tsum =
        cb.row(work.hour_rows[ui]) + cb.row(work.day_rows[ui]) + cb.row(work.dur_rows[ui]);
    domega(1, 0) += tsum.dot(de);
    dcb.row(work.hour_rows[ui]) += wt * de;
    dcb.row(work.day_rows[ui]) += wt * de;
    dcb.row(work.dur_rows[ui]) += wt * de;
    dproj += work.cat.row(i).transpose() * de;
    const Eigen::RowVectorXd dcat = de * proj.transpose();
    dsens.row(work.token_rows[ui]) += dcat.head(h);
    dsign.row(work.sign_rows[ui]) += dcat.tail(h);
  }
}

double cross_entropy_from_logits(const Vec& logits, int target, Vec* dlogits) {
  const double mx = logits.maxCoeff();
  const Vec ex = (logits.array() - mx).exp();
  const double z = ex.sum();
  const double loss_v = std::log(z) - (logits(target) - mx);
  if (dlogits) {
    *dlogits = ex / z;
    (*dlogits)(target) -= 1.0;
  }
  return loss_v;
}

LossBreakdown loss_impl(std::span<const TrainingWindow> batch, const ModelWeights& w,
                        std::vector<double>* grad, Rng* dropout_rng = nullptr) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  std::size_t n_event = 0;
  for (const auto& win : batch)
    if (!win.target_is_end) ++n_event;
  const double w_ev = n_event ? 1.0 / static_cast<double>(n_event) : 0.0;
  const double w_all = 1.0 / static_cast<double>(batch.size());

  LossBreakdown lb;
  for (const auto& win : batch) {
    ForwardWork work;
    const Mat y = run_forward(win.context_tokens, win.context_temporal, win.activity, w,
                              grad ? &work : nullptr, dropout_rng);
    const Eigen::RowVectorXd y_last = y.row(y.rows() - 1);
    const HeadOutputs h = heads_at(y_last, w);

    Vec d_sensor, d_dur;
    double d_sign = 0.0;

    const double y_end = win.target_is_end ? 1.0 : 0.0;
    lb.special += w_all * bce_logit(h.special_logit, y_end);
    const double d_special = w_all * (sigmoid(h.special_logit) - y_end);

    if (!win.target_is_end) {
      const int target = win.target_token.index() - 1;
      if (target < 0 || target >= w.config.vocab_size)
        throw std::out_of_range("loss: target token outside vocabulary");
      Vec ds;
      lb.sensor_id +=
          w_ev * cross_entropy_from_logits(h.sensor_logits, target, grad ? &ds : nullptr);
      if (grad) d_sensor = w_ev * ds;

      const double y_sign = win.target_token.activating() ? 1.0 : 0.0;
      lb.sensor_sign += w_ev * bce_logit(h.sign_logit, y_sign);
      d_sign = w_ev * (sigmoid(h.sign_logit) - y_sign);

      if (win.target_duration_bin < 0 || win.target_duration_bin >= kDurationBins)
        throw std::out_of_range("loss: duration bin out of range");
      Vec dd;
      lb.temp += w_ev * cross_entropy_from_logits(h.duration_logits, win.target_duration_bin,
                                                  grad ? &dd : nullptr);
      if (grad) d_dur = w_ev * dd;
    }

    if (grad) {
      const auto& L = w.layout();
      Eigen::RowVectorXd dy_last = Eigen::RowVectorXd::Zero(w.config.d_model);
      if (!win.target_is_end) {
        mview(*grad, L.head_sensor_w) += y_last.transpose() * d_sensor.transpose();
        mview(*grad, L.head_sensor_b).col(0) += d_sensor;
        dy_last += d_sensor.transpose() * cview(w.params, L.head_sensor_w).transpose();

        mview(*grad, L.head_sign_w).col(0) += d_sign * y_last.transpose();
        (*grad)[L.head_sign_b.offset] += d_sign;
        dy_last += d_sign * cview(w.params, L.head_sign_w).col(0).transpose();

        mview(*grad, L.head_dur_w) += y_last.transpose() * d_dur.transpose();
        mview(*grad, L.head_dur_b).col(0) += d_dur;
        dy_last += d_dur.transpose() * cview(w.params, L.head_dur_w).transpose();
      }
      mview(*grad, L.head_special_w).col(0) += d_special * y_last.transpose();
      (*grad)[L.head_special_b.offset] += d_special;
      dy_last += d_special * cview(w.params, L.head_special_w).col(0).transpose();

      Mat dy = Mat::Zero(y.rows(), y.cols());
      dy.row(y.rows() - 1) = dy_last;
      run_backward(dy, work, w, *grad);
    }
  }
  lb.total = lb.sensor_id + lb.sensor_sign + lb.temp + lb.special;
  return lb;
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model <= 0 || d_model % 2 != 0)
    throw std::invalid_argument("model config: d_model must be positive and even");
  if (n_heads <= 0 || d_model % n_heads != 0)
    throw std::invalid_argument("model config: d_model must divide by n_heads");
  if (n_layers <= 0 || max_len <= 0 || vocab_size <= 0 || n_activities <= 0)
    throw std::invalid_argument("model config: sizes must be positive");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("model config: dropout outside [0,1)");
}

ParamLayout ParamLayout::build(const ModelConfig& cfg) {
  ParamLayout L;
  std::size_t at = 0;
  auto add = [&](int rows, int cols) {
    Entry e{at, rows, cols};
    at += e.size();
    return e;
  };
  const int d = cfg.d_model, h = cfg.d_half(), f = cfg.d_ffn();
  L.sensor_table = add(cfg.vocab_size, h);
  L.sign_table = add(2, h);
  L.proj = add(d, d);
  L.pos_table = add(cfg.max_len, d);
  L.temporal_codebook = add(kTemporalRows, d);
  L.activity_table = add(cfg.n_activities, d);
  L.omega = add(2, 1);
  L.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& ly : L.layers) {
    ly.ln1_g = add(d, 1);
    ly.ln1_b = add(d, 1);
    ly.wq = add(d, d);
    ly.bq = add(d, 1);
    ly.wk = add(d, d);
    ly.bk = add(d, 1);
    ly.wv = add(d, d);
    ly.bv = add(d, 1);
    ly.wo = add(d, d);
    ly.bo = add(d, 1);
    ly.ln2_g = add(d, 1);
    ly.ln2_b = add(d, 1);
    ly.w1 = add(d, f);
    ly.b1 = add(f, 1);
    ly.w2 = add(f, d);
    ly.b2 = add(d, 1);
  }
  L.lnf_g = add(d, 1);
  L.lnf_b = add(d, 1);
  L.head_sensor_w = add(d, cfg.vocab_size);
  L.head_sensor_b = add(cfg.vocab_size, 1);
  L.head_sign_w = add(d, 1);
  L.head_sign_b = add(1, 1);
  L.head_dur_w = add(d, kDurationBins);
  L.head_dur_b = add(kDurationBins, 1);
  L.head_special_w = add(d, 1);
  L.head_special_b = add(1, 1);
  L.total = at;
  return L;
}

void ModelWeights::init(const ModelConfig& cfg, std::vector<std::string> ids,
                        std::vector<std::string> acts) {
  config = cfg;
  config.vocab_size = static_cast<int>(ids.size());
  config.n_activities = static_cast<int>(acts.size());
  config.validate();
  sensor_ids = std::move(ids);
  activities = std::move(acts);
  layout_ = ParamLayout::build(config);
  params.assign(layout_.total, 0.0);
  start_counts.assign(static_cast<std::size_t>(config.n_activities) * 2 *
                          static_cast<std::size_t>(config.vocab_size) * kDurationBins,
                      0.0);

  Rng rng(mix_seed(config.seed, 0x5eedULL));
  auto fill_normal = [&](const ParamLayout::Entry& e) {
    auto m = mview(params, e);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.normal(0.0, 0.02);
  };
  auto fill_ones = [&](const ParamLayout::Entry& e) { mview(params, e).setOnes(); };

  fill_normal(layout_.sensor_table);
  fill_normal(layout_.sign_table);
  fill_normal(layout_.proj);
  fill_normal(layout_.pos_table);
  fill_normal(layout_.temporal_codebook);
  fill_normal(layout_.activity_table);
  mview(params, layout_.omega).setOnes();  // omega_p = omega_t = 1 at start
  for (auto& ly : layout_.layers) {
    fill_ones(ly.ln1_g);
    fill_normal(ly.wq);
    fill_normal(ly.wk);
    fill_normal(ly.wv);
    fill_normal(ly.wo);
    fill_ones(ly.ln2_g);
    fill_normal(ly.w1);
    fill_normal(ly.w2);
  }
  fill_ones(layout_.lnf_g);
  fill_normal(layout_.head_sensor_w);
  fill_normal(layout_.head_sign_w);
  fill_normal(layout_.head_dur_w);
  fill_normal(layout_.head_special_w);
}

int ModelWeights::activity_index(const std::string& label) const {
  const auto it = std::find(activities.begin(), activities.end(), label);
  if (it == activities.end())
    throw std::out_of_range("model: unknown activity label: " + label);
  return static_cast<int>(it - activities.begin());
}

double ModelWeights::omega_p() const { return params[layout_.omega.offset]; }
double ModelWeights::omega_t() const { return params[layout_.omega.offset + 1]; }

Eigen::MatrixXd embed(std::span<const SignedToken> tokens,
                      std::span<const TemporalFeature> temporal, const std::string& activity,
                      const ModelWeights& w) {
  return embed_impl(tokens, temporal, activity, w, nullptr);
}

HeadOutputs forward(const TrainingWindow& window, const ModelWeights& w) {
  const Mat y =
      run_forward(window.context_tokens, window.context_temporal, window.activity, w, nullptr);
  return heads_at(y.row(y.rows() - 1), w);
}

std::vector<HeadOutputs> forward_positions(const TrainingWindow& window,
                                           const ModelWeights& w) {
  const Mat y =
      run_forward(window.context_tokens, window.context_temporal, window.activity, w, nullptr);
  std::vector<HeadOutputs> out;
  out.reserve(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index i = 0; i < y.rows(); ++i) out.push_back(heads_at(y.row(i), w));
  return out;
}

LossBreakdown loss(std::span<const TrainingWindow> batch, const ModelWeights& w) {
  return loss_impl(batch, w, nullptr);
}

LossBreakdown loss_and_grad(std::span<const TrainingWindow> batch, const ModelWeights& w,
                            std::vector<double>& grad) {
  grad.assign(w.layout().total, 0.0);
  return loss_impl(batch, w, &grad);
}

LossBreakdown loss_and_grad_train(std::span<const TrainingWindow> batch, const ModelWeights& w,
                                  std::vector<double>& grad, Rng& dropout_rng) {
  grad.assign(w.layout().total, 0.0);
  return loss_impl(batch, w, &grad, w.config.dropout > 0.0 ? &dropout_rng : nullptr);
}

std::string train_report_csv(const TrainReport& report) {
  std::ostringstream os;
  os << "epoch,total,sensor_id,sensor_sign,temp,special,val_total\n";
  os.precision(10);
  for (const auto& e : report.epochs) {
    os << e.epoch << ',' << e.total << ',' << e.sensor_id << ',' << e.sensor_sign << ','
       << e.temp << ',' << e.special << ',' << e.val_total << '\n';
  }
  return os.str();
}

namespace {

// Weight decay applies to matrices and embedding tables only.
std::vector<std::uint8_t> decay_mask(const ParamLayout& L) {
  std::vector<std::uint8_t> mask(L.total, 0);
  auto on = [&](const ParamLayout::Entry& e) {
    std::fill_n(mask.begin() + static_cast<long>(e.offset), e.size(), 1);
  };
  on(L.sensor_table);
  on(L.sign_table);
  on(L.proj);
  on(L.pos_table);
  on(L.temporal_codebook);
  on(L.activity_table);
  for (const auto& ly : L.layers) {
    on(ly.wq);
    on(ly.wk);
    on(ly.wv);
    on(ly.wo);
    on(ly.w1);
    on(ly.w2);
  }
  on(L.head_sensor_w);
  on(L.head_dur_w);
  on(L.head_sign_w);
  on(L.head_special_w);
  return mask;
}

double one_cycle_lr(std::size_t step, std::size_t total, const TrainConfig& t) {
  const double lo = t.base_lr / t.final_div;
  const auto warm = static_cast<std::size_t>(t.warmup_fraction * static_cast<double>(total));
  if (warm > 0 && step < warm) {
    return lo + (t.base_lr - lo) * static_cast<double>(step + 1) / static_cast<double>(warm);
  }
  const double span = static_cast<double>(total > warm ? total - warm : 1);
  const double progress = static_cast<double>(step - warm) / span;
  return lo + 0.5 * (t.base_lr - lo) * (1.0 + std::cos(M_PI * std::min(progress, 1.0)));
}

}  // namespace

namespace {

std::pair<ModelWeights, TrainReport> train_impl(const std::vector<ActivitySequence>& dataset,
                                                std::vector<std::string> sensor_ids,
                                                const ModelConfig& mcfg,
                                                const TrainConfig& tcfg) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

  std::set<std::string> label_set;
  int max_index = 0;
  for (const auto& s : dataset) {
    label_set.insert(s.label);
    for (const auto& t : s.tokens) max_index = std::max(max_index, t.index());
  }
  if (static_cast<int>(sensor_ids.size()) < max_index)
    throw std::invalid_argument("train: dataset token index exceeds the vocabulary");

  ModelWeights w;
  w.init(mcfg, std::move(sensor_ids),
         std::vector<std::string>(label_set.begin(), label_set.end()));

  // Sequence-level train/validation split, deterministic in the seed.
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(mix_seed(tcfg.seed, 0xf01dULL));
  split_rng.shuffle(order);
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(tcfg.val_fraction * static_cast<double>(dataset.size())));
  if (dataset.size() >= 2 && n_val == 0) n_val = 1;
  if (n_val >= dataset.size()) n_val = dataset.size() - 1;

  std::vector<TrainingWindow> train_windows, val_windows;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto wins = make_training_windows(dataset[order[i]]);
    auto& dst = i < n_val ? val_windows : train_windows;
    dst.insert(dst.end(), std::make_move_iterator(wins.begin()),
               std::make_move_iterator(wins.end()));
  }
  if (train_windows.empty()) throw std::invalid_argument("train: no training windows");
  if (val_windows.empty()) val_windows = train_windows;

  // Class-conditional first-event statistics back the sampler's p(e_1 | a).
  const std::size_t slots = 2 * static_cast<std::size_t>(w.config.vocab_size);
  for (std::size_t i = n_val; i < order.size(); ++i) {
    const auto& seq = dataset[order[i]];
    const auto a = static_cast<std::size_t>(w.activity_index(seq.label));
    const SignedToken t0 = seq.tokens.front();
    const std::size_t slot =
        t0.activating() ? static_cast<std::size_t>(t0.index()) - 1
                        : static_cast<std::size_t>(w.config.vocab_size + t0.index()) - 1;
    const auto bin = static_cast<std::size_t>(seq.temporal.front().duration_bin);
    w.start_counts[(a * slots + slot) * kDurationBins + bin] += 1.0;
  }

  const std::size_t batch = std::max<std::size_t>(1, static_cast<std::size_t>(tcfg.batch_size));
  const std::size_t steps_per_epoch = (train_windows.size() + batch - 1) / batch;
  const std::size_t total_steps =
      steps_per_epoch * static_cast<std::size_t>(std::max(1, tcfg.max_epochs));

  std::vector<double> grad(w.layout().total, 0.0);
  std::vector<double> m(w.layout().total, 0.0), v(w.layout().total, 0.0);
  const auto decay = decay_mask(w.layout());
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  TrainReport report;
  std::vector<double> best_params = w.params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::size_t step = 0;

  Rng shuffle_rng(mix_seed(tcfg.seed, 0x0badULL));
  Rng dropout_rng(mix_seed(tcfg.seed, 0xd409ULL));
  std::vector<std::size_t> idx(train_windows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(idx);
    EpochStats es;
    es.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t pos = 0; pos < idx.size(); pos += batch) {
      const std::size_t take = std::min(batch, idx.size() - pos);
      std::vector<TrainingWindow> chunk;
      chunk.reserve(take);
      for (std::size_t i = 0; i < take; ++i) chunk.push_back(train_windows[idx[pos + i]]);

      const LossBreakdown lb = loss_and_grad_train(chunk, w, grad, dropout_rng);
      if (!std::isfinite(lb.total)) {
        std::ostringstream os;
        os << "train: non-finite loss at epoch " << epoch << " step " << step
           << " (sensor_id=" << lb.sensor_id << " sign=" << lb.sensor_sign
           << " temp=" << lb.temp << " special=" << lb.special
           << "; first window activity=" << chunk.front().activity << ")";
        throw std::runtime_error(os.str());
      }
      es.total += lb.total;
      es.sensor_id += lb.sensor_id;
      es.sensor_sign += lb.sensor_sign;
      es.temp += lb.temp;
      es.special += lb.special;
      ++batches;

      const double lr = one_cycle_lr(step, total_steps, tcfg);
      const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step + 1));
      const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step + 1));
      for (std::size_t i = 0; i < w.params.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
        const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        w.params[i] -= lr * (update + (decay[i] ? tcfg.weight_decay * w.params[i] : 0.0));
      }
      ++step;
    }
    const double inv_b = batches ? 1.0 / static_cast<double>(batches) : 0.0;
    es.total *= inv_b;
    es.sensor_id *= inv_b;
    es.sensor_sign *= inv_b;
    es.temp *= inv_b;
    es.special *= inv_b;

    es.val_total = loss(val_windows, w).total;
    report.epochs.push_back(es);
    report.stopping_epoch = epoch;

    if (es.val_total < best_val - 1e-12) {
      best_val = es.val_total;
      best_epoch = epoch;
      best_params = w.params;
    } else if (epoch - best_epoch >= tcfg.early_stop_patience) {
      break;
    }
  }

  w.params = std::move(best_params);
  report.best_epoch = best_epoch;
  report.best_val = best_val;
  return {std::move(w), std::move(report)};
}

}  // namespace

std::pair<ModelWeights, TrainReport> train(const std::vector<ActivitySequence>& dataset,
                                           const ModelConfig& mcfg, const TrainConfig& tcfg) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(std::max(mcfg.vocab_size, 0)));
  for (int i = 0; i < mcfg.vocab_size; ++i) ids.push_back("idx" + std::to_string(i + 1));
  return train_impl(dataset, std::move(ids), mcfg, tcfg);
}

std::pair<ModelWeights, TrainReport> train(const std::vector<ActivitySequence>& dataset,
                                           const SensorVocabulary& vocab,
                                           const ModelConfig& mcfg, const TrainConfig& tcfg) {
  return train_impl(dataset, vocab.ids(), mcfg, tcfg);
}

namespace {

constexpr char kMagic[9] = "ADLGENCK";
constexpr std::uint32_t kVersion = 1;

nlohmann::json config_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},       {"n_heads", c.n_heads},
          {"n_layers", c.n_layers},     {"max_len", c.max_len},
          {"vocab_size", c.vocab_size}, {"n_activities", c.n_activities},
          {"dropout", c.dropout},       {"seed", c.seed},
          {"ffn_mult", c.ffn_mult}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model");
  c.n_heads = j.at("n_heads");
  c.n_layers = j.at("n_layers");
  c.max_len = j.at("max_len");
  c.vocab_size = j.at("vocab_size");
  c.n_activities = j.at("n_activities");
  c.dropout = j.at("dropout");
  c.seed = j.at("seed");
  c.ffn_mult = j.at("ffn_mult");
  return c;
}

nlohmann::json train_config_json(const TrainConfig& t) {
  return {{"base_lr", t.base_lr},
          {"weight_decay", t.weight_decay},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"early_stop_patience", t.early_stop_patience},
          {"val_fraction", t.val_fraction},
          {"warmup_fraction", t.warmup_fraction},
          {"final_div", t.final_div},
          {"seed", t.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  t.base_lr = j.at("base_lr");
  t.weight_decay = j.at("weight_decay");
  t.batch_size = j.at("batch_size");
  t.max_epochs = j.at("max_epochs");
  t.early_stop_patience = j.at("early_stop_patience");
  t.val_fraction = j.at("val_fraction");
  t.warmup_fraction = j.at("warmup_fraction");
  t.final_div = j.at("final_div");
  t.seed = j.at("seed");
  return t;
}

}  // namespace

void save_checkpoint(const ModelWeights& w, const TrainConfig& tcfg, std::ostream& out) {
  nlohmann::json header = {{"model", config_json(w.config)},
                           {"train", train_config_json(tcfg)},
                           {"sensor_ids", w.sensor_ids},
                           {"activities", w.activities},
                           {"n_params", w.params.size()},
                           {"n_start", w.start_counts.size()}};
  const std::string hs = header.dump();
  const std::uint64_t hlen = hs.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  out.write(reinterpret_cast<const char*>(w.params.data()),
            static_cast<std::streamsize>(w.params.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(w.start_counts.data()),
            static_cast<std::streamsize>(w.start_counts.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

std::pair<ModelWeights, TrainConfig> load_checkpoint(std::istream& in) {
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t hlen = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || std::string_view(magic, 8) != std::string_view(kMagic, 8))
    throw std::runtime_error("checkpoint: bad magic");
  if (version != kVersion)
    throw std::runtime_error("checkpoint: version mismatch (found " +
                             std::to_string(version) + ", expected " +
                             std::to_string(kVersion) + ")");
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(hs);

  ModelWeights w;
  w.init(config_from_json(header.at("model")),
         header.at("sensor_ids").get<std::vector<std::string>>(),
         header.at("activities").get<std::vector<std::string>>());
  const auto n_params = header.at("n_params").get<std::size_t>();
  const auto n_start = header.at("n_start").get<std::size_t>();
  if (n_params != w.params.size() || n_start != w.start_counts.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  in.read(reinterpret_cast<char*>(w.params.data()),
          static_cast<std::streamsize>(n_params * sizeof(double)));
  in.read(reinterpret_cast<char*>(w.start_counts.data()),
          static_cast<std::streamsize>(n_start * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated payload");
  return {std::move(w), train_config_from_json(header.at("train"))};
}

void save_checkpoint_file(const ModelWeights& w, const TrainConfig& tcfg,
                          const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  save_checkpoint(w, tcfg, f);
}

std::pair<ModelWeights, TrainConfig> load_checkpoint_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  return load_checkpoint(f);
}

}  // namespace adlgen
