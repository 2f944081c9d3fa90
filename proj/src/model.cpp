#include "stv/model.hpp"

#include "stv/io.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <numbers>

namespace stv {

namespace {

std::atomic<std::uint64_t> g_forward_passes{0};

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

// y = (x - mu)/sqrt(var+eps) * g + b, per row of width d.
void layer_norm_rows(const Tensor& x, const Tensor& g, const Tensor& b, Tensor& out) {
    const std::size_t d = x.cols();
    out = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double* v = out.data.data() + i * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += v[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = v[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t j = 0; j < d; ++j)
            v[j] = (v[j] - mean) * inv * g.data[j] + b.data[j];
    }
}

// Backward of layer_norm_rows. Accumulates into dg/db, returns dx.
Tensor layer_norm_backward(const Tensor& x, const Tensor& g, const Tensor& dy, Tensor& dg,
                           Tensor& db) {
    const std::size_t d = x.cols();
    Tensor dx({x.rows(), d});
    std::vector<double> xhat(d), u(d);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.data.data() + i * d;
        const double* dyi = dy.data.data() + i * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += xi[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = xi[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        double u_mean = 0.0, ux_mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            xhat[j] = (xi[j] - mean) * inv;
            u[j] = g.data[j] * dyi[j];
            u_mean += u[j];
            ux_mean += u[j] * xhat[j];
            dg.data[j] += dyi[j] * xhat[j];
            db.data[j] += dyi[j];
        }
        u_mean /= static_cast<double>(d);
        ux_mean /= static_cast<double>(d);
        double* dxi = dx.data.data() + i * d;
        for (std::size_t j = 0; j < d; ++j)
            dxi[j] = (u[j] - u_mean - xhat[j] * ux_mean) * inv;
    }
    return dx;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y = matmul(x, w);
    const std::size_t n = y.cols();
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) y.at(i, j) += b.data[j];
    return y;
}

void colsum_into(const Tensor& x, Tensor& acc) {
    const std::size_t n = x.cols();
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) acc.data[j] += x.at(i, j);
}

struct LayerCache {
    Tensor x_in;             // block input
    Tensor n1;               // ln1 output
    Tensor q, k, v;          // [T x d]
    std::vector<Tensor> att; // per head [T x T]
    Tensor z;                // per-head attention outputs, concatenated [T x d]
    Tensor x_mid;            // after attention residual
    Tensor n2;               // ln2 output
    Tensor h_pre, h_act;     // [T x 4d]
};

struct ForwardCache {
    Tensor x0;
    std::vector<LayerCache> layers;
    Tensor x_final;  // input of the final layer norm
    Tensor xf;       // final layer norm output
    Tensor logits;
};

// Full forward pass with optional taps; fills the cache when given.
ForwardTrace run_forward(const Parameters& p, const std::vector<int>& tokens, const TapSet& taps,
                         ForwardCache* cache) {
    const ModelConfig& cfg = p.config;
    const std::size_t T = tokens.size();
    const std::size_t d = cfg.d_model;
    const std::size_t dh = cfg.d_head();
    if (T == 0) throw dim_error("forward: empty token sequence");
    if (T > cfg.max_seq_len) throw dim_error("forward: sequence longer than max_seq_len");
    for (int t : tokens)
        if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size)
            throw dim_error("forward: token id outside vocabulary");
    for (const auto& pt : taps.patches) {
        if (pt.loc.layer >= cfg.n_layers || pt.loc.head >= cfg.n_heads)
            throw dim_error("forward: patch location out of range");
        if (pt.vec.numel() != dh) throw dim_error("forward: patch vector must have d_head entries");
        for (const auto& c : taps.capture)
            if (c == pt.loc) throw dim_error("forward: capture and patch sets must be disjoint");
    }
    g_forward_passes.fetch_add(1, std::memory_order_relaxed);

    const std::size_t read_pos =
        taps.capture_pos < 0 ? T - 1 : static_cast<std::size_t>(taps.capture_pos);
    if (read_pos >= T) throw dim_error("forward: capture position out of range");

    Tensor x({T, d});
    for (std::size_t t = 0; t < T; ++t) {
        const double* te = p.tok_emb.data.data() + static_cast<std::size_t>(tokens[t]) * d;
        const double* pe = p.pos_emb.data.data() + t * d;
        double* xt = x.data.data() + t * d;
        for (std::size_t j = 0; j < d; ++j) xt[j] = te[j] + pe[j];
    }
    if (cache) cache->x0 = x;

    ForwardTrace trace;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const LayerParams& lp = p.layers[l];
        LayerCache lc;
        if (cache) lc.x_in = x;

        Tensor n1;
        layer_norm_rows(x, lp.ln1_g, lp.ln1_b, n1);
        Tensor q = linear(n1, lp.wq, lp.bq);
        Tensor k = linear(n1, lp.wk, lp.bk);
        Tensor v = linear(n1, lp.wv, lp.bv);

        Tensor z({T, d});
        std::vector<Tensor> att_cache;
        if (cache) att_cache.resize(cfg.n_heads);
        std::vector<double> scores(T);
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            const std::size_t off = h * dh;
            Tensor att({T, T});
            for (std::size_t i = 0; i < T; ++i) {
                const double* qi = q.data.data() + i * d + off;
                for (std::size_t j = 0; j <= i; ++j) {
                    const double* kj = k.data.data() + j * d + off;
                    double s = 0.0;
                    for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
                    scores[j] = s * scale;
                }
                softmax_inplace(scores.data(), i + 1);
                double* ai = att.data.data() + i * T;
                for (std::size_t j = 0; j <= i; ++j) ai[j] = scores[j];
                // att rows beyond i stay zero (causal mask)
                double* zi = z.data.data() + i * d + off;
                for (std::size_t j = 0; j <= i; ++j) {
                    const double* vj = v.data.data() + j * d + off;
                    const double a = ai[j];
                    for (std::size_t c = 0; c < dh; ++c) zi[c] += a * vj[c];
                }
            }
            if (cache) att_cache[h] = std::move(att);
        }

        for (const auto& pt : taps.patches) {
            if (pt.loc.layer != l) continue;
            const std::size_t off = pt.loc.head * dh;
            for (std::size_t pos = pt.from_pos; pos < T; ++pos)
                std::memcpy(z.data.data() + pos * d + off, pt.vec.data.data(),
                            dh * sizeof(double));
        }
        for (const auto& c : taps.capture) {
            if (c.layer != l) continue;
            if (c.head >= cfg.n_heads) throw dim_error("forward: capture head out of range");
            Tensor a({dh});
            std::memcpy(a.data.data(), z.data.data() + read_pos * d + c.head * dh,
                        dh * sizeof(double));
            trace.captured.emplace(c, std::move(a));
        }

        Tensor attn_out = linear(z, lp.wo, lp.bo);
        add_inplace(x, attn_out);
        if (cache) {
            lc.n1 = std::move(n1);
            lc.q = std::move(q);
            lc.k = std::move(k);
            lc.v = std::move(v);
            lc.att = std::move(att_cache);
            lc.z = std::move(z);
            lc.x_mid = x;
        }

        Tensor n2;
        layer_norm_rows(x, lp.ln2_g, lp.ln2_b, n2);
        Tensor h_pre = linear(n2, lp.w1, lp.b1);
        Tensor h_act = h_pre;
        for (double& hv : h_act.data) hv = gelu(hv);
        Tensor mlp = linear(h_act, lp.w2, lp.b2);
        add_inplace(x, mlp);
        if (cache) {
            lc.n2 = std::move(n2);
            lc.h_pre = std::move(h_pre);
            lc.h_act = std::move(h_act);
            cache->layers.push_back(std::move(lc));
        }
    }

    if (cache) cache->x_final = x;
    Tensor xf;
    layer_norm_rows(x, p.lnf_g, p.lnf_b, xf);
    trace.logits = matmul(xf, p.unembed);
    if (cache) {
        cache->xf = std::move(xf);
        cache->logits = trace.logits;
    }
    return trace;
}

void init_tensor(Tensor& t, std::initializer_list<std::size_t> shape, RngState& rng, double std) {
    t = Tensor(shape);
    if (std > 0.0)
        for (double& v : t.data) v = rng.normal() * std;
}

}  // namespace

void ModelConfig::validate() const {
    if (n_layers == 0 || n_heads == 0 || d_model == 0 || vocab_size == 0 || max_seq_len == 0)
        throw dim_error("ModelConfig: zero-sized field");
    if (d_model % n_heads != 0) throw dim_error("ModelConfig: d_model must be divisible by n_heads");
}

Parameters Parameters::init(const ModelConfig& cfg, RngState& rng) {
    cfg.validate();
    Parameters p;
    p.config = cfg;
    const std::size_t d = cfg.d_model;
    const double std_emb = 0.02;
    const double std_proj = 0.02;
    // residual-branch output projections scaled down with depth
    const double std_resid = 0.02 / std::sqrt(2.0 * static_cast<double>(cfg.n_layers));
    init_tensor(p.tok_emb, {cfg.vocab_size, d}, rng, std_emb);
    init_tensor(p.pos_emb, {cfg.max_seq_len, d}, rng, std_emb);
    p.layers.resize(cfg.n_layers);
    for (auto& lp : p.layers) {
        lp.ln1_g = Tensor::full({d}, 1.0);
        lp.ln1_b = Tensor({d});
        init_tensor(lp.wq, {d, d}, rng, std_proj);
        lp.bq = Tensor({d});
        init_tensor(lp.wk, {d, d}, rng, std_proj);
        lp.bk = Tensor({d});
        init_tensor(lp.wv, {d, d}, rng, std_proj);
        lp.bv = Tensor({d});
        init_tensor(lp.wo, {d, d}, rng, std_resid);
        lp.bo = Tensor({d});
        lp.ln2_g = Tensor::full({d}, 1.0);
        lp.ln2_b = Tensor({d});
        init_tensor(lp.w1, {d, 4 * d}, rng, std_proj);
        lp.b1 = Tensor({4 * d});
        init_tensor(lp.w2, {4 * d, d}, rng, std_resid);
        lp.b2 = Tensor({d});
    }
    p.lnf_g = Tensor::full({d}, 1.0);
    p.lnf_b = Tensor({d});
    init_tensor(p.unembed, {d, cfg.vocab_size}, rng, std_proj);
    return p;
}

Parameters Parameters::zeros_like(const Parameters& src) {
    Parameters p = src;
    p.visit([](const std::string&, Tensor& t) { t.data.assign(t.data.size(), 0.0); });
    return p;
}

bool Parameters::all_finite() const {
    bool ok = true;
    visit([&](const std::string&, const Tensor& t) { ok = ok && t.all_finite(); });
    return ok;
}

ForwardTrace forward(const Parameters& params, const std::vector<int>& tokens, const TapSet& taps) {
    return run_forward(params, tokens, taps, nullptr);
}

std::uint64_t forward_pass_count() { return g_forward_passes.load(std::memory_order_relaxed); }
void reset_forward_pass_count() { g_forward_passes.store(0, std::memory_order_relaxed); }

double loss(const ForwardTrace& trace, const std::vector<std::size_t>& emit_positions,
            const std::vector<int>& targets) {
    if (emit_positions.empty() || emit_positions.size() != targets.size())
        throw dim_error("loss: empty or mismatched answer span");
    const std::size_t V = trace.logits.cols();
    double total = 0.0;
    std::vector<double> row(V);
    for (std::size_t i = 0; i < emit_positions.size(); ++i) {
        const std::size_t pos = emit_positions[i];
        if (pos >= trace.logits.rows()) throw dim_error("loss: emit position out of range");
        const double* lg = trace.logits.data.data() + pos * V;
        double mx = lg[0];
        for (std::size_t j = 1; j < V; ++j) mx = std::max(mx, lg[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < V; ++j) sum += std::exp(lg[j] - mx);
        total += -(lg[static_cast<std::size_t>(targets[i])] - mx - std::log(sum));
    }
    return total / static_cast<double>(emit_positions.size());
}

BackwardResult backward(const Parameters& p, const std::vector<int>& tokens,
                        const std::vector<std::size_t>& emit_positions,
                        const std::vector<int>& targets) {
    ForwardCache cache;
    run_forward(p, tokens, {}, &cache);
    ForwardTrace trace;
    trace.logits = cache.logits;

    BackwardResult out;
    out.loss = loss(trace, emit_positions, targets);
    out.grads = Parameters::zeros_like(p);
    Parameters& g = out.grads;

    const ModelConfig& cfg = p.config;
    const std::size_t T = tokens.size();
    const std::size_t d = cfg.d_model;
    const std::size_t dh = cfg.d_head();
    const std::size_t V = cfg.vocab_size;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double inv_n = 1.0 / static_cast<double>(emit_positions.size());

    // dL/dlogits: (softmax - onehot)/n at emitting rows, zero elsewhere
    Tensor dlogits({T, V});
    for (std::size_t i = 0; i < emit_positions.size(); ++i) {
        const std::size_t pos = emit_positions[i];
        const double* lg = cache.logits.data.data() + pos * V;
        double* dl = dlogits.data.data() + pos * V;
        double mx = lg[0];
        for (std::size_t j = 1; j < V; ++j) mx = std::max(mx, lg[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < V; ++j) sum += std::exp(lg[j] - mx);
        for (std::size_t j = 0; j < V; ++j) dl[j] += std::exp(lg[j] - mx) / sum * inv_n;
        dl[static_cast<std::size_t>(targets[i])] -= inv_n;
    }

    Tensor dunembed = matmul_tn(cache.xf, dlogits);
    add_inplace(g.unembed, dunembed);
    Tensor dxf = matmul_nt(dlogits, p.unembed);
    Tensor dx = layer_norm_backward(cache.x_final, p.lnf_g, dxf, g.lnf_g, g.lnf_b);

    for (std::size_t l = cfg.n_layers; l-- > 0;) {
        const LayerParams& lp = p.layers[l];
        LayerParams& gl = g.layers[l];
        const LayerCache& lc = cache.layers[l];

        // MLP branch
        Tensor dmlp = dx;
        Tensor dhact = matmul_nt(dmlp, lp.w2);
        Tensor dw2 = matmul_tn(lc.h_act, dmlp);
        add_inplace(gl.w2, dw2);
        colsum_into(dmlp, gl.b2);
        Tensor dhpre = dhact;
        for (std::size_t i = 0; i < dhpre.data.size(); ++i)
            dhpre.data[i] *= gelu_grad(lc.h_pre.data[i]);
        Tensor dn2 = matmul_nt(dhpre, lp.w1);
        Tensor dw1 = matmul_tn(lc.n2, dhpre);
        add_inplace(gl.w1, dw1);
        colsum_into(dhpre, gl.b1);
        Tensor dx_mid = layer_norm_backward(lc.x_mid, lp.ln2_g, dn2, gl.ln2_g, gl.ln2_b);
        add_inplace(dx, dx_mid);

        // attention branch
        Tensor dz = matmul_nt(dx, lp.wo);
        Tensor dwo = matmul_tn(lc.z, dx);
        add_inplace(gl.wo, dwo);
        colsum_into(dx, gl.bo);

        Tensor dq({T, d}), dk({T, d}), dv({T, d});
        std::vector<double> datt_row(T), ds_row(T);
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            const std::size_t off = h * dh;
            const Tensor& att = lc.att[h];
            for (std::size_t i = 0; i < T; ++i) {
                const double* dzi = dz.data.data() + i * d + off;
                const double* ai = att.data.data() + i * T;
                // datt[i,j] = dz_i . v_j ; dv_j += att[i,j] * dz_i
                double dot = 0.0;
                for (std::size_t j = 0; j <= i; ++j) {
                    const double* vj = lc.v.data.data() + j * d + off;
                    double s = 0.0;
                    for (std::size_t c = 0; c < dh; ++c) s += dzi[c] * vj[c];
                    datt_row[j] = s;
                    dot += s * ai[j];
                    double* dvj = dv.data.data() + j * d + off;
                    const double a = ai[j];
                    for (std::size_t c = 0; c < dh; ++c) dvj[c] += a * dzi[c];
                }
                // softmax backward, then scores -> q, k
                const double* qi = lc.q.data.data() + i * d + off;
                double* dqi = dq.data.data() + i * d + off;
                for (std::size_t j = 0; j <= i; ++j) {
                    ds_row[j] = ai[j] * (datt_row[j] - dot) * scale;
                    const double* kj = lc.k.data.data() + j * d + off;
                    double* dkj = dk.data.data() + j * d + off;
                    const double dsj = ds_row[j];
                    for (std::size_t c = 0; c < dh; ++c) {
                        dqi[c] += dsj * kj[c];
                        dkj[c] += dsj * qi[c];
                    }
                }
            }
        }

        Tensor dn1 = matmul_nt(dq, lp.wq);
        { Tensor t = matmul_nt(dk, lp.wk); add_inplace(dn1, t); }
        { Tensor t = matmul_nt(dv, lp.wv); add_inplace(dn1, t); }
        { Tensor t = matmul_tn(lc.n1, dq); add_inplace(gl.wq, t); }
        { Tensor t = matmul_tn(lc.n1, dk); add_inplace(gl.wk, t); }
        { Tensor t = matmul_tn(lc.n1, dv); add_inplace(gl.wv, t); }
        colsum_into(dq, gl.bq);
        colsum_into(dk, gl.bk);
        colsum_into(dv, gl.bv);
        Tensor dx_in = layer_norm_backward(lc.x_in, lp.ln1_g, dn1, gl.ln1_g, gl.ln1_b);
        add_inplace(dx, dx_in);
    }

    for (std::size_t t = 0; t < T; ++t) {
        const double* dxt = dx.data.data() + t * d;
        double* dte = g.tok_emb.data.data() + static_cast<std::size_t>(tokens[t]) * d;
        double* dpe = g.pos_emb.data.data() + t * d;
        for (std::size_t j = 0; j < d; ++j) {
            dte[j] += dxt[j];
            dpe[j] += dxt[j];
        }
    }
    return out;
}

AdamState AdamState::init(const Parameters& p) {
    AdamState s;
    s.m = Parameters::zeros_like(p);
    s.v = Parameters::zeros_like(p);
    s.step = 0;
    return s;
}

void adam_step(Parameters& params, const Parameters& grads, AdamState& state,
               const AdamConfig& cfg) {
    state.step += 1;
    const double warm = cfg.warmup_steps == 0
                            ? 1.0
                            : std::min(1.0, static_cast<double>(state.step) /
                                                static_cast<double>(cfg.warmup_steps));
    const double lr = cfg.lr * warm;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    std::vector<Tensor*> ps, ms, vs;
    std::vector<const Tensor*> gs;
    params.visit([&](const std::string&, Tensor& t) { ps.push_back(&t); });
    grads.visit([&](const std::string&, const Tensor& t) { gs.push_back(&t); });
    state.m.visit([&](const std::string&, Tensor& t) { ms.push_back(&t); });
    state.v.visit([&](const std::string&, Tensor& t) { vs.push_back(&t); });
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Tensor& pt = *ps[i];
        const Tensor& gt = *gs[i];
        Tensor& mt = *ms[i];
        Tensor& vt = *vs[i];
        for (std::size_t j = 0; j < pt.data.size(); ++j) {
            mt.data[j] = cfg.beta1 * mt.data[j] + (1.0 - cfg.beta1) * gt.data[j];
            vt.data[j] = cfg.beta2 * vt.data[j] + (1.0 - cfg.beta2) * gt.data[j] * gt.data[j];
            const double mhat = mt.data[j] / bc1;
            const double vhat = vt.data[j] / bc2;
            pt.data[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

TrainResult train(Parameters params, const BatchProvider& provider, const TrainConfig& cfg,
                  RngState rng, const std::function<void(std::size_t, double)>& on_log) {
    TrainResult result;
    AdamState adam = AdamState::init(params);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const std::vector<TrainSequence> batch = provider(step, rng);
        if (batch.empty()) throw dim_error("train: empty batch");
        Parameters grads = Parameters::zeros_like(params);
        double batch_loss = 0.0;
        for (const TrainSequence& seq : batch) {
            BackwardResult br = backward(params, seq.tokens, seq.emit_positions, seq.targets);
            batch_loss += br.loss;
            Parameters& bg = br.grads;
            std::vector<const Tensor*> src;
            bg.visit([&](const std::string&, const Tensor& t) { src.push_back(&t); });
            std::size_t idx = 0;
            grads.visit([&](const std::string&, Tensor& t) {
                const Tensor& s = *src[idx++];
                for (std::size_t j = 0; j < t.data.size(); ++j) t.data[j] += s.data[j];
            });
        }
        batch_loss /= static_cast<double>(batch.size());
        const double inv = 1.0 / static_cast<double>(batch.size());
        grads.visit([&](const std::string&, Tensor& t) {
            for (double& v : t.data) v *= inv;
        });
        if (!std::isfinite(batch_loss))
            throw numeric_error("train: loss diverged (non-finite) at step " +
                                std::to_string(step));
        adam_step(params, grads, adam, cfg.adam);
        result.loss_curve.push_back(batch_loss);
        if (on_log && cfg.log_every > 0 && (step + 1) % cfg.log_every == 0)
            on_log(step + 1, batch_loss);
    }
    result.params = std::move(params);
    return result;
}

void save_checkpoint(const Parameters& params, const std::filesystem::path& path) {
    nlohmann::json manifest;
    manifest["kind"] = "checkpoint";
    manifest["version"] = 1;
    manifest["config"] = {{"n_layers", params.config.n_layers},
                          {"n_heads", params.config.n_heads},
                          {"d_model", params.config.d_model},
                          {"vocab_size", params.config.vocab_size},
                          {"max_seq_len", params.config.max_seq_len}};
    std::vector<double> payload;
    nlohmann::json tensors = nlohmann::json::array();
    params.visit([&](const std::string& name, const Tensor& t) {
        tensors.push_back({{"name", name}, {"shape", t.shape}, {"offset", payload.size()}});
        payload.insert(payload.end(), t.data.begin(), t.data.end());
    });
    manifest["tensors"] = tensors;
    write_payload_file(path, manifest, payload);
}

Parameters load_checkpoint(const std::filesystem::path& path) {
    PayloadFile f = read_payload_file(path);
    if (f.manifest.value("kind", "") != "checkpoint" || f.manifest.value("version", 0) != 1)
        throw io_error("not a version-1 checkpoint: " + path.string());
    ModelConfig cfg;
    const auto& jc = f.manifest.at("config");
    cfg.n_layers = jc.at("n_layers").get<std::size_t>();
    cfg.n_heads = jc.at("n_heads").get<std::size_t>();
    cfg.d_model = jc.at("d_model").get<std::size_t>();
    cfg.vocab_size = jc.at("vocab_size").get<std::size_t>();
    cfg.max_seq_len = jc.at("max_seq_len").get<std::size_t>();
    RngState dummy(0);
    Parameters p = Parameters::init(cfg, dummy);
    std::size_t idx = 0;
    const auto& tensors = f.manifest.at("tensors");
    p.visit([&](const std::string& name, Tensor& t) {
        if (idx >= tensors.size()) throw io_error("checkpoint tensor list too short");
        const auto& jt = tensors[idx++];
        if (jt.at("name").get<std::string>() != name)
            throw io_error("checkpoint tensor order mismatch at " + name);
        const auto shape = jt.at("shape").get<std::vector<std::size_t>>();
        if (shape != t.shape)
            throw io_error("checkpoint shape mismatch for " + name);
        const std::size_t off = jt.at("offset").get<std::size_t>();
        if (off + t.data.size() > f.payload.size()) throw io_error("checkpoint payload too short");
        std::copy(f.payload.begin() + static_cast<std::ptrdiff_t>(off),
                  f.payload.begin() + static_cast<std::ptrdiff_t>(off + t.data.size()),
                  t.data.begin());
    });
    return p;
}

}  // namespace stv
