#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/dynamics.hpp"
#include "core/simcore.hpp"

namespace zsim::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct ModelConfig {
    int latent = 128;
    int heads = 2;
    int trunk_blocks = 2;
    int value_embed = 32;
    sim::ObsSpec obs;
    int n_accel = 7;
    int n_steer = 5;

    void validate() const {
        if (latent <= 0 || heads <= 0 || latent % heads != 0) {
            fail(ErrorKind::config, "model: latent must be a positive multiple of heads");
        }
        if (trunk_blocks <= 0) fail(ErrorKind::config, "model: trunk_blocks must be > 0");
        if (value_embed <= 0) fail(ErrorKind::config, "model: value_embed must be > 0");
        if (n_accel <= 0 || n_steer <= 0) fail(ErrorKind::config, "model: head sizes must be > 0");
    }

    std::string dump() const {
        std::string s;
        s += "latent = " + std::to_string(latent) + "\n";
        s += "heads = " + std::to_string(heads) + "\n";
        s += "trunk_blocks = " + std::to_string(trunk_blocks) + "\n";
        s += "value_embed = " + std::to_string(value_embed) + "\n";
        s += "n_agents = " + std::to_string(obs.n_agents) + "\n";
        s += "n_road = " + std::to_string(obs.n_road) + "\n";
        s += "n_route = " + std::to_string(obs.n_route) + "\n";
        s += "n_accel = " + std::to_string(n_accel) + "\n";
        s += "n_steer = " + std::to_string(n_steer) + "\n";
        return s;
    }
    uint64_t hash() const { return fnv1a(dump()); }

    bool operator==(const ModelConfig&) const = default;
};

// fixed input normalization, folded into the embeddings
inline constexpr std::array<float, sim::ObsSpec::active_feat> kActiveScale = {0.1f, 1.8f, 0.02f, 1.f, 1.f,
                                                                              1.f,  1.f,  0.02f, 0.1f};
inline constexpr std::array<float, sim::ObsSpec::agent_feat> kAgentScale = {0.02f, 0.02f, 0.32f,
                                                                            0.1f,  0.02f, 1.f};
inline constexpr std::array<float, sim::ObsSpec::road_feat> kRoadScale = {0.02f, 0.02f, 1.f, 1.f, 1.f, 1.f,
                                                                          1.f,   1.f,   1.f, 1.f, 1.f, 1.f};
inline constexpr std::array<float, sim::ObsSpec::route_feat> kRouteScale = {0.02f, 0.02f, 1.f, 1.f, 1.f};
inline constexpr std::array<float, sim::ObsSpec::value_feat> kValueScale = {0.02f, 0.01f};

// --- flat parameter store ----------------------------------------------------

struct ParamEntry {
    std::string name;
    int64_t offset = 0;
    int rows = 0;
    int cols = 0;
    bool is_weight = false;  // weights get fan-in init, the rest are 0/1
    float init_value = 0.f;  // for non-weights (layer-norm gain = 1)
};

struct AttnHandles {
    int ln_g, ln_b, wq, bq, wk, bk, wv, bv, wo, bo;
};

struct BlockHandles {
    int ln_g, ln_b, w1, b1, w2, b2;
};

struct ParamIndex {
    std::vector<ParamEntry> entries;
    int64_t total = 0;

    int emb_agents_w, emb_agents_b, emb_road_w, emb_road_b, emb_route_w, emb_route_b, emb_active_w,
        emb_active_b;
    int null_agents, null_road, null_route, null_active;
    AttnHandles self_attn, cross_road, cross_route, cross_active;
    std::vector<BlockHandles> policy_blocks, value_blocks;
    int policy_accel_w, policy_accel_b, policy_steer_w, policy_steer_b;
    int value_emb_w, value_emb_b, value_in_w, value_in_b, value_head_w, value_head_b;

    static ParamIndex build(const ModelConfig& cfg);
};

inline ParamIndex ParamIndex::build(const ModelConfig& cfg) {
    cfg.validate();
    ParamIndex ix;
    auto add = [&](const std::string& name, int rows, int cols, bool is_weight, float init = 0.f) {
        ix.entries.push_back({name, ix.total, rows, cols, is_weight, init});
        ix.total += int64_t(rows) * cols;
        return int(ix.entries.size()) - 1;
    };
    int d = cfg.latent;
    auto add_attn = [&](const std::string& p) {
        AttnHandles h;
        h.ln_g = add(p + ".ln.g", d, 1, false, 1.f);
        h.ln_b = add(p + ".ln.b", d, 1, false, 0.f);
        h.wq = add(p + ".wq", d, d, true);
        h.bq = add(p + ".bq", d, 1, false);
        h.wk = add(p + ".wk", d, d, true);
        h.bk = add(p + ".bk", d, 1, false);
        h.wv = add(p + ".wv", d, d, true);
        h.bv = add(p + ".bv", d, 1, false);
        h.wo = add(p + ".wo", d, d, true);
        h.bo = add(p + ".bo", d, 1, false);
        return h;
    };
    auto add_block = [&](const std::string& p, int width) {
        BlockHandles h;
        h.ln_g = add(p + ".ln.g", width, 1, false, 1.f);
        h.ln_b = add(p + ".ln.b", width, 1, false, 0.f);
        h.w1 = add(p + ".w1", width, width, true);
        h.b1 = add(p + ".b1", width, 1, false);
        h.w2 = add(p + ".w2", width, width, true);
        h.b2 = add(p + ".b2", width, 1, false);
        return h;
    };

    ix.emb_agents_w = add("emb.agents.w", d, sim::ObsSpec::agent_feat, true);
    ix.emb_agents_b = add("emb.agents.b", d, 1, false);
    ix.emb_road_w = add("emb.road.w", d, sim::ObsSpec::road_feat, true);
    ix.emb_road_b = add("emb.road.b", d, 1, false);
    ix.emb_route_w = add("emb.route.w", d, sim::ObsSpec::route_feat, true);
    ix.emb_route_b = add("emb.route.b", d, 1, false);
    ix.emb_active_w = add("emb.active.w", d, sim::ObsSpec::active_feat, true);
    ix.emb_active_b = add("emb.active.b", d, 1, false);
    ix.null_agents = add("null.agents", d, 1, true);
    ix.null_road = add("null.road", d, 1, true);
    ix.null_route = add("null.route", d, 1, true);
    ix.null_active = add("null.active", d, 1, true);
    ix.self_attn = add_attn("enc.self");
    ix.cross_road = add_attn("enc.cross.road");
    ix.cross_route = add_attn("enc.cross.route");
    ix.cross_active = add_attn("enc.cross.active");
    for (int i = 0; i < cfg.trunk_blocks; ++i) {
        ix.policy_blocks.push_back(add_block("policy.block" + std::to_string(i), d));
    }
    ix.policy_accel_w = add("policy.accel.w", cfg.n_accel, d, true);
    ix.policy_accel_b = add("policy.accel.b", cfg.n_accel, 1, false);
    ix.policy_steer_w = add("policy.steer.w", cfg.n_steer, d, true);
    ix.policy_steer_b = add("policy.steer.b", cfg.n_steer, 1, false);
    ix.value_emb_w = add("value.emb.w", cfg.value_embed, sim::ObsSpec::value_feat, true);
    ix.value_emb_b = add("value.emb.b", cfg.value_embed, 1, false);
    ix.value_in_w = add("value.in.w", d, d + cfg.value_embed, true);
    ix.value_in_b = add("value.in.b", d, 1, false);
    for (int i = 0; i < cfg.trunk_blocks; ++i) {
        ix.value_blocks.push_back(add_block("value.block" + std::to_string(i), d));
    }
    ix.value_head_w = add("value.head.w", 1, d, true);
    ix.value_head_b = add("value.head.b", 1, 1, false);
    return ix;
}

template <class T>
struct Model {
    ModelConfig cfg;
    ParamIndex index;
    std::vector<T> params;

    static Model make(const ModelConfig& cfg) {
        Model m;
        m.cfg = cfg;
        m.index = ParamIndex::build(cfg);
        m.params.assign(size_t(m.index.total), T(0));
        return m;
    }

    int64_t param_count() const { return index.total; }

    Eigen::Map<Mat<T>> mat(int id) {
        const auto& e = index.entries[size_t(id)];
        return Eigen::Map<Mat<T>>(params.data() + e.offset, e.rows, e.cols);
    }
    Eigen::Map<const Mat<T>> mat(int id) const {
        const auto& e = index.entries[size_t(id)];
        return Eigen::Map<const Mat<T>>(params.data() + e.offset, e.rows, e.cols);
    }
    Eigen::Map<Vec<T>> vec(int id) {
        const auto& e = index.entries[size_t(id)];
        return Eigen::Map<Vec<T>>(params.data() + e.offset, int64_t(e.rows) * e.cols);
    }
    Eigen::Map<const Vec<T>> vec(int id) const {
        const auto& e = index.entries[size_t(id)];
        return Eigen::Map<const Vec<T>>(params.data() + e.offset, int64_t(e.rows) * e.cols);
    }

    // deterministic in seed: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
    void init(uint64_t seed) {
        Rng rng(seed);
        for (size_t i = 0; i < index.entries.size(); ++i) {
            const auto& e = index.entries[i];
            T* p = params.data() + e.offset;
            int64_t n = int64_t(e.rows) * e.cols;
            if (e.is_weight) {
                double bound = 1.0 / std::sqrt(double(e.cols == 1 ? e.rows : e.cols));
                for (int64_t k = 0; k < n; ++k) p[k] = T(rng.uniform(-bound, bound));
            } else {
                for (int64_t k = 0; k < n; ++k) p[k] = T(e.init_value);
            }
        }
    }

    template <class U>
    Model<U> cast() const {
        Model<U> m;
        m.cfg = cfg;
        m.index = index;
        m.params.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) m.params[i] = U(params[i]);
        return m;
    }
};

// --- forward / backward ------------------------------------------------------

template <class T>
struct LnCache {
    Vec<T> mu, rstd;  // per column
    Mat<T> x_in;
    Mat<T> out;
};

template <class T>
struct AttnCache {
    Mat<T> x_res;  // block input (residual source), D x Nq
    LnCache<T> ln;
    Mat<T> kv;  // D x Nk (embedded modality tokens)
    std::vector<uint8_t> kv_mask;
    Mat<T> q, k, v;           // D x Nq / Nk
    std::vector<Mat<T>> p;    // per head, Nq x Nk
    Mat<T> concat;            // D x Nq
};

template <class T>
struct MlpCache {
    Vec<T> x_in;
    LnCache<T> ln;
    Vec<T> pre1, act1;
};

template <class T>
struct RowCache {
    Mat<T> feat_agents, feat_road, feat_route, feat_active, feat_value;  // scaled inputs
    std::vector<uint8_t> mask_latent;                                    // null + agent slots
    Mat<T> x0;                                                           // embedded latent tokens
    AttnCache<T> self_attn, cross_road, cross_route, cross_active;
    Mat<T> x4;  // encoder output tokens
    int n_valid = 0;
    Vec<T> pooled;
    std::vector<MlpCache<T>> policy_blocks, value_blocks;
    Vec<T> policy_h, value_h;
    Vec<T> value_emb_pre, value_emb_act, value_concat;
    Vec<T> logits_accel, logits_steer;
    T value = T(0);
};

namespace detail {

template <class T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.70710678118654752440)));
}

template <class T>
T gelu_grad(T x) {
    T phi = std::exp(T(-0.5) * x * x) * T(0.39894228040143267794);  // standard normal pdf
    return T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440))) + x * phi;
}

constexpr double kLnEps = 1e-5;

template <class T>
void ln_forward(const Vec<T>& g, const Vec<T>& b, const Mat<T>& x, LnCache<T>& c) {
    int d = int(x.rows()), n = int(x.cols());
    c.x_in = x;
    c.mu.resize(n);
    c.rstd.resize(n);
    c.out.resize(d, n);
    for (int j = 0; j < n; ++j) {
        T mu = x.col(j).mean();
        T var = (x.col(j).array() - mu).square().sum() / T(d);
        T rstd = T(1) / std::sqrt(var + T(kLnEps));
        c.mu[j] = mu;
        c.rstd[j] = rstd;
        c.out.col(j) = ((x.col(j).array() - mu) * rstd) * g.array() + b.array();
    }
}

// dx accumulated into dX; dg/db accumulated
template <class T>
void ln_backward(const LnCache<T>& c, const Vec<T>& g, const Mat<T>& dout, Mat<T>& dx,
                 Eigen::Map<Mat<T>> dg, Eigen::Map<Mat<T>> db) {
    int d = int(c.x_in.rows()), n = int(c.x_in.cols());
    for (int j = 0; j < n; ++j) {
        Vec<T> xhat = (c.x_in.col(j).array() - c.mu[j]) * c.rstd[j];
        Vec<T> dy = dout.col(j);
        dg.col(0).noalias() += (dy.array() * xhat.array()).matrix();
        db.col(0).noalias() += dy;
        Vec<T> dxhat = (dy.array() * g.array()).matrix();
        T m1 = dxhat.sum() / T(d);
        T m2 = (dxhat.array() * xhat.array()).sum() / T(d);
        dx.col(j).noalias() += ((dxhat.array() - m1 - xhat.array() * m2) * c.rstd[j]).matrix();
    }
}

}  // namespace detail

// Residual pre-LN multi-head attention block: x + MHA(LN(x), kv).
// Masked kv columns receive probability exactly 0, so invalid tokens cannot
// influence any output bit and get zero gradient.
template <class T>
void attn_forward(const Model<T>& m, const AttnHandles& h, const Mat<T>& x, const Mat<T>& kv,
                  const std::vector<uint8_t>& kv_mask, bool self_mode, Mat<T>& x_out, AttnCache<T>& c) {
    int d = m.cfg.latent, heads = m.cfg.heads, dh = d / heads;
    int nq = int(x.cols()), nk = self_mode ? nq : int(kv.cols());
    c.x_res = x;
    detail::ln_forward(Vec<T>(m.vec(h.ln_g)), Vec<T>(m.vec(h.ln_b)), x, c.ln);
    c.kv_mask = kv_mask;
    if (!self_mode) c.kv = kv;
    const Mat<T>& kv_src = self_mode ? c.ln.out : c.kv;
    c.q.noalias() = m.mat(h.wq) * c.ln.out;
    c.q.colwise() += Vec<T>(m.vec(h.bq));
    c.k.noalias() = m.mat(h.wk) * kv_src;
    c.k.colwise() += Vec<T>(m.vec(h.bk));
    c.v.noalias() = m.mat(h.wv) * kv_src;
    c.v.colwise() += Vec<T>(m.vec(h.bv));

    T scale = T(1) / std::sqrt(T(dh));
    c.p.assign(size_t(heads), Mat<T>());
    c.concat.resize(d, nq);
    for (int hh = 0; hh < heads; ++hh) {
        auto qh = c.q.middleRows(hh * dh, dh);
        auto kh = c.k.middleRows(hh * dh, dh);
        auto vh = c.v.middleRows(hh * dh, dh);
        Mat<T> s = (qh.transpose() * kh) * scale;  // nq x nk
        for (int j = 0; j < nk; ++j) {
            if (!kv_mask[size_t(j)]) s.col(j).setConstant(T(-1e30));
        }
        Mat<T>& p = c.p[size_t(hh)];
        p.resize(nq, nk);
        for (int i = 0; i < nq; ++i) {
            T mx = s.row(i).maxCoeff();
            p.row(i) = (s.row(i).array() - mx).exp();
            T sum = p.row(i).sum();
            p.row(i) /= sum;
        }
        c.concat.middleRows(hh * dh, dh).noalias() = vh * p.transpose();
    }
    x_out.noalias() = m.mat(h.wo) * c.concat;
    x_out.colwise() += Vec<T>(m.vec(h.bo));
    x_out += x;
}

// Backward of attn_forward; accumulates parameter grads into `grad` (flat),
// returns dx (residual input grad) and adds kv grads into dkv (ignored in
// self mode where kv aliases LN(x)).
template <class T>
void attn_backward(const Model<T>& m, const AttnHandles& h, const AttnCache<T>& c, bool self_mode,
                   const Mat<T>& dx_out, Mat<T>& dx, Mat<T>* dkv, std::vector<T>& grad) {
    int d = m.cfg.latent, heads = m.cfg.heads, dh = d / heads;
    int nq = int(c.ln.out.cols());
    int nk = int(c.k.cols());
    auto gmat = [&](int id) {
        const auto& e = m.index.entries[size_t(id)];
        return Eigen::Map<Mat<T>>(grad.data() + e.offset, e.rows, e.cols);
    };

    // out = Wo * concat + bo + x_res
    gmat(h.wo).noalias() += dx_out * c.concat.transpose();
    gmat(h.bo).col(0).noalias() += dx_out.rowwise().sum();
    Mat<T> dconcat = m.mat(h.wo).transpose() * dx_out;

    Mat<T> dq = Mat<T>::Zero(d, nq);
    Mat<T> dk = Mat<T>::Zero(d, nk);
    Mat<T> dv = Mat<T>::Zero(d, nk);
    T scale = T(1) / std::sqrt(T(dh));
    for (int hh = 0; hh < heads; ++hh) {
        auto qh = c.q.middleRows(hh * dh, dh);
        auto kh = c.k.middleRows(hh * dh, dh);
        auto vh = c.v.middleRows(hh * dh, dh);
        const Mat<T>& p = c.p[size_t(hh)];
        auto dOh = dconcat.middleRows(hh * dh, dh);
        dv.middleRows(hh * dh, dh).noalias() += dOh * p;
        Mat<T> dp = dOh.transpose() * vh;  // nq x nk  (dP = dO^T V)
        // softmax backward row-wise; masked entries have p == 0 -> ds == 0
        Mat<T> ds(nq, nk);
        for (int i = 0; i < nq; ++i) {
            T dot = (dp.row(i).array() * p.row(i).array()).sum();
            ds.row(i) = (dp.row(i).array() - dot) * p.row(i).array();
        }
        dq.middleRows(hh * dh, dh).noalias() += kh * ds.transpose() * scale;
        dk.middleRows(hh * dh, dh).noalias() += qh * ds * scale;
    }

    const Mat<T>& kv_src = self_mode ? c.ln.out : c.kv;
    gmat(h.wq).noalias() += dq * c.ln.out.transpose();
    gmat(h.bq).col(0).noalias() += dq.rowwise().sum();
    gmat(h.wk).noalias() += dk * kv_src.transpose();
    gmat(h.bk).col(0).noalias() += dk.rowwise().sum();
    gmat(h.wv).noalias() += dv * kv_src.transpose();
    gmat(h.bv).col(0).noalias() += dv.rowwise().sum();

    Mat<T> dln = m.mat(h.wq).transpose() * dq;
    if (self_mode) {
        dln.noalias() += m.mat(h.wk).transpose() * dk;
        dln.noalias() += m.mat(h.wv).transpose() * dv;
    } else if (dkv) {
        dkv->noalias() += m.mat(h.wk).transpose() * dk;
        dkv->noalias() += m.mat(h.wv).transpose() * dv;
    }

    dx = dx_out;  // residual path
    detail::ln_backward(c.ln, Vec<T>(m.vec(h.ln_g)), dln, dx, gmat(h.ln_g), gmat(h.ln_b));
}

template <class T>
void mlp_forward(const Model<T>& m, const BlockHandles& h, const Vec<T>& x, Vec<T>& out, MlpCache<T>& c) {
    c.x_in = x;
    Mat<T> xm = x;
    detail::ln_forward(Vec<T>(m.vec(h.ln_g)), Vec<T>(m.vec(h.ln_b)), xm, c.ln);
    c.pre1.noalias() = m.mat(h.w1) * c.ln.out.col(0) + Vec<T>(m.vec(h.b1));
    c.act1 = c.pre1.unaryExpr([](T v) { return detail::gelu(v); });
    out.noalias() = m.mat(h.w2) * c.act1 + Vec<T>(m.vec(h.b2));
    out += x;
}

template <class T>
void mlp_backward(const Model<T>& m, const BlockHandles& h, const MlpCache<T>& c, const Vec<T>& dout,
                  Vec<T>& dx, std::vector<T>& grad) {
    auto gmat = [&](int id) {
        const auto& e = m.index.entries[size_t(id)];
        return Eigen::Map<Mat<T>>(grad.data() + e.offset, e.rows, e.cols);
    };
    gmat(h.w2).noalias() += dout * c.act1.transpose();
    gmat(h.b2).col(0).noalias() += dout;
    Vec<T> dact = m.mat(h.w2).transpose() * dout;
    Vec<T> dpre =
        (dact.array() * c.pre1.unaryExpr([](T v) { return detail::gelu_grad(v); }).array()).matrix();
    gmat(h.w1).noalias() += dpre * c.ln.out.col(0).transpose();
    gmat(h.b1).col(0).noalias() += dpre;
    Mat<T> dln = m.mat(h.w1).transpose() * dpre;
    Mat<T> dxm = dout;  // residual path
    detail::ln_backward(c.ln, Vec<T>(m.vec(h.ln_g)), dln, dxm, gmat(h.ln_g), gmat(h.ln_b));
    dx = dxm.col(0);
}

// Full forward for one observation row. The cache is reusable scratch; pass
// the same object across rows to avoid reallocation.
template <class T>
void forward_row(const Model<T>& m, const sim::ObservationBatch& obs, int row, RowCache<T>& c) {
    const auto& cfg = m.cfg;
    int d = cfg.latent;
    int na = cfg.obs.n_agents, nr = cfg.obs.n_road, nl = cfg.obs.n_route;

    // scaled feature matrices (feature x tokens)
    c.feat_agents.resize(sim::ObsSpec::agent_feat, na);
    const float* ag = obs.agents_row(row);
    for (int i = 0; i < na; ++i) {
        for (int f = 0; f < sim::ObsSpec::agent_feat; ++f) {
            c.feat_agents(f, i) = T(ag[i * sim::ObsSpec::agent_feat + f]) * T(kAgentScale[size_t(f)]);
        }
    }
    c.feat_road.resize(sim::ObsSpec::road_feat, nr);
    const float* rd = obs.road_row(row);
    for (int i = 0; i < nr; ++i) {
        for (int f = 0; f < sim::ObsSpec::road_feat; ++f) {
            c.feat_road(f, i) = T(rd[i * sim::ObsSpec::road_feat + f]) * T(kRoadScale[size_t(f)]);
        }
    }
    c.feat_route.resize(sim::ObsSpec::route_feat, nl);
    const float* rt = obs.route_row(row);
    for (int i = 0; i < nl; ++i) {
        for (int f = 0; f < sim::ObsSpec::route_feat; ++f) {
            c.feat_route(f, i) = T(rt[i * sim::ObsSpec::route_feat + f]) * T(kRouteScale[size_t(f)]);
        }
    }
    c.feat_active.resize(sim::ObsSpec::active_feat, 1);
    const float* ac = obs.active_row(row);
    for (int f = 0; f < sim::ObsSpec::active_feat; ++f) {
        c.feat_active(f, 0) = T(ac[f]) * T(kActiveScale[size_t(f)]);
    }
    c.feat_value.resize(sim::ObsSpec::value_feat, 1);
    const float* vf = obs.value_row(row);
    for (int f = 0; f < sim::ObsSpec::value_feat; ++f) {
        c.feat_value(f, 0) = T(vf[f]) * T(kValueScale[size_t(f)]);
    }

    // latent tokens: learned null + agent embeddings
    c.mask_latent.assign(size_t(na) + 1, 0);
    c.mask_latent[0] = 1;
    for (int i = 0; i < na; ++i) {
        c.mask_latent[size_t(i) + 1] = ag[i * sim::ObsSpec::agent_feat + 5] > 0.5f ? 1 : 0;
    }
    c.x0.resize(d, na + 1);
    c.x0.col(0) = m.vec(m.index.null_agents);
    c.x0.rightCols(na).noalias() = m.mat(m.index.emb_agents_w) * c.feat_agents;
    c.x0.rightCols(na).colwise() += Vec<T>(m.vec(m.index.emb_agents_b));

    // kv token sets: learned null + embedded modality tokens
    auto build_kv = [&](int w_id, int b_id, int null_id, const Mat<T>& feats, const float* raw,
                        int feat_stride, int valid_at, Mat<T>& kv, std::vector<uint8_t>& mask) {
        int n = int(feats.cols());
        kv.resize(d, n + 1);
        kv.col(0) = m.vec(null_id);
        kv.rightCols(n).noalias() = m.mat(w_id) * feats;
        kv.rightCols(n).colwise() += Vec<T>(m.vec(b_id));
        mask.assign(size_t(n) + 1, 0);
        mask[0] = 1;
        for (int i = 0; i < n; ++i) {
            mask[size_t(i) + 1] = valid_at < 0 || raw[i * feat_stride + valid_at] > 0.5f ? 1 : 0;
        }
    };

    Mat<T> x1, x2, x3;
    Mat<T> kv_buf;
    std::vector<uint8_t> mask_buf;
    attn_forward(m, m.index.self_attn, c.x0, c.x0, c.mask_latent, true, x1, c.self_attn);

    build_kv(m.index.emb_road_w, m.index.emb_road_b, m.index.null_road, c.feat_road, rd,
             sim::ObsSpec::road_feat, 11, kv_buf, mask_buf);
    attn_forward(m, m.index.cross_road, x1, kv_buf, mask_buf, false, x2, c.cross_road);
    build_kv(m.index.emb_route_w, m.index.emb_route_b, m.index.null_route, c.feat_route, rt,
             sim::ObsSpec::route_feat, 4, kv_buf, mask_buf);
    attn_forward(m, m.index.cross_route, x2, kv_buf, mask_buf, false, x3, c.cross_route);
    build_kv(m.index.emb_active_w, m.index.emb_active_b, m.index.null_active, c.feat_active, ac,
             sim::ObsSpec::active_feat, -1, kv_buf, mask_buf);
    attn_forward(m, m.index.cross_active, x3, kv_buf, mask_buf, false, c.x4, c.cross_active);

    // mean pool over valid latent tokens
    c.n_valid = 0;
    c.pooled = Vec<T>::Zero(d);
    for (int j = 0; j < int(c.mask_latent.size()); ++j) {
        if (c.mask_latent[size_t(j)]) {
            c.pooled += c.x4.col(j);
            ++c.n_valid;
        }
    }
    c.pooled /= T(c.n_valid);

    // policy trunk
    c.policy_blocks.resize(size_t(cfg.trunk_blocks));
    c.policy_h = c.pooled;
    for (int i = 0; i < cfg.trunk_blocks; ++i) {
        Vec<T> out;
        mlp_forward(m, m.index.policy_blocks[size_t(i)], c.policy_h, out, c.policy_blocks[size_t(i)]);
        c.policy_h = out;
    }
    c.logits_accel.noalias() =
        m.mat(m.index.policy_accel_w) * c.policy_h + Vec<T>(m.vec(m.index.policy_accel_b));
    c.logits_steer.noalias() =
        m.mat(m.index.policy_steer_w) * c.policy_h + Vec<T>(m.vec(m.index.policy_steer_b));

    // value trunk: embed value-only features, concat with the pooled encoding
    c.value_emb_pre.noalias() =
        m.mat(m.index.value_emb_w) * c.feat_value.col(0) + Vec<T>(m.vec(m.index.value_emb_b));
    c.value_emb_act = c.value_emb_pre.unaryExpr([](T v) { return detail::gelu(v); });
    c.value_concat.resize(d + cfg.value_embed);
    c.value_concat.head(d) = c.pooled;
    c.value_concat.tail(cfg.value_embed) = c.value_emb_act;
    Vec<T> hv = m.mat(m.index.value_in_w) * c.value_concat + Vec<T>(m.vec(m.index.value_in_b));
    c.value_blocks.resize(size_t(cfg.trunk_blocks));
    c.value_h = hv;
    for (int i = 0; i < cfg.trunk_blocks; ++i) {
        Vec<T> out;
        mlp_forward(m, m.index.value_blocks[size_t(i)], c.value_h, out, c.value_blocks[size_t(i)]);
        c.value_h = out;
    }
    c.value = (m.mat(m.index.value_head_w) * c.value_h)(0, 0) + m.params[size_t(
        m.index.entries[size_t(m.index.value_head_b)].offset)];
}

// Reverse pass matching forward_row; accumulates into `grad` (flat, same
// layout as params).
template <class T>
void backward_row(const Model<T>& m, const RowCache<T>& c, const Vec<T>& dlogits_accel,
                  const Vec<T>& dlogits_steer, T dvalue, std::vector<T>& grad) {
    const auto& cfg = m.cfg;
    int d = cfg.latent;
    auto gmat = [&](int id) {
        const auto& e = m.index.entries[size_t(id)];
        return Eigen::Map<Mat<T>>(grad.data() + e.offset, e.rows, e.cols);
    };

    // value head
    Vec<T> dvh = Vec<T>::Zero(d);
    if (dvalue != T(0)) {
        gmat(m.index.value_head_w).noalias() += dvalue * c.value_h.transpose();
        gmat(m.index.value_head_b)(0, 0) += dvalue;
        dvh = m.mat(m.index.value_head_w).transpose() * dvalue;
    }
    for (int i = cfg.trunk_blocks - 1; i >= 0; --i) {
        Vec<T> dx;
        mlp_backward(m, m.index.value_blocks[size_t(i)], c.value_blocks[size_t(i)], dvh, dx, grad);
        dvh = dx;
    }
    gmat(m.index.value_in_w).noalias() += dvh * c.value_concat.transpose();
    gmat(m.index.value_in_b).col(0).noalias() += dvh;
    Vec<T> dconcat = m.mat(m.index.value_in_w).transpose() * dvh;
    Vec<T> dpooled_value = dconcat.head(d);
    Vec<T> dve = dconcat.tail(cfg.value_embed);
    Vec<T> dve_pre =
        (dve.array() * c.value_emb_pre.unaryExpr([](T v) { return detail::gelu_grad(v); }).array())
            .matrix();
    gmat(m.index.value_emb_w).noalias() += dve_pre * c.feat_value.col(0).transpose();
    gmat(m.index.value_emb_b).col(0).noalias() += dve_pre;

    // policy heads and trunk
    gmat(m.index.policy_accel_w).noalias() += dlogits_accel * c.policy_h.transpose();
    gmat(m.index.policy_accel_b).col(0).noalias() += dlogits_accel;
    gmat(m.index.policy_steer_w).noalias() += dlogits_steer * c.policy_h.transpose();
    gmat(m.index.policy_steer_b).col(0).noalias() += dlogits_steer;
    Vec<T> dph = m.mat(m.index.policy_accel_w).transpose() * dlogits_accel;
    dph.noalias() += m.mat(m.index.policy_steer_w).transpose() * dlogits_steer;
    for (int i = cfg.trunk_blocks - 1; i >= 0; --i) {
        Vec<T> dx;
        mlp_backward(m, m.index.policy_blocks[size_t(i)], c.policy_blocks[size_t(i)], dph, dx, grad);
        dph = dx;
    }

    // pooled gradient from both trunks -> distribute over valid tokens
    Vec<T> dpooled = dph + dpooled_value;
    Mat<T> dx4 = Mat<T>::Zero(d, c.x4.cols());
    for (int j = 0; j < int(c.mask_latent.size()); ++j) {
        if (c.mask_latent[size_t(j)]) dx4.col(j) = dpooled / T(c.n_valid);
    }

    // encoder blocks in reverse
    Mat<T> dkv_active = Mat<T>::Zero(d, c.cross_active.kv.cols());
    Mat<T> dx3;
    attn_backward(m, m.index.cross_active, c.cross_active, false, dx4, dx3, &dkv_active, grad);
    Mat<T> dkv_route = Mat<T>::Zero(d, c.cross_route.kv.cols());
    Mat<T> dx2;
    attn_backward(m, m.index.cross_route, c.cross_route, false, dx3, dx2, &dkv_route, grad);
    Mat<T> dkv_road = Mat<T>::Zero(d, c.cross_road.kv.cols());
    Mat<T> dx1;
    attn_backward(m, m.index.cross_road, c.cross_road, false, dx2, dx1, &dkv_road, grad);
    Mat<T> dx0;
    attn_backward(m, m.index.self_attn, c.self_attn, true, dx1, dx0, nullptr, grad);

    // embeddings
    gmat(m.index.null_agents).col(0).noalias() += dx0.col(0);
    gmat(m.index.emb_agents_w).noalias() += dx0.rightCols(cfg.obs.n_agents) * c.feat_agents.transpose();
    gmat(m.index.emb_agents_b).col(0).noalias() += dx0.rightCols(cfg.obs.n_agents).rowwise().sum();
    gmat(m.index.null_road).col(0).noalias() += dkv_road.col(0);
    gmat(m.index.emb_road_w).noalias() += dkv_road.rightCols(cfg.obs.n_road) * c.feat_road.transpose();
    gmat(m.index.emb_road_b).col(0).noalias() += dkv_road.rightCols(cfg.obs.n_road).rowwise().sum();
    gmat(m.index.null_route).col(0).noalias() += dkv_route.col(0);
    gmat(m.index.emb_route_w).noalias() += dkv_route.rightCols(cfg.obs.n_route) * c.feat_route.transpose();
    gmat(m.index.emb_route_b).col(0).noalias() += dkv_route.rightCols(cfg.obs.n_route).rowwise().sum();
    gmat(m.index.null_active).col(0).noalias() += dkv_active.col(0);
    gmat(m.index.emb_active_w).noalias() += dkv_active.rightCols(1) * c.feat_active.transpose();
    gmat(m.index.emb_active_b).col(0).noalias() += dkv_active.col(1);
}

// --- categorical utilities ---------------------------------------------------

template <class T>
Vec<T> log_softmax(const Vec<T>& logits) {
    T mx = logits.maxCoeff();
    Vec<T> shifted = logits.array() - mx;
    T lse = std::log(shifted.array().exp().sum());
    return (shifted.array() - lse).matrix();
}

template <class T>
int sample_categorical(const Vec<T>& logits, Rng& rng, double* logp_out) {
    Vec<T> ls = log_softmax(logits);
    double u = rng.uniform();
    double acc = 0.0;
    int n = int(ls.size());
    int pick = n - 1;
    for (int i = 0; i < n; ++i) {
        acc += std::exp(double(ls[i]));
        if (u < acc) {
            pick = i;
            break;
        }
    }
    if (logp_out) *logp_out = double(ls[pick]);
    return pick;
}

template <class T>
int argmax(const Vec<T>& logits) {
    int best = 0;
    for (int i = 1; i < int(logits.size()); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return best;
}

}  // namespace zsim::nn
