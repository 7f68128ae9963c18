#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lfs/framekit.hpp"
#include "lfs/init.hpp"
#include "lfs/lnc.hpp"
#include "lfs/optim.hpp"
#include "lfs/tape.hpp"

namespace lfs::protossl {

using framekit::Observation;
using framekit::SyntheticPair;
using numgrad::Adam;
using numgrad::Array;
using numgrad::ParamStore;
using numgrad::Tape;
using numgrad::Var;

enum class Branch { Online, Target };

struct BankConfig {
    int frame_h = 16;
    int frame_w = 16;
    int obs_channels = 3;  // 3 * frame channels
    int latent_dim = 128;
    int hidden = 1024;     // projector/predictor hidden units
    int prototypes = 512;  // number of clustering centers P

    static constexpr int kConvLayers = 4;
    static constexpr int kConvChannels = 32;
    static constexpr int kKernel = 3;
    // strides (2,1,1,1), valid convolution (no padding)
    static int stride_of(int layer) { return layer == 0 ? 2 : 1; }

    int conv_out(int sz) const {
        for (int l = 0; l < kConvLayers; ++l) {
            sz = (sz - kKernel) / stride_of(l) + 1;
            require(sz >= 1, "frame size too small for the conv trunk (needs >= 16 pixels per side)");
        }
        return sz;
    }

    int flat_dim() const { return kConvChannels * conv_out(frame_h) * conv_out(frame_w); }

    void validate() const {
        require(latent_dim >= 1 && hidden >= 1 && prototypes >= 1, "bank dims must be positive");
        require(obs_channels % 3 == 0, "observation channels must be 3 x frame channels, got ", obs_channels);
        (void)flat_dim();
    }
};

struct SslHyper {
    double tau = 0.1;                   // softmax temperature
    double eta = 0.05;                  // encoder target EMA momentum
    double epsilon = 0.05;              // Sinkhorn regularization
    int sinkhorn_iters = 3;
    double lr = 1e-4;
    int target_update_frequency = 1;

    void validate() const {
        require(tau > 0.0, "softmax temperature must be positive, got ", tau);
        require(eta > 0.0 && eta <= 1.0, "EMA momentum must be in (0,1], got ", eta);
        require(epsilon > 0.0, "Sinkhorn epsilon must be positive, got ", epsilon);
        require(sinkhorn_iters >= 1, "Sinkhorn iterations must be >= 1, got ", sinkhorn_iters);
        require(target_update_frequency >= 1, "target update frequency must be >= 1");
    }
};

// copies a batch of observations into an [N, 3C, H, W] array
inline Array obs_batch_to_array(const std::vector<Observation>& obs) {
    require(!obs.empty(), "empty observation batch");
    const auto& o0 = obs.front();
    Array x = Array::zeros({static_cast<int>(obs.size()), o0.channels(), o0.h, o0.w});
    const int64_t n = o0.size();
    for (size_t i = 0; i < obs.size(); ++i) {
        require(obs[i].same_geometry(o0), "observation geometry mismatch within batch");
        std::copy(obs[i].px.begin(), obs[i].px.end(), x.data.begin() + static_cast<int64_t>(i) * n);
    }
    return x;
}

// Encoder f, projector g, predictor v, prototypes {c_y}, and the EMA target
// copies of f and g. Online and target shapes are identical; the projector
// and predictor preserve the latent dimensionality.
class NetworkBank {
public:
    NetworkBank(const BankConfig& cfg, Rng& rng) : cfg_(cfg) {
        cfg_.validate();
        init_encoder("enc/", rng);
        init_mlp("proj/", rng);
        init_mlp("pred/", rng);
        // prototypes: unit Gaussian rows, l2-normalized
        Array proto = numgrad::gaussian({cfg_.prototypes, cfg_.latent_dim}, rng);
        for (int p = 0; p < cfg_.prototypes; ++p) {
            double s = 0.0;
            double* row = proto.data.data() + static_cast<int64_t>(p) * cfg_.latent_dim;
            for (int j = 0; j < cfg_.latent_dim; ++j) s += row[j] * row[j];
            s = std::sqrt(s);
            for (int j = 0; j < cfg_.latent_dim; ++j) row[j] /= s;
        }
        store_.add("proto/c", std::move(proto));
        // targets start as copies of the online branch
        copy_group("enc/", "tgt_enc/");
        copy_group("proj/", "tgt_proj/");
    }

    const BankConfig& config() const { return cfg_; }
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }

    std::vector<std::string> trainable_names() const {
        std::vector<std::string> out;
        for (const auto& n : store_.names())
            if (n.rfind("tgt_", 0) != 0) out.push_back(n);
        return out;
    }

    std::vector<std::pair<std::string, std::string>> ema_pairs() const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& n : store_.names()) {
            if (n.rfind("enc/", 0) == 0 || n.rfind("proj/", 0) == 0) out.emplace_back("tgt_" + n, n);
        }
        return out;
    }

    // conv trunk + affine map to the latent; target branch never takes grads
    Var encode(Tape& t, Var obs, Branch branch) const {
        const std::string p = branch == Branch::Target ? "tgt_enc/" : "enc/";
        // copy dims up front: node storage may reallocate as ops are recorded
        const std::vector<int> in_shape = t.val(obs).shape;
        require(in_shape.size() == 4 && in_shape[1] == cfg_.obs_channels && in_shape[2] == cfg_.frame_h &&
                    in_shape[3] == cfg_.frame_w,
                "observation geometry ", shape_str(in_shape), " does not match the encoder (expected [N,",
                cfg_.obs_channels, ",", cfg_.frame_h, ",", cfg_.frame_w, "])");
        const int batch = in_shape[0];
        Var h = obs;
        for (int l = 0; l < BankConfig::kConvLayers; ++l) {
            const std::string idx = std::to_string(l + 1);
            h = t.relu(t.conv2d(h, leaf(t, p + "conv" + idx + "_w", branch), leaf(t, p + "conv" + idx + "_b", branch),
                                BankConfig::stride_of(l), 0));
        }
        h = t.reshape(h, {batch, cfg_.flat_dim()});
        return t.affine(h, leaf(t, p + "fc_w", branch), leaf(t, p + "fc_b", branch));
    }

    Var project(Tape& t, Var h, Branch branch) const {
        const std::string p = branch == Branch::Target ? "tgt_proj/" : "proj/";
        Var z = t.relu(t.affine(h, leaf(t, p + "l1_w", branch), leaf(t, p + "l1_b", branch)));
        return t.affine(z, leaf(t, p + "l2_w", branch), leaf(t, p + "l2_b", branch));
    }

    Var predict(Tape& t, Var z) const {
        Var y = t.relu(t.affine(z, t.param("pred/l1_w"), t.param("pred/l1_b")));
        return t.affine(y, t.param("pred/l2_w"), t.param("pred/l2_b"));
    }

    // z = v(g(f(obs))); gradient flows to theta and psi
    Var online_embedding(Tape& t, Var obs) const { return predict(t, project(t, encode(t, obs, Branch::Online), Branch::Online)); }

    // z_t = g_bar(f_bar(obs)); no predictor on the target branch
    Var target_embedding(Tape& t, Var obs) const { return project(t, encode(t, obs, Branch::Target), Branch::Target); }

    // softmax over dot products of l2-normalized z and prototypes
    Var prototype_scores(Tape& t, Var z, double tau) const {
        Var zn = t.l2_normalize(z);
        Var cn = t.l2_normalize(t.param("proto/c"));
        return t.softmax(t.matmul_nt(zn, cn), tau);
    }

    // theta_bar <- (1-eta) theta_bar + eta theta for encoder and projector
    void ema_update(double eta) { numgrad::ema_update_params(store_, ema_pairs(), eta); }

    // grad-free encoder latents for a batch of observations (LNC embeddings)
    Array encode_batch(const std::vector<Observation>& obs, Branch branch = Branch::Online) const {
        Tape t(const_cast<ParamStore*>(&store_), /*grad_enabled=*/false);
        Var x = t.input(obs_batch_to_array(obs));
        return t.val(encode(t, x, branch));
    }

private:
    Var leaf(Tape& t, const std::string& name, Branch branch) const {
        return branch == Branch::Target ? t.frozen(name) : t.param(name);
    }

    void init_encoder(const std::string& p, Rng& rng) {
        int ch = cfg_.obs_channels;
        for (int l = 0; l < BankConfig::kConvLayers; ++l) {
            const std::string idx = std::to_string(l + 1);
            store_.add(p + "conv" + idx + "_w",
                       numgrad::orthogonal_conv(BankConfig::kConvChannels, ch, BankConfig::kKernel, BankConfig::kKernel, rng));
            store_.add(p + "conv" + idx + "_b", Array::zeros({BankConfig::kConvChannels}));
            ch = BankConfig::kConvChannels;
        }
        store_.add(p + "fc_w", numgrad::orthogonal(cfg_.flat_dim(), cfg_.latent_dim, rng));
        store_.add(p + "fc_b", Array::zeros({cfg_.latent_dim}));
    }

    void init_mlp(const std::string& p, Rng& rng) {
        store_.add(p + "l1_w", numgrad::orthogonal(cfg_.latent_dim, cfg_.hidden, rng));
        store_.add(p + "l1_b", Array::zeros({cfg_.hidden}));
        store_.add(p + "l2_w", numgrad::orthogonal(cfg_.hidden, cfg_.latent_dim, rng));
        store_.add(p + "l2_b", Array::zeros({cfg_.latent_dim}));
    }

    void copy_group(const std::string& from, const std::string& to) {
        std::vector<std::string> names = store_.names();  // copy: we mutate the store
        for (const auto& n : names)
            if (n.rfind(from, 0) == 0) store_.add(to + n.substr(from.size()), store_.value(n));
    }

    BankConfig cfg_;
    ParamStore store_;
};

struct SinkhornDiag {
    // column sums captured right after the final column normalization,
    // before the closing row normalization
    std::vector<double> pre_row_column_sums;
};

// Sinkhorn-Knopp assignment targets: start from exp(z_n c_n^T / eps), then
// alternate column normalization (marginal 1/P) and row normalization
// (marginal 1/M) `iters` times; the returned Q is row-normalized so each row
// is a distribution over prototypes. Computed with gradients disabled.
inline Array sinkhorn_assign(const Array& z_targets, const Array& prototypes, double epsilon, int iters,
                             SinkhornDiag* diag = nullptr) {
    require(epsilon > 0.0, "Sinkhorn epsilon must be positive, got ", epsilon);
    require(iters >= 1, "Sinkhorn needs at least one iteration");
    require(z_targets.rank() == 2 && prototypes.rank() == 2 && z_targets.dim(1) == prototypes.dim(1),
            "sinkhorn_assign dimension mismatch between ", shape_str(z_targets.shape), " and ",
            shape_str(prototypes.shape));
    const int m = z_targets.dim(0), p = prototypes.dim(0), d = z_targets.dim(1);

    // l2-normalize both sides, then scores / epsilon with max subtraction
    Array zn = z_targets, cn = prototypes;
    auto normalize_rows = [](Array& a) {
        const int rows = a.dim(0), cols = a.dim(1);
        for (int i = 0; i < rows; ++i) {
            double* r = a.data.data() + static_cast<int64_t>(i) * cols;
            double s = 0.0;
            for (int j = 0; j < cols; ++j) s += r[j] * r[j];
            s = std::sqrt(s);
            require(s > 0.0, "sinkhorn_assign: zero embedding row");
            for (int j = 0; j < cols; ++j) r[j] /= s;
        }
    };
    normalize_rows(zn);
    normalize_rows(cn);

    Array q = Array::zeros({m, p});
    numgrad::gemm_nt(zn.data.data(), cn.data.data(), q.data.data(), m, d, p);
    double mx = q.data[0];
    for (double v : q.data) mx = std::max(mx, v);
    for (auto& v : q.data) {
        v = std::exp((v - mx) / epsilon);
        require(std::isfinite(v), "sinkhorn_assign: numerical overflow in exp");
    }

    std::vector<double> colsum(static_cast<size_t>(p));
    for (int it = 0; it < iters; ++it) {
        // columns to 1/P
        std::fill(colsum.begin(), colsum.end(), 0.0);
        for (int i = 0; i < m; ++i) {
            const double* r = q.data.data() + static_cast<int64_t>(i) * p;
            for (int j = 0; j < p; ++j) colsum[static_cast<size_t>(j)] += r[j];
        }
        for (auto& s : colsum) {
            require(s > 0.0, "sinkhorn_assign: column mass vanished");
            s = 1.0 / (s * p);
        }
        for (int i = 0; i < m; ++i) {
            double* r = q.data.data() + static_cast<int64_t>(i) * p;
            for (int j = 0; j < p; ++j) r[j] *= colsum[static_cast<size_t>(j)];
        }
        if (diag && it == iters - 1) {
            diag->pre_row_column_sums.assign(static_cast<size_t>(p), 0.0);
            for (int i = 0; i < m; ++i) {
                const double* r = q.data.data() + static_cast<int64_t>(i) * p;
                for (int j = 0; j < p; ++j) diag->pre_row_column_sums[static_cast<size_t>(j)] += r[j];
            }
        }
        // rows to 1/M
        for (int i = 0; i < m; ++i) {
            double* r = q.data.data() + static_cast<int64_t>(i) * p;
            double s = 0.0;
            for (int j = 0; j < p; ++j) s += r[j];
            const double f = 1.0 / (s * m);
            for (int j = 0; j < p; ++j) r[j] *= f;
        }
    }
    // final row normalization to distributions
    for (int i = 0; i < m; ++i) {
        double* r = q.data.data() + static_cast<int64_t>(i) * p;
        double s = 0.0;
        for (int j = 0; j < p; ++j) s += r[j];
        for (int j = 0; j < p; ++j) r[j] /= s;
    }
    return q;
}

// J = -(1/M) sum_x q^(x) . log p^(x); gradient flows only through p.
inline Var lfs_loss(Tape& t, Var p_probs, const Array& q_targets) {
    const Array& p = t.val(p_probs);
    require(p.rank() == 2 && p.same_shape(q_targets), "lfs_loss shape mismatch between p ", shape_str(p.shape),
            " and q ", shape_str(q_targets.shape));
    const int m = p.dim(0);
    Var logp = t.log_(p_probs, 1e-12);
    Var prod = t.mul(t.input(q_targets), logp);
    return t.scale(t.sum(prod), -1.0 / static_cast<double>(m));
}

struct SslMode {
    bool disable_fm = false;           // no synthetic observations at all
    bool disable_lnc = false;          // fixed random synthetic count instead of LNC
    int fixed_synthetic_count = -1;    // <0 means round(0.1 * M)
};

struct SslMetrics {
    double loss = 0.0;
    int n_selected = 0;
    double grad_norm = 0.0;
};

// global instrumentation counter: end-to-end training and video pre-training
// share this exact code path
inline int64_t& ssl_step_counter() {
    static int64_t count = 0;
    return count;
}

// Synthetic-pair selection: LNC over grad-free encoder latents, or a fixed
// random count when LNC is ablated. The pair's earlier observation alone
// determines acceptance. Pass precomputed real latents to avoid re-encoding.
inline std::vector<SyntheticPair> select_synthetic(const std::vector<Observation>& real_prev,
                                                   const std::vector<SyntheticPair>& syn_sample, NetworkBank& bank,
                                                   const lnc::LncConfig& lcfg, const SslMode& mode, Rng& rng,
                                                   const Array* h_real_cached = nullptr) {
    std::vector<SyntheticPair> selected;
    if (mode.disable_fm || syn_sample.empty()) return selected;
    const int m = static_cast<int>(real_prev.size());
    if (mode.disable_lnc) {
        int want = mode.fixed_synthetic_count >= 0 ? mode.fixed_synthetic_count
                                                   : static_cast<int>(std::lround(0.1 * m));
        want = std::min(want, static_cast<int>(syn_sample.size()));
        want = std::min(want, m);
        for (int i : rng.sample_without_replacement(static_cast<int>(syn_sample.size()), want))
            selected.push_back(syn_sample[static_cast<size_t>(i)]);
        return selected;
    }
    std::vector<Observation> syn_prev;
    syn_prev.reserve(syn_sample.size());
    for (const auto& sp : syn_sample) syn_prev.push_back(sp.prev);
    const Array h_real = h_real_cached ? *h_real_cached : bank.encode_batch(real_prev);
    const Array h_syn = bank.encode_batch(syn_prev);
    lnc::LncResult res = lnc::select(h_syn, h_real, lcfg);
    for (int idx : res.selected) {
        if (static_cast<int>(selected.size()) >= m) break;
        selected.push_back(syn_sample[static_cast<size_t>(idx)]);
    }
    return selected;
}

// The gradient half of the auxiliary update, shared verbatim by end-to-end
// training and video pre-training: assemble the batch, compute p (online) and
// q (target + Sinkhorn), one step on theta, psi and the prototypes, then EMA.
inline SslMetrics ssl_apply_update(const std::vector<Observation>& real_prev,
                                   const std::vector<Observation>& real_next,
                                   const std::vector<SyntheticPair>& selected, NetworkBank& bank, Adam& opt,
                                   const SslHyper& hyper, Rng& rng, int64_t step_index = 0, bool checked = false) {
    hyper.validate();
    const int m = static_cast<int>(real_prev.size());
    require(m >= 1 && real_next.size() == real_prev.size(), "ssl update needs a nonempty real batch");

    lnc::AuxBatch aux = lnc::assemble_aux_batch(selected, real_prev, real_next, m, rng);

    // p from earlier observations (online), q from later observations (target)
    Array q_targets;
    {
        Tape t(&bank.store(), /*grad_enabled=*/false, checked);
        Var zt = bank.target_embedding(t, t.input(obs_batch_to_array(aux.next)));
        q_targets = sinkhorn_assign(t.val(zt), bank.store().value("proto/c"), hyper.epsilon, hyper.sinkhorn_iters);
    }

    bank.store().zero_grads();
    SslMetrics metrics;
    {
        Tape t(&bank.store(), /*grad_enabled=*/true, checked);
        Var z = bank.online_embedding(t, t.input(obs_batch_to_array(aux.prev)));
        Var p = bank.prototype_scores(t, z, hyper.tau);
        metrics.loss = t.backward(lfs_loss(t, p, q_targets));
    }
    metrics.grad_norm = bank.store().grad_norm();
    metrics.n_selected = static_cast<int>(selected.size());
    opt.step();

    if (hyper.target_update_frequency <= 1 || step_index % hyper.target_update_frequency == 0)
        bank.ema_update(hyper.eta);

    ++ssl_step_counter();
    return metrics;
}

// One full auxiliary update: selection then gradient step.
inline SslMetrics ssl_update_step(const std::vector<Observation>& real_prev, const std::vector<Observation>& real_next,
                                  const std::vector<SyntheticPair>& syn_sample, NetworkBank& bank, Adam& opt,
                                  const SslHyper& hyper, const lnc::LncConfig& lcfg, const SslMode& mode, Rng& rng,
                                  int64_t step_index = 0, bool checked = false,
                                  const Array* h_real_cached = nullptr) {
    auto selected = select_synthetic(real_prev, syn_sample, bank, lcfg, mode, rng, h_real_cached);
    return ssl_apply_update(real_prev, real_next, selected, bank, opt, hyper, rng, step_index, checked);
}

}  // namespace lfs::protossl
