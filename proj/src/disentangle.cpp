#include "harmon/disentangle.hpp"

#include <cmath>

namespace harmon {

PairSets pair_sets(int flat_index, int B, int n_augs) {
    if (B < 2 || n_augs < 2)
        throw InvalidArgument("pair_sets: need B >= 2 and n_augs >= 2 (loss undefined otherwise)");
    const int n_views = B * n_augs;
    if (flat_index < 0 || flat_index >= n_views)
        throw InvalidArgument("pair_sets: flat_index out of range");
    const int subject = flat_index / n_augs;
    const int aug = flat_index % n_augs;
    PairSets ps;
    for (int j = 0; j < n_views; ++j) {
        if (j == flat_index) continue;
        const int sj = j / n_augs;
        const int aj = j % n_augs;
        if (sj == subject && aj != aug) {
            ps.P_a.push_back(j);  // same subject, different augmentation
            ps.N_c.push_back(j);
        } else if (sj != subject && aj == aug) {
            ps.N_a.push_back(j);  // different subject, same augmentation
            ps.P_c.push_back(j);
        }
        // views differing in both subject and augmentation enter no set
    }
    return ps;
}

namespace {

struct CosSim {
    double sim;
    double norm_i, norm_k;
};

CosSim cosine(const float* a, const float* b, int d) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int j = 0; j < d; ++j) {
        dot += static_cast<double>(a[j]) * b[j];
        na += static_cast<double>(a[j]) * a[j];
        nb += static_cast<double>(b[j]) * b[j];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na <= 0.0 || nb <= 0.0)
        throw InvalidArgument("contrastive_loss: zero vector (cosine undefined)");
    return {dot / (na * nb), na, nb};
}

}  // namespace

double contrastive_loss(int anchor, const std::vector<int>& pos, const std::vector<int>& neg,
                        const nn::Tensor& codes, double tau) {
    if (pos.empty()) throw InvalidArgument("contrastive_loss: empty positive set");
    if (tau <= 0.0) throw InvalidArgument("contrastive_loss: tau must be positive");
    const int d = codes.c;
    const float* zi = codes.sample(anchor);
    // stable log-sum-exp over the union (positives first)
    std::vector<double> s;
    s.reserve(pos.size() + neg.size());
    for (int k : pos) s.push_back(cosine(zi, codes.sample(k), d).sim / tau);
    for (int k : neg) s.push_back(cosine(zi, codes.sample(k), d).sim / tau);
    double mx = s[0];
    for (double v : s) mx = std::max(mx, v);
    double sum_pos = 0.0, sum_all = 0.0;
    for (size_t j = 0; j < s.size(); ++j) {
        const double e = std::exp(s[j] - mx);
        sum_all += e;
        if (j < pos.size()) sum_pos += e;
    }
    return std::log(sum_all) - std::log(sum_pos);
}

double contrastive_loss_with_grad(int anchor, const std::vector<int>& pos,
                                  const std::vector<int>& neg, const nn::Tensor& codes, double tau,
                                  double scale, nn::Tensor& grads) {
    if (pos.empty()) throw InvalidArgument("contrastive_loss: empty positive set");
    if (tau <= 0.0) throw InvalidArgument("contrastive_loss: tau must be positive");
    const int d = codes.c;
    const float* zi = codes.sample(anchor);

    std::vector<int> all(pos);
    all.insert(all.end(), neg.begin(), neg.end());
    std::vector<CosSim> cs;
    cs.reserve(all.size());
    std::vector<double> s(all.size());
    for (size_t j = 0; j < all.size(); ++j) {
        cs.push_back(cosine(zi, codes.sample(all[j]), d));
        s[j] = cs[j].sim / tau;
    }
    double mx = s[0];
    for (double v : s) mx = std::max(mx, v);
    double sum_pos = 0.0, sum_all = 0.0;
    for (size_t j = 0; j < s.size(); ++j) {
        const double e = std::exp(s[j] - mx);
        sum_all += e;
        if (j < pos.size()) sum_pos += e;
    }
    const double loss = std::log(sum_all) - std::log(sum_pos);

    float* gi = grads.sample(anchor);
    for (size_t j = 0; j < all.size(); ++j) {
        const double e = std::exp(s[j] - mx);
        double dls = e / sum_all;  // d loss / d s_j
        if (j < pos.size()) dls -= e / sum_pos;
        const double dsim = scale * dls / tau;
        const float* zk = codes.sample(all[j]);
        float* gk = grads.sample(all[j]);
        const double inv_ik = 1.0 / (cs[j].norm_i * cs[j].norm_k);
        const double inv_i2 = 1.0 / (cs[j].norm_i * cs[j].norm_i);
        const double inv_k2 = 1.0 / (cs[j].norm_k * cs[j].norm_k);
        for (int t = 0; t < d; ++t) {
            gi[t] += static_cast<float>(dsim * (zk[t] * inv_ik - cs[j].sim * zi[t] * inv_i2));
            gk[t] += static_cast<float>(dsim * (zi[t] * inv_ik - cs[j].sim * zk[t] * inv_k2));
        }
    }
    return loss;
}

TotalLossResult total_loss(int B, int n_augs, const nn::Tensor& z_a, const nn::Tensor& z_c,
                           const std::vector<double>& ddim_losses, const LossWeights& weights) {
    nn::Tensor dummy_a(z_a.n, z_a.c, 1, 1), dummy_c(z_c.n, z_c.c, 1, 1);
    return total_loss_with_grad(B, n_augs, z_a, z_c, ddim_losses, weights, dummy_a, dummy_c);
}

TotalLossResult total_loss_with_grad(int B, int n_augs, const nn::Tensor& z_a,
                                     const nn::Tensor& z_c, const std::vector<double>& ddim_losses,
                                     const LossWeights& weights, nn::Tensor& dz_a,
                                     nn::Tensor& dz_c) {
    const int n_views = B * n_augs;
    if (z_a.n != n_views || z_c.n != n_views ||
        ddim_losses.size() != static_cast<size_t>(n_views))
        throw InvalidArgument("total_loss: length mismatch");
    TotalLossResult r;
    const double inv_n = 1.0 / static_cast<double>(n_views);
    for (int i = 0; i < n_views; ++i) {
        const PairSets ps = pair_sets(i, B, n_augs);
        const double la = contrastive_loss_with_grad(i, ps.P_a, ps.N_a, z_a, weights.tau,
                                                     weights.lambda_a * inv_n, dz_a);
        const double lc = contrastive_loss_with_grad(i, ps.P_c, ps.N_c, z_c, weights.tau,
                                                     weights.lambda_c * inv_n, dz_c);
        r.loss_a += la * inv_n;
        r.loss_c += lc * inv_n;
        r.ddim += ddim_losses[i] * inv_n;
    }
    r.total = r.ddim + weights.lambda_a * r.loss_a + weights.lambda_c * r.loss_c;
    return r;
}

// ---- SemanticEncoder ----

SemanticEncoder::SemanticEncoder(const EncoderConfig& cfg)
    : cfg_(cfg),
      to_sem_(cfg.base_width * 8, cfg.z_sem_dim),
      head_a_(cfg.z_sem_dim, cfg.d_a),
      head_c_(cfg.z_sem_dim, cfg.d_c) {
    const int w = cfg.base_width;
    const int widths[5] = {1, w, 2 * w, 4 * w, 8 * w};
    convs_.reserve(4);
    norms_.reserve(4);
    acts_.resize(4);
    for (int i = 0; i < 4; ++i) {
        convs_.emplace_back(widths[i], widths[i + 1], 3, /*stride=*/2);
        norms_.emplace_back(widths[i + 1]);
    }
}

void SemanticEncoder::init(Rng& rng) {
    for (auto& c : convs_) c.init(rng);
    to_sem_.init(rng);
    head_a_.init(rng);
    head_c_.init(rng);
}

SemanticEncoder::Output SemanticEncoder::forward(const nn::Tensor& x) {
    if (x.h != cfg_.image_size || x.w != cfg_.image_size || x.c != 1)
        throw InvalidArgument("encoder: input shape mismatch");
    nn::Tensor h = x;
    for (size_t i = 0; i < convs_.size(); ++i) {
        h = convs_[i].forward(h);
        h = norms_[i].forward(h);
        h = acts_[i].forward(h);
    }
    h = pool_.forward(h);
    Output out;
    out.z_sem = to_sem_.forward(h);
    out.z_a = head_a_.forward(out.z_sem);
    out.z_c = head_c_.forward(out.z_sem);
    return out;
}

void SemanticEncoder::backward(const nn::Tensor& dz_a, const nn::Tensor& dz_c) {
    nn::Tensor dsem = head_a_.backward(dz_a);
    nn::Tensor dsem_c = head_c_.backward(dz_c);
    for (size_t j = 0; j < dsem.size(); ++j) dsem.v[j] += dsem_c.v[j];
    nn::Tensor dh = to_sem_.backward(dsem);
    dh = pool_.backward(dh);
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
        dh = acts_[i].backward(dh);
        dh = norms_[i].backward(dh);
        dh = convs_[i].backward(dh);
    }
}

void SemanticEncoder::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
    for (size_t i = 0; i < convs_.size(); ++i) {
        convs_[i].visit(prefix + ".conv" + std::to_string(i), fn);
        norms_[i].visit(prefix + ".norm" + std::to_string(i), fn);
    }
    to_sem_.visit(prefix + ".to_sem", fn);
    head_a_.visit(prefix + ".head_a", fn);
    head_c_.visit(prefix + ".head_c", fn);
}

void SemanticEncoder::collect(std::vector<nn::Param*>& out) {
    visit("enc", [&](const std::string&, nn::Param& p) { out.push_back(&p); });
}

void SemanticEncoder::zero_grad() {
    visit("enc", [](const std::string&, nn::Param& p) { p.zero_grad(); });
}

nn::Tensor slice_to_tensor(const Slice& s) {
    nn::Tensor x(1, 1, s.h(), s.w());
    const Image2D m = masked_pixels(s);
    std::copy(m.v.begin(), m.v.end(), x.v.begin());
    return x;
}

}  // namespace harmon
