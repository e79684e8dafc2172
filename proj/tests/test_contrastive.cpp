#include <doctest.h>

#include <cmath>
#include <set>

#include "harmon/disentangle.hpp"

using namespace harmon;
using nn::Tensor;

namespace {

double cosine_ref(const Tensor& codes, int i, int k) {
    const int d = codes.c;
    double dot = 0, ni = 0, nk = 0;
    for (int j = 0; j < d; ++j) {
        const double a = codes.at(i, j, 0, 0), b = codes.at(k, j, 0, 0);
        dot += a * b;
        ni += a * a;
        nk += b * b;
    }
    return dot / (std::sqrt(ni) * std::sqrt(nk));
}

// Naive double-loop reference for the contrastive loss.
double naive_loss(int anchor, const std::vector<int>& pos, const std::vector<int>& neg,
                  const Tensor& codes, double tau) {
    double num = 0.0;
    for (int k : pos) num += std::exp(cosine_ref(codes, anchor, k) / tau);
    double den = num;
    for (int k : neg) den += std::exp(cosine_ref(codes, anchor, k) / tau);
    return -std::log(num / den);
}

Tensor random_codes(int n, int d, Rng& rng) {
    Tensor t(n, d, 1, 1);
    for (auto& v : t.v) v = static_cast<float>(rng.normal());
    return t;
}

// Codes engineered so that sim(anchor, pos) = 1 and sim(anchor, neg) = 0.
Tensor orthogonal_codes() {
    Tensor t(3, 2, 1, 1);
    t.at(0, 0, 0, 0) = 1.f;  // anchor
    t.at(1, 0, 0, 0) = 2.f;  // positive, parallel
    t.at(2, 1, 0, 0) = 1.f;  // negative, orthogonal
    return t;
}

}  // namespace

TEST_CASE("contrastive loss matches the naive oracle to 1e-9") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 4 + static_cast<int>(rng.next_below(78));  // up to 81 views
        const Tensor codes = random_codes(n, 16, rng);
        const int anchor = static_cast<int>(rng.next_below(n));
        std::vector<int> pos, neg;
        for (int k = 0; k < n; ++k) {
            if (k == anchor) continue;
            (rng.uniform() < 0.5 ? pos : neg).push_back(k);
        }
        if (pos.empty()) pos.push_back((anchor + 1) % n);
        const double tau = 0.05 + rng.uniform() * 0.95;
        CHECK(std::abs(contrastive_loss(anchor, pos, neg, codes, tau) -
                       naive_loss(anchor, pos, neg, codes, tau)) < 1e-9);
    }
}

TEST_CASE("closed-form cases") {
    const Tensor codes = orthogonal_codes();
    // neg empty -> numerator equals denominator -> exactly 0
    CHECK(contrastive_loss(0, {1}, {}, codes, 1.0) == 0.0);
    // sim 1 vs sim 0, tau = 1: -log(e/(e+1)) ~ 0.31326
    CHECK(contrastive_loss(0, {1}, {2}, codes, 1.0) == doctest::Approx(0.31326).epsilon(1e-5));
    // same sims, tau = 0.5: -log(e^2/(e^2+1)) ~ 0.12693
    CHECK(contrastive_loss(0, {1}, {2}, codes, 0.5) == doctest::Approx(0.12693).epsilon(1e-5));
}

TEST_CASE("loss preconditions") {
    const Tensor codes = orthogonal_codes();
    CHECK_THROWS_AS(contrastive_loss(0, {}, {2}, codes, 1.0), InvalidArgument);
    CHECK_THROWS_AS(contrastive_loss(0, {1}, {2}, codes, 0.0), InvalidArgument);
    Tensor zero(2, 2, 1, 1);
    zero.at(1, 0, 0, 0) = 1.f;
    CHECK_THROWS_AS(contrastive_loss(0, {1}, {}, zero, 1.0), InvalidArgument);
}

TEST_CASE("loss is nonnegative and scale invariant") {
    Rng rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor codes = random_codes(6, 8, rng);
        const double l = contrastive_loss(0, {1, 2}, {3, 4, 5}, codes, 0.1);
        CHECK(l >= 0.0);
        const double c = 0.1 + rng.uniform() * 10.0;
        Tensor scaled = codes;
        for (int j = 0; j < 8; ++j) scaled.at(2, j, 0, 0) *= static_cast<float>(c);
        CHECK(std::abs(contrastive_loss(0, {1, 2}, {3, 4, 5}, scaled, 0.1) - l) < 1e-6);
    }
}

TEST_CASE("pair sets match brute-force enumeration for all B, n_augs in [2,9]") {
    for (int B = 2; B <= 9; ++B)
        for (int n_augs = 2; n_augs <= 9; ++n_augs)
            for (int i = 0; i < B * n_augs; ++i) {
                const PairSets ps = pair_sets(i, B, n_augs);
                const int si = i / n_augs, ai = i % n_augs;
                std::set<int> pa, na, pc, nc;
                for (int j = 0; j < B * n_augs; ++j) {
                    if (j == i) continue;
                    const int sj = j / n_augs, aj = j % n_augs;
                    if (sj == si && aj != ai) {
                        pa.insert(j);
                        nc.insert(j);
                    }
                    if (sj != si && aj == ai) {
                        na.insert(j);
                        pc.insert(j);
                    }
                }
                CHECK(std::set<int>(ps.P_a.begin(), ps.P_a.end()) == pa);
                CHECK(std::set<int>(ps.N_a.begin(), ps.N_a.end()) == na);
                CHECK(std::set<int>(ps.P_c.begin(), ps.P_c.end()) == pc);
                CHECK(std::set<int>(ps.N_c.begin(), ps.N_c.end()) == nc);
                CHECK(ps.P_a.size() == static_cast<size_t>(n_augs - 1));
                CHECK(ps.N_a.size() == static_cast<size_t>(B - 1));
                CHECK(ps.P_c.size() == static_cast<size_t>(B - 1));
                CHECK(ps.N_c.size() == static_cast<size_t>(n_augs - 1));
            }
    CHECK(pair_sets(0, 9, 9).P_a.size() == 8);  // 81-view configuration
    CHECK_THROWS_AS(pair_sets(0, 1, 4), InvalidArgument);
    CHECK_THROWS_AS(pair_sets(0, 4, 1), InvalidArgument);
}

TEST_CASE("pair set symmetry") {
    const int B = 4, n_augs = 3;
    for (int i = 0; i < B * n_augs; ++i) {
        const PairSets pi = pair_sets(i, B, n_augs);
        for (int j : pi.P_a) {
            const PairSets pj = pair_sets(j, B, n_augs);
            CHECK(std::count(pj.P_a.begin(), pj.P_a.end(), i) == 1);
        }
        for (int j : pi.N_a) {
            const PairSets pj = pair_sets(j, B, n_augs);
            CHECK(std::count(pj.N_a.begin(), pj.N_a.end(), i) == 1);
        }
    }
}

TEST_CASE("B=2 n_augs=2 worked example") {
    const PairSets ps = pair_sets(0, 2, 2);
    CHECK(ps.P_a == std::vector<int>{1});
    CHECK(ps.N_a == std::vector<int>{2});
    CHECK(ps.P_c == std::vector<int>{2});
    CHECK(ps.N_c == std::vector<int>{1});
    // flat 3 (other subject, other aug) appears in no set of anchor 0
}

TEST_CASE("total loss reduces to mean ddim under zero weights") {
    Rng rng(17);
    const int B = 3, n_augs = 3;
    const Tensor z_a = random_codes(B * n_augs, 8, rng);
    const Tensor z_c = random_codes(B * n_augs, 8, rng);
    std::vector<double> ddim(B * n_augs);
    double mean = 0.0;
    for (auto& d : ddim) {
        d = rng.uniform();
        mean += d;
    }
    mean /= ddim.size();
    LossWeights w;
    w.lambda_a = w.lambda_c = 0.0;
    const TotalLossResult r = total_loss(B, n_augs, z_a, z_c, ddim, w);
    CHECK(r.total == doctest::Approx(mean).epsilon(1e-9));
    CHECK(r.ddim == doctest::Approx(mean).epsilon(1e-9));
    CHECK(r.loss_a > 0.0);  // still reported even with zero weight
}

TEST_CASE("identical codes give the closed-form set-ratio loss") {
    const int B = 9, n_augs = 9;
    Tensor z(B * n_augs, 4, 1, 1);
    for (int i = 0; i < B * n_augs; ++i) {
        z.at(i, 0, 0, 0) = 1.f;
        z.at(i, 1, 0, 0) = 2.f;
    }
    const std::vector<double> ddim(B * n_augs, 0.0);
    LossWeights w;  // defaults 0.5 / 0.5
    const TotalLossResult r = total_loss(B, n_augs, z, z, ddim, w);
    // all sims 1: each term is -log(|P|/(|P|+|N|)) = log 2 with |P|=|N|=8
    CHECK(r.loss_a == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(r.loss_c == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(r.total == doctest::Approx(0.5 * std::log(2.0) * 2).epsilon(1e-6));
}

TEST_CASE("analytic gradients match central differences on a 4-view batch") {
    Rng rng(19);
    const int B = 2, n_augs = 2, d = 6;
    Tensor z_a = random_codes(B * n_augs, d, rng);
    Tensor z_c = random_codes(B * n_augs, d, rng);
    const std::vector<double> ddim(B * n_augs, 0.3);
    LossWeights w;

    Tensor dz_a(B * n_augs, d, 1, 1), dz_c(B * n_augs, d, 1, 1);
    total_loss_with_grad(B, n_augs, z_a, z_c, ddim, w, dz_a, dz_c);

    const double h = 1e-4;
    double worst = 0.0;
    for (size_t i = 0; i < z_a.size(); ++i) {
        for (Tensor* codes : {&z_a, &z_c}) {
            Tensor& dz = codes == &z_a ? dz_a : dz_c;
            const float orig = codes->v[i];
            const float vp = orig + static_cast<float>(h);
            const float vm = orig - static_cast<float>(h);
            codes->v[i] = vp;
            const double lp = total_loss(B, n_augs, z_a, z_c, ddim, w).total;
            codes->v[i] = vm;
            const double lm = total_loss(B, n_augs, z_a, z_c, ddim, w).total;
            codes->v[i] = orig;
            // divide by the step actually realized in float32 storage
            const double fd = (lp - lm) / (static_cast<double>(vp) - vm);
            const double rel =
                std::abs(fd - dz.v[i]) / std::max({std::abs(fd), std::abs(static_cast<double>(dz.v[i])), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst <= 1e-3);
}
