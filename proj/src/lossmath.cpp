#include "anteriseg/lossmath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "anteriseg/error.hpp"
#include "anteriseg/rng.hpp"

namespace anteriseg::loss {

Matrix Matrix::from_tensor(const Tensor32& t) {
    require(t.rank() == 2, "expected a rank-2 tensor");
    Matrix m(t.dim(0), t.dim(1));
    for (std::size_t i = 0; i < t.size(); ++i) m.data[i] = t[i];
    return m;
}

Tensor32 Matrix::to_tensor() const {
    std::vector<float> v(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) v[i] = static_cast<float>(data[i]);
    return Tensor32({rows, cols}, std::move(v));
}

std::vector<double> l2_normalize(std::span<const double> v) {
    double norm2 = 0;
    for (double x : v) norm2 += x * x;
    require(norm2 > 0 && std::isfinite(norm2), "cannot normalize a zero vector");
    const double inv = 1.0 / std::sqrt(norm2);
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x *= inv;
    return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

LossResult nt_xent(const EmbeddingBatch& batch, const NtXentOptions& opts) {
    const Matrix& z = batch.z;
    require(z.rows >= 2 && z.rows % 2 == 0, "NT-Xent needs N >= 1 pairs (2N rows)");
    require(z.cols >= 1, "embeddings must have positive dimension");
    require(batch.temperature > 0, "temperature must be positive");
    const std::size_t n2 = z.rows, d = z.cols;
    const double inv_tau = 1.0 / batch.temperature;

    Matrix u = z;
    std::vector<double> norms(n2, 1.0);
    for (std::size_t i = 0; i < n2; ++i) {
        const double norm = std::sqrt(dot(z.row(i), z.row(i)));
        require(std::isfinite(norm), "embeddings must be finite");
        if (opts.through_normalization) {
            require(norm > 0, "cannot normalize a zero embedding");
            norms[i] = norm;
            for (std::size_t c = 0; c < d; ++c) u(i, c) = z(i, c) / norm;
        } else if (opts.check_normalized) {
            require(std::fabs(norm - 1.0) <= 1e-6, "embeddings must be L2-normalized");
        }
    }

    Matrix sim(n2, n2);
    for (std::size_t i = 0; i < n2; ++i)
        for (std::size_t k = i; k < n2; ++k) sim(i, k) = sim(k, i) = dot(u.row(i), u.row(k)) * inv_tau;

    LossResult out{0.0, Matrix(n2, d)};
    Matrix& g = out.grad;
    const double scale = 1.0 / static_cast<double>(n2);
    std::vector<double> prob(n2);
    for (std::size_t i = 0; i < n2; ++i) {
        const std::size_t pos = i ^ 1;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n2; ++k)
            if (k != i) mx = std::max(mx, sim(i, k));
        double sum = 0;
        for (std::size_t k = 0; k < n2; ++k)
            if (k != i) sum += std::exp(sim(i, k) - mx);
        const double lse = mx + std::log(sum);
        out.loss += (lse - sim(i, pos)) * scale;

        for (std::size_t k = 0; k < n2; ++k) prob[k] = k == i ? 0.0 : std::exp(sim(i, k) - lse);
        // d/du_i and d/du_k of this anchor's term.
        for (std::size_t k = 0; k < n2; ++k) {
            if (k == i) continue;
            const double coeff = (prob[k] - (k == pos ? 1.0 : 0.0)) * inv_tau * scale;
            if (coeff == 0.0) continue;
            for (std::size_t c = 0; c < d; ++c) {
                g(i, c) += coeff * u(k, c);
                g(k, c) += coeff * u(i, c);
            }
        }
    }

    if (opts.through_normalization) {
        for (std::size_t i = 0; i < n2; ++i) {
            const double proj = dot(g.row(i), u.row(i));
            for (std::size_t c = 0; c < d; ++c) g(i, c) = (g(i, c) - proj * u(i, c)) / norms[i];
        }
    }
    return out;
}

ClassWeights class_weights(std::span<const std::size_t> counts) {
    require(!counts.empty(), "class_weights needs at least one class");
    ClassWeights w;
    w.counts.assign(counts.begin(), counts.end());
    w.total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    const double c = static_cast<double>(counts.size());
    for (std::size_t n : counts) {
        require(n > 0, "class count must be positive");
        w.weights.push_back(static_cast<double>(w.total) / (c * static_cast<double>(n)));
    }
    return w;
}

LossResult weighted_ce(const Matrix& logits, std::span<const std::size_t> labels, std::span<const double> weights) {
    require(logits.rows == labels.size(), "one label per logit row required");
    require(logits.rows > 0, "weighted_ce needs at least one sample");
    require(weights.size() == logits.cols, "one weight per class required");
    LossResult out{0.0, Matrix(logits.rows, logits.cols)};
    const double scale = 1.0 / static_cast<double>(logits.rows);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const std::size_t y = labels[i];
        require(y < logits.cols, "label out of range");
        const auto row = logits.row(i);
        for (double v : row) require(std::isfinite(v), "logits must be finite");
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0;
        for (double v : row) sum += std::exp(v - mx);
        const double lse = mx + std::log(sum);
        out.loss += weights[y] * (lse - row[y]) * scale;
        for (std::size_t c = 0; c < logits.cols; ++c) {
            const double p = std::exp(row[c] - lse);
            out.grad(i, c) = weights[y] * (p - (c == y ? 1.0 : 0.0)) * scale;
        }
    }
    return out;
}

std::vector<double> toy_contrastive_train(const ToyTrainConfig& cfg) {
    require(cfg.lr >= 0 && std::isfinite(cfg.lr), "learning rate must be non-negative");
    require(cfg.samples >= 2, "toy training needs at least two samples");
    require(cfg.input_dim >= 1 && cfg.embed_dim >= 1 && cfg.clusters >= 1 && cfg.batch_pairs >= 1,
            "toy training dimensions must be positive");
    Rng rng(cfg.seed);
    const std::size_t din = cfg.input_dim, dout = cfg.embed_dim;

    Matrix centres(cfg.clusters, din);
    for (double& v : centres.data) v = rng.normal(0.0, 3.0);
    Matrix views(2 * cfg.samples, din);
    for (std::size_t s = 0; s < cfg.samples; ++s) {
        std::vector<double> base(din);
        for (std::size_t c = 0; c < din; ++c) base[c] = centres(s % cfg.clusters, c) + rng.normal(0.0, 0.5);
        for (std::size_t v = 0; v < 2; ++v)
            for (std::size_t c = 0; c < din; ++c) views(2 * s + v, c) = base[c] + rng.normal(0.0, cfg.view_noise);
    }
    Matrix weight(dout, din);
    for (double& v : weight.data) v = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(din)));

    std::vector<double> trace;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < cfg.samples; start += cfg.batch_pairs) {
            const std::size_t pairs = std::min(cfg.batch_pairs, cfg.samples - start);
            const std::size_t rows = 2 * pairs;
            EmbeddingBatch batch{Matrix(rows, dout), cfg.temperature};
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t o = 0; o < dout; ++o)
                    batch.z(r, o) = dot(weight.row(o), views.row(2 * start + r));
            const LossResult res = nt_xent(batch, {.through_normalization = true});
            epoch_loss += res.loss;
            ++batches;
            if (cfg.lr == 0) continue;
            for (std::size_t o = 0; o < dout; ++o)
                for (std::size_t c = 0; c < din; ++c) {
                    double gw = 0;
                    for (std::size_t r = 0; r < rows; ++r) gw += res.grad(r, o) * views(2 * start + r, c);
                    weight(o, c) -= cfg.lr * gw;
                }
        }
        trace.push_back(epoch_loss / static_cast<double>(batches));
    }
    return trace;
}

}  // namespace anteriseg::loss
