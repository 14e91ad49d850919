#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "anteriseg/imgcore.hpp"

namespace anteriseg::loss {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    static Matrix from_tensor(const Tensor32& t);
    Tensor32 to_tensor() const;
};

std::vector<double> l2_normalize(std::span<const double> v);

/// 2N embeddings; views of sample k sit at rows 2k and 2k+1.
struct EmbeddingBatch {
    Matrix z;
    double temperature = 0.5;

    std::size_t pairs() const { return z.rows / 2; }
};

struct NtXentOptions {
    /// Inputs are raw; normalize internally and chain the gradient through
    /// the normalization Jacobian.
    bool through_normalization = false;
    /// Reject inputs whose norms deviate from 1 by more than 1e-6. Ignored
    /// when through_normalization is set.
    bool check_normalized = true;
};

struct LossResult {
    double loss = 0;
    Matrix grad;  // same shape as the input
};

/// Mean over all 2N anchors of -log softmax similarity of the positive view,
/// excluding self-similarity from the denominator.
LossResult nt_xent(const EmbeddingBatch& batch, const NtXentOptions& opts = {});

struct ClassWeights {
    std::vector<double> weights;
    std::vector<std::size_t> counts;
    std::size_t total = 0;
};

/// w_c = N / (C * n_c)
ClassWeights class_weights(std::span<const std::size_t> counts);

/// Mean over samples of w_{y} * -log softmax(logits)_{y}; gradient w.r.t.
/// logits. logits is [samples x classes].
LossResult weighted_ce(const Matrix& logits, std::span<const std::size_t> labels, std::span<const double> weights);

struct ToyTrainConfig {
    std::size_t samples = 200;
    std::size_t input_dim = 8;
    std::size_t embed_dim = 4;
    std::size_t clusters = 4;
    std::size_t epochs = 10;
    std::size_t batch_pairs = 64;
    double lr = 1e-2;
    double temperature = 0.5;
    double view_noise = 0.3;
    std::uint64_t seed = 0;
};

/// Linear projection trained by gradient descent on NT-Xent over fixed
/// noisy view pairs of clustered synthetic vectors. Returns one value per
/// epoch: the mean of that epoch's batch losses, each taken before its step.
std::vector<double> toy_contrastive_train(const ToyTrainConfig& cfg);

}  // namespace anteriseg::loss
