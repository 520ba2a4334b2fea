#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lungforge {

/// 2N embeddings of dimension D, row-major. Rows 2k and 2k+1 (zero-based)
/// are the two views of source image k.
struct EmbeddingBatch {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  EmbeddingBatch() = default;
  EmbeddingBatch(std::size_t r, std::size_t d, std::vector<double> values);
  [[nodiscard]] std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  [[nodiscard]] std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
};

/// -log(exp(sim(z_i, z_j)/tau) / sum_{k != i} exp(sim(z_i, z_k)/tau)) with
/// cosine similarity. Indices are zero-based.
///
/// Throws ParameterError for tau <= 0, i == j or indices out of range and
/// DegenerateInputError for a zero-norm embedding.
double ntxent_pair_loss(const EmbeddingBatch& z, std::size_t i, std::size_t j, double tau);

/// Mean of l(2k, 2k+1) and l(2k+1, 2k) over all pairs. Throws
/// DimensionError for an odd or zero row count.
double ntxent_batch_loss(const EmbeddingBatch& z, double tau);

struct NtXentGrad {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as EmbeddingBatch::data
};

NtXentGrad ntxent_batch_loss_grad(const EmbeddingBatch& z, double tau);

}  // namespace lungforge
