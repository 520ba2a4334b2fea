#include "lungforge/ntxent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lungforge/errors.hpp"

namespace lungforge {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw_parameter("temperature must be positive");
}

void check_batch(const EmbeddingBatch& z) {
  if (z.rows == 0 || z.rows % 2 != 0) throw_dimension("embedding batch needs an even, non-zero row count");
}

/// Unit-normalized rows together with the original norms.
struct Normalized {
  std::vector<double> u;
  std::vector<double> norm;
};

Normalized normalize(const EmbeddingBatch& z) {
  Normalized n{std::vector<double>(z.data.size()), std::vector<double>(z.rows)};
  for (std::size_t i = 0; i < z.rows; ++i) {
    double s = 0.0;
    for (double v : z.row(i)) s += v * v;
    const double len = std::sqrt(s);
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw DegenerateInputError("embedding row " + std::to_string(i) + " has zero norm");
    }
    n.norm[i] = len;
    const auto r = z.row(i);
    for (std::size_t d = 0; d < z.dim; ++d) n.u[i * z.dim + d] = r[d] / len;
  }
  return n;
}

/// Scaled similarity matrix s_ik = u_i . u_k / tau.
std::vector<double> similarities(const Normalized& n, std::size_t rows, std::size_t dim, double tau) {
  std::vector<double> s(rows * rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = i; k < rows; ++k) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += n.u[i * dim + d] * n.u[k * dim + d];
      s[i * rows + k] = s[k * rows + i] = dot / tau;
    }
  }
  return s;
}

/// log sum_{k != i} exp(s_ik), computed stably.
double log_denominator(const std::vector<double>& s, std::size_t rows, std::size_t i) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < rows; ++k) {
    if (k != i) mx = std::max(mx, s[i * rows + k]);
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < rows; ++k) {
    if (k != i) acc += std::exp(s[i * rows + k] - mx);
  }
  return mx + std::log(acc);
}

std::size_t partner(std::size_t i) { return i ^ 1U; }

}  // namespace

EmbeddingBatch::EmbeddingBatch(std::size_t r, std::size_t d, std::vector<double> values)
    : rows(r), dim(d), data(std::move(values)) {
  if (data.size() != rows * dim) throw_dimension("embedding values do not match rows x dim");
}

double ntxent_pair_loss(const EmbeddingBatch& z, std::size_t i, std::size_t j, double tau) {
  check_tau(tau);
  if (i == j) throw_parameter("pair indices must differ");
  if (i >= z.rows || j >= z.rows) throw_parameter("pair index out of range");
  const Normalized n = normalize(z);
  const auto s = similarities(n, z.rows, z.dim, tau);
  return log_denominator(s, z.rows, i) - s[i * z.rows + j];
}

double ntxent_batch_loss(const EmbeddingBatch& z, double tau) {
  return ntxent_batch_loss_grad(z, tau).loss;
}

NtXentGrad ntxent_batch_loss_grad(const EmbeddingBatch& z, double tau) {
  check_tau(tau);
  check_batch(z);
  const std::size_t rows = z.rows;
  const std::size_t dim = z.dim;
  const Normalized n = normalize(z);
  const auto s = similarities(n, rows, dim, tau);

  // g_ik = dL/ds_ik, accumulated over the term l(i, partner(i)) of each row.
  std::vector<double> g(rows * rows, 0.0);
  double loss = 0.0;
  const double w = 1.0 / static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double lse = log_denominator(s, rows, i);
    loss += w * (lse - s[i * rows + partner(i)]);
    for (std::size_t k = 0; k < rows; ++k) {
      if (k != i) g[i * rows + k] += w * std::exp(s[i * rows + k] - lse);
    }
    g[i * rows + partner(i)] -= w;
  }

  // s_ik = u_i . u_k / tau contributes to both u_i and u_k.
  std::vector<double> du(rows * dim, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < rows; ++k) {
      const double gik = g[i * rows + k] / tau;
      if (gik == 0.0) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        du[i * dim + d] += gik * n.u[k * dim + d];
        du[k * dim + d] += gik * n.u[i * dim + d];
      }
    }
  }

  // Through u = z / |z|: dz = (du - u (u . du)) / |z|.
  NtXentGrad out{loss, std::vector<double>(rows * dim)};
  for (std::size_t i = 0; i < rows; ++i) {
    double proj = 0.0;
    for (std::size_t d = 0; d < dim; ++d) proj += n.u[i * dim + d] * du[i * dim + d];
    for (std::size_t d = 0; d < dim; ++d) {
      out.grad[i * dim + d] = (du[i * dim + d] - n.u[i * dim + d] * proj) / n.norm[i];
    }
  }
  return out;
}

}  // namespace lungforge
