#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vigil/errors.hpp"

namespace vigil {

using Embedding = std::vector<double>;

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("embedding dimension mismatch: " + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0))
    throw DegenerateInputError("cosine similarity of a zero (or non-finite) vector");
  const double s = dot / (std::sqrt(na) * std::sqrt(nb));
  if (!std::isfinite(s)) throw DegenerateInputError("cosine similarity is not finite");
  return std::clamp(s, -1.0, 1.0);
}

struct LabeledEmbedding {
  Embedding vector;
  std::string class_label;
};

// Rows are reference objects, columns generated objects. An empty entry
// marks a forbidden pair (class labels differ).
class SimilarityMatrix {
public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), cells_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  const std::optional<double>& at(std::size_t r, std::size_t c) const {
    return cells_[r * cols_ + c];
  }
  void set(std::size_t r, std::size_t c, std::optional<double> v) { cells_[r * cols_ + c] = v; }
  bool forbidden(std::size_t r, std::size_t c) const { return !at(r, c).has_value(); }

  bool operator==(const SimilarityMatrix&) const = default;

private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::optional<double>> cells_;
};

inline SimilarityMatrix build_similarity_matrix(std::span<const LabeledEmbedding> refs,
                                                std::span<const LabeledEmbedding> gens) {
  std::optional<std::size_t> dim;
  for (const auto* side : {&refs, &gens})
    for (const auto& e : *side) {
      if (!dim) dim = e.vector.size();
      if (e.vector.size() != *dim)
        throw ValidationError("embedding dimension mismatch in similarity matrix");
    }
  SimilarityMatrix m(refs.size(), gens.size());
  for (std::size_t i = 0; i < refs.size(); ++i)
    for (std::size_t j = 0; j < gens.size(); ++j)
      if (refs[i].class_label == gens[j].class_label)
        m.set(i, j, cosine_similarity(refs[i].vector, gens[j].vector));
  return m;
}

struct MatchedPair {
  std::size_t ref = 0;
  std::size_t gen = 0;
  double similarity = 0.0;
  bool operator==(const MatchedPair&) const = default;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;      // surviving, similarity > tau, by ref index
  std::vector<MatchedPair> rejected;   // assigned but similarity <= tau
  std::vector<std::size_t> omissions;  // refs without a surviving pair, ascending
  double tau = 0.0;
};

// Minimum-cost perfect assignment on a square matrix (Kuhn-Munkres with
// potentials, O(n^3)). Returns the column assigned to each row.
inline std::vector<std::size_t> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

namespace detail {

// Weight of a maximum-weight (not necessarily maximum-cardinality)
// matching restricted to the given rows and columns. Forbidden entries
// never participate. Reduced to a square assignment by giving every row
// and column a private zero-cost "unassigned" partner.
inline double max_partial_matching(const SimilarityMatrix& m, const std::vector<std::size_t>& rows,
                                   const std::vector<std::size_t>& cols) {
  const std::size_t r = rows.size(), c = cols.size();
  if (r == 0 || c == 0) return 0.0;
  double maxabs = 0.0;
  for (auto i : rows)
    for (auto j : cols)
      if (auto s = m.at(i, j)) maxabs = std::max(maxabs, std::abs(*s));
  const double big = 4.0 * static_cast<double>(r + c + 1) * (maxabs + 1.0);
  const std::size_t n = r + c;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, big));
  for (std::size_t a = 0; a < r; ++a) {
    for (std::size_t b = 0; b < c; ++b)
      if (auto s = m.at(rows[a], cols[b])) cost[a][b] = -*s;
    cost[a][c + a] = 0.0;
  }
  for (std::size_t b = 0; b < c; ++b) {
    cost[r + b][b] = 0.0;
    for (std::size_t d = 0; d < r; ++d) cost[r + b][c + d] = 0.0;
  }
  const auto assignment = hungarian_min_cost(cost);
  double total = 0.0;
  for (std::size_t a = 0; a < r; ++a)
    if (assignment[a] < c) total += *m.at(rows[a], cols[assignment[a]]);
  return total;
}

}  // namespace detail

inline constexpr double kMatchTieTolerance = 1e-9;

// Maximum total similarity over partial one-to-one assignments using
// allowed entries only. Among optimal assignments the pair list (sorted
// by ref index) that is lexicographically smallest is returned, a proper
// prefix ordering before its extensions.
inline std::vector<MatchedPair> optimal_assignment(const SimilarityMatrix& m) {
  const std::size_t n = m.rows(), k = m.cols();
  std::vector<std::size_t> all_rows(n), all_cols(k);
  for (std::size_t i = 0; i < n; ++i) all_rows[i] = i;
  for (std::size_t j = 0; j < k; ++j) all_cols[j] = j;
  const double best = detail::max_partial_matching(m, all_rows, all_cols);

  std::vector<MatchedPair> chosen;
  std::vector<char> col_used(k, 0);
  double weight = 0.0;
  std::size_t next_row = 0;
  while (weight < best - kMatchTieTolerance) {
    bool extended = false;
    for (std::size_t i = next_row; i < n && !extended; ++i) {
      std::vector<std::size_t> later_rows;
      for (std::size_t r = i + 1; r < n; ++r) later_rows.push_back(r);
      for (std::size_t j = 0; j < k && !extended; ++j) {
        if (col_used[j] || m.forbidden(i, j)) continue;
        std::vector<std::size_t> free_cols;
        for (std::size_t c = 0; c < k; ++c)
          if (!col_used[c] && c != j) free_cols.push_back(c);
        const double s = *m.at(i, j);
        const double reachable = weight + s + detail::max_partial_matching(m, later_rows, free_cols);
        if (reachable >= best - kMatchTieTolerance) {
          chosen.push_back({i, j, s});
          col_used[j] = 1;
          weight += s;
          next_row = i + 1;
          extended = true;
        }
      }
    }
    if (!extended) break;  // unreachable for a consistent solver
  }
  return chosen;
}

// Assign first, then keep only pairs with similarity strictly above tau.
inline MatchResult match_objects(const SimilarityMatrix& m, double tau) {
  if (!(tau >= -1.0 && tau <= 1.0)) throw ValidationError("tau must lie in [-1, 1]");
  MatchResult res;
  res.tau = tau;
  std::vector<char> paired(m.rows(), 0);
  for (const auto& p : optimal_assignment(m)) {
    if (p.similarity > tau) {
      res.pairs.push_back(p);
      paired[p.ref] = 1;
    } else {
      res.rejected.push_back(p);
    }
  }
  for (std::size_t i = 0; i < m.rows(); ++i)
    if (!paired[i]) res.omissions.push_back(i);
  return res;
}

}  // namespace vigil
