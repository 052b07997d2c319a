#pragma once

#include <cstddef>
#include <vector>

#include "cbfe/errors.hpp"

namespace cbfe {

// Construction-time normalization policy: inputs whose total mass deviates
// from 1 by at most kRenormLimit are renormalized; larger deviations are
// rejected. After construction sums hold to kNormTolerance.
inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kRenormLimit = 1e-9;

// Normalized probability distribution over a finite domain.
// Entries are non-negative and sum to one; immutable after construction.
class Categorical {
  public:
    explicit Categorical(std::vector<double> probs);

    static Categorical uniform(std::size_t n);
    static Categorical one_hot(std::size_t index, std::size_t n);

    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    const std::vector<double>& probs() const { return probs_; }

    // Index of the largest entry; the lowest index wins ties.
    std::size_t argmax() const;

    bool operator==(const Categorical&) const = default;

  private:
    std::vector<double> probs_;
};

// Degenerate belief: all mass on a single index of a finite domain.
struct PointMass {
    std::size_t index = 0;
    std::size_t domain = 0;

    PointMass() = default;
    PointMass(std::size_t index_, std::size_t domain_);

    Categorical to_categorical() const;

    bool operator==(const PointMass&) const = default;
};

// Column-stochastic matrix: column j is a conditional distribution over the
// row domain. Stored row-major; immutable after construction.
class StochasticMatrix {
  public:
    StochasticMatrix(std::size_t rows, std::size_t cols,
                     std::vector<double> row_major);
    explicit StochasticMatrix(const std::vector<std::vector<double>>& rows);

    static StochasticMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t r, std::size_t c) const {
        return data_[r * cols_ + c];
    }

    std::vector<double> column(std::size_t c) const;
    std::vector<double> row(std::size_t r) const;

    // M * v and M^T * v.
    std::vector<double> apply(const std::vector<double>& v) const;
    std::vector<double> apply_transposed(const std::vector<double>& v) const;

    std::vector<std::vector<double>> to_nested() const;

    bool operator==(const StochasticMatrix&) const = default;

  private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

// Shannon entropy in bits, with the 0 log 0 = 0 convention.
double entropy(const Categorical& p);

// KL divergence in bits. Returns +infinity when p puts mass where q has none.
double kl_divergence(const Categorical& p, const Categorical& q);

// Numerically stabilized softmax.
Categorical softmax(const std::vector<double>& scores);

// Kronecker product; the left factor is the major index:
// out[i * len(w) + j] = v[i] * w[j].
std::vector<double> kronecker(const std::vector<double>& v,
                              const std::vector<double>& w);
StochasticMatrix kronecker(const StochasticMatrix& a, const StochasticMatrix& b);

// Block-diagonal concatenation of column-stochastic blocks.
StochasticMatrix direct_sum(const std::vector<StochasticMatrix>& blocks);

}  // namespace cbfe
