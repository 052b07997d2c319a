#include "cbfe/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cbfe {

namespace {

const double kLog2 = std::log(2.0);

}  // namespace

Categorical::Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) {
        throw DimensionError("Categorical: empty probability vector");
    }
    double sum = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0)) {  // also rejects NaN
            throw ModelError("Categorical: negative or non-finite entry");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > kRenormLimit) {
        throw ModelError("Categorical: mass " + std::to_string(sum) +
                         " deviates from 1 beyond the renormalization limit");
    }
    for (double& p : probs_) p /= sum;
}

Categorical Categorical::uniform(std::size_t n) {
    if (n == 0) throw DimensionError("Categorical::uniform: empty domain");
    return Categorical(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Categorical Categorical::one_hot(std::size_t index, std::size_t n) {
    if (index >= n) throw DimensionError("Categorical::one_hot: index out of range");
    std::vector<double> v(n, 0.0);
    v[index] = 1.0;
    return Categorical(std::move(v));
}

std::size_t Categorical::argmax() const {
    return static_cast<std::size_t>(
        std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

PointMass::PointMass(std::size_t index_, std::size_t domain_)
    : index(index_), domain(domain_) {
    if (index >= domain) {
        throw DimensionError("PointMass: index out of domain range");
    }
}

Categorical PointMass::to_categorical() const {
    return Categorical::one_hot(index, domain);
}

StochasticMatrix::StochasticMatrix(std::size_t rows, std::size_t cols,
                                   std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (rows_ == 0 || cols_ == 0 || data_.size() != rows_ * cols_) {
        throw DimensionError("StochasticMatrix: shape does not match data");
    }
    for (std::size_t c = 0; c < cols_; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) {
            double v = data_[r * cols_ + c];
            if (!(v >= 0.0)) {
                throw ModelError("StochasticMatrix: negative or non-finite entry");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRenormLimit) {
            throw ModelError("StochasticMatrix: column " + std::to_string(c) +
                             " mass deviates from 1 beyond the renormalization limit");
        }
        for (std::size_t r = 0; r < rows_; ++r) data_[r * cols_ + c] /= sum;
    }
}

StochasticMatrix::StochasticMatrix(const std::vector<std::vector<double>>& rows)
    : StochasticMatrix(rows.size(), rows.empty() ? 0 : rows.front().size(), [&] {
          std::vector<double> flat;
          for (const auto& row : rows) {
              if (row.size() != rows.front().size()) {
                  throw DimensionError("StochasticMatrix: ragged rows");
              }
              flat.insert(flat.end(), row.begin(), row.end());
          }
          return flat;
      }()) {}

StochasticMatrix StochasticMatrix::identity(std::size_t n) {
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
    return StochasticMatrix(n, n, std::move(d));
}

std::vector<double> StochasticMatrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

std::vector<double> StochasticMatrix::row(std::size_t r) const {
    std::vector<double> out(cols_);
    for (std::size_t c = 0; c < cols_; ++c) out[c] = (*this)(r, c);
    return out;
}

std::vector<double> StochasticMatrix::apply(const std::vector<double>& v) const {
    if (v.size() != cols_) throw DimensionError("StochasticMatrix::apply: size mismatch");
    std::vector<double> out(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) acc += (*this)(r, c) * v[c];
        out[r] = acc;
    }
    return out;
}

std::vector<double> StochasticMatrix::apply_transposed(
    const std::vector<double>& v) const {
    if (v.size() != rows_) {
        throw DimensionError("StochasticMatrix::apply_transposed: size mismatch");
    }
    std::vector<double> out(cols_, 0.0);
    for (std::size_t c = 0; c < cols_; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) acc += (*this)(r, c) * v[r];
        out[c] = acc;
    }
    return out;
}

std::vector<std::vector<double>> StochasticMatrix::to_nested() const {
    std::vector<std::vector<double>> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = row(r);
    return out;
}

double entropy(const Categorical& p) {
    double nats = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double v = p[i];
        if (v > 0.0) nats -= v * std::log(v);
    }
    return std::max(nats, 0.0) / kLog2;
}

double kl_divergence(const Categorical& p, const Categorical& q) {
    if (p.size() != q.size()) {
        throw DimensionError("kl_divergence: distributions differ in length");
    }
    double nats = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
        nats += p[i] * std::log(p[i] / q[i]);
    }
    return nats / kLog2;
}

Categorical softmax(const std::vector<double>& scores) {
    if (scores.empty()) throw DimensionError("softmax: empty score vector");
    double top = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - top);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return Categorical(std::move(out));
}

std::vector<double> kronecker(const std::vector<double>& v,
                              const std::vector<double>& w) {
    std::vector<double> out;
    out.reserve(v.size() * w.size());
    for (double a : v) {
        for (double b : w) out.push_back(a * b);
    }
    return out;
}

StochasticMatrix kronecker(const StochasticMatrix& a, const StochasticMatrix& b) {
    std::size_t rows = a.rows() * b.rows();
    std::size_t cols = a.cols() * b.cols();
    std::vector<double> data(rows * cols, 0.0);
    for (std::size_t ra = 0; ra < a.rows(); ++ra) {
        for (std::size_t ca = 0; ca < a.cols(); ++ca) {
            for (std::size_t rb = 0; rb < b.rows(); ++rb) {
                for (std::size_t cb = 0; cb < b.cols(); ++cb) {
                    data[(ra * b.rows() + rb) * cols + (ca * b.cols() + cb)] =
                        a(ra, ca) * b(rb, cb);
                }
            }
        }
    }
    return StochasticMatrix(rows, cols, std::move(data));
}

StochasticMatrix direct_sum(const std::vector<StochasticMatrix>& blocks) {
    if (blocks.empty()) throw DimensionError("direct_sum: no blocks");
    std::size_t rows = 0, cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    std::vector<double> data(rows * cols, 0.0);
    std::size_t r0 = 0, c0 = 0;
    for (const auto& b : blocks) {
        for (std::size_t r = 0; r < b.rows(); ++r) {
            for (std::size_t c = 0; c < b.cols(); ++c) {
                data[(r0 + r) * cols + (c0 + c)] = b(r, c);
            }
        }
        r0 += b.rows();
        c0 += b.cols();
    }
    return StochasticMatrix(rows, cols, std::move(data));
}

}  // namespace cbfe
