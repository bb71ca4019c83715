#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace protodetect {

// Dense real vector. Used for raw proposal features, embeddings and
// prototypes alike.
class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vec(std::initializer_list<double> values) : data_(values) {}
  explicit Vec(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t dim() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  Vec& operator+=(const Vec& other);
  Vec& operator-=(const Vec& other);
  Vec& operator*=(double scale);

  // this += scale * other
  Vec& add_scaled(const Vec& other, double scale);

  bool operator==(const Vec&) const = default;

 private:
  std::vector<double> data_;
};

Vec operator+(Vec lhs, const Vec& rhs);
Vec operator-(Vec lhs, const Vec& rhs);
Vec operator*(double scale, Vec v);

// Row-major dense matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(const Vec& a, const Vec& b);
double dot(std::span<const double> a, std::span<const double> b);
double sq_euclidean(const Vec& a, const Vec& b);
double squared_norm(const Vec& v);

// m * x
Vec matvec(const Mat& m, const Vec& x);
// transpose(m) * y
Vec matvec_transposed(const Mat& m, const Vec& y);
// m += scale * outer(a, b)
void add_outer(Mat& m, const Vec& a, const Vec& b, double scale = 1.0);

bool all_finite(std::span<const double> values);

// Numerically stable log(sum(exp(x))). Throws NumericError on non-finite input.
double log_sum_exp(std::span<const double> logits);
Vec softmax(const Vec& logits);
Vec log_softmax(const Vec& logits);

// Mean of equally sized vectors. Throws on an empty set.
Vec mean_of(std::span<const Vec> vectors);

// xoshiro256** seeded through splitmix64. The stream is a pure function of
// the seed. Normal deviates go through Box-Muller on libm log/sqrt/cos, so
// bit-identical normals across machines additionally assume the same libm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev);

  // Derive an independent generator; the parent advances by one draw.
  Rng split();

 private:
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Fisher-Yates shuffle driven by Rng.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(items[i - 1], items[j]);
  }
}

// 64-bit FNV-1a over bytes, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::span<const char> bytes);
std::string hex_digest(std::uint64_t value);

}  // namespace protodetect
