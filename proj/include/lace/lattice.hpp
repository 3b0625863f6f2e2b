#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace lace {

inline constexpr int kMaxDim = 12;

// Point of Z^d with inline storage. Pair points (x, y) live in Z^{2d}.
class LatticePoint {
 public:
  LatticePoint() = default;
  explicit LatticePoint(int dim);
  LatticePoint(std::initializer_list<int> coords);
  explicit LatticePoint(const std::vector<int>& coords);

  static LatticePoint origin(int dim) { return LatticePoint(dim); }
  // sign * e_axis (axis is 0-based).
  static LatticePoint unit(int dim, int axis, int sign = 1);

  int dim() const { return dim_; }
  int operator[](int i) const { return c_[i]; }
  int& operator[](int i) { return c_[i]; }

  LatticePoint& operator+=(const LatticePoint& o);
  LatticePoint& operator-=(const LatticePoint& o);
  friend LatticePoint operator+(LatticePoint a, const LatticePoint& b) { return a += b; }
  friend LatticePoint operator-(LatticePoint a, const LatticePoint& b) { return a -= b; }
  LatticePoint operator-() const;

  friend bool operator==(const LatticePoint& a, const LatticePoint& b);
  // Lexicographic in the coordinates; shorter dimension sorts first.
  friend std::strong_ordering operator<=>(const LatticePoint& a, const LatticePoint& b);

  long sup_norm() const;
  long l1_norm() const;
  double norm() const;
  double dot(const Eigen::VectorXd& k) const;
  Eigen::VectorXd to_vector() const;
  std::vector<int> coords() const;

  // (this, other) as a point of Z^{dim + other.dim}.
  LatticePoint join(const LatticePoint& other) const;
  LatticePoint head(int n) const;
  LatticePoint tail(int n) const;

  std::size_t hash() const;
  std::string str() const;

 private:
  std::array<std::int32_t, kMaxDim> c_{};
  std::int32_t dim_ = 0;
};

struct LatticePointHash {
  std::size_t operator()(const LatticePoint& p) const { return p.hash(); }
};

std::ostream& operator<<(std::ostream& os, const LatticePoint& p);

// Finite-support real function on Z^d. Entries are kept in lexicographic
// order; every sum over the support runs in that order.
class SignedField {
 public:
  using Map = std::map<LatticePoint, double>;

  explicit SignedField(int dim = 1) : dim_(dim) {}
  SignedField(int dim, Map entries);

  static SignedField delta(const LatticePoint& x, double weight = 1.0);

  int dim() const { return dim_; }
  const Map& entries() const& { return entries_; }
  // Temporaries hand over their storage so range-for over a returned field is safe.
  Map entries() && { return std::move(entries_); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  double at(const LatticePoint& x) const;
  void add(const LatticePoint& x, double w);
  void set(const LatticePoint& x, double w);

  // Drops entries with |w| < tol (and exact zeros). Never called implicitly.
  SignedField& normalize(double tol = 1e-15);

  double total_abs() const;
  double max_abs() const;
  long support_radius() const;

  SignedField shifted(const LatticePoint& v) const;
  SignedField scaled(double a) const;
  SignedField& operator+=(const SignedField& o);
  SignedField& operator-=(const SignedField& o);
  friend SignedField operator+(SignedField a, const SignedField& b) { return a += b; }
  friend SignedField operator-(SignedField a, const SignedField& b) { return a -= b; }

  // For a field on Z^{2d} holding f(x, y): y -> sum_x f(x, y).
  SignedField pair_marginal() const;
  // For a field on Z^{2d}: x -> sum_y f(x, y).
  SignedField pair_row_sums() const;

  nlohmann::json to_json() const;
  static SignedField from_json(const nlohmann::json& j);
  std::string to_csv() const;

 private:
  void check_dim(const LatticePoint& x) const;

  int dim_;
  Map entries_;
};

// max over the union of supports of |f - g|.
double max_abs_difference(const SignedField& f, const SignedField& g);

struct FourierValue {
  Eigen::VectorXd k;
  std::complex<double> value;
  bool outside_zone = false;  // some |k_i| > pi
};

struct Moments {
  double mass = 0.0;
  Eigen::VectorXd first;
  Eigen::MatrixXd second;
};

SignedField convolve(const SignedField& f, const SignedField& g);
FourierValue fourier_eval(const SignedField& f, const Eigen::VectorXd& k);
Moments moments(const SignedField& f);

}  // namespace lace
