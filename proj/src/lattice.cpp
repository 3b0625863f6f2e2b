#include "lace/lattice.hpp"

#include "lace/errors.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace lace {

namespace {

void check_range(int dim) {
  if (dim < 0 || dim > kMaxDim)
    throw ConfigError("lattice dimension " + std::to_string(dim) + " outside [0, " +
                      std::to_string(kMaxDim) + "]");
}

void same_dim(int a, int b, const char* what) {
  if (a != b)
    throw ConfigError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                      std::to_string(b) + ")");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

LatticePoint::LatticePoint(int dim) : dim_(dim) { check_range(dim); }

LatticePoint::LatticePoint(std::initializer_list<int> coords)
    : dim_(static_cast<std::int32_t>(coords.size())) {
  check_range(dim_);
  int i = 0;
  for (int v : coords) c_[i++] = v;
}

LatticePoint::LatticePoint(const std::vector<int>& coords)
    : dim_(static_cast<std::int32_t>(coords.size())) {
  check_range(dim_);
  for (int i = 0; i < dim_; ++i) c_[i] = coords[i];
}

LatticePoint LatticePoint::unit(int dim, int axis, int sign) {
  LatticePoint p(dim);
  if (axis < 0 || axis >= dim) throw ConfigError("unit vector axis out of range");
  p.c_[axis] = sign;
  return p;
}

LatticePoint& LatticePoint::operator+=(const LatticePoint& o) {
  same_dim(dim_, o.dim_, "lattice addition");
  for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
  return *this;
}

LatticePoint& LatticePoint::operator-=(const LatticePoint& o) {
  same_dim(dim_, o.dim_, "lattice subtraction");
  for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
  return *this;
}

LatticePoint LatticePoint::operator-() const {
  LatticePoint p(*this);
  for (int i = 0; i < dim_; ++i) p.c_[i] = -p.c_[i];
  return p;
}

bool operator==(const LatticePoint& a, const LatticePoint& b) {
  if (a.dim_ != b.dim_) return false;
  for (int i = 0; i < a.dim_; ++i)
    if (a.c_[i] != b.c_[i]) return false;
  return true;
}

std::strong_ordering operator<=>(const LatticePoint& a, const LatticePoint& b) {
  if (a.dim_ != b.dim_) return a.dim_ <=> b.dim_;
  for (int i = 0; i < a.dim_; ++i)
    if (a.c_[i] != b.c_[i]) return a.c_[i] <=> b.c_[i];
  return std::strong_ordering::equal;
}

long LatticePoint::sup_norm() const {
  long m = 0;
  for (int i = 0; i < dim_; ++i) m = std::max<long>(m, std::labs(c_[i]));
  return m;
}

long LatticePoint::l1_norm() const {
  long s = 0;
  for (int i = 0; i < dim_; ++i) s += std::labs(c_[i]);
  return s;
}

double LatticePoint::norm() const {
  double s = 0;
  for (int i = 0; i < dim_; ++i) s += double(c_[i]) * c_[i];
  return std::sqrt(s);
}

double LatticePoint::dot(const Eigen::VectorXd& k) const {
  same_dim(dim_, static_cast<int>(k.size()), "lattice dot product");
  double s = 0;
  for (int i = 0; i < dim_; ++i) s += k[i] * c_[i];
  return s;
}

Eigen::VectorXd LatticePoint::to_vector() const {
  Eigen::VectorXd v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = c_[i];
  return v;
}

std::vector<int> LatticePoint::coords() const { return {c_.begin(), c_.begin() + dim_}; }

LatticePoint LatticePoint::join(const LatticePoint& other) const {
  LatticePoint p(dim_ + other.dim_);
  for (int i = 0; i < dim_; ++i) p.c_[i] = c_[i];
  for (int i = 0; i < other.dim_; ++i) p.c_[dim_ + i] = other.c_[i];
  return p;
}

LatticePoint LatticePoint::head(int n) const {
  LatticePoint p(n);
  for (int i = 0; i < n; ++i) p.c_[i] = c_[i];
  return p;
}

LatticePoint LatticePoint::tail(int n) const {
  LatticePoint p(n);
  for (int i = 0; i < n; ++i) p.c_[i] = c_[dim_ - n + i];
  return p;
}

std::size_t LatticePoint::hash() const {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(dim_);
  for (int i = 0; i < dim_; ++i) {
    h ^= static_cast<std::uint32_t>(c_[i]);
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 31;
  }
  return static_cast<std::size_t>(h);
}

std::string LatticePoint::str() const {
  std::string s = "(";
  for (int i = 0; i < dim_; ++i) {
    if (i) s += ",";
    s += std::to_string(c_[i]);
  }
  return s + ")";
}

std::ostream& operator<<(std::ostream& os, const LatticePoint& p) { return os << p.str(); }

SignedField::SignedField(int dim, Map entries) : dim_(dim), entries_(std::move(entries)) {
  for (const auto& [x, w] : entries_) check_dim(x);
}

SignedField SignedField::delta(const LatticePoint& x, double weight) {
  SignedField f(x.dim());
  f.entries_.emplace(x, weight);
  return f;
}

void SignedField::check_dim(const LatticePoint& x) const { same_dim(dim_, x.dim(), "signed field"); }

double SignedField::at(const LatticePoint& x) const {
  auto it = entries_.find(x);
  return it == entries_.end() ? 0.0 : it->second;
}

void SignedField::add(const LatticePoint& x, double w) {
  check_dim(x);
  entries_[x] += w;
}

void SignedField::set(const LatticePoint& x, double w) {
  check_dim(x);
  entries_[x] = w;
}

SignedField& SignedField::normalize(double tol) {
  std::erase_if(entries_, [tol](const auto& e) { return e.second == 0.0 || std::abs(e.second) < tol; });
  return *this;
}

double SignedField::total_abs() const {
  double s = 0;
  for (const auto& [x, w] : entries_) s += std::abs(w);
  return s;
}

double SignedField::max_abs() const {
  double m = 0;
  for (const auto& [x, w] : entries_) m = std::max(m, std::abs(w));
  return m;
}

long SignedField::support_radius() const {
  long r = 0;
  for (const auto& [x, w] : entries_)
    if (w != 0.0) r = std::max(r, x.sup_norm());
  return r;
}

SignedField SignedField::shifted(const LatticePoint& v) const {
  same_dim(dim_, v.dim(), "field shift");
  SignedField out(dim_);
  for (const auto& [x, w] : entries_) out.entries_.emplace_hint(out.entries_.end(), x + v, w);
  return out;
}

SignedField SignedField::scaled(double a) const {
  SignedField out(*this);
  for (auto& [x, w] : out.entries_) w *= a;
  return out;
}

SignedField& SignedField::operator+=(const SignedField& o) {
  same_dim(dim_, o.dim_, "field sum");
  for (const auto& [x, w] : o.entries_) entries_[x] += w;
  return *this;
}

SignedField& SignedField::operator-=(const SignedField& o) {
  same_dim(dim_, o.dim_, "field difference");
  for (const auto& [x, w] : o.entries_) entries_[x] -= w;
  return *this;
}

SignedField SignedField::pair_marginal() const {
  if (dim_ % 2 != 0) throw ConfigError("pair marginal needs an even-dimensional field");
  const int d = dim_ / 2;
  SignedField out(d);
  for (const auto& [xy, w] : entries_) out.entries_[xy.tail(d)] += w;
  return out;
}

SignedField SignedField::pair_row_sums() const {
  if (dim_ % 2 != 0) throw ConfigError("pair row sums need an even-dimensional field");
  const int d = dim_ / 2;
  SignedField out(d);
  for (const auto& [xy, w] : entries_) out.entries_[xy.head(d)] += w;
  return out;
}

nlohmann::json SignedField::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [x, w] : entries_) entries.push_back({x.coords(), w});
  return {{"dim", dim_}, {"entries", std::move(entries)}};
}

SignedField SignedField::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("entries"))
    throw ConfigError("signed field JSON needs 'dim' and 'entries'");
  SignedField f(j.at("dim").get<int>());
  for (const auto& e : j.at("entries")) {
    if (!e.is_array() || e.size() != 2) throw ConfigError("signed field entry must be [coords, weight]");
    f.add(LatticePoint(e[0].get<std::vector<int>>()), e[1].get<double>());
  }
  return f;
}

std::string SignedField::to_csv() const {
  std::string out;
  for (int i = 0; i < dim_; ++i) out += "x" + std::to_string(i + 1) + ",";
  out += "weight\n";
  for (const auto& [x, w] : entries_) {
    for (int i = 0; i < dim_; ++i) out += std::to_string(x[i]) + ",";
    out += fmt_double(w) + "\n";
  }
  return out;
}

double max_abs_difference(const SignedField& f, const SignedField& g) {
  same_dim(f.dim(), g.dim(), "field comparison");
  double m = 0;
  for (const auto& [x, w] : f.entries()) m = std::max(m, std::abs(w - g.at(x)));
  for (const auto& [x, w] : g.entries())
    if (!f.entries().count(x)) m = std::max(m, std::abs(w));
  return m;
}

SignedField convolve(const SignedField& f, const SignedField& g) {
  same_dim(f.dim(), g.dim(), "convolve");
  SignedField::Map out;
  for (const auto& [x, a] : f.entries())
    for (const auto& [y, b] : g.entries()) out[x + y] += a * b;
  return SignedField(f.dim(), std::move(out));
}

FourierValue fourier_eval(const SignedField& f, const Eigen::VectorXd& k) {
  same_dim(f.dim(), static_cast<int>(k.size()), "fourier_eval");
  FourierValue fv;
  fv.k = k;
  for (int i = 0; i < k.size(); ++i)
    if (std::abs(k[i]) > std::numbers::pi) fv.outside_zone = true;
  double re = 0, im = 0;
  for (const auto& [x, w] : f.entries()) {
    const double phase = x.dot(k);
    re += w * std::cos(phase);
    im += w * std::sin(phase);
  }
  fv.value = {re, im};
  return fv;
}

Moments moments(const SignedField& f) {
  const int d = f.dim();
  Moments m;
  m.first = Eigen::VectorXd::Zero(d);
  m.second = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [x, w] : f.entries()) {
    m.mass += w;
    for (int i = 0; i < d; ++i) {
      m.first[i] += w * x[i];
      for (int j = 0; j < d; ++j) m.second(i, j) += w * x[i] * x[j];
    }
  }
  return m;
}

}  // namespace lace
