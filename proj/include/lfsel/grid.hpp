#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace lfsel {

using Row = std::vector<double>;

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Δx = 1/(2N), Δt = 1/(2K), λ = N/K
struct MeshSpec {
  int N = 1;
  int K = 1;
  double lambda0 = 0.0;
  double lambda1 = 1.0;

  [[nodiscard]] double dx() const { return 1.0 / (2.0 * N); }
  [[nodiscard]] double dt() const { return 1.0 / (2.0 * K); }
  [[nodiscard]] double lambda() const { return static_cast<double>(N) / K; }
  [[nodiscard]] int cols() const { return 2 * N; }
  [[nodiscard]] int steps_per_period() const { return 2 * K; }
  [[nodiscard]] double x(long m) const { return static_cast<double>(m) * dx(); }
  [[nodiscard]] double t(long k) const { return static_cast<double>(k) * dt(); }

  void validate() const {
    if (N < 1 || K < 1) throw RangeError("N and K must be positive");
    if (N > K) throw RangeError("N=" + std::to_string(N) + " exceeds K=" + std::to_string(K));
    const double lam = lambda();
    if (lam < lambda0 || lam >= lambda1)
      throw RangeError("lambda=" + fmt17(lam) + " outside [" + fmt17(lambda0) + ", " + fmt17(lambda1) + ")");
  }

  static MeshSpec make(int N, int K, double lambda0 = 0.0, double lambda1 = 1.0) {
    MeshSpec m{N, K, lambda0, lambda1};
    m.validate();
    return m;
  }
  // K rounded from N/λ, λ then re-derived as N/K
  static MeshSpec from_lambda(int N, double lambda, double lambda0 = 0.0, double lambda1 = 1.0) {
    const int K = static_cast<int>(std::lround(N / lambda));
    return make(N, K, lambda0, lambda1);
  }

  friend bool operator==(const MeshSpec&, const MeshSpec&) = default;
};

enum class Parity { even, odd };

inline const char* parity_name(Parity p) { return p == Parity::even ? "even" : "odd"; }

inline long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
inline long wrap_index(long a, long n) {
  long r = a % n;
  return r < 0 ? r + n : r;
}

// whether (k, m) carries a value of the given parity (even: m+k even)
inline bool is_active(Parity par, long k, long m) {
  const bool even = wrap_index(m + k, 2) == 0;
  return par == Parity::even ? even : !even;
}

struct GridIndex {
  long m = 0;
  long k = 0;
};

// x in [x_m, x_m + 2Δx) with (m,k) on the parity grid, t in [t_k, t_k + Δt)
inline GridIndex locate(const MeshSpec& mesh, Parity par, double x, double t) {
  long k = static_cast<long>(std::floor(t / mesh.dt()));
  if (mesh.t(k + 1) <= t) ++k;
  if (mesh.t(k) > t) --k;
  long m = static_cast<long>(std::floor(x / mesh.dx()));
  if (mesh.x(m + 1) <= x) ++m;
  if (mesh.x(m) > x) --m;
  if (!is_active(par, k, m)) --m;
  return {m, k};
}

inline std::vector<double> grid_abscissae(const MeshSpec& mesh) {
  std::vector<double> xs(mesh.cols());
  for (int m = 0; m < mesh.cols(); ++m) xs[m] = mesh.x(m);
  return xs;
}

// empty row with NaN in every slot
inline Row blank_row(const MeshSpec& mesh) { return Row(mesh.cols(), nan_value); }

// values over levels [0, levels); periodic fields wrap k by levels
class GridField {
 public:
  GridField() = default;
  GridField(MeshSpec mesh, Parity parity, int levels, bool time_periodic, double c = 0.0)
      : mesh_(mesh), parity_(parity), levels_(levels), periodic_(time_periodic), c_(c),
        data_(static_cast<std::size_t>(levels) * mesh.cols(), nan_value) {}

  [[nodiscard]] const MeshSpec& mesh() const { return mesh_; }
  [[nodiscard]] Parity parity() const { return parity_; }
  [[nodiscard]] int levels() const { return levels_; }
  [[nodiscard]] bool time_periodic() const { return periodic_; }
  [[nodiscard]] double c() const { return c_; }
  void set_c(double c) { c_ = c; }

  [[nodiscard]] long level_index(long k) const {
    if (periodic_) return wrap_index(k, levels_);
    if (k < 0 || k >= levels_) throw RangeError("level " + std::to_string(k) + " not stored");
    return k;
  }
  [[nodiscard]] double at(long k, long m) const {
    const long kk = level_index(k);
    if (!is_active(parity_, k, m)) return nan_value;
    return data_[static_cast<std::size_t>(kk) * mesh_.cols() + wrap_index(m, mesh_.cols())];
  }
  void set(long k, long m, double v) {
    if (!is_active(parity_, k, m))
      throw RangeError("index (" + std::to_string(k) + "," + std::to_string(m) + ") off the " +
                       parity_name(parity_) + " grid");
    data_[static_cast<std::size_t>(level_index(k)) * mesh_.cols() + wrap_index(m, mesh_.cols())] = v;
  }
  [[nodiscard]] Row row(long k) const {
    const long kk = level_index(k);
    return Row(data_.begin() + kk * mesh_.cols(), data_.begin() + (kk + 1) * mesh_.cols());
  }
  void set_row(long k, const Row& r) {
    const long kk = level_index(k);
    for (long m = 0; m < mesh_.cols(); ++m)
      data_[kk * mesh_.cols() + m] = is_active(parity_, k, m) ? r[m] : nan_value;
  }
  void add_constant(double a) {
    for (auto& v : data_) if (!std::isnan(v)) v += a;
  }
  [[nodiscard]] const std::vector<double>& raw() const { return data_; }

  void write_csv(std::ostream& os) const {
    os << "# parity=" << parity_name(parity_) << ",N=" << mesh_.N << ",K=" << mesh_.K << ",c=" << fmt17(c_)
       << ",levels=" << levels_ << ",periodic=" << (periodic_ ? 1 : 0) << "\n";
    os << "k,m,value\n";
    for (long k = 0; k < levels_; ++k)
      for (long m = 0; m < mesh_.cols(); ++m)
        if (is_active(parity_, k, m)) os << k << ',' << m << ',' << fmt17(at(k, m)) << '\n';
  }

  static GridField read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw SchemaError("missing field header");
    std::string par;
    int N = 0, K = 0, levels = 0, periodic = 0;
    double c = 0;
    std::stringstream ss(line.substr(2));
    std::string kv;
    while (std::getline(ss, kv, ',')) {
      const auto eq = kv.find('=');
      const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "parity") par = val;
      else if (key == "N") N = std::stoi(val);
      else if (key == "K") K = std::stoi(val);
      else if (key == "c") c = std::stod(val);
      else if (key == "levels") levels = std::stoi(val);
      else if (key == "periodic") periodic = std::stoi(val);
    }
    MeshSpec mesh{N, K, 0.0, 2.0};
    GridField f(mesh, par == "even" ? Parity::even : Parity::odd, levels, periodic != 0, c);
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto a = line.find(','), b = line.find(',', a + 1);
      f.set(std::stol(line.substr(0, a)), std::stol(line.substr(a + 1, b - a - 1)), std::stod(line.substr(b + 1)));
    }
    return f;
  }

 private:
  MeshSpec mesh_{};
  Parity parity_ = Parity::odd;
  int levels_ = 0;
  bool periodic_ = false;
  double c_ = 0.0;
  std::vector<double> data_;
};

// ū(x,t) = u^k_m on [x_{m-1}, x_{m+1}) x [t_k, t_{k+1})
inline double step_interpolant(const GridField& u, double x, double t) {
  const auto at = locate(u.mesh(), Parity::odd, x, t);  // left node m-1 of the u cell
  return u.at(at.k, at.m + 1);
}

// v̄ linear in x between odd-grid nodes m and m+2, step in t
inline double linear_interpolant(const GridField& v, double x, double t) {
  const auto& mesh = v.mesh();
  const auto at = locate(mesh, Parity::odd, x, t);
  const double v0 = v.at(at.k, at.m), v2 = v.at(at.k, at.m + 2);
  return v0 + (v2 - v0) / (2.0 * mesh.dx()) * (x - mesh.x(at.m));
}

}  // namespace lfsel
