#include "mfgvar/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

namespace mfgvar {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW planning is not thread safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlan {
 public:
  explicit FftPlan(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    size_ = n;
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft(static_cast<int>(shape.size()), shape.data(), buf_, buf_,
                         FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft(static_cast<int>(shape.size()), shape.data(), buf_, buf_,
                         FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::vector<Complex> forward(const std::vector<double>& v) {
    for (std::size_t i = 0; i < size_; ++i) {
      buf_[i][0] = v[i];
      buf_[i][1] = 0.0;
    }
    fftw_execute(fwd_);
    std::vector<Complex> out(size_);
    const double s = 1.0 / static_cast<double>(size_);
    for (std::size_t i = 0; i < size_; ++i) out[i] = Complex(buf_[i][0] * s, buf_[i][1] * s);
    return out;
  }

  std::vector<double> backward_real(const std::vector<Complex>& c) {
    for (std::size_t i = 0; i < size_; ++i) {
      buf_[i][0] = c[i].real();
      buf_[i][1] = c[i].imag();
    }
    fftw_execute(bwd_);
    std::vector<double> out(size_);
    for (std::size_t i = 0; i < size_; ++i) out[i] = buf_[i][0];
    return out;
  }

 private:
  std::size_t size_ = 0;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_{};
  fftw_plan bwd_{};
};

FftPlan& plan_for(const std::vector<int>& shape) {
  thread_local std::map<std::vector<int>, std::unique_ptr<FftPlan>> cache;
  auto it = cache.find(shape);
  if (it == cache.end()) it = cache.emplace(shape, std::make_unique<FftPlan>(shape)).first;
  return *it->second;
}

// Visit every mode with its signed wavevector and Nyquist flags.
template <class Fn>
void for_each_mode(const TorusGrid& g, Fn&& fn) {
  const int d = g.dim();
  std::vector<int> k(d);
  std::vector<char> nyq(d);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (int a = 0; a < d; ++a) {
      const int j = g.index_along(i, a);
      k[a] = g.wavenumber(a, j);
      nyq[a] = g.is_nyquist(a, j);
    }
    fn(i, k, nyq);
  }
}

void require_same(const TorusGrid& a, const TorusGrid& b) {
  if (a != b) throw DomainError("fields live on different grids: " + a.describe() + " vs " + b.describe());
}

}  // namespace

// ---- TorusGrid ----

TorusGrid::TorusGrid(int dim, int n) : TorusGrid(std::vector<int>(dim > 0 ? dim : 0, n)) {
  if (dim <= 0) throw DomainError("torus dimension must be positive");
}

TorusGrid::TorusGrid(std::vector<int> shape) : shape_(std::move(shape)) {
  if (shape_.empty()) throw DomainError("torus dimension must be positive");
  for (int n : shape_) {
    if (n < 2 || n % 2 != 0)
      throw DomainError("points per axis must be a positive even integer (got " + std::to_string(n) + ")");
  }
  stride_.assign(shape_.size(), 1);
  for (int a = static_cast<int>(shape_.size()) - 2; a >= 0; --a)
    stride_[a] = stride_[a + 1] * static_cast<std::size_t>(shape_[a + 1]);
  size_ = stride_[0] * static_cast<std::size_t>(shape_[0]);
}

void TorusGrid::point(std::size_t node, std::span<double> x) const {
  for (int a = 0; a < dim(); ++a) x[a] = coord(node, a);
}

std::string TorusGrid::describe() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t a = 0; a < shape_.size(); ++a) os << (a ? "x" : "") << shape_[a];
  os << "]";
  return os.str();
}

SpaceTimeGrid::SpaceTimeGrid(TorusGrid s, int n_t, double T, bool is_periodic)
    : space(std::move(s)), time_points(n_t), horizon(T), periodic(is_periodic) {
  if (n_t < 2 || n_t % 2 != 0) throw DomainError("time_points must be a positive even integer");
  if (!(T > 0.0)) throw DomainError("horizon must be positive");
}

// ---- ScalarField ----

ScalarField::ScalarField(const TorusGrid& g, double fill) : grid(g), values(g.size(), fill) {}

ScalarField::ScalarField(const TorusGrid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.size())
    throw DomainError("value array length " + std::to_string(values.size()) +
                      " does not match grid node count " + std::to_string(grid.size()));
}

ScalarField ScalarField::sample(const TorusGrid& g,
                                const std::function<double(std::span<const double>)>& fn) {
  ScalarField f(g);
  std::vector<double> x(g.dim());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.point(i, x);
    f.values[i] = fn(x);
  }
  return f;
}

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}
double ScalarField::min() const { return *std::min_element(values.begin(), values.end()); }
double ScalarField::max() const { return *std::max_element(values.begin(), values.end()); }

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same(grid, o.grid);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
  return *this;
}
ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same(grid, o.grid);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
  return *this;
}
ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values) v *= s;
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(ScalarField a, double s) { return a *= s; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }
ScalarField hadamard(const ScalarField& a, const ScalarField& b) {
  require_same(a.grid, b.grid);
  ScalarField r(a.grid);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] * b[i];
  return r;
}

// ---- VectorField ----

VectorField::VectorField(const TorusGrid& g, int ncomp) : grid(g) {
  components.assign(ncomp < 0 ? g.dim() : ncomp, ScalarField(g));
}

double VectorField::max_abs() const {
  double m = 0.0;
  for (const auto& c : components) m = std::max(m, c.max_abs());
  return m;
}
VectorField& VectorField::operator+=(const VectorField& o) {
  if (o.ncomp() != ncomp()) throw DomainError("vector field component count mismatch");
  for (int a = 0; a < ncomp(); ++a) components[a] += o.components[a];
  return *this;
}
VectorField& VectorField::operator-=(const VectorField& o) {
  if (o.ncomp() != ncomp()) throw DomainError("vector field component count mismatch");
  for (int a = 0; a < ncomp(); ++a) components[a] -= o.components[a];
  return *this;
}
VectorField& VectorField::operator*=(double s) {
  for (auto& c : components) c *= s;
  return *this;
}
VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(VectorField a, double s) { return a *= s; }

VectorField constant_vector(const TorusGrid& g, std::span<const double> c) {
  VectorField w(g, static_cast<int>(c.size()));
  for (std::size_t a = 0; a < c.size(); ++a) w[static_cast<int>(a)] = ScalarField(g, c[a]);
  return w;
}

// ---- spectral calculus ----

std::vector<Complex> fourier_coefficients(const ScalarField& f) {
  return plan_for(f.grid.shape()).forward(f.values);
}

ScalarField from_fourier(const TorusGrid& g, const std::vector<Complex>& c) {
  if (c.size() != g.size()) throw DomainError("coefficient count does not match grid");
  return ScalarField(g, plan_for(g.shape()).backward_real(c));
}

ScalarField apply_symbol(const ScalarField& f,
                         const std::function<Complex(std::span<const int>, std::span<const bool>)>& symbol) {
  auto c = fourier_coefficients(f);
  for_each_mode(f.grid, [&](std::size_t i, const std::vector<int>& k, const std::vector<char>& nyq) {
    bool flags[16];
    for (int a = 0; a < f.grid.dim(); ++a) flags[a] = nyq[a] != 0;
    c[i] *= symbol(std::span<const int>(k), std::span<const bool>(flags, f.grid.dim()));
  });
  return from_fourier(f.grid, c);
}

ScalarField partial(const ScalarField& f, int axis) {
  if (axis < 0 || axis >= f.grid.dim()) throw DomainError("derivative axis out of range");
  auto c = fourier_coefficients(f);
  for_each_mode(f.grid, [&](std::size_t i, const std::vector<int>& k, const std::vector<char>& nyq) {
    c[i] *= nyq[axis] ? Complex(0.0) : Complex(0.0, kTwoPi * k[axis]);
  });
  return from_fourier(f.grid, c);
}

VectorField gradient(const ScalarField& f) { return gradient(f, f.grid.dim()); }

VectorField gradient(const ScalarField& f, int n_axes) {
  if (n_axes < 0 || n_axes > f.grid.dim()) throw DomainError("gradient axis count out of range");
  VectorField g(f.grid, n_axes);
  auto c = fourier_coefficients(f);
  for (int a = 0; a < n_axes; ++a) {
    auto ca = c;
    for_each_mode(f.grid, [&](std::size_t i, const std::vector<int>& k, const std::vector<char>& nyq) {
      ca[i] *= nyq[a] ? Complex(0.0) : Complex(0.0, kTwoPi * k[a]);
    });
    g[a] = from_fourier(f.grid, ca);
  }
  return g;
}

ScalarField divergence(const VectorField& w) {
  if (w.ncomp() > w.grid.dim()) throw DomainError("vector field has more components than grid axes");
  ScalarField out(w.grid);
  std::vector<Complex> acc(w.grid.size(), Complex(0.0));
  for (int a = 0; a < w.ncomp(); ++a) {
    if (w[a].grid != w.grid) throw DomainError("component grid mismatch in divergence");
    auto c = fourier_coefficients(w[a]);
    for_each_mode(w.grid, [&](std::size_t i, const std::vector<int>& k, const std::vector<char>& nyq) {
      acc[i] += nyq[a] ? Complex(0.0) : Complex(0.0, kTwoPi * k[a]) * c[i];
    });
  }
  return from_fourier(w.grid, acc);
}

ScalarField laplacian(const ScalarField& f) { return laplacian(f, f.grid.dim()); }

ScalarField laplacian(const ScalarField& f, int n_axes) {
  auto c = fourier_coefficients(f);
  for_each_mode(f.grid, [&](std::size_t i, const std::vector<int>& k, const std::vector<char>&) {
    double k2 = 0.0;
    for (int a = 0; a < n_axes; ++a) k2 += static_cast<double>(k[a]) * k[a];
    c[i] *= -kTwoPi * kTwoPi * k2;
  });
  return from_fourier(f.grid, c);
}

ScalarField inverse_laplacian(const ScalarField& f) {
  auto c = fourier_coefficients(f);
  for_each_mode(f.grid, [&](std::size_t i, const std::vector<int>& k, const std::vector<char>&) {
    double k2 = 0.0;
    for (int kk : k) k2 += static_cast<double>(kk) * kk;
    c[i] = k2 == 0.0 ? Complex(0.0) : c[i] / (-kTwoPi * kTwoPi * k2);
  });
  return from_fourier(f.grid, c);
}

ScalarField heat_flow(const ScalarField& f, double t) {
  auto c = fourier_coefficients(f);
  for_each_mode(f.grid, [&](std::size_t i, const std::vector<int>& k, const std::vector<char>&) {
    double k2 = 0.0;
    for (int kk : k) k2 += static_cast<double>(kk) * kk;
    c[i] *= std::exp(-kTwoPi * kTwoPi * k2 * t);
  });
  return from_fourier(f.grid, c);
}

// Leray projection with the same Nyquist-free wavevector the divergence sees,
// so div(P w) vanishes to roundoff.
VectorField project_div_free(const VectorField& w) {
  const int d = w.grid.dim();
  if (w.ncomp() != d) throw DomainError("project_div_free needs one component per axis");
  std::vector<std::vector<Complex>> c(d);
  for (int a = 0; a < d; ++a) {
    if (w[a].grid != w.grid) throw DomainError("component grid mismatch in projection");
    c[a] = fourier_coefficients(w[a]);
  }
  std::vector<double> kt(d);
  for_each_mode(w.grid, [&](std::size_t i, const std::vector<int>& k, const std::vector<char>& nyq) {
    double k2 = 0.0;
    for (int a = 0; a < d; ++a) {
      kt[a] = nyq[a] ? 0.0 : static_cast<double>(k[a]);
      k2 += kt[a] * kt[a];
    }
    if (k2 == 0.0) return;
    Complex dot(0.0);
    for (int a = 0; a < d; ++a) dot += kt[a] * c[a][i];
    for (int a = 0; a < d; ++a) c[a][i] -= kt[a] * dot / k2;
  });
  VectorField out(w.grid, d);
  for (int a = 0; a < d; ++a) out[a] = from_fourier(w.grid, c[a]);
  return out;
}

ScalarField potential_from_gradient(const VectorField& g) {
  const int d = g.grid.dim();
  if (g.ncomp() != d) throw DomainError("potential_from_gradient needs one component per axis");
  std::vector<std::vector<Complex>> c(d);
  for (int a = 0; a < d; ++a) c[a] = fourier_coefficients(g[a]);
  std::vector<Complex> u(g.grid.size(), Complex(0.0));
  for_each_mode(g.grid, [&](std::size_t i, const std::vector<int>& k, const std::vector<char>& nyq) {
    double k2 = 0.0;
    Complex dot(0.0);
    for (int a = 0; a < d; ++a) {
      const double ka = nyq[a] ? 0.0 : static_cast<double>(k[a]);
      k2 += ka * ka;
      dot += ka * c[a][i];
    }
    // grad u = i 2pi k u_hat, least squares: u_hat = -i k.g_hat / (2 pi |k|^2)
    if (k2 > 0.0) u[i] = Complex(0.0, -1.0) * dot / (kTwoPi * k2);
  });
  return from_fourier(g.grid, u);
}

double integrate(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s * f.grid.cell_volume();
}

double inner(const ScalarField& a, const ScalarField& b) {
  require_same(a.grid, b.grid);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * a.grid.cell_volume();
}

double inner(const VectorField& a, const VectorField& b) {
  if (a.ncomp() != b.ncomp()) throw DomainError("vector field component count mismatch");
  double s = 0.0;
  for (int c = 0; c < a.ncomp(); ++c) s += inner(a[c], b[c]);
  return s;
}

double mean(const ScalarField& f) { return integrate(f); }

double l2_norm(const ScalarField& f) { return std::sqrt(inner(f, f)); }

Eigen::MatrixXd derivative_matrix(const TorusGrid& g, int axis) {
  const std::size_t n = g.size();
  Eigen::MatrixXd D(n, n);
  ScalarField e(g);
  for (std::size_t j = 0; j < n; ++j) {
    e.values.assign(n, 0.0);
    e[j] = 1.0;
    auto col = partial(e, axis);
    for (std::size_t i = 0; i < n; ++i) D(i, j) = col[i];
  }
  return D;
}

Eigen::MatrixXd laplacian_matrix(const TorusGrid& g, int n_axes) {
  if (n_axes < 0) n_axes = g.dim();
  const std::size_t n = g.size();
  Eigen::MatrixXd L(n, n);
  ScalarField e(g);
  for (std::size_t j = 0; j < n; ++j) {
    e.values.assign(n, 0.0);
    e[j] = 1.0;
    auto col = laplacian(e, n_axes);
    for (std::size_t i = 0; i < n; ++i) L(i, j) = col[i];
  }
  return L;
}

}  // namespace mfgvar
