#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mfgvar {

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Uniform grid on the unit torus [0,1)^d, row-major (last axis fastest).
// Every axis must carry an even number of points.
class TorusGrid {
 public:
  TorusGrid() = default;
  TorusGrid(int dim, int n);
  explicit TorusGrid(std::vector<int> shape);

  int dim() const { return static_cast<int>(shape_.size()); }
  int n(int axis) const { return shape_.at(axis); }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return size_; }
  std::size_t stride(int axis) const { return stride_[axis]; }
  double spacing(int axis) const { return 1.0 / shape_[axis]; }
  double cell_volume() const { return 1.0 / static_cast<double>(size_); }

  int index_along(std::size_t node, int axis) const {
    return static_cast<int>((node / stride_[axis]) % shape_[axis]);
  }
  double coord(std::size_t node, int axis) const {
    return static_cast<double>(index_along(node, axis)) / shape_[axis];
  }
  void point(std::size_t node, std::span<double> x) const;

  // signed frequency in {-n/2+1, ..., n/2}
  int wavenumber(int axis, int j) const {
    const int n = shape_[axis];
    return j <= n / 2 ? j : j - n;
  }
  bool is_nyquist(int axis, int j) const { return 2 * j == shape_[axis]; }

  bool operator==(const TorusGrid& o) const { return shape_ == o.shape_; }
  bool operator!=(const TorusGrid& o) const { return !(*this == o); }

  std::string describe() const;

 private:
  std::vector<int> shape_;
  std::vector<std::size_t> stride_;
  std::size_t size_ = 0;
};

// Space x time discretization. For a finite horizon the time nodes are
// t_j = j T / n_t, j = 0..n_t; a periodic grid has n_t nodes on a circle.
struct SpaceTimeGrid {
  TorusGrid space;
  int time_points = 0;
  double horizon = 1.0;
  bool periodic = false;

  SpaceTimeGrid() = default;
  SpaceTimeGrid(TorusGrid s, int n_t, double T, bool is_periodic = false);
  double dt() const { return horizon / time_points; }
  double time(int j) const { return j * dt(); }
  int time_nodes() const { return periodic ? time_points : time_points + 1; }
};

struct ScalarField {
  TorusGrid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const TorusGrid& g, double fill = 0.0);
  ScalarField(const TorusGrid& g, std::vector<double> v);

  static ScalarField sample(const TorusGrid& g,
                            const std::function<double(std::span<const double>)>& fn);

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  double max_abs() const;
  double min() const;
  double max() const;

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(ScalarField a, double s);
ScalarField operator*(double s, ScalarField a);
ScalarField hadamard(const ScalarField& a, const ScalarField& b);

struct VectorField {
  TorusGrid grid;
  std::vector<ScalarField> components;

  VectorField() = default;
  explicit VectorField(const TorusGrid& g, int ncomp = -1);

  int ncomp() const { return static_cast<int>(components.size()); }
  ScalarField& operator[](int a) { return components[a]; }
  const ScalarField& operator[](int a) const { return components[a]; }
  double max_abs() const;

  VectorField& operator+=(const VectorField& o);
  VectorField& operator-=(const VectorField& o);
  VectorField& operator*=(double s);
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(VectorField a, double s);
VectorField constant_vector(const TorusGrid& g, std::span<const double> c);

// ---- spectral calculus ----

using Complex = std::complex<double>;

// Normalized DFT coefficients c_k = N^{-1} sum_j f_j exp(-2 pi i k.x_j).
std::vector<Complex> fourier_coefficients(const ScalarField& f);
ScalarField from_fourier(const TorusGrid& g, const std::vector<Complex>& c);

// Multiply every Fourier mode by symbol(k) where k is the signed wavevector.
ScalarField apply_symbol(const ScalarField& f,
                         const std::function<Complex(std::span<const int>, std::span<const bool>)>& symbol);

ScalarField partial(const ScalarField& f, int axis);
VectorField gradient(const ScalarField& f);
// Gradient restricted to the first n_axes axes (spatial part of a space-time field).
VectorField gradient(const ScalarField& f, int n_axes);
ScalarField divergence(const VectorField& w);
ScalarField laplacian(const ScalarField& f);
ScalarField laplacian(const ScalarField& f, int n_axes);
// Zero-mean solution of lap(u) = f - mean(f).
ScalarField inverse_laplacian(const ScalarField& f);
// exp(t lap) f
ScalarField heat_flow(const ScalarField& f, double t);
VectorField project_div_free(const VectorField& w);
// Zero-mean u whose gradient is the L2-closest gradient to g.
ScalarField potential_from_gradient(const VectorField& g);

double integrate(const ScalarField& f);
double inner(const ScalarField& a, const ScalarField& b);
double inner(const VectorField& a, const VectorField& b);
double mean(const ScalarField& f);
double l2_norm(const ScalarField& f);

// Dense matrices of the spectral operators in the nodal basis.
Eigen::MatrixXd derivative_matrix(const TorusGrid& g, int axis);
Eigen::MatrixXd laplacian_matrix(const TorusGrid& g, int n_axes = -1);

}  // namespace mfgvar
