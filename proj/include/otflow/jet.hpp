#pragma once

// Truncated multivariate Taylor polynomials ("jets").
//
// A Jet<NVars, Order> stores the Taylor coefficients of a function of NVars
// variables up to total degree Order, in graded monomial order. Arithmetic is
// exact up to truncation; elementary functions are applied by composing with
// their univariate Taylor coefficients. The constant coefficient of every
// operation is computed with the same floating point operation as the plain
// double expression, so constant terms agree with double evaluation bit for bit.

#include <array>
#include <cmath>
#include <cstddef>

namespace otflow {

namespace detail {

constexpr int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<int>(r);
}

}  // namespace detail

template <int NVars, int Order>
struct MonomialTable {
  static constexpr int size = detail::binomial(NVars + Order, Order);
  static constexpr int num_products = detail::binomial(2 * NVars + Order, Order);

  using Exponent = std::array<int, NVars>;
  struct Product {
    int i;
    int j;
    int k;
  };

  static constexpr std::array<Exponent, size> make_exponents() {
    std::array<Exponent, size> out{};
    int n = 0;
    int total = 1;
    for (int v = 0; v < NVars; ++v) total *= (Order + 1);
    for (int deg = 0; deg <= Order; ++deg) {
      // Enumerate all tuples in [0, Order]^NVars; keep those of degree `deg`.
      for (int code = 0; code < total; ++code) {
        Exponent e{};
        int rest = code;
        int sum = 0;
        for (int v = NVars - 1; v >= 0; --v) {
          e[v] = rest % (Order + 1);
          rest /= (Order + 1);
          sum += e[v];
        }
        if (sum == deg) out[n++] = e;
      }
    }
    return out;
  }

  static constexpr std::array<Exponent, size> exponents = make_exponents();

  static constexpr int degree(int m) {
    int d = 0;
    for (int v = 0; v < NVars; ++v) d += exponents[m][v];
    return d;
  }

  static constexpr int index(const Exponent& e) {
    for (int m = 0; m < size; ++m) {
      bool eq = true;
      for (int v = 0; v < NVars; ++v) eq = eq && exponents[m][v] == e[v];
      if (eq) return m;
    }
    return -1;
  }

  static constexpr std::array<Product, num_products> make_products() {
    std::array<Product, num_products> out{};
    int n = 0;
    for (int k = 0; k < size; ++k) {
      for (int i = 0; i < size; ++i) {
        Exponent rest{};
        bool divides = true;
        for (int v = 0; v < NVars; ++v) {
          rest[v] = exponents[k][v] - exponents[i][v];
          divides = divides && rest[v] >= 0;
        }
        if (divides) out[n++] = Product{i, index(rest), k};
      }
    }
    return out;
  }

  // Sorted by k; within one k the i = 0 term comes first.
  static constexpr std::array<Product, num_products> products = make_products();

  /// Product of factorials of the exponent: converts a Taylor coefficient to a partial derivative.
  static constexpr double factorial_weight(int m) {
    double w = 1.0;
    for (int v = 0; v < NVars; ++v)
      for (int q = 2; q <= exponents[m][v]; ++q) w *= q;
    return w;
  }
};

template <int NVars, int Order>
class Jet {
 public:
  using Table = MonomialTable<NVars, Order>;
  static constexpr int size = Table::size;
  static constexpr int order = Order;
  using Coeffs = std::array<double, Order + 1>;

  Jet() = default;
  Jet(double value) { c_[0] = value; }  // NOLINT: implicit promotion of constants

  static Jet variable(int var, double value) {
    Jet j(value);
    typename Table::Exponent e{};
    e[var] = 1;
    j.c_[Table::index(e)] = 1.0;
    return j;
  }

  double value() const { return c_[0]; }
  double operator[](int m) const { return c_[m]; }
  double& operator[](int m) { return c_[m]; }
  const std::array<double, size>& coefficients() const { return c_; }

  /// Partial derivative for the monomial with the given exponent.
  double partial(const typename Table::Exponent& e) const {
    const int m = Table::index(e);
    return c_[m] * Table::factorial_weight(m);
  }

  Jet& operator+=(const Jet& o) {
    for (int m = 0; m < size; ++m) c_[m] += o.c_[m];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int m = 0; m < size; ++m) c_[m] -= o.c_[m];
    return *this;
  }
  Jet& operator*=(double s) {
    for (auto& x : c_) x *= s;
    return *this;
  }

  friend Jet operator-(const Jet& a) {
    Jet r;
    for (int m = 0; m < size; ++m) r.c_[m] = -a.c_[m];
    return r;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double s) {
    a.c_[0] += s;
    return a;
  }
  friend Jet operator+(double s, Jet a) {
    a.c_[0] = s + a.c_[0];
    return a;
  }
  friend Jet operator-(Jet a, double s) {
    a.c_[0] -= s;
    return a;
  }
  friend Jet operator-(double s, const Jet& a) {
    Jet r = -a;
    r.c_[0] = s - a.c_[0];
    return r;
  }
  friend Jet operator*(Jet a, double s) {
    for (auto& x : a.c_) x *= s;
    return a;
  }
  friend Jet operator*(double s, Jet a) {
    for (auto& x : a.c_) x = s * x;
    return a;
  }
  friend Jet operator/(Jet a, double s) {
    for (auto& x : a.c_) x /= s;
    return a;
  }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (const auto& p : Table::products) r.c_[p.k] += a.c_[p.i] * b.c_[p.j];
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b) {
    // a = b * r, solved for r in graded order.
    Jet r;
    const double b0 = b.c_[0];
    int k = -1;
    double acc = 0.0;
    for (const auto& p : Table::products) {
      if (p.k != k) {
        if (k >= 0) r.c_[k] = acc / b0;
        k = p.k;
        acc = a.c_[k];
      }
      if (p.i != 0) acc -= b.c_[p.i] * r.c_[p.j];
    }
    r.c_[k] = acc / b0;
    return r;
  }
  friend Jet operator/(double s, const Jet& b) { return Jet(s) / b; }

  /// f(x) from the univariate Taylor coefficients of f at x.value().
  friend Jet compose(const Jet& x, const Coeffs& f) {
    Jet delta = x;
    delta.c_[0] = 0.0;
    Jet r(f[Order]);
    for (int k = Order - 1; k >= 0; --k) {
      r = r * delta;
      r.c_[0] = f[k];
    }
    return r;
  }

 private:
  std::array<double, size> c_{};
};

template <int Order>
using Series = Jet<1, Order>;

namespace taylor {

/// Coefficients of t^alpha at t0; the constant term is `value`.
template <int Order>
std::array<double, Order + 1> power(double t0, double alpha, double value) {
  std::array<double, Order + 1> f{};
  f[0] = value;
  double binom = 1.0;
  for (int k = 1; k <= Order; ++k) {
    binom *= (alpha - (k - 1)) / k;
    f[k] = binom * std::pow(t0, alpha - k);
  }
  return f;
}

template <int Order>
std::array<double, Order + 1> log(double t0) {
  std::array<double, Order + 1> f{};
  f[0] = std::log(t0);
  double p = 1.0;
  for (int k = 1; k <= Order; ++k) {
    p /= t0;
    f[k] = (k % 2 == 1 ? 1.0 : -1.0) * p / k;
  }
  return f;
}

template <int Order>
std::array<double, Order + 1> exp(double t0) {
  std::array<double, Order + 1> f{};
  f[0] = std::exp(t0);
  for (int k = 1; k <= Order; ++k) f[k] = f[k - 1] / k;
  return f;
}

template <int Order>
std::array<double, Order + 1> sin(double t0) {
  std::array<double, Order + 1> f{};
  const double s = std::sin(t0);
  const double c = std::cos(t0);
  const double cycle[4] = {s, c, -s, -c};
  double fact = 1.0;
  for (int k = 0; k <= Order; ++k) {
    if (k > 0) fact *= k;
    f[k] = cycle[k % 4] / fact;
  }
  return f;
}

template <int Order>
std::array<double, Order + 1> cos(double t0) {
  std::array<double, Order + 1> f{};
  const double s = std::sin(t0);
  const double c = std::cos(t0);
  const double cycle[4] = {c, -s, -c, s};
  double fact = 1.0;
  for (int k = 0; k <= Order; ++k) {
    if (k > 0) fact *= k;
    f[k] = cycle[k % 4] / fact;
  }
  return f;
}

/// asin via integration of (1 - y^2)^{-1/2}.
template <int Order>
std::array<double, Order + 1> asin(double s0) {
  std::array<double, Order + 1> f{};
  f[0] = std::asin(s0);
  if constexpr (Order > 0) {
    const auto y = Series<Order>::variable(0, s0);
    const Series<Order> u = 1.0 - y * y;
    const Series<Order> g = compose(u, power<Order>(u.value(), -0.5, 1.0 / std::sqrt(u.value())));
    for (int k = 1; k <= Order; ++k) f[k] = g[k - 1] / k;
  }
  return f;
}

}  // namespace taylor

template <int N, int O>
Jet<N, O> sqrt(const Jet<N, O>& x) {
  const double t0 = x.value();
  return compose(x, taylor::power<O>(t0, 0.5, std::sqrt(t0)));
}
template <int N, int O>
Jet<N, O> log(const Jet<N, O>& x) {
  return compose(x, taylor::log<O>(x.value()));
}
template <int N, int O>
Jet<N, O> exp(const Jet<N, O>& x) {
  return compose(x, taylor::exp<O>(x.value()));
}
template <int N, int O>
Jet<N, O> sin(const Jet<N, O>& x) {
  return compose(x, taylor::sin<O>(x.value()));
}
template <int N, int O>
Jet<N, O> cos(const Jet<N, O>& x) {
  return compose(x, taylor::cos<O>(x.value()));
}
template <int N, int O>
Jet<N, O> asin(const Jet<N, O>& x) {
  return compose(x, taylor::asin<O>(x.value()));
}

}  // namespace otflow
