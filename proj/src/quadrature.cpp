#include "qpump/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

namespace qpump {

double QuadratureSpec::h_E(double E) const { return h_E_rel * std::max(E, 1.0); }

namespace {

Rule make_gauss_legendre(int n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  const unsigned un = static_cast<unsigned>(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      const double p = std::legendre(un, x);
      const double pm = std::legendre(un - 1, x);
      dp = n * (x * p - pm) / (x * x - 1.0);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double p = std::legendre(un, x);
    const double pm = std::legendre(un - 1, x);
    dp = n * (x * p - pm) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    r.w[i] = w;
    r.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

}  // namespace

const Rule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
  return it->second;
}

Rule composite_gauss(const std::vector<double>& edges, int n) {
  const Rule& g = gauss_legendre(n);
  Rule r;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double a = edges[p], b = edges[p + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      r.x.push_back(mid + half * g.x[i]);
      r.w.push_back(half * g.w[i]);
    }
  }
  return r;
}

Rule composite_gauss(double a, double b, int panels, int n) {
  std::vector<double> edges(panels + 1);
  for (int p = 0; p <= panels; ++p) edges[p] = a + (b - a) * p / panels;
  edges[panels] = b;
  return composite_gauss(edges, n);
}

double integrate(const Rule& r, const std::function<double(double)>& f) {
  double s = 0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * f(r.x[i]);
  return s;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace qpump
