#include "enshare/lstm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include <fmt/core.h>

#include "enshare/rng.hpp"

namespace enshare {

namespace {

struct Offsets {
  std::size_t wx, wh, b, w1, b1, w2, b2, end;
};

Offsets offsets_of(const LstmShape& s) {
  const std::size_t G = 4 * s.hidden;
  Offsets o{};
  o.wx = 0;
  o.wh = o.wx + G * s.input;
  o.b = o.wh + G * s.hidden;
  o.w1 = o.b + G;
  o.b1 = o.w1 + s.head * (s.hidden + s.static_dim);
  o.w2 = o.b1 + s.head;
  o.b2 = o.w2 + s.head;
  o.end = o.b2 + 1;
  return o;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

void check_window(const LstmShape& s, const FeatureWindow& w) {
  if (w.kpi.empty()) throw Error("feature window has no samples");
  if (s.input != 2) throw Error("LSTM input width must match the two KPI features");
  if (w.static_features.size() != s.static_dim) {
    throw Error(fmt::format("static feature size {} does not match model ({})",
                            w.static_features.size(), s.static_dim));
  }
}

// Activations kept for the backward pass.
struct Trace {
  std::vector<double> gates;  // [L][4H] post-activation i, f, g, o
  std::vector<double> c;      // [L+1][H], c[0] = 0
  std::vector<double> h;      // [L+1][H], h[0] = 0
  std::vector<double> tc;     // [L][H] tanh(c_t)
  std::vector<double> v;      // [H+S] head input
  std::vector<double> r;      // [P] head hidden
  double y = 0.0;
};

double forward_trace(const LstmParams& p, const FeatureWindow& win, Trace& tr) {
  const auto& s = p.shape;
  const auto o = offsets_of(s);
  const std::size_t H = s.hidden, G = 4 * H, I = s.input, L = win.kpi.size();
  const double* w = p.w.data();
  tr.gates.assign(L * G, 0.0);
  tr.c.assign((L + 1) * H, 0.0);
  tr.h.assign((L + 1) * H, 0.0);
  tr.tc.assign(L * H, 0.0);
  std::vector<double> a(G);
  for (std::size_t t = 0; t < L; ++t) {
    const double* x = win.kpi[t].data();
    const double* hp = &tr.h[t * H];
    for (std::size_t r = 0; r < G; ++r) {
      double acc = w[o.b + r];
      const double* wx = w + o.wx + r * I;
      for (std::size_t k = 0; k < I; ++k) acc += wx[k] * x[k];
      const double* wh = w + o.wh + r * H;
      for (std::size_t k = 0; k < H; ++k) acc += wh[k] * hp[k];
      a[r] = acc;
    }
    double* g = &tr.gates[t * G];
    for (std::size_t k = 0; k < H; ++k) {
      g[k] = sigmoid(a[k]);
      g[H + k] = sigmoid(a[H + k]);
      g[2 * H + k] = std::tanh(a[2 * H + k]);
      g[3 * H + k] = sigmoid(a[3 * H + k]);
      const double cn = g[H + k] * tr.c[t * H + k] + g[k] * g[2 * H + k];
      tr.c[(t + 1) * H + k] = cn;
      tr.tc[t * H + k] = std::tanh(cn);
      tr.h[(t + 1) * H + k] = g[3 * H + k] * tr.tc[t * H + k];
    }
  }
  const std::size_t V = H + s.static_dim;
  tr.v.assign(V, 0.0);
  for (std::size_t k = 0; k < H; ++k) tr.v[k] = tr.h[L * H + k];
  for (std::size_t k = 0; k < s.static_dim; ++k) tr.v[H + k] = win.static_features[k];
  tr.r.assign(s.head, 0.0);
  double y = w[o.b2];
  for (std::size_t j = 0; j < s.head; ++j) {
    double q = w[o.b1 + j];
    const double* w1 = w + o.w1 + j * V;
    for (std::size_t k = 0; k < V; ++k) q += w1[k] * tr.v[k];
    tr.r[j] = std::tanh(q);
    y += w[o.w2 + j] * tr.r[j];
  }
  tr.y = y;
  return softplus(y + win.shift) - win.shift;
}

}  // namespace

std::size_t LstmShape::size() const { return offsets_of(*this).end; }

void LstmParams::validate() const {
  if (w.size() != shape.size()) {
    throw Error(fmt::format("parameter vector has {} entries, shape needs {}", w.size(), shape.size()));
  }
  for (double v : w) {
    if (!std::isfinite(v)) throw Error("non-finite model parameter");
  }
}

LstmParams zero_params(const LstmShape& shape) { return {shape, std::vector<double>(shape.size(), 0.0)}; }

LstmParams init_params(const LstmShape& shape, std::uint64_t seed) {
  auto p = zero_params(shape);
  const auto o = offsets_of(shape);
  Rng rng(seed);
  const double k_lstm = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  for (std::size_t i = o.wx; i < o.b; ++i) p.w[i] = rng.uniform(-k_lstm, k_lstm);
  for (std::size_t k = 0; k < shape.hidden; ++k) p.w[o.b + shape.hidden + k] = 1.0;  // forget gate
  const double k1 = std::sqrt(6.0 / static_cast<double>(shape.hidden + shape.static_dim + shape.head));
  for (std::size_t i = o.w1; i < o.b1; ++i) p.w[i] = rng.uniform(-k1, k1);
  const double k2 = std::sqrt(6.0 / static_cast<double>(shape.head + 1));
  for (std::size_t i = o.w2; i < o.b2; ++i) p.w[i] = rng.uniform(-k2, k2);
  return p;
}

double lstm_forward(const LstmParams& params, const FeatureWindow& window) {
  params.validate();
  check_window(params.shape, window);
  Trace tr;
  return forward_trace(params, window, tr);
}

double accumulate_gradients(const LstmParams& params, const FeatureWindow& window, double target,
                            double weight, std::span<double> grad) {
  const auto& s = params.shape;
  check_window(s, window);
  if (grad.size() != params.w.size()) throw Error("gradient buffer does not match parameters");
  Trace tr;
  const double pred = forward_trace(params, window, tr);
  const auto o = offsets_of(s);
  const std::size_t H = s.hidden, G = 4 * H, I = s.input, L = window.kpi.size();
  const std::size_t V = H + s.static_dim;
  const double* w = params.w.data();
  double* dw = grad.data();

  const double err = pred - target;
  const double dy = 2.0 * weight * err * sigmoid(tr.y + window.shift);
  dw[o.b2] += dy;
  std::vector<double> dv(V, 0.0);
  for (std::size_t j = 0; j < s.head; ++j) {
    dw[o.w2 + j] += dy * tr.r[j];
    const double dq = dy * w[o.w2 + j] * (1.0 - tr.r[j] * tr.r[j]);
    dw[o.b1 + j] += dq;
    double* dw1 = dw + o.w1 + j * V;
    const double* w1 = w + o.w1 + j * V;
    for (std::size_t k = 0; k < V; ++k) {
      dw1[k] += dq * tr.v[k];
      dv[k] += dq * w1[k];
    }
  }

  std::vector<double> dh(dv.begin(), dv.begin() + static_cast<std::ptrdiff_t>(H));
  std::vector<double> dc(H, 0.0), da(G), dh_prev(H);
  for (std::size_t t = L; t-- > 0;) {
    const double* g = &tr.gates[t * G];
    const double* cp = &tr.c[t * H];
    const double* tc = &tr.tc[t * H];
    for (std::size_t k = 0; k < H; ++k) {
      const double gi = g[k], gf = g[H + k], gg = g[2 * H + k], go = g[3 * H + k];
      const double dct = dc[k] + dh[k] * go * (1.0 - tc[k] * tc[k]);
      da[k] = dct * gg * gi * (1.0 - gi);
      da[H + k] = dct * cp[k] * gf * (1.0 - gf);
      da[2 * H + k] = dct * gi * (1.0 - gg * gg);
      da[3 * H + k] = dh[k] * tc[k] * go * (1.0 - go);
      dc[k] = dct * gf;
    }
    const double* x = window.kpi[t].data();
    const double* hp = &tr.h[t * H];
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    for (std::size_t r = 0; r < G; ++r) {
      const double d = da[r];
      dw[o.b + r] += d;
      double* dwx = dw + o.wx + r * I;
      for (std::size_t k = 0; k < I; ++k) dwx[k] += d * x[k];
      double* dwh = dw + o.wh + r * H;
      const double* wh = w + o.wh + r * H;
      for (std::size_t k = 0; k < H; ++k) {
        dwh[k] += d * hp[k];
        dh_prev[k] += d * wh[k];
      }
    }
    dh.swap(dh_prev);
  }
  return weight * err * err;
}

std::vector<double> lstm_gradients(const LstmParams& params, const FeatureWindow& window,
                                   double target, double weight) {
  params.validate();
  std::vector<double> grad(params.w.size(), 0.0);
  accumulate_gradients(params, window, target, weight, grad);
  return grad;
}

void save_checkpoint(const LstmParams& params, const std::filesystem::path& path) {
  params.validate();
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error(fmt::format("cannot write checkpoint '{}'", path.string()));
  const auto& s = params.shape;
  std::fprintf(f, "enshare-lstm 1\ninput %zu hidden %zu static %zu head %zu\n%zu\n", s.input,
               s.hidden, s.static_dim, s.head, params.w.size());
  for (double v : params.w) std::fprintf(f, "%.17g\n", v);
  std::fclose(f);
}

LstmParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open checkpoint '{}'", path.string()));
  std::string magic, k1, k2, k3, k4;
  int version = 0;
  LstmParams p;
  std::size_t n = 0;
  in >> magic >> version >> k1 >> p.shape.input >> k2 >> p.shape.hidden >> k3 >> p.shape.static_dim >>
      k4 >> p.shape.head >> n;
  if (!in || magic != "enshare-lstm" || version != 1 || k1 != "input" || k2 != "hidden" ||
      k3 != "static" || k4 != "head") {
    throw Error(fmt::format("'{}' is not an enshare-lstm v1 checkpoint", path.string()));
  }
  if (n != p.shape.size()) {
    throw Error(fmt::format("checkpoint '{}': {} values for a shape of {}", path.string(), n, p.shape.size()));
  }
  p.w.resize(n);
  for (auto& v : p.w) {
    std::string tok;
    if (!(in >> tok)) throw Error(fmt::format("checkpoint '{}' is truncated", path.string()));
    v = std::strtod(tok.c_str(), nullptr);
  }
  p.validate();
  return p;
}

}  // namespace enshare
