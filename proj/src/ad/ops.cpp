#include "nfship/ad/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "nfship/common.hpp"

namespace nfship::ad {
namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using CVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
CMapR<T> cmat(const Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return CMapR<T>(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename T>
MapR<T> mat(Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return MapR<T>(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void expect_rank(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_string(s));
  }
}

void expect_dim(const char* op, const Shape& a, std::size_t ia, const Shape& b, std::size_t ib) {
  if (a.at(ia) != b.at(ib)) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a) + " is incompatible with " +
                     shape_string(b));
  }
}

// Elementwise unary op with derivative computed from (x, y).
template <typename T, typename Fwd, typename Deriv>
Var unary(Tape<T>& tape, Var x, Fwd fwd, Deriv deriv) {
  const Tensor<T>& xv = tape.value(x);
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(xv[i]);
  Var out{tape.size()};
  return tape.record(std::move(y), {x}, [x, out, deriv](Tape<T>& t) {
    const auto& xv = t.value(x);
    const auto& yv = t.value(out);
    const auto& gy = t.grad(out);
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * deriv(xv[i], yv[i]);
  });
}

template <typename T>
void im2col(const T* x, std::size_t B, std::size_t C, std::size_t H, std::size_t W, std::size_t k,
            std::size_t pad, std::size_t Ho, std::size_t Wo, T* cols) {
  const std::size_t plane = Ho * Wo;
  const std::size_t width = B * plane;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* row = cols + ((c * k + ki) * k + kj) * width;
        for (std::size_t b = 0; b < B; ++b) {
          const T* xp = x + (b * C + c) * H * W;
          T* dst = row + b * plane;
          for (std::size_t oh = 0; oh < Ho; ++oh) {
            const auto ih = static_cast<std::ptrdiff_t>(oh + ki) - static_cast<std::ptrdiff_t>(pad);
            for (std::size_t ow = 0; ow < Wo; ++ow) {
              const auto iw =
                  static_cast<std::ptrdiff_t>(ow + kj) - static_cast<std::ptrdiff_t>(pad);
              const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(H) &&
                                  iw < static_cast<std::ptrdiff_t>(W);
              dst[oh * Wo + ow] =
                  inside ? xp[static_cast<std::size_t>(ih) * W + static_cast<std::size_t>(iw)]
                         : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, std::size_t B, std::size_t C, std::size_t H, std::size_t W,
            std::size_t k, std::size_t pad, std::size_t Ho, std::size_t Wo, T* x) {
  const std::size_t plane = Ho * Wo;
  const std::size_t width = B * plane;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* row = cols + ((c * k + ki) * k + kj) * width;
        for (std::size_t b = 0; b < B; ++b) {
          T* xp = x + (b * C + c) * H * W;
          const T* src = row + b * plane;
          for (std::size_t oh = 0; oh < Ho; ++oh) {
            const auto ih = static_cast<std::ptrdiff_t>(oh + ki) - static_cast<std::ptrdiff_t>(pad);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t ow = 0; ow < Wo; ++ow) {
              const auto iw =
                  static_cast<std::ptrdiff_t>(ow + kj) - static_cast<std::ptrdiff_t>(pad);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
              xp[static_cast<std::size_t>(ih) * W + static_cast<std::size_t>(iw)] +=
                  src[oh * Wo + ow];
            }
          }
        }
      }
    }
  }
}

template <typename T>
T clamped_sigmoid_arg(T z) {
  return std::clamp(z, static_cast<T>(-fuzzy::kSigmoidClamp), static_cast<T>(fuzzy::kSigmoidClamp));
}

}  // namespace

template <typename T>
Var dense(Tape<T>& tape, Var x, Var weight, Var bias) {
  const auto& xv = tape.value(x);
  const auto& wv = tape.value(weight);
  expect_rank("dense input", xv.shape(), 2);
  expect_rank("dense weight", wv.shape(), 2);
  expect_dim("dense", xv.shape(), 1, wv.shape(), 1);
  const std::size_t B = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(0);
  if (bias.valid()) {
    const auto& bv = tape.value(bias);
    if (bv.shape() != Shape{out_dim}) {
      throw ShapeError("dense bias: shape " + shape_string(bv.shape()) +
                       " does not match weight " + shape_string(wv.shape()));
    }
  }
  Tensor<T> y({B, out_dim});
  auto Y = mat(y, B, out_dim);
  Y.noalias() = cmat(xv, B, in) * cmat(wv, out_dim, in).transpose();
  if (bias.valid()) {
    Y.rowwise() += CVecMap<T>(tape.value(bias).data(), static_cast<Eigen::Index>(out_dim)).transpose();
  }
  Var out{tape.size()};
  return tape.record(std::move(y), {x, weight, bias}, [=](Tape<T>& t) {
    const auto GY = cmat(t.grad(out), B, out_dim);
    if (t.requires_grad(x)) {
      mat(t.grad(x), B, in).noalias() += GY * cmat(t.value(weight), out_dim, in);
    }
    if (t.requires_grad(weight)) {
      mat(t.grad(weight), out_dim, in).noalias() += GY.transpose() * cmat(t.value(x), B, in);
    }
    if (bias.valid() && t.requires_grad(bias)) {
      VecMap<T>(t.grad(bias).data(), static_cast<Eigen::Index>(out_dim)) +=
          GY.colwise().sum().transpose();
    }
  });
}

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, std::size_t padding) {
  const auto& xv = tape.value(x);
  const auto& wv = tape.value(weight);
  expect_rank("conv2d input", xv.shape(), 4);
  expect_rank("conv2d weight", wv.shape(), 4);
  expect_dim("conv2d", xv.shape(), 1, wv.shape(), 1);
  if (wv.dim(2) != wv.dim(3)) throw ShapeError("conv2d: kernel must be square, got " +
                                               shape_string(wv.shape()));
  const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const std::size_t O = wv.dim(0), k = wv.dim(2);
  if (H + 2 * padding < k || W + 2 * padding < k) {
    throw ShapeError("conv2d: kernel " + shape_string(wv.shape()) + " larger than padded input " +
                     shape_string(xv.shape()));
  }
  if (bias.valid() && tape.value(bias).shape() != Shape{O}) {
    throw ShapeError("conv2d bias: shape " + shape_string(tape.value(bias).shape()) +
                     " does not match weight " + shape_string(wv.shape()));
  }
  const std::size_t Ho = H + 2 * padding - k + 1, Wo = W + 2 * padding - k + 1;
  const std::size_t plane = Ho * Wo, K = C * k * k, N = B * plane;

  auto cols = std::make_shared<AlignedVector<T>>(K * N);
  im2col(xv.data(), B, C, H, W, k, padding, Ho, Wo, cols->data());
  MatR<T> Y = cmat(wv, O, K) * CMapR<T>(cols->data(), static_cast<Eigen::Index>(K),
                                        static_cast<Eigen::Index>(N));
  Tensor<T> y({B, O, Ho, Wo});
  const T* bptr = bias.valid() ? tape.value(bias).data() : nullptr;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < O; ++o) {
      T* dst = y.data() + (b * O + o) * plane;
      const T* src = Y.data() + o * N + b * plane;
      const T add = bptr ? bptr[o] : T(0);
      for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p] + add;
    }
  }
  Var out{tape.size()};
  return tape.record(std::move(y), {x, weight, bias}, [=](Tape<T>& t) {
    const auto& gy = t.grad(out);
    MatR<T> G(O, N);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t o = 0; o < O; ++o) {
        const T* src = gy.data() + (b * O + o) * plane;
        T* dst = G.data() + o * N + b * plane;
        std::copy(src, src + plane, dst);
      }
    }
    const CMapR<T> cols_m(cols->data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
    if (t.requires_grad(weight)) mat(t.grad(weight), O, K).noalias() += G * cols_m.transpose();
    if (bias.valid() && t.requires_grad(bias)) {
      VecMap<T>(t.grad(bias).data(), static_cast<Eigen::Index>(O)) += G.rowwise().sum();
    }
    if (t.requires_grad(x)) {
      MatR<T> dcols = cmat(t.value(weight), O, K).transpose() * G;
      col2im(dcols.data(), B, C, H, W, k, padding, Ho, Wo, t.grad(x).data());
    }
  });
}

template <typename T>
Var batch_norm(Tape<T>& tape, Var x, Var gamma, Var beta, Param<T>& running_mean,
               Param<T>& running_var, const Mode& mode, T momentum, T eps) {
  const auto& xv = tape.value(x);
  expect_rank("batch_norm input", xv.shape(), 2);
  const std::size_t B = xv.dim(0), F = xv.dim(1);
  for (const Tensor<T>* p : std::initializer_list<const Tensor<T>*>{&tape.value(gamma), &tape.value(beta), &running_mean.value,
                             &running_var.value}) {
    if (p->shape() != Shape{F}) {
      throw ShapeError("batch_norm: parameter shape " + shape_string(p->shape()) +
                       " does not match input " + shape_string(xv.shape()));
    }
  }
  const auto& g = tape.value(gamma);
  const auto& be = tape.value(beta);
  Tensor<T> y({B, F});
  auto xhat = std::make_shared<std::vector<T>>(B * F);
  auto inv_std = std::make_shared<std::vector<T>>(F);

  if (mode.training) {
    for (std::size_t f = 0; f < F; ++f) {
      T mean = 0;
      for (std::size_t b = 0; b < B; ++b) mean += xv[b * F + f];
      mean /= static_cast<T>(B);
      T var = 0;
      for (std::size_t b = 0; b < B; ++b) {
        const T d = xv[b * F + f] - mean;
        var += d * d;
      }
      const T biased = var / static_cast<T>(B);
      const T unbiased = B > 1 ? var / static_cast<T>(B - 1) : biased;
      (*inv_std)[f] = T(1) / std::sqrt(biased + eps);
      running_mean.value[f] = (T(1) - momentum) * running_mean.value[f] + momentum * mean;
      running_var.value[f] = (T(1) - momentum) * running_var.value[f] + momentum * unbiased;
      for (std::size_t b = 0; b < B; ++b) {
        const T h = (xv[b * F + f] - mean) * (*inv_std)[f];
        (*xhat)[b * F + f] = h;
        y[b * F + f] = g[f] * h + be[f];
      }
    }
  } else {
    for (std::size_t f = 0; f < F; ++f) {
      (*inv_std)[f] = T(1) / std::sqrt(running_var.value[f] + eps);
      for (std::size_t b = 0; b < B; ++b) {
        const T h = (xv[b * F + f] - running_mean.value[f]) * (*inv_std)[f];
        (*xhat)[b * F + f] = h;
        y[b * F + f] = g[f] * h + be[f];
      }
    }
  }
  const bool training = mode.training;
  Var out{tape.size()};
  return tape.record(std::move(y), {x, gamma, beta}, [=](Tape<T>& t) {
    const auto& gy = t.grad(out);
    const auto& gv = t.value(gamma);
    std::vector<T> sum_gy(F, T(0)), sum_gy_xhat(F, T(0));
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t f = 0; f < F; ++f) {
        sum_gy[f] += gy[b * F + f];
        sum_gy_xhat[f] += gy[b * F + f] * (*xhat)[b * F + f];
      }
    }
    if (t.requires_grad(gamma)) {
      auto& gg = t.grad(gamma);
      for (std::size_t f = 0; f < F; ++f) gg[f] += sum_gy_xhat[f];
    }
    if (t.requires_grad(beta)) {
      auto& gb = t.grad(beta);
      for (std::size_t f = 0; f < F; ++f) gb[f] += sum_gy[f];
    }
    if (t.requires_grad(x)) {
      auto& gx = t.grad(x);
      const T n = static_cast<T>(B);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t f = 0; f < F; ++f) {
          const std::size_t i = b * F + f;
          if (training) {
            gx[i] += gv[f] * (*inv_std)[f] / n *
                     (n * gy[i] - sum_gy[f] - (*xhat)[i] * sum_gy_xhat[f]);
          } else {
            gx[i] += gy[i] * gv[f] * (*inv_std)[f];
          }
        }
      }
    }
  });
}

template <typename T>
Var dropout(Tape<T>& tape, Var x, T rate, const Mode& mode) {
  if (!mode.training || !mode.dropout || rate <= T(0)) return x;
  if (rate >= T(1)) throw std::invalid_argument("dropout rate must be below 1");
  if (mode.rng == nullptr) throw std::invalid_argument("dropout in training mode needs an rng");
  const auto& xv = tape.value(x);
  auto mask = std::make_shared<std::vector<T>>(xv.size());
  std::bernoulli_distribution keep(1.0 - static_cast<double>(rate));
  const T scale_kept = T(1) / (T(1) - rate);
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    (*mask)[i] = keep(*mode.rng) ? scale_kept : T(0);
    y[i] = xv[i] * (*mask)[i];
  }
  Var out{tape.size()};
  return tape.record(std::move(y), {x}, [=](Tape<T>& t) {
    const auto& gy = t.grad(out);
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * (*mask)[i];
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  return unary(
      tape, x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var leaky_relu(Tape<T>& tape, Var x, T negative_slope) {
  return unary(
      tape, x, [negative_slope](T v) { return v > T(0) ? v : negative_slope * v; },
      [negative_slope](T v, T) { return v > T(0) ? T(1) : negative_slope; });
}

template <typename T>
Var softplus(Tape<T>& tape, Var x) {
  return unary(
      tape, x, [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) { return fuzzy::detail::sigmoid(v); });
}

template <typename T>
Var flatten(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  if (xv.rank() < 1) throw ShapeError("flatten: scalar input");
  const std::size_t B = xv.dim(0);
  const std::size_t rest = B == 0 ? 0 : xv.size() / B;
  Tensor<T> y = xv.reshaped({B, rest});
  Var out{tape.size()};
  return tape.record(std::move(y), {x}, [=](Tape<T>& t) {
    const auto& gy = t.grad(out);
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
  });
}

template <typename T>
Var bilinear(Tape<T>& tape, Var x1, Var x2, Var weight, Var bias) {
  const auto& a = tape.value(x1);
  const auto& c = tape.value(x2);
  const auto& w = tape.value(weight);
  expect_rank("bilinear x1", a.shape(), 2);
  expect_rank("bilinear x2", c.shape(), 2);
  expect_rank("bilinear weight", w.shape(), 3);
  expect_dim("bilinear", a.shape(), 0, c.shape(), 0);
  expect_dim("bilinear", a.shape(), 1, w.shape(), 1);
  expect_dim("bilinear", c.shape(), 1, w.shape(), 2);
  const std::size_t B = a.dim(0), n1 = a.dim(1), n2 = c.dim(1), O = w.dim(0);
  if (bias.valid() && tape.value(bias).shape() != Shape{O}) {
    throw ShapeError("bilinear bias: shape " + shape_string(tape.value(bias).shape()) +
                     " does not match weight " + shape_string(w.shape()));
  }
  Tensor<T> y({B, O});
  const auto A = cmat(a, B, n1);
  const auto Cm = cmat(c, B, n2);
  MatR<T> Z(B, n2);
  for (std::size_t o = 0; o < O; ++o) {
    Z.noalias() = A * CMapR<T>(w.data() + o * n1 * n2, static_cast<Eigen::Index>(n1),
                               static_cast<Eigen::Index>(n2));
    const Eigen::Matrix<T, Eigen::Dynamic, 1> s = Z.cwiseProduct(Cm).rowwise().sum();
    const T add = bias.valid() ? tape.value(bias)[o] : T(0);
    for (std::size_t b = 0; b < B; ++b) y[b * O + o] = s(static_cast<Eigen::Index>(b)) + add;
  }
  Var out{tape.size()};
  return tape.record(std::move(y), {x1, x2, weight, bias}, [=](Tape<T>& t) {
    const auto& gy = t.grad(out);
    const auto A = cmat(t.value(x1), B, n1);
    const auto Cm = cmat(t.value(x2), B, n2);
    const auto& wv = t.value(weight);
    const bool ga = t.requires_grad(x1), gc = t.requires_grad(x2), gw = t.requires_grad(weight);
    MatR<T> G(B, n2), Z(B, n2);
    for (std::size_t o = 0; o < O; ++o) {
      const CMapR<T> Wo(wv.data() + o * n1 * n2, static_cast<Eigen::Index>(n1),
                        static_cast<Eigen::Index>(n2));
      Eigen::Matrix<T, Eigen::Dynamic, 1> g(B);
      for (std::size_t b = 0; b < B; ++b) g(static_cast<Eigen::Index>(b)) = gy[b * O + o];
      if (gw || ga) G.noalias() = g.asDiagonal() * Cm;
      if (gw) {
        MapR<T>(t.grad(weight).data() + o * n1 * n2, static_cast<Eigen::Index>(n1),
                static_cast<Eigen::Index>(n2))
            .noalias() += A.transpose() * G;
      }
      if (ga) mat(t.grad(x1), B, n1).noalias() += G * Wo.transpose();
      if (gc) {
        Z.noalias() = A * Wo;
        mat(t.grad(x2), B, n2).noalias() += g.asDiagonal() * Z;
      }
    }
    if (bias.valid() && t.requires_grad(bias)) {
      auto& gb = t.grad(bias);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < O; ++o) gb[o] += gy[b * O + o];
    }
  });
}

template <typename T>
Var softmax(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  expect_rank("softmax", xv.shape(), 2);
  const std::size_t B = xv.dim(0), m = xv.dim(1);
  Tensor<T> y({B, m});
  for (std::size_t b = 0; b < B; ++b) {
    T peak = xv[b * m];
    for (std::size_t j = 1; j < m; ++j) peak = std::max(peak, xv[b * m + j]);
    T sum = 0;
    for (std::size_t j = 0; j < m; ++j) sum += (y[b * m + j] = std::exp(xv[b * m + j] - peak));
    for (std::size_t j = 0; j < m; ++j) y[b * m + j] /= sum;
  }
  Var out{tape.size()};
  return tape.record(std::move(y), {x}, [=](Tape<T>& t) {
    const auto& yv = t.value(out);
    const auto& gy = t.grad(out);
    auto& gx = t.grad(x);
    for (std::size_t b = 0; b < B; ++b) {
      T dotp = 0;
      for (std::size_t j = 0; j < m; ++j) dotp += gy[b * m + j] * yv[b * m + j];
      for (std::size_t j = 0; j < m; ++j) gx[b * m + j] += yv[b * m + j] * (gy[b * m + j] - dotp);
    }
  });
}

template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::span<const int> labels) {
  const auto& xv = tape.value(logits);
  expect_rank("softmax_cross_entropy", xv.shape(), 2);
  const std::size_t B = xv.dim(0), m = xv.dim(1);
  if (labels.size() != B) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + shape_string(xv.shape()));
  }
  auto probs = std::make_shared<std::vector<T>>(B * m);
  auto targets = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  T loss = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= m) {
      throw std::out_of_range("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(m) + ")");
    }
    T peak = xv[b * m];
    for (std::size_t j = 1; j < m; ++j) peak = std::max(peak, xv[b * m + j]);
    T sum = 0;
    for (std::size_t j = 0; j < m; ++j) sum += ((*probs)[b * m + j] = std::exp(xv[b * m + j] - peak));
    for (std::size_t j = 0; j < m; ++j) (*probs)[b * m + j] /= sum;
    loss += peak + std::log(sum) - xv[b * m + static_cast<std::size_t>(label)];
  }
  Tensor<T> y({1}, loss / static_cast<T>(B));
  Var out{tape.size()};
  return tape.record(std::move(y), {logits}, [=](Tape<T>& t) {
    const T g = t.grad(out)[0] / static_cast<T>(B);
    auto& gx = t.grad(logits);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t j = 0; j < m; ++j) {
        const T target = static_cast<int>(j) == (*targets)[b] ? T(1) : T(0);
        gx[b * m + j] += g * ((*probs)[b * m + j] - target);
      }
    }
  });
}

template <typename T>
Var exp(Tape<T>& tape, Var x) {
  return unary(
      tape, x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var log(Tape<T>& tape, Var x) {
  for (T v : tape.value(x).values()) {
    if (!(v > T(0))) throw NumericError("log: non-positive input " + std::to_string(v));
  }
  return unary(
      tape, x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor) {
  return unary(
      tape, x, [factor](T v) { return factor * v; }, [factor](T, T) { return factor; });
}

template <typename T>
Var dot(Tape<T>& tape, Var x, const Tensor<T>& coeffs) {
  const auto& xv = tape.value(x);
  if (coeffs.size() != xv.size()) {
    throw ShapeError("dot: coefficients " + shape_string(coeffs.shape()) + " vs input " +
                     shape_string(xv.shape()));
  }
  T s = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += coeffs[i] * xv[i];
  auto c = std::make_shared<Tensor<T>>(coeffs);
  Var out{tape.size()};
  return tape.record(Tensor<T>({1}, s), {x}, [=](Tape<T>& t) {
    const T g = t.grad(out)[0];
    auto& gx = t.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * (*c)[i];
  });
}

template <typename T>
Var fuzzy_conditions(Tape<T>& tape, Var ais, Var slopes, const fuzzy::RuleLayout& layout,
                     T r_and) {
  if (!(r_and < T(0))) throw std::invalid_argument("fuzzy_conditions: andness must be negative");
  const auto& xv = tape.value(ais);
  const auto& sv = tape.value(slopes);
  expect_rank("fuzzy_conditions ais", xv.shape(), 2);
  const std::size_t B = xv.dim(0), F = xv.dim(1);
  const std::size_t K = layout.comparison_count(), N = layout.condition_count();
  for (std::size_t f : layout.feature) {
    if (f >= F) {
      throw ShapeError("fuzzy_conditions: rule references feature " + std::to_string(f) +
                       " but ais has shape " + shape_string(xv.shape()));
    }
  }
  const bool shared = sv.rank() == 1;
  if (!(shared ? sv.shape() == Shape{K} : sv.shape() == Shape{B, K})) {
    throw ShapeError("fuzzy_conditions: slopes " + shape_string(sv.shape()) +
                     " do not match ais " + shape_string(xv.shape()) + " with " +
                     std::to_string(K) + " comparisons");
  }
  auto memberships = std::make_shared<std::vector<T>>(B * K);
  auto lay = std::make_shared<const fuzzy::RuleLayout>(layout);
  Tensor<T> y({B, N});
  for (std::size_t b = 0; b < B; ++b) {
    const T* s = sv.data() + (shared ? 0 : b * K);
    for (std::size_t k = 0; k < K; ++k) {
      const T d = fuzzy::detail::comparison_offset(layout.op[k], xv[b * F + layout.feature[k]],
                                                   static_cast<T>(layout.threshold[k]));
      (*memberships)[b * K + k] = fuzzy::detail::sigmoid(s[k] * d);
    }
    for (std::size_t c = 0; c < N; ++c) {
      const auto range = layout.condition[c];
      if (range.size() == 0) {
        y[b * N + c] = T(1);
        continue;
      }
      y[b * N + c] = fuzzy::detail::wem_mean(
          std::span<const T>(memberships->data() + b * K + range.begin, range.size()), r_and);
    }
  }
  Var out{tape.size()};
  return tape.record(std::move(y), {ais, slopes}, [=](Tape<T>& t) {
    const fuzzy::RuleLayout& layout = *lay;
    const auto& xv = t.value(ais);
    const auto& sv = t.value(slopes);
    const auto& gy = t.grad(out);
    const bool gs_needed = t.requires_grad(slopes), gx_needed = t.requires_grad(ais);
    T* gs = gs_needed ? t.grad(slopes).data() : nullptr;
    T* gx = gx_needed ? t.grad(ais).data() : nullptr;
    std::vector<T> share;
    for (std::size_t b = 0; b < B; ++b) {
      const T* s = sv.data() + (shared ? 0 : b * K);
      T* gsb = gs ? gs + (shared ? 0 : b * K) : nullptr;
      const T* m = memberships->data() + b * K;
      for (std::size_t c = 0; c < N; ++c) {
        const auto range = layout.condition[c];
        if (range.size() == 0) continue;
        const T gc = gy[b * N + c];
        // d wem_mean / d m_k = softmax(r m)_k
        T peak = r_and * m[range.begin];
        for (std::size_t k = range.begin; k < range.end; ++k) peak = std::max(peak, r_and * m[k]);
        share.resize(range.size());
        T sum = 0;
        for (std::size_t k = range.begin; k < range.end; ++k) {
          sum += (share[k - range.begin] = std::exp(r_and * m[k] - peak));
        }
        for (std::size_t k = range.begin; k < range.end; ++k) {
          const T d = fuzzy::detail::comparison_offset(layout.op[k], xv[b * F + layout.feature[k]],
                                                       static_cast<T>(layout.threshold[k]));
          const T z = s[k] * d;
          if (clamped_sigmoid_arg(z) != z) continue;
          const T dz = gc * share[k - range.begin] / sum * m[k] * (T(1) - m[k]);
          if (gsb) gsb[k] += dz * d;
          if (gx) {
            const T dir = layout.op[k] == cart::Op::kGreater ? T(1) : T(-1);
            gx[b * F + layout.feature[k]] += dz * s[k] * dir;
          }
        }
      }
    }
  });
}

template <typename T>
std::vector<T> segment_softmax(std::span<const T> logits,
                               std::span<const fuzzy::RuleLayout::Range> segments) {
  std::vector<T> w(logits.size(), T(0));
  for (const auto& seg : segments) {
    if (seg.size() == 0) continue;
    T peak = logits[seg.begin];
    for (std::size_t j = seg.begin; j < seg.end; ++j) peak = std::max(peak, logits[j]);
    T sum = 0;
    for (std::size_t j = seg.begin; j < seg.end; ++j) sum += (w[j] = std::exp(logits[j] - peak));
    for (std::size_t j = seg.begin; j < seg.end; ++j) w[j] /= sum;
  }
  return w;
}

template <typename T>
Var simplex_segment_sum(Tape<T>& tape, Var values, Var logits,
                        std::span<const fuzzy::RuleLayout::Range> segments) {
  const auto& vv = tape.value(values);
  const auto& lv = tape.value(logits);
  expect_rank("simplex_segment_sum values", vv.shape(), 2);
  const std::size_t B = vv.dim(0), N = vv.dim(1), S = segments.size();
  if (lv.shape() != Shape{N}) {
    throw ShapeError("simplex_segment_sum: logits " + shape_string(lv.shape()) +
                     " do not match values " + shape_string(vv.shape()));
  }
  if (!segments.empty() && segments.back().end != N) {
    throw ShapeError("simplex_segment_sum: segments cover " + std::to_string(segments.back().end) +
                     " entries but values have shape " + shape_string(vv.shape()));
  }
  auto w = std::make_shared<std::vector<T>>(segment_softmax<T>(lv.values(), segments));
  auto segs = std::make_shared<std::vector<fuzzy::RuleLayout::Range>>(segments.begin(),
                                                                      segments.end());
  Tensor<T> y({B, S});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t s = 0; s < S; ++s) {
      const auto seg = segments[s];
      if (seg.size() == 0) {
        y[b * S + s] = T(1);
        continue;
      }
      T acc = 0;
      for (std::size_t j = seg.begin; j < seg.end; ++j) acc += (*w)[j] * vv[b * N + j];
      y[b * S + s] = acc;
    }
  }
  Var out{tape.size()};
  return tape.record(std::move(y), {values, logits}, [=](Tape<T>& t) {
    const auto& vv = t.value(values);
    const auto& gy = t.grad(out);
    if (t.requires_grad(values)) {
      auto& gv = t.grad(values);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < S; ++s)
          for (std::size_t j = (*segs)[s].begin; j < (*segs)[s].end; ++j)
            gv[b * N + j] += gy[b * S + s] * (*w)[j];
    }
    if (t.requires_grad(logits)) {
      std::vector<T> gw(N, T(0));
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < S; ++s)
          for (std::size_t j = (*segs)[s].begin; j < (*segs)[s].end; ++j)
            gw[j] += gy[b * S + s] * vv[b * N + j];
      auto& gl = t.grad(logits);
      for (const auto& seg : *segs) {
        T inner = 0;
        for (std::size_t j = seg.begin; j < seg.end; ++j) inner += (*w)[j] * gw[j];
        for (std::size_t j = seg.begin; j < seg.end; ++j) gl[j] += (*w)[j] * (gw[j] - inner);
      }
    }
  });
}

CrossEntropyResult softmax_cross_entropy(std::span<const double> logits,
                                         std::span<const double> one_hot) {
  if (logits.size() != one_hot.size() || logits.empty()) {
    throw ShapeError("softmax_cross_entropy: logits and target lengths differ");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - peak);
  const double lse = peak + std::log(sum);
  CrossEntropyResult res;
  res.gradient.resize(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) {
    res.loss -= one_hot[j] * (logits[j] - lse);
    res.gradient[j] = std::exp(logits[j] - lse) - one_hot[j];
  }
  return res;
}

#define NFSHIP_INSTANTIATE_OPS(T)                                                              \
  template Var dense<T>(Tape<T>&, Var, Var, Var);                                              \
  template Var conv2d<T>(Tape<T>&, Var, Var, Var, std::size_t);                                \
  template Var batch_norm<T>(Tape<T>&, Var, Var, Var, Param<T>&, Param<T>&, const Mode&, T, T); \
  template Var dropout<T>(Tape<T>&, Var, T, const Mode&);                                      \
  template Var relu<T>(Tape<T>&, Var);                                                         \
  template Var leaky_relu<T>(Tape<T>&, Var, T);                                                \
  template Var softplus<T>(Tape<T>&, Var);                                                     \
  template Var flatten<T>(Tape<T>&, Var);                                                      \
  template Var bilinear<T>(Tape<T>&, Var, Var, Var, Var);                                      \
  template Var softmax<T>(Tape<T>&, Var);                                                      \
  template Var softmax_cross_entropy<T>(Tape<T>&, Var, std::span<const int>);                 \
  template Var exp<T>(Tape<T>&, Var);                                                          \
  template Var log<T>(Tape<T>&, Var);                                                          \
  template Var scale<T>(Tape<T>&, Var, T);                                                     \
  template Var dot<T>(Tape<T>&, Var, const Tensor<T>&);                                        \
  template Var fuzzy_conditions<T>(Tape<T>&, Var, Var, const fuzzy::RuleLayout&, T);           \
  template Var simplex_segment_sum<T>(Tape<T>&, Var, Var,                                      \
                                      std::span<const fuzzy::RuleLayout::Range>);              \
  template std::vector<T> segment_softmax<T>(std::span<const T>,                               \
                                             std::span<const fuzzy::RuleLayout::Range>);

NFSHIP_INSTANTIATE_OPS(float)
NFSHIP_INSTANTIATE_OPS(double)

}  // namespace nfship::ad
