#include "ddcnet/layers.hpp"

#include <algorithm>
#include <cstring>

namespace ddcnet {
namespace {

template <typename Scalar>
using Matrix = typename Tensor<Scalar>::Matrix;

// Rows are output pixels (b, oy, ox); columns are (ky, kx, ci). Fills the
// rows [r0, r0 + col.rows()) of the full patch matrix.
template <typename Scalar>
void im2col(const Tensor<Scalar>& x, Index k, Index stride, Index pad, Index oh, Index ow,
            Index r0, Matrix<Scalar>& col) {
  const Index h = x.h(), w = x.w(), c = x.c();
  const Scalar* src = x.data();
  for (Index r = 0; r < col.rows(); ++r) {
    const Index p = r0 + r;
    const Index b = p / (oh * ow), oy = (p / ow) % oh, ox = p % ow;
    Scalar* row = col.data() + r * k * k * c;
    for (Index ky = 0; ky < k; ++ky) {
      const Index iy = oy * stride - pad + ky;
      for (Index kx = 0; kx < k; ++kx, row += c) {
        const Index ix = ox * stride - pad + kx;
        if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
          std::fill_n(row, c, Scalar(0));
        } else {
          std::copy_n(src + ((b * h + iy) * w + ix) * c, c, row);
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Matrix<Scalar>& col, Index k, Index stride, Index pad, Index oh, Index ow,
            Index r0, Tensor<Scalar>& dx) {
  const Index h = dx.h(), w = dx.w(), c = dx.c();
  Scalar* dst = dx.data();
  for (Index r = 0; r < col.rows(); ++r) {
    const Index p = r0 + r;
    const Index b = p / (oh * ow), oy = (p / ow) % oh, ox = p % ow;
    const Scalar* row = col.data() + r * k * k * c;
    for (Index ky = 0; ky < k; ++ky) {
      const Index iy = oy * stride - pad + ky;
      for (Index kx = 0; kx < k; ++kx, row += c) {
        const Index ix = ox * stride - pad + kx;
        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
        Scalar* out = dst + ((b * h + iy) * w + ix) * c;
        for (Index ch = 0; ch < c; ++ch) out[ch] += row[ch];
      }
    }
  }
}

// Patch rows are processed in blocks small enough to stay in cache.
inline Index patch_block_rows(Index cols) { return std::max<Index>(64, (Index(1) << 16) / cols); }

}  // namespace

template <typename Scalar>
Conv2d<Scalar>::Conv2d(ParameterStore<Scalar>& store, const std::string& name, Index in,
                       Index out, Index kernel, Index stride, Index pad, Init weight_init)
    : in_(in), out_(out), kernel_(kernel), stride_(stride), pad_(pad < 0 ? kernel / 2 : pad) {
  if (in < 1 || out < 1 || kernel < 1 || stride < 1) {
    throw ConfigError("Conv2d '" + name + "': invalid geometry");
  }
  weight_ = &store.bind(name + ".weight", {kernel, kernel, in, out}, weight_init,
                        kernel * kernel * in);
  bias_ = &store.bind(name + ".bias", {out}, Init::Zero, 1);
}

template <typename Scalar>
void Conv2d<Scalar>::check_input(const Tensor<Scalar>& x) const {
  require_rank4(x.dims(), "Conv2d");
  if (x.c() != in_) {
    throw ShapeError("Conv2d: expected " + std::to_string(in_) + " input channels, got " +
                     x.shape_string());
  }
  if (out_size(x.h()) < 1 || out_size(x.w()) < 1) throw ShapeError("Conv2d: input too small");
}

template <typename Scalar>
Tensor<Scalar> Conv2d<Scalar>::forward(const Tensor<Scalar>& x) const {
  check_input(x);
  const Index oh = out_size(x.h()), ow = out_size(x.w());
  Tensor<Scalar> y(x.n(), oh, ow, out_);
  auto wm = weight_->value.matrix(kernel_ * kernel_ * in_, out_);
  auto ym = y.matrix();
  if (kernel_ == 1 && stride_ == 1 && pad_ == 0) {
    ym.noalias() = x.matrix() * wm;
  } else {
    const Index rows = ym.rows(), cols = kernel_ * kernel_ * in_;
    const Index block = patch_block_rows(cols);
    Matrix<Scalar> col;
    for (Index r0 = 0; r0 < rows; r0 += block) {
      col.resize(std::min(block, rows - r0), cols);
      im2col(x, kernel_, stride_, pad_, oh, ow, r0, col);
      ym.middleRows(r0, col.rows()).noalias() = col * wm;
    }
  }
  ym.rowwise() += bias_->value.matrix(1, out_).row(0);
  return y;
}

template <typename Scalar>
Tensor<Scalar> Conv2d<Scalar>::backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy) const {
  check_input(x);
  const Index oh = out_size(x.h()), ow = out_size(x.w());
  if (dy.n() != x.n() || dy.h() != oh || dy.w() != ow || dy.c() != out_) {
    throw ShapeError("Conv2d::backward: gradient shape " + dy.shape_string());
  }
  auto wm = weight_->value.matrix(kernel_ * kernel_ * in_, out_);
  auto dwm = weight_->grad.matrix(kernel_ * kernel_ * in_, out_);
  auto dym = dy.matrix();
  bias_->grad.matrix(1, out_) += dym.colwise().sum();
  Tensor<Scalar> dx(x.dims());
  if (kernel_ == 1 && stride_ == 1 && pad_ == 0) {
    dwm.noalias() += x.matrix().transpose() * dym;
    dx.matrix().noalias() = dym * wm.transpose();
  } else {
    const Index rows = dym.rows(), cols = kernel_ * kernel_ * in_;
    const Index block = patch_block_rows(cols);
    Matrix<Scalar> col, dcol;
    for (Index r0 = 0; r0 < rows; r0 += block) {
      const Index len = std::min(block, rows - r0);
      col.resize(len, cols);
      im2col(x, kernel_, stride_, pad_, oh, ow, r0, col);
      dwm.noalias() += col.transpose() * dym.middleRows(r0, len);
      dcol.noalias() = dym.middleRows(r0, len) * wm.transpose();
      col2im(dcol, kernel_, stride_, pad_, oh, ow, r0, dx);
    }
  }
  return dx;
}

template <typename Scalar>
ConvTranspose2x2<Scalar>::ConvTranspose2x2(ParameterStore<Scalar>& store, const std::string& name,
                                           Index in, Index out)
    : in_(in), out_(out) {
  if (in < 1 || out < 1) throw ConfigError("ConvTranspose2x2 '" + name + "': invalid channels");
  // Each output pixel receives exactly `in` contributions.
  weight_ = &store.bind(name + ".weight", {in, 2, 2, out}, Init::KaimingNormal, in);
  bias_ = &store.bind(name + ".bias", {out}, Init::Zero, 1);
}

template <typename Scalar>
Tensor<Scalar> ConvTranspose2x2<Scalar>::forward(const Tensor<Scalar>& x) const {
  require_rank4(x.dims(), "ConvTranspose2x2");
  if (x.c() != in_) throw ShapeError("ConvTranspose2x2: channel mismatch " + x.shape_string());
  const Index n = x.n(), h = x.h(), w = x.w();
  const Matrix<Scalar> z = x.matrix() * weight_->value.matrix(in_, 4 * out_);
  Tensor<Scalar> y(n, 2 * h, 2 * w, out_);
  const Scalar* bias = bias_->value.data();
  for (Index b = 0; b < n; ++b) {
    for (Index iy = 0; iy < h; ++iy) {
      for (Index ix = 0; ix < w; ++ix) {
        const Scalar* zr = z.data() + ((b * h + iy) * w + ix) * 4 * out_;
        for (Index a = 0; a < 2; ++a) {
          for (Index e = 0; e < 2; ++e) {
            Scalar* dst = &y(b, 2 * iy + a, 2 * ix + e, 0);
            const Scalar* src = zr + (a * 2 + e) * out_;
            for (Index o = 0; o < out_; ++o) dst[o] = src[o] + bias[o];
          }
        }
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> ConvTranspose2x2<Scalar>::backward(const Tensor<Scalar>& x,
                                                  const Tensor<Scalar>& dy) const {
  const Index n = x.n(), h = x.h(), w = x.w();
  if (dy.n() != n || dy.h() != 2 * h || dy.w() != 2 * w || dy.c() != out_) {
    throw ShapeError("ConvTranspose2x2::backward: gradient shape " + dy.shape_string());
  }
  Matrix<Scalar> dz(n * h * w, 4 * out_);
  for (Index b = 0; b < n; ++b) {
    for (Index iy = 0; iy < h; ++iy) {
      for (Index ix = 0; ix < w; ++ix) {
        Scalar* zr = dz.data() + ((b * h + iy) * w + ix) * 4 * out_;
        for (Index a = 0; a < 2; ++a) {
          for (Index e = 0; e < 2; ++e) {
            std::copy_n(dy.data() + ((b * 2 * h + 2 * iy + a) * 2 * w + 2 * ix + e) * out_, out_,
                        zr + (a * 2 + e) * out_);
          }
        }
      }
    }
  }
  bias_->grad.matrix(1, out_) += dy.matrix().colwise().sum();
  weight_->grad.matrix(in_, 4 * out_).noalias() += x.matrix().transpose() * dz;
  Tensor<Scalar> dx(x.dims());
  dx.matrix().noalias() = dz * weight_->value.matrix(in_, 4 * out_).transpose();
  return dx;
}

template <typename Scalar>
Linear<Scalar>::Linear(ParameterStore<Scalar>& store, const std::string& name, Index in,
                       Index out)
    : in_(in), out_(out) {
  if (in < 1 || out < 1) throw ConfigError("Linear '" + name + "': invalid width");
  weight_ = &store.bind(name + ".weight", {in, out}, Init::KaimingNormal, in);
  bias_ = &store.bind(name + ".bias", {out}, Init::Zero, 1);
}

template <typename Scalar>
typename Linear<Scalar>::Matrix Linear<Scalar>::forward(const Matrix& x) const {
  if (x.cols() != in_) throw ShapeError("Linear: input width mismatch");
  Matrix y = x * weight_->value.matrix(in_, out_);
  y.rowwise() += bias_->value.matrix(1, out_).row(0);
  return y;
}

template <typename Scalar>
typename Linear<Scalar>::Matrix Linear<Scalar>::backward(const Matrix& x, const Matrix& dy) const {
  bias_->grad.matrix(1, out_) += dy.colwise().sum();
  weight_->grad.matrix(in_, out_).noalias() += x.transpose() * dy;
  return dy * weight_->value.matrix(in_, out_).transpose();
}

template class Conv2d<float>;
template class Conv2d<double>;
template class ConvTranspose2x2<float>;
template class ConvTranspose2x2<double>;
template class Linear<float>;
template class Linear<double>;

}  // namespace ddcnet
