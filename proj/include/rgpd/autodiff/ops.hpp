#pragma once

#include <span>
#include <vector>

#include "rgpd/autodiff/tensor.hpp"

// The closed op set. Broadcasting is limited to scalars, rows (1xF against NxF)
// and channels (Cx1 against CxT).
namespace rgpd {

Tensor matmul(const Tensor& a, const Tensor& b);
// x stacks blocks of a.cols() rows; each block is multiplied by a on the left.
Tensor block_matmul(const Tensor& a, const Tensor& x);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor add_row(const Tensor& a, const Tensor& row);
Tensor mul_row(const Tensor& a, const Tensor& row);
Tensor mul_col(const Tensor& a, const Tensor& col);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mean_rows(const Tensor& a);  // RxC -> 1xC
Tensor mean_cols(const Tensor& a);  // RxC -> Rx1

Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor elu(const Tensor& a, double alpha = 1.0);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// Max-subtracted softmax along `axis` (rank 1 or 2).
Tensor softmax(const Tensor& x, std::size_t axis);
// Row softmax restricted to entries where mask != 0; masked entries are 0.
// Every row needs at least one unmasked entry.
Tensor masked_softmax_rows(const Tensor& x, std::span<const double> mask);
// u: Nx1, v: Mx1 -> NxM with out(i,j) = u(i) + v(j).
Tensor outer_add(const Tensor& u, const Tensor& v);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);

enum class Padding { same, causal };

// Per-channel convolution y(i) = sum_j k(j) x(i - d*j + pad); x is CxT,
// kernel is Cxk. Same padding uses pad = d*(k-1)/2 and needs odd k; causal
// uses pad = 0. Out-of-range samples read as zero.
Tensor dilated_depthwise_conv1d(const Tensor& x, const Tensor& kernel, std::size_t dilation,
                                Padding padding = Padding::same);
// Dilation 1, same padding. Odd kernel sizes only.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel);
// x: CxT, kernel: CxC' -> C'xT, out(c',t) = sum_c x(c,t) k(c,c').
Tensor pointwise_conv(const Tensor& x, const Tensor& kernel);

}  // namespace rgpd
