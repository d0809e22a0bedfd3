#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace gspr::net {

// Rows are nodes, columns channels.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct LinearParams {
  Mat<T> w;  // in x out
  Mat<T> b;  // 1 x out
};

template <typename T>
struct LayerNormParams {
  Mat<T> gamma;  // 1 x d
  Mat<T> beta;   // 1 x d
};

// Graph convolution kernel: a center weight plus S unit support directions
// with their own weights (stacked as S blocks of C_in rows).
template <typename T>
struct GConvParams {
  Mat<T> w_center;   // C_in x C_out
  Mat<T> supports;   // S x 3
  Mat<T> w_support;  // (S * C_in) x C_out

  int in_channels() const { return static_cast<int>(w_center.rows()); }
  int out_channels() const { return static_cast<int>(w_center.cols()); }
  int support_count() const { return static_cast<int>(supports.rows()); }
};

// --- linear / activations -------------------------------------------------

template <typename T>
Mat<T> linear_forward(const LinearParams<T>& p, const Mat<T>& x);
// Accumulates into grads; returns dx.
template <typename T>
Mat<T> linear_backward(const LinearParams<T>& p, const Mat<T>& x, const Mat<T>& dy, LinearParams<T>& grads);

template <typename T>
Mat<T> relu(const Mat<T>& x);
// dy masked where the forward output was not positive.
template <typename T>
Mat<T> relu_backward(const Mat<T>& y, const Mat<T>& dy);

// --- layer norm (per row) -------------------------------------------------

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct LayerNormCache {
  Mat<T> xhat;
  Eigen::Matrix<T, Eigen::Dynamic, 1> rstd;
};

template <typename T>
Mat<T> layer_norm_forward(const LayerNormParams<T>& p, const Mat<T>& x, LayerNormCache<T>& cache);
template <typename T>
Mat<T> layer_norm_backward(const LayerNormParams<T>& p, const LayerNormCache<T>& cache, const Mat<T>& dy,
                           LayerNormParams<T>& grads);

// --- graph convolution ----------------------------------------------------

template <typename T>
struct GConvCache {
  Mat<T> x;
  std::vector<Mat<T>> projected;            // per support: x * W_s, n x C_out
  std::vector<Mat<T>> cosine;               // per support: n x J
  std::vector<std::vector<std::int32_t>> arg;  // per support: n x C_out winning neighbour slot
};

// out[n,c] = <f_n, W_c[:,c]> + sum_s max_j <f_j, W_s[:,c]> cos(d_jn, k_s),
// d_jn = coords_j - coords_n; a zero displacement contributes cos = 0.
// Ties in the max go to the neighbour with the smaller node index.
template <typename T>
Mat<T> gconv_forward(const GConvParams<T>& p, const Mat<T>& x, const Mat<T>& coords,
                     std::span<const std::int32_t> neighbors, int J, GConvCache<T>* cache = nullptr);

// Accumulates kernel gradients into `grads`; dx / dcoords (if non-null) are
// accumulated as well and must be pre-sized.
template <typename T>
void gconv_backward(const GConvParams<T>& p, const Mat<T>& coords, std::span<const std::int32_t> neighbors, int J,
                    const GConvCache<T>& cache, const Mat<T>& dy, GConvParams<T>& grads, Mat<T>* dx,
                    Mat<T>* dcoords);

// --- graph max pooling ----------------------------------------------------

// out[i] = element-wise max of x over center i and its J neighbours (ties to
// the smaller node index). arg holds the winning node per output scalar.
template <typename T>
Mat<T> maxpool_forward(const Mat<T>& x, std::span<const std::int32_t> centers,
                       std::span<const std::int32_t> neighbors, int J, std::vector<std::int32_t>* arg = nullptr);
template <typename T>
Mat<T> maxpool_backward(Eigen::Index n_in, std::span<const std::int32_t> arg, const Mat<T>& dy);

// --- multi-head self attention block (post-norm encoder) ------------------

template <typename T>
struct AttentionParams {
  LinearParams<T> q, k, v, o;
  LayerNormParams<T> ln1, ln2;
  LinearParams<T> ffn1, ffn2;
};

template <typename T>
struct AttentionCache {
  Mat<T> x, q, k, v, concat, attn_out, res1, y1, h_pre, h, f, res2;
  std::vector<Mat<T>> probs;  // per head, n x n
  LayerNormCache<T> ln1, ln2;
};

// softmax(Q K^T / sqrt(d_k)) V per head, heads concatenated.
template <typename T>
Mat<T> self_attention(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v, int heads, std::vector<Mat<T>>* probs);

template <typename T>
Mat<T> attention_forward(const AttentionParams<T>& p, const Mat<T>& x, int heads, AttentionCache<T>* cache);
template <typename T>
Mat<T> attention_backward(const AttentionParams<T>& p, int heads, const AttentionCache<T>& cache, const Mat<T>& dy,
                          AttentionParams<T>& grads);

// --- NetVLAD head ---------------------------------------------------------

template <typename T>
struct NetVladParams {
  Mat<T> centers;           // K x D
  LinearParams<T> assign;   // D x K
  LinearParams<T> project;  // (K * D) x d_out
};

template <typename T>
struct NetVladCache {
  Mat<T> x, soft;  // n x K assignments
  Mat<T> vlad;     // K x D residual sums
  Eigen::Matrix<T, Eigen::Dynamic, 1> vlad_norm;
  Mat<T> intra;  // K x D
  T flat_norm{};
  Mat<T> flat;  // 1 x (K*D), globally normalized
  Mat<T> projected;
  T out_norm{};
};

inline constexpr double kNormEps = 1e-12;

// Soft-assignment VLAD, intra-normalization, L2 normalization, linear
// projection and a final L2 normalization. Returns a 1 x d_out row.
template <typename T>
Mat<T> netvlad_forward(const NetVladParams<T>& p, const Mat<T>& x, NetVladCache<T>* cache);
template <typename T>
Mat<T> netvlad_backward(const NetVladParams<T>& p, const NetVladCache<T>& cache, const Mat<T>& dy,
                        NetVladParams<T>& grads);

// Row-wise softmax.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& z);

}  // namespace gspr::net
