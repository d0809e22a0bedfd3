#include "gspr/net/layers.hpp"

#include <cmath>
#include <string>

#include "gspr/error.hpp"

namespace gspr::net {
namespace {

template <typename T>
using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// d/dv of v / max(|v|, eps), applied to upstream dy given y = normalized v.
template <typename T, typename D>
Mat<T> normalize_backward(const Mat<T>& y, T norm, const D& dy) {
  if (norm > static_cast<T>(kNormEps)) {
    const T dot = (y.array() * dy.array()).sum();
    return (dy - y * dot) / norm;
  }
  return dy / static_cast<T>(kNormEps);
}

}  // namespace

template <typename T>
Mat<T> linear_forward(const LinearParams<T>& p, const Mat<T>& x) {
  if (x.cols() != p.w.rows()) {
    throw InputError("linear layer expects " + std::to_string(p.w.rows()) + " inputs, got " +
                     std::to_string(x.cols()));
  }
  Mat<T> y = x * p.w;
  y.rowwise() += p.b.row(0);
  return y;
}

template <typename T>
Mat<T> linear_backward(const LinearParams<T>& p, const Mat<T>& x, const Mat<T>& dy, LinearParams<T>& grads) {
  grads.w.noalias() += x.transpose() * dy;
  grads.b += dy.colwise().sum();
  return dy * p.w.transpose();
}

template <typename T>
Mat<T> relu(const Mat<T>& x) {
  return x.cwiseMax(T(0));
}

template <typename T>
Mat<T> relu_backward(const Mat<T>& y, const Mat<T>& dy) {
  return (y.array() > T(0)).select(dy, T(0));
}

template <typename T>
Mat<T> layer_norm_forward(const LayerNormParams<T>& p, const Mat<T>& x, LayerNormCache<T>& cache) {
  const Eigen::Index n = x.rows();
  const auto d = static_cast<T>(x.cols());
  cache.xhat.resize(n, x.cols());
  cache.rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).sum() / d;
    const auto centered = (x.row(i).array() - mean).matrix();
    const T var = centered.squaredNorm() / d;
    const T rstd = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    cache.rstd[i] = rstd;
    cache.xhat.row(i) = centered * rstd;
  }
  Mat<T> y = cache.xhat.array().rowwise() * p.gamma.row(0).array();
  y.rowwise() += p.beta.row(0);
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const LayerNormParams<T>& p, const LayerNormCache<T>& cache, const Mat<T>& dy,
                           LayerNormParams<T>& grads) {
  grads.gamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  grads.beta += dy.colwise().sum();
  const Mat<T> dxhat = dy.array().rowwise() * p.gamma.row(0).array();
  const auto d = static_cast<T>(dy.cols());
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const T s1 = dxhat.row(i).sum();
    const T s2 = dxhat.row(i).dot(cache.xhat.row(i));
    dx.row(i) = (cache.rstd[i] / d) * (d * dxhat.row(i).array() - s1 - cache.xhat.row(i).array() * s2).matrix();
  }
  return dx;
}

template <typename T>
Mat<T> gconv_forward(const GConvParams<T>& p, const Mat<T>& x, const Mat<T>& coords,
                     std::span<const std::int32_t> neighbors, int J, GConvCache<T>* cache) {
  const Eigen::Index n = x.rows();
  const int cin = p.in_channels();
  const int cout = p.out_channels();
  const int S = p.support_count();
  if (x.cols() != cin || p.w_support.rows() != static_cast<Eigen::Index>(S) * cin || p.w_support.cols() != cout ||
      coords.rows() != n || coords.cols() != 3 || neighbors.size() != static_cast<std::size_t>(n) * J) {
    throw InputError("graph convolution dimension mismatch");
  }
  Mat<T> out = x * p.w_center;
  if (cache != nullptr) {
    cache->x = x;
    cache->projected.assign(S, Mat<T>());
    cache->cosine.assign(S, Mat<T>());
    cache->arg.assign(S, {});
  }
  for (int s = 0; s < S; ++s) {
    const Eigen::Matrix<T, 1, 3> k = p.supports.row(s);
    const T k_norm = k.norm();
    Mat<T> proj = x * p.w_support.middleRows(static_cast<Eigen::Index>(s) * cin, cin);
    Mat<T> cosine(n, J);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < J; ++j) {
        const auto m = neighbors[static_cast<std::size_t>(i) * J + j];
        const Eigen::Matrix<T, 1, 3> d = coords.row(m) - coords.row(i);
        const T dn = d.norm();
        cosine(i, j) = (dn > T(0) && k_norm > T(0)) ? d.dot(k) / (dn * k_norm) : T(0);
      }
    }
    std::vector<std::int32_t> arg(static_cast<std::size_t>(n) * cout, 0);
    std::vector<T> best(cout);
    std::vector<std::int32_t> best_node(cout);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::int32_t* nb = neighbors.data() + static_cast<std::size_t>(i) * J;
      std::int32_t* a = arg.data() + static_cast<std::size_t>(i) * cout;
      {
        const T cs = cosine(i, 0);
        const T* row = proj.row(nb[0]).data();
        for (int c = 0; c < cout; ++c) best[c] = row[c] * cs;
        std::fill(best_node.begin(), best_node.end(), nb[0]);
        std::fill(a, a + cout, 0);
      }
      for (int j = 1; j < J; ++j) {
        const T cs = cosine(i, j);
        const std::int32_t m = nb[j];
        const T* row = proj.row(m).data();
        for (int c = 0; c < cout; ++c) {
          const T cand = row[c] * cs;
          if (cand > best[c] || (cand == best[c] && m < best_node[c])) {
            best[c] = cand;
            best_node[c] = m;
            a[c] = j;
          }
        }
      }
      for (int c = 0; c < cout; ++c) out(i, c) += best[c];
    }
    if (cache != nullptr) {
      cache->projected[s] = std::move(proj);
      cache->cosine[s] = std::move(cosine);
      cache->arg[s] = std::move(arg);
    }
  }
  return out;
}

template <typename T>
void gconv_backward(const GConvParams<T>& p, const Mat<T>& coords, std::span<const std::int32_t> neighbors, int J,
                    const GConvCache<T>& cache, const Mat<T>& dy, GConvParams<T>& grads, Mat<T>* dx,
                    Mat<T>* dcoords) {
  const Eigen::Index n = cache.x.rows();
  const int cin = p.in_channels();
  const int cout = p.out_channels();
  grads.w_center.noalias() += cache.x.transpose() * dy;
  if (dx != nullptr) dx->noalias() += dy * p.w_center.transpose();
  for (int s = 0; s < p.support_count(); ++s) {
    const Mat<T>& proj = cache.projected[s];
    const Mat<T>& cosine = cache.cosine[s];
    const auto& arg = cache.arg[s];
    Mat<T> dproj = Mat<T>::Zero(n, cout);
    Mat<T> dcos = Mat<T>::Zero(n, J);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::int32_t* nb = neighbors.data() + static_cast<std::size_t>(i) * J;
      const std::int32_t* a = arg.data() + static_cast<std::size_t>(i) * cout;
      for (int c = 0; c < cout; ++c) {
        const T g = dy(i, c);
        const int j = a[c];
        const std::int32_t m = nb[j];
        dproj(m, c) += g * cosine(i, j);
        dcos(i, j) += g * proj(m, c);
      }
    }
    const auto block = static_cast<Eigen::Index>(s) * cin;
    grads.w_support.middleRows(block, cin).noalias() += cache.x.transpose() * dproj;
    if (dx != nullptr) dx->noalias() += dproj * p.w_support.middleRows(block, cin).transpose();

    const Eigen::Matrix<T, 1, 3> k = p.supports.row(s);
    const T k_norm = k.norm();
    if (!(k_norm > T(0))) continue;
    Eigen::Matrix<T, 1, 3> dk = Eigen::Matrix<T, 1, 3>::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < J; ++j) {
        const T g = dcos(i, j);
        if (g == T(0)) continue;
        const auto m = neighbors[static_cast<std::size_t>(i) * J + j];
        const Eigen::Matrix<T, 1, 3> d = coords.row(m) - coords.row(i);
        const T dn = d.norm();
        if (!(dn > T(0))) continue;
        const T cs = cosine(i, j);
        dk += g * (d / (dn * k_norm) - cs * k / (k_norm * k_norm));
        if (dcoords != nullptr) {
          const Eigen::Matrix<T, 1, 3> dd = g * (k / (dn * k_norm) - cs * d / (dn * dn));
          dcoords->row(m) += dd;
          dcoords->row(i) -= dd;
        }
      }
    }
    grads.supports.row(s) += dk;
  }
}

template <typename T>
Mat<T> maxpool_forward(const Mat<T>& x, std::span<const std::int32_t> centers,
                       std::span<const std::int32_t> neighbors, int J, std::vector<std::int32_t>* arg) {
  const auto m = static_cast<Eigen::Index>(centers.size());
  const Eigen::Index c = x.cols();
  if (neighbors.size() != static_cast<std::size_t>(x.rows()) * J) throw InputError("pooling neighbour table mismatch");
  Mat<T> out(m, c);
  if (arg != nullptr) arg->assign(static_cast<std::size_t>(m) * c, 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::int32_t center = centers[i];
    out.row(i) = x.row(center);
    std::int32_t* a = arg != nullptr ? arg->data() + static_cast<std::size_t>(i) * c : nullptr;
    if (a != nullptr) std::fill(a, a + c, center);
    for (int j = 0; j < J; ++j) {
      const std::int32_t node = neighbors[static_cast<std::size_t>(center) * J + j];
      for (Eigen::Index k = 0; k < c; ++k) {
        const T v = x(node, k);
        const std::int32_t holder = a != nullptr ? a[k] : node;
        if (v > out(i, k) || (v == out(i, k) && node < holder)) {
          out(i, k) = v;
          if (a != nullptr) a[k] = node;
        }
      }
    }
  }
  return out;
}

template <typename T>
Mat<T> maxpool_backward(Eigen::Index n_in, std::span<const std::int32_t> arg, const Mat<T>& dy) {
  Mat<T> dx = Mat<T>::Zero(n_in, dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    for (Eigen::Index k = 0; k < dy.cols(); ++k) {
      dx(arg[static_cast<std::size_t>(i) * dy.cols() + k], k) += dy(i, k);
    }
  }
  return dx;
}

template <typename T>
Mat<T> softmax_rows(const Mat<T>& z) {
  Mat<T> out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const T mx = z.row(i).maxCoeff();
    out.row(i) = (z.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename T>
Mat<T> self_attention(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v, int heads, std::vector<Mat<T>>* probs) {
  const Eigen::Index d = q.cols();
  if (heads < 1 || d % heads != 0) throw InputError("model width must be divisible by the head count");
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) throw InputError("attention dimension mismatch");
  const Eigen::Index dk = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));
  Mat<T> out(q.rows(), d);
  if (probs != nullptr) probs->assign(heads, Mat<T>());
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index c0 = h * dk;
    const Mat<T> scores = (q.middleCols(c0, dk) * k.middleCols(c0, dk).transpose()) * scale;
    Mat<T> a = softmax_rows<T>(scores);
    out.middleCols(c0, dk).noalias() = a * v.middleCols(c0, dk);
    if (probs != nullptr) (*probs)[h] = std::move(a);
  }
  return out;
}

template <typename T>
Mat<T> attention_forward(const AttentionParams<T>& p, const Mat<T>& x, int heads, AttentionCache<T>* cache) {
  AttentionCache<T> local;
  AttentionCache<T>& c = cache != nullptr ? *cache : local;
  c.x = x;
  c.q = linear_forward(p.q, x);
  c.k = linear_forward(p.k, x);
  c.v = linear_forward(p.v, x);
  c.concat = self_attention<T>(c.q, c.k, c.v, heads, &c.probs);
  c.attn_out = linear_forward(p.o, c.concat);
  c.res1 = x + c.attn_out;
  c.y1 = layer_norm_forward(p.ln1, c.res1, c.ln1);
  c.h_pre = linear_forward(p.ffn1, c.y1);
  c.h = relu<T>(c.h_pre);
  c.f = linear_forward(p.ffn2, c.h);
  c.res2 = c.y1 + c.f;
  return layer_norm_forward(p.ln2, c.res2, c.ln2);
}

template <typename T>
Mat<T> attention_backward(const AttentionParams<T>& p, int heads, const AttentionCache<T>& c, const Mat<T>& dy,
                          AttentionParams<T>& grads) {
  const Mat<T> dres2 = layer_norm_backward(p.ln2, c.ln2, dy, grads.ln2);
  const Mat<T> dh = linear_backward(p.ffn2, c.h, dres2, grads.ffn2);
  const Mat<T> dh_pre = relu_backward<T>(c.h, dh);
  const Mat<T> dy1 = dres2 + linear_backward(p.ffn1, c.y1, dh_pre, grads.ffn1);
  const Mat<T> dres1 = layer_norm_backward(p.ln1, c.ln1, dy1, grads.ln1);
  const Mat<T> dconcat = linear_backward(p.o, c.concat, dres1, grads.o);

  const Eigen::Index d = c.q.cols();
  const Eigen::Index dk = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));
  Mat<T> dq(c.q.rows(), d), dkm(c.k.rows(), d), dv(c.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index c0 = h * dk;
    const Mat<T>& a = c.probs[h];
    const Mat<T> dout = dconcat.middleCols(c0, dk);
    dv.middleCols(c0, dk).noalias() = a.transpose() * dout;
    const Mat<T> da = dout * c.v.middleCols(c0, dk).transpose();
    Mat<T> ds = a.cwiseProduct(da);
    const Col<T> rows = ds.rowwise().sum();
    ds.noalias() -= a.cwiseProduct(rows.replicate(1, a.cols()));
    dq.middleCols(c0, dk).noalias() = (ds * c.k.middleCols(c0, dk)) * scale;
    dkm.middleCols(c0, dk).noalias() = (ds.transpose() * c.q.middleCols(c0, dk)) * scale;
  }
  Mat<T> dx = dres1;
  dx += linear_backward(p.q, c.x, dq, grads.q);
  dx += linear_backward(p.k, c.x, dkm, grads.k);
  dx += linear_backward(p.v, c.x, dv, grads.v);
  return dx;
}

template <typename T>
Mat<T> netvlad_forward(const NetVladParams<T>& p, const Mat<T>& x, NetVladCache<T>* cache) {
  NetVladCache<T> local;
  NetVladCache<T>& c = cache != nullptr ? *cache : local;
  if (x.cols() != p.centers.cols()) throw InputError("NetVLAD input width differs from the cluster width");
  const Eigen::Index K = p.centers.rows();
  const Eigen::Index D = p.centers.cols();
  c.x = x;
  c.soft = softmax_rows<T>(linear_forward(p.assign, x));
  const Eigen::Matrix<T, 1, Eigen::Dynamic> mass = c.soft.colwise().sum();
  c.vlad = c.soft.transpose() * x;
  c.vlad -= p.centers.cwiseProduct(mass.transpose().replicate(1, D));
  c.vlad_norm.resize(K);
  c.intra.resize(K, D);
  for (Eigen::Index k = 0; k < K; ++k) {
    const T nk = c.vlad.row(k).norm();
    c.vlad_norm[k] = nk;
    c.intra.row(k) = c.vlad.row(k) / std::max(nk, static_cast<T>(kNormEps));
  }
  c.flat = Eigen::Map<const Mat<T>>(c.intra.data(), 1, K * D);
  c.flat_norm = c.flat.norm();
  c.flat /= std::max(c.flat_norm, static_cast<T>(kNormEps));
  c.projected = linear_forward(p.project, c.flat);
  c.out_norm = c.projected.norm();
  return c.projected / std::max(c.out_norm, static_cast<T>(kNormEps));
}

template <typename T>
Mat<T> netvlad_backward(const NetVladParams<T>& p, const NetVladCache<T>& c, const Mat<T>& dy,
                        NetVladParams<T>& grads) {
  const Eigen::Index K = p.centers.rows();
  const Eigen::Index D = p.centers.cols();
  const Mat<T> out = c.projected / std::max(c.out_norm, static_cast<T>(kNormEps));
  const Mat<T> dproj = normalize_backward<T>(out, c.out_norm, dy);
  const Mat<T> dflat = linear_backward(p.project, c.flat, dproj, grads.project);
  const Mat<T> dflat_raw = normalize_backward<T>(c.flat, c.flat_norm, dflat);
  const Eigen::Map<const Mat<T>> dintra(dflat_raw.data(), K, D);
  Mat<T> dvlad(K, D);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Mat<T> y = c.intra.row(k);
    dvlad.row(k) = normalize_backward<T>(y, c.vlad_norm[k], Mat<T>(dintra.row(k)));
  }
  const Eigen::Matrix<T, 1, Eigen::Dynamic> mass = c.soft.colwise().sum();
  grads.centers -= dvlad.cwiseProduct(mass.transpose().replicate(1, D));
  Mat<T> dx = c.soft * dvlad;
  const Eigen::Matrix<T, 1, Eigen::Dynamic> cd = p.centers.cwiseProduct(dvlad).rowwise().sum().transpose();
  Mat<T> dsoft = c.x * dvlad.transpose();
  dsoft.rowwise() -= cd;
  Mat<T> dz = c.soft.cwiseProduct(dsoft);
  const Col<T> rows = dz.rowwise().sum();
  dz.noalias() -= c.soft.cwiseProduct(rows.replicate(1, c.soft.cols()));
  dx += linear_backward(p.assign, c.x, dz, grads.assign);
  return dx;
}

#define GSPR_INSTANTIATE_LAYERS(T)                                                                                 \
  template Mat<T> linear_forward(const LinearParams<T>&, const Mat<T>&);                                           \
  template Mat<T> linear_backward(const LinearParams<T>&, const Mat<T>&, const Mat<T>&, LinearParams<T>&);         \
  template Mat<T> relu(const Mat<T>&);                                                                             \
  template Mat<T> relu_backward(const Mat<T>&, const Mat<T>&);                                                     \
  template Mat<T> layer_norm_forward(const LayerNormParams<T>&, const Mat<T>&, LayerNormCache<T>&);                \
  template Mat<T> layer_norm_backward(const LayerNormParams<T>&, const LayerNormCache<T>&, const Mat<T>&,          \
                                      LayerNormParams<T>&);                                                        \
  template Mat<T> gconv_forward(const GConvParams<T>&, const Mat<T>&, const Mat<T>&, std::span<const std::int32_t>, \
                                int, GConvCache<T>*);                                                              \
  template void gconv_backward(const GConvParams<T>&, const Mat<T>&, std::span<const std::int32_t>, int,           \
                               const GConvCache<T>&, const Mat<T>&, GConvParams<T>&, Mat<T>*, Mat<T>*);            \
  template Mat<T> maxpool_forward(const Mat<T>&, std::span<const std::int32_t>, std::span<const std::int32_t>,     \
                                  int, std::vector<std::int32_t>*);                                                \
  template Mat<T> maxpool_backward(Eigen::Index, std::span<const std::int32_t>, const Mat<T>&);                    \
  template Mat<T> softmax_rows(const Mat<T>&);                                                                     \
  template Mat<T> self_attention(const Mat<T>&, const Mat<T>&, const Mat<T>&, int, std::vector<Mat<T>>*);          \
  template Mat<T> attention_forward(const AttentionParams<T>&, const Mat<T>&, int, AttentionCache<T>*);            \
  template Mat<T> attention_backward(const AttentionParams<T>&, int, const AttentionCache<T>&, const Mat<T>&,      \
                                     AttentionParams<T>&);                                                         \
  template Mat<T> netvlad_forward(const NetVladParams<T>&, const Mat<T>&, NetVladCache<T>*);                       \
  template Mat<T> netvlad_backward(const NetVladParams<T>&, const NetVladCache<T>&, const Mat<T>&,                 \
                                   NetVladParams<T>&);

GSPR_INSTANTIATE_LAYERS(float)
GSPR_INSTANTIATE_LAYERS(double)

}  // namespace gspr::net
