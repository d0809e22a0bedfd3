#include "gspr/net/network.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "gspr/error.hpp"

namespace gspr::net {

void NetConfig::validate() const {
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  if (J < 1) throw ConfigError("J must be >= 1");
  if (supports < 0) throw ConfigError("support count must be >= 0");
  if (!(pool_rate > 0.0 && pool_rate <= 1.0)) throw ConfigError("pool_rate must lie in (0, 1]");
  if (widths.empty()) throw ConfigError("at least one backbone block is required");
  for (int w : widths) {
    if (w < 1) throw ConfigError("backbone widths must be >= 1");
  }
  if (d_model < 1 || d_ffn < 1 || clusters < 1 || d_out < 1) throw ConfigError("network widths must be >= 1");
  if (d_pe != d_model) throw ConfigError("d_pe must equal d_model");
  if (heads < 1 || d_model % heads != 0) throw ConfigError("d_model must be divisible by the head count");
  if (fusion_layers < 0) throw ConfigError("fusion_layers must be >= 0");
}

std::string NetConfig::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << "in=" << in_channels << ";J=" << J << ";S=" << supports << ";pool=" << pool_rate << ";widths=";
  for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
  os << ";d_model=" << d_model << ";d_pe=" << d_pe << ";d_ffn=" << d_ffn << ";heads=" << heads
     << ";fusion=" << fusion_layers << ";clusters=" << clusters << ";d_out=" << d_out;
  return os.str();
}

std::uint64_t NetConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_string()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t NetConfig::min_nodes() const {
  const auto need = static_cast<std::size_t>(J) + 1;
  for (std::size_t n = need;; ++n) {
    std::size_t m = n;
    bool ok = true;
    for (std::size_t s = 0; s < widths.size() && ok; ++s) {
      m = pooled_count(m, pool_rate);
      ok = m >= need;
    }
    if (ok) return n;
  }
}

// ---------------------------------------------------------------------------

namespace {

template <typename T, typename Fn>
void visit_tensors(NetParams<T>& p, Fn&& fn) {
  auto gconv = [&](const std::string& prefix, GConvParams<T>& g) {
    fn(prefix + ".w_center", g.w_center);
    fn(prefix + ".supports", g.supports);
    fn(prefix + ".w_support", g.w_support);
  };
  auto linear = [&](const std::string& prefix, LinearParams<T>& l) {
    fn(prefix + ".w", l.w);
    fn(prefix + ".b", l.b);
  };
  for (std::size_t i = 0; i < p.backbone.size(); ++i) gconv("backbone." + std::to_string(i), p.backbone[i]);
  linear("lift", p.lift);
  linear("pe1", p.pe1);
  linear("pe2", p.pe2);
  for (std::size_t i = 0; i < p.fusion.size(); ++i) gconv("fusion." + std::to_string(i), p.fusion[i]);
  auto& a = p.attention;
  linear("attn.q", a.q);
  linear("attn.k", a.k);
  linear("attn.v", a.v);
  linear("attn.o", a.o);
  fn("attn.ln1.gamma", a.ln1.gamma);
  fn("attn.ln1.beta", a.ln1.beta);
  linear("attn.ffn1", a.ffn1);
  linear("attn.ffn2", a.ffn2);
  fn("attn.ln2.gamma", a.ln2.gamma);
  fn("attn.ln2.beta", a.ln2.beta);
  fn("head.centers", p.head.centers);
  linear("head.assign", p.head.assign);
  linear("head.project", p.head.project);
}

template <typename T>
struct Initializer {
  std::mt19937_64 rng;

  Mat<T> uniform(Eigen::Index rows, Eigen::Index cols, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    Mat<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(u(rng));
    return m;
  }

  LinearParams<T> linear(int in, int out) {
    return {uniform(in, out, in), Mat<T>::Zero(1, out)};
  }

  GConvParams<T> gconv(int in, int out, int supports) {
    GConvParams<T> g;
    g.w_center = uniform(in, out, in);
    g.supports.resize(supports, 3);
    std::normal_distribution<double> nd;
    for (int s = 0; s < supports; ++s) {
      Eigen::Vector3d k;
      do {
        k = {nd(rng), nd(rng), nd(rng)};
      } while (k.norm() < 1e-6);
      k.normalize();
      for (int c = 0; c < 3; ++c) g.supports(s, c) = static_cast<T>(k[c]);
    }
    g.w_support = uniform(static_cast<Eigen::Index>(supports) * in, out, in);
    return g;
  }

  LayerNormParams<T> layer_norm(int d) { return {Mat<T>::Ones(1, d), Mat<T>::Zero(1, d)}; }
};

template <typename T>
Mat<T> to_mat(const Eigen::MatrixXd& m) {
  return m.template cast<T>();
}

}  // namespace

template <typename T>
std::vector<std::pair<std::string, Mat<T>*>> NetParams<T>::tensors() {
  std::vector<std::pair<std::string, Mat<T>*>> out;
  visit_tensors(*this, [&](const std::string& name, Mat<T>& m) { out.emplace_back(name, &m); });
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Mat<T>*>> NetParams<T>::tensors() const {
  std::vector<std::pair<std::string, const Mat<T>*>> out;
  visit_tensors(const_cast<NetParams<T>&>(*this),
                [&](const std::string& name, Mat<T>& m) { out.emplace_back(name, &m); });
  return out;
}

template <typename T>
std::size_t NetParams<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors()) n += static_cast<std::size_t>(m->size());
  return n;
}

template <typename T>
NetParams<T> NetParams<T>::zeros_like() const {
  NetParams<T> z = *this;
  for (auto& [name, m] : z.tensors()) m->setZero();
  return z;
}

template <typename T>
bool NetParams<T>::all_finite() const {
  for (const auto& [name, m] : tensors()) {
    if (!m->allFinite()) return false;
  }
  return true;
}

template <typename T>
template <typename U>
NetParams<U> NetParams<T>::cast() const {
  NetParams<U> out;
  out.backbone.resize(backbone.size());
  out.fusion.resize(fusion.size());
  auto src = tensors();
  auto dst = out.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
  return out;
}

template <typename T>
NetParams<T> init_params(const NetConfig& cfg) {
  cfg.validate();
  Initializer<T> init{std::mt19937_64(cfg.init_seed)};
  NetParams<T> p;
  int c = cfg.in_channels;
  for (int w : cfg.widths) {
    p.backbone.push_back(init.gconv(c, w, cfg.supports));
    c = w;
  }
  p.lift = init.linear(c, cfg.d_model);
  p.pe1 = init.linear(3, cfg.d_pe);
  p.pe2 = init.linear(cfg.d_pe, cfg.d_model);
  for (int i = 0; i < cfg.fusion_layers; ++i) p.fusion.push_back(init.gconv(cfg.d_model, cfg.d_model, cfg.supports));
  auto& a = p.attention;
  a.q = init.linear(cfg.d_model, cfg.d_model);
  a.k = init.linear(cfg.d_model, cfg.d_model);
  a.v = init.linear(cfg.d_model, cfg.d_model);
  a.o = init.linear(cfg.d_model, cfg.d_model);
  a.ln1 = init.layer_norm(cfg.d_model);
  a.ffn1 = init.linear(cfg.d_model, cfg.d_ffn);
  a.ffn2 = init.linear(cfg.d_ffn, cfg.d_model);
  a.ln2 = init.layer_norm(cfg.d_model);
  p.head.centers = init.uniform(cfg.clusters, cfg.d_model, cfg.d_model);
  p.head.assign = init.linear(cfg.d_model, cfg.clusters);
  p.head.project = init.linear(cfg.clusters * cfg.d_model, cfg.d_out);
  return p;
}

template <typename T>
void renormalize_supports(NetParams<T>& p) {
  auto fix = [](GConvParams<T>& g) {
    for (Eigen::Index s = 0; s < g.supports.rows(); ++s) {
      const T n = g.supports.row(s).norm();
      if (n > T(0)) g.supports.row(s) /= n;
    }
  };
  for (auto& g : p.backbone) fix(g);
  for (auto& g : p.fusion) fix(g);
}

// ---------------------------------------------------------------------------

GraphPyramid prepare_pyramid(const Eigen::MatrixXd& coords, const NetConfig& cfg) {
  return build_pyramid(center_coords(coords), cfg.J, cfg.pool_rate, static_cast<int>(cfg.widths.size()));
}

GraphPyramid prepare_pyramid(const VoxelizedScene& vs, const NetConfig& cfg) {
  return prepare_pyramid(vs.coords(), cfg);
}

template <typename T>
Mat<T> input_features(const VoxelizedScene& vs) {
  return vs.encoded.rightCols(attr::kFeatureCount).template cast<T>();
}

template <typename T>
Mat<T> forward(const NetParams<T>& p, const NetConfig& cfg, const GraphPyramid& pyr, const Mat<T>& feats,
               ForwardCache<T>* cache) {
  ForwardCache<T> local;
  ForwardCache<T>& c = cache != nullptr ? *cache : local;
  const std::size_t blocks = p.backbone.size();
  if (pyr.levels.size() != blocks + 1 || pyr.J != cfg.J) throw InputError("graph pyramid does not match the network");
  if (feats.rows() != pyr.levels[0].coords.rows()) throw InputError("feature rows differ from graph nodes");
  const int J = cfg.J;

  c.coords.resize(blocks + 1);
  for (std::size_t l = 0; l <= blocks; ++l) c.coords[l] = to_mat<T>(pyr.levels[l].coords);
  c.inputs.assign(1, feats);
  c.conv.assign(blocks, {});
  c.pool_arg.assign(blocks, {});
  for (std::size_t b = 0; b < blocks; ++b) {
    const Mat<T> h = gconv_forward(p.backbone[b], c.inputs[b], c.coords[b], pyr.levels[b].neighbors, J, &c.conv[b]);
    const Mat<T> pooled = maxpool_forward(h, pyr.centers[b], pyr.levels[b].neighbors, J, &c.pool_arg[b]);
    c.inputs.push_back(relu<T>(pooled));
  }

  const Mat<T>& top = c.coords[blocks];
  const auto& top_nbrs = pyr.levels[blocks].neighbors;
  c.lifted = linear_forward(p.lift, c.inputs.back());
  c.pe_hidden = relu<T>(linear_forward(p.pe1, top));
  c.fused_in = c.lifted + linear_forward(p.pe2, c.pe_hidden);

  c.fusion.assign(p.fusion.size(), {});
  c.fusion_act.clear();
  Mat<T> x = c.fused_in;
  for (std::size_t f = 0; f < p.fusion.size(); ++f) {
    Mat<T> y = gconv_forward(p.fusion[f], x, top, top_nbrs, J, &c.fusion[f]);
    if (f + 1 < p.fusion.size()) {
      c.fusion_act.push_back(relu<T>(y));
      x = c.fusion_act.back();
    } else {
      x = std::move(y);
    }
  }
  c.fused = std::move(x);
  c.attended = attention_forward(p.attention, c.fused, cfg.heads, &c.attention);
  return netvlad_forward(p.head, c.attended, &c.head);
}

template <typename T>
void backward(const NetParams<T>& p, const NetConfig& cfg, const GraphPyramid& pyr, const ForwardCache<T>& c,
              const Mat<T>& dout, NetParams<T>& g, InputGrads<T>* inputs) {
  const std::size_t blocks = p.backbone.size();
  const int J = cfg.J;
  const bool want_coords = inputs != nullptr;

  const Mat<T> dattended = netvlad_backward(p.head, c.head, dout, g.head);
  Mat<T> dx = attention_backward(p.attention, cfg.heads, c.attention, dattended, g.attention);

  const Mat<T>& top = c.coords[blocks];
  const auto& top_nbrs = pyr.levels[blocks].neighbors;
  Mat<T> dtop = Mat<T>::Zero(top.rows(), 3);
  for (std::size_t f = p.fusion.size(); f-- > 0;) {
    Mat<T> din = Mat<T>::Zero(dx.rows(), p.fusion[f].in_channels());
    gconv_backward(p.fusion[f], top, top_nbrs, J, c.fusion[f], dx, g.fusion[f], &din,
                   want_coords ? &dtop : nullptr);
    dx = f > 0 ? relu_backward<T>(c.fusion_act[f - 1], din) : std::move(din);
  }

  const Mat<T> dpe_hidden = linear_backward(p.pe2, c.pe_hidden, dx, g.pe2);
  const Mat<T> dpe_pre = relu_backward<T>(c.pe_hidden, dpe_hidden);
  const Mat<T> dpe_in = linear_backward(p.pe1, top, dpe_pre, g.pe1);
  if (want_coords) dtop += dpe_in;
  dx = linear_backward(p.lift, c.inputs[blocks], dx, g.lift);

  Mat<T> dcoords = std::move(dtop);
  for (std::size_t b = blocks; b-- > 0;) {
    const Mat<T> dpooled = relu_backward<T>(c.inputs[b + 1], dx);
    const auto n_in = c.coords[b].rows();
    const Mat<T> dh = maxpool_backward<T>(n_in, c.pool_arg[b], dpooled);
    const bool need_dx = b > 0 || inputs != nullptr;
    Mat<T> din = need_dx ? Mat<T>::Zero(n_in, p.backbone[b].in_channels()) : Mat<T>();
    Mat<T> dlevel;
    if (want_coords) {
      dlevel = Mat<T>::Zero(n_in, 3);
      const auto& centers = pyr.centers[b];
      for (std::size_t i = 0; i < centers.size(); ++i) dlevel.row(centers[i]) += dcoords.row(static_cast<Eigen::Index>(i));
    }
    gconv_backward(p.backbone[b], c.coords[b], pyr.levels[b].neighbors, J, c.conv[b], dh, g.backbone[b],
                   need_dx ? &din : nullptr, want_coords ? &dlevel : nullptr);
    dx = std::move(din);
    dcoords = std::move(dlevel);
  }
  if (inputs != nullptr) {
    inputs->feats = std::move(dx);
    inputs->coords = std::move(dcoords);
  }
}

template <typename T>
Mat<T> uncenter_gradient(const Mat<T>& dcentered) {
  Mat<T> out = dcentered;
  if (out.rows() > 0) out.rowwise() -= dcentered.colwise().mean();
  return out;
}

Descriptor describe(const NetParams<float>& p, const NetConfig& cfg, const VoxelizedScene& vs) {
  const GraphPyramid pyr = prepare_pyramid(vs, cfg);
  const Mat<float> out = forward<float>(p, cfg, pyr, input_features<float>(vs));
  Descriptor d;
  d.vector = out.row(0).transpose().cast<double>();
  d.place_id = vs.place_id;
  d.pose = vs.pose;
  return d;
}

#define GSPR_INSTANTIATE_NETWORK(T)                                                                            \
  template struct NetParams<T>;                                                                                \
  template NetParams<T> init_params<T>(const NetConfig&);                                                      \
  template void renormalize_supports<T>(NetParams<T>&);                                                        \
  template Mat<T> input_features<T>(const VoxelizedScene&);                                                    \
  template Mat<T> forward<T>(const NetParams<T>&, const NetConfig&, const GraphPyramid&, const Mat<T>&,        \
                             ForwardCache<T>*);                                                                \
  template void backward<T>(const NetParams<T>&, const NetConfig&, const GraphPyramid&, const ForwardCache<T>&, \
                            const Mat<T>&, NetParams<T>&, InputGrads<T>*);                                     \
  template Mat<T> uncenter_gradient<T>(const Mat<T>&);

GSPR_INSTANTIATE_NETWORK(float)
GSPR_INSTANTIATE_NETWORK(double)

template NetParams<float> NetParams<double>::cast<float>() const;
template NetParams<double> NetParams<float>::cast<double>() const;
template NetParams<float> NetParams<float>::cast<float>() const;
template NetParams<double> NetParams<double>::cast<double>() const;

}  // namespace gspr::net
