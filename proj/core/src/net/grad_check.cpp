#include "gspr/net/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "gspr/error.hpp"
#include "gspr/net/network.hpp"

namespace gspr::net {
namespace {

using M = Mat<double>;
using Signature = std::vector<std::int64_t>;

struct Evaluation {
  double loss = 0.0;
  Signature signature;  // discrete decisions taken by the forward pass
};

struct Problem {
  std::vector<std::pair<std::string, M*>> vars;
  std::function<Evaluation()> eval;
  std::function<std::vector<M>()> grads;  // aligned with vars
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  M normal(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    M m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(gen_);
    return m;
  }
  M uniform(Eigen::Index r, Eigen::Index c, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    M m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(gen_);
    return m;
  }
  LinearParams<double> linear(int in, int out) { return {normal(in, out, 1.0 / std::sqrt(in)), normal(1, out, 0.1)}; }
  GConvParams<double> gconv(int in, int out, int supports) {
    GConvParams<double> g;
    g.w_center = normal(in, out, 1.0 / std::sqrt(in));
    g.supports = normal(supports, 3);
    for (int s = 0; s < supports; ++s) g.supports.row(s).normalize();
    g.w_support = normal(static_cast<Eigen::Index>(supports) * in, out, 1.0 / std::sqrt(in));
    return g;
  }

 private:
  std::mt19937_64 gen_;
};

void sign_bits(Signature& sig, const M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) sig.push_back(m.data()[i] > 0.0 ? 1 : 0);
}

template <typename C>
void append(Signature& sig, const C& c) {
  sig.insert(sig.end(), c.begin(), c.end());
}

void conv_bits(Signature& sig, const GConvCache<double>& c) {
  for (const auto& a : c.arg) append(sig, a);
}

double weighted(const M& r, const M& y) { return (r.array() * y.array()).sum(); }

void add_linear(Problem& pb, const std::string& name, LinearParams<double>& l) {
  pb.vars.emplace_back(name + ".w", &l.w);
  pb.vars.emplace_back(name + ".b", &l.b);
}

void add_gconv(Problem& pb, const std::string& name, GConvParams<double>& g) {
  pb.vars.emplace_back(name + ".w_center", &g.w_center);
  pb.vars.emplace_back(name + ".supports", &g.supports);
  pb.vars.emplace_back(name + ".w_support", &g.w_support);
}

// Owns every tensor a stage problem points into.
struct Workspace {
  M x, coords, r, z;
  LinearParams<double> lin, pe1, pe2;
  GConvParams<double> conv;
  AttentionParams<double> attn;
  NetVladParams<double> head;
  NetConfig cfg;
  NetParams<double> net;
  int J = 3;
  int heads = 2;
};

Problem make_problem(GradStage stage, Workspace& w, Rng& rng, int n) {
  Problem pb;
  switch (stage) {
    case GradStage::kLinear: {
      w.lin = rng.linear(5, 4);
      w.x = rng.normal(n, 5);
      w.r = rng.normal(n, 4);
      add_linear(pb, "linear", w.lin);
      pb.vars.emplace_back("x", &w.x);
      pb.eval = [&w] { return Evaluation{weighted(w.r, linear_forward(w.lin, w.x)), {}}; };
      pb.grads = [&w] {
        LinearParams<double> g{M::Zero(w.lin.w.rows(), w.lin.w.cols()), M::Zero(1, w.lin.b.cols())};
        M dx = linear_backward(w.lin, w.x, w.r, g);
        return std::vector<M>{g.w, g.b, dx};
      };
      break;
    }
    case GradStage::kGConv: {
      w.J = std::min(4, n - 1);
      w.conv = rng.gconv(5, 4, 2);
      w.x = rng.normal(n, 5);
      w.coords = rng.uniform(n, 3, -1.0, 1.0);
      w.r = rng.normal(n, 4);
      add_gconv(pb, "gconv", w.conv);
      pb.vars.emplace_back("x", &w.x);
      pb.vars.emplace_back("coords", &w.coords);
      pb.eval = [&w] {
        const auto nb = neighbor_table(w.coords, w.J);
        GConvCache<double> c;
        const M y = gconv_forward(w.conv, w.x, w.coords, nb, w.J, &c);
        Evaluation e{weighted(w.r, y), {}};
        append(e.signature, nb);
        conv_bits(e.signature, c);
        return e;
      };
      pb.grads = [&w] {
        const auto nb = neighbor_table(w.coords, w.J);
        GConvCache<double> c;
        gconv_forward(w.conv, w.x, w.coords, nb, w.J, &c);
        GConvParams<double> g{M::Zero(w.conv.w_center.rows(), w.conv.w_center.cols()),
                              M::Zero(w.conv.supports.rows(), 3),
                              M::Zero(w.conv.w_support.rows(), w.conv.w_support.cols())};
        M dx = M::Zero(w.x.rows(), w.x.cols());
        M dc = M::Zero(w.coords.rows(), 3);
        gconv_backward(w.conv, w.coords, nb, w.J, c, w.r, g, &dx, &dc);
        return std::vector<M>{g.w_center, g.supports, g.w_support, dx, dc};
      };
      break;
    }
    case GradStage::kPool: {
      w.J = 3;
      w.conv = rng.gconv(5, 4, 1);
      w.x = rng.normal(n, 5);
      w.coords = rng.uniform(n, 3, -1.0, 1.0);
      w.r = rng.normal(static_cast<Eigen::Index>(pooled_count(n, 0.5)), 4);
      add_gconv(pb, "gconv", w.conv);
      pb.vars.emplace_back("x", &w.x);
      pb.vars.emplace_back("coords", &w.coords);
      struct Pass {
        GraphPyramid pyr;
        GConvCache<double> conv;
        std::vector<std::int32_t> arg;
        M out;
      };
      auto run = [&w] {
        Pass p;
        p.pyr = build_pyramid(w.coords, w.J, 0.5, 1);
        const M h = gconv_forward(w.conv, w.x, w.coords, p.pyr.levels[0].neighbors, w.J, &p.conv);
        p.out = relu<double>(maxpool_forward(h, p.pyr.centers[0], p.pyr.levels[0].neighbors, w.J, &p.arg));
        return p;
      };
      pb.eval = [&w, run] {
        const Pass p = run();
        Evaluation e{weighted(w.r, p.out), {}};
        append(e.signature, p.pyr.levels[0].neighbors);
        append(e.signature, p.pyr.centers[0]);
        conv_bits(e.signature, p.conv);
        append(e.signature, p.arg);
        sign_bits(e.signature, p.out);
        return e;
      };
      pb.grads = [&w, run] {
        const Pass p = run();
        const M dh = maxpool_backward<double>(w.x.rows(), p.arg, relu_backward<double>(p.out, w.r));
        GConvParams<double> g{M::Zero(w.conv.w_center.rows(), w.conv.w_center.cols()), M::Zero(1, 3),
                              M::Zero(w.conv.w_support.rows(), w.conv.w_support.cols())};
        M dx = M::Zero(w.x.rows(), w.x.cols());
        M dc = M::Zero(w.coords.rows(), 3);
        gconv_backward(w.conv, w.coords, p.pyr.levels[0].neighbors, w.J, p.conv, dh, g, &dx, &dc);
        return std::vector<M>{g.w_center, g.supports, g.w_support, dx, dc};
      };
      break;
    }
    case GradStage::kPosFfn: {
      w.pe1 = rng.linear(3, 6);
      w.pe2 = rng.linear(6, 6);
      w.coords = rng.uniform(n, 3, -1.0, 1.0);
      w.z = rng.normal(n, 6);
      w.r = rng.normal(n, 6);
      add_linear(pb, "pe1", w.pe1);
      add_linear(pb, "pe2", w.pe2);
      pb.vars.emplace_back("coords", &w.coords);
      pb.vars.emplace_back("features", &w.z);
      pb.eval = [&w] {
        const M hidden = relu<double>(linear_forward(w.pe1, w.coords));
        Evaluation e{weighted(w.r, w.z + linear_forward(w.pe2, hidden)), {}};
        sign_bits(e.signature, hidden);
        return e;
      };
      pb.grads = [&w] {
        const M hidden = relu<double>(linear_forward(w.pe1, w.coords));
        LinearParams<double> g1{M::Zero(3, 6), M::Zero(1, 6)}, g2{M::Zero(6, 6), M::Zero(1, 6)};
        const M dh = linear_backward(w.pe2, hidden, w.r, g2);
        const M dc = linear_backward(w.pe1, w.coords, relu_backward<double>(hidden, dh), g1);
        return std::vector<M>{g1.w, g1.b, g2.w, g2.b, dc, w.r};
      };
      break;
    }
    case GradStage::kAttention: {
      const int d = 8;
      w.heads = 2;
      auto& a = w.attn;
      a.q = rng.linear(d, d);
      a.k = rng.linear(d, d);
      a.v = rng.linear(d, d);
      a.o = rng.linear(d, d);
      a.ln1 = {M::Ones(1, d) + rng.normal(1, d, 0.1), rng.normal(1, d, 0.1)};
      a.ffn1 = rng.linear(d, 12);
      a.ffn2 = rng.linear(12, d);
      a.ln2 = {M::Ones(1, d) + rng.normal(1, d, 0.1), rng.normal(1, d, 0.1)};
      w.x = rng.normal(n, d);
      w.r = rng.normal(n, d);
      add_linear(pb, "q", a.q);
      add_linear(pb, "k", a.k);
      add_linear(pb, "v", a.v);
      add_linear(pb, "o", a.o);
      pb.vars.emplace_back("ln1.gamma", &a.ln1.gamma);
      pb.vars.emplace_back("ln1.beta", &a.ln1.beta);
      add_linear(pb, "ffn1", a.ffn1);
      add_linear(pb, "ffn2", a.ffn2);
      pb.vars.emplace_back("ln2.gamma", &a.ln2.gamma);
      pb.vars.emplace_back("ln2.beta", &a.ln2.beta);
      pb.vars.emplace_back("x", &w.x);
      pb.eval = [&w] {
        AttentionCache<double> c;
        const M y = attention_forward(w.attn, w.x, w.heads, &c);
        Evaluation e{weighted(w.r, y), {}};
        sign_bits(e.signature, c.h);
        return e;
      };
      pb.grads = [&w] {
        AttentionCache<double> c;
        attention_forward(w.attn, w.x, w.heads, &c);
        AttentionParams<double> g = w.attn;
        for (M* m : {&g.q.w, &g.q.b, &g.k.w, &g.k.b, &g.v.w, &g.v.b, &g.o.w, &g.o.b, &g.ln1.gamma, &g.ln1.beta,
                     &g.ffn1.w, &g.ffn1.b, &g.ffn2.w, &g.ffn2.b, &g.ln2.gamma, &g.ln2.beta}) {
          m->setZero();
        }
        const M dx = attention_backward(w.attn, w.heads, c, w.r, g);
        return std::vector<M>{g.q.w,    g.q.b,      g.k.w,   g.k.b,   g.v.w,   g.v.b,      g.o.w,     g.o.b,
                              g.ln1.gamma, g.ln1.beta, g.ffn1.w, g.ffn1.b, g.ffn2.w, g.ffn2.b, g.ln2.gamma, g.ln2.beta,
                              dx};
      };
      break;
    }
    case GradStage::kNetVlad: {
      const int d = 6, k = 3, out = 5;
      w.head.centers = rng.normal(k, d, 0.5);
      w.head.assign = rng.linear(d, k);
      w.head.project = rng.linear(k * d, out);
      w.x = rng.normal(n, d);
      w.r = rng.normal(1, out);
      pb.vars.emplace_back("centers", &w.head.centers);
      add_linear(pb, "assign", w.head.assign);
      add_linear(pb, "project", w.head.project);
      pb.vars.emplace_back("x", &w.x);
      pb.eval = [&w] { return Evaluation{weighted(w.r, netvlad_forward<double>(w.head, w.x, nullptr)), {}}; };
      pb.grads = [&w] {
        NetVladCache<double> c;
        netvlad_forward(w.head, w.x, &c);
        NetVladParams<double> g = w.head;
        for (M* m : {&g.centers, &g.assign.w, &g.assign.b, &g.project.w, &g.project.b}) m->setZero();
        const M dx = netvlad_backward(w.head, c, w.r, g);
        return std::vector<M>{g.centers, g.assign.w, g.assign.b, g.project.w, g.project.b, dx};
      };
      break;
    }
    case GradStage::kMlp: {
      // Final projection of the flattened VLAD vector plus the output
      // normalization.
      w.lin = rng.linear(18, 5);
      w.x = rng.normal(1, 18);
      w.r = rng.normal(1, 5);
      add_linear(pb, "project", w.lin);
      pb.vars.emplace_back("x", &w.x);
      auto run = [&w] {
        const M y = linear_forward(w.lin, w.x);
        return std::pair<M, double>{y / std::max(y.norm(), kNormEps), y.norm()};
      };
      pb.eval = [&w, run] { return Evaluation{weighted(w.r, run().first), {}}; };
      pb.grads = [&w, run] {
        const auto [out, norm] = run();
        const M dy = (w.r - out * (out.array() * w.r.array()).sum()) / norm;
        LinearParams<double> g{M::Zero(18, 5), M::Zero(1, 5)};
        const M dx = linear_backward(w.lin, w.x, dy, g);
        return std::vector<M>{g.w, g.b, dx};
      };
      break;
    }
    case GradStage::kFull: {
      NetConfig& cfg = w.cfg;
      cfg.in_channels = 6;
      cfg.J = 3;
      cfg.pool_rate = 0.5;
      cfg.widths = {4, 6, 8};
      cfg.d_model = cfg.d_pe = 8;
      cfg.d_ffn = 12;
      cfg.heads = 2;
      cfg.clusters = 3;
      cfg.d_out = 5;
      if (static_cast<std::size_t>(n) < cfg.min_nodes()) {
        throw InputError("full-network gradient check needs at least " + std::to_string(cfg.min_nodes()) + " nodes");
      }
      cfg.init_seed = rng.uniform(1, 1, 0, 1e9)(0, 0);
      w.net = init_params<double>(cfg);
      // Non-zero biases and gains away from 1 exercise every path.
      for (auto& [name, m] : w.net.tensors()) {
        if (name.ends_with(".b") || name.ends_with(".beta")) *m = rng.normal(m->rows(), m->cols(), 0.1);
        if (name.ends_with(".gamma")) *m += rng.normal(m->rows(), m->cols(), 0.1);
      }
      w.x = rng.normal(n, cfg.in_channels);
      w.coords = rng.uniform(n, 3, -1.0, 1.0);
      w.r = rng.normal(1, cfg.d_out);
      for (auto& v : w.net.tensors()) pb.vars.push_back(v);
      pb.vars.emplace_back("feats", &w.x);
      pb.vars.emplace_back("coords", &w.coords);
      pb.eval = [&w] {
        const GraphPyramid pyr = prepare_pyramid(w.coords, w.cfg);
        ForwardCache<double> c;
        const M y = forward(w.net, w.cfg, pyr, w.x, &c);
        Evaluation e{weighted(w.r, y), {}};
        for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
          append(e.signature, pyr.levels[l].neighbors);
          if (l < pyr.centers.size()) append(e.signature, pyr.centers[l]);
        }
        for (const auto& cc : c.conv) conv_bits(e.signature, cc);
        for (const auto& a : c.pool_arg) append(e.signature, a);
        for (std::size_t i = 1; i < c.inputs.size(); ++i) sign_bits(e.signature, c.inputs[i]);
        sign_bits(e.signature, c.pe_hidden);
        for (const auto& cc : c.fusion) conv_bits(e.signature, cc);
        for (const auto& a : c.fusion_act) sign_bits(e.signature, a);
        sign_bits(e.signature, c.attention.h);
        return e;
      };
      pb.grads = [&w] {
        const GraphPyramid pyr = prepare_pyramid(w.coords, w.cfg);
        ForwardCache<double> c;
        forward(w.net, w.cfg, pyr, w.x, &c);
        NetParams<double> g = w.net.zeros_like();
        InputGrads<double> in;
        backward(w.net, w.cfg, pyr, c, w.r, g, &in);
        std::vector<M> out;
        for (const auto& [name, m] : g.tensors()) out.push_back(*m);
        out.push_back(in.feats);
        out.push_back(uncenter_gradient(in.coords));
        return out;
      };
      break;
    }
  }
  return pb;
}

}  // namespace

const char* to_string(GradStage s) {
  switch (s) {
    case GradStage::kLinear: return "linear";
    case GradStage::kGConv: return "gconv";
    case GradStage::kPool: return "pool";
    case GradStage::kPosFfn: return "pos_ffn";
    case GradStage::kAttention: return "attention";
    case GradStage::kNetVlad: return "netvlad";
    case GradStage::kMlp: return "mlp";
    case GradStage::kFull: return "full";
  }
  return "?";
}

GradStage grad_stage_from_string(const std::string& s) {
  for (auto st : {GradStage::kLinear, GradStage::kGConv, GradStage::kPool, GradStage::kPosFfn, GradStage::kAttention,
                  GradStage::kNetVlad, GradStage::kMlp, GradStage::kFull}) {
    if (s == to_string(st)) return st;
  }
  throw InputError("unknown gradient-check stage: " + s);
}

GradCheckResult grad_check(GradStage stage, const GradCheckOptions& opts) {
  if (opts.nodes < 2 || opts.nodes > 64) throw InputError("gradient checks run on 2..64 nodes");
  if (!(opts.epsilon > 0.0)) throw InputError("epsilon must be positive");
  Rng rng(opts.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(stage) + 1);
  Workspace w;
  Problem pb = make_problem(stage, w, rng, opts.nodes);
  const Signature base = pb.eval().signature;
  const std::vector<M> analytic = pb.grads();

  double scale = 0.0;
  for (const M& a : analytic) scale = std::max(scale, a.size() > 0 ? a.cwiseAbs().maxCoeff() : 0.0);

  GradCheckResult res;
  for (std::size_t v = 0; v < pb.vars.size(); ++v) {
    M& m = *pb.vars[v].second;
    const M& a = analytic[v];
    if (a.rows() != m.rows() || a.cols() != m.cols()) {
      throw Error("gradient shape mismatch for " + pb.vars[v].first);
    }
    double err = 0.0, mag = 0.0;
    Eigen::Index worst = -1;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + opts.epsilon;
      const Evaluation plus = pb.eval();
      m.data()[i] = saved - opts.epsilon;
      const Evaluation minus = pb.eval();
      m.data()[i] = saved;
      if (plus.signature != base || minus.signature != base) {
        ++res.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * opts.epsilon);
      const double exact = a.data()[i];
      ++res.checked;
      mag = std::max({mag, std::abs(exact), std::abs(numeric)});
      const double diff = std::abs(exact - numeric);
      if (!(diff <= err)) {
        err = std::isnan(diff) ? std::numeric_limits<double>::infinity() : diff;
        worst = i;
      }
    }
    const double rel = err / std::max(mag, opts.floor * scale);
    if (worst >= 0 && !(rel <= res.max_rel_error)) {
      res.max_rel_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
      res.worst = pb.vars[v].first + "[" + std::to_string(worst) + "]";
    }
  }
  return res;
}

}  // namespace gspr::net
