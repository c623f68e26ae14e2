#include "s2vae/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_set>

#include "s2vae/error.hpp"

namespace s2vae::nn {

void Node::accumulate(const Mat& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor Tensor::constant(Mat value) {
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->value = std::move(value);
  return t;
}

Tensor Tensor::parameter(Mat value) {
  Tensor t = constant(std::move(value));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Mat Tensor::grad() const {
  if (node_->grad.size() == 0) return Mat::Zero(rows(), cols());
  return node_->grad;
}

double Tensor::item() const {
  require(rows() == 1 && cols() == 1, ErrorKind::ShapeMismatch, "item() needs a 1x1 tensor");
  return node_->value(0, 0);
}

void Tensor::backward() const {
  require(rows() == 1 && cols() == 1, ErrorKind::ShapeMismatch, "backward() starts from a 1x1 tensor");
  if (!node_->requires_grad) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->accumulate(Mat::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
  // Intermediate gradients are not needed after the sweep.
  for (Node* n : order) {
    if (n->backward && !n->retain_grad) n->grad.resize(0, 0);
  }
}

Tensor make_result(Mat value, std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->value = std::move(value);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    t.node_->requires_grad = true;
    t.node_->parents.reserve(inputs.size());
    for (auto& in : inputs) t.node_->parents.push_back(in.node());
    t.node_->backward = std::move(backward);
  }
  return t;
}

namespace {

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

void check_broadcast(const Mat& a, const Mat& b, Eigen::Index& r, Eigen::Index& c) {
  r = std::max(a.rows(), b.rows());
  c = std::max(a.cols(), b.cols());
  const bool ok = (a.rows() == r || a.rows() == 1) && (b.rows() == r || b.rows() == 1) &&
                  (a.cols() == c || a.cols() == 1) && (b.cols() == c || b.cols() == 1);
  require(ok, ErrorKind::ShapeMismatch,
          "cannot broadcast " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " with " +
              std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

Mat expand(const Mat& a, Eigen::Index r, Eigen::Index c) {
  if (a.rows() == r && a.cols() == c) return a;
  return a.replicate(r / a.rows(), c / a.cols());
}

Mat reduce_to(const Mat& g, Eigen::Index r, Eigen::Index c) {
  Mat out = g;
  if (r == 1 && out.rows() != 1) out = out.colwise().sum().eval();
  if (c == 1 && out.cols() != 1) out = out.rowwise().sum().eval();
  return out;
}

template <class Fwd, class Bwd>
Tensor unary(const Tensor& a, Fwd fwd, Bwd dfdx) {
  Mat v = a.value().unaryExpr(fwd);
  return make_result(std::move(v), {a}, [dfdx](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Mat d = p.value.binaryExpr(self.value, dfdx);
    p.accumulate(self.grad.cwiseProduct(d));
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Eigen::Index r, c;
  check_broadcast(a.value(), b.value(), r, c);
  Mat v = expand(a.value(), r, c) + expand(b.value(), r, c);
  return make_result(std::move(v), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      Node& p = parent(self, i);
      if (p.requires_grad) p.accumulate(reduce_to(self.grad, p.value.rows(), p.value.cols()));
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Eigen::Index r, c;
  check_broadcast(a.value(), b.value(), r, c);
  Mat v = expand(a.value(), r, c) - expand(b.value(), r, c);
  return make_result(std::move(v), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(reduce_to(self.grad, pa.value.rows(), pa.value.cols()));
    if (pb.requires_grad) pb.accumulate(-reduce_to(self.grad, pb.value.rows(), pb.value.cols()));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Eigen::Index r, c;
  check_broadcast(a.value(), b.value(), r, c);
  Mat v = expand(a.value(), r, c).cwiseProduct(expand(b.value(), r, c));
  return make_result(std::move(v), {a, b}, [r, c](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      pa.accumulate(reduce_to(self.grad.cwiseProduct(expand(pb.value, r, c)), pa.value.rows(), pa.value.cols()));
    }
    if (pb.requires_grad) {
      pb.accumulate(reduce_to(self.grad.cwiseProduct(expand(pa.value, r, c)), pb.value.rows(), pb.value.cols()));
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  Eigen::Index r, c;
  check_broadcast(a.value(), b.value(), r, c);
  Mat v = expand(a.value(), r, c).cwiseQuotient(expand(b.value(), r, c));
  return make_result(std::move(v), {a, b}, [r, c](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const Mat bb = expand(pb.value, r, c);
    if (pa.requires_grad) pa.accumulate(reduce_to(self.grad.cwiseQuotient(bb), pa.value.rows(), pa.value.cols()));
    if (pb.requires_grad) {
      const Mat g = -self.grad.cwiseProduct(self.value).cwiseQuotient(bb);
      pb.accumulate(reduce_to(g, pb.value.rows(), pb.value.cols()));
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& self) { parent(self, 0).accumulate(self.grad * s); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return make_result(a.value().array() + s, {a}, [](Node& self) { parent(self, 0).accumulate(self.grad); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), ErrorKind::ShapeMismatch, "matmul inner dimensions differ");
  Mat v = a.value() * b.value();
  return make_result(std::move(v), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * self.grad);
  });
}

Tensor transpose(const Tensor& a) {
  Mat v = a.value().transpose();
  return make_result(std::move(v), {a}, [](Node& self) { parent(self, 0).accumulate(self.grad.transpose()); });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.cols() == w.rows(), ErrorKind::ShapeMismatch,
          "linear: input width " + std::to_string(x.cols()) + " vs weight rows " + std::to_string(w.rows()));
  require(b.rows() == 1 && b.cols() == w.cols(), ErrorKind::ShapeMismatch, "linear: bias shape");
  Mat v = x.value() * w.value();
  v.rowwise() += b.value().row(0);
  return make_result(std::move(v), {x, w, b}, [](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    Node& pb = parent(self, 2);
    if (px.requires_grad) px.accumulate(self.grad * pw.value.transpose());
    if (pw.requires_grad) pw.accumulate(px.value.transpose() * self.grad);
    if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& a) {
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); },
      [](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + x * pdf;
      });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double x) { return std::abs(x); }, [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor detach(const Tensor& a) { return Tensor::constant(a.value()); }

Tensor sum(const Tensor& a) {
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return make_result(std::move(v), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate(Mat::Constant(p.value.rows(), p.value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Tensor row_sum(const Tensor& a) {
  Mat v = a.value().rowwise().sum();
  return make_result(std::move(v), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate(self.grad.replicate(1, p.value.cols()));
  });
}

Tensor col_mean(const Tensor& a) {
  const double n = static_cast<double>(a.rows());
  Mat v = a.value().colwise().sum() / n;
  return make_result(std::move(v), {a}, [n](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate(self.grad.replicate(p.value.rows(), 1) / n);
  });
}

Tensor row_norm(const Tensor& a) {
  Mat v = a.value().rowwise().norm();
  return make_result(std::move(v), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    Mat g(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double n = self.value(i, 0);
      if (n > 0.0) {
        g.row(i) = p.value.row(i) * (self.grad(i, 0) / n);
      } else {
        g.row(i).setZero();
      }
    }
    p.accumulate(g);
  });
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && start + count <= a.cols(), ErrorKind::ShapeMismatch, "slice_cols out of range");
  Mat v = a.value().middleCols(start, count);
  return make_result(std::move(v), {a}, [start, count](Node& self) {
    Node& p = parent(self, 0);
    Mat g = Mat::Zero(p.value.rows(), p.value.cols());
    g.middleCols(start, count) = self.grad;
    p.accumulate(g);
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), ErrorKind::ShapeMismatch, "concat_cols of nothing");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == parts.front().rows(), ErrorKind::ShapeMismatch, "concat_cols row mismatch");
    cols += p.cols();
  }
  Mat v(parts.front().rows(), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_result(std::move(v), parts, [](Node& self) {
    Eigen::Index off = 0;
    for (auto& pp : self.parents) {
      const auto w = pp->value.cols();
      if (pp->requires_grad) pp->accumulate(self.grad.middleCols(off, w));
      off += w;
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), ErrorKind::ShapeMismatch, "concat_rows of nothing");
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == parts.front().cols(), ErrorKind::ShapeMismatch, "concat_rows column mismatch");
    rows += p.rows();
  }
  Mat v(rows, parts.front().cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_result(std::move(v), parts, [](Node& self) {
    Eigen::Index off = 0;
    for (auto& pp : self.parents) {
      const auto h = pp->value.rows();
      if (pp->requires_grad) pp->accumulate(self.grad.middleRows(off, h));
      off += h;
    }
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<Eigen::Index>& index) {
  Mat v(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < a.rows(), ErrorKind::ShapeMismatch, "gather_rows index out of range");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return make_result(std::move(v), {a}, [index](Node& self) {
    Node& p = parent(self, 0);
    Mat g = Mat::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    p.accumulate(g);
  });
}

Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
  require(rows * cols == a.value().size(), ErrorKind::ShapeMismatch, "reshape changes the element count");
  Mat v = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  return make_result(std::move(v), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate(Eigen::Map<const Mat>(self.grad.data(), p.value.rows(), p.value.cols()));
  });
}

Tensor layer_norm(const Tensor& x, double eps) {
  require(x.cols() >= 2, ErrorKind::ShapeMismatch, "layer_norm needs at least 2 features");
  const Eigen::Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  Mat y(n, x.cols());
  Eigen::VectorXd inv_sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = x.value().row(i).mean();
    const auto centered = (x.value().row(i).array() - m).eval();
    const double var = centered.square().sum() / d;
    inv_sigma[i] = 1.0 / std::sqrt(var + eps);
    y.row(i) = centered * inv_sigma[i];
  }
  return make_result(std::move(y), {x}, [inv_sigma, d](Node& self) {
    Node& p = parent(self, 0);
    Mat g(self.grad.rows(), self.grad.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const auto gi = self.grad.row(i).array();
      const auto yi = self.value.row(i).array();
      const double mg = gi.sum() / d;
      const double mgy = (gi * yi).sum() / d;
      g.row(i) = (gi - mg - yi * mgy) * inv_sigma[i];
    }
    p.accumulate(g);
  });
}

Tensor normalize_chunks(const Tensor& x, Eigen::Index width) {
  require(width >= 1 && x.cols() % width == 0, ErrorKind::ShapeMismatch, "normalize_chunks width must divide columns");
  const Eigen::Index chunks = x.cols() / width;
  Mat y(x.rows(), x.cols());
  Mat norms(x.rows(), chunks);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < chunks; ++c) {
      const auto seg = x.value().row(i).segment(c * width, width);
      const double n = std::max(seg.norm(), 1e-12);
      norms(i, c) = n;
      y.row(i).segment(c * width, width) = seg / n;
    }
  }
  return make_result(std::move(y), {x}, [norms, width, chunks](Node& self) {
    Node& p = parent(self, 0);
    Mat g(self.grad.rows(), self.grad.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index c = 0; c < chunks; ++c) {
        const auto gy = self.grad.row(i).segment(c * width, width);
        const auto yy = self.value.row(i).segment(c * width, width);
        g.row(i).segment(c * width, width) = (gy - yy * yy.dot(gy)) / norms(i, c);
      }
    }
    p.accumulate(g);
  });
}

Tensor attention(const Tensor& qkv, Eigen::Index group, int heads) {
  require(qkv.cols() % 3 == 0, ErrorKind::ShapeMismatch, "attention expects [Q|K|V] columns");
  const Eigen::Index hidden = qkv.cols() / 3;
  require(heads >= 1 && hidden % heads == 0, ErrorKind::ShapeMismatch, "hidden width must divide into heads");
  require(group >= 1 && qkv.rows() % group == 0, ErrorKind::ShapeMismatch, "rows must divide into token groups");
  const Eigen::Index dh = hidden / heads;
  const Eigen::Index groups = qkv.rows() / group;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const Mat& in = qkv.value();
  Mat out(qkv.rows(), hidden);
  auto probs = std::make_shared<std::vector<Mat>>(static_cast<std::size_t>(groups * heads));
  for (Eigen::Index g = 0; g < groups; ++g) {
    for (int h = 0; h < heads; ++h) {
      const auto q = in.block(g * group, h * dh, group, dh);
      const auto k = in.block(g * group, hidden + h * dh, group, dh);
      const auto v = in.block(g * group, 2 * hidden + h * dh, group, dh);
      Mat s = (q * k.transpose()) * sc;
      for (Eigen::Index r = 0; r < group; ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
      }
      out.block(g * group, h * dh, group, dh) = s * v;
      (*probs)[static_cast<std::size_t>(g * heads + h)] = std::move(s);
    }
  }
  return make_result(std::move(out), {qkv}, [probs, group, heads, hidden, dh, groups, sc](Node& self) {
    Node& p = parent(self, 0);
    const Mat& in = p.value;
    Mat gin = Mat::Zero(in.rows(), in.cols());
    for (Eigen::Index g = 0; g < groups; ++g) {
      for (int h = 0; h < heads; ++h) {
        const Mat& pr = (*probs)[static_cast<std::size_t>(g * heads + h)];
        const auto q = in.block(g * group, h * dh, group, dh);
        const auto k = in.block(g * group, hidden + h * dh, group, dh);
        const auto v = in.block(g * group, 2 * hidden + h * dh, group, dh);
        const auto go = self.grad.block(g * group, h * dh, group, dh);
        gin.block(g * group, 2 * hidden + h * dh, group, dh) = pr.transpose() * go;
        const Mat dp = go * v.transpose();
        Mat ds = pr.cwiseProduct(dp);
        const Eigen::VectorXd rs = ds.rowwise().sum();
        ds -= pr.cwiseProduct(rs.replicate(1, group));
        ds *= sc;
        gin.block(g * group, h * dh, group, dh) = ds * k;
        gin.block(g * group, hidden + h * dh, group, dh) = ds.transpose() * q;
      }
    }
    p.accumulate(gin);
  });
}

Tensor power_spherical_sample(const Tensor& mu, const Tensor& kappa, const product::ProductSphereSpec& spec,
                              Rng& rng) {
  const int n = spec.n_spheres;
  const int d = spec.sphere_dim;
  require(mu.cols() == spec.total_dim(), ErrorKind::ShapeMismatch, "power_spherical_sample: mu width");
  require(kappa.cols() == n && kappa.rows() == mu.rows(), ErrorKind::ShapeMismatch,
          "power_spherical_sample: kappa shape");
  const Eigen::Index rows = mu.rows();
  Mat z(rows, spec.total_dim());
  auto traces = std::make_shared<std::vector<ps::SampleTrace>>();
  traces->reserve(static_cast<std::size_t>(rows * n));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int i = 0; i < n; ++i) {
      const Vec m = mu.value().row(r).segment(i * d, d).transpose();
      const ps::PowerSphericalParams p(sphere::SpherePoint(m), kappa.value()(r, i));
      auto tr = ps::rsample(p, rng);
      z.row(r).segment(i * d, d) = tr.z.transpose();
      traces->push_back(std::move(tr));
    }
  }
  return make_result(std::move(z), {mu, kappa}, [traces, n, d](Node& self) {
    Node& pm = parent(self, 0);
    Node& pk = parent(self, 1);
    Mat gmu = Mat::Zero(pm.value.rows(), pm.value.cols());
    Mat gk = Mat::Zero(pk.value.rows(), pk.value.cols());
    for (Eigen::Index r = 0; r < self.value.rows(); ++r) {
      for (int i = 0; i < n; ++i) {
        const auto& tr = (*traces)[static_cast<std::size_t>(r * n + i)];
        const Vec m = pm.value.row(r).segment(i * d, d).transpose();
        const ps::PowerSphericalParams p(sphere::SpherePoint(m), pk.value(r, i));
        const Vec g = self.grad.row(r).segment(i * d, d).transpose();
        const auto pg = ps::pathwise_gradient(p, tr, g);
        gmu.row(r).segment(i * d, d) = pg.d_mu.transpose();
        gk(r, i) = pg.d_kappa;
      }
    }
    if (pm.requires_grad) pm.accumulate(gmu);
    if (pk.requires_grad) pk.accumulate(gk);
  });
}

Tensor power_spherical_kl(const Tensor& kappa, int sphere_dim) {
  // Non-finite kappa propagates as NaN so callers can detect it like any other loss.
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  Mat v = kappa.value().unaryExpr(
      [sphere_dim](double k) { return std::isfinite(k) && k >= 0.0 ? ps::kl_to_uniform(sphere_dim, k) : nan; });
  return make_result(std::move(v), {kappa}, [sphere_dim](Node& self) {
    Node& p = parent(self, 0);
    Mat d = p.value.unaryExpr(
        [sphere_dim](double k) { return std::isfinite(k) && k >= 0.0 ? ps::kl_to_uniform_dkappa(sphere_dim, k) : nan; });
    p.accumulate(self.grad.cwiseProduct(d));
  });
}

GradCheckResult gradient_check(const std::function<Tensor()>& f,
                               const std::vector<std::pair<std::string, Tensor>>& params, double h,
                               int max_entries, std::uint64_t seed) {
  for (const auto& [name, p] : params) p.zero_grad();
  const Tensor out = f();
  out.backward();
  GradCheckResult res;
  Rng rng(seed);
  for (const auto& [name, p] : params) {
    Tensor handle = p;
    const Mat analytic = handle.grad();
    const Eigen::Index n = handle.value().size();
    std::vector<Eigen::Index> idx;
    if (n <= max_entries) {
      for (Eigen::Index i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (int i = 0; i < max_entries; ++i) idx.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    }
    Eigen::VectorXd ga(static_cast<Eigen::Index>(idx.size()));
    Eigen::VectorXd gn(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double* x = handle.mutable_value().data() + idx[k];
      const double saved = *x;
      *x = saved + h;
      const double fp = f().item();
      *x = saved - h;
      const double fm = f().item();
      *x = saved;
      gn[static_cast<Eigen::Index>(k)] = (fp - fm) / (2.0 * h);
      ga[static_cast<Eigen::Index>(k)] = analytic.data()[idx[k]];
    }
    const double denom = std::max(gn.norm(), 1e-10);
    const double err = (ga - gn).norm() / denom;
    // Parameters with no numeric or analytic signal are consistent.
    const double rel = (gn.norm() < 1e-10 && ga.norm() < 1e-8) ? 0.0 : err;
    if (rel > res.max_rel_error || res.worst.empty()) {
      if (rel >= res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = name;
      }
    }
  }
  for (const auto& [name, p] : params) p.zero_grad();
  return res;
}

}  // namespace s2vae::nn
