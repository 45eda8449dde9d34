#include "tarif/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace tarif::ad {

const char* op_name(OpKind op) noexcept {
  switch (op) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Constant: return "constant";
    case OpKind::Detach: return "detach";
    case OpKind::MatMul: return "matmul";
    case OpKind::Transpose: return "transpose";
    case OpKind::Add: return "add";
    case OpKind::AddRow: return "add_row";
    case OpKind::Sub: return "sub";
    case OpKind::Scale: return "scale";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::ScaleBy: return "scale_by";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::RowSoftmax: return "row_softmax";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Relu: return "relu";
    case OpKind::Log1p: return "log1p";
    case OpKind::Exp: return "exp";
    case OpKind::Power: return "power";
    case OpKind::Sharpen: return "sharpen";
    case OpKind::RowSum: return "row_sum";
    case OpKind::Sum: return "sum";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::ColumnSlice: return "column_slice";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::EdgeSoftmaxAggregate: return "edge_softmax_aggregate";
    case OpKind::MaskedCrossEntropy: return "masked_cross_entropy";
  }
  return "unknown";
}

Tape& Var::tape() const {
  if (!tape_) throw UsageError("Var is not attached to a tape");
  return *tape_;
}

const Matrix& Var::value() const { return tape().value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw DimensionError("expected a 1x1 Var, got " + shape_string(v));
  }
  return v(0, 0);
}

// ---------------------------------------------------------------------------

Var Tape::leaf(Matrix value) {
  if (!value.allFinite()) throw NumericalError("leaf: non-finite value");
  value_bytes_ += static_cast<std::size_t>(value.size()) * sizeof(double);
  nodes_.push_back({OpKind::Leaf, {}, std::move(value), {}, true});
  return {this, static_cast<Index>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NumericalError("constant: non-finite value");
  value_bytes_ += static_cast<std::size_t>(value.size()) * sizeof(double);
  nodes_.push_back({OpKind::Constant, {}, std::move(value), {}, false});
  return {this, static_cast<Index>(nodes_.size() - 1)};
}

void Tape::check_owned(const Var& v) const {
  if (!v.valid()) throw UsageError("input Var is not attached to a tape");
  if (&v.tape() != this) throw UsageError("input Var belongs to a different tape");
}

Var Tape::record(OpKind op, std::initializer_list<Var> inputs, Matrix value, BackwardFn backward) {
  return record(op, std::span<const Var>(inputs.begin(), inputs.size()), std::move(value),
                std::move(backward));
}

Var Tape::record(OpKind op, std::span<const Var> inputs, Matrix value, BackwardFn backward) {
  std::vector<Index> ids;
  ids.reserve(inputs.size());
  bool needs = false;
  for (const Var& v : inputs) {
    check_owned(v);
    ids.push_back(v.id());
    needs = needs || needs_grad(v.id());
  }
  if (!value.allFinite()) {
    throw NumericalError(std::string("non-finite value produced by op '") + op_name(op) + "'");
  }
  value_bytes_ += static_cast<std::size_t>(value.size()) * sizeof(double);
  nodes_.push_back({op, std::move(ids), std::move(value), needs ? std::move(backward) : BackwardFn{},
                    needs});
  return {this, static_cast<Index>(nodes_.size() - 1)};
}

Gradients::Gradients(const Tape& tape)
    : tape_(&tape), grads_(tape.size()), present_(tape.size(), false) {}

bool Gradients::has(Index id) const {
  return id >= 0 && static_cast<std::size_t>(id) < present_.size() &&
         present_[static_cast<std::size_t>(id)];
}

Matrix Gradients::operator[](const Var& v) const {
  if (has(v.id())) return grads_[static_cast<std::size_t>(v.id())];
  return Matrix::Zero(v.rows(), v.cols());
}

Gradients backward(const Var& loss) {
  const Tape& tape = loss.tape();
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw UsageError("backward: loss must be 1x1, got " + shape_string(loss.value()));
  }
  Gradients grads(tape);
  if (!tape.needs_grad(loss.id())) return grads;
  grads.add(loss.id(), Matrix::Ones(1, 1));
  for (Index id = loss.id(); id >= 0; --id) {
    const auto i = static_cast<std::size_t>(id);
    if (!grads.present_[i]) continue;
    const auto& node = tape.nodes_[i];
    ++grads.visited_;
    if (!node.backward) continue;
    if (!grads.grads_[i].allFinite()) {
      throw NumericalError(std::string("non-finite gradient reaching op '") + op_name(node.op) +
                           "'");
    }
    node.backward(tape, grads.grads_[i], grads);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

namespace {

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

void require_scalar(const char* op, const Matrix& s) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw DimensionError(std::string(op) + ": expected 1x1 scalar, got " + shape_string(s));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var detach(const Var& x) {
  return x.tape().constant(x.value());
}

Var matmul(const Var& a, const Var& b) {
  const Index ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::MatMul, {a, b}, tarif::matmul(a.value(), b.value()),
                         [ia, ib](const Tape& t, const Matrix& g, Gradients& gr) {
                           gr.add(ia, g * t.value(ib).transpose());
                           gr.add(ib, t.value(ia).transpose() * g);
                         });
}

Var transpose(const Var& a) {
  const Index ia = a.id();
  return a.tape().record(OpKind::Transpose, {a}, a.value().transpose(),
                         [ia](const Tape&, const Matrix& g, Gradients& gr) {
                           gr.add(ia, g.transpose());
                         });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a.value(), b.value());
  const Index ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::Add, {a, b}, a.value() + b.value(),
                         [ia, ib](const Tape&, const Matrix& g, Gradients& gr) {
                           gr.add(ia, g);
                           gr.add(ib, g);
                         });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a.value(), b.value());
  const Index ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::Sub, {a, b}, a.value() - b.value(),
                         [ia, ib](const Tape&, const Matrix& g, Gradients& gr) {
                           gr.add(ia, g);
                           gr.add(ib, -g);
                         });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: cannot broadcast " + shape_string(row.value()) + " over " +
                         shape_string(a.value()));
  }
  const Index ia = a.id(), ib = row.id();
  Matrix v = a.value().rowwise() + row.value().row(0);
  return a.tape().record(OpKind::AddRow, {a, row}, std::move(v),
                         [ia, ib](const Tape&, const Matrix& g, Gradients& gr) {
                           gr.add(ia, g);
                           gr.add(ib, g.colwise().sum());
                         });
}

Var scale(const Var& a, double c) {
  const Index ia = a.id();
  return a.tape().record(OpKind::Scale, {a}, a.value() * c,
                         [ia, c](const Tape&, const Matrix& g, Gradients& gr) { gr.add(ia, g * c); });
}

Var add_scalar(const Var& a, double c) {
  const Index ia = a.id();
  return a.tape().record(OpKind::AddScalar, {a}, (a.value().array() + c).matrix(),
                         [ia](const Tape&, const Matrix& g, Gradients& gr) { gr.add(ia, g); });
}

Var scale_by(const Var& a, const Var& s) {
  require_scalar("scale_by", s.value());
  const Index ia = a.id(), is = s.id();
  return a.tape().record(OpKind::ScaleBy, {a, s}, a.value() * s.scalar(),
                         [ia, is](const Tape& t, const Matrix& g, Gradients& gr) {
                           gr.add(ia, g * t.value(is)(0, 0));
                           gr.add(is, Matrix::Constant(1, 1, g.cwiseProduct(t.value(ia)).sum()));
                         });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape("hadamard", a.value(), b.value());
  const Index ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::Hadamard, {a, b}, a.value().cwiseProduct(b.value()),
                         [ia, ib](const Tape& t, const Matrix& g, Gradients& gr) {
                           gr.add(ia, g.cwiseProduct(t.value(ib)));
                           gr.add(ib, g.cwiseProduct(t.value(ia)));
                         });
}

Var row_softmax(const Var& a) {
  Matrix y = a.value();
  for (Index i = 0; i < y.rows(); ++i) {
    const double m = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  const Index ia = a.id();
  Tape& t = a.tape();
  const Index iy = static_cast<Index>(t.size());
  return t.record(OpKind::RowSoftmax, {a}, std::move(y),
                  [ia, iy](const Tape& tp, const Matrix& g, Gradients& gr) {
                    const Matrix& y = tp.value(iy);
                    const Vector dots = g.cwiseProduct(y).rowwise().sum();
                    gr.add(ia, y.cwiseProduct((g.colwise() - dots)));
                  });
}

Var sigmoid(const Var& a) {
  const Matrix y = a.value().unaryExpr(&stable_sigmoid);
  const Index ia = a.id();
  Tape& t = a.tape();
  const Index iy = static_cast<Index>(t.size());
  return t.record(OpKind::Sigmoid, {a}, y, [ia, iy](const Tape& tp, const Matrix& g, Gradients& gr) {
    const auto y = tp.value(iy).array();
    gr.add(ia, (g.array() * y * (1.0 - y)).matrix());
  });
}

Var relu(const Var& a) {
  const Index ia = a.id();
  return a.tape().record(OpKind::Relu, {a}, a.value().cwiseMax(0.0),
                         [ia](const Tape& t, const Matrix& g, Gradients& gr) {
                           gr.add(ia, (t.value(ia).array() > 0.0).select(g, 0.0).matrix());
                         });
}

Var log1p(const Var& a) {
  if ((a.value().array() <= -1.0).any()) {
    throw ArgumentError("log1p: argument must exceed -1");
  }
  const Index ia = a.id();
  return a.tape().record(OpKind::Log1p, {a},
                         a.value().unaryExpr([](double x) { return std::log1p(x); }),
                         [ia](const Tape& t, const Matrix& g, Gradients& gr) {
                           gr.add(ia, (g.array() / (1.0 + t.value(ia).array())).matrix());
                         });
}

Var exp(const Var& a) {
  const Index ia = a.id();
  Tape& t = a.tape();
  const Index iy = static_cast<Index>(t.size());
  return t.record(OpKind::Exp, {a}, a.value().array().exp().matrix(),
                  [ia, iy](const Tape& tp, const Matrix& g, Gradients& gr) {
                    gr.add(ia, g.cwiseProduct(tp.value(iy)));
                  });
}

Var power(const Var& a, double c) {
  const Index ia = a.id();
  return a.tape().record(OpKind::Power, {a}, a.value().array().pow(c).matrix(),
                         [ia, c](const Tape& t, const Matrix& g, Gradients& gr) {
                           const auto x = t.value(ia).array();
                           gr.add(ia, (g.array() * c * x.pow(c - 1.0)).matrix());
                         });
}

namespace {

// log(1 + x^p) without overflowing x^p for large x.
double log1p_pow(double x, double p) {
  if (x <= 1.0) return std::log1p(std::pow(x, p));
  return p * std::log(x) + std::log1p(std::pow(x, -p));
}

// x^p / (1 + x^p)
double pow_ratio(double x, double p) {
  if (x <= 1.0) {
    const double xp = std::pow(x, p);
    return xp / (1.0 + xp);
  }
  return 1.0 / (1.0 + std::pow(x, -p));
}

}  // namespace

Var sharpen(const Var& x, const Var& p, const Var& q) {
  require_scalar("sharpen", p.value());
  require_scalar("sharpen", q.value());
  const double pv = p.scalar(), qv = q.scalar();
  if (!(pv >= 1.0 && qv >= 1.0)) {
    throw ArgumentError("sharpen: exponents must satisfy p, q >= 1");
  }
  if ((x.value().array() < 0.0).any()) {
    throw ArgumentError("sharpen: negative input; apply the kernel map first");
  }
  const Matrix y = x.value().unaryExpr([=](double v) {
    return v == 0.0 ? 0.0 : v * std::pow(log1p_pow(v, pv), qv);
  });
  const Index ix = x.id(), ip = p.id(), iq = q.id();
  return x.tape().record(
      OpKind::Sharpen, {x, p, q}, y, [ix, ip, iq](const Tape& t, const Matrix& g, Gradients& gr) {
        const Matrix& xs = t.value(ix);
        const double pv = t.value(ip)(0, 0), qv = t.value(iq)(0, 0);
        Matrix dx(xs.rows(), xs.cols());
        double dp = 0.0, dq = 0.0;
        for (Index k = 0; k < xs.size(); ++k) {
          const double v = xs.data()[k];
          const double gk = g.data()[k];
          if (v == 0.0) {
            // All three partials vanish in the limit x -> 0+ for p, q >= 1
            // except df/dx at p = q = 1, which is log(1 + 0) = 0 as well.
            dx.data()[k] = 0.0;
            continue;
          }
          const double L = log1p_pow(v, pv);
          const double r = pow_ratio(v, pv);
          const double Lq = std::pow(L, qv);
          const double Lq1 = (qv == 1.0) ? 1.0 : std::pow(L, qv - 1.0);
          dx.data()[k] = gk * (Lq + qv * Lq1 * pv * r);
          dp += gk * v * qv * Lq1 * r * std::log(v);
          if (L > 0.0) dq += gk * v * Lq * std::log(L);
        }
        gr.add(ix, dx);
        gr.add(ip, Matrix::Constant(1, 1, dp));
        gr.add(iq, Matrix::Constant(1, 1, dq));
      });
}

Var row_sum(const Var& a) {
  const Index ia = a.id();
  const Index cols = a.cols();
  return a.tape().record(OpKind::RowSum, {a}, a.value().rowwise().sum(),
                         [ia, cols](const Tape&, const Matrix& g, Gradients& gr) {
                           gr.add(ia, g.replicate(1, cols));
                         });
}

Var sum(const Var& a) {
  const Index ia = a.id();
  const Index rows = a.rows(), cols = a.cols();
  return a.tape().record(OpKind::Sum, {a}, Matrix::Constant(1, 1, a.value().sum()),
                         [ia, rows, cols](const Tape&, const Matrix& g, Gradients& gr) {
                           gr.add(ia, Matrix::Constant(rows, cols, g(0, 0)));
                         });
}

Var layer_norm(const Var& a, double eps) {
  const Matrix& x = a.value();
  const Index d = x.cols();
  Matrix y(x.rows(), d);
  Vector inv_std(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const auto centered = (x.row(i).array() - mu).eval();
    const double var = centered.square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    y.row(i) = centered * inv_std(i);
  }
  const Index ia = a.id();
  Tape& t = a.tape();
  const Index iy = static_cast<Index>(t.size());
  return t.record(OpKind::LayerNorm, {a}, std::move(y),
                  [ia, iy, inv_std](const Tape& tp, const Matrix& g, Gradients& gr) {
                    const Matrix& y = tp.value(iy);
                    const double d = static_cast<double>(y.cols());
                    Matrix dx(y.rows(), y.cols());
                    for (Index i = 0; i < y.rows(); ++i) {
                      const double gm = g.row(i).sum() / d;
                      const double gy = g.row(i).dot(y.row(i)) / d;
                      dx.row(i) = inv_std(i) * (g.row(i).array() - gm - y.row(i).array() * gy);
                    }
                    gr.add(ia, dx);
                  });
}

Var column_slice(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("column_slice: columns [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " +
                         shape_string(a.value()));
  }
  const Index ia = a.id();
  const Index rows = a.rows(), cols = a.cols();
  return a.tape().record(OpKind::ColumnSlice, {a}, a.value().middleCols(start, count),
                         [=](const Tape&, const Matrix& g, Gradients& gr) {
                           Matrix full = Matrix::Zero(rows, cols);
                           full.middleCols(start, count) = g;
                           gr.add(ia, full);
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index total = 0;
  std::vector<Index> ids, widths;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(p.value()));
    }
    ids.push_back(p.id());
    widths.push_back(p.cols());
    total += p.cols();
  }
  Matrix v(rows, total);
  Index offset = 0;
  for (const Var& p : parts) {
    v.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return parts.front().tape().record(OpKind::ConcatCols, parts, std::move(v),
                                     [ids, widths](const Tape&, const Matrix& g, Gradients& gr) {
                                       Index off = 0;
                                       for (std::size_t k = 0; k < ids.size(); ++k) {
                                         gr.add(ids[k], g.middleCols(off, widths[k]));
                                         off += widths[k];
                                       }
                                     });
}

Var edge_softmax_aggregate(const Neighborhoods& nbrs, const Var& values, const Var& self_score,
                           const Var& neighbor_score, double slope,
                           std::vector<double>* weights_out) {
  const Index n = nbrs.num_nodes();
  if (values.rows() != n || self_score.rows() != n || neighbor_score.rows() != n ||
      self_score.cols() != 1 || neighbor_score.cols() != 1) {
    throw DimensionError("edge_softmax_aggregate: expected " + std::to_string(n) +
                         " rows and n x 1 scores, got values " + shape_string(values.value()) +
                         ", scores " + shape_string(self_score.value()) + " / " +
                         shape_string(neighbor_score.value()));
  }
  const Matrix& v = values.value();
  const Matrix& s = self_score.value();
  const Matrix& u = neighbor_score.value();

  auto weights = std::make_shared<std::vector<double>>(nbrs.targets.size());
  auto positive = std::make_shared<std::vector<bool>>(nbrs.targets.size());
  Matrix out = Matrix::Zero(n, v.cols());
  for (Index i = 0; i < n; ++i) {
    const auto b = static_cast<std::size_t>(nbrs.offsets[static_cast<std::size_t>(i)]);
    const auto e = static_cast<std::size_t>(nbrs.offsets[static_cast<std::size_t>(i) + 1]);
    if (b == e) throw ArgumentError("edge_softmax_aggregate: node " + std::to_string(i) + " has no neighbours");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = b; k < e; ++k) {
      const double z = s(i, 0) + u(nbrs.targets[k], 0);
      (*positive)[k] = z > 0.0;
      const double ez = z > 0.0 ? z : slope * z;
      (*weights)[k] = ez;
      mx = std::max(mx, ez);
    }
    double total = 0.0;
    for (std::size_t k = b; k < e; ++k) {
      (*weights)[k] = std::exp((*weights)[k] - mx);
      total += (*weights)[k];
    }
    for (std::size_t k = b; k < e; ++k) {
      (*weights)[k] /= total;
      out.row(i) += (*weights)[k] * v.row(nbrs.targets[k]);
    }
  }
  if (weights_out) *weights_out = *weights;

  const Index iv = values.id(), is = self_score.id(), iu = neighbor_score.id();
  const Neighborhoods* graph = &nbrs;
  return values.tape().record(
      OpKind::EdgeSoftmaxAggregate, {values, self_score, neighbor_score}, std::move(out),
      [=](const Tape& t, const Matrix& g, Gradients& gr) {
        const Matrix& v = t.value(iv);
        Matrix dv = Matrix::Zero(v.rows(), v.cols());
        Matrix ds = Matrix::Zero(n, 1);
        Matrix du = Matrix::Zero(n, 1);
        std::vector<double> da;
        for (Index i = 0; i < n; ++i) {
          const auto b = static_cast<std::size_t>(graph->offsets[static_cast<std::size_t>(i)]);
          const auto e = static_cast<std::size_t>(graph->offsets[static_cast<std::size_t>(i) + 1]);
          da.assign(e - b, 0.0);
          double weighted = 0.0;
          for (std::size_t k = b; k < e; ++k) {
            const Index j = graph->targets[k];
            const double a = (*weights)[k];
            dv.row(j) += a * g.row(i);
            da[k - b] = g.row(i).dot(v.row(j));
            weighted += a * da[k - b];
          }
          for (std::size_t k = b; k < e; ++k) {
            const double de = (*weights)[k] * (da[k - b] - weighted);
            const double dz = (*positive)[k] ? de : slope * de;
            ds(i, 0) += dz;
            du(graph->targets[k], 0) += dz;
          }
        }
        gr.add(iv, dv);
        gr.add(is, ds);
        gr.add(iu, du);
      });
}

Var masked_cross_entropy(const Var& logits, std::span<const int> labels,
                         std::span<const Index> rows) {
  if (rows.empty()) throw ArgumentError("masked_cross_entropy: empty mask");
  const Matrix& z = logits.value();
  if (static_cast<Index>(labels.size()) != z.rows()) {
    throw DimensionError("masked_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + shape_string(z));
  }
  const Index k = z.cols();
  Matrix probs(static_cast<Index>(rows.size()), k);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index i = rows[r];
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw ArgumentError("masked_cross_entropy: label out of range");
    const double m = z.row(i).maxCoeff();
    const auto ex = (z.row(i).array() - m).exp().eval();
    const double total = ex.sum();
    loss += std::log(total) + m - z(i, y);
    probs.row(static_cast<Index>(r)) = ex / total;
  }
  const double count = static_cast<double>(rows.size());
  loss /= count;

  const Index il = logits.id();
  std::vector<Index> row_list(rows.begin(), rows.end());
  std::vector<int> row_labels;
  row_labels.reserve(rows.size());
  for (Index i : rows) row_labels.push_back(labels[static_cast<std::size_t>(i)]);
  const Index n = z.rows();
  return logits.tape().record(
      OpKind::MaskedCrossEntropy, {logits}, Matrix::Constant(1, 1, loss),
      [=, probs = std::move(probs)](const Tape&, const Matrix& g, Gradients& gr) {
        Matrix dz = Matrix::Zero(n, k);
        const double scale = g(0, 0) / count;
        for (std::size_t r = 0; r < row_list.size(); ++r) {
          dz.row(row_list[r]) += scale * probs.row(static_cast<Index>(r));
          dz(row_list[r], row_labels[r]) -= scale;
        }
        gr.add(il, dz);
      });
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const LossFn& loss, std::span<const Matrix> params, double step,
                           const GradCheckOptions& options) {
  if (!(step > 0.0)) throw ArgumentError("grad_check: step must be positive");
  if (!(options.floor > 0.0)) throw ArgumentError("grad_check: floor must be positive");

  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Matrix& p : params) leaves.push_back(tape.leaf(p));
    const Var out = loss(tape, leaves);
    const Gradients grads = backward(out);
    for (const Var& v : leaves) analytic.push_back(grads[v]);
  }

  std::vector<Matrix> work(params.begin(), params.end());
  auto evaluate = [&]() {
    Tape tape;
    std::vector<Var> leaves;
    for (const Matrix& p : work) leaves.push_back(tape.leaf(p));
    return loss(tape, leaves).scalar();
  };

  GradCheckReport report;
  for (std::size_t pi = 0; pi < work.size(); ++pi) {
    Matrix numeric(work[pi].rows(), work[pi].cols());
    for (Index k = 0; k < work[pi].size(); ++k) {
      double& theta = work[pi].data()[k];
      const double saved = theta;
      auto central = [&](double h) {
        theta = saved + h;
        const double up = evaluate();
        theta = saved - h;
        const double down = evaluate();
        theta = saved;
        return (up - down) / (2.0 * h);
      };
      double fd = central(step);
      const double a = analytic[pi].data()[k];
      if (options.kink_retry && std::abs(a - fd) > 1e-9 + 1e-6 * std::abs(fd)) {
        // In a smooth region successive steps agree to O(h^2); a gap means
        // the wider stencil straddles a kink, so shrink until two agree.
        double h = step;
        for (int level = 0; level < 3; ++level) {
          h *= 0.1;
          const double fine = central(h);
          const bool consistent = std::abs(fine - fd) <= 1e-9 + 1e-4 * std::abs(fine);
          if (!consistent) ++report.kink_coordinates;
          fd = fine;
          if (consistent) break;
        }
      }
      numeric.data()[k] = fd;
    }
    const double diff = (analytic[pi] - numeric).norm();
    const double rel = diff / std::max(numeric.norm(), options.floor);
    report.relative_errors.push_back(rel);
    report.max_abs_errors.push_back((analytic[pi] - numeric).cwiseAbs().maxCoeff());
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_param = pi;
    }
  }
  return report;
}

}  // namespace tarif::ad
