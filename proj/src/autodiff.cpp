#include "tdt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdt/errors.hpp"
#include "tdt/kernels.hpp"

namespace tdt {

// ---- Var / Tape -------------------------------------------------------------

Var Var::constant(Tensor v) {
  Var out;
  out.const_value_ = std::make_shared<const Tensor>(std::move(v));
  return out;
}

const Tensor& Var::value() const {
  if (tracked()) return tape_->node(id_).value;
  if (!const_value_) throw ContractError("value() on default-constructed Var");
  return *const_value_;
}

Var Tape::leaf(Tensor value) {
  NodeId id = add_node("leaf", {}, std::move(value), nullptr);
  leaf_ids_.push_back(id);
  return Var(this, id);
}

NodeId Tape::add_node(const char* op, std::vector<NodeId> inputs, Tensor value, BackwardFn fn) {
  NodeId id = static_cast<NodeId>(nodes_.size());
  for (NodeId in : inputs) {
    if (in < 0 || in >= id) {
      throw ContractError(std::string(op) + ": tape input id out of order");
    }
  }
  nodes_.push_back(TapeNode{op, std::move(inputs), std::move(value), std::move(fn)});
  return id;
}

void Tape::accumulate(std::vector<Tensor>& grads, NodeId id, const Tensor& contribution) {
  Tensor& slot = grads[static_cast<size_t>(id)];
  if (slot.size() == 0) slot = Tensor(contribution.shape());
  if (!slot.same_shape(contribution)) {
    throw ShapeError("gradient accumulation shape clash: " + slot.shape_str() + " vs " +
                     contribution.shape_str());
  }
  for (int64_t i = 0; i < contribution.size(); ++i) slot[i] += contribution[i];
}

GradientMap Tape::backward(const Var& loss) {
  if (!loss.tracked() || loss.tape() != this) {
    throw ContractError("backward: loss is not a node of this tape");
  }
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + loss.value().shape_str());
  }

  // grads[i] empty-shaped tensor means "no gradient reached node i yet".
  std::vector<Tensor> grads(nodes_.size());
  grads[static_cast<size_t>(loss.id())] = Tensor(loss.value().shape(), {1.0});

  for (NodeId id = loss.id(); id >= 0; --id) {
    const TapeNode& n = nodes_[static_cast<size_t>(id)];
    Tensor& g = grads[static_cast<size_t>(id)];
    if (g.size() == 0 || !n.backward) continue;
    n.backward(g, *this, grads);
  }

  GradientMap out;
  for (NodeId leaf : leaf_ids_) {
    Tensor& g = grads[static_cast<size_t>(leaf)];
    if (g.size() == 0) {
      out.grads_.emplace(leaf, Tensor(nodes_[static_cast<size_t>(leaf)].value.shape()));
    } else {
      out.grads_.emplace(leaf, std::move(g));
    }
  }
  return out;
}

const Tensor& GradientMap::at(NodeId leaf_id) const {
  auto it = grads_.find(leaf_id);
  if (it == grads_.end()) {
    throw ContractError("GradientMap: node " + std::to_string(leaf_id) + " is not a leaf");
  }
  return it->second;
}

// ---- op plumbing ------------------------------------------------------------

namespace {

// One op operand: either a tape node id or a captured constant.
struct Operand {
  NodeId id = -1;
  std::shared_ptr<const Tensor> cval;

  const Tensor& get(const Tape& t) const { return id >= 0 ? t.node(id).value : *cval; }
  bool tracked() const { return id >= 0; }
};

Tape* common_tape(const char* op, std::initializer_list<const Var*> vars) {
  Tape* t = nullptr;
  for (const Var* v : vars) {
    if (!v->tracked()) continue;
    if (t == nullptr) {
      t = v->tape();
    } else if (t != v->tape()) {
      throw ContractError(std::string(op) + ": operands live on different tapes");
    }
  }
  return t;
}

Operand make_operand(const Var& v) {
  Operand o;
  if (v.tracked()) {
    o.id = v.id();
  } else {
    o.cval = std::make_shared<const Tensor>(v.value());
  }
  return o;
}

std::vector<NodeId> tracked_inputs(std::initializer_list<const Operand*> ops) {
  std::vector<NodeId> ids;
  for (const Operand* o : ops) {
    if (o->tracked()) ids.push_back(o->id);
  }
  return ids;
}

Var finish(const char* op, Tape* t, std::vector<NodeId> inputs, Tensor out, BackwardFn fn) {
  if (t == nullptr) return Var::constant(std::move(out));
  NodeId id = t->add_node(op, std::move(inputs), std::move(out), std::move(fn));
  return t->var(id);
}

void require_rank(const char* op, const Tensor& t, int64_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank-" + std::to_string(rank) +
                     " tensor, got " + t.shape_str());
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank("matmul", av, 2);
  require_rank("matmul", bv, 2);
  if (av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree: " + av.shape_str() + " vs " +
                     bv.shape_str());
  }
  const int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  kernels::matmul(av.data(), bv.data(), out.data(), m, k, n);

  Tape* t = common_tape("matmul", {&a, &b});
  Operand oa = make_operand(a), ob = make_operand(b);
  BackwardFn fn;
  if (t) {
    fn = [oa, ob, m, k, n](const Tensor& g, Tape& tape, std::vector<Tensor>& grads) {
      if (oa.tracked()) {
        Tensor da({m, k});
        kernels::matmul_nt(g.data(), ob.get(tape).data(), da.data(), m, n, k);
        Tape::accumulate(grads, oa.id, da);
      }
      if (ob.tracked()) {
        Tensor db({k, n});
        kernels::matmul_tn(oa.get(tape).data(), g.data(), db.data(), k, m, n);
        Tape::accumulate(grads, ob.id, db);
      }
    };
  }
  return finish("matmul", t, tracked_inputs({&oa, &ob}), std::move(out), std::move(fn));
}

Var add(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) {
    throw ShapeError("add: shapes disagree: " + av.shape_str() + " vs " + bv.shape_str());
  }
  Tensor out(av.shape());
  for (int64_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];

  Tape* t = common_tape("add", {&a, &b});
  Operand oa = make_operand(a), ob = make_operand(b);
  BackwardFn fn;
  if (t) {
    fn = [oa, ob](const Tensor& g, Tape&, std::vector<Tensor>& grads) {
      if (oa.tracked()) Tape::accumulate(grads, oa.id, g);
      if (ob.tracked()) Tape::accumulate(grads, ob.id, g);
    };
  }
  return finish("add", t, tracked_inputs({&oa, &ob}), std::move(out), std::move(fn));
}

Var add_bias(const Var& x, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  require_rank("add_bias", xv, 2);
  require_rank("add_bias", bv, 1);
  if (xv.dim(1) != bv.dim(0)) {
    throw ShapeError("add_bias: shapes disagree: " + xv.shape_str() + " vs " + bv.shape_str());
  }
  const int64_t r = xv.dim(0), c = xv.dim(1);
  Tensor out({r, c});
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + bv[j];
  }

  Tape* t = common_tape("add_bias", {&x, &b});
  Operand ox = make_operand(x), ob = make_operand(b);
  BackwardFn fn;
  if (t) {
    fn = [ox, ob, r, c](const Tensor& g, Tape&, std::vector<Tensor>& grads) {
      if (ox.tracked()) Tape::accumulate(grads, ox.id, g);
      if (ob.tracked()) {
        Tensor db({c});
        for (int64_t i = 0; i < r; ++i) {
          for (int64_t j = 0; j < c; ++j) db[j] += g[i * c + j];
        }
        Tape::accumulate(grads, ob.id, db);
      }
    };
  }
  return finish("add_bias", t, tracked_inputs({&ox, &ob}), std::move(out), std::move(fn));
}

Var mul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) {
    throw ShapeError("mul: shapes disagree: " + av.shape_str() + " vs " + bv.shape_str());
  }
  Tensor out(av.shape());
  for (int64_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];

  Tape* t = common_tape("mul", {&a, &b});
  Operand oa = make_operand(a), ob = make_operand(b);
  BackwardFn fn;
  if (t) {
    fn = [oa, ob](const Tensor& g, Tape& tape, std::vector<Tensor>& grads) {
      if (oa.tracked()) {
        const Tensor& bval = ob.get(tape);
        Tensor da(g.shape());
        for (int64_t i = 0; i < g.size(); ++i) da[i] = g[i] * bval[i];
        Tape::accumulate(grads, oa.id, da);
      }
      if (ob.tracked()) {
        const Tensor& aval = oa.get(tape);
        Tensor db(g.shape());
        for (int64_t i = 0; i < g.size(); ++i) db[i] = g[i] * aval[i];
        Tape::accumulate(grads, ob.id, db);
      }
    };
  }
  return finish("mul", t, tracked_inputs({&oa, &ob}), std::move(out), std::move(fn));
}

namespace {

// Shared scaffolding for unary elementwise ops whose derivative is a
// function of the op's own output (tanh, sigmoid).
Var unary_from_output(const char* op, const Var& x, double (*fwd)(double),
                      double (*dydout)(double)) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);

  Tape* t = common_tape(op, {&x});
  Operand ox = make_operand(x);
  if (t == nullptr) return Var::constant(std::move(out));

  const NodeId out_id = static_cast<NodeId>(t->size());  // id this node will get
  BackwardFn fn = [ox, out_id, dydout](const Tensor& g, Tape& tape,
                                       std::vector<Tensor>& grads) {
    if (!ox.tracked()) return;
    const Tensor& y = tape.node(out_id).value;
    Tensor dx(g.shape());
    for (int64_t i = 0; i < g.size(); ++i) dx[i] = g[i] * dydout(y[i]);
    Tape::accumulate(grads, ox.id, dx);
  };
  return finish(op, t, tracked_inputs({&ox}), std::move(out), std::move(fn));
}

double fwd_tanh(double v) { return std::tanh(v); }
double d_tanh(double y) { return 1.0 - y * y; }
double fwd_sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
double d_sigmoid(double y) { return y * (1.0 - y); }

}  // namespace

Var tanh_op(const Var& x) { return unary_from_output("tanh", x, fwd_tanh, d_tanh); }
Var sigmoid(const Var& x) { return unary_from_output("sigmoid", x, fwd_sigmoid, d_sigmoid); }

Var relu(const Var& x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;

  Tape* t = common_tape("relu", {&x});
  Operand ox = make_operand(x);
  BackwardFn fn;
  if (t) {
    fn = [ox](const Tensor& g, Tape& tape, std::vector<Tensor>& grads) {
      if (!ox.tracked()) return;
      const Tensor& xval = ox.get(tape);
      Tensor dx(g.shape());
      for (int64_t i = 0; i < g.size(); ++i) dx[i] = xval[i] > 0.0 ? g[i] : 0.0;
      Tape::accumulate(grads, ox.id, dx);
    };
  }
  return finish("relu", t, tracked_inputs({&ox}), std::move(out), std::move(fn));
}

Var reshape(const Var& x, std::vector<int64_t> shape) {
  const Tensor& xv = x.value();
  if (shape_product(shape) != xv.size()) {
    throw ShapeError("reshape: cannot view " + xv.shape_str() + " as " +
                     shape_to_string(shape));
  }
  Tensor out(shape, xv.raw());

  Tape* t = common_tape("reshape", {&x});
  Operand ox = make_operand(x);
  BackwardFn fn;
  if (t) {
    std::vector<int64_t> in_shape = xv.shape();
    fn = [ox, in_shape](const Tensor& g, Tape&, std::vector<Tensor>& grads) {
      if (!ox.tracked()) return;
      Tape::accumulate(grads, ox.id, Tensor(in_shape, g.raw()));
    };
  }
  return finish("reshape", t, tracked_inputs({&ox}), std::move(out), std::move(fn));
}

Var slice_cols(const Var& x, int64_t c0, int64_t c1) {
  const Tensor& xv = x.value();
  require_rank("slice_cols", xv, 2);
  const int64_t r = xv.dim(0), c = xv.dim(1);
  if (c0 < 0 || c1 > c || c0 >= c1) {
    throw ContractError("slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                        ") invalid for " + xv.shape_str());
  }
  const int64_t w = c1 - c0;
  Tensor out({r, w});
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < w; ++j) out[i * w + j] = xv[i * c + c0 + j];
  }

  Tape* t = common_tape("slice_cols", {&x});
  Operand ox = make_operand(x);
  BackwardFn fn;
  if (t) {
    fn = [ox, r, c, c0, w](const Tensor& g, Tape&, std::vector<Tensor>& grads) {
      if (!ox.tracked()) return;
      Tensor dx({r, c});
      for (int64_t i = 0; i < r; ++i) {
        for (int64_t j = 0; j < w; ++j) dx[i * c + c0 + j] = g[i * w + j];
      }
      Tape::accumulate(grads, ox.id, dx);
    };
  }
  return finish("slice_cols", t, tracked_inputs({&ox}), std::move(out), std::move(fn));
}

Var slice_time(const Var& x, int64_t t_idx) {
  const Tensor& xv = x.value();
  require_rank("slice_time", xv, 3);
  const int64_t B = xv.dim(0), T = xv.dim(1), D = xv.dim(2);
  if (t_idx < 0 || t_idx >= T) {
    throw ContractError("slice_time: index " + std::to_string(t_idx) + " outside " +
                        xv.shape_str());
  }
  Tensor out({B, D});
  for (int64_t b = 0; b < B; ++b) {
    const double* src = xv.data() + (b * T + t_idx) * D;
    std::copy(src, src + D, out.data() + b * D);
  }

  Tape* t = common_tape("slice_time", {&x});
  Operand ox = make_operand(x);
  BackwardFn fn;
  if (t) {
    fn = [ox, B, T, D, t_idx](const Tensor& g, Tape&, std::vector<Tensor>& grads) {
      if (!ox.tracked()) return;
      Tensor dx({B, T, D});
      for (int64_t b = 0; b < B; ++b) {
        std::copy(g.data() + b * D, g.data() + (b + 1) * D,
                  dx.data() + (b * T + t_idx) * D);
      }
      Tape::accumulate(grads, ox.id, dx);
    };
  }
  return finish("slice_time", t, tracked_inputs({&ox}), std::move(out), std::move(fn));
}

Var stack_time(std::span<const Var> steps) {
  if (steps.empty()) throw ContractError("stack_time: no steps given");
  const Tensor& first = steps[0].value();
  require_rank("stack_time", first, 2);
  const int64_t B = first.dim(0), D = first.dim(1);
  const int64_t T = static_cast<int64_t>(steps.size());

  Tape* t = nullptr;
  std::vector<Operand> ops;
  ops.reserve(steps.size());
  for (const Var& s : steps) {
    if (!s.value().same_shape(first)) {
      throw ShapeError("stack_time: step shapes disagree: " + first.shape_str() + " vs " +
                       s.value().shape_str());
    }
    Tape* st = common_tape("stack_time", {&s});
    if (st) {
      if (t && t != st) throw ContractError("stack_time: steps live on different tapes");
      t = st;
    }
    ops.push_back(make_operand(s));
  }

  Tensor out({B, T, D});
  for (int64_t ti = 0; ti < T; ++ti) {
    const Tensor& sv = steps[static_cast<size_t>(ti)].value();
    for (int64_t b = 0; b < B; ++b) {
      std::copy(sv.data() + b * D, sv.data() + (b + 1) * D,
                out.data() + (b * T + ti) * D);
    }
  }

  BackwardFn fn;
  std::vector<NodeId> inputs;
  for (const Operand& o : ops) {
    if (o.tracked()) inputs.push_back(o.id);
  }
  if (t) {
    fn = [ops, B, T, D](const Tensor& g, Tape&, std::vector<Tensor>& grads) {
      for (int64_t ti = 0; ti < T; ++ti) {
        const Operand& o = ops[static_cast<size_t>(ti)];
        if (!o.tracked()) continue;
        Tensor ds({B, D});
        for (int64_t b = 0; b < B; ++b) {
          std::copy(g.data() + (b * T + ti) * D, g.data() + (b * T + ti) * D + D,
                    ds.data() + b * D);
        }
        Tape::accumulate(grads, o.id, ds);
      }
    };
  }
  return finish("stack_time", t, std::move(inputs), std::move(out), std::move(fn));
}

Var embed(const Var& table, const std::vector<int>& ids, int64_t batch, int64_t time) {
  const Tensor& tv = table.value();
  require_rank("embed", tv, 2);
  const int64_t V = tv.dim(0), E = tv.dim(1);
  if (static_cast<int64_t>(ids.size()) != batch * time) {
    throw ShapeError("embed: " + std::to_string(ids.size()) + " ids do not fill [" +
                     std::to_string(batch) + "x" + std::to_string(time) + "]");
  }
  for (int id : ids) {
    if (id < 0 || id >= V) {
      throw IndexError("embed: token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(V));
    }
  }
  Tensor out({batch, time, E});
  for (int64_t i = 0; i < batch * time; ++i) {
    const double* row = tv.data() + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * E;
    std::copy(row, row + E, out.data() + i * E);
  }

  Tape* t = common_tape("embed", {&table});
  Operand ot = make_operand(table);
  BackwardFn fn;
  if (t) {
    auto ids_copy = std::make_shared<const std::vector<int>>(ids);
    fn = [ot, ids_copy, V, E, batch, time](const Tensor& g, Tape&, std::vector<Tensor>& grads) {
      if (!ot.tracked()) return;
      Tensor dt({V, E});
      for (int64_t i = 0; i < batch * time; ++i) {
        double* dst = dt.data() + static_cast<int64_t>((*ids_copy)[static_cast<size_t>(i)]) * E;
        const double* src = g.data() + i * E;
        for (int64_t e = 0; e < E; ++e) dst[e] += src[e];
      }
      Tape::accumulate(grads, ot.id, dt);
    };
  }
  return finish("embed", t, tracked_inputs({&ot}), std::move(out), std::move(fn));
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& targets) {
  const Tensor& lv = logits.value();
  require_rank("softmax_cross_entropy", lv, 2);
  const int64_t R = lv.dim(0), C = lv.dim(1);
  if (static_cast<int64_t>(targets.size()) != R) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(R) + " rows");
  }
  for (int tgt : targets) {
    if (tgt < 0 || tgt >= C) {
      throw IndexError("softmax_cross_entropy: target " + std::to_string(tgt) +
                       " outside [0, " + std::to_string(C) + ")");
    }
  }

  // Stable log-softmax; keep the probabilities for the backward pass.
  auto probs = std::make_shared<Tensor>(Tensor({R, C}));
  double loss = 0.0;
  for (int64_t r = 0; r < R; ++r) {
    const double* row = lv.data() + r * C;
    double m = row[0];
    for (int64_t j = 1; j < C; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < C; ++j) sum += std::exp(row[j] - m);
    const double lse = m + std::log(sum);
    loss += lse - row[targets[static_cast<size_t>(r)]];
    double* prow = probs->data() + r * C;
    for (int64_t j = 0; j < C; ++j) prow[j] = std::exp(row[j] - lse);
  }
  loss /= static_cast<double>(R);

  Tape* t = common_tape("softmax_cross_entropy", {&logits});
  Operand ol = make_operand(logits);
  BackwardFn fn;
  if (t) {
    auto tgt_copy = std::make_shared<const std::vector<int>>(targets);
    fn = [ol, probs, tgt_copy, R, C](const Tensor& g, Tape&, std::vector<Tensor>& grads) {
      if (!ol.tracked()) return;
      const double scale = g[0] / static_cast<double>(R);
      Tensor dl({R, C});
      for (int64_t r = 0; r < R; ++r) {
        const double* prow = probs->data() + r * C;
        double* drow = dl.data() + r * C;
        for (int64_t j = 0; j < C; ++j) drow[j] = scale * prow[j];
        drow[(*tgt_copy)[static_cast<size_t>(r)]] -= scale;
      }
      Tape::accumulate(grads, ol.id, dl);
    };
  }
  return finish("softmax_cross_entropy", t, tracked_inputs({&ol}), Tensor::scalar(loss),
                std::move(fn));
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax_rows: expected rank-2 tensor, got " + logits.shape_str());
  }
  const int64_t R = logits.dim(0), C = logits.dim(1);
  Tensor out({R, C});
  for (int64_t r = 0; r < R; ++r) {
    const double* row = logits.data() + r * C;
    double m = row[0];
    for (int64_t j = 1; j < C; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < C; ++j) sum += std::exp(row[j] - m);
    double* orow = out.data() + r * C;
    for (int64_t j = 0; j < C; ++j) orow[j] = std::exp(row[j] - m) / sum;
  }
  return out;
}

double grad_check(const std::function<double(std::vector<Tensor>*)>& f,
                  const std::vector<Tensor*>& params, double epsilon) {
  if (epsilon <= 0.0) throw ContractError("grad_check: epsilon must be positive");

  std::vector<Tensor> analytic;
  f(&analytic);
  if (analytic.size() != params.size()) {
    throw ContractError("grad_check: function filled " + std::to_string(analytic.size()) +
                        " gradients for " + std::to_string(params.size()) + " parameters");
  }

  double worst = 0.0;
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p];
    if (!analytic[p].same_shape(theta)) {
      throw ShapeError("grad_check: gradient shape " + analytic[p].shape_str() +
                       " does not match parameter " + theta.shape_str());
    }
    for (int64_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + epsilon;
      const double up = f(nullptr);
      theta[i] = saved - epsilon;
      const double down = f(nullptr);
      theta[i] = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double tape_grad = analytic[p][i];
      const double denom = std::max({std::fabs(numeric), std::fabs(tape_grad), 1e-8});
      worst = std::max(worst, std::fabs(numeric - tape_grad) / denom);
    }
  }
  return worst;
}

}  // namespace tdt
