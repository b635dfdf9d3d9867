#include "rpg/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rpg {

double Value::val() const {
  if (!valid()) throw std::invalid_argument("Value::val on invalid handle");
  return tape->value_of(id);
}

std::vector<double> Gradients::values() const {
  std::vector<double> out;
  out.reserve(grads.size());
  for (const Value& g : grads) out.push_back(g.val());
  return out;
}

Value Tape::push(double v, Op op, int32_t a, int32_t b) {
  nodes_.push_back(Node{v, op, a, b});
  return Value{this, static_cast<int32_t>(nodes_.size() - 1)};
}

void Tape::check_mine(Value v, const char* what) const {
  if (v.tape != this || v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size())
    throw std::invalid_argument(std::string("tape: ") + what + " is not a node on this tape");
}

Value Tape::leaf(double v) { return push(v, Op::leaf); }
Value Tape::constant(double v) { return push(v, Op::constant); }

Value Tape::add(Value a, Value b) {
  check_mine(a, "add lhs");
  check_mine(b, "add rhs");
  return push(value_of(a.id) + value_of(b.id), Op::add, a.id, b.id);
}

Value Tape::sub(Value a, Value b) {
  check_mine(a, "sub lhs");
  check_mine(b, "sub rhs");
  return push(value_of(a.id) - value_of(b.id), Op::sub, a.id, b.id);
}

Value Tape::mul(Value a, Value b) {
  check_mine(a, "mul lhs");
  check_mine(b, "mul rhs");
  return push(value_of(a.id) * value_of(b.id), Op::mul, a.id, b.id);
}

Value Tape::div(Value a, Value b) {
  check_mine(a, "div lhs");
  check_mine(b, "div rhs");
  return push(value_of(a.id) / value_of(b.id), Op::div, a.id, b.id);
}

Value Tape::neg(Value a) {
  check_mine(a, "neg arg");
  return push(-value_of(a.id), Op::neg, a.id);
}

Value Tape::exp(Value a) {
  check_mine(a, "exp arg");
  return push(std::exp(value_of(a.id)), Op::exp_op, a.id);
}

Value Tape::log(Value a) {
  check_mine(a, "log arg");
  return push(std::log(value_of(a.id)), Op::log_op, a.id);
}

Value Tape::sqrt(Value a) {
  check_mine(a, "sqrt arg");
  return push(std::sqrt(value_of(a.id)), Op::sqrt_op, a.id);
}

Value Tape::stop_gradient(Value a) {
  check_mine(a, "stop_gradient arg");
  return push(value_of(a.id), Op::stopgrad, a.id);
}

namespace {

// Adjoint accumulation with plain doubles. Zero adjoints still propagate so
// the connected flags do not depend on numeric cancellation. Contributions
// only flow from later nodes to earlier ones, so the sweep can stop at the
// earliest node whose gradient is requested.
void backward_values(const Tape& tape, int32_t root, int32_t lo, std::vector<double>& adj,
                     std::vector<uint8_t>& touched) {
  // buffers are windowed to [lo, root]
  const size_t span = static_cast<size_t>(root - lo) + 1;
  adj.assign(span, 0.0);
  touched.assign(span, 0);
  adj[static_cast<size_t>(root - lo)] = 1.0;
  touched[static_cast<size_t>(root - lo)] = 1;
  for (int32_t k = root; k >= lo; --k) {
    if (!touched[static_cast<size_t>(k - lo)]) continue;
    const Node& n = tape.node(k);
    const double g = adj[static_cast<size_t>(k - lo)];
    auto bump = [&](int32_t parent, double partial) {
      if (parent < lo) return;
      adj[static_cast<size_t>(parent - lo)] += g * partial;
      touched[static_cast<size_t>(parent - lo)] = 1;
    };
    switch (n.op) {
      case Op::leaf:
      case Op::constant:
      case Op::stopgrad:
        break;
      case Op::add:
        bump(n.a, 1.0);
        bump(n.b, 1.0);
        break;
      case Op::sub:
        bump(n.a, 1.0);
        bump(n.b, -1.0);
        break;
      case Op::mul:
        bump(n.a, tape.value_of(n.b));
        bump(n.b, tape.value_of(n.a));
        break;
      case Op::div:
        bump(n.a, 1.0 / tape.value_of(n.b));
        bump(n.b, -n.value / tape.value_of(n.b));
        break;
      case Op::neg:
        bump(n.a, -1.0);
        break;
      case Op::exp_op:
        bump(n.a, n.value);
        break;
      case Op::log_op:
        bump(n.a, 1.0 / tape.value_of(n.a));
        break;
      case Op::sqrt_op:
        bump(n.a, 0.5 / n.value);
        break;
    }
  }
}

// Same sweep, but adjoints are built as tape nodes so the gradients stay
// differentiable. Partials reuse existing nodes where possible (mul, exp)
// and are created lazily otherwise (div, log, sqrt).
void backward_graph(Tape& tape, int32_t root, int32_t lo, std::vector<int32_t>& adj) {
  const size_t span = static_cast<size_t>(root - lo) + 1;
  adj.assign(span, -1);
  adj[static_cast<size_t>(root - lo)] = tape.constant(1.0).id;
  for (int32_t k = root; k >= lo; --k) {
    if (adj[static_cast<size_t>(k - lo)] < 0) continue;
    const Node n = tape.node(k);  // copy: pushes below may reallocate
    Value gk{&tape, adj[static_cast<size_t>(k - lo)]};
    auto accum = [&](int32_t parent, Value contribution) {
      if (parent < lo) return;
      int32_t& slot = adj[static_cast<size_t>(parent - lo)];
      slot = slot < 0 ? contribution.id : tape.add(Value{&tape, slot}, contribution).id;
    };
    switch (n.op) {
      case Op::leaf:
      case Op::constant:
      case Op::stopgrad:
        break;
      case Op::add:
        accum(n.a, gk);
        accum(n.b, gk);
        break;
      case Op::sub:
        accum(n.a, gk);
        accum(n.b, tape.neg(gk));
        break;
      case Op::mul:
        accum(n.a, tape.mul(gk, Value{&tape, n.b}));
        accum(n.b, tape.mul(gk, Value{&tape, n.a}));
        break;
      case Op::div: {
        Value b{&tape, n.b};
        accum(n.a, tape.div(gk, b));
        accum(n.b, tape.neg(tape.div(tape.mul(gk, Value{&tape, k}), b)));
        break;
      }
      case Op::neg:
        accum(n.a, tape.neg(gk));
        break;
      case Op::exp_op:
        accum(n.a, tape.mul(gk, Value{&tape, k}));
        break;
      case Op::log_op:
        accum(n.a, tape.div(gk, Value{&tape, n.a}));
        break;
      case Op::sqrt_op:
        accum(n.a, tape.div(tape.mul(gk, tape.constant(0.5)), Value{&tape, k}));
        break;
    }
  }
}

}  // namespace

Gradients Tape::backward(Value root, std::span<const Value> wrt, bool create_graph) {
  check_mine(root, "backward root");
  for (const Value& w : wrt) check_mine(w, "backward wrt");

  int32_t lo = root.id;
  for (const Value& w : wrt) lo = std::min(lo, w.id);

  Gradients out;
  out.grads.reserve(wrt.size());
  out.connected.reserve(wrt.size());
  if (create_graph) {
    std::vector<int32_t> adj;
    backward_graph(*this, root.id, lo, adj);
    for (const Value& w : wrt) {
      const int32_t slot = w.id <= root.id ? adj[static_cast<size_t>(w.id - lo)] : -1;
      out.connected.push_back(slot >= 0);
      out.grads.push_back(slot >= 0 ? Value{this, slot} : constant(0.0));
    }
  } else {
    std::vector<double> adj;
    std::vector<uint8_t> touched;
    backward_values(*this, root.id, lo, adj, touched);
    for (const Value& w : wrt) {
      const bool hit = w.id <= root.id && touched[static_cast<size_t>(w.id - lo)];
      out.connected.push_back(hit);
      out.grads.push_back(constant(hit ? adj[static_cast<size_t>(w.id - lo)] : 0.0));
    }
  }
  return out;
}

namespace {
Tape& same_tape(Value a, Value b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw std::invalid_argument("tape: operands come from different tapes");
  return *a.tape;
}
Tape& tape_of(Value a) {
  if (a.tape == nullptr) throw std::invalid_argument("tape: invalid value handle");
  return *a.tape;
}
}  // namespace

Value operator+(Value a, Value b) { return same_tape(a, b).add(a, b); }
Value operator-(Value a, Value b) { return same_tape(a, b).sub(a, b); }
Value operator*(Value a, Value b) { return same_tape(a, b).mul(a, b); }
Value operator/(Value a, Value b) { return same_tape(a, b).div(a, b); }
Value operator-(Value a) { return tape_of(a).neg(a); }
Value operator+(Value a, double b) { return tape_of(a).add(a, tape_of(a).constant(b)); }
Value operator+(double a, Value b) { return b + a; }
Value operator-(Value a, double b) { return tape_of(a).sub(a, tape_of(a).constant(b)); }
Value operator-(double a, Value b) { return tape_of(b).sub(tape_of(b).constant(a), b); }
Value operator*(Value a, double b) { return tape_of(a).mul(a, tape_of(a).constant(b)); }
Value operator*(double a, Value b) { return b * a; }
Value operator/(Value a, double b) { return tape_of(a).div(a, tape_of(a).constant(b)); }
Value operator/(double a, Value b) { return tape_of(b).div(tape_of(b).constant(a), b); }
Value& operator+=(Value& a, Value b) {
  a = a + b;
  return a;
}

Value exp(Value a) { return tape_of(a).exp(a); }
Value log(Value a) { return tape_of(a).log(a); }
Value sqrt(Value a) { return tape_of(a).sqrt(a); }
Value stop_gradient(Value x) { return tape_of(x).stop_gradient(x); }

Value magic_box(Value log_prob_sum) {
  Tape& t = tape_of(log_prob_sum);
  return t.exp(t.sub(log_prob_sum, t.stop_gradient(log_prob_sum)));
}

FiniteDiffReport finite_diff_check(
    const std::function<Value(Tape&, std::span<const Value>)>& build,
    std::span<const double> params, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be positive");

  auto eval = [&](std::span<const double> p, std::vector<double>* grads_out) {
    Tape tape;
    std::vector<Value> leaves;
    leaves.reserve(p.size());
    for (double v : p) leaves.push_back(tape.leaf(v));
    Value y = build(tape, leaves);
    if (!std::isfinite(y.val()))
      throw std::runtime_error("finite_diff_check: function value is not finite");
    if (grads_out) {
      *grads_out = tape.backward(y, leaves, false).values();
      for (double g : *grads_out)
        if (!std::isfinite(g))
          throw std::runtime_error("finite_diff_check: analytic gradient is not finite");
    }
    return y.val();
  };

  FiniteDiffReport report;
  eval(params, &report.analytic);

  std::vector<double> p(params.begin(), params.end());
  report.numeric.resize(p.size());
  for (size_t k = 0; k < p.size(); ++k) {
    const double saved = p[k];
    p[k] = saved + h;
    const double up = eval(p, nullptr);
    p[k] = saved - h;
    const double down = eval(p, nullptr);
    p[k] = saved;
    report.numeric[k] = (up - down) / (2.0 * h);
    const double denom = std::abs(report.analytic[k]) + std::abs(report.numeric[k]) + 1e-12;
    const double rel = std::abs(report.analytic[k] - report.numeric[k]) / denom;
    if (rel > report.max_rel_err) report.max_rel_err = rel;
  }
  return report;
}

}  // namespace rpg
