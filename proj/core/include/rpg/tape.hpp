#pragma once
// Reverse-mode automatic differentiation on a scalar tape.
//
// The tape supports nested gradients: backward() with create_graph=true emits
// the adjoint computation as ordinary tape nodes, so the returned gradients
// can themselves be differentiated. This is what lets a manipulator take
// gradients through its base agent's optimizer update. A tape lives for one
// outer update step and is freed afterwards; it is single-threaded.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rpg {

class Tape;

// Handle to one scalar node. Cheap to copy, invalid when tape == nullptr.
struct Value {
  Tape* tape = nullptr;
  int32_t id = -1;

  double val() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Op : uint8_t {
  leaf,      // differentiation target, no parents
  constant,  // data, no parents
  add,
  sub,
  mul,
  div,
  neg,
  exp_op,
  log_op,
  sqrt_op,
  stopgrad,  // value pass-through, zero partials to all ancestors
};

struct Node {
  double value;
  Op op;
  int32_t a;  // first parent or -1
  int32_t b;  // second parent or -1
};

// Result of backward(): one gradient per requested node. A node with no path
// to the root gets an explicit zero gradient and connected=false rather than
// being silently dropped.
struct Gradients {
  std::vector<Value> grads;
  std::vector<bool> connected;

  std::vector<double> values() const;
};

class Tape {
 public:
  Value leaf(double v);
  Value constant(double v);

  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value div(Value a, Value b);
  Value neg(Value a);
  Value exp(Value a);
  Value log(Value a);
  Value sqrt(Value a);
  Value stop_gradient(Value a);

  // dRoot/dNode for each node in wrt. With create_graph the gradients are
  // differentiable tape nodes; without it they are constants (cheaper, used
  // for the outermost gradient of a step). Throws std::invalid_argument when
  // root or any wrt node is not on this tape.
  Gradients backward(Value root, std::span<const Value> wrt, bool create_graph);

  size_t size() const { return nodes_.size(); }
  double value_of(int32_t id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Node& node(int32_t id) const { return nodes_[static_cast<size_t>(id)]; }
  void reserve(size_t n) { nodes_.reserve(n); }

 private:
  Value push(double v, Op op, int32_t a = -1, int32_t b = -1);
  void check_mine(Value v, const char* what) const;

  std::vector<Node> nodes_;
};

// Arithmetic sugar so numeric code reads the same for double and Value.
Value operator+(Value a, Value b);
Value operator-(Value a, Value b);
Value operator*(Value a, Value b);
Value operator/(Value a, Value b);
Value operator-(Value a);
Value operator+(Value a, double b);
Value operator+(double a, Value b);
Value operator-(Value a, double b);
Value operator-(double a, Value b);
Value operator*(Value a, double b);
Value operator*(double a, Value b);
Value operator/(Value a, double b);
Value operator/(double a, Value b);
Value& operator+=(Value& a, Value b);

Value exp(Value a);
Value log(Value a);
Value sqrt(Value a);

// Value equals x; every gradient through the result is zero.
Value stop_gradient(Value x);

// DiCE magic box: exp(tau - stop_gradient(tau)). Forward value is exactly
// 1.0; the first gradient w.r.t. any parameter equals d(tau)/d(parameter).
Value magic_box(Value log_prob_sum);

// Central-difference oracle for any scalar tape function. `build` is called
// on fresh tapes with one leaf per parameter. The stop-gradient case is
// reported, not asserted: a deliberate analytic/numeric gap shows up as a
// large max_rel_err. Throws std::runtime_error if f evaluates non-finite.
struct FiniteDiffReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_rel_err = 0.0;
};

FiniteDiffReport finite_diff_check(
    const std::function<Value(Tape&, std::span<const Value>)>& build,
    std::span<const double> params, double h = 1e-5);

}  // namespace rpg
