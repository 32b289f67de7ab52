#pragma once

// Define-by-run reverse-mode differentiation over Matrix values.
//
// A Tape records every operation applied to Vars created from it. Nodes are
// appended in evaluation order, so node ids are a topological order and
// backward() is a single reverse sweep accumulating vector-Jacobian
// products. One tape per training step; tapes are not shared across threads.

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "ovit/matrix.hpp"

namespace ovit::ad {

enum class OpKind {
    leaf,
    constant,
    matmul,
    add,
    subtract,
    scale,
    transpose,
    inverse,
    row_softmax,
    tanh,
    sum,
    mean_rows,
    concat_cols,
    concat_rows,
    slice_cols,
    add_row,
    hadamard,
    cross_entropy,
};

const char* op_name(OpKind kind);

class Tape;

// Handle to a node on a tape. Cheap to copy; it and the reference value()
// returns stay valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
};

// Maps the upstream gradient of a node to one gradient per input, in input order.
using VjpRule = std::function<std::vector<Matrix>(const Matrix& upstream)>;

// d(loss)/d(leaf) for every trainable leaf on the tape. Leaves the loss does
// not depend on hold zero matrices.
class Gradients {
public:
    const Matrix& operator[](Var leaf) const;
    const Matrix& at(std::size_t leaf_id) const;
    const std::map<std::size_t, Matrix>& all() const noexcept { return grads_; }

private:
    friend class Tape;
    std::map<std::size_t, Matrix> grads_;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Trainable input; receives a gradient from backward().
    Var leaf(Matrix value);
    // Non-trainable input; never receives a gradient.
    Var constant(Matrix value);

    Var record(OpKind kind, std::vector<std::size_t> inputs, Matrix value, VjpRule vjp);

    const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
    OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
    std::span<const std::size_t> inputs(std::size_t id) const { return nodes_.at(id).inputs; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Throws ShapeError unless loss holds a 1x1 value.
    Gradients backward(Var loss) const;

private:
    struct Node {
        OpKind kind;
        std::vector<std::size_t> inputs;
        Matrix value;
        VjpRule vjp;
        bool needs_grad;
    };

    // deque: references returned by value() survive later appends.
    std::deque<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var scale(Var a, double factor);
Var transpose(Var a);
Var inverse(Var a);
// Max-subtracted softmax along each row.
Var row_softmax(Var a);
Var tanh(Var a);
// Sum of all entries, 1x1.
Var sum(Var a);
// Column means, 1 x cols.
Var mean_rows(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
// Adds a 1 x cols row vector to every row of a.
Var add_row(Var a, Var row);
Var hadamard(Var a, Var b);
// Mean over rows of -log softmax(logits)[label]. Throws LabelError when a
// label is outside [0, classes).
Var cross_entropy(Var logits, std::span<const int> labels);

// Given B = A^-1 and dL/dB, returns dL/dA = -B^T (dL/dB) B^T.
Matrix vjp_inverse(const Matrix& b, const Matrix& upstream);

// Row-wise max-subtracted softmax on plain values.
Matrix softmax_rows(const Matrix& a);

struct GradCheckReport {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t worst_leaf = 0;
    std::size_t worst_entry = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coordinates = 0;
};

// Builds the scalar loss on a fresh tape from the given leaves.
using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

// Compares backward() against central differences
// (f(x + eps e) - f(x - eps e)) / (2 eps) on every coordinate of every leaf.
// Relative error uses the denominator max(|analytic|, |numeric|, 1e-12).
GradCheckReport finite_difference_check(const ScalarFunction& f, std::span<const Matrix> leaves,
                                        double eps = 1e-5);

} // namespace ovit::ad
