#include "ovit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "ovit/errors.hpp"

namespace ovit::ad {

namespace {

Tape& tape_of(Var a) {
    if (a.tape == nullptr) throw ArgumentError("Var is not attached to a tape");
    return *a.tape;
}

Tape& common_tape(Var a, Var b) {
    if (a.tape != b.tape) throw ArgumentError("Vars belong to different tapes");
    return tape_of(a);
}

Matrix column_sums(const Matrix& g) {
    Matrix out(1, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) out(0, j) += g(i, j);
    return out;
}

} // namespace

const char* op_name(OpKind kind) {
    switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::constant: return "constant";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::subtract: return "subtract";
    case OpKind::scale: return "scale";
    case OpKind::transpose: return "transpose";
    case OpKind::inverse: return "inverse";
    case OpKind::row_softmax: return "row_softmax";
    case OpKind::tanh: return "tanh";
    case OpKind::sum: return "sum";
    case OpKind::mean_rows: return "mean_rows";
    case OpKind::concat_cols: return "concat_cols";
    case OpKind::concat_rows: return "concat_rows";
    case OpKind::slice_cols: return "slice_cols";
    case OpKind::add_row: return "add_row";
    case OpKind::hadamard: return "hadamard";
    case OpKind::cross_entropy: return "cross_entropy";
    }
    return "unknown";
}

const Matrix& Var::value() const { return tape_of(*this).value(id); }

const Matrix& Gradients::operator[](Var leaf) const { return at(leaf.id); }

const Matrix& Gradients::at(std::size_t leaf_id) const {
    auto it = grads_.find(leaf_id);
    if (it == grads_.end())
        throw ArgumentError(fmt::format("node {} is not a trainable leaf", leaf_id));
    return it->second;
}

Var Tape::leaf(Matrix value) {
    nodes_.push_back({OpKind::leaf, {}, std::move(value), {}, true});
    return {this, nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
    nodes_.push_back({OpKind::constant, {}, std::move(value), {}, false});
    return {this, nodes_.size() - 1};
}

Var Tape::record(OpKind kind, std::vector<std::size_t> inputs, Matrix value, VjpRule vjp) {
    bool needs_grad = false;
    for (std::size_t in : inputs) {
        if (in >= nodes_.size())
            throw ArgumentError(fmt::format("{}: input {} does not precede node {}", op_name(kind),
                                            in, nodes_.size()));
        needs_grad = needs_grad || nodes_[in].needs_grad;
    }
    nodes_.push_back({kind, std::move(inputs), std::move(value), std::move(vjp), needs_grad});
    return {this, nodes_.size() - 1};
}

Gradients Tape::backward(Var loss) const {
    if (loss.tape != this) throw ArgumentError("backward: loss belongs to another tape");
    const Matrix& lv = value(loss.id);
    if (lv.rows() != 1 || lv.cols() != 1)
        throw ShapeError(fmt::format("backward: loss must be 1x1, got {}", lv.shape_string()));

    std::vector<Matrix> grads(loss.id + 1);
    grads[loss.id] = Matrix::scalar(1.0);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        if (grads[id].empty() || !node.needs_grad || node.inputs.empty()) continue;
        std::vector<Matrix> parts = node.vjp(grads[id]);
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
            const std::size_t in = node.inputs[k];
            if (!nodes_[in].needs_grad) continue;
            if (grads[in].empty())
                grads[in] = std::move(parts[k]);
            else
                grads[in] = ovit::add(grads[in], parts[k]);
        }
    }

    Gradients out;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (nodes_[id].kind != OpKind::leaf) continue;
        const Matrix& v = nodes_[id].value;
        if (id < grads.size() && !grads[id].empty())
            out.grads_.emplace(id, std::move(grads[id]));
        else
            out.grads_.emplace(id, Matrix::zeros(v.rows(), v.cols()));
    }
    return out;
}

Var matmul(Var a, Var b) {
    Tape& t = common_tape(a, b);
    Matrix v = ovit::matmul(a.value(), b.value());
    return t.record(OpKind::matmul, {a.id, b.id}, std::move(v),
                    [&t, ia = a.id, ib = b.id](const Matrix& g) {
                        return std::vector<Matrix>{ovit::matmul(g, ovit::transpose(t.value(ib))),
                                                   ovit::matmul(ovit::transpose(t.value(ia)), g)};
                    });
}

Var add(Var a, Var b) {
    Tape& t = common_tape(a, b);
    return t.record(OpKind::add, {a.id, b.id}, ovit::add(a.value(), b.value()),
                    [](const Matrix& g) { return std::vector<Matrix>{g, g}; });
}

Var subtract(Var a, Var b) {
    Tape& t = common_tape(a, b);
    return t.record(OpKind::subtract, {a.id, b.id}, ovit::subtract(a.value(), b.value()),
                    [](const Matrix& g) { return std::vector<Matrix>{g, ovit::scale(g, -1.0)}; });
}

Var scale(Var a, double factor) {
    Tape& t = tape_of(a);
    return t.record(OpKind::scale, {a.id}, ovit::scale(a.value(), factor),
                    [factor](const Matrix& g) { return std::vector<Matrix>{ovit::scale(g, factor)}; });
}

Var transpose(Var a) {
    Tape& t = tape_of(a);
    return t.record(OpKind::transpose, {a.id}, ovit::transpose(a.value()),
                    [](const Matrix& g) { return std::vector<Matrix>{ovit::transpose(g)}; });
}

Var inverse(Var a) {
    Tape& t = tape_of(a);
    Matrix v = ovit::inverse(a.value());
    const std::size_t self = t.size();
    return t.record(OpKind::inverse, {a.id}, std::move(v), [&t, self](const Matrix& g) {
        return std::vector<Matrix>{vjp_inverse(t.value(self), g)};
    });
}

Matrix vjp_inverse(const Matrix& b, const Matrix& upstream) {
    require_square(b, "vjp_inverse");
    require_same_shape(b, upstream, "vjp_inverse");
    const Matrix bt = ovit::transpose(b);
    return ovit::scale(ovit::matmul(ovit::matmul(bt, upstream), bt), -1.0);
}

Matrix softmax_rows(const Matrix& a) {
    Matrix y(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto in = a.row(i);
        auto out = y.row(i);
        const double m = *std::max_element(in.begin(), in.end());
        double z = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            out[j] = std::exp(in[j] - m);
            z += out[j];
        }
        for (double& v : out) v /= z;
    }
    return y;
}

Var row_softmax(Var a) {
    Tape& t = tape_of(a);
    const std::size_t self = t.size();
    return t.record(OpKind::row_softmax, {a.id}, softmax_rows(a.value()),
                    [&t, self](const Matrix& g) {
                        const Matrix& y = t.value(self);
                        Matrix dx(y.rows(), y.cols());
                        for (std::size_t i = 0; i < y.rows(); ++i) {
                            double dot = 0.0;
                            for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
                            for (std::size_t j = 0; j < y.cols(); ++j)
                                dx(i, j) = y(i, j) * (g(i, j) - dot);
                        }
                        return std::vector<Matrix>{std::move(dx)};
                    });
}

Var tanh(Var a) {
    Tape& t = tape_of(a);
    Matrix v = a.value();
    for (double& x : v.data()) x = std::tanh(x);
    const std::size_t self = t.size();
    return t.record(OpKind::tanh, {a.id}, std::move(v), [&t, self](const Matrix& g) {
        const Matrix& y = t.value(self);
        Matrix dx = g;
        auto d = dx.data();
        auto yv = y.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - yv[i] * yv[i];
        return std::vector<Matrix>{std::move(dx)};
    });
}

Var sum(Var a) {
    Tape& t = tape_of(a);
    const std::size_t rows = a.value().rows(), cols = a.value().cols();
    return t.record(OpKind::sum, {a.id}, Matrix::scalar(ovit::sum(a.value())),
                    [rows, cols](const Matrix& g) {
                        return std::vector<Matrix>{Matrix::filled(rows, cols, g.item())};
                    });
}

Var mean_rows(Var a) {
    Tape& t = tape_of(a);
    const Matrix& x = a.value();
    const std::size_t rows = x.rows();
    Matrix v = ovit::scale(column_sums(x), 1.0 / static_cast<double>(rows));
    return t.record(OpKind::mean_rows, {a.id}, std::move(v), [rows](const Matrix& g) {
        Matrix dx(rows, g.cols());
        const double inv = 1.0 / static_cast<double>(rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) dx(i, j) = g(0, j) * inv;
        return std::vector<Matrix>{std::move(dx)};
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
    Tape& t = tape_of(parts[0]);
    const std::size_t rows = parts[0].value().rows();
    std::vector<std::size_t> ids, widths;
    std::size_t total = 0;
    for (Var p : parts) {
        common_tape(parts[0], p);
        if (p.value().rows() != rows)
            throw ShapeError(fmt::format("concat_cols: row count {} vs {}", p.value().rows(), rows));
        ids.push_back(p.id);
        widths.push_back(p.value().cols());
        total += p.value().cols();
    }
    Matrix v(rows, total);
    std::size_t offset = 0;
    for (Var p : parts) {
        const Matrix& x = p.value();
        for (std::size_t i = 0; i < rows; ++i)
            std::copy(x.row(i).begin(), x.row(i).end(), v.row(i).begin() + offset);
        offset += x.cols();
    }
    return t.record(OpKind::concat_cols, std::move(ids), std::move(v), [widths](const Matrix& g) {
        std::vector<Matrix> out;
        std::size_t off = 0;
        for (std::size_t w : widths) {
            Matrix part(g.rows(), w);
            for (std::size_t i = 0; i < g.rows(); ++i)
                std::copy_n(g.row(i).begin() + off, w, part.row(i).begin());
            out.push_back(std::move(part));
            off += w;
        }
        return out;
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
    Tape& t = tape_of(parts[0]);
    const std::size_t cols = parts[0].value().cols();
    std::vector<std::size_t> ids, heights;
    std::vector<double> data;
    for (Var p : parts) {
        common_tape(parts[0], p);
        const Matrix& x = p.value();
        if (x.cols() != cols)
            throw ShapeError(fmt::format("concat_rows: column count {} vs {}", x.cols(), cols));
        ids.push_back(p.id);
        heights.push_back(x.rows());
        data.insert(data.end(), x.data().begin(), x.data().end());
    }
    const std::size_t rows = data.size() / cols;
    return t.record(OpKind::concat_rows, std::move(ids), Matrix(rows, cols, std::move(data)),
                    [heights, cols](const Matrix& g) {
                        std::vector<Matrix> out;
                        std::size_t off = 0;
                        for (std::size_t h : heights) {
                            auto first = g.data().begin() + static_cast<std::ptrdiff_t>(off * cols);
                            out.emplace_back(h, cols, std::vector<double>(first, first + h * cols));
                            off += h;
                        }
                        return out;
                    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    Tape& t = tape_of(a);
    const Matrix& x = a.value();
    if (count == 0 || begin + count > x.cols())
        throw ShapeError(fmt::format("slice_cols: [{}, {}) out of range for {}", begin,
                                     begin + count, x.shape_string()));
    Matrix v(x.rows(), count);
    for (std::size_t i = 0; i < x.rows(); ++i)
        std::copy_n(x.row(i).begin() + begin, count, v.row(i).begin());
    const std::size_t cols = x.cols();
    return t.record(OpKind::slice_cols, {a.id}, std::move(v), [begin, count, cols](const Matrix& g) {
        Matrix dx(g.rows(), cols);
        for (std::size_t i = 0; i < g.rows(); ++i)
            std::copy_n(g.row(i).begin(), count, dx.row(i).begin() + begin);
        return std::vector<Matrix>{std::move(dx)};
    });
}

Var add_row(Var a, Var row) {
    Tape& t = common_tape(a, row);
    const Matrix& x = a.value();
    const Matrix& r = row.value();
    if (r.rows() != 1 || r.cols() != x.cols())
        throw ShapeError(fmt::format("add_row: cannot broadcast {} over {}", r.shape_string(),
                                     x.shape_string()));
    Matrix v = x;
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t j = 0; j < v.cols(); ++j) v(i, j) += r(0, j);
    return t.record(OpKind::add_row, {a.id, row.id}, std::move(v), [](const Matrix& g) {
        return std::vector<Matrix>{g, column_sums(g)};
    });
}

Var hadamard(Var a, Var b) {
    Tape& t = common_tape(a, b);
    return t.record(OpKind::hadamard, {a.id, b.id}, ovit::hadamard(a.value(), b.value()),
                    [&t, ia = a.id, ib = b.id](const Matrix& g) {
                        return std::vector<Matrix>{ovit::hadamard(g, t.value(ib)),
                                                   ovit::hadamard(g, t.value(ia))};
                    });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
    Tape& t = tape_of(logits);
    const Matrix& z = logits.value();
    if (labels.size() != z.rows())
        throw ShapeError(fmt::format("cross_entropy: {} labels for {} logit rows", labels.size(),
                                     z.rows()));
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= z.cols())
            throw LabelError(fmt::format("cross_entropy: label {} at row {} outside [0, {})",
                                         labels[i], i, z.cols()));

    double loss = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto r = z.row(i);
        const double m = *std::max_element(r.begin(), r.end());
        double s = 0.0;
        for (double v : r) s += std::exp(v - m);
        loss += (m + std::log(s)) - r[static_cast<std::size_t>(labels[i])];
    }
    const double batch = static_cast<double>(z.rows());
    std::vector<int> owned(labels.begin(), labels.end());
    return t.record(OpKind::cross_entropy, {logits.id}, Matrix::scalar(loss / batch),
                    [&t, id = logits.id, owned = std::move(owned), batch](const Matrix& g) {
                        Matrix p = softmax_rows(t.value(id));
                        const double factor = g.item() / batch;
                        for (std::size_t i = 0; i < p.rows(); ++i) {
                            p(i, static_cast<std::size_t>(owned[i])) -= 1.0;
                            for (double& v : p.row(i)) v *= factor;
                        }
                        return std::vector<Matrix>{std::move(p)};
                    });
}

GradCheckReport finite_difference_check(const ScalarFunction& f, std::span<const Matrix> leaves,
                                        double eps) {
    if (!(eps > 0.0)) throw ArgumentError("finite_difference_check: eps must be positive");

    std::vector<Matrix> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const Matrix& m : leaves) vars.push_back(tape.leaf(m));
        Var loss = f(tape, vars);
        Gradients grads = tape.backward(loss);
        for (Var v : vars) analytic.push_back(grads[v]);
    }

    auto evaluate = [&](std::span<const Matrix> point) {
        Tape tape;
        std::vector<Var> vars;
        for (const Matrix& m : point) vars.push_back(tape.leaf(m));
        return f(tape, vars).value().item();
    };

    GradCheckReport report;
    std::vector<Matrix> point(leaves.begin(), leaves.end());
    for (std::size_t l = 0; l < point.size(); ++l) {
        for (std::size_t k = 0; k < point[l].size(); ++k) {
            double& x = point[l].data()[k];
            const double saved = x;
            x = saved + eps;
            const double up = evaluate(point);
            x = saved - eps;
            const double down = evaluate(point);
            x = saved;

            const double numeric = (up - down) / (2.0 * eps);
            const double exact = analytic[l].data()[k];
            const double abs_err = std::abs(numeric - exact);
            const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-12});
            const double rel_err = abs_err / denom;
            ++report.coordinates;
            report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
            if (rel_err > report.max_relative_error) {
                report.max_relative_error = rel_err;
                report.worst_leaf = l;
                report.worst_entry = k;
                report.analytic = exact;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

} // namespace ovit::ad
