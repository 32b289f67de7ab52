#include "ovit/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ovit/errors.hpp"
#include "ovit/orthogonal.hpp"
#include "ovit/random.hpp"
#include "ovit/training.hpp"

namespace ovit {

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double amplitude = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-amplitude, amplitude);
    return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

class Tracker {
public:
    Tracker(std::string name, double tolerance) : result_{std::move(name), 0.0, tolerance, true} {}
    // Records a violation measured against `scale` times the tolerance.
    void observe(double violation, double scale = 1.0) {
        result_.worst = std::max(result_.worst, violation / scale);
        if (!(violation <= result_.tolerance * scale)) result_.passed = false;
    }
    CheckResult result() const { return result_; }

private:
    CheckResult result_;
};

} // namespace

std::vector<CheckResult> run_orthogonal_checks(std::uint64_t seed, std::size_t trials) {
    Rng rng(seed);
    std::vector<CheckResult> out;

    Tracker cayley_orth("cayley output is orthogonal (<= 1e-10 sqrt(n))", 1e-10);
    Tracker exp_orth("matrix_exp output is orthogonal (<= 1e-9 sqrt(n))", 1e-9);
    for (std::size_t n : {4, 16, 64, 256}) {
        const std::size_t count = n >= 256 ? std::max<std::size_t>(1, trials / 5) : trials;
        for (std::size_t t = 0; t < count; ++t) {
            const Matrix w = random_matrix(n, n, rng);
            const double root_n = std::sqrt(static_cast<double>(n));
            cayley_orth.observe(orthogonality_error(cayley(skew_symmetrize(w)).matrix()), root_n);
            exp_orth.observe(orthogonality_error(matrix_exp(skew_symmetrize(w)).matrix()), root_n);
        }
    }
    out.push_back(cayley_orth.result());
    out.push_back(exp_orth.result());

    Tracker inner("inner product preserved (relative 1e-9)", 1e-9);
    Tracker length("length preserved (relative 1e-9)", 1e-9);
    Tracker angle("angle preserved (1e-9)", 1e-9);
    Tracker distance("distance preserved (relative 1e-9)", 1e-9);
    for (std::size_t t = 0; t < 5 * trials; ++t) {
        const std::size_t n = 2 + rng.below(31);
        const Matrix raw = random_matrix(n, n, rng);
        const Matrix w = (t % 2 == 0) ? cayley(skew_symmetrize(raw)).matrix()
                                      : matrix_exp(skew_symmetrize(raw)).matrix();
        const Matrix x = random_matrix(1, n, rng), y = random_matrix(1, n, rng);
        const Matrix xw = matmul(x, w), yw = matmul(y, w);
        const double nx = norm(x.data()), ny = norm(y.data());
        inner.observe(std::abs(dot(xw.data(), yw.data()) - dot(x.data(), y.data())), nx * ny);
        length.observe(std::abs(norm(xw.data()) - nx), nx);
        const double cos_before = dot(x.data(), y.data()) / (nx * ny);
        const double cos_after = dot(xw.data(), yw.data()) / (norm(xw.data()) * norm(yw.data()));
        angle.observe(std::abs(cos_after - cos_before));
        const Matrix diff = subtract(x, y);
        distance.observe(std::abs(frobenius_norm(subtract(xw, yw)) - frobenius_norm(diff)),
                         frobenius_norm(diff));
    }
    for (const Tracker& tr : {inner, length, angle, distance}) out.push_back(tr.result());

    Tracker roundtrip("cayley(cayley_inverse(Y)) == Y (1e-8)", 1e-8);
    Tracker involution("cayley_inverse(cayley(X)) == X (1e-8)", 1e-8);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 2 + rng.below(15);
        const SkewMatrix x = skew_symmetrize(random_matrix(n, n, rng));
        const OrthogonalMatrix y = cayley(x);
        roundtrip.observe(frobenius_norm(subtract(cayley(cayley_inverse(y)).matrix(), y.matrix())));
        involution.observe(frobenius_norm(subtract(cayley_inverse(y).matrix(), x.matrix())));
    }
    out.push_back(roundtrip.result());
    out.push_back(involution.result());

    CheckResult singular{"cayley_inverse(-E) raises a singularity error", 0.0, 0.0, false};
    try {
        cayley_inverse(OrthogonalMatrix::checked(scale(Matrix::identity(4), -1.0)));
    } catch (const SingularityError&) {
        singular.passed = true;
    }
    out.push_back(singular);

    Tracker first_order("||cayley(X) - exp(-2X)|| <= 10 ||X||^2 for ||X|| <= 1e-3", 10.0);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 2 + rng.below(15);
        Matrix raw = random_matrix(n, n, rng);
        SkewMatrix x = skew_symmetrize(raw);
        const double target = 1e-3 * rng.uniform(0.1, 1.0);
        x = SkewMatrix::unchecked(scale(x.matrix(), target / frobenius_norm(x.matrix())));
        const Matrix lhs = cayley(x).matrix();
        const Matrix rhs = matrix_exp(SkewMatrix::unchecked(scale(x.matrix(), -2.0))).matrix();
        const double fx = frobenius_norm(x.matrix());
        first_order.observe(frobenius_norm(subtract(lhs, rhs)), fx * fx);
    }
    out.push_back(first_order.result());

    Tracker tangency("W^T tangent_project(W, G) is skew (1e-10)", 1e-10);
    Tracker retraction("retract output is orthogonal (<= 1e-10 sqrt(n))", 1e-10);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 2 + rng.below(31);
        const OrthogonalMatrix w = cayley(skew_symmetrize(random_matrix(n, n, rng)));
        const Matrix g = random_matrix(n, n, rng);
        const Matrix h = tangent_project(w, g);
        const Matrix wth = matmul(transpose(w.matrix()), h);
        tangency.observe(max_abs(add(wth, transpose(wth))));
        const OrthogonalMatrix next = retract(w, scale(h, -1.0), rng.uniform(0.01, 1.0));
        retraction.observe(orthogonality_error(next.matrix()), std::sqrt(static_cast<double>(n)));
    }
    out.push_back(tangency.result());
    out.push_back(retraction.result());
    return out;
}

ModelConfig gradcheck_model_config(ParamMode mode, std::size_t hidden) {
    ModelConfig c;
    c.depth = 1;
    c.heads = 2;
    c.hidden = hidden;
    c.mlp = hidden;
    c.patch = 4;
    c.classes = 2;
    c.image_side = 8;
    c.channels = 1;
    c.mode = mode;
    c.validate();
    return c;
}

namespace {

std::vector<Matrix> gradcheck_point(const Model& model, Rng& rng) {
    // Wider than the training init so no gradient entry is vanishingly small.
    std::vector<Matrix> leaves;
    for (const Parameter& p : model.parameters())
        leaves.push_back(random_matrix(p.value.rows(), p.value.cols(), rng, 0.5));
    return leaves;
}

ad::Var with_penalty(const BoundModel& bound, ad::Var loss, ParamMode mode) {
    if (mode != ParamMode::penalty) return loss;
    return ad::add(loss, ad::scale(bound.orthogonality_penalty(), TrainConfig{}.penalty_lambda));
}

} // namespace

ad::GradCheckReport gradcheck_model(ParamMode mode, std::size_t hidden, std::uint64_t seed,
                                    double eps) {
    const ModelConfig config = gradcheck_model_config(mode, hidden);
    const Model model = Model::initialize(config, seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const std::vector<Matrix> leaves = gradcheck_point(model, rng);
    const Matrix tokens_a = random_matrix(2, hidden, rng), tokens_b = random_matrix(2, hidden, rng);
    const std::vector<int> labels{0, 1};

    auto f = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
        const BoundModel bound(model, vars);
        const ad::Var rows[] = {bound.forward_tokens(tape.constant(tokens_a)),
                                bound.forward_tokens(tape.constant(tokens_b))};
        return with_penalty(bound, ad::cross_entropy(ad::concat_rows(rows), labels), mode);
    };
    return ad::finite_difference_check(f, leaves, eps);
}

ad::GradCheckReport gradcheck_model_images(const ModelConfig& config, std::uint64_t seed,
                                           double eps) {
    const Model model = Model::initialize(config, seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const std::vector<Matrix> leaves = gradcheck_point(model, rng);
    std::vector<Image> images;
    std::vector<int> labels;
    for (int i = 0; i < 2; ++i) {
        Image im(config.image_side, config.image_side, config.channels);
        for (double& p : im.pixels) p = rng.uniform();
        images.push_back(std::move(im));
        labels.push_back(i % static_cast<int>(config.classes));
    }
    auto f = [&](ad::Tape&, std::span<const ad::Var> vars) {
        const BoundModel bound(model, vars);
        return with_penalty(bound, ad::cross_entropy(bound.forward(images), labels), config.mode);
    };
    return ad::finite_difference_check(f, leaves, eps);
}

StepTiming benchmark_update_paths(std::size_t dim, std::size_t steps, std::uint64_t seed) {
    if (dim == 0 || steps == 0) throw ArgumentError("benchmark: dim and steps must be positive");
    Rng rng(seed);
    std::vector<Matrix> upstream;
    for (std::size_t i = 0; i < steps; ++i) upstream.push_back(random_matrix(dim, dim, rng));

    TrainConfig sgd;
    sgd.lr = 1e-2;
    Matrix raw = random_matrix(dim, dim, rng, 0.1);
    SgdState state;
    OrthogonalMatrix w = cayley(skew_symmetrize(raw));

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    for (const Matrix& g : upstream) {
        ad::Tape tape;
        const ad::Var a = tape.leaf(raw);
        // Linear probe sum(G o h(skew(A))) has dL/dW = G on the effective weight.
        const ad::Var loss = ad::sum(ad::hadamard(tape.constant(g), parameterize(a, ParamMode::cayley)));
        sgd_step(raw, tape.backward(loss)[a], state, sgd);
    }
    const auto t1 = clock::now();
    double drift = 0.0;
    for (const Matrix& g : upstream) {
        w = riemannian_sgd_step(w, g, sgd.lr);
        drift = std::max(drift, orthogonality_error(w.matrix()));
    }
    const auto t2 = clock::now();

    StepTiming timing;
    timing.dim = dim;
    timing.steps = steps;
    timing.cayley_raw_s = std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(steps);
    timing.riemannian_s = std::chrono::duration<double>(t2 - t1).count() / static_cast<double>(steps);
    timing.riemannian_max_orth_error = drift;
    return timing;
}

} // namespace ovit
