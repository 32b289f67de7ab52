// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ovit/cli.hpp"
#include "ovit/config.hpp"
#include "ovit/errors.hpp"
#include "ovit/orthogonal.hpp"
#include "ovit/random.hpp"
#include "ovit/training.hpp"
#include "ovit/verification.hpp"

using namespace ovit;

namespace {

using clock_type = std::chrono::steady_clock;

struct Outcome {
    bool passed = true;
    std::string detail;
};

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double amp = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-amp, amp);
    return m;
}

double dot(const Matrix& a, const Matrix& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

int failures = 0;

void criterion(const std::string& name, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = clock_type::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, fmt::format("threw: {}", e.what())};
    }
    const double elapsed = std::chrono::duration<double>(clock_type::now() - t0).count();
    if (elapsed >= limit_s) {
        o.passed = false;
        o.detail += fmt::format("; over the {:.0f} s limit", limit_s);
    }
    if (!o.passed) ++failures;
    fmt::print("{} {} [{:.2f} s] {}\n", o.passed ? "PASS" : "FAIL", name, elapsed, o.detail);
    std::fflush(stdout);
}

TrainConfig toy_config(ParamMode mode) {
    TrainConfig t;
    t.model.depth = 1;
    t.model.heads = 2;
    t.model.hidden = 8;
    t.model.mlp = 16;
    t.model.patch = 4;
    t.model.image_side = 8;
    t.model.classes = 2;
    t.model.mode = mode;
    t.epochs = 200;  // lr, momentum and weight decay stay at their defaults
    t.augment = false;
    t.seed = 1;
    return t;
}

RunConfig toy_run(ParamMode mode) {
    RunConfig rc;
    rc.train = toy_config(mode);
    rc.data.train_per_class = 100;
    rc.data.test_per_class = 50;
    rc.data.noise_std = 0.1;
    rc.data.seed = 1;
    return rc;
}

const std::filesystem::path kToyCheckpoint = std::filesystem::temp_directory_path() / "ovit_acceptance_toy.json";

} // namespace

int main() {
    criterion("orthogonality by construction (100 matrices, n in {4,16,64,256})", 10.0, [] {
        Rng rng(2024);
        double worst_cayley = 0, worst_exp = 0;
        Outcome o;
        for (std::size_t n : {4, 16, 64, 256})
            for (int t = 0; t < 25; ++t) {
                const SkewMatrix x = skew_symmetrize(random_matrix(n, n, rng));
                const double root = std::sqrt(static_cast<double>(n));
                const double ec = orthogonality_error(cayley(x).matrix()) / root;
                const double ee = orthogonality_error(matrix_exp(x).matrix()) / root;
                worst_cayley = std::max(worst_cayley, ec);
                worst_exp = std::max(worst_exp, ee);
                o.passed = o.passed && ec <= 1e-10 && ee <= 1e-9;
            }
        o.detail = fmt::format("worst error/sqrt(n): cayley {:.2e} (<= 1e-10), exp {:.2e} (<= 1e-9)",
                               worst_cayley, worst_exp);
        return o;
    });

    criterion("invariance of inner product, length, angle, distance (1000 triples)", 5.0, [] {
        Rng rng(7);
        double w_inner = 0, w_len = 0, w_angle = 0, w_dist = 0;
        for (int t = 0; t < 1000; ++t) {
            const std::size_t n = 2 + rng.below(31);
            const SkewMatrix s = skew_symmetrize(random_matrix(n, n, rng));
            const Matrix w = t % 2 == 0 ? cayley(s).matrix() : matrix_exp(s).matrix();
            const Matrix x = random_matrix(1, n, rng), y = random_matrix(1, n, rng);
            const Matrix xw = matmul(x, w), yw = matmul(y, w);
            const double nx = std::sqrt(dot(x, x)), ny = std::sqrt(dot(y, y));
            const double nxw = std::sqrt(dot(xw, xw)), nyw = std::sqrt(dot(yw, yw));
            w_inner = std::max(w_inner, std::abs(dot(xw, yw) - dot(x, y)) / (nx * ny));
            w_len = std::max(w_len, std::abs(nxw - nx) / nx);
            if (nx >= 1e-3 && ny >= 1e-3)
                w_angle = std::max(w_angle, std::abs(dot(xw, yw) / (nxw * nyw) - dot(x, y) / (nx * ny)));
            const Matrix d = subtract(x, y), dw = subtract(xw, yw);
            const double nd = std::sqrt(dot(d, d));
            w_dist = std::max(w_dist, std::abs(std::sqrt(dot(dw, dw)) - nd) / nd);
        }
        const bool ok = w_inner <= 1e-9 && w_len <= 1e-9 && w_angle <= 1e-9 && w_dist <= 1e-9;
        return Outcome{ok, fmt::format("worst relative: inner {:.2e}, length {:.2e}, angle {:.2e}, distance {:.2e} "
                                       "(each <= 1e-9)",
                                       w_inner, w_len, w_angle, w_dist)};
    });

    criterion("constructive roundtrip cayley(cayley_inverse(Y)) = Y (100 matrices), -E singular", 5.0, [] {
        Rng rng(11);
        double worst = 0;
        for (int t = 0; t < 100; ++t) {
            const std::size_t n = 2 + rng.below(31);
            const OrthogonalMatrix y = cayley(skew_symmetrize(random_matrix(n, n, rng)));
            worst = std::max(worst, frobenius_norm(subtract(cayley(cayley_inverse(y)).matrix(), y.matrix())));
        }
        bool singular = false;
        try {
            cayley_inverse(OrthogonalMatrix::checked(scale(Matrix::identity(3), -1.0)));
        } catch (const SingularityError&) {
            singular = true;
        }
        return Outcome{worst <= 1e-8 && singular,
                       fmt::format("worst roundtrip error {:.2e} (<= 1e-8); cayley_inverse(-E) {}", worst,
                                   singular ? "raised SingularityError" : "did not raise")};
    });

    criterion("gradcheck of cross-entropy on tiny model (d=8, 2 tokens), all four modes", 30.0, [] {
        Outcome o;
        std::vector<std::string> parts;
        for (ParamMode mode : {ParamMode::plain, ParamMode::cayley, ParamMode::exp, ParamMode::penalty}) {
            const double trunk = gradcheck_model(mode, 8, 1).max_relative_error;
            const double full = gradcheck_model_images(gradcheck_model_config(mode, 8), 1).max_relative_error;
            o.passed = o.passed && trunk <= 1e-5 && full <= 1e-5;
            parts.push_back(fmt::format("{} {:.1e}/{:.1e}", to_string(mode), trunk, full));
        }
        o.detail = fmt::format("max relative error tokens/images: {} (<= 1e-5)", fmt::join(parts, ", "));
        return o;
    });

    criterion("norm-preservation gradient of ||x h(skew(A))||^2 wrt A", 5.0, [] {
        Rng rng(13);
        double worst = 0;
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 2 + rng.below(31);
            ad::Tape tape;
            const ad::Var a = tape.leaf(random_matrix(n, n, rng));
            const ad::Var y = ad::matmul(tape.constant(random_matrix(1, n, rng)), parameterize(a, ParamMode::cayley));
            worst = std::max(worst, max_abs(tape.backward(ad::sum(ad::hadamard(y, y)))[a]));
        }
        return Outcome{worst <= 1e-8, fmt::format("max |grad| {:.2e} (<= 1e-8) over 50 draws", worst)};
    });

    criterion("toy training on 2-class stripes (200 train / 100 test, std 0.1, 200 epochs)", 300.0, [] {
        const RunConfig rc = toy_run(ParamMode::cayley);
        const auto [train_set, test_set] = load_datasets(rc);
        Outcome o;

        const TrainResult cay = train(rc.train, train_set, test_set);
        const MetricsRecord& last = cay.metrics.back();
        double cay_orth = 0;
        for (const MetricsRecord& r : cay.metrics) cay_orth = std::max(cay_orth, r.max_orthogonality_error);
        const bool cay_ok = cay.metrics.size() == 200 && last.train_accuracy >= 0.95 && last.test_accuracy >= 0.90;
        const bool orth_ok = cay_orth <= 1e-10 * std::sqrt(static_cast<double>(rc.train.model.head_dim()));
        save_model(kToyCheckpoint, cay.model);

        const TrainResult again = train(rc.train, train_set, test_set);
        bool same = again.metrics.size() == cay.metrics.size();
        for (std::size_t i = 0; same && i < cay.metrics.size(); ++i) {
            const MetricsRecord &a = cay.metrics[i], &b = again.metrics[i];
            same = a.train_loss == b.train_loss && a.train_accuracy == b.train_accuracy &&
                   a.test_accuracy == b.test_accuracy && a.max_orthogonality_error == b.max_orthogonality_error;
        }

        const TrainResult plain = train(toy_config(ParamMode::plain), train_set, test_set);
        const bool plain_ok = plain.metrics.back().train_accuracy >= 0.90;

        const TrainResult pen = train(toy_config(ParamMode::penalty), train_set, test_set);
        double pen_min = pen.metrics.front().max_orthogonality_error;
        for (const MetricsRecord& r : pen.metrics) pen_min = std::min(pen_min, r.max_orthogonality_error);
        const bool pen_ok = pen_min > 1e-6;

        o.passed = cay_ok && orth_ok && same && plain_ok && pen_ok;
        o.detail = fmt::format(
            "cayley train {:.3f} (>= 0.95) test {:.3f} (>= 0.90); rerun identical: {}; plain train {:.3f} "
            "(>= 0.90); cayley max orth err {:.2e} (<= 2e-10); penalty min orth err {:.2e} (> 1e-6)",
            last.train_accuracy, last.test_accuracy, same ? "yes" : "no", plain.metrics.back().train_accuracy,
            cay_orth, pen_min);
        return o;
    });

    criterion("riemannian baseline: 100 steps stay within 1e-8 sqrt(n); step timings reported", 60.0, [] {
        Rng rng(17);
        Outcome o;
        std::vector<std::string> parts;
        for (std::size_t n : {4, 16, 64}) {
            OrthogonalMatrix w = cayley(skew_symmetrize(random_matrix(n, n, rng)));
            double worst = 0;
            for (int s = 0; s < 100; ++s) {
                w = riemannian_sgd_step(w, random_matrix(n, n, rng), 0.05);
                worst = std::max(worst, orthogonality_error(w.matrix()));
            }
            const double bound = 1e-8 * std::sqrt(static_cast<double>(n));
            o.passed = o.passed && worst <= bound;
            const StepTiming t = benchmark_update_paths(n, 20, 5);
            parts.push_back(fmt::format("n={} err {:.1e} (<= {:.1e}), step s cayley-raw {:.2e} riemannian {:.2e}", n,
                                        worst, bound, t.cayley_raw_s, t.riemannian_s));
        }
        std::ostringstream out, err;
        const std::vector<std::string> args{"paramcount", "--set", "model.heads=2", "--set", "model.hidden=8"};
        const int code = cli::run(args, out, err);
        const bool reported = code == 0 && out.str().find("step_time_cayley_raw_s") != std::string::npos &&
                              out.str().find("step_time_riemannian_s") != std::string::npos;
        o.passed = o.passed && reported;
        o.detail = fmt::format("{}; paramcount reports both timings: {}", fmt::join(parts, "; "),
                               reported ? "yes" : "no");
        return o;
    });

    criterion("parameter accounting: n(n-1)/2 per cayley block, tiny config frozen count", 5.0, [] {
        Outcome o;
        for (std::size_t heads : {1, 2, 4, 8}) {
            ModelConfig c = toy_config(ParamMode::cayley).model;
            c.heads = heads;
            const std::size_t n = c.head_dim();
            const ParamCount cay = param_count(c);
            c.mode = ParamMode::plain;
            const ParamCount plain = param_count(c);
            const std::size_t blocks = 3 * heads * c.depth;
            o.passed = o.passed && plain.stored == plain.effective && cay.stored == plain.stored &&
                       cay.effective == plain.effective - blocks * n * n + blocks * n * (n - 1) / 2;
        }
        const ParamCount tiny = param_count(toy_config(ParamMode::cayley).model);
        o.passed = o.passed && tiny.stored == 626 && tiny.effective == 566;
        o.detail = fmt::format("tiny config stored {} (626), effective {} (566)", tiny.stored, tiny.effective);
        return o;
    });

    criterion("noise-sweep harness: one row per std, accuracy(std=1) <= accuracy(std=0)", 60.0, [] {
        if (!std::filesystem::exists(kToyCheckpoint)) return Outcome{false, "toy checkpoint missing"};
        std::vector<std::string> args{"noise-sweep", "--checkpoint", kToyCheckpoint.string()};
        for (const char* kv : {"data.train_per_class=100", "data.test_per_class=50", "data.noise_std=0.1",
                               "data.seed=1", "model.image_side=8", "seed=1"}) {
            args.push_back("--set");
            args.push_back(kv);
        }
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        std::istringstream lines(out.str());
        std::string line;
        std::getline(lines, line);
        std::vector<std::pair<double, double>> rows;
        while (std::getline(lines, line)) {
            const auto comma = line.find(',');
            rows.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
        }
        const std::vector<double> stds{0.0, 0.05, 0.08, 0.1, 1.0};
        bool shape = code == 0 && rows.size() == stds.size();
        for (std::size_t i = 0; shape && i < rows.size(); ++i) shape = rows[i].first == stds[i];
        std::filesystem::remove(kToyCheckpoint);
        if (!shape) return Outcome{false, fmt::format("exit {}, output:\n{}{}", code, out.str(), err.str())};
        std::vector<std::string> parts;
        for (const auto& [s, a] : rows) parts.push_back(fmt::format("{}:{:.3f}", s, a));
        return Outcome{rows.back().second <= rows.front().second,
                       fmt::format("accuracy by std {}", fmt::join(parts, " "))};
    });

    fmt::print("{} criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
