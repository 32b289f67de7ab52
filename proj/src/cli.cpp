#include "ovit/cli.hpp"

#include <array>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ovit/config.hpp"
#include "ovit/errors.hpp"
#include "ovit/random.hpp"
#include "ovit/verification.hpp"

namespace ovit::cli {

namespace {

inline constexpr std::array<double, 5> kSweepStds{0.0, 0.05, 0.08, 0.1, 1.0};
inline constexpr double kGradTolerance = 1e-5;

struct Options {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::string checkpoint;
    std::size_t dim = 8;
    std::size_t steps = 20;
};

void add_config_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "JSON config file (defaults apply to missing keys)");
    cmd->add_option("--set", o.overrides, "dotted key=value override, repeatable")->take_all();
    cmd->add_option("--seed", o.seed, "training seed (overrides the config's seed)");
    cmd->add_option("--mode", o.mode, "plain, cayley, exp or penalty");
}

RunConfig resolve(const Options& o, std::ostream& err) {
    std::vector<std::string> overrides = o.overrides;
    if (o.seed) overrides.push_back(fmt::format("seed={}", *o.seed));
    if (o.mode) overrides.push_back(fmt::format("model.mode=\"{}\"", *o.mode));
    RunConfig rc = parse_config(o.config_path, overrides);
    fmt::print(err, "config: {}\nseed: {}\n", to_json(rc).dump(), rc.train.seed);
    return rc;
}

// Writes to --out when given, otherwise to `fallback`.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (path.empty()) return;
        file_.open(path);
        if (!file_) throw ConfigError(fmt::format("cannot write output file '{}'", path));
        stream_ = &file_;
    }
    std::ostream& get() { return *stream_; }

private:
    std::ofstream file_;
    std::ostream* stream_;
};

// Loads --checkpoint, or trains a fresh model from the config when absent.
Model obtain_model(const Options& o, RunConfig& rc, std::ostream& err) {
    if (!o.checkpoint.empty()) {
        Model model = load_model(o.checkpoint);
        rc.train.model = model.config();
        fmt::print(err, "loaded checkpoint {}\n", o.checkpoint);
        return model;
    }
    const auto [train_set, test_set] = load_datasets(rc);
    fmt::print(err, "no --checkpoint given, training {} epochs first\n", rc.train.epochs);
    return ovit::train(rc.train, train_set, test_set).model;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    const RunConfig rc = resolve(o, err);
    const auto [train_set, test_set] = load_datasets(rc);
    Sink sink(o.out_path, out);
    std::ostream& csv = sink.get();
    csv << kMetricsCsvHeader << '\n';
    const TrainResult result = ovit::train(rc.train, train_set, test_set, [&](const MetricsRecord& r) {
        write_metrics_row(csv, r);
        csv.flush();
    });
    if (!o.checkpoint.empty()) {
        save_model(o.checkpoint, result.model);
        fmt::print(err, "wrote checkpoint {}\n", o.checkpoint);
    }
    return kOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
    RunConfig rc = resolve(o, err);
    const Model model = obtain_model(o, rc, err);
    const Dataset test_set = load_datasets(rc).second;
    Sink sink(o.out_path, out);
    fmt::print(sink.get(), "accuracy {:.6f}\n", evaluate(model, test_set));
    return kOk;
}

int cmd_noise_sweep(const Options& o, std::ostream& out, std::ostream& err) {
    RunConfig rc = resolve(o, err);
    const Model model = obtain_model(o, rc, err);
    const Dataset test_set = load_datasets(rc).second;
    const std::uint64_t noise_seed = Rng(rc.train.seed).split(2).seed();
    Sink sink(o.out_path, out);
    std::ostream& csv = sink.get();
    csv << "std,accuracy\n";
    for (double s : kSweepStds) fmt::print(csv, "{},{:.6f}\n", s, evaluate(model, test_set, s, noise_seed));
    return kOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream& err) {
    std::vector<ParamMode> modes;
    if (o.mode)
        modes.push_back(parse_param_mode(*o.mode));
    else
        modes = {ParamMode::plain, ParamMode::cayley, ParamMode::exp, ParamMode::penalty};
    const std::uint64_t seed = o.seed.value_or(0);
    fmt::print(err, "seed: {}\ndim: {}\n", seed, o.dim);
    Sink sink(o.out_path, out);
    bool ok = true;
    for (ParamMode mode : modes) {
        const ad::GradCheckReport r = gradcheck_model(mode, o.dim, seed);
        const bool pass = r.max_relative_error <= kGradTolerance;
        ok = ok && pass;
        fmt::print(sink.get(), "{} max_relative_error {:.3e} ({} entries) {}\n", to_string(mode),
                   r.max_relative_error, r.coordinates, pass ? "ok" : "FAIL");
    }
    return ok ? kOk : kCheckFailed;
}

int cmd_orthcheck(const Options& o, std::ostream& out, std::ostream& err) {
    const std::uint64_t seed = o.seed.value_or(0);
    fmt::print(err, "seed: {}\n", seed);
    Sink sink(o.out_path, out);
    bool ok = true;
    for (const CheckResult& c : run_orthogonal_checks(seed)) {
        ok = ok && c.passed;
        fmt::print(sink.get(), "{} {} (worst {:.3e})\n", c.passed ? "ok  " : "FAIL", c.name, c.worst);
    }
    return ok ? kOk : kCheckFailed;
}

int cmd_paramcount(const Options& o, std::ostream& out, std::ostream& err) {
    const RunConfig rc = resolve(o, err);
    const ModelConfig& m = rc.train.model;
    const ParamCount count = param_count(m);
    Sink sink(o.out_path, out);
    std::ostream& s = sink.get();
    fmt::print(s, "mode {}\nstored {}\neffective {}\n", to_string(m.mode), count.stored, count.effective);
    const StepTiming t = benchmark_update_paths(m.head_dim(), o.steps, rc.train.seed);
    fmt::print(s, "step_time_cayley_raw_s {:.6e}\nstep_time_riemannian_s {:.6e}\n", t.cayley_raw_s,
               t.riemannian_s);
    fmt::print(s, "riemannian_max_orth_err {:.3e} (d={}, {} steps)\n", t.riemannian_max_orth_error, t.dim,
               t.steps);
    return kOk;
}

} // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Orthogonally parameterized vision transformer toolkit", "ovit"};
    app.require_subcommand(1);
    Options o;

    auto* train = app.add_subcommand("train", "train a model and write per-epoch metrics CSV");
    add_config_flags(train, o);
    train->add_option("--out", o.out_path, "metrics CSV path (default: stdout)");
    train->add_option("--checkpoint", o.checkpoint, "write the final model here");

    auto* eval = app.add_subcommand("eval", "print test accuracy");
    auto* sweep = app.add_subcommand("noise-sweep", "test accuracy under Gaussian pixel noise");
    for (auto* cmd : {eval, sweep}) {
        add_config_flags(cmd, o);
        cmd->add_option("--out", o.out_path, "output path (default: stdout)");
        cmd->add_option("--checkpoint", o.checkpoint, "model to evaluate (default: train one first)");
    }

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the model gradient");
    grad->add_option("--mode", o.mode, "one mode (default: all four)");
    grad->add_option("--dim", o.dim, "token width of the tiny model")->check(CLI::PositiveNumber);
    grad->add_option("--seed", o.seed, "seed");
    grad->add_option("--out", o.out_path, "report path (default: stdout)");

    auto* orth = app.add_subcommand("orthcheck", "run the orthogonality invariant suite");
    orth->add_option("--seed", o.seed, "seed");
    orth->add_option("--out", o.out_path, "report path (default: stdout)");

    auto* count = app.add_subcommand("paramcount", "stored/effective parameter counts and step timing");
    add_config_flags(count, o);
    count->add_option("--out", o.out_path, "report path (default: stdout)");
    count->add_option("--steps", o.steps, "timed update steps")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*train) return cmd_train(o, out, err);
        if (*eval) return cmd_eval(o, out, err);
        if (*sweep) return cmd_noise_sweep(o, out, err);
        if (*grad) return cmd_gradcheck(o, out, err);
        if (*orth) return cmd_orthcheck(o, out, err);
        return cmd_paramcount(o, out, err);
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kUsage;
    }
}

} // namespace ovit::cli
