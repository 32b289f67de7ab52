#pragma once

// Self-checks run by the `orthcheck`, `gradcheck` and `paramcount` commands.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ovit/autodiff.hpp"
#include "ovit/model.hpp"

namespace ovit {

struct CheckResult {
    std::string name;
    double worst = 0.0;      // largest observed violation
    double tolerance = 0.0;  // bound it must stay within
    bool passed = false;
};

// Orthogonality of cayley/exp outputs, inner-product/length/angle/distance
// invariance, the Cayley roundtrip, the singularity of cayley_inverse(-E),
// tangency of projected gradients and the retraction bound.
std::vector<CheckResult> run_orthogonal_checks(std::uint64_t seed, std::size_t trials = 20);

// Tiny model used by the gradient check: depth 1, two heads, `hidden` wide.
ModelConfig gradcheck_model_config(ParamMode mode, std::size_t hidden);

// Central-difference check of cross-entropy over the model's token trunk on
// two seeded 2-token sequences (plus the penalty term in penalty mode),
// taken with respect to every model parameter.
ad::GradCheckReport gradcheck_model(ParamMode mode, std::size_t hidden, std::uint64_t seed,
                                    double eps = 1e-5);

// Same check through the full image pipeline (patch embedding included).
ad::GradCheckReport gradcheck_model_images(const ModelConfig& config, std::uint64_t seed,
                                           double eps = 1e-5);

struct StepTiming {
    std::size_t dim = 0;
    std::size_t steps = 0;
    // Seconds per update of one d x d attention weight.
    double cayley_raw_s = 0.0;   // parameterize on a tape, backward, SGD on the raw matrix
    double riemannian_s = 0.0;   // tangent projection + QR retraction of the effective weight
    double riemannian_max_orth_error = 0.0;
};

StepTiming benchmark_update_paths(std::size_t dim, std::size_t steps, std::uint64_t seed);

} // namespace ovit
