#pragma once

#include <cstdint>
#include <random>

namespace gdar {

// Location-scale Student-t head output for one step, in demand units.
// scale > 0 and nu > 2 are guaranteed by the positivity transforms on the
// raw head outputs; make_t_params enforces the same invariant for values
// constructed from the outside.
struct TStudentParams {
    double mu = 0;
    double scale = 1;
    double nu = 3;
};

TStudentParams make_t_params(double mu, double scale, double nu);

// Negative log density of the location-scale Student-t.
double t_nll(const TStudentParams& params, double y);

struct TNllGrad {
    double d_mu = 0;
    double d_scale = 0;
    double d_nu = 0;
};

TNllGrad t_nll_grad(const TStudentParams& params, double y);

// NLL weighted by the sign of the residual: w_under when the model
// under-predicts (y > mu), w_over when it over-predicts, 1 at y == mu.
double asymmetric_t_nll(const TStudentParams& params, double y, double w_under, double w_over);

// Matching weight, for scaling the symmetric gradient.
double asymmetric_weight(const TStudentParams& params, double y, double w_under, double w_over);

// One draw from the location-scale t, clamped at zero (demand is
// non-negative).
double sample_t_clamped(const TStudentParams& params, std::mt19937_64& rng);

}  // namespace gdar
