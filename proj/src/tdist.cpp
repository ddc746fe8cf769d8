#include "gdar/tdist.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "gdar/common.hpp"

namespace gdar {

TStudentParams make_t_params(double mu, double scale, double nu) {
    require(std::isfinite(mu) && std::isfinite(scale) && std::isfinite(nu),
            "t parameters must be finite");
    require(scale > 0.0, "t scale must be positive");
    require(nu > 2.0, "t degrees of freedom must exceed 2");
    return {mu, scale, nu};
}

double t_nll(const TStudentParams& p, double y) {
    const double z = (y - p.mu) / p.scale;
    const double log_f = boost::math::lgamma((p.nu + 1.0) / 2.0) -
                         boost::math::lgamma(p.nu / 2.0) - 0.5 * std::log(p.nu * M_PI) -
                         std::log(p.scale) -
                         (p.nu + 1.0) / 2.0 * std::log1p(z * z / p.nu);
    return -log_f;
}

TNllGrad t_nll_grad(const TStudentParams& p, double y) {
    const double z = (y - p.mu) / p.scale;
    const double a = 1.0 + z * z / p.nu;
    TNllGrad g;
    g.d_mu = -(p.nu + 1.0) * z / (p.nu * a * p.scale);
    g.d_scale = 1.0 / p.scale - (p.nu + 1.0) * z * z / (p.nu * a * p.scale);
    g.d_nu = 0.5 * (boost::math::digamma(p.nu / 2.0) - boost::math::digamma((p.nu + 1.0) / 2.0) +
                    1.0 / p.nu + std::log1p(z * z / p.nu) -
                    (p.nu + 1.0) * z * z / (p.nu * p.nu * a));
    return g;
}

double asymmetric_weight(const TStudentParams& p, double y, double w_under, double w_over) {
    if (y > p.mu) return w_under;
    if (y < p.mu) return w_over;
    return 1.0;
}

double asymmetric_t_nll(const TStudentParams& p, double y, double w_under, double w_over) {
    require(w_under > 0.0 && w_over > 0.0, "asymmetric weights must be positive");
    return asymmetric_weight(p, y, w_under, w_over) * t_nll(p, y);
}

double sample_t_clamped(const TStudentParams& p, std::mt19937_64& rng) {
    std::student_t_distribution<double> dist(p.nu);
    double draw = p.mu + p.scale * dist(rng);
    return draw < 0.0 ? 0.0 : draw;
}

}  // namespace gdar
