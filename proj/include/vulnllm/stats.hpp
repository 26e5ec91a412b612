#pragma once

namespace vulnllm::stats {

/// I_x(a, b) by Lentz's continued fraction; relative accuracy ~1e-14.
double regularized_incomplete_beta(double a, double b, double x);

/// Student-t CDF with `df` degrees of freedom (df > 0, may be fractional).
double student_t_cdf(double t, double df);

/// P(|T| >= |t|).
double student_t_two_sided_p(double t, double df);

/// Inverse CDF for 0 < prob < 1, solved to full double precision.
double student_t_quantile(double prob, double df);

}  // namespace vulnllm::stats
