#include "vulnllm/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vulnllm::stats {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a,b); converges quickly for x < (a+1)/(a+b+2).
double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10'000; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw std::domain_error("incomplete beta requires a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw std::domain_error("degrees of freedom must be > 0");
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return 0.0;
    const double t2 = t * t;
    // For small t the complementary form avoids cancellation in df/(df+t^2).
    if (t2 < df) return 1.0 - regularized_incomplete_beta(0.5, df / 2.0, t2 / (df + t2));
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t2));
}

double student_t_cdf(double t, double df) {
    const double tail = 0.5 * student_t_two_sided_p(t, df);
    return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double prob, double df) {
    if (!(prob > 0.0 && prob < 1.0)) throw std::domain_error("quantile probability must be in (0, 1)");
    if (df <= 0.0) throw std::domain_error("degrees of freedom must be > 0");
    if (prob == 0.5) return 0.0;
    // Solve on the upper half: find t > 0 with P(|T| >= t) = target.
    const double target = 2.0 * (prob > 0.5 ? 1.0 - prob : prob);

    double lo = 0.0;
    double hi = 1.0;
    while (student_t_two_sided_p(hi, df) > target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) break;
    }
    // Bisection to the last representable gap; two-sided p is decreasing in t.
    for (int i = 0; i < 2000 && hi - lo > 0.0; ++i) {
        const double mid = lo + (hi - lo) / 2.0;
        if (mid <= lo || mid >= hi) break;
        if (student_t_two_sided_p(mid, df) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double t = hi;
    return prob > 0.5 ? t : -t;
}

}  // namespace vulnllm::stats
