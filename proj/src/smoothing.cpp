#include "dcrr/smoothing.hpp"

#include <cmath>

namespace dcrr {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684759;
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490392848;

double std_normal_pdf(double t) { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

double std_normal_cdf(double t) { return 0.5 * std::erfc(-t * kInvSqrt2); }

}  // namespace

double kernel_density(const KernelSpec& spec, double t) {
    const double w = t / spec.h;
    switch (spec.kind) {
        case KernelKind::Gaussian:
            return std_normal_pdf(w) / spec.h;
        case KernelKind::Epanechnikov:
            if (w <= -1.0 || w >= 1.0) return 0.0;
            return 0.75 * (1.0 - w * w) / spec.h;
    }
    return 0.0;
}

double kernel_cdf(const KernelSpec& spec, double t) {
    const double w = t / spec.h;
    switch (spec.kind) {
        case KernelKind::Gaussian:
            return std_normal_cdf(w);
        case KernelKind::Epanechnikov:
            if (w <= -1.0) return 0.0;
            if (w >= 1.0) return 1.0;
            return 0.5 + 0.75 * (w - w * w * w / 3.0);
    }
    return 0.0;
}

double conv_loss(const KernelSpec& spec, double u) {
    const double h = spec.h;
    const double w = u / h;
    switch (spec.kind) {
        case KernelKind::Gaussian: {
            // E|u - V| with V ~ N(0, h^2).
            return u * (2.0 * std_normal_cdf(w) - 1.0) + 2.0 * h * std_normal_pdf(w);
        }
        case KernelKind::Epanechnikov: {
            if (w <= -1.0 || w >= 1.0) return std::abs(u);
            const double w2 = w * w;
            return h * (0.375 + 0.75 * w2 - 0.125 * w2 * w2);
        }
    }
    return 0.0;
}

double conv_loss_d1(const KernelSpec& spec, double u) {
    return 2.0 * kernel_cdf(spec, u) - 1.0;
}

double conv_loss_d2(const KernelSpec& spec, double u) {
    return 2.0 * kernel_density(spec, u);
}

double quad_conv_loss(const KernelSpec& spec, double u, int n_points) {
    if (n_points < 64) throw std::invalid_argument("quad_conv_loss: n_points must be >= 64");
    const double h = spec.h;
    // Support of K_h: exact for Epanechnikov, 10h covers the Gaussian tail
    // far below the 1e-8 target.
    const double lo = (spec.kind == KernelKind::Epanechnikov) ? -h : -10.0 * h;
    const double hi = -lo;

    auto simpson = [&](double a, double b, int n) {
        if (b <= a) return 0.0;
        if (n % 2 != 0) ++n;
        const double step = (b - a) / n;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double v = a + i * step;
            const double f = std::abs(u - v) * kernel_density(spec, v);
            const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            acc += wgt * f;
        }
        return acc * step / 3.0;
    };

    // |u - v| has a kink at v = u; integrate each smooth piece separately.
    if (u > lo && u < hi) return simpson(lo, u, n_points) + simpson(u, hi, n_points);
    return simpson(lo, hi, n_points);
}

}  // namespace dcrr
