#pragma once

#include <stdexcept>

namespace dcrr {

enum class KernelKind { Gaussian, Epanechnikov };

// Smoothing kernel and bandwidth defining the convolved absolute loss.
struct KernelSpec {
    KernelKind kind = KernelKind::Epanechnikov;
    double h = 1.0;

    KernelSpec() = default;
    KernelSpec(KernelKind k, double bandwidth) : kind(k), h(bandwidth) {
        if (!(h > 0.0)) throw std::invalid_argument("KernelSpec: bandwidth must be positive");
    }
};

// Scaled kernel density K(t/h)/h.
double kernel_density(const KernelSpec& spec, double t);

// CDF of the scaled kernel, integral of kernel_density up to t.
double kernel_cdf(const KernelSpec& spec, double t);

// Convolved absolute loss L_h(u) = E|u - V|, V ~ K_h. Convex, even, >= 0.
// Equals |u| exactly for |u| >= h with the Epanechnikov kernel.
double conv_loss(const KernelSpec& spec, double u);

// L_h'(u) = 2*kernel_cdf(u) - 1, odd, bounded by 1 in absolute value.
double conv_loss_d1(const KernelSpec& spec, double u);

// L_h''(u) = 2*kernel_density(u) >= 0.
double conv_loss_d2(const KernelSpec& spec, double u);

// Quadrature reference for conv_loss: composite Simpson split at the kink v = u.
// Test oracle; far too slow for the pairwise inner loop.
double quad_conv_loss(const KernelSpec& spec, double u, int n_points);

}  // namespace dcrr
