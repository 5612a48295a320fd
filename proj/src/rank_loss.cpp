#include "dcrr/rank_loss.hpp"

#include <cmath>

namespace dcrr {

namespace {

void check_pairwise(const DataBlock& block, const Eigen::VectorXd& beta) {
    if (block.n() < 2) throw std::invalid_argument("pairwise loss requires n >= 2");
    if (beta.size() != block.p())
        throw std::invalid_argument("beta length does not match block dimension");
}

}  // namespace

double crr_loss(const DataBlock& block, const Eigen::VectorXd& beta, const KernelSpec& spec) {
    check_pairwise(block, beta);
    const Eigen::Index n = block.n();
    const Eigen::VectorXd r = block.y - block.X * beta;
    double acc = 0.0;
    // Unordered pairs once; L_h is even so the ordered sum is exactly double.
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) acc += conv_loss(spec, r[i] - r[j]);
    return 2.0 * acc / (static_cast<double>(n) * static_cast<double>(n - 1));
}

Eigen::VectorXd crr_grad(const DataBlock& block, const Eigen::VectorXd& beta,
                         const KernelSpec& spec) {
    check_pairwise(block, beta);
    const Eigen::Index n = block.n();
    const Eigen::VectorXd r = block.y - block.X * beta;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    // L_h' is odd: accumulate each unordered pair into both endpoints.
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = conv_loss_d1(spec, r[i] - r[j]);
            s[i] += d;
            s[j] -= d;
        }
    const double scale = -2.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
    return scale * (block.X.transpose() * s);
}

LossGrad crr_loss_grad(const DataBlock& block, const Eigen::VectorXd& beta,
                       const KernelSpec& spec) {
    check_pairwise(block, beta);
    const Eigen::Index n = block.n();
    const Eigen::VectorXd r = block.y - block.X * beta;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double u = r[i] - r[j];
            acc += conv_loss(spec, u);
            const double d = conv_loss_d1(spec, u);
            s[i] += d;
            s[j] -= d;
        }
    const double denom = static_cast<double>(n) * static_cast<double>(n - 1);
    LossGrad out;
    out.loss = 2.0 * acc / denom;
    out.grad = (-2.0 / denom) * (block.X.transpose() * s);
    return out;
}

double surrogate_loss(const DataBlock& master, const Eigen::VectorXd& beta,
                      const CorrectionVector& correction, const KernelSpec& spec) {
    if (correction.g.size() != beta.size())
        throw std::invalid_argument("surrogate_loss: correction length mismatch");
    return crr_loss(master, beta, spec) - beta.dot(correction.g);
}

Eigen::VectorXd surrogate_grad(const DataBlock& master, const Eigen::VectorXd& beta,
                               const CorrectionVector& correction, const KernelSpec& spec) {
    if (correction.g.size() != beta.size())
        throw std::invalid_argument("surrogate_grad: correction length mismatch");
    return crr_grad(master, beta, spec) - correction.g;
}

CorrectionVector build_correction(const Eigen::VectorXd& master_grad,
                                  const std::vector<std::pair<Eigen::VectorXd, double>>& site_grads,
                                  int origin_round) {
    if (site_grads.empty()) throw std::invalid_argument("build_correction: empty site list");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(master_grad.size());
    double total_w = 0.0;
    for (const auto& [g, w] : site_grads) {
        if (g.size() != master_grad.size())
            throw std::invalid_argument("build_correction: gradient length mismatch");
        if (!(w > 0.0)) throw std::invalid_argument("build_correction: weights must be positive");
        mean += w * g;
        total_w += w;
    }
    CorrectionVector out;
    out.g = master_grad - mean / total_w;
    out.origin_round = origin_round;
    return out;
}

}  // namespace dcrr
