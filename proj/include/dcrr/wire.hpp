#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

namespace dcrr {

enum class Purpose : std::uint8_t { GradientRequest = 0, LossRequest = 1, GradAndLoss = 2 };

inline bool wants_grad(Purpose p) { return p != Purpose::LossRequest; }
inline bool wants_loss(Purpose p) { return p != Purpose::GradientRequest; }

// Master -> site. On the wire: u32 LE length prefix (bytes after the prefix),
// u8 tag = 0, u32 round, u32 p, p f64 LE coefficients, u8 purpose.
struct BetaBroadcast {
    std::uint32_t round = 0;
    Eigen::VectorXd beta;
    Purpose purpose = Purpose::GradientRequest;
};

// Site -> master. u32 LE length prefix, u8 tag = 1, u32 round, u16 site_id,
// u32 n_local, u32 p, then the gradient (iff requested) and loss (iff
// requested), all f64 LE.
struct GradientMessage {
    std::uint32_t round = 0;
    std::uint16_t site_id = 0;
    std::uint32_t n_local = 0;
    std::uint32_t p = 0;
    std::optional<Eigen::VectorXd> grad;
    std::optional<double> loss;
};

std::vector<std::uint8_t> encode(const BetaBroadcast& msg);
std::vector<std::uint8_t> encode(const GradientMessage& msg);

// Both decoders take the full framed buffer (length prefix included) and
// throw std::runtime_error on truncation, bad tag, or a length that does not
// match the declared p.
BetaBroadcast decode_beta_broadcast(const std::vector<std::uint8_t>& buf);

// The reply layout depends on what the triggering broadcast asked for, so the
// decoder needs that context.
GradientMessage decode_gradient_message(const std::vector<std::uint8_t>& buf, Purpose requested);

// Framed sizes implied by the layout above.
inline std::size_t broadcast_wire_size(std::size_t p) { return 14 + 8 * p; }
inline std::size_t gradient_wire_size(std::size_t p, Purpose requested) {
    return 19 + (wants_grad(requested) ? 8 * p : 0) + (wants_loss(requested) ? 8 : 0);
}

}  // namespace dcrr
