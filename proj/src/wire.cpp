#include "dcrr/wire.hpp"

#include <cstring>
#include <stdexcept>

namespace dcrr {

namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v & 0xff));
    b.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& b, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    void need(std::size_t k) const {
        if (pos + k > buf.size()) throw std::runtime_error("wire: truncated message");
    }
    std::uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(buf[pos]) |
                          static_cast<std::uint16_t>(buf[pos + 1]) << 8;
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

std::uint32_t check_frame(Reader& r) {
    const std::uint32_t len = r.u32();
    if (r.buf.size() != static_cast<std::size_t>(len) + 4)
        throw std::runtime_error("wire: frame length mismatch");
    return len;
}

}  // namespace

std::vector<std::uint8_t> encode(const BetaBroadcast& msg) {
    std::vector<std::uint8_t> b;
    const std::size_t p = static_cast<std::size_t>(msg.beta.size());
    b.reserve(broadcast_wire_size(p));
    put_u32(b, static_cast<std::uint32_t>(broadcast_wire_size(p) - 4));
    b.push_back(0);  // tag
    put_u32(b, msg.round);
    put_u32(b, static_cast<std::uint32_t>(p));
    for (std::size_t j = 0; j < p; ++j) put_f64(b, msg.beta[static_cast<Eigen::Index>(j)]);
    b.push_back(static_cast<std::uint8_t>(msg.purpose));
    return b;
}

std::vector<std::uint8_t> encode(const GradientMessage& msg) {
    std::vector<std::uint8_t> b;
    std::size_t payload = 1 + 4 + 2 + 4 + 4;
    if (msg.grad) payload += 8 * static_cast<std::size_t>(msg.grad->size());
    if (msg.loss) payload += 8;
    b.reserve(payload + 4);
    put_u32(b, static_cast<std::uint32_t>(payload));
    b.push_back(1);  // tag
    put_u32(b, msg.round);
    put_u16(b, msg.site_id);
    put_u32(b, msg.n_local);
    put_u32(b, msg.p);
    if (msg.grad)
        for (Eigen::Index j = 0; j < msg.grad->size(); ++j) put_f64(b, (*msg.grad)[j]);
    if (msg.loss) put_f64(b, *msg.loss);
    return b;
}

BetaBroadcast decode_beta_broadcast(const std::vector<std::uint8_t>& buf) {
    Reader r{buf};
    check_frame(r);
    if (r.u8() != 0) throw std::runtime_error("wire: unexpected tag for BetaBroadcast");
    BetaBroadcast msg;
    msg.round = r.u32();
    const std::uint32_t p = r.u32();
    if (buf.size() != broadcast_wire_size(p))
        throw std::runtime_error("wire: length does not match declared p");
    msg.beta.resize(p);
    for (std::uint32_t j = 0; j < p; ++j) msg.beta[j] = r.f64();
    const std::uint8_t purpose = r.u8();
    if (purpose > 2) throw std::runtime_error("wire: unknown purpose");
    msg.purpose = static_cast<Purpose>(purpose);
    return msg;
}

GradientMessage decode_gradient_message(const std::vector<std::uint8_t>& buf, Purpose requested) {
    Reader r{buf};
    check_frame(r);
    if (r.u8() != 1) throw std::runtime_error("wire: unexpected tag for GradientMessage");
    GradientMessage msg;
    msg.round = r.u32();
    msg.site_id = r.u16();
    msg.n_local = r.u32();
    msg.p = r.u32();
    if (buf.size() != gradient_wire_size(msg.p, requested))
        throw std::runtime_error("wire: length does not match declared p");
    if (wants_grad(requested)) {
        Eigen::VectorXd g(msg.p);
        for (std::uint32_t j = 0; j < msg.p; ++j) g[j] = r.f64();
        msg.grad = std::move(g);
    }
    if (wants_loss(requested)) msg.loss = r.f64();
    return msg;
}

}  // namespace dcrr
