#include "dcrr/transport.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <stdexcept>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

namespace dcrr {

GradientMessage compute_site_reply(const SiteShard& shard, const KernelSpec& kernel,
                                   const BetaBroadcast& msg) {
    if (msg.beta.size() != shard.data.p())
        throw std::runtime_error("site " + std::to_string(shard.site_id) +
                                 ": dimension mismatch in broadcast");
    GradientMessage reply;
    reply.round = msg.round;
    reply.site_id = shard.site_id;
    reply.n_local = static_cast<std::uint32_t>(shard.data.n());
    reply.p = static_cast<std::uint32_t>(msg.beta.size());
    switch (msg.purpose) {
        case Purpose::GradientRequest:
            reply.grad = crr_grad(shard.data, msg.beta, kernel);
            break;
        case Purpose::LossRequest:
            reply.loss = crr_loss(shard.data, msg.beta, kernel);
            break;
        case Purpose::GradAndLoss: {
            LossGrad lg = crr_loss_grad(shard.data, msg.beta, kernel);
            reply.grad = std::move(lg.grad);
            reply.loss = lg.loss;
            break;
        }
    }
    return reply;
}

void Cluster::account_round(std::size_t p, Purpose want) {
    stats_.rounds += 1;
    if (wants_grad(want))
        stats_.gradient_rounds += 1;
    else
        stats_.loss_rounds += 1;
    stats_.bytes_down +=
        static_cast<std::int64_t>(num_sites()) * static_cast<std::int64_t>(broadcast_wire_size(p));
    stats_.bytes_up +=
        static_cast<std::int64_t>(num_sites()) * static_cast<std::int64_t>(gradient_wire_size(p, want));
}

// ---------------------------------------------------------------- in-process

InProcessCluster::InProcessCluster(std::vector<SiteShard> shards, const KernelSpec& kernel,
                                   MasterPolicy policy, std::uint16_t master_index)
    : Cluster(kernel), shards_(std::move(shards)) {
    if (shards_.empty()) throw std::invalid_argument("cluster requires at least one site");
    std::sort(shards_.begin(), shards_.end(),
              [](const SiteShard& a, const SiteShard& b) { return a.site_id < b.site_id; });
    for (auto& s : shards_) {
        if (s.data.n() < 2)
            throw std::invalid_argument("site " + std::to_string(s.site_id) + ": needs n >= 2");
        if (s.weight <= 0.0) s.weight = static_cast<double>(s.data.n());
        sizes_.emplace_back(s.site_id, static_cast<std::uint32_t>(s.data.n()));
    }
    if (policy == MasterPolicy::Largest) {
        master_pos_ = 0;
        for (std::size_t i = 1; i < shards_.size(); ++i)
            if (shards_[i].data.n() > shards_[master_pos_].data.n()) master_pos_ = i;
        // ties already resolved toward the smallest site_id by the sort
    } else {
        auto it = std::find_if(shards_.begin(), shards_.end(),
                               [&](const SiteShard& s) { return s.site_id == master_index; });
        if (it == shards_.end())
            throw std::invalid_argument("master_index does not name a site in the cluster");
        master_pos_ = static_cast<std::size_t>(it - shards_.begin());
    }
}

std::vector<SiteReply> InProcessCluster::round(const Eigen::VectorXd& beta, Purpose want) {
    BetaBroadcast msg{next_round_++, beta, want};
    const auto frame = encode(msg);
    std::vector<SiteReply> replies;
    replies.reserve(shards_.size());
    for (const auto& shard : shards_) {
        // run the full codec path so both backends move identical bytes
        const BetaBroadcast received = decode_beta_broadcast(frame);
        const auto reply_frame = encode(compute_site_reply(shard, kernel_, received));
        GradientMessage gm = decode_gradient_message(reply_frame, want);
        replies.push_back({gm.site_id, gm.n_local, std::move(gm.grad), gm.loss});
    }
    account_round(static_cast<std::size_t>(beta.size()), want);
    return replies;
}

std::unique_ptr<InProcessCluster> make_inprocess_cluster(std::vector<SiteShard> shards,
                                                         const KernelSpec& kernel,
                                                         MasterPolicy policy,
                                                         std::uint16_t master_index) {
    return std::make_unique<InProcessCluster>(std::move(shards), kernel, policy, master_index);
}

// -------------------------------------------------------------------- socket

namespace {

void write_exact(int fd, const std::uint8_t* data, std::size_t len) {
    while (len > 0) {
        const ssize_t k = ::send(fd, data, len, MSG_NOSIGNAL);
        if (k <= 0) throw std::runtime_error("transport: send failed: " + std::string(strerror(errno)));
        data += k;
        len -= static_cast<std::size_t>(k);
    }
}

bool read_exact(int fd, std::uint8_t* data, std::size_t len) {
    while (len > 0) {
        const ssize_t k = ::recv(fd, data, len, 0);
        if (k == 0) return false;  // peer closed
        if (k < 0) throw std::runtime_error("transport: recv failed: " + std::string(strerror(errno)));
        data += k;
        len -= static_cast<std::size_t>(k);
    }
    return true;
}

// Reads one framed message; returns empty on orderly shutdown before a frame.
std::vector<std::uint8_t> read_frame(int fd) {
    std::uint8_t hdr[4];
    if (!read_exact(fd, hdr, 4)) return {};
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(hdr[i]) << (8 * i);
    if (len > (1u << 28)) throw std::runtime_error("transport: implausible frame length");
    std::vector<std::uint8_t> buf(4 + len);
    std::memcpy(buf.data(), hdr, 4);
    if (!read_exact(fd, buf.data() + 4, len)) throw std::runtime_error("transport: truncated frame");
    return buf;
}

enum class Poll { Frame, Closed, Idle };

// Server-side frame read under a short receive timeout: an idle connection is
// not an error, only a chance to check the stop flag.
Poll poll_frame(int fd, std::vector<std::uint8_t>& out) {
    std::uint8_t first;
    const ssize_t k = ::recv(fd, &first, 1, 0);
    if (k == 0) return Poll::Closed;
    if (k < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) return Poll::Idle;
        throw std::runtime_error("transport: recv failed: " + std::string(strerror(errno)));
    }
    std::uint8_t hdr[4] = {first, 0, 0, 0};
    if (!read_exact(fd, hdr + 1, 3)) throw std::runtime_error("transport: truncated frame header");
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(hdr[i]) << (8 * i);
    if (len > (1u << 28)) throw std::runtime_error("transport: implausible frame length");
    out.assign(4 + len, 0);
    std::memcpy(out.data(), hdr, 4);
    if (!read_exact(fd, out.data() + 4, len)) throw std::runtime_error("transport: truncated frame");
    return Poll::Frame;
}

void set_timeout(int fd, int seconds) {
    timeval tv{seconds, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

}  // namespace

SiteServer::SiteServer(SiteShard shard, KernelSpec kernel, std::uint16_t port)
    : shard_(std::move(shard)), kernel_(kernel) {
    if (shard_.weight <= 0.0) shard_.weight = static_cast<double>(shard_.data.n());
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("SiteServer: socket() failed");
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(listen_fd_);
        throw std::runtime_error("SiteServer: bind failed on port " + std::to_string(port));
    }
    socklen_t alen = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
    port_ = ntohs(addr.sin_port);
    if (::listen(listen_fd_, 4) != 0) {
        ::close(listen_fd_);
        throw std::runtime_error("SiteServer: listen failed");
    }
    thread_ = std::thread([this] { serve(); });
}

SiteServer::~SiteServer() { stop(); }

void SiteServer::stop() {
    if (stopping_.exchange(true)) {
        if (thread_.joinable()) thread_.join();
        return;
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (thread_.joinable()) thread_.join();
}

void SiteServer::serve() {
    while (!stopping_.load()) {
        const int conn = ::accept(listen_fd_, nullptr, nullptr);
        if (conn < 0) break;  // listener closed
        set_timeout(conn, 1);
        try {
            while (!stopping_.load()) {
                std::vector<std::uint8_t> frame;
                const Poll st = poll_frame(conn, frame);
                if (st == Poll::Closed) break;
                if (st == Poll::Idle) continue;
                const BetaBroadcast msg = decode_beta_broadcast(frame);
                const auto reply = encode(compute_site_reply(shard_, kernel_, msg));
                write_exact(conn, reply.data(), reply.size());
            }
        } catch (const std::exception&) {
            // drop the connection; the master reports the failing site
        }
        ::close(conn);
    }
}

SocketCluster::SocketCluster(std::vector<std::pair<std::string, std::uint16_t>> addresses,
                             SiteShard master_shard, const KernelSpec& kernel, int timeout_seconds)
    : Cluster(kernel), master_shard_(std::move(master_shard)) {
    if (addresses.empty()) throw std::invalid_argument("SocketCluster: no site addresses");
    for (const auto& [host, port] : addresses) {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
            throw std::runtime_error("SocketCluster: cannot resolve " + host);
        int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
            ::freeaddrinfo(res);
            if (fd >= 0) ::close(fd);
            throw std::runtime_error("SocketCluster: cannot connect to " + host + ":" +
                                     std::to_string(port));
        }
        ::freeaddrinfo(res);
        int yes = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof(yes));
        set_timeout(fd, timeout_seconds);
        fds_.push_back(fd);
    }
    sizes_.assign(fds_.size(), {0, 0});  // learned from the first replies
}

SocketCluster::~SocketCluster() {
    for (int fd : fds_) ::close(fd);
}

std::vector<SiteReply> SocketCluster::round(const Eigen::VectorXd& beta, Purpose want) {
    BetaBroadcast msg{next_round_++, beta, want};
    const auto frame = encode(msg);
    for (std::size_t i = 0; i < fds_.size(); ++i) {
        try {
            write_exact(fds_[i], frame.data(), frame.size());
        } catch (const std::exception& e) {
            throw std::runtime_error("site connection " + std::to_string(i) + ": " + e.what());
        }
    }
    std::vector<SiteReply> replies;
    replies.reserve(fds_.size());
    for (std::size_t i = 0; i < fds_.size(); ++i) {
        std::vector<std::uint8_t> reply_frame;
        try {
            reply_frame = read_frame(fds_[i]);
        } catch (const std::exception& e) {
            throw std::runtime_error("site connection " + std::to_string(i) + ": " + e.what());
        }
        if (reply_frame.empty())
            throw std::runtime_error("site connection " + std::to_string(i) + ": disconnected");
        GradientMessage gm = decode_gradient_message(reply_frame, want);
        if (gm.round != msg.round)
            throw std::runtime_error("site " + std::to_string(gm.site_id) + ": stale round");
        sizes_[i] = {gm.site_id, gm.n_local};
        replies.push_back({gm.site_id, gm.n_local, std::move(gm.grad), gm.loss});
    }
    std::sort(replies.begin(), replies.end(),
              [](const SiteReply& a, const SiteReply& b) { return a.site_id < b.site_id; });
    account_round(static_cast<std::size_t>(beta.size()), want);
    return replies;
}

}  // namespace dcrr
