#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "dcrr/rank_loss.hpp"
#include "dcrr/wire.hpp"

namespace dcrr {

struct SiteShard {
    std::uint16_t site_id = 0;
    DataBlock data;
    double weight = 0.0;  // defaults to n when left at 0
};

struct CommStats {
    std::int64_t rounds = 0;           // all synchronous rounds
    std::int64_t gradient_rounds = 0;  // rounds where gradients were requested
    std::int64_t loss_rounds = 0;      // loss-only rounds (DHBIC scoring)
    std::int64_t bytes_down = 0;       // master -> sites
    std::int64_t bytes_up = 0;         // sites -> master

    CommStats operator-(const CommStats& o) const {
        return {rounds - o.rounds, gradient_rounds - o.gradient_rounds,
                loss_rounds - o.loss_rounds, bytes_down - o.bytes_down, bytes_up - o.bytes_up};
    }
};

struct SiteReply {
    std::uint16_t site_id = 0;
    std::uint32_t n_local = 0;
    std::optional<Eigen::VectorXd> grad;
    std::optional<double> loss;
};

// Site-side handler: decode a broadcast, evaluate the local CRR loss and/or
// gradient, encode the reply.
GradientMessage compute_site_reply(const SiteShard& shard, const KernelSpec& kernel,
                                   const BetaBroadcast& msg);

// Master-side view of the cluster. One round() call is one synchronous
// broadcast followed by one reply from every site; replies come back sorted
// by site_id regardless of arrival order.
class Cluster {
public:
    virtual ~Cluster() = default;

    virtual std::vector<SiteReply> round(const Eigen::VectorXd& beta, Purpose want) = 0;
    virtual std::size_t num_sites() const = 0;
    virtual const std::vector<std::pair<std::uint16_t, std::uint32_t>>& site_sizes() const = 0;

    // The master's shard, held locally: the surrogate loss needs its raw data.
    virtual const DataBlock& master_block() const = 0;
    virtual std::uint16_t master_id() const = 0;

    const KernelSpec& kernel() const { return kernel_; }
    CommStats& stats() { return stats_; }
    const CommStats& stats() const { return stats_; }

protected:
    explicit Cluster(const KernelSpec& k) : kernel_(k) {}
    void account_round(std::size_t p, Purpose want);

    KernelSpec kernel_;
    CommStats stats_;
    std::uint32_t next_round_ = 0;
};

enum class MasterPolicy { Largest, Index };

// All shards in memory; messages still pass through the wire codec so both
// backends run the identical byte path.
class InProcessCluster : public Cluster {
public:
    InProcessCluster(std::vector<SiteShard> shards, const KernelSpec& kernel,
                     MasterPolicy policy = MasterPolicy::Largest, std::uint16_t master_index = 0);

    std::vector<SiteReply> round(const Eigen::VectorXd& beta, Purpose want) override;
    std::size_t num_sites() const override { return shards_.size(); }
    const std::vector<std::pair<std::uint16_t, std::uint32_t>>& site_sizes() const override {
        return sizes_;
    }
    const DataBlock& master_block() const override { return shards_[master_pos_].data; }
    std::uint16_t master_id() const override { return shards_[master_pos_].site_id; }

    const std::vector<SiteShard>& shards() const { return shards_; }

private:
    std::vector<SiteShard> shards_;  // sorted by site_id
    std::vector<std::pair<std::uint16_t, std::uint32_t>> sizes_;
    std::size_t master_pos_ = 0;
};

// Serves one shard over a TCP port: accept, then answer framed broadcasts
// until the peer disconnects.
class SiteServer {
public:
    SiteServer(SiteShard shard, KernelSpec kernel, std::uint16_t port = 0);
    ~SiteServer();

    SiteServer(const SiteServer&) = delete;
    SiteServer& operator=(const SiteServer&) = delete;

    std::uint16_t port() const { return port_; }
    void stop();

private:
    void serve();

    SiteShard shard_;
    KernelSpec kernel_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread thread_;
};

// Master side of the socket backend. Connects to every site address; the
// master's own shard is additionally supplied so the surrogate loss can be
// evaluated locally.
class SocketCluster : public Cluster {
public:
    SocketCluster(std::vector<std::pair<std::string, std::uint16_t>> addresses,
                  SiteShard master_shard, const KernelSpec& kernel,
                  int timeout_seconds = 60);
    ~SocketCluster();

    SocketCluster(const SocketCluster&) = delete;
    SocketCluster& operator=(const SocketCluster&) = delete;

    std::vector<SiteReply> round(const Eigen::VectorXd& beta, Purpose want) override;
    std::size_t num_sites() const override { return fds_.size(); }
    const std::vector<std::pair<std::uint16_t, std::uint32_t>>& site_sizes() const override {
        return sizes_;
    }
    const DataBlock& master_block() const override { return master_shard_.data; }
    std::uint16_t master_id() const override { return master_shard_.site_id; }

private:
    std::vector<int> fds_;
    std::vector<std::pair<std::uint16_t, std::uint32_t>> sizes_;
    SiteShard master_shard_;
};

std::unique_ptr<InProcessCluster> make_inprocess_cluster(std::vector<SiteShard> shards,
                                                         const KernelSpec& kernel,
                                                         MasterPolicy policy = MasterPolicy::Largest,
                                                         std::uint16_t master_index = 0);

}  // namespace dcrr
