#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <string>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include "sope/protocol.hpp"

namespace sope {

// In-process transport with the exact same framing as TCP; used by tests and
// the bench harness.
class LoopbackChannel {
public:
    class Endpoint final : public ByteStream {
    public:
        Endpoint(std::shared_ptr<LoopbackChannel> chan, int side)
            : chan_(std::move(chan)), side_(side) {}

        void send(std::span<const std::uint8_t> data) override {
            auto& q = side_ == 0 ? chan_->a_to_b_ : chan_->b_to_a_;
            std::lock_guard lock(chan_->mutex_);
            require(!chan_->closed_, Errc::io, "channel closed");
            q.insert(q.end(), data.begin(), data.end());
            chan_->cv_.notify_all();
        }

        bool recv_exact(std::span<std::uint8_t> out) override {
            auto& q = side_ == 0 ? chan_->b_to_a_ : chan_->a_to_b_;
            std::unique_lock lock(chan_->mutex_);
            chan_->cv_.wait(lock, [&] { return q.size() >= out.size() || chan_->closed_; });
            if (q.size() < out.size()) {
                require(q.empty(), Errc::protocol, "truncated stream");
                return false;
            }
            std::copy(q.begin(), q.begin() + out.size(), out.begin());
            q.erase(q.begin(), q.begin() + out.size());
            return true;
        }

        void close() override {
            std::lock_guard lock(chan_->mutex_);
            chan_->closed_ = true;
            chan_->cv_.notify_all();
        }

    private:
        std::shared_ptr<LoopbackChannel> chan_;
        int side_;
    };

    static std::pair<std::unique_ptr<Endpoint>, std::unique_ptr<Endpoint>> make() {
        auto chan = std::make_shared<LoopbackChannel>();
        return {std::make_unique<Endpoint>(chan, 0), std::make_unique<Endpoint>(chan, 1)};
    }

private:
    friend class Endpoint;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::uint8_t> a_to_b_;
    std::deque<std::uint8_t> b_to_a_;
    bool closed_ = false;
};

class TcpStream final : public ByteStream {
public:
    explicit TcpStream(int fd) : fd_(fd) {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }

    ~TcpStream() override { close(); }

    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    void send(std::span<const std::uint8_t> data) override {
        std::size_t off = 0;
        while (off < data.size()) {
            ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            require(n > 0, Errc::io, "socket send failed");
            off += static_cast<std::size_t>(n);
        }
    }

    bool recv_exact(std::span<std::uint8_t> out) override {
        std::size_t off = 0;
        while (off < out.size()) {
            ssize_t n = ::recv(fd_, out.data() + off, out.size() - off, 0);
            if (n == 0) {
                require(off == 0, Errc::protocol, "truncated stream");
                return false;
            }
            require(n > 0, Errc::io, "socket recv failed");
            off += static_cast<std::size_t>(n);
        }
        return true;
    }

    void close() override {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_ = -1;
};

inline std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr) {
    auto colon = addr.rfind(':');
    require(colon != std::string::npos && colon + 1 < addr.size(), Errc::bad_param,
            "address must be host:port");
    int port = std::stoi(addr.substr(colon + 1));
    require(port > 0 && port < 65536, Errc::bad_param, "port out of range");
    return {addr.substr(0, colon), static_cast<std::uint16_t>(port)};
}

class TcpListener {
public:
    explicit TcpListener(const std::string& addr) {
        auto [host, port] = split_host_port(addr);
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        require(fd_ >= 0, Errc::io, "socket() failed");
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(port);
        require(::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) == 1, Errc::bad_param,
                "listen host must be an IPv4 address");
        require(::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0, Errc::io,
                "bind failed on " + addr);
        require(::listen(fd_, 16) == 0, Errc::io, "listen failed");
    }

    ~TcpListener() { close(); }

    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::unique_ptr<TcpStream> accept() {
        int fd = ::accept(fd_, nullptr, nullptr);
        if (fd < 0) return nullptr;
        return std::make_unique<TcpStream>(fd);
    }

    std::uint16_t port() const {
        sockaddr_in sa{};
        socklen_t len = sizeof(sa);
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len);
        return ntohs(sa.sin_port);
    }

    void close() {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_ = -1;
};

inline std::unique_ptr<TcpStream> connect_tcp(const std::string& addr) {
    auto [host, port] = split_host_port(addr);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    require(::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) == 0,
            Errc::io, "cannot resolve " + host);
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    require(fd >= 0, Errc::io, "cannot connect to " + addr);
    return std::make_unique<TcpStream>(fd);
}

}  // namespace sope
