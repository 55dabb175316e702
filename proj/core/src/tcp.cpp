#include "pqkd/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <future>
#include <mutex>
#include <system_error>
#include <thread>

namespace pqkd {

namespace {

[[noreturn]] void throw_errno(const char* what) { throw std::system_error(errno, std::generic_category(), what); }

addrinfo* resolve(const PeerAddress& a, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = passive ? AI_PASSIVE : 0;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(a.port);
  const int rc = getaddrinfo(a.host.empty() ? nullptr : a.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) {
    throw ConnectionLost("cannot resolve " + a.host + ": " + gai_strerror(rc));
  }
  return res;
}

class TcpEndpoint final : public Endpoint {
 public:
  explicit TcpEndpoint(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~TcpEndpoint() override { close(); }

  void send(const ClassicalMessage& m) override {
    const Bytes frame = encode(m);
    std::lock_guard lock(send_mu_);
    std::size_t off = 0;
    while (off < frame.size()) {
      const ssize_t n = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) {
          continue;
        }
        throw ConnectionLost(std::string("send failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  ClassicalMessage receive() override {
    std::lock_guard lock(recv_mu_);
    std::array<std::uint8_t, 65536> buf{};
    while (true) {
      if (auto m = reader_.next()) {
        return std::move(*m);
      }
      const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
      if (n == 0) {
        throw ConnectionLost("peer closed the connection");
      }
      if (n < 0) {
        if (errno == EINTR) {
          continue;
        }
        throw ConnectionLost(std::string("recv failed: ") + std::strerror(errno));
      }
      reader_.feed(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
    }
  }

  void close() override {
    std::lock_guard lock(close_mu_);
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
  std::mutex send_mu_;
  std::mutex recv_mu_;
  std::mutex close_mu_;
  FrameReader reader_;
};

}  // namespace

PeerAddress parse_peer_address(const std::string& text) {
  PeerAddress a;
  const auto colon = text.rfind(':');
  a.host = text.substr(0, colon);
  if (colon != std::string::npos) {
    const std::string port = text.substr(colon + 1);
    unsigned value = 0;
    const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc() || ptr != port.data() + port.size() || value > 65535) {
      throw std::invalid_argument("bad port in peer address: " + text);
    }
    a.port = static_cast<std::uint16_t>(value);
  }
  if (a.host.empty()) {
    throw std::invalid_argument("peer address needs a host: " + text);
  }
  return a;
}

TcpListener::TcpListener(const PeerAddress& bind_to) {
  addrinfo* res = resolve(bind_to, true);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    freeaddrinfo(res);
    throw_errno("socket");
  }
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, res->ai_addr, res->ai_addrlen) < 0 || ::listen(fd_, 1) < 0) {
    const int err = errno;
    freeaddrinfo(res);
    ::close(fd_);
    throw std::system_error(err, std::generic_category(), "bind/listen " + bind_to.host);
  }
  freeaddrinfo(res);
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) {
    ::close(fd_);
  }
}

std::unique_ptr<Endpoint> TcpListener::accept(std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (rc == 0) {
    throw ConnectionLost("no peer connected within the timeout");
  }
  if (rc < 0) {
    throw ConnectionLost(std::string("poll failed: ") + std::strerror(errno));
  }
  const int conn = ::accept(fd_, nullptr, nullptr);
  if (conn < 0) {
    throw ConnectionLost(std::string("accept failed: ") + std::strerror(errno));
  }
  return std::make_unique<TcpEndpoint>(conn);
}

std::unique_ptr<Endpoint> tcp_connect(const PeerAddress& peer, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  addrinfo* res = resolve(peer, false);
  while (true) {
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
      freeaddrinfo(res);
      throw_errno("socket");
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
      freeaddrinfo(res);
      return std::make_unique<TcpEndpoint>(fd);
    }
    const int err = errno;
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      freeaddrinfo(res);
      throw ConnectionLost("cannot connect to " + peer.host + ":" + std::to_string(peer.port) + ": " +
                           std::strerror(err));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds{50});
  }
}

EndpointPair socket_pair(const std::string& host) {
  TcpListener listener(PeerAddress{host, 0});
  auto accepted = std::async(std::launch::async, [&] { return listener.accept(); });
  auto connected = tcp_connect(PeerAddress{host, listener.port()});
  return {accepted.get(), std::move(connected)};
}

}  // namespace pqkd
