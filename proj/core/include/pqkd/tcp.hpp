/**
 * @file tcp.hpp
 * @brief TCP endpoints for running Alice and Bob as separate processes.
 */

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "pqkd/transport.hpp"

namespace pqkd {

struct PeerAddress {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPort;
};

/// Parses "host:port" or "host" (default port). Throws std::invalid_argument.
PeerAddress parse_peer_address(const std::string& text);

class TcpListener {
 public:
  /// Binds and listens; port 0 picks a free port. Throws std::system_error.
  explicit TcpListener(const PeerAddress& bind_to);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  [[nodiscard]] std::uint16_t port() const { return port_; }
  /// Blocks for one connection. Throws ConnectionLost after the timeout.
  std::unique_ptr<Endpoint> accept(std::chrono::milliseconds timeout = std::chrono::milliseconds{60000});

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Connects, retrying refused attempts until the timeout. Throws ConnectionLost.
std::unique_ptr<Endpoint> tcp_connect(const PeerAddress& peer,
                                      std::chrono::milliseconds timeout = std::chrono::milliseconds{10000});

/// Two connected TCP endpoints over the given host: (listener side, connector side).
EndpointPair socket_pair(const std::string& host = "127.0.0.1");

}  // namespace pqkd
