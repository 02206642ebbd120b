#pragma once

#include <chrono>
#include <stdexcept>
#include <string>

#include "pnprecon/image.hpp"
#include "pnprecon/wire_protocol.hpp"

namespace pnp {

/// The server could not be started or went away. Retryable: a fresh client
/// spawns a new server.
class EndpointUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DenoiserTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The server answered with status=1.
class ServerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Client side of the external denoiser protocol.
///
/// The endpoint is either a shell command, started once and spoken to over
/// its stdin/stdout, or "unix:<path>" for a listening local socket. One client
/// owns one connection; give each worker its own client. Any protocol
/// violation or timeout closes the connection, after which every call throws
/// EndpointUnavailable. SIGPIPE is ignored process-wide once a client exists.
class ExternalDenoiserClient {
 public:
  ExternalDenoiserClient(std::string endpoint, double timeout_seconds);
  ~ExternalDenoiserClient();
  ExternalDenoiserClient(const ExternalDenoiserClient&) = delete;
  ExternalDenoiserClient& operator=(const ExternalDenoiserClient&) = delete;

  ComplexImage denoise(const ComplexImage& r, double tau);

  [[nodiscard]] bool connected() const { return write_fd_ >= 0; }

 private:
  void close_connection();
  void write_all(const std::vector<std::uint8_t>& bytes,
                 std::chrono::steady_clock::time_point deadline);
  void read_exact(std::span<std::uint8_t> out, std::chrono::steady_clock::time_point deadline);

  std::string endpoint_;
  double timeout_seconds_;
  int write_fd_ = -1;
  int read_fd_ = -1;
  int child_pid_ = -1;
};

/// One-shot helper: spawn, denoise once, shut down.
ComplexImage external_denoise(const std::string& endpoint, const ComplexImage& r, double tau,
                              double timeout_seconds = 30.0);

}  // namespace pnp
