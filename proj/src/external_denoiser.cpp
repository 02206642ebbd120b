#include "pnprecon/external_denoiser.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

namespace pnp {

namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return left.count() > 0 ? static_cast<int>(left.count()) : 0;
}

void wait_ready(int fd, short events, Clock::time_point deadline) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, remaining_ms(deadline));
    if (rc > 0) return;
    if (rc == 0) throw DenoiserTimeout("external denoiser timed out");
    if (errno != EINTR) throw EndpointUnavailable(std::string("poll failed: ") + std::strerror(errno));
  }
}

}  // namespace

ExternalDenoiserClient::ExternalDenoiserClient(std::string endpoint, double timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_seconds_(timeout_seconds) {
  ignore_sigpipe();
  if (endpoint_.empty()) throw EndpointUnavailable("external denoiser endpoint is empty");

  if (endpoint_.rfind("unix:", 0) == 0) {
    const std::string path = endpoint_.substr(5);
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof(addr.sun_path)) throw EndpointUnavailable("socket path too long");
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw EndpointUnavailable("socket() failed");
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd);
      throw EndpointUnavailable("cannot connect to " + path + ": " + std::strerror(errno));
    }
    read_fd_ = fd;
    write_fd_ = ::dup(fd);
    return;
  }

  int to_child[2], from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw EndpointUnavailable("pipe() failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw EndpointUnavailable("pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    throw EndpointUnavailable("fork() failed");
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", endpoint_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  write_fd_ = to_child[1];
  read_fd_ = from_child[0];
  child_pid_ = pid;
}

ExternalDenoiserClient::~ExternalDenoiserClient() { close_connection(); }

void ExternalDenoiserClient::close_connection() {
  if (write_fd_ >= 0) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  write_fd_ = read_fd_ = -1;
  if (child_pid_ > 0) {
    // Closing stdin asks a well-behaved server to exit; give it a moment.
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(child_pid_, &status, WNOHANG) == child_pid_) {
        child_pid_ = -1;
        return;
      }
      ::usleep(2000);
    }
    ::kill(child_pid_, SIGKILL);
    ::waitpid(child_pid_, &status, 0);
    child_pid_ = -1;
  }
}

void ExternalDenoiserClient::write_all(const std::vector<std::uint8_t>& bytes,
                                       Clock::time_point deadline) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    wait_ready(write_fd_, POLLOUT, deadline);
    const ssize_t n = ::write(write_fd_, bytes.data() + off, bytes.size() - off);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw EndpointUnavailable(std::string("write to denoiser failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

void ExternalDenoiserClient::read_exact(std::span<std::uint8_t> out, Clock::time_point deadline) {
  std::size_t off = 0;
  while (off < out.size()) {
    wait_ready(read_fd_, POLLIN, deadline);
    const ssize_t n = ::read(read_fd_, out.data() + off, out.size() - off);
    if (n == 0) throw EndpointUnavailable("external denoiser closed the connection");
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw EndpointUnavailable(std::string("read from denoiser failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

ComplexImage ExternalDenoiserClient::denoise(const ComplexImage& r, double tau) {
  if (!connected()) throw EndpointUnavailable("external denoiser connection is closed");
  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout_seconds_));
  try {
    write_all(wire::encode(wire::make_request(r, tau)), deadline);
    const auto resp = wire::decode_response(
        [&](std::span<std::uint8_t> out) { read_exact(out, deadline); }, r.shape());
    if (!resp.ok) throw ServerError("external denoiser reported: " + resp.message);
    return wire::to_image(r.shape(), resp);
  } catch (const ServerError&) {
    throw;
  } catch (...) {
    close_connection();
    throw;
  }
}

ComplexImage external_denoise(const std::string& endpoint, const ComplexImage& r, double tau,
                              double timeout_seconds) {
  ExternalDenoiserClient client(endpoint, timeout_seconds);
  return client.denoise(r, tau);
}

}  // namespace pnp
