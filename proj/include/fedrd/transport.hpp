#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fedrd/wire.hpp"

namespace fedrd {

inline std::chrono::milliseconds default_round_timeout() {
  if (const char* env = std::getenv("FEDRD_TIMEOUT_SECS")) {
    char* end = nullptr;
    double secs = std::strtod(env, &end);
    if (end != env && secs > 0) return std::chrono::milliseconds(static_cast<long>(secs * 1000));
  }
  return std::chrono::seconds(60);
}

// Coordinator side of a carrier: gather one round's site payloads (barrier
// semantics -- returns only once all `expected` are present), then optionally
// broadcast one reply to every site.
class CoordinatorChannel {
 public:
  virtual ~CoordinatorChannel() = default;
  virtual std::vector<std::string> collect(int round, MsgType type, int expected) = 0;
  virtual void broadcast(int round, MsgType type, const std::string& bytes) = 0;
  virtual void close_round() {}
};

class SiteChannel {
 public:
  virtual ~SiteChannel() = default;
  virtual void send(int round, MsgType type, const std::string& site_id,
                    const std::string& bytes) = 0;
  virtual std::string await_broadcast(int round, MsgType type) = 0;
};

// ---------------------------------------------------------------------------
// Shared-directory carrier: one file per message named
//   <dir>/<study>/<round>_<MSG_TYPE>_<site>.msg
// written atomically via rename; readers poll at 50 ms.
// ---------------------------------------------------------------------------

namespace transport_detail {

constexpr auto kPollInterval = std::chrono::milliseconds(50);

inline std::string msg_file_name(int round, MsgType type, const std::string& site) {
  return std::to_string(round) + "_" + msg_type_name(type) + "_" + site + ".msg";
}

inline void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path.parent_path() / (".tmp_" + path.filename().string());
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw TransportError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw TransportError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TransportError("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace transport_detail

class FileCoordinatorChannel : public CoordinatorChannel {
 public:
  FileCoordinatorChannel(std::filesystem::path dir, std::string study_id,
                         std::chrono::milliseconds timeout = default_round_timeout())
      : dir_(std::move(dir) / study_id), timeout_(timeout) {
    std::filesystem::create_directories(dir_);
  }

  std::vector<std::string> collect(int round, MsgType type, int expected) override {
    const std::string prefix = std::to_string(round) + "_" + std::string(msg_type_name(type)) + "_";
    const std::string broadcast_name = transport_detail::msg_file_name(round, type, "coordinator");
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
      std::vector<std::filesystem::path> found;
      for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind(prefix, 0) == 0 && name.size() > 4 &&
            name.compare(name.size() - 4, 4, ".msg") == 0 && name != broadcast_name)
          found.push_back(entry.path());
      }
      if (static_cast<int>(found.size()) > expected)
        throw ProtocolError("more round-" + std::to_string(round) + " messages than the " +
                            std::to_string(expected) + " expected sites");
      if (static_cast<int>(found.size()) == expected) {
        std::vector<std::string> out;
        out.reserve(found.size());
        for (const auto& p : found) out.push_back(transport_detail::read_file(p));
        return out;
      }
      if (std::chrono::steady_clock::now() >= deadline)
        throw TimeoutError("timed out waiting for round " + std::to_string(round) + " " +
                           msg_type_name(type) + " (have " + std::to_string(found.size()) +
                           " of " + std::to_string(expected) + ")");
      std::this_thread::sleep_for(transport_detail::kPollInterval);
    }
  }

  void broadcast(int round, MsgType type, const std::string& bytes) override {
    transport_detail::atomic_write(dir_ / transport_detail::msg_file_name(round, type, "coordinator"),
                                   bytes);
  }

 private:
  std::filesystem::path dir_;
  std::chrono::milliseconds timeout_;
};

class FileSiteChannel : public SiteChannel {
 public:
  FileSiteChannel(std::filesystem::path dir, std::string study_id,
                  std::chrono::milliseconds timeout = default_round_timeout())
      : dir_(std::move(dir) / study_id), timeout_(timeout) {
    std::filesystem::create_directories(dir_);
  }

  void send(int round, MsgType type, const std::string& site_id,
            const std::string& bytes) override {
    transport_detail::atomic_write(dir_ / transport_detail::msg_file_name(round, type, site_id),
                                   bytes);
  }

  std::string await_broadcast(int round, MsgType type) override {
    const std::filesystem::path path =
        dir_ / transport_detail::msg_file_name(round, type, "coordinator");
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (!std::filesystem::exists(path)) {
      if (std::chrono::steady_clock::now() >= deadline)
        throw TimeoutError("timed out waiting for broadcast " + path.filename().string());
      std::this_thread::sleep_for(transport_detail::kPollInterval);
    }
    return transport_detail::read_file(path);
  }

 private:
  std::filesystem::path dir_;
  std::chrono::milliseconds timeout_;
};

// ---------------------------------------------------------------------------
// TCP carrier: the identical text messages framed by a 4-byte big-endian
// length prefix. The coordinator listens; sites connect once per round, send
// their payload, and (in broadcast rounds) read the reply on the same
// connection.
// ---------------------------------------------------------------------------

namespace transport_detail {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept {
    reset();
    fd_ = o.fd_;
    o.fd_ = -1;
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline void wait_readable(int fd, std::chrono::steady_clock::time_point deadline,
                          const std::string& what) {
  while (true) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) throw TimeoutError("timed out waiting for " + what);
    pollfd pfd{fd, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError("poll failed: " + std::string(std::strerror(errno)));
    }
    if (rc > 0) return;
  }
}

inline void write_all(int fd, const void* data, size_t len) {
  const char* ptr = static_cast<const char*>(data);
  while (len > 0) {
    ssize_t n = ::send(fd, ptr, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("send failed: " + std::string(std::strerror(errno)));
    }
    ptr += n;
    len -= static_cast<size_t>(n);
  }
}

inline void read_all(int fd, void* data, size_t len,
                     std::chrono::steady_clock::time_point deadline, const std::string& what) {
  char* ptr = static_cast<char*>(data);
  while (len > 0) {
    wait_readable(fd, deadline, what);
    ssize_t n = ::recv(fd, ptr, len, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("recv failed: " + std::string(std::strerror(errno)));
    }
    if (n == 0) throw TransportError("connection closed while reading " + what);
    ptr += n;
    len -= static_cast<size_t>(n);
  }
}

inline void write_framed(int fd, const std::string& bytes) {
  uint32_t len = htonl(static_cast<uint32_t>(bytes.size()));
  write_all(fd, &len, 4);
  write_all(fd, bytes.data(), bytes.size());
}

inline std::string read_framed(int fd, std::chrono::steady_clock::time_point deadline,
                               const std::string& what) {
  uint32_t len_be = 0;
  read_all(fd, &len_be, 4, deadline, what);
  uint32_t len = ntohl(len_be);
  if (len > (1u << 30)) throw ProtocolError("implausible message length " + std::to_string(len));
  std::string bytes(len, '\0');
  read_all(fd, bytes.data(), len, deadline, what);
  return bytes;
}

inline sockaddr_in resolve(const std::string& host, uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    addr.sin_addr.s_addr = INADDR_ANY;
    return addr;
  }
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
    throw TransportError("cannot resolve host " + host);
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

}  // namespace transport_detail

class TcpCoordinatorChannel : public CoordinatorChannel {
 public:
  TcpCoordinatorChannel(const std::string& host, uint16_t port,
                        std::chrono::milliseconds timeout = default_round_timeout())
      : timeout_(timeout) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("socket: " + std::string(std::strerror(errno)));
    listener_ = transport_detail::Socket(fd);
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = transport_detail::resolve(host, port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
      throw TransportError("bind " + host + ":" + std::to_string(port) + ": " +
                           std::strerror(errno));
    if (::listen(fd, 64) != 0) throw TransportError("listen: " + std::string(std::strerror(errno)));
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
  }

  uint16_t port() const { return port_; }

  std::vector<std::string> collect(int round, MsgType type, int expected) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    const std::string what = std::string("round ") + std::to_string(round) + " " +
                             msg_type_name(type) + " messages";
    std::vector<std::string> out;
    while (static_cast<int>(out.size()) < expected) {
      transport_detail::wait_readable(listener_.fd(), deadline, what);
      int fd = ::accept(listener_.fd(), nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        throw TransportError("accept failed: " + std::string(std::strerror(errno)));
      }
      transport_detail::Socket conn(fd);
      out.push_back(transport_detail::read_framed(fd, deadline, what));
      round_conns_.push_back(std::move(conn));
    }
    return out;
  }

  void broadcast(int /*round*/, MsgType /*type*/, const std::string& bytes) override {
    for (const auto& conn : round_conns_) transport_detail::write_framed(conn.fd(), bytes);
    round_conns_.clear();
  }

  void close_round() override { round_conns_.clear(); }

 private:
  transport_detail::Socket listener_;
  std::vector<transport_detail::Socket> round_conns_;
  std::chrono::milliseconds timeout_;
  uint16_t port_ = 0;
};

class TcpSiteChannel : public SiteChannel {
 public:
  TcpSiteChannel(std::string host, uint16_t port,
                 std::chrono::milliseconds timeout = default_round_timeout())
      : host_(std::move(host)), port_(port), timeout_(timeout) {}

  void send(int /*round*/, MsgType /*type*/, const std::string& /*site_id*/,
            const std::string& bytes) override {
    conn_ = connect_with_retry();
    transport_detail::write_framed(conn_.fd(), bytes);
  }

  std::string await_broadcast(int round, MsgType type) override {
    if (!conn_.valid()) throw ProtocolError("await_broadcast without a pending round connection");
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    std::string bytes = transport_detail::read_framed(
        conn_.fd(), deadline,
        std::string("round ") + std::to_string(round) + " " + msg_type_name(type) + " broadcast");
    conn_.reset();
    return bytes;
  }

 private:
  transport_detail::Socket connect_with_retry() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    sockaddr_in addr = transport_detail::resolve(host_, port_);
    while (true) {
      int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw TransportError("socket: " + std::string(std::strerror(errno)));
      transport_detail::Socket s(fd);
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) return s;
      if (std::chrono::steady_clock::now() >= deadline)
        throw TimeoutError("cannot connect to coordinator at " + host_ + ":" +
                           std::to_string(port_));
      std::this_thread::sleep_for(transport_detail::kPollInterval);
    }
  }

  std::string host_;
  uint16_t port_;
  std::chrono::milliseconds timeout_;
  transport_detail::Socket conn_;
};

// ---------------------------------------------------------------------------
// Protocol drivers
// ---------------------------------------------------------------------------

struct CoordinatorResult {
  FitResult fit;
  std::string fit_message;
  int messages_received = 0;
  int broadcasts_sent = 0;
};

namespace transport_detail {

template <typename T>
std::vector<T> decode_round(const std::vector<std::string>& raw, MsgType type,
                            const std::string& study_id, std::set<std::string>* seen_sites) {
  std::vector<T> out;
  out.reserve(raw.size());
  for (const std::string& bytes : raw) {
    auto [env, payload] = decode_message(bytes);
    if (env.msg_type != type)
      throw ProtocolError(std::string("expected ") + msg_type_name(type) + ", got " +
                          msg_type_name(env.msg_type) + " from site " + env.site_id);
    if (env.study_id != study_id)
      throw ProtocolError("study mismatch: expected " + study_id + ", got " + env.study_id);
    if (seen_sites && !seen_sites->insert(env.site_id).second)
      throw DuplicateSite("duplicate payload from site " + env.site_id);
    T* typed = std::get_if<T>(&payload);
    if (!typed) throw ProtocolError("payload type mismatch");  // unreachable after decode
    out.push_back(std::move(*typed));
  }
  return out;
}

inline void require_same_sites(const std::set<std::string>& round1, std::set<std::string> later,
                               int round) {
  for (const std::string& s : round1)
    if (!later.count(s))
      throw MissingSite("site " + s + " missing from round " + std::to_string(round));
}

}  // namespace transport_detail

// Drive the coordinator role to completion over any carrier and return the
// assembled fit together with its encoded FIT message.
inline CoordinatorResult run_coordinator(CoordinatorChannel& chan, Method method,
                                         int expected_sites, const std::string& study_id) {
  if (expected_sites < 1) throw Error("run_coordinator: expected_sites must be >= 1");
  CoordinatorResult result;

  if (method == Method::fedrd_s) {
    auto raw = chan.collect(1, MsgType::SUMMARY_S, expected_sites);
    result.messages_received += static_cast<int>(raw.size());
    std::set<std::string> sites;
    auto summaries =
        transport_detail::decode_round<SiteSummaryS>(raw, MsgType::SUMMARY_S, study_id, &sites);
    chan.close_round();
    result.fit = coordinator_assemble_s(std::move(summaries));
  } else if (method == Method::fedrd_u) {
    auto raw1 = chan.collect(1, MsgType::TIMES, expected_sites);
    result.messages_received += static_cast<int>(raw1.size());
    std::set<std::string> sites1;
    auto times = transport_detail::decode_round<SortedTimes>(raw1, MsgType::TIMES, study_id, &sites1);
    TimeGrid grid = coordinator_merge_times(times);
    chan.broadcast(1, MsgType::GRID,
                   encode_message({MsgType::GRID, study_id, "coordinator", 1}, grid));
    ++result.broadcasts_sent;

    auto raw2 = chan.collect(2, MsgType::RISK_AGG, expected_sites);
    result.messages_received += static_cast<int>(raw2.size());
    std::set<std::string> sites2;
    auto aggs =
        transport_detail::decode_round<RiskAggregate>(raw2, MsgType::RISK_AGG, study_id, &sites2);
    transport_detail::require_same_sites(sites1, sites2, 2);
    XbarSeries xb = coordinator_xbar(std::move(aggs), grid);
    chan.broadcast(2, MsgType::XBAR,
                   encode_message({MsgType::XBAR, study_id, "coordinator", 2}, xb));
    ++result.broadcasts_sent;

    auto raw3 = chan.collect(3, MsgType::CONTRIB_U, expected_sites);
    result.messages_received += static_cast<int>(raw3.size());
    std::set<std::string> sites3;
    auto contribs = transport_detail::decode_round<SiteContributionU>(raw3, MsgType::CONTRIB_U,
                                                                      study_id, &sites3);
    transport_detail::require_same_sites(sites1, sites3, 3);
    chan.close_round();
    result.fit = coordinator_assemble_u(std::move(contribs));
  } else {
    throw Error("run_coordinator: method must be fedrd_u or fedrd_s");
  }

  const int fit_round = method == Method::fedrd_u ? 3 : 1;
  result.fit_message =
      encode_message({MsgType::FIT, study_id, "coordinator", fit_round}, result.fit);
  return result;
}

// Drive one site's role. Only summary payloads ever leave the site.
inline void run_site(SiteChannel& chan, const SurvivalDataset& data, Method method,
                     const std::string& study_id) {
  validate_dataset(data);
  const std::string site_id = data.site_id.empty() ? "site" : data.site_id;

  if (method == Method::fedrd_s) {
    SiteSummaryS summary = site_summary_s(data);
    summary.site_id = site_id;
    chan.send(1, MsgType::SUMMARY_S, site_id,
              encode_message({MsgType::SUMMARY_S, study_id, site_id, 1}, summary));
    return;
  }
  if (method != Method::fedrd_u) throw Error("run_site: method must be fedrd_u or fedrd_s");

  SortedTimes times = site_round1_u(data);
  times.site_id = site_id;
  chan.send(1, MsgType::TIMES, site_id,
            encode_message({MsgType::TIMES, study_id, site_id, 1}, times));

  auto [genv, gpayload] = decode_message(chan.await_broadcast(1, MsgType::GRID));
  if (genv.msg_type != MsgType::GRID || genv.study_id != study_id)
    throw ProtocolError("unexpected broadcast while waiting for the grid");
  const TimeGrid& grid = std::get<TimeGrid>(gpayload);

  RiskAggregate agg = site_round2_u(data, grid);
  agg.site_id = site_id;
  chan.send(2, MsgType::RISK_AGG, site_id,
            encode_message({MsgType::RISK_AGG, study_id, site_id, 2}, agg));

  auto [xenv, xpayload] = decode_message(chan.await_broadcast(2, MsgType::XBAR));
  if (xenv.msg_type != MsgType::XBAR || xenv.study_id != study_id)
    throw ProtocolError("unexpected broadcast while waiting for risk-set means");
  const XbarSeries& xb = std::get<XbarSeries>(xpayload);

  SiteContributionU contrib = site_round3_u(data, xb);
  contrib.site_id = site_id;
  chan.send(3, MsgType::CONTRIB_U, site_id,
            encode_message({MsgType::CONTRIB_U, study_id, site_id, 3}, contrib));
}

}  // namespace fedrd
