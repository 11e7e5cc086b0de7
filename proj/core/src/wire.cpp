#include "depman/wire.hpp"

#include "depman/error.hpp"

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
#include <fcntl.h>
#include <stdexcept>

namespace depman::wire {

namespace {

std::uint32_t read_be32(const char* p) {
    auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])); };
    return (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
}

void check_size(std::size_t n) {
    if (n > kMaxFrameSize) {
        throw Error(Errc::FrameTooLarge, std::to_string(n) + " bytes exceeds limit of " + std::to_string(kMaxFrameSize));
    }
}

std::string errno_text(int err) { return std::strerror(err); }

} // namespace

std::string encode_frame(std::string_view payload) {
    check_size(payload.size());
    auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    out.push_back(static_cast<char>((n >> 24) & 0xFF));
    out.push_back(static_cast<char>((n >> 16) & 0xFF));
    out.push_back(static_cast<char>((n >> 8) & 0xFF));
    out.push_back(static_cast<char>(n & 0xFF));
    out += payload;
    return out;
}

void FrameDecoder::feed(std::string_view bytes) {
    if (consumed_ > 0 && consumed_ >= buffer_.size() / 2) {
        buffer_.erase(0, consumed_);
        consumed_ = 0;
    }
    buffer_ += bytes;
    if (buffered() >= 4) check_size(read_be32(buffer_.data() + consumed_));
}

std::optional<std::string> FrameDecoder::next() {
    if (buffered() < 4) return std::nullopt;
    std::uint32_t n = read_be32(buffer_.data() + consumed_);
    check_size(n);
    if (buffered() < 4 + std::size_t(n)) return std::nullopt;
    std::string payload = buffer_.substr(consumed_ + 4, n);
    consumed_ += 4 + n;
    if (buffered() >= 4) check_size(read_be32(buffer_.data() + consumed_));
    return payload;
}

Endpoint Endpoint::parse(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0) throw std::invalid_argument("expected host:port, got '" + std::string(text) + "'");
    Endpoint e;
    e.host = std::string(text.substr(0, colon));
    auto port_text = text.substr(colon + 1);
    unsigned value = 0;
    auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
    if (port_text.empty() || ec != std::errc{} || p != port_text.data() + port_text.size() || value > 65535) {
        throw std::invalid_argument("bad port in '" + std::string(text) + "'");
    }
    e.port = static_cast<std::uint16_t>(value);
    return e;
}

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = std::exchange(other.fd_, -1);
        decoder_ = std::move(other.decoder_);
    }
    return *this;
}

Socket::~Socket() {
    if (fd_ >= 0) ::close(fd_);
}

void Socket::write_all(std::string_view bytes) {
    while (!bytes.empty()) {
        ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(Errc::ConnectionClosed, "send: " + errno_text(errno));
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::size_t Socket::read_some(char* buf, std::size_t n) {
    for (;;) {
        ssize_t got = ::recv(fd_, buf, n, 0);
        if (got >= 0) return static_cast<std::size_t>(got);
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) throw Error(Errc::ConnectionClosed, "receive timed out");
        throw Error(Errc::ConnectionClosed, "recv: " + errno_text(errno));
    }
}

void Socket::shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::write_frame(std::string_view payload) { write_all(encode_frame(payload)); }

std::optional<std::string> Socket::read_frame() {
    std::array<char, 64 * 1024> buf{};
    for (;;) {
        if (auto frame = decoder_.next()) return frame;
        std::size_t n = read_some(buf.data(), buf.size());
        if (n == 0) {
            if (decoder_.buffered() == 0) return std::nullopt;
            throw Error(Errc::ConnectionClosed, "connection closed mid-frame");
        }
        decoder_.feed(std::string_view(buf.data(), n));
    }
}

Socket connect_to(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string port = std::to_string(endpoint.port);
    if (int rc = ::getaddrinfo(endpoint.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw Error(Errc::ConnectionRefused, endpoint.to_string() + ": " + ::gai_strerror(rc));
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);

    std::string last_error = "no address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!s) continue;
        int flags = ::fcntl(s.fd(), F_GETFL, 0);
        ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
        int rc = ::connect(s.fd(), ai->ai_addr, ai->ai_addrlen);
        if (rc < 0 && errno == EINPROGRESS) {
            pollfd pfd{s.fd(), POLLOUT, 0};
            rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
            if (rc == 0) {
                last_error = "connect timed out";
                continue;
            }
            int err = 0;
            socklen_t len = sizeof err;
            ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
            if (err != 0) {
                last_error = errno_text(err);
                continue;
            }
        } else if (rc < 0) {
            last_error = errno_text(errno);
            continue;
        }
        ::fcntl(s.fd(), F_SETFL, flags);
        int one = 1;
        ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        timeval tv{30, 0};
        ::setsockopt(s.fd(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        return s;
    }
    throw Error(Errc::ConnectionRefused, endpoint.to_string() + ": " + last_error);
}

std::string call(const Endpoint& endpoint, std::string_view payload) {
    Socket s = connect_to(endpoint);
    s.write_frame(payload);
    auto reply = s.read_frame();
    if (!reply) throw Error(Errc::ConnectionClosed, endpoint.to_string() + " closed without a response");
    return *reply;
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::string_view bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    auto at = [&](std::size_t k) { return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[k])); };
    for (; i + 3 <= bytes.size(); i += 3) {
        std::uint32_t v = (at(i) << 16) | (at(i + 1) << 8) | at(i + 2);
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += kB64[v & 63];
    }
    if (std::size_t rest = bytes.size() - i; rest > 0) {
        std::uint32_t v = at(i) << 16;
        if (rest == 2) v |= at(i + 1) << 8;
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += rest == 2 ? kB64[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

std::string base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw std::invalid_argument("base64 length not a multiple of 4");
    auto value = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::string out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        bool last = i + 4 == text.size();
        int pad = 0;
        if (last && text[i + 3] == '=') pad = text[i + 2] == '=' ? 2 : 1;
        std::uint32_t v = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            int d = (k >= 4 - static_cast<std::size_t>(pad)) ? 0 : value(text[i + k]);
            if (d < 0) throw std::invalid_argument("invalid base64 character");
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out += static_cast<char>((v >> 16) & 0xFF);
        if (pad < 2) out += static_cast<char>((v >> 8) & 0xFF);
        if (pad < 1) out += static_cast<char>(v & 0xFF);
    }
    return out;
}

FrameServer::FrameServer(const Endpoint& endpoint, Handler handler, ErrorReply on_error)
    : handler_(std::move(handler)), on_error_(std::move(on_error)) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    std::string port = std::to_string(endpoint.port);
    const char* host = endpoint.host.empty() || endpoint.host == "*" ? nullptr : endpoint.host.c_str();
    if (int rc = ::getaddrinfo(host, port.c_str(), &hints, &res); rc != 0) {
        throw Error(Errc::EndpointInUse, endpoint.to_string() + ": " + ::gai_strerror(rc));
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);

    int fd = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol);
    if (fd < 0) throw Error(Errc::EndpointInUse, "socket: " + errno_text(errno));
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, res->ai_addr, res->ai_addrlen) < 0 || ::listen(fd, 64) < 0) {
        int err = errno;
        ::close(fd);
        throw Error(Errc::EndpointInUse, endpoint.to_string() + ": " + errno_text(err));
    }
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    bound_.host = endpoint.host.empty() || endpoint.host == "*" ? "127.0.0.1" : endpoint.host;
    bound_.port = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                             : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    listen_fd_ = fd;
    acceptor_ = std::thread([this] { accept_loop(); });
}

FrameServer::~FrameServer() { stop(); }

void FrameServer::stop() {
    if (stopping_.exchange(true)) {
        return;
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    std::list<std::unique_ptr<Connection>> conns;
    {
        std::lock_guard lock(mu_);
        conns.swap(connections_);
    }
    for (auto& c : conns) c->socket.shutdown();
    for (auto& c : conns) {
        if (c->thread.joinable()) c->thread.join();
    }
}

void FrameServer::reap_finished() {
    std::list<std::unique_ptr<Connection>> finished;
    {
        std::lock_guard lock(mu_);
        for (auto it = connections_.begin(); it != connections_.end();) {
            if ((*it)->done) {
                finished.splice(finished.end(), connections_, it++);
            } else {
                ++it;
            }
        }
    }
    for (auto& c : finished) c->thread.join();
}

void FrameServer::accept_loop() {
    while (!stopping_) {
        int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) {
            if (errno == EINTR || errno == ECONNABORTED) continue;
            return;
        }
        reap_finished();
        auto conn = std::make_unique<Connection>();
        conn->socket = Socket(fd);
        Connection* raw = conn.get();
        std::lock_guard lock(mu_);
        if (stopping_) return; // conn closes the socket
        connections_.push_back(std::move(conn));
        raw->thread = std::thread([this, raw] { serve(*raw); });
    }
}

void FrameServer::serve(Connection& conn) {
    try {
        while (auto request = conn.socket.read_frame()) {
            std::string reply;
            try {
                reply = handler_(*request);
            } catch (const std::exception& e) {
                if (!on_error_) throw;
                reply = on_error_(e);
            }
            conn.socket.write_frame(reply);
        }
    } catch (const Error& e) {
        if (e.code() == Errc::FrameTooLarge && on_error_) {
            try {
                conn.socket.write_frame(on_error_(e));
            } catch (const std::exception&) {
            }
        }
    } catch (const std::exception&) {
    }
    conn.socket.shutdown();
    conn.done = true;
}

} // namespace depman::wire
