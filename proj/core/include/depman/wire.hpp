#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

namespace depman::wire {

/// Frames are a 4-byte big-endian payload length followed by the payload
/// (a UTF-8 JSON object). Payloads above this size are rejected.
inline constexpr std::size_t kMaxFrameSize = 16u * 1024u * 1024u;

/// Throws Error{FrameTooLarge}.
std::string encode_frame(std::string_view payload);

/// Incremental decoder for a byte stream of frames.
class FrameDecoder {
public:
    /// Throws Error{FrameTooLarge} as soon as an oversized header is seen.
    void feed(std::string_view bytes);
    std::optional<std::string> next();
    std::size_t buffered() const noexcept { return buffer_.size() - consumed_; }

private:
    std::string buffer_;
    std::size_t consumed_ = 0;
};

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    std::string to_string() const { return host + ":" + std::to_string(port); }
    /// Parses `host:port`; throws std::invalid_argument.
    static Endpoint parse(std::string_view text);
};

/// Owned connected TCP socket.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) noexcept : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket();

    int fd() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }

    void write_all(std::string_view bytes);
    /// Raw bytes; returns 0 on orderly shutdown.
    std::size_t read_some(char* buf, std::size_t n);
    void shutdown() noexcept;

    /// Sends one frame.
    void write_frame(std::string_view payload);
    /// Reads one frame; nullopt on clean EOF at a frame boundary. Throws
    /// Error{FrameTooLarge} or Error{ConnectionClosed}.
    std::optional<std::string> read_frame();

private:
    int fd_ = -1;
    FrameDecoder decoder_;
};

/// Throws Error{ConnectionRefused} when nothing accepts at `endpoint`.
Socket connect_to(const Endpoint& endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(5));

/// One request/response exchange on a fresh connection.
std::string call(const Endpoint& endpoint, std::string_view payload);

std::string base64_encode(std::string_view bytes);
/// Throws std::invalid_argument on malformed input.
std::string base64_decode(std::string_view text);

/// Accepts TCP connections and answers each frame with handler(payload).
/// Connections are served on their own threads; requests on one connection
/// are handled in order.
class FrameServer {
public:
    using Handler = std::function<std::string(std::string_view)>;
    /// Builds the response for a protocol-level failure (e.g. FrameTooLarge)
    /// sent right before the connection is dropped.
    using ErrorReply = std::function<std::string(const std::exception&)>;

    /// Binds and starts listening; port 0 picks an ephemeral port. Throws
    /// Error{EndpointInUse}.
    FrameServer(const Endpoint& endpoint, Handler handler, ErrorReply on_error = {});
    ~FrameServer();
    FrameServer(const FrameServer&) = delete;
    FrameServer& operator=(const FrameServer&) = delete;

    /// The actually bound endpoint.
    const Endpoint& endpoint() const noexcept { return bound_; }
    void stop();

private:
    struct Connection {
        Socket socket;
        std::thread thread;
        std::atomic<bool> done{false};
    };

    void accept_loop();
    void serve(Connection& conn);
    void reap_finished();

    Endpoint bound_;
    Handler handler_;
    ErrorReply on_error_;
    int listen_fd_ = -1;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex mu_;
    std::list<std::unique_ptr<Connection>> connections_;
};

} // namespace depman::wire
