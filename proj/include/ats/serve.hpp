#pragma once

// Serve mode over standard streams or a local (AF_UNIX) stream socket.
// Connections are served one after another; each connection gets one
// response line per request line, in order.

#include <atomic>
#include <cerrno>
#include <cstring>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include "ats/router.hpp"

namespace ats {

namespace detail {

class FileDescriptor {
public:
    explicit FileDescriptor(int fd = -1) : fd_(fd) {}
    FileDescriptor(const FileDescriptor&) = delete;
    FileDescriptor& operator=(const FileDescriptor&) = delete;
    FileDescriptor(FileDescriptor&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    FileDescriptor& operator=(FileDescriptor&& o) noexcept
    {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~FileDescriptor() { reset(); }

    int get() const { return fd_; }
    void reset()
    {
        if (fd_ >= 0)
            ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_;
};

inline bool write_all(int fd, std::string_view data)
{
    while (!data.empty()) {
        const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

inline void serve_connection(const Router& router, int fd)
{
    std::string buffer;
    char chunk[4096];
    for (;;) {
        const auto n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t pos;
        while ((pos = buffer.find('\n')) != std::string::npos) {
            std::string line = buffer.substr(0, pos);
            buffer.erase(0, pos + 1);
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos)
                continue;
            if (!write_all(fd, handle_request(router, line) + "\n"))
                return;
        }
    }
    if (buffer.find_first_not_of(" \t\r") != std::string::npos)
        write_all(fd, handle_request(router, buffer) + "\n");
}

} // namespace detail

/// Binds a unix socket at `path` (replacing a stale socket file) and serves
/// until `stop` becomes true or accept fails. `on_ready` runs after listen().
template <class OnReady>
void serve_unix_socket(const Router& router, const std::string& path, const std::atomic<bool>& stop, OnReady&& on_ready)
{
    sockaddr_un addr{};
    if (path.size() >= sizeof addr.sun_path)
        throw std::invalid_argument("socket path too long: " + path);
    addr.sun_family = AF_UNIX;
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);

    detail::FileDescriptor listener(::socket(AF_UNIX, SOCK_STREAM, 0));
    if (listener.get() < 0)
        throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
    ::unlink(path.c_str());
    if (::bind(listener.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0)
        throw std::runtime_error("bind " + path + ": " + std::strerror(errno));
    if (::listen(listener.get(), 16) < 0)
        throw std::runtime_error(std::string("listen: ") + std::strerror(errno));
    on_ready();

    while (!stop.load()) {
        detail::FileDescriptor conn(::accept(listener.get(), nullptr, nullptr));
        if (conn.get() < 0) {
            if (errno == EINTR)
                continue;
            break;
        }
        detail::serve_connection(router, conn.get());
    }
    ::unlink(path.c_str());
}

/// "stdio" (or "-") serves standard input/output; "unix:<path>" a local socket.
inline void serve(const Router& router, const std::string& endpoint)
{
    if (endpoint.empty() || endpoint == "stdio" || endpoint == "-") {
        serve_stream(router, std::cin, std::cout);
        return;
    }
    constexpr std::string_view unix_prefix = "unix:";
    if (endpoint.starts_with(unix_prefix)) {
        std::atomic<bool> stop{false};
        serve_unix_socket(router, endpoint.substr(unix_prefix.size()), stop, [] {});
        return;
    }
    throw std::invalid_argument("unsupported endpoint \"" + endpoint + "\" (use stdio or unix:<path>)");
}

} // namespace ats
