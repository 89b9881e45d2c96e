#pragma once

// Network front end for a teleop Session. One socket per client carries
// JSON text both ways: raw TCP with line-delimited or 4-byte big-endian
// length-prefixed frames (written back line-delimited), or a WebSocket on the
// same port. Plain HTTP GETs serve the static UI. The simulation runs on its
// own thread at the control rate; clients only enqueue commands and drain
// bounded drop-oldest queues, so a slow reader never holds up a tick.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

#include "cutaneous/teleop.hpp"

namespace cutaneous {

namespace net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct ServerParams {
  std::string address = "127.0.0.1";
  unsigned short port = 0;  // 0 picks a free port
  std::string ui_dir;       // empty: no static files
  std::size_t queue_limit = 256;
  std::size_t max_message = 1 << 20;
};

inline std::string_view content_type(std::string_view path) {
  auto ends = [&](std::string_view ext) {
    return path.size() >= ext.size() && path.substr(path.size() - ext.size()) == ext;
  };
  if (ends(".html")) return "text/html";
  if (ends(".js") || ends(".mjs")) return "application/javascript";
  if (ends(".css")) return "text/css";
  if (ends(".json")) return "application/json";
  if (ends(".svg")) return "image/svg+xml";
  if (ends(".png")) return "image/png";
  return "application/octet-stream";
}

class TeleopServer {
 public:
  TeleopServer(const SessionParams& session, const ServerParams& params, Session::Logger log = {})
      : params_(params), log_(log), session_(session, log) {}

  ~TeleopServer() { stop(); }

  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  void start() {
    const auto addr = asio::ip::make_address(params_.address);
    acceptor_.open(addr.is_v6() ? tcp::v6() : tcp::v4());
    acceptor_.set_option(tcp::acceptor::reuse_address(true));
    acceptor_.bind({addr, params_.port});
    acceptor_.listen();
    running_ = true;
    asio::co_spawn(io_, accept_loop(), asio::detached);
    io_thread_ = std::thread([this] { io_.run(); });
    sim_thread_ = std::thread([this] { sim_loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    if (sim_thread_.joinable()) sim_thread_.join();
    asio::post(io_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
    });
    {
      std::lock_guard lock(clients_mu_);
      for (auto& [id, w] : clients_)
        if (auto c = w.lock()) c->close();
    }
    io_.stop();
    if (io_thread_.joinable()) io_thread_.join();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Runs f with exclusive access to the session (between ticks).
  template <class F>
  auto with_session(F&& f) {
    std::lock_guard lock(session_mu_);
    return f(session_);
  }

 private:
  class Client : public std::enable_shared_from_this<Client> {
   public:
    Client(TeleopServer& server, tcp::socket socket, std::uint64_t id)
        : server_(server), strand_(asio::make_strand(server.io_)), socket_(std::move(socket)), id_(id) {}

    std::uint64_t id() const { return id_; }

    void start() {
      asio::co_spawn(strand_, [self = shared_from_this()] { return self->run(); }, asio::detached);
    }

    /// Thread-safe; drops the oldest queued message when full.
    void deliver(std::shared_ptr<const std::string> msg) {
      asio::post(strand_, [self = shared_from_this(), msg = std::move(msg)] {
        if (self->closed_) return;
        if (self->queue_.size() >= self->server_.params_.queue_limit) {
          self->queue_.pop_front();
          ++self->dropped_;
        }
        self->queue_.push_back(std::move(msg));
        if (!self->writing_) self->write_next();
      });
    }

    void close() {
      asio::post(strand_, [self = shared_from_this()] { self->shutdown(); });
    }

   private:
    asio::awaitable<void> run() {
      try {
        // A client that stays silent is a raw subscriber.
        asio::steady_timer sniff(strand_, std::chrono::milliseconds(250));
        sniff.async_wait([self = shared_from_this()](boost::system::error_code ec) {
          if (ec || self->buf_.size() > 0) return;
          self->silent_ = true;
          self->socket_.cancel(ec);
        });
        try {
          co_await fill(1);
        } catch (const boost::system::system_error&) {
          if (!silent_) throw;
        }
        sniff.cancel();
        silent_ = buf_.size() == 0;
        bool http_get = false;
        if (!silent_ && static_cast<const char*>(buf_.data().data())[0] != '{') {
          co_await fill(4);
          http_get = std::string_view(static_cast<const char*>(buf_.data().data()), 4) == "GET ";
        }
        if (http_get) {
          co_await serve_http();
        } else {
          server_.add_client(shared_from_this());
          deliver(std::make_shared<const std::string>(server_.hello()));
          co_await read_raw();
        }
      } catch (const std::exception&) {
        // disconnects and protocol errors end the connection
      }
      shutdown();
      server_.remove_client(id_);
    }

    asio::awaitable<void> fill(std::size_t n) {
      while (buf_.size() < n) {
        const std::size_t k = co_await socket_.async_read_some(buf_.prepare(4096), asio::use_awaitable);
        buf_.commit(k);
      }
    }

    asio::awaitable<void> read_raw() {
      for (;;) {
        co_await fill(1);
        const char* p = static_cast<const char*>(buf_.data().data());
        if (p[0] == '\n' || p[0] == '\r' || p[0] == ' ') {
          buf_.consume(1);
        } else if (p[0] == '{') {
          std::size_t scanned = 0;
          for (;;) {
            const std::string_view have(static_cast<const char*>(buf_.data().data()), buf_.size());
            const auto nl = have.find('\n', scanned);
            if (nl != std::string_view::npos) {
              handle(std::string(have.substr(0, nl)));
              buf_.consume(nl + 1);
              break;
            }
            if (have.size() > server_.params_.max_message) co_return;
            scanned = have.size();
            co_await fill(have.size() + 1);
          }
        } else {
          co_await fill(4);
          const auto* b = static_cast<const unsigned char*>(buf_.data().data());
          const std::size_t len = (std::size_t(b[0]) << 24) | (std::size_t(b[1]) << 16) | (std::size_t(b[2]) << 8) | b[3];
          if (len > server_.params_.max_message) co_return;
          co_await fill(4 + len);
          handle(std::string(static_cast<const char*>(buf_.data().data()) + 4, len));
          buf_.consume(4 + len);
        }
      }
    }

    asio::awaitable<void> serve_http() {
      http::request<http::string_body> req;
      co_await http::async_read(socket_, buf_, req, asio::use_awaitable);
      if (websocket::is_upgrade(req)) {
        ws_ = std::make_unique<websocket::stream<tcp::socket>>(std::move(socket_));
        co_await ws_->async_accept(req, asio::use_awaitable);
        ws_->text(true);
        server_.add_client(shared_from_this());
        deliver(std::make_shared<const std::string>(server_.hello()));
        for (;;) {
          beast::flat_buffer b;
          co_await ws_->async_read(b, asio::use_awaitable);
          handle(beast::buffers_to_string(b.data()));
        }
      }
      http::response<http::string_body> res = server_.static_file(req);
      co_await http::async_write(socket_, res, asio::use_awaitable);
    }

    void handle(const std::string& text) {
      try {
        server_.enqueue(id_, parse_command(text));
      } catch (const Error& e) {
        deliver(std::make_shared<const std::string>(error_message(e.code(), e.what()).dump()));
      }
    }

    void write_next() {
      if (queue_.empty() || closed_) {
        writing_ = false;
        return;
      }
      writing_ = true;
      current_ = std::move(queue_.front());
      queue_.pop_front();
      auto done = asio::bind_executor(strand_, [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
        if (ec) {
          self->shutdown();
          return;
        }
        self->write_next();
      });
      if (ws_) {
        ws_->async_write(asio::buffer(*current_), std::move(done));
      } else {
        line_ = *current_ + '\n';
        asio::async_write(socket_, asio::buffer(line_), std::move(done));
      }
    }

    void shutdown() {
      if (closed_) return;
      closed_ = true;
      queue_.clear();
      boost::system::error_code ec;
      if (ws_) {
        beast::get_lowest_layer(*ws_).close(ec);
      } else {
        socket_.close(ec);
      }
    }

    TeleopServer& server_;
    asio::strand<asio::io_context::executor_type> strand_;
    tcp::socket socket_;
    std::unique_ptr<websocket::stream<tcp::socket>> ws_;
    std::uint64_t id_;
    beast::flat_buffer buf_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    std::shared_ptr<const std::string> current_;
    std::string line_;
    bool writing_ = false;
    bool closed_ = false;
    bool silent_ = false;
    std::uint64_t dropped_ = 0;
  };

  asio::awaitable<void> accept_loop() {
    for (;;) {
      boost::system::error_code ec;
      tcp::socket socket = co_await acceptor_.async_accept(asio::redirect_error(asio::use_awaitable, ec));
      if (ec) {
        if (!acceptor_.is_open()) co_return;
        continue;
      }
      std::make_shared<Client>(*this, std::move(socket), ++next_client_)->start();
    }
  }

  void sim_loop() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(session_.params().trial.control_dt));
    auto next = clock::now();
    while (running_) {
      next += period;
      std::vector<std::pair<std::uint64_t, Command>> inbox;
      {
        std::lock_guard lock(inbox_mu_);
        inbox.swap(inbox_);
      }
      std::vector<Outgoing> out;
      {
        std::lock_guard lock(session_mu_);
        for (auto& [client, cmd] : inbox) session_.submit(cmd, client);
        out = session_.tick();
      }
      for (auto& o : out) {
        auto msg = std::make_shared<const std::string>(o.message.dump());
        std::lock_guard lock(clients_mu_);
        if (o.client == 0) {
          for (auto& [id, w] : clients_)
            if (auto c = w.lock()) c->deliver(msg);
        } else if (auto it = clients_.find(o.client); it != clients_.end()) {
          if (auto c = it->second.lock()) c->deliver(msg);
        }
      }
      const auto now = clock::now();
      if (now - next > 10 * period) next = now;  // fell far behind; do not burst
      std::this_thread::sleep_until(next);
    }
  }

  std::string hello() {
    std::lock_guard lock(session_mu_);
    return session_.hello().dump();
  }

  void enqueue(std::uint64_t client, Command cmd) {
    std::lock_guard lock(inbox_mu_);
    inbox_.emplace_back(client, std::move(cmd));
  }

  void add_client(const std::shared_ptr<Client>& c) {
    std::lock_guard lock(clients_mu_);
    clients_[c->id()] = c;
  }

  void remove_client(std::uint64_t id) {
    std::lock_guard lock(clients_mu_);
    clients_.erase(id);
  }

  http::response<http::string_body> static_file(const http::request<http::string_body>& req) {
    auto reply = [&](http::status status, std::string body, std::string_view type) {
      http::response<http::string_body> res{status, req.version()};
      res.set(http::field::content_type, std::string(type));
      res.set(http::field::cache_control, "no-store");
      res.keep_alive(false);
      res.body() = std::move(body);
      res.prepare_payload();
      return res;
    };
    std::string target(req.target());
    if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (params_.ui_dir.empty() || target.empty() || target[0] != '/' || target.find("..") != std::string::npos)
      return reply(http::status::not_found, "not found\n", "text/plain");
    if (target.back() == '/') target += "index.html";
    std::ifstream in(params_.ui_dir + target, std::ios::binary);
    if (!in) return reply(http::status::not_found, "not found\n", "text/plain");
    std::ostringstream body;
    body << in.rdbuf();
    return reply(http::status::ok, body.str(), content_type(target));
  }

  ServerParams params_;
  Session::Logger log_;
  asio::io_context io_;
  tcp::acceptor acceptor_{io_};
  std::thread io_thread_;
  std::thread sim_thread_;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> next_client_{0};

  std::mutex session_mu_;
  Session session_;
  std::mutex inbox_mu_;
  std::vector<std::pair<std::uint64_t, Command>> inbox_;
  std::mutex clients_mu_;
  std::map<std::uint64_t, std::weak_ptr<Client>> clients_;
};

}  // namespace net

using net::ServerParams;
using net::TeleopServer;

}  // namespace cutaneous
