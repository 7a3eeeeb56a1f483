#include "stefan/service.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include <boost/asio.hpp>
#include <fmt/format.h>

namespace stefan::service {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kMaxQueuedFrames = 256;
constexpr std::size_t kMaxLine = 1 << 16;

struct Command {
    enum class Kind { kInput, kPause, kResume, kReset, kTimescale };
    Kind kind;
    double value = 0.0;
    double wall = 0.0;
};

} // namespace

class Connection;

struct Server::Impl {
    ScenarioConfig cfg;
    std::optional<double> timescale;
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::thread net_thread;
    std::thread sim_thread;
    std::atomic<bool> running{false};
    Clock::time_point epoch = Clock::now();

    // network-thread state
    std::uint64_t next_id = 1;
    std::map<std::uint64_t, std::shared_ptr<Connection>> clients;
    std::uint64_t controller = 0;

    std::mutex cmd_mutex;
    std::condition_variable stop_cv;
    std::deque<Command> commands;

    double wall_now() const { return std::chrono::duration<double>(Clock::now() - epoch).count(); }

    void accept();
    void on_line(std::uint64_t id, const std::string& line);
    void on_close(std::uint64_t id);
    void broadcast(std::shared_ptr<const std::string> msg, bool droppable);
    void run_simulation();
    void push(Command c) {
        std::lock_guard lock(cmd_mutex);
        commands.push_back(c);
    }
};

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, std::uint64_t id, Server::Impl& server)
        : socket_(std::move(socket)), id_(id), server_(server), buffer_(kMaxLine) {}

    void start() { read(); }

    void send(std::shared_ptr<const std::string> msg, bool droppable) {
        if (droppable && outbox_.size() >= kMaxQueuedFrames) return; // slow reader: skip frames
        outbox_.push_back(std::move(msg));
        if (outbox_.size() == 1) write();
    }

    void close() {
        boost::system::error_code ec;
        socket_.shutdown(tcp::socket::shutdown_both, ec);
        socket_.close(ec);
    }

private:
    void read() {
        asio::async_read_until(socket_, buffer_, '\n', [self = shared_from_this()](auto ec, std::size_t n) {
            if (ec) {
                self->server_.on_close(self->id_);
                return;
            }
            std::string line(asio::buffers_begin(self->buffer_.data()), asio::buffers_begin(self->buffer_.data()) + n);
            self->buffer_.consume(n);
            while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
            if (!line.empty()) self->server_.on_line(self->id_, line);
            self->read();
        });
    }

    void write() {
        asio::async_write(socket_, asio::buffer(*outbox_.front()), [self = shared_from_this()](auto ec, std::size_t) {
            if (ec) {
                self->server_.on_close(self->id_);
                return;
            }
            self->outbox_.pop_front();
            if (!self->outbox_.empty()) self->write();
        });
    }

    tcp::socket socket_;
    std::uint64_t id_;
    Server::Impl& server_;
    asio::streambuf buffer_;
    std::deque<std::shared_ptr<const std::string>> outbox_;
};

namespace {

std::shared_ptr<const std::string> line_of(const nlohmann::json& j) {
    return std::make_shared<const std::string>(j.dump() + "\n");
}

} // namespace

void Server::Impl::accept() {
    acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
        if (ec) return;
        const auto id = next_id++;
        auto conn = std::make_shared<Connection>(std::move(socket), id, *this);
        clients.emplace(id, conn);
        if (!controller) controller = id;
        conn->start();
        accept();
    });
}

void Server::Impl::on_close(std::uint64_t id) {
    auto it = clients.find(id);
    if (it == clients.end()) return;
    it->second->close();
    clients.erase(it);
    if (controller == id) controller = clients.empty() ? 0 : clients.begin()->first;
}

void Server::Impl::on_line(std::uint64_t id, const std::string& line) {
    auto reply = [&](const std::string& code, const std::string& msg) {
        if (auto it = clients.find(id); it != clients.end()) it->second->send(line_of(error_message(code, msg)), false);
    };
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        reply("bad-message", e.what());
        return;
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        reply("bad-message", "expected an object with a string \"type\"");
        return;
    }
    if (id != controller) {
        reply("read-only", "another client holds control authority");
        return;
    }
    const auto type = j["type"].get<std::string>();
    if (type == "input") {
        if (!j.contains("u_o") || !j["u_o"].is_number()) {
            reply("bad-message", "input needs a numeric u_o");
            return;
        }
        const double u = j["u_o"].get<double>();
        if (!std::isfinite(u)) {
            reply("rejected-sample", "u_o must be finite");
            return;
        }
        push({Command::Kind::kInput, u, wall_now()});
    } else if (type == "pause") {
        push({Command::Kind::kPause});
    } else if (type == "resume") {
        push({Command::Kind::kResume});
    } else if (type == "reset") {
        push({Command::Kind::kReset});
    } else if (type == "set_timescale") {
        if (!j.contains("r") || !j["r"].is_number() || !(j["r"].get<double>() > 0.0) ||
            !std::isfinite(j["r"].get<double>())) {
            reply("bad-message", "set_timescale needs a positive finite r");
            return;
        }
        push({Command::Kind::kTimescale, j["r"].get<double>()});
    } else {
        reply("bad-message", fmt::format("unknown message type '{}'", type));
    }
}

void Server::Impl::broadcast(std::shared_ptr<const std::string> msg, bool droppable) {
    asio::post(io, [this, msg = std::move(msg), droppable] {
        for (auto& [id, c] : clients) c->send(msg, droppable);
    });
}

void Server::Impl::run_simulation() {
    Session session(cfg);
    if (timescale) session.set_timescale(*timescale);
    const auto frame_period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / cfg.frame_rate));
    bool report_sent = false;
    auto last = Clock::now();
    auto next = last;
    broadcast(line_of(to_json(session.frame())), true);
    while (running) {
        std::deque<Command> batch;
        {
            std::lock_guard lock(cmd_mutex);
            batch.swap(commands);
        }
        for (const auto& c : batch) {
            switch (c.kind) {
            case Command::Kind::kInput: session.ingest(c.value, c.wall); break;
            case Command::Kind::kPause: session.pause(); break;
            case Command::Kind::kResume: session.resume(); break;
            case Command::Kind::kReset:
                session.reset();
                report_sent = false;
                break;
            case Command::Kind::kTimescale: session.set_timescale(c.value); break;
            }
        }
        const auto now = Clock::now();
        const double wall_dt = std::chrono::duration<double>(now - last).count();
        last = now;
        // Stop stepping when a frame is due; the simulation then runs slower than requested.
        const auto deadline = now + frame_period;
        session.advance_wall(wall_dt, [&] { return Clock::now() < deadline; });
        broadcast(line_of(to_json(session.frame())), true);
        if (session.finished() && !report_sent) {
            auto j = session.report().to_json();
            j["type"] = "report";
            broadcast(line_of(j), false);
            report_sent = true;
        }
        next += frame_period;
        if (next < Clock::now()) next = Clock::now();
        std::unique_lock lock(cmd_mutex);
        stop_cv.wait_until(lock, next, [&] { return !running.load(); });
    }
}

Server::Server(ScenarioConfig cfg, std::uint16_t port, std::optional<double> timescale)
    : impl_(std::make_unique<Impl>()), port_(port) {
    Session probe(cfg); // refuses configs that fail validation
    impl_->cfg = std::move(cfg);
    impl_->timescale = timescale;
    if (timescale) probe.set_timescale(*timescale);
}

Server::~Server() { stop(); }

void Server::start() {
    auto& d = *impl_;
    const tcp::endpoint ep(asio::ip::address_v4::loopback(), port_);
    d.acceptor.open(ep.protocol());
    d.acceptor.set_option(tcp::acceptor::reuse_address(true));
    d.acceptor.bind(ep);
    d.acceptor.listen();
    port_ = d.acceptor.local_endpoint().port();
    d.running = true;
    d.accept();
    d.net_thread = std::thread([&d] { d.io.run(); });
    d.sim_thread = std::thread([&d] { d.run_simulation(); });
}

void Server::stop() {
    auto& d = *impl_;
    if (!d.running.exchange(false)) return;
    d.stop_cv.notify_all();
    if (d.sim_thread.joinable()) d.sim_thread.join();
    asio::post(d.io, [&d] {
        boost::system::error_code ec;
        d.acceptor.close(ec);
        for (auto& [id, c] : d.clients) c->close();
        d.clients.clear();
    });
    d.io.stop();
    if (d.net_thread.joinable()) d.net_thread.join();
}

void Server::wait() {
    auto& d = *impl_;
    std::unique_lock lock(d.cmd_mutex);
    d.stop_cv.wait(lock, [&] { return !d.running.load(); });
}

} // namespace stefan::service
