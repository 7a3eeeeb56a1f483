#include <atomic>
#include <chrono>
#include <csignal>
#include <optional>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "httplib.h"
#include "stefan/scenario.hpp"
#include "stefan/service.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

} // namespace

int run_serve(const std::string& config, int port, double timescale, const std::string& static_dir, int http_port) {
    auto cfg = stefan::load_config_file(config);
    std::optional<double> r;
    if (timescale > 0.0) r = timescale;
    stefan::service::Server server(std::move(cfg), static_cast<std::uint16_t>(port), r);
    server.start();
    fmt::print("listening on 127.0.0.1:{} (newline-delimited JSON)\n", server.port());

    httplib::Server http;
    std::thread http_thread;
    if (!static_dir.empty()) {
        if (!http.set_mount_point("/", static_dir)) {
            fmt::print(stderr, "error: cannot serve {}\n", static_dir);
            server.stop();
            return 3;
        }
        const int hp = http_port > 0 ? http_port : 8080;
        http_thread = std::thread([&http, hp] { http.listen("127.0.0.1", hp); });
        fmt::print("console assets on http://127.0.0.1:{}/\n", hp);
    }
    std::fflush(stdout);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(50));

    if (http_thread.joinable()) {
        http.stop();
        http_thread.join();
    }
    server.stop();
    return 0;
}
