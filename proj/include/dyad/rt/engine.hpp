#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dyad/rt/frame.hpp"
#include "dyad/rt/ring_buffer.hpp"
#include "dyad/st/model.hpp"

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

namespace dyad::rt {

// ---------------------------------------------------------------------------
// Latency accounting (monotonic clock).
// ---------------------------------------------------------------------------
struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  std::size_t count = 0;

  static LatencyStats from_samples(std::vector<double> ms) {
    LatencyStats s;
    s.count = ms.size();
    if (ms.empty()) return s;
    for (double v : ms) s.mean_ms += v;
    s.mean_ms /= static_cast<double>(ms.size());
    std::sort(ms.begin(), ms.end());
    auto at = [&](double q) {
      const auto idx = static_cast<std::size_t>(q * (static_cast<double>(ms.size()) - 1.0));
      return ms[idx];
    };
    s.p50_ms = at(0.50);
    s.p95_ms = at(0.95);
    s.p99_ms = at(0.99);
    s.max_ms = ms.back();
    return s;
  }

  nlohmann::json to_json() const {
    return {{"mean_ms", mean_ms}, {"p50_ms", p50_ms},   {"p95_ms", p95_ms},
            {"p99_ms", p99_ms},   {"max_ms", max_ms},   {"count", count}};
  }
};

// ---------------------------------------------------------------------------
// Frame sources and sinks.
// ---------------------------------------------------------------------------
struct FrameSource {
  virtual ~FrameSource() = default;
  virtual bool next(FrameMessage& out) = 0;
};

class FileFrameSource : public FrameSource {
 public:
  explicit FileFrameSource(const std::string& path) : is_(path, std::ios::binary) {
    if (!is_) throw DataError("serve: cannot open input " + path);
  }
  bool next(FrameMessage& out) override {
    unsigned char buf[kFrameBytes];
    if (!is_.read(reinterpret_cast<char*>(buf), kFrameBytes)) return false;
    out = decode_frame(buf);
    return true;
  }

 private:
  std::ifstream is_;
};

class VectorFrameSource : public FrameSource {
 public:
  explicit VectorFrameSource(std::vector<FrameMessage> frames)
      : frames_(std::move(frames)) {}
  bool next(FrameMessage& out) override {
    if (pos_ >= frames_.size()) return false;
    out = frames_[pos_++];
    return true;
  }

 private:
  std::vector<FrameMessage> frames_;
  std::size_t pos_ = 0;
};

// Listens on a local port, accepts one producer, then streams frames.
class TcpFrameSource : public FrameSource {
 public:
  explicit TcpFrameSource(std::uint16_t port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw DataError("serve: cannot create socket");
    int opt = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &opt, sizeof(opt));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(listen_fd_);
      throw DataError("serve: cannot bind port " + std::to_string(port));
    }
    if (::listen(listen_fd_, 1) != 0) {
      ::close(listen_fd_);
      throw DataError("serve: cannot listen on port " + std::to_string(port));
    }
  }

  ~TcpFrameSource() override {
    if (conn_fd_ >= 0) ::close(conn_fd_);
    if (listen_fd_ >= 0) ::close(listen_fd_);
  }

  bool next(FrameMessage& out) override {
    if (conn_fd_ < 0) {
      conn_fd_ = ::accept(listen_fd_, nullptr, nullptr);
      if (conn_fd_ < 0) return false;
    }
    unsigned char buf[kFrameBytes];
    std::size_t got = 0;
    while (got < kFrameBytes) {
      const ssize_t n = ::read(conn_fd_, buf + got, kFrameBytes - got);
      if (n <= 0) return false;
      got += static_cast<std::size_t>(n);
    }
    out = decode_frame(buf);
    return true;
  }

 private:
  int listen_fd_ = -1;
  int conn_fd_ = -1;
};

struct FrameSink {
  virtual ~FrameSink() = default;
  virtual void emit(const FrameMessage& f) = 0;
};

class FileFrameSink : public FrameSink {
 public:
  explicit FileFrameSink(const std::string& path) : os_(path, std::ios::binary) {
    if (!os_) throw DataError("serve: cannot open output " + path);
  }
  void emit(const FrameMessage& f) override {
    unsigned char buf[kFrameBytes];
    encode_frame(f, buf);
    os_.write(reinterpret_cast<const char*>(buf), kFrameBytes);
  }

 private:
  std::ofstream os_;
};

class VectorFrameSink : public FrameSink {
 public:
  void emit(const FrameMessage& f) override { frames.push_back(f); }
  std::vector<FrameMessage> frames;
};

class NullFrameSink : public FrameSink {
 public:
  void emit(const FrameMessage&) override {}
};

// ---------------------------------------------------------------------------
// Serve: ring-buffered streaming inference at the stream rate.
// ---------------------------------------------------------------------------
struct ServeOptions {
  double rate_hz = 333.0;
  std::size_t horizon = st::kShift;  // output row; 25 = "now", 49 = +75 ms
  bool threaded = false;             // separate ingest thread + paced ticks
};

struct ServeStats {
  std::size_t frames_in = 0;
  std::size_t predictions = 0;
  std::size_t overruns = 0;         // inferences that exceeded the tick period
  std::size_t skipped_ticks = 0;    // paced mode: ticks dropped after an overrun
  std::uint64_t rejected_frames = 0;
  double wall_s = 0.0;
  double achieved_hz = 0.0;  // frames processed per wall second
  LatencyStats latency;

  nlohmann::json to_json() const {
    return {{"frames_in", frames_in},
            {"predictions", predictions},
            {"overruns", overruns},
            {"skipped_ticks", skipped_ticks},
            {"rejected_frames", rejected_frames},
            {"wall_s", wall_s},
            {"achieved_hz", achieved_hz},
            {"latency", latency.to_json()}};
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace detail

// Replay mode: one inference per ingested frame (the stream rate is the tick
// rate), processed as fast as the machine allows. An inference slower than
// the tick period counts as an overrun. Output and latency log are
// deterministic for a given input file and model.
inline ServeStats serve_replay(FrameSource& source, FrameSink& sink,
                               const st::StModel& model, const ServeOptions& opts) {
  require(opts.horizon < model.win, "serve: horizon row out of range");
  const double period_ms = 1000.0 / opts.rate_hz;
  RingBuffer ring(model.win);
  std::vector<float> x(model.win * st::kFeatures), y(model.win * st::kFeatures);
  std::vector<double> lat;
  ServeStats stats;
  FrameMessage f;
  const auto t_begin = detail::Clock::now();
  while (source.next(f)) {
    ++stats.frames_in;
    ring.push(f);
    std::uint64_t seq = 0, t_us = 0;
    if (!ring.snapshot_features(x.data(), seq, t_us)) continue;
    const auto t0 = detail::Clock::now();
    model.predict(x.data(), y.data());
    const auto t1 = detail::Clock::now();
    const double ms = detail::ms_between(t0, t1);
    lat.push_back(ms);
    if (ms > period_ms) ++stats.overruns;
    FrameMessage out;
    out.seq = seq;
    out.t_us = t_us;
    for (std::size_t j = 0; j < st::kFeatures; ++j)
      out.v[j] = y[opts.horizon * st::kFeatures + j];
    sink.emit(out);
    ++stats.predictions;
  }
  const auto t_end = detail::Clock::now();
  stats.wall_s = detail::ms_between(t_begin, t_end) / 1000.0;
  stats.achieved_hz =
      stats.wall_s > 0.0 ? static_cast<double>(stats.frames_in) / stats.wall_s : 0.0;
  stats.rejected_frames = ring.rejected();
  stats.latency = LatencyStats::from_samples(std::move(lat));
  return stats;
}

// Paced mode: ingest runs on its own thread; inference ticks at rate_hz off
// the monotonic clock. A tick whose inference would start late (previous one
// still over budget) is skipped and counted, never queued.
inline ServeStats serve_paced(FrameSource& source, FrameSink& sink,
                              const st::StModel& model, const ServeOptions& opts) {
  require(opts.horizon < model.win, "serve: horizon row out of range");
  const auto period =
      std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(1.0 / opts.rate_hz));
  const double period_ms = 1000.0 / opts.rate_hz;

  RingBuffer ring(model.win);
  std::atomic<bool> done{false};
  std::atomic<std::size_t> frames_in{0};

  std::thread ingest([&] {
    FrameMessage f;
    while (source.next(f)) {
      ring.push(f);
      frames_in.fetch_add(1, std::memory_order_relaxed);
    }
    done.store(true, std::memory_order_release);
  });

  std::vector<float> x(model.win * st::kFeatures), y(model.win * st::kFeatures);
  std::vector<double> lat;
  ServeStats stats;
  std::uint64_t last_emitted_seq = 0;
  const auto t_begin = detail::Clock::now();
  auto next_tick = t_begin + period;
  while (true) {
    std::this_thread::sleep_until(next_tick);
    const auto now = detail::Clock::now();
    if (now > next_tick + period) {
      // behind by more than a tick: drop the backlog, never queue it
      const auto behind = now - next_tick;
      const auto missed = behind / period;
      stats.skipped_ticks += static_cast<std::size_t>(missed);
      next_tick += (missed + 1) * period;
    } else {
      next_tick += period;
    }
    std::uint64_t seq = 0, t_us = 0;
    if (ring.snapshot_features(x.data(), seq, t_us)) {
      if (seq != last_emitted_seq) {  // a new frame arrived since the last tick
        const auto t0 = detail::Clock::now();
        model.predict(x.data(), y.data());
        const auto t1 = detail::Clock::now();
        const double ms = detail::ms_between(t0, t1);
        lat.push_back(ms);
        if (ms > period_ms) ++stats.overruns;
        FrameMessage out;
        out.seq = seq;
        out.t_us = t_us;
        for (std::size_t j = 0; j < st::kFeatures; ++j)
          out.v[j] = y[opts.horizon * st::kFeatures + j];
        sink.emit(out);
        ++stats.predictions;
        last_emitted_seq = seq;
      }
    }
    if (done.load(std::memory_order_acquire) &&
        (ring.size() < model.win || seq == last_emitted_seq)) {
      break;
    }
  }
  ingest.join();
  const auto t_end = detail::Clock::now();
  stats.frames_in = frames_in.load();
  stats.wall_s = detail::ms_between(t_begin, t_end) / 1000.0;
  stats.achieved_hz =
      stats.wall_s > 0.0 ? static_cast<double>(stats.frames_in) / stats.wall_s : 0.0;
  stats.rejected_frames = ring.rejected();
  stats.latency = LatencyStats::from_samples(std::move(lat));
  return stats;
}

inline ServeStats serve(FrameSource& source, FrameSink& sink, const st::StModel& model,
                        const ServeOptions& opts = {}) {
  return opts.threaded ? serve_paced(source, sink, model, opts)
                       : serve_replay(source, sink, model, opts);
}

// ---------------------------------------------------------------------------
// bench_latency: wall time of single-window inferences on random inputs.
// ---------------------------------------------------------------------------
struct BenchOptions {
  std::size_t trials = 1000;
  std::size_t warmup = 100;  // excluded from the statistics
  std::uint64_t seed = 0;
};

inline LatencyStats bench_latency(const st::StModel& model, const BenchOptions& opts = {}) {
  Rng rng(opts.seed);
  std::vector<float> x(model.win * st::kFeatures), y(model.win * st::kFeatures);
  std::vector<double> lat;
  lat.reserve(opts.trials);
  for (std::size_t i = 0; i < opts.warmup + opts.trials; ++i) {
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] = static_cast<float>(rng.uniform(-30.0, 60.0));
    const auto t0 = detail::Clock::now();
    model.predict(x.data(), y.data());
    const auto t1 = detail::Clock::now();
    if (i >= opts.warmup) lat.push_back(detail::ms_between(t0, t1));
  }
  return LatencyStats::from_samples(std::move(lat));
}

}  // namespace dyad::rt
