#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace tsiege {

struct CanFrame {
  std::uint16_t id = 0;  // 11-bit identifier, lower wins arbitration
  std::vector<std::uint8_t> payload;
  int source_node = 0;
  double enqueue_time = 0.0;
  std::optional<double> delivery_time;
};

struct BusConfig {
  double bitrate_bps = 500000.0;
  int frame_overhead_bits = 47;  // standard frame worst case, no stuffing model
  std::size_t queue_capacity = 256;

  bool valid() const {
    return bitrate_bps > 0 && frame_overhead_bits >= 0 && queue_capacity > 0;
  }
};

// Shared broadcast bus: per-node FIFO transmit queues, one frame on the wire
// at a time, lowest-id head wins. No ack/error frames and no retransmission.
struct BusState {
  BusConfig cfg;
  std::map<int, std::deque<CanFrame>> pending;  // per-node tx queues
  std::map<int, std::deque<CanFrame>> rx;       // per-node receive queues
  std::set<int> nodes;
  double busy_until = 0.0;
  std::vector<CanFrame> delivered_log;
  std::vector<CanFrame> dropped_log;
  std::uint64_t enqueued_count = 0;
  std::uint64_t delivered_count = 0;
  std::uint64_t dropped_count = 0;     // tx-side drops (queue overflow)
  std::uint64_t rx_flushed_count = 0;  // frames discarded by receive-buffer resets
};

inline void register_node(BusState& bus, int node) {
  bus.nodes.insert(node);
  bus.pending[node];
  bus.rx[node];
}

inline double frame_tx_seconds(const BusConfig& cfg, const CanFrame& f) {
  const double bits = static_cast<double>(8 * f.payload.size() + cfg.frame_overhead_bits);
  return bits / cfg.bitrate_bps;
}

// Appends a frame to its source node's queue. Returns false (and counts a
// drop) when the queue is at capacity — the signature of sustained flooding.
inline bool enqueue(BusState& bus, CanFrame frame) {
  if (frame.id >= 2048) throw std::invalid_argument("enqueue: id exceeds 11 bits");
  if (frame.payload.size() > 8) throw std::invalid_argument("enqueue: payload exceeds 8 bytes");
  register_node(bus, frame.source_node);
  bus.enqueued_count++;
  auto& q = bus.pending[frame.source_node];
  if (q.size() >= bus.cfg.queue_capacity) {
    bus.dropped_count++;
    bus.dropped_log.push_back(std::move(frame));
    return false;
  }
  q.push_back(std::move(frame));
  return true;
}

// Runs arbitration up to `now`. While the bus is free and a head-of-queue
// frame is eligible, the lowest (id, source, enqueue_time) head transmits and
// occupies the wire for its frame time. Delivered frames are broadcast into
// every other node's receive queue and appended to the delivered log.
inline std::vector<CanFrame> arbitrate_step(BusState& bus, double now) {
  std::vector<CanFrame> delivered;
  for (;;) {
    // Earliest instant a queued head becomes eligible.
    double earliest = 0.0;
    bool any = false;
    for (auto& [node, q] : bus.pending) {
      if (q.empty()) continue;
      if (!any || q.front().enqueue_time < earliest) earliest = q.front().enqueue_time;
      any = true;
    }
    if (!any) break;
    const double start = std::max(bus.busy_until, earliest);
    if (start >= now) break;

    // Arbitrate among heads already pending at the start instant.
    const CanFrame* best = nullptr;
    int best_node = 0;
    for (auto& [node, q] : bus.pending) {
      if (q.empty() || q.front().enqueue_time > start) continue;
      const CanFrame& head = q.front();
      if (!best || std::tie(head.id, head.source_node, head.enqueue_time) <
                       std::tie(best->id, best->source_node, best->enqueue_time)) {
        best = &head;
        best_node = node;
      }
    }
    // The head supplying `earliest` is always eligible at `start`.
    CanFrame frame = std::move(bus.pending[best_node].front());
    bus.pending[best_node].pop_front();
    const double done = start + frame_tx_seconds(bus.cfg, frame);
    frame.delivery_time = done;
    bus.busy_until = done;
    bus.delivered_count++;
    for (int node : bus.nodes) {
      if (node != frame.source_node) bus.rx[node].push_back(frame);
    }
    bus.delivered_log.push_back(frame);
    delivered.push_back(std::move(frame));
  }
  return delivered;
}

// Empties a node's receive queue, counting what was discarded.
inline std::size_t flush_receive_queue(BusState& bus, int node) {
  auto it = bus.rx.find(node);
  if (it == bus.rx.end()) return 0;
  const std::size_t n = it->second.size();
  it->second.clear();
  bus.rx_flushed_count += n;
  return n;
}

}  // namespace tsiege
