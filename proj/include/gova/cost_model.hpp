#pragma once

#include "gova/types.hpp"

namespace gova {

// Latency charges in nanoseconds (Jeff Dean's 2009 latency table).
struct CostModel {
  Tick local_ref = 100;             // main memory reference
  Tick cross_silo_rtt = 500'000;    // round trip within same datacenter
  Tick disk_seek = 10'000'000;      // disk seek
  Tick net_1k = 10'000;             // send 1K bytes over 1 Gbps network
  Tick ssd_4k = 150'000;            // read 4K randomly from SSD

  [[nodiscard]] Tick message(bool cross_silo) const { return cross_silo ? cross_silo_rtt : local_ref; }

  // Disk seek plus network transfer per started KiB of payload.
  [[nodiscard]] Tick snapshot(std::uint64_t bytes) const {
    return disk_seek + net_1k * static_cast<Tick>((bytes + 1023) / 1024);
  }
};

}  // namespace gova
