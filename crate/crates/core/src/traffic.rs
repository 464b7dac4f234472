//! FTP3 traffic: Poisson arrivals of fixed-size packets, per-terminal FIFO
//! transmit buffers, and per-packet latency records.

use crate::error::{Result, SimError};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct TrafficConfig {
    pub offered_load_bps: f64,
    pub packet_bytes: u64,
}

impl TrafficConfig {
    /// Mean packet arrival rate in packets per second.
    pub fn lambda(&self) -> f64 {
        self.offered_load_bps / (8.0 * self.packet_bytes as f64)
    }
}

/// A packet that arrived but has not yet been fully delivered.
#[derive(Debug, Clone, Copy)]
pub struct ArrivedPacket {
    pub arrival_s: f64,
    pub bytes: u64,
}

/// Draw the FTP3 arrivals for one step `[t0, t0+dt)`: a Poisson-distributed
/// count with mean lambda*dt and timestamps uniform within the step.
pub fn ftp3_arrivals<R: Rng>(
    config: &TrafficConfig,
    t0_s: f64,
    dt_s: f64,
    rng: &mut R,
) -> Vec<ArrivedPacket> {
    let mean = config.lambda() * dt_s;
    if mean <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
    let mut packets: Vec<ArrivedPacket> = (0..count)
        .map(|_| {
            // Half-open (0,1] offset keeps latency strictly positive even when
            // a packet completes at the end of its own arrival TTI.
            let u = 1.0 - rng.gen_range(0.0..1.0);
            ArrivedPacket {
                arrival_s: t0_s + u * dt_s,
                bytes: config.packet_bytes,
            }
        })
        .collect();
    packets.sort_by(|a, b| a.arrival_s.total_cmp(&b.arrival_s));
    packets
}

/// Completion record for one fully delivered packet.
#[derive(Debug, Clone, Copy)]
pub struct PacketRecord {
    pub packet_id: u64,
    pub arrival_s: f64,
    pub completion_s: f64,
}

impl PacketRecord {
    pub fn latency_s(&self) -> f64 {
        self.completion_s - self.arrival_s
    }
}

#[derive(Debug, Clone, Copy)]
struct QueuedPacket {
    id: u64,
    arrival_s: f64,
    remaining_bytes: u64,
}

/// FIFO transmit buffer for one terminal with byte-level bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct PacketBuffer {
    queue: VecDeque<QueuedPacket>,
    backlog_bytes: u64,
    next_id: u64,
    pub generated_bytes: u64,
    pub delivered_bytes: u64,
    pub first_arrival_s: Option<f64>,
}

impl PacketBuffer {
    pub fn new() -> PacketBuffer {
        PacketBuffer::default()
    }

    pub fn backlog_bytes(&self) -> u64 {
        self.backlog_bytes
    }

    pub fn is_backlogged(&self) -> bool {
        self.backlog_bytes > 0
    }

    pub fn enqueue(&mut self, packet: ArrivedPacket) {
        debug_assert!(
            self.queue
                .back()
                .map_or(true, |last| packet.arrival_s >= last.arrival_s),
            "arrival times must be non-decreasing"
        );
        self.first_arrival_s.get_or_insert(packet.arrival_s);
        self.queue.push_back(QueuedPacket {
            id: self.next_id,
            arrival_s: packet.arrival_s,
            remaining_bytes: packet.bytes,
        });
        self.next_id += 1;
        self.backlog_bytes += packet.bytes;
        self.generated_bytes += packet.bytes;
    }

    /// Drain up to `bytes` from the head of the queue. Packets that reach
    /// zero remaining bytes complete at `now_s`; a partially drained packet
    /// keeps its residue at the head.
    pub fn drain(&mut self, mut bytes: u64, now_s: f64) -> Vec<PacketRecord> {
        let mut completed = Vec::new();
        while bytes > 0 {
            let Some(head) = self.queue.front_mut() else {
                break;
            };
            let take = head.remaining_bytes.min(bytes);
            head.remaining_bytes -= take;
            bytes -= take;
            self.backlog_bytes -= take;
            self.delivered_bytes += take;
            if head.remaining_bytes == 0 {
                completed.push(PacketRecord {
                    packet_id: head.id,
                    arrival_s: head.arrival_s,
                    completion_s: now_s,
                });
                self.queue.pop_front();
            }
        }
        completed
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub mean_s: f64,
    pub p50_s: f64,
    pub p95_s: f64,
    pub p99_s: f64,
    pub count: usize,
}

/// Nearest-rank order statistics over completed packets. Empty input is the
/// distinguished "no data" case.
pub fn latency_stats(records: &[PacketRecord]) -> Result<LatencyStats> {
    if records.is_empty() {
        return Err(SimError::Validation(
            "latency_stats: no completed packets".into(),
        ));
    }
    let mut lat: Vec<f64> = records.iter().map(|r| r.latency_s()).collect();
    lat.sort_by(|a, b| a.total_cmp(b));
    let nearest_rank = |p: f64| -> f64 {
        let n = lat.len();
        let rank = ((p / 100.0 * n as f64).ceil() as usize).clamp(1, n);
        lat[rank - 1]
    };
    Ok(LatencyStats {
        mean_s: lat.iter().sum::<f64>() / lat.len() as f64,
        p50_s: nearest_rank(50.0),
        p95_s: nearest_rank(95.0),
        p99_s: nearest_rank(99.0),
        count: lat.len(),
    })
}
