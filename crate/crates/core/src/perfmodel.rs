//! Analytical cycle and traffic model for output-stationary tile execution.
//!
//! A tile of `r × c` outputs with reduction depth `k` occupies its logical
//! unit for `k + r + c − 2` cycles of skewed fill and compute, followed by a
//! drain through the unit's full height. Operand loads for round `i + 1`
//! overlap the compute of round `i` (double buffering) and share the DRAM
//! bandwidth equally among the units that load concurrently.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{ArrayGeometry, ExecutionMode, LogicalUnit};
use crate::scheduler::{Phase, Schedule, Tile};
use crate::{DataFormat, GemmShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryConfig {
    pub global_buffer_bytes: u64,
    pub output_buffer_bytes: u64,
    /// Per slab.
    pub slab_act_buffer_bytes: u64,
    /// Per slab.
    pub slab_wgt_buffer_bytes: u64,
    pub dram_bytes_per_cycle: u64,
    pub global_bank_port_elems: u64,
    /// Whether operands pass through slab-local buffers on their way from
    /// the global buffer into the array. Monolithic designs feed the array
    /// straight from their operand buffers.
    pub slab_local_buffers: bool,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            global_buffer_bytes: 8 << 20,
            output_buffer_bytes: 2 << 20,
            slab_act_buffer_bytes: 8 << 10,
            slab_wgt_buffer_bytes: 64 << 10,
            // 2.3 TB/s at 1 GHz
            dram_bytes_per_cycle: 2300,
            global_bank_port_elems: 8,
            slab_local_buffers: true,
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        for (name, v) in [
            ("global_buffer_bytes", self.global_buffer_bytes),
            ("output_buffer_bytes", self.output_buffer_bytes),
            ("slab_act_buffer_bytes", self.slab_act_buffer_bytes),
            ("slab_wgt_buffer_bytes", self.slab_wgt_buffer_bytes),
            ("dram_bytes_per_cycle", self.dram_bytes_per_cycle),
            ("global_bank_port_elems", self.global_bank_port_elems),
        ] {
            if v == 0 {
                return Err(name);
            }
        }
        Ok(())
    }

    /// Bytes of one slab's staging pair that a unit needs before it can
    /// start streaming: half of the double-buffered activation and weight
    /// buffers.
    pub fn first_stripe_bytes(&self) -> u64 {
        (self.slab_act_buffer_bytes + self.slab_wgt_buffer_bytes) / 2
    }
}

/// How much of the first round's operand load is exposed before compute
/// can begin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColdStart {
    /// Compute starts once the first staging stripe of every tile has
    /// landed; the rest streams in behind it.
    #[default]
    FirstStripe,
    /// The whole first round is loaded before compute starts.
    FullTile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PerfOptions {
    pub cold_start: ColdStart,
    /// Let a tile's drain hide under the next tile's fill skew on the same
    /// unit. Off by default.
    pub drain_overlap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrafficCounters {
    pub dram_read_bytes: u64,
    pub dram_write_bytes: u64,
    pub global_sram_reads: u64,
    pub global_sram_writes: u64,
    pub slab_sram_reads: u64,
    pub slab_sram_writes: u64,
    pub output_sram_writes: u64,
    pub mac_count: u64,
}

impl TrafficCounters {
    pub fn sram_reads(&self) -> u64 {
        self.global_sram_reads + self.slab_sram_reads
    }

    pub fn sram_writes(&self) -> u64 {
        self.global_sram_writes + self.slab_sram_writes + self.output_sram_writes
    }

    pub fn dram_bytes(&self) -> u64 {
        self.dram_read_bytes + self.dram_write_bytes
    }

    /// Every counter multiplied by `w`.
    pub fn scaled(&self, w: u64) -> Self {
        Self {
            dram_read_bytes: self.dram_read_bytes * w,
            dram_write_bytes: self.dram_write_bytes * w,
            global_sram_reads: self.global_sram_reads * w,
            global_sram_writes: self.global_sram_writes * w,
            slab_sram_reads: self.slab_sram_reads * w,
            slab_sram_writes: self.slab_sram_writes * w,
            output_sram_writes: self.output_sram_writes * w,
            mac_count: self.mac_count * w,
        }
    }

    pub fn add(&mut self, o: &Self) {
        self.dram_read_bytes += o.dram_read_bytes;
        self.dram_write_bytes += o.dram_write_bytes;
        self.global_sram_reads += o.global_sram_reads;
        self.global_sram_writes += o.global_sram_writes;
        self.slab_sram_reads += o.slab_sram_reads;
        self.slab_sram_writes += o.slab_sram_writes;
        self.output_sram_writes += o.output_sram_writes;
        self.mac_count += o.mac_count;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResult {
    pub cycles: u64,
    pub per_phase_cycles: Vec<u64>,
    pub counters: TrafficCounters,
    /// Indexed by slab; cycles during which the slab was powered.
    pub active_slab_cycles: Vec<u64>,
}

impl SimResult {
    pub fn total_active_slab_cycles(&self) -> u64 {
        self.active_slab_cycles.iter().sum()
    }

    pub fn total_gated_slab_cycles(&self) -> u64 {
        self.cycles * self.active_slab_cycles.len() as u64 - self.total_active_slab_cycles()
    }
}

/// Skewed-wavefront fill plus compute: PE `(r−1, c−1)` receives its first
/// operand pair at cycle `r + c − 2` and needs `k` MACs.
pub fn compute_cycles(r: u64, c: u64, k: u64) -> u64 {
    assert!(r >= 1 && c >= 1 && k >= 1, "tile dimensions must be positive");
    k + r + c - 2
}

pub fn drain_cycles(unit: &LogicalUnit) -> u64 {
    unit.drain_depth
}

/// Cycles to move `bytes` when `sharing` units split the DRAM bandwidth.
pub fn transfer_cycles(bytes: u64, sharing: u64, mem: &MemoryConfig) -> u64 {
    assert!(sharing >= 1, "at least one loader must share the bandwidth");
    if bytes == 0 {
        return 0;
    }
    (u128::from(bytes) * u128::from(sharing)).div_ceil(u128::from(mem.dram_bytes_per_cycle)) as u64
}

/// DRAM bytes a tile pulls in. The tile's A slice is omitted when the A
/// rows of its phase are resident in the global buffer.
pub fn tile_load_bytes(tile: &Tile, a_resident: bool, fmt: DataFormat) -> u64 {
    let a = if a_resident { 0 } else { tile.row_len * tile.k_len };
    (a + tile.k_len * tile.col_len) * fmt.bytes_per_element
}

pub fn load_cycles(tile: &Tile, a_resident: bool, sharing: u64, fmt: DataFormat, mem: &MemoryConfig) -> u64 {
    transfer_cycles(tile_load_bytes(tile, a_resident, fmt), sharing, mem)
}

/// Cycles a tile keeps its unit busy. K-chunks of one output tile stream
/// back to back into the stationary accumulators, so only the first chunk
/// pays the fill skew and only the last one drains.
pub fn tile_time(tile: &Tile, unit: &LogicalUnit, k_total: u64, opts: PerfOptions) -> u64 {
    let fill = tile.row_len + tile.col_len - 2;
    let mut t = tile.k_len;
    if tile.is_first_chunk() {
        t += fill;
    }
    if tile.is_last_chunk(k_total) {
        let drain = drain_cycles(unit);
        t += if opts.drain_overlap {
            drain.saturating_sub(fill)
        } else {
            drain
        };
    }
    t
}

/// Latency of one round given the load time of the round that follows it:
/// the slowest unit's compute, or the prefetch of the next round if that
/// takes longer.
pub fn round_latency(round: &[Tile], mode: &ExecutionMode, k_total: u64, next_round_load: u64, opts: PerfOptions) -> u64 {
    let busy = round
        .iter()
        .map(|t| tile_time(t, &mode.units[t.unit_id], k_total, opts))
        .max()
        .unwrap_or(0);
    busy.max(next_round_load)
}

/// Per-tile DRAM bytes of a round. The resident A slice of a phase rides
/// along with the first tile of the phase's first round.
fn round_bytes(phase: &Phase, round_idx: usize, fmt: DataFormat, k_total: u64) -> Vec<u64> {
    let round = &phase.rounds[round_idx];
    round
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut b = tile_load_bytes(t, phase.a_resident, fmt);
            if phase.a_resident && round_idx == 0 && i == 0 {
                b += phase.row_len * k_total * fmt.bytes_per_element;
            }
            b
        })
        .collect()
}

fn bytes_to_cycles(bytes: &[u64], mem: &MemoryConfig) -> u64 {
    let sharing = bytes.len().max(1) as u64;
    bytes
        .iter()
        .map(|&b| transfer_cycles(b, sharing, mem))
        .max()
        .unwrap_or(0)
}

pub fn simulate(schedule: &Schedule, g: &ArrayGeometry, mem: &MemoryConfig, fmt: DataFormat) -> SimResult {
    simulate_with(schedule, g, mem, fmt, PerfOptions::default())
}

pub fn simulate_with(
    schedule: &Schedule,
    g: &ArrayGeometry,
    mem: &MemoryConfig,
    fmt: DataFormat,
    opts: PerfOptions,
) -> SimResult {
    let shape = schedule.shape;
    let bpe = fmt.bytes_per_element;
    let order: Vec<(usize, usize)> = schedule
        .phases
        .iter()
        .enumerate()
        .flat_map(|(pi, p)| (0..p.rounds.len()).map(move |ri| (pi, ri)))
        .collect();

    let mut per_phase_cycles = vec![0u64; schedule.phases.len()];
    for (idx, &(pi, ri)) in order.iter().enumerate() {
        let phase = &schedule.phases[pi];
        let next_load = order.get(idx + 1).map_or(0, |&(npi, nri)| {
            bytes_to_cycles(&round_bytes(&schedule.phases[npi], nri, fmt, shape.k), mem)
        });
        let mut latency = round_latency(&phase.rounds[ri], &phase.mode, shape.k, next_load, opts);
        if idx == 0 {
            let full = round_bytes(phase, ri, fmt, shape.k);
            let exposed: Vec<u64> = match opts.cold_start {
                ColdStart::FullTile => full,
                ColdStart::FirstStripe => {
                    let cap = mem.first_stripe_bytes();
                    full.into_iter().map(|b| b.min(cap)).collect()
                }
            };
            latency += bytes_to_cycles(&exposed, mem);
        }
        per_phase_cycles[pi] += latency;
    }

    let mut c = TrafficCounters::default();
    let mut active_slab_cycles = vec![0u64; g.num_slabs as usize];
    for (phase, &cycles) in schedule.phases.iter().zip(&per_phase_cycles) {
        if phase.a_resident {
            c.dram_read_bytes += phase.row_len * shape.k * bpe;
        }
        for t in phase.tiles() {
            c.dram_read_bytes += tile_load_bytes(t, phase.a_resident, fmt);
            c.global_sram_reads += t.streamed_elements();
            if mem.slab_local_buffers {
                c.slab_sram_writes += t.streamed_elements();
                c.slab_sram_reads += t.streamed_elements();
            }
            if t.is_last_chunk(shape.k) {
                c.output_sram_writes += t.row_len * t.col_len;
            }
            c.mac_count += t.volume();
        }
        for u in &phase.mode.units {
            for s in u.active_slabs() {
                active_slab_cycles[s as usize] += cycles;
            }
        }
    }
    c.global_sram_writes = c.dram_read_bytes / bpe;
    c.dram_write_bytes = shape.m * shape.n * bpe;

    SimResult {
        cycles: per_phase_cycles.iter().sum(),
        per_phase_cycles,
        counters: c,
        active_slab_cycles,
    }
}

/// Compulsory traffic: read A and B once, write C once.
pub fn dram_traffic_lower_bound(shape: GemmShape, fmt: DataFormat) -> u64 {
    (shape.m * shape.k + shape.k * shape.n + shape.m * shape.n) * fmt.bytes_per_element
}
