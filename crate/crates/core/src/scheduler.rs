//! Static GEMM tiling and slab scheduling.
//!
//! `C[M,N] = A[M,K] × B[K,N]` is cut into phases along M. Every phase runs
//! in one execution mode picked from the phase's row count; inside a phase
//! the N dimension is cut into array-wide column tiles that are dealt out
//! round-robin to the logical units, and K is split only when the resident
//! A slice does not fit in the global buffer.

use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{units_for_mode, ArrayGeometry, ExecutionMode, GeometryError, ModeKind};
use crate::perfmodel::MemoryConfig;
use crate::DataFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GemmShape {
    pub m: u64,
    pub n: u64,
    pub k: u64,
}

impl GemmShape {
    pub fn new(m: u64, n: u64, k: u64) -> Result<Self, ScheduleError> {
        let s = Self { m, n, k };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return Err(ScheduleError::EmptyShape(*self));
        }
        Ok(())
    }

    pub fn macs(&self) -> u64 {
        self.m * self.n * self.k
    }
}

impl fmt::Display for GemmShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.m, self.n, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tile {
    pub row_off: u64,
    pub row_len: u64,
    pub col_off: u64,
    pub col_len: u64,
    pub k_off: u64,
    pub k_len: u64,
    pub unit_id: usize,
    /// Set on every K-chunk after the first; the chunk adds onto the
    /// accumulators left in the PEs by its predecessor.
    pub accumulate: bool,
}

impl Tile {
    pub fn volume(&self) -> u64 {
        self.row_len * self.col_len * self.k_len
    }

    /// Elements of A and B streamed into the array for this tile.
    pub fn streamed_elements(&self) -> u64 {
        self.row_len * self.k_len + self.k_len * self.col_len
    }

    pub fn is_first_chunk(&self) -> bool {
        self.k_off == 0
    }

    pub fn is_last_chunk(&self, k: u64) -> bool {
        self.k_off + self.k_len == k
    }
}

/// Tiles that execute concurrently, at most one per logical unit.
pub type Round = Vec<Tile>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase {
    pub mode: ExecutionMode,
    pub row_off: u64,
    pub row_len: u64,
    /// Number of equal-as-possible K chunks every output tile is cut into.
    pub k_split: u64,
    /// True when the A slice of this phase stays in the global buffer for
    /// the whole phase.
    pub a_resident: bool,
    pub rounds: Vec<Round>,
}

impl Phase {
    pub fn tiles(&self) -> impl Iterator<Item = &Tile> {
        self.rounds.iter().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub shape: GemmShape,
    pub phases: Vec<Phase>,
}

impl Schedule {
    pub fn tiles(&self) -> impl Iterator<Item = &Tile> {
        self.phases.iter().flat_map(|p| p.tiles())
    }

    pub fn tile_count(&self) -> usize {
        self.phases.iter().map(|p| p.rounds.iter().map(Vec::len).sum::<usize>()).sum()
    }

    pub fn round_count(&self) -> usize {
        self.phases.iter().map(|p| p.rounds.len()).sum()
    }

    /// Checks the structural invariants: tiles tile `M×N×K` exactly once,
    /// no unit appears twice in a round, tiles fit their unit, and the
    /// K-chunks of one output tile run in order on one unit.
    pub fn verify(&self) -> Result<(), CoverageError> {
        let GemmShape { m, n, k } = self.shape;
        let mut volume: u128 = 0;
        // (row_off, row_len, col_off, col_len, unit, k_off, k_len) in schedule order
        let mut chains: Vec<(u64, u64, u64, u64, usize, u64, u64)> = Vec::with_capacity(self.tile_count());

        let mut seen: Vec<bool> = Vec::new();
        for (pi, phase) in self.phases.iter().enumerate() {
            for (ri, round) in phase.rounds.iter().enumerate() {
                seen.clear();
                seen.resize(phase.mode.units.len(), false);
                for t in round {
                    let unit = phase
                        .mode
                        .units
                        .get(t.unit_id)
                        .ok_or(CoverageError::UnknownUnit { phase: pi, unit: t.unit_id })?;
                    if core::mem::replace(&mut seen[t.unit_id], true) {
                        return Err(CoverageError::UnitReused { phase: pi, round: ri, unit: t.unit_id });
                    }
                    if t.row_len == 0 || t.col_len == 0 || t.k_len == 0 {
                        return Err(CoverageError::EmptyTile(*t));
                    }
                    if t.row_len > unit.height || t.col_len > unit.width {
                        return Err(CoverageError::TileExceedsUnit(*t));
                    }
                    if t.row_off + t.row_len > m || t.col_off + t.col_len > n || t.k_off + t.k_len > k {
                        return Err(CoverageError::OutOfBounds(*t));
                    }
                    if t.accumulate != (t.k_off > 0) {
                        return Err(CoverageError::AccumulateFlag(*t));
                    }
                    volume += u128::from(t.volume());
                    chains.push((t.row_off, t.row_len, t.col_off, t.col_len, t.unit_id, t.k_off, t.k_len));
                }
            }
        }

        // Stable sort: schedule order survives within one output tile.
        chains.sort_by_key(|&(r, rl, c, cl, ..)| (r, rl, c, cl));
        let mut i = 0;
        while i < chains.len() {
            let key = (chains[i].0, chains[i].1, chains[i].2, chains[i].3);
            let unit = chains[i].4;
            let mut expect = 0;
            let mut j = i;
            while j < chains.len() && (chains[j].0, chains[j].1, chains[j].2, chains[j].3) == key {
                let (_, _, _, _, u, k_off, k_len) = chains[j];
                if u != unit || k_off != expect {
                    return Err(CoverageError::BrokenKChain { row_off: key.0, col_off: key.2 });
                }
                expect = k_off + k_len;
                j += 1;
            }
            if expect != k {
                return Err(CoverageError::BrokenKChain { row_off: key.0, col_off: key.2 });
            }
            i = j;
        }

        // Output tiles: row bands partition [0, m), and every band's column
        // ranges partition [0, n).
        let mut out_tiles: Vec<(u64, u64, u64, u64)> =
            chains.iter().map(|&(r, rl, c, cl, ..)| (r, rl, c, cl)).collect();
        out_tiles.dedup();
        let mut row_cursor = 0;
        let mut idx = 0;
        while idx < out_tiles.len() {
            let (r, rl, _, _) = out_tiles[idx];
            if r != row_cursor {
                return Err(CoverageError::RowGap { at: row_cursor });
            }
            let mut col_cursor = 0;
            while idx < out_tiles.len() && out_tiles[idx].0 == r {
                let (_, rl2, c, cl) = out_tiles[idx];
                if rl2 != rl || c != col_cursor {
                    return Err(CoverageError::ColumnGap { row_off: r, at: col_cursor });
                }
                col_cursor += cl;
                idx += 1;
            }
            if col_cursor != n {
                return Err(CoverageError::ColumnGap { row_off: r, at: col_cursor });
            }
            row_cursor += rl;
        }
        if row_cursor != m {
            return Err(CoverageError::RowGap { at: row_cursor });
        }
        if volume != u128::from(m) * u128::from(n) * u128::from(k) {
            return Err(CoverageError::VolumeMismatch { got: volume });
        }
        Ok(())
    }
}

/// One line per tile: `phase round unit row_off:row_len col_off:col_len k_off:k_len acc`.
impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (pi, phase) in self.phases.iter().enumerate() {
            for (ri, round) in phase.rounds.iter().enumerate() {
                for t in round {
                    writeln!(
                        f,
                        "{pi} {ri} {} {}:{} {}:{} {}:{} {}",
                        t.unit_id,
                        t.row_off,
                        t.row_len,
                        t.col_off,
                        t.col_len,
                        t.k_off,
                        t.k_len,
                        u8::from(t.accumulate)
                    )?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverageError {
    UnknownUnit { phase: usize, unit: usize },
    UnitReused { phase: usize, round: usize, unit: usize },
    EmptyTile(Tile),
    TileExceedsUnit(Tile),
    OutOfBounds(Tile),
    AccumulateFlag(Tile),
    BrokenKChain { row_off: u64, col_off: u64 },
    RowGap { at: u64 },
    ColumnGap { row_off: u64, at: u64 },
    VolumeMismatch { got: u128 },
}

impl fmt::Display for CoverageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownUnit { phase, unit } => write!(f, "phase {phase}: tile on unknown unit {unit}"),
            Self::UnitReused { phase, round, unit } => {
                write!(f, "phase {phase} round {round}: unit {unit} holds two tiles")
            }
            Self::EmptyTile(t) => write!(f, "empty tile {t:?}"),
            Self::TileExceedsUnit(t) => write!(f, "tile larger than its unit: {t:?}"),
            Self::OutOfBounds(t) => write!(f, "tile outside the GEMM: {t:?}"),
            Self::AccumulateFlag(t) => write!(f, "accumulate flag disagrees with k_off: {t:?}"),
            Self::BrokenKChain { row_off, col_off } => {
                write!(f, "K chunks of output tile ({row_off},{col_off}) do not partition K in order on one unit")
            }
            Self::RowGap { at } => write!(f, "rows not covered exactly at row {at}"),
            Self::ColumnGap { row_off, at } => {
                write!(f, "columns not covered exactly in row band {row_off} at column {at}")
            }
            Self::VolumeMismatch { got } => write!(f, "tile volumes sum to {got}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    EmptyShape(GemmShape),
    Geometry(GeometryError),
    /// Even one-element K chunks overflow a buffer.
    InfeasibleCapacity { buffer: Buffer, required: u64, available: u64 },
}

impl From<GeometryError> for ScheduleError {
    fn from(e: GeometryError) -> Self {
        Self::Geometry(e)
    }
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyShape(s) => write!(f, "GEMM dimensions must be at least 1, got {s}"),
            Self::Geometry(e) => write!(f, "geometry: {e}"),
            Self::InfeasibleCapacity {
                buffer,
                required,
                available,
            } => write!(
                f,
                "infeasible capacity: {buffer} needs {required} bytes, has {available}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Buffer {
    Global,
    SlabActivation,
    SlabWeight,
    Output,
}

impl fmt::Display for Buffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Buffer::Global => "global buffer",
            Buffer::SlabActivation => "slab activation buffer",
            Buffer::SlabWeight => "slab weight buffer",
            Buffer::Output => "output buffer",
        })
    }
}

/// Bytes one round of a phase wants on chip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkingSet {
    /// Rows of the resident A slice.
    pub a_rows: u64,
    pub k: u64,
    /// Widest B tile of the round.
    pub tile_cols: u64,
    /// PE rows fed by one slab's activation buffer.
    pub slab_rows: u64,
    /// Σ row_len × col_len over the tiles of one round.
    pub output_elements: u64,
    pub fmt: DataFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Fits,
    /// Smallest number of K chunks that makes the A slice fit. May exceed
    /// `k`, in which case no split helps.
    SplitK(u64),
    Exceeded { buffer: Buffer, required: u64, available: u64 },
}

impl Capacity {
    pub fn k_split(&self) -> Option<u64> {
        match *self {
            Capacity::Fits => Some(1),
            Capacity::SplitK(s) => Some(s),
            Capacity::Exceeded { .. } => None,
        }
    }
}

/// Decides whether a round's working set fits on chip.
///
/// The A slice lives in the global buffer, double buffered. Slab buffers
/// hold double-buffered streaming stripes of one K step (one row of A per
/// PE row, one row of B per PE column), so they constrain only the array
/// width and slab height. Drained outputs of one round must fit in the
/// output buffer.
pub fn check_capacity(ws: &WorkingSet, mem: &MemoryConfig) -> Capacity {
    let bpe = ws.fmt.bytes_per_element;
    let act_stripe = 2 * ws.slab_rows * bpe;
    if act_stripe > mem.slab_act_buffer_bytes {
        return Capacity::Exceeded {
            buffer: Buffer::SlabActivation,
            required: act_stripe,
            available: mem.slab_act_buffer_bytes,
        };
    }
    let wgt_stripe = 2 * ws.tile_cols * bpe;
    if wgt_stripe > mem.slab_wgt_buffer_bytes {
        return Capacity::Exceeded {
            buffer: Buffer::SlabWeight,
            required: wgt_stripe,
            available: mem.slab_wgt_buffer_bytes,
        };
    }
    let out = ws.output_elements * bpe;
    if out > mem.output_buffer_bytes {
        return Capacity::Exceeded {
            buffer: Buffer::Output,
            required: out,
            available: mem.output_buffer_bytes,
        };
    }
    // 2 × a_rows × ceil(k / s) × bpe <= global
    let per_k = 2 * ws.a_rows * bpe;
    if per_k * ws.k <= mem.global_buffer_bytes {
        return Capacity::Fits;
    }
    let max_chunk = mem.global_buffer_bytes / per_k;
    if max_chunk == 0 {
        return Capacity::SplitK(ws.k + 1);
    }
    Capacity::SplitK(ws.k.div_ceil(max_chunk))
}

/// Scheduler knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanOptions {
    pub power_gating: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self { power_gating: true }
    }
}

/// Picks the execution mode for a phase of `m` rows.
///
/// Slabs of a group beyond `ceil(m / slab_height)` are gated.
pub fn select_mode(m: u64, g: &ArrayGeometry) -> Result<ExecutionMode, GeometryError> {
    select_mode_with(m, g, PlanOptions::default())
}

pub fn select_mode_with(m: u64, g: &ArrayGeometry, opts: PlanOptions) -> Result<ExecutionMode, GeometryError> {
    let m = m.max(1);
    let kind = mode_kind_for(m, g);
    let gated = if opts.power_gating {
        idle_group_tail(kind, m, g)
    } else {
        Vec::new()
    };
    units_for_mode(g, kind, &gated)
}

pub fn mode_kind_for(m: u64, g: &ArrayGeometry) -> ModeKind {
    if m <= g.slab_height {
        return ModeKind::Independent;
    }
    if m > g.rows {
        return ModeKind::Monolithic;
    }
    let h = g
        .fusion_heights()
        .find(|&h| h >= m)
        .unwrap_or(g.rows);
    if h == g.rows {
        ModeKind::Monolithic
    } else {
        ModeKind::Fused { group_height: h }
    }
}

/// Trailing slabs of every group that `m` rows do not reach.
fn idle_group_tail(kind: ModeKind, m: u64, g: &ArrayGeometry) -> Vec<u64> {
    let per_group = kind.group_height(g) / g.slab_height;
    let needed = g.slabs_for_rows(m).min(per_group);
    (0..g.num_slabs)
        .filter(|s| s % per_group >= needed)
        .collect()
}

/// Tiles `shape` onto `g`.
pub fn plan_gemm(shape: GemmShape, g: &ArrayGeometry, mem: &MemoryConfig, fmt: DataFormat) -> Result<Schedule, ScheduleError> {
    plan_gemm_with(shape, g, mem, fmt, PlanOptions::default())
}

pub fn plan_gemm_with(
    shape: GemmShape,
    g: &ArrayGeometry,
    mem: &MemoryConfig,
    fmt: DataFormat,
    opts: PlanOptions,
) -> Result<Schedule, ScheduleError> {
    shape.validate()?;
    g.validate()?;
    let mut phases = Vec::new();
    let mut row_off = 0;
    while shape.m - row_off > g.rows {
        let mode = units_for_mode(g, ModeKind::Monolithic, &[])?;
        phases.push(build_phase(shape, g, mem, fmt, mode, row_off, g.rows, opts)?);
        row_off += g.rows;
    }
    let rest = shape.m - row_off;
    let mode = select_mode_with(rest, g, opts)?;
    phases.push(build_phase(shape, g, mem, fmt, mode, row_off, rest, opts)?);
    Ok(Schedule { shape, phases })
}

/// Plans `shape` on a single logical unit that spans all of `g`, the way a
/// conventional monolithic array executes it.
pub fn plan_single_unit(
    shape: GemmShape,
    g: &ArrayGeometry,
    mem: &MemoryConfig,
    fmt: DataFormat,
) -> Result<Schedule, ScheduleError> {
    shape.validate()?;
    g.validate()?;
    let mut phases = Vec::new();
    let mut row_off = 0;
    while row_off < shape.m {
        let rows = (shape.m - row_off).min(g.rows);
        let mode = units_for_mode(g, ModeKind::Monolithic, &[])?;
        phases.push(build_phase(
            shape,
            g,
            mem,
            fmt,
            mode,
            row_off,
            rows,
            PlanOptions { power_gating: false },
        )?);
        row_off += rows;
    }
    Ok(Schedule { shape, phases })
}

#[allow(clippy::too_many_arguments)]
fn build_phase(
    shape: GemmShape,
    g: &ArrayGeometry,
    mem: &MemoryConfig,
    fmt: DataFormat,
    mut mode: ExecutionMode,
    row_off: u64,
    row_len: u64,
    opts: PlanOptions,
) -> Result<Phase, ScheduleError> {
    let n_tiles = shape.n.div_ceil(g.cols);
    // Fewer column tiles than units: the surplus trailing units are gated
    // for the whole phase.
    if opts.power_gating && n_tiles < mode.units.len() as u64 {
        let mut gated = mode.gated_slabs.clone();
        for u in &mode.units[n_tiles as usize..] {
            gated.extend(u.member_slabs.iter().copied());
        }
        mode = units_for_mode(g, mode.kind, &gated)?;
    }
    let units = mode.units.len() as u64;
    let per_round = units.min(n_tiles);

    let ws = WorkingSet {
        a_rows: row_len,
        k: shape.k,
        tile_cols: shape.n.min(g.cols),
        slab_rows: row_len.min(g.slab_height),
        output_elements: per_round * row_len * shape.n.min(g.cols),
        fmt,
    };
    let k_split = match check_capacity(&ws, mem) {
        Capacity::Exceeded {
            buffer,
            required,
            available,
        } => {
            return Err(ScheduleError::InfeasibleCapacity {
                buffer,
                required,
                available,
            })
        }
        Capacity::Fits => 1,
        Capacity::SplitK(s) if s <= shape.k => s,
        Capacity::SplitK(_) => {
            return Err(ScheduleError::InfeasibleCapacity {
                buffer: Buffer::Global,
                required: 2 * row_len * fmt.bytes_per_element,
                available: mem.global_buffer_bytes,
            })
        }
    };
    let chunks = k_chunks(shape.k, k_split);

    let mut rounds = Vec::new();
    let mut col_tile = 0;
    while col_tile < n_tiles {
        let group_end = (col_tile + units).min(n_tiles);
        for &(k_off, k_len) in &chunks {
            let round: Round = (col_tile..group_end)
                .map(|t| {
                    let col_off = t * g.cols;
                    Tile {
                        row_off,
                        row_len,
                        col_off,
                        col_len: (shape.n - col_off).min(g.cols),
                        k_off,
                        k_len,
                        unit_id: (t % units) as usize,
                        accumulate: k_off > 0,
                    }
                })
                .collect();
            rounds.push(round);
        }
        col_tile = group_end;
    }
    Ok(Phase {
        mode,
        row_off,
        row_len,
        k_split,
        a_resident: k_split == 1,
        rounds,
    })
}

/// `(k_off, k_len)` of `s` equal-as-possible chunks; earlier chunks take the
/// remainder so the last chunk is never larger than the others.
pub fn k_chunks(k: u64, s: u64) -> Vec<(u64, u64)> {
    let s = s.clamp(1, k);
    let base = k / s;
    let extra = k % s;
    let mut off = 0;
    (0..s)
        .map(|i| {
            let len = base + u64::from(i < extra);
            let c = (off, len);
            off += len;
            c
        })
        .collect()
}
