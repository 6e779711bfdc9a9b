//! Register-level simulation of a small output-stationary PE grid.
//!
//! Activations enter from the left edge, row `i` delayed by `i` cycles;
//! weights enter from the top edge, column `j` delayed by `j` cycles. Both
//! move one PE per cycle. Each PE multiply-accumulates whenever it holds a
//! pair. After the last MAC every column shifts its accumulators down one
//! row per cycle until they leave the bottom row. The run counts cycles and
//! collects the drained outputs, and serves as the timing and functional
//! reference for the analytical model.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::perfmodel::compute_cycles;

/// Dense row-major integer matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[i64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    /// Entries drawn uniformly from `[-128, 128]`.
    pub fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.gen_range(-128..=128)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn scaled(&self, f: i64) -> Self {
        Self {
            data: self.data.iter().map(|x| x * f).collect(),
            ..*self
        }
    }

    /// Plain triple-loop product.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0;
                for t in 0..self.cols {
                    acc += self.get(i, t) * other.get(t, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PeState {
    pub accumulator: i64,
    pub activation: Option<i64>,
    pub weight: Option<i64>,
    pub output: Option<i64>,
    macs: u64,
}

/// Deliberate defects for checking that the oracle notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Drain shifts one extra cycle after the outputs have left.
    ExtraDrainCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
}

pub const MAX_GRID: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicroRun {
    pub grid: Grid,
    /// (r, c, k)
    pub tile: (usize, usize, usize),
    pub a: IntMatrix,
    pub b: IntMatrix,
    pub measured_cycles: u64,
    pub c: IntMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MicroError {
    EmptyTile,
    GridTooLarge(Grid),
    TileExceedsGrid { tile: (usize, usize), grid: Grid },
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
}

impl fmt::Display for MicroError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyTile => f.write_str("tile dimensions must be positive"),
            Self::GridTooLarge(g) => write!(f, "grid {}x{} exceeds {MAX_GRID}x{MAX_GRID}", g.height, g.width),
            Self::TileExceedsGrid { tile, grid } => write!(
                f,
                "tile {}x{} does not fit grid {}x{}",
                tile.0, tile.1, grid.height, grid.width
            ),
            Self::DimensionMismatch { a, b } => {
                write!(f, "A is {}x{} but B is {}x{}", a.0, a.1, b.0, b.1)
            }
        }
    }
}

pub fn run_microsim(grid: Grid, a: &IntMatrix, b: &IntMatrix) -> Result<MicroRun, MicroError> {
    run_microsim_with(grid, a, b, Fault::None)
}

pub fn run_microsim_with(grid: Grid, a: &IntMatrix, b: &IntMatrix, fault: Fault) -> Result<MicroRun, MicroError> {
    if a.cols() != b.rows() {
        return Err(MicroError::DimensionMismatch {
            a: (a.rows(), a.cols()),
            b: (b.rows(), b.cols()),
        });
    }
    let (r, k, c) = (a.rows(), a.cols(), b.cols());
    if r == 0 || k == 0 || c == 0 {
        return Err(MicroError::EmptyTile);
    }
    if grid.height > MAX_GRID || grid.width > MAX_GRID {
        return Err(MicroError::GridTooLarge(grid));
    }
    if r > grid.height || c > grid.width {
        return Err(MicroError::TileExceedsGrid { tile: (r, c), grid });
    }

    let (h, w) = (grid.height, grid.width);
    let mut pes = vec![PeState::default(); h * w];
    let at = |i: usize, j: usize| i * w + j;
    let mut cycle: u64 = 0;

    // Compute: operands hop right / down each cycle, injected with skew.
    loop {
        cycle += 1;
        let t = (cycle - 1) as usize;
        let prev = pes.clone();
        for i in 0..h {
            for j in 0..w {
                let act = if j == 0 {
                    (i < r && t >= i && t - i < k).then(|| a.get(i, t - i))
                } else {
                    prev[at(i, j - 1)].activation
                };
                let wgt = if i == 0 {
                    (j < c && t >= j && t - j < k).then(|| b.get(t - j, j))
                } else {
                    prev[at(i - 1, j)].weight
                };
                let pe = &mut pes[at(i, j)];
                pe.activation = act;
                pe.weight = wgt;
                if let (Some(x), Some(y)) = (act, wgt) {
                    pe.accumulator += x * y;
                    pe.macs += 1;
                }
            }
        }
        let done = (0..r).all(|i| (0..c).all(|j| pes[at(i, j)].macs == k as u64));
        if done {
            break;
        }
    }

    // Drain: accumulators move into the output shift chain and leave the
    // bottom row one per cycle.
    for i in 0..h {
        for j in 0..w {
            let pe = &mut pes[at(i, j)];
            pe.output = (i < r && j < c).then_some(pe.accumulator);
            pe.accumulator = 0;
        }
    }
    let mut out = IntMatrix::zeros(r, c);
    let mut exited = vec![0usize; w];
    let mut remaining = r * c;
    while remaining > 0 {
        cycle += 1;
        for j in 0..w {
            if let Some(v) = pes[at(h - 1, j)].output {
                // Values leave bottom-first: the k-th exit of a column is row r−1−k.
                let row = r - 1 - exited[j];
                out.set(row, j, v);
                exited[j] += 1;
                remaining -= 1;
            }
            for i in (1..h).rev() {
                pes[at(i, j)].output = pes[at(i - 1, j)].output;
            }
            pes[at(0, j)].output = None;
        }
    }
    if fault == Fault::ExtraDrainCycle {
        cycle += 1;
    }

    Ok(MicroRun {
        grid,
        tile: (r, c, k),
        a: a.clone(),
        b: b.clone(),
        measured_cycles: cycle,
        c: out,
    })
}

/// Cycle count the analytical model predicts for a tile on a grid.
pub fn predicted_cycles(grid: Grid, r: usize, c: usize, k: usize) -> u64 {
    compute_cycles(r as u64, c as u64, k as u64) + grid.height as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub grid: Grid,
    pub tile: (usize, usize, usize),
    pub measured_cycles: u64,
    pub predicted_cycles: u64,
    pub functional_mismatch: bool,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grid {}x{} tile (r={}, c={}, k={}): measured {} cycles, predicted {}{}",
            self.grid.height,
            self.grid.width,
            self.tile.0,
            self.tile.1,
            self.tile.2,
            self.measured_cycles,
            self.predicted_cycles,
            if self.functional_mismatch { ", C differs from A×B" } else { "" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepOutcome {
    Pass,
    /// Nothing was checked.
    Vacuous,
    Counterexample(Counterexample),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepReport {
    pub cases: u64,
    pub outcome: SweepOutcome,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        !matches!(self.outcome, SweepOutcome::Counterexample(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSpec<'a> {
    pub grid_sizes: &'a [usize],
    pub k_values: &'a [usize],
    /// Random operand draws per (grid, tile, k).
    pub trials: usize,
    pub seed: u64,
    pub fault: Fault,
}

/// Runs every square-or-rectangular grid from `grid_sizes²`, every tile
/// `r ≤ H, c ≤ W` and every `k`, and stops at the first case where timing
/// or the product disagrees with the reference.
pub fn oracle_sweep(spec: &SweepSpec<'_>) -> SweepReport {
    let mut rng = SmallRng::seed_from_u64(spec.seed);
    let mut cases = 0;
    for &h in spec.grid_sizes {
        for &w in spec.grid_sizes {
            let grid = Grid { height: h, width: w };
            for r in 1..=h {
                for c in 1..=w {
                    for &k in spec.k_values {
                        for _ in 0..spec.trials {
                            let a = IntMatrix::random(r, k, &mut rng);
                            let b = IntMatrix::random(k, c, &mut rng);
                            let run = match run_microsim_with(grid, &a, &b, spec.fault) {
                                Ok(run) => run,
                                Err(_) => continue,
                            };
                            cases += 1;
                            let predicted = predicted_cycles(grid, r, c, k);
                            let functional_mismatch = run.c != a.matmul(&b);
                            if run.measured_cycles != predicted || functional_mismatch {
                                return SweepReport {
                                    cases,
                                    outcome: SweepOutcome::Counterexample(Counterexample {
                                        grid,
                                        tile: (r, c, k),
                                        measured_cycles: run.measured_cycles,
                                        predicted_cycles: predicted,
                                        functional_mismatch,
                                    }),
                                };
                            }
                        }
                    }
                }
            }
        }
    }
    SweepReport {
        cases,
        outcome: if cases == 0 {
            SweepOutcome::Vacuous
        } else {
            SweepOutcome::Pass
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pe() {
        let run = run_microsim(
            Grid { height: 1, width: 1 },
            &IntMatrix::from_rows(&[&[3]]),
            &IntMatrix::from_rows(&[&[5]]),
        )
        .unwrap();
        assert_eq!(run.c, IntMatrix::from_rows(&[&[15]]));
        assert_eq!(run.measured_cycles, 2);
    }

    #[test]
    fn four_by_four_full_tile() {
        let mut rng = SmallRng::seed_from_u64(7);
        let a = IntMatrix::random(4, 8, &mut rng);
        let b = IntMatrix::random(8, 4, &mut rng);
        let run = run_microsim(Grid { height: 4, width: 4 }, &a, &b).unwrap();
        assert_eq!(run.c, a.matmul(&b));
        assert_eq!(run.measured_cycles, 18);
    }

    #[test]
    fn partial_tile_drains_full_height() {
        let mut rng = SmallRng::seed_from_u64(8);
        let a = IntMatrix::random(2, 5, &mut rng);
        let b = IntMatrix::random(5, 3, &mut rng);
        let run = run_microsim(Grid { height: 4, width: 4 }, &a, &b).unwrap();
        assert_eq!(run.c, a.matmul(&b));
        assert_eq!(run.measured_cycles, 12);
    }

    #[test]
    fn doubling_a_doubles_c() {
        let mut rng = SmallRng::seed_from_u64(9);
        let grid = Grid { height: 8, width: 8 };
        let a = IntMatrix::random(6, 9, &mut rng);
        let b = IntMatrix::random(9, 7, &mut rng);
        let once = run_microsim(grid, &a, &b).unwrap();
        let twice = run_microsim(grid, &a.scaled(2), &b).unwrap();
        assert_eq!(twice.c, once.c.scaled(2));
    }

    #[test]
    fn errors() {
        let g = Grid { height: 2, width: 2 };
        let a = IntMatrix::zeros(3, 2);
        let b = IntMatrix::zeros(2, 2);
        assert!(matches!(run_microsim(g, &a, &b), Err(MicroError::TileExceedsGrid { .. })));
        let b3 = IntMatrix::zeros(3, 2);
        assert!(matches!(
            run_microsim(g, &IntMatrix::zeros(2, 2), &b3),
            Err(MicroError::DimensionMismatch { .. })
        ));
        let big = Grid { height: 65, width: 1 };
        assert!(matches!(
            run_microsim(big, &IntMatrix::zeros(1, 1), &IntMatrix::zeros(1, 1)),
            Err(MicroError::GridTooLarge(_))
        ));
    }

    #[test]
    fn sweep_small() {
        let report = oracle_sweep(&SweepSpec {
            grid_sizes: &[2, 4],
            k_values: &[1, 3],
            trials: 1,
            seed: 1,
            fault: Fault::None,
        });
        assert_eq!(report.outcome, SweepOutcome::Pass);
        // (2+4)² tiles × 2 k values
        assert_eq!(report.cases, 36 * 2);
    }

    #[test]
    fn sweep_finds_injected_drain_fault() {
        let report = oracle_sweep(&SweepSpec {
            grid_sizes: &[2],
            k_values: &[1],
            trials: 1,
            seed: 1,
            fault: Fault::ExtraDrainCycle,
        });
        match report.outcome {
            SweepOutcome::Counterexample(cx) => {
                assert_eq!(cx.grid, Grid { height: 2, width: 2 });
                assert_eq!(cx.tile, (1, 1, 1));
                assert_eq!(cx.measured_cycles, cx.predicted_cycles + 1);
            }
            other => panic!("expected a counterexample, got {other:?}"),
        }
    }

    #[test]
    fn empty_sweep_is_vacuous() {
        let report = oracle_sweep(&SweepSpec {
            grid_sizes: &[],
            k_values: &[1],
            trials: 1,
            seed: 1,
            fault: Fault::None,
        });
        assert_eq!(report, SweepReport { cases: 0, outcome: SweepOutcome::Vacuous });
    }
}
