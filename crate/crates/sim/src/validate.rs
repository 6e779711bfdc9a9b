//! Self-checks behind `sisa validate`.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use sisa_core::microsim::{oracle_sweep, Fault, SweepOutcome, SweepSpec};
use sisa_core::scheduler::plan_gemm;
use sisa_core::{ArrayGeometry, DataFormat, GemmShape, MemoryConfig};

pub const GRID_SIZES: [usize; 4] = [2, 4, 8, 16];
pub const K_VALUES: [usize; 3] = [1, 3, 17];

/// A 4×4 array of two 2-row slabs, small enough to check by hand.
pub fn desk_geometry() -> ArrayGeometry {
    ArrayGeometry {
        rows: 4,
        cols: 4,
        slab_height: 2,
        num_slabs: 2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub microsim_cases: u64,
    pub schedule_cases: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    pub fault: Fault,
    pub schedule_shapes: usize,
    pub max_dim: u64,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            fault: Fault::None,
            schedule_shapes: 1000,
            max_dim: 4096,
            seed: 0x5157_a0de,
        }
    }
}

/// `count` shapes with every dimension in `[1, max_dim]`. The first two are
/// the corners `(1,1,1)` and `(max_dim, max_dim, max_dim)`; the rest draw
/// each dimension log-uniformly, so skewed and tiny shapes are as common as
/// large ones.
pub fn random_shapes(count: usize, max_dim: u64, seed: u64) -> Vec<GemmShape> {
    let mut rng = StdRng::seed_from_u64(seed);
    let top = (max_dim as f64).ln();
    let mut dim = || ((rng.gen_range(0.0..=top)).exp().round() as u64).clamp(1, max_dim);
    let corners = [GemmShape { m: 1, n: 1, k: 1 }, GemmShape { m: max_dim, n: max_dim, k: max_dim }];
    corners
        .into_iter()
        .chain(std::iter::repeat_with(|| GemmShape {
            m: dim(),
            n: dim(),
            k: dim(),
        }))
        .take(count)
        .collect()
}

/// Checks every random shape on every geometry; returns the case count or
/// the first failure.
pub fn schedule_coverage(
    geometries: &[ArrayGeometry],
    shapes: usize,
    max_dim: u64,
    seed: u64,
) -> Result<u64, String> {
    let mem = MemoryConfig::default();
    let fmt = DataFormat::default();
    let mut cases = 0;
    for shape in random_shapes(shapes, max_dim, seed) {
        for g in geometries {
            let s = plan_gemm(shape, g, &mem, fmt).map_err(|e| format!("{shape} on {g:?}: {e}"))?;
            s.verify().map_err(|e| format!("{shape} on {g:?}: {e}"))?;
            let volume: u64 = s.tiles().map(|t| t.volume()).sum();
            if volume != shape.macs() {
                return Err(format!("{shape} on {g:?}: tile volume {volume} != {}", shape.macs()));
            }
            cases += 1;
        }
    }
    Ok(cases)
}

pub fn run_validation(opts: ValidateOptions) -> ValidationReport {
    let micro = oracle_sweep(&SweepSpec {
        grid_sizes: &GRID_SIZES,
        k_values: &K_VALUES,
        trials: 1,
        seed: opts.seed,
        fault: opts.fault,
    });
    let mut counterexample = match &micro.outcome {
        SweepOutcome::Pass => None,
        SweepOutcome::Vacuous => Some("microsim sweep ran no cases".to_string()),
        SweepOutcome::Counterexample(c) => Some(c.to_string()),
    };
    let schedule_cases = match schedule_coverage(
        &[ArrayGeometry::default(), desk_geometry()],
        opts.schedule_shapes,
        opts.max_dim,
        opts.seed,
    ) {
        Ok(n) => n,
        Err(e) => {
            counterexample.get_or_insert(e);
            0
        }
    };
    ValidationReport {
        passed: counterexample.is_none(),
        microsim_cases: micro.cases,
        schedule_cases,
        counterexample,
    }
}
