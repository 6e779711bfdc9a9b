//! Hardware description of the slab-partitioned array and the logical-unit
//! algebra shared by the scheduler, the performance model and the baselines.
//!
//! A physical `rows × cols` PE grid is cut horizontally into `num_slabs`
//! slabs of `slab_height` rows each. Slabs can run on their own, be fused
//! into taller groups of `slab_height × 2^j` rows, or all be fused into one
//! monolithic array. Slabs that have no work are power-gated.

use alloc::vec::Vec;
use core::fmt;

/// Physical PE grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArrayGeometry {
    pub rows: u64,
    pub cols: u64,
    pub slab_height: u64,
    pub num_slabs: u64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self {
            rows: 128,
            cols: 128,
            slab_height: 16,
            num_slabs: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeometryError {
    ZeroField(&'static str),
    SlabCountNotPowerOfTwo(u64),
    RowsMismatch {
        rows: u64,
        slab_height: u64,
        num_slabs: u64,
    },
    InvalidFusionHeight(u64),
    UnknownSlab(u64),
    /// A gated slab sits in front of an active slab of the same fused group,
    /// which would cut the weight forwarding chain.
    GatedSlabNotTrailing { slab: u64, group: u64 },
    AllSlabsGated,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroField(name) => write!(f, "{name} must be at least 1"),
            Self::SlabCountNotPowerOfTwo(n) => write!(f, "num_slabs={n} is not a power of two"),
            Self::RowsMismatch {
                rows,
                slab_height,
                num_slabs,
            } => write!(
                f,
                "rows != slab_height*num_slabs ({rows} != {slab_height}*{num_slabs})"
            ),
            Self::InvalidFusionHeight(h) => {
                write!(f, "fusion height {h} is not slab_height*2^j below the array height")
            }
            Self::UnknownSlab(s) => write!(f, "slab {s} does not exist"),
            Self::GatedSlabNotTrailing { slab, group } => {
                write!(f, "gated slab {slab} is not a trailing slab of group {group}")
            }
            Self::AllSlabsGated => f.write_str("every slab of the requested mode is gated"),
        }
    }
}

impl ArrayGeometry {
    pub fn new(rows: u64, cols: u64, slab_height: u64, num_slabs: u64) -> Result<Self, GeometryError> {
        let g = Self {
            rows,
            cols,
            slab_height,
            num_slabs,
        };
        g.validate()?;
        Ok(g)
    }

    /// Checks every invariant and reports the first one that is violated.
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, v) in [
            ("rows", self.rows),
            ("cols", self.cols),
            ("slab_height", self.slab_height),
            ("num_slabs", self.num_slabs),
        ] {
            if v == 0 {
                return Err(GeometryError::ZeroField(name));
            }
        }
        if self.slab_height.checked_mul(self.num_slabs) != Some(self.rows) {
            return Err(GeometryError::RowsMismatch {
                rows: self.rows,
                slab_height: self.slab_height,
                num_slabs: self.num_slabs,
            });
        }
        if !self.num_slabs.is_power_of_two() {
            return Err(GeometryError::SlabCountNotPowerOfTwo(self.num_slabs));
        }
        Ok(())
    }

    pub fn pe_count(&self) -> u64 {
        self.rows * self.cols
    }

    /// Allowed group heights in ascending order: `slab_height × 2^j` up to and
    /// including the full array height.
    pub fn fusion_heights(&self) -> impl Iterator<Item = u64> + '_ {
        let mut h = self.slab_height;
        core::iter::from_fn(move || {
            if h > self.rows {
                return None;
            }
            let out = h;
            h *= 2;
            Some(out)
        })
    }

    /// Group heights that denote a genuine fused group (more than one slab,
    /// less than the whole array).
    pub fn is_fused_height(&self, h: u64) -> bool {
        h > self.slab_height && h < self.rows && self.fusion_heights().any(|x| x == h)
    }

    /// Number of slabs needed to hold `m` rows, capped at the slab count.
    pub fn slabs_for_rows(&self, m: u64) -> u64 {
        m.div_ceil(self.slab_height).clamp(1, self.num_slabs)
    }
}

/// Element width of the operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DataFormat {
    pub bytes_per_element: u64,
}

impl Default for DataFormat {
    /// BF16.
    fn default() -> Self {
        Self {
            bytes_per_element: 2,
        }
    }
}

impl DataFormat {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.bytes_per_element == 0 {
            return Err(GeometryError::ZeroField("bytes_per_element"));
        }
        Ok(())
    }
}

/// A group of contiguous slabs that executes one tile at a time.
///
/// `member_slabs` is the full chain spanned by the group. Trailing members
/// listed in `gated` are powered down but still part of the output shift
/// path, so `drain_depth` stays equal to `height`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LogicalUnit {
    pub unit_id: usize,
    pub height: u64,
    pub width: u64,
    pub drain_depth: u64,
    pub member_slabs: Vec<u64>,
    pub gated: Vec<u64>,
}

impl LogicalUnit {
    pub fn active_slabs(&self) -> impl Iterator<Item = u64> + '_ {
        self.member_slabs
            .iter()
            .copied()
            .filter(|s| !self.gated.contains(s))
    }

    /// PE rows that are powered.
    pub fn active_height(&self, g: &ArrayGeometry) -> u64 {
        self.active_slabs().count() as u64 * g.slab_height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeKind {
    Independent,
    Fused { group_height: u64 },
    Monolithic,
}

impl ModeKind {
    pub fn group_height(&self, g: &ArrayGeometry) -> u64 {
        match *self {
            ModeKind::Independent => g.slab_height,
            ModeKind::Fused { group_height } => group_height,
            ModeKind::Monolithic => g.rows,
        }
    }
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeKind::Independent => f.write_str("independent"),
            ModeKind::Fused { group_height } => write!(f, "fused{group_height}"),
            ModeKind::Monolithic => f.write_str("monolithic"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExecutionMode {
    pub kind: ModeKind,
    pub units: Vec<LogicalUnit>,
    /// Sorted ascending.
    pub gated_slabs: Vec<u64>,
}

impl ExecutionMode {
    pub fn is_gated(&self, slab: u64) -> bool {
        self.gated_slabs.binary_search(&slab).is_ok()
    }

    /// `independent×8`, `fused64×2`, `monolithic×1`.
    pub fn label(&self) -> alloc::string::String {
        alloc::format!("{}×{}", self.kind, self.units.len())
    }
}

/// Builds the logical units of `kind` on `g` with the slabs in `gated`
/// powered down.
///
/// A group whose slabs are all gated is dropped. A partly gated group keeps
/// its full height, and its gated slabs must form a suffix of the chain.
pub fn units_for_mode(
    g: &ArrayGeometry,
    kind: ModeKind,
    gated: &[u64],
) -> Result<ExecutionMode, GeometryError> {
    g.validate()?;
    let group_height = match kind {
        ModeKind::Independent => g.slab_height,
        ModeKind::Fused { group_height } => {
            if !g.is_fused_height(group_height) {
                return Err(GeometryError::InvalidFusionHeight(group_height));
            }
            group_height
        }
        ModeKind::Monolithic => g.rows,
    };
    let mut gated_slabs: Vec<u64> = gated.to_vec();
    gated_slabs.sort_unstable();
    gated_slabs.dedup();
    if let Some(&bad) = gated_slabs.iter().find(|&&s| s >= g.num_slabs) {
        return Err(GeometryError::UnknownSlab(bad));
    }

    let per_group = group_height / g.slab_height;
    let mut units = Vec::new();
    for group in 0..g.num_slabs / per_group {
        let members: Vec<u64> = (group * per_group..(group + 1) * per_group).collect();
        let gated_members: Vec<u64> = members
            .iter()
            .copied()
            .filter(|s| gated_slabs.binary_search(s).is_ok())
            .collect();
        if gated_members.len() == members.len() {
            continue;
        }
        // Gated members must be exactly the last |gated_members| slabs.
        let suffix_start = members.len() - gated_members.len();
        if let Some(&slab) = gated_members
            .iter()
            .zip(&members[suffix_start..])
            .find(|(a, b)| a != b)
            .map(|(a, _)| a)
        {
            return Err(GeometryError::GatedSlabNotTrailing { slab, group });
        }
        units.push(LogicalUnit {
            unit_id: units.len(),
            height: group_height,
            width: g.cols,
            drain_depth: group_height,
            member_slabs: members,
            gated: gated_members,
        });
    }
    if units.is_empty() {
        return Err(GeometryError::AllSlabsGated);
    }
    Ok(ExecutionMode {
        kind,
        units,
        gated_slabs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_examples() {
        assert!(ArrayGeometry::default().validate().is_ok());
        assert!(ArrayGeometry::new(4, 4, 2, 2).is_ok());
        assert!(matches!(
            ArrayGeometry::new(128, 128, 16, 7),
            Err(GeometryError::RowsMismatch { .. })
        ));
        assert_eq!(
            ArrayGeometry::new(96, 128, 16, 6),
            Err(GeometryError::SlabCountNotPowerOfTwo(6))
        );
        assert_eq!(
            ArrayGeometry::new(0, 128, 16, 8),
            Err(GeometryError::ZeroField("rows"))
        );
    }

    #[test]
    fn fusion_heights_default() {
        let g = ArrayGeometry::default();
        let hs: Vec<u64> = g.fusion_heights().collect();
        assert_eq!(hs, [16, 32, 64, 128]);
        assert!(g.is_fused_height(32));
        assert!(g.is_fused_height(64));
        assert!(!g.is_fused_height(48));
        assert!(!g.is_fused_height(128));
        assert!(!g.is_fused_height(16));
    }

    #[test]
    fn independent_default_has_eight_slabs() {
        let g = ArrayGeometry::default();
        let m = units_for_mode(&g, ModeKind::Independent, &[]).unwrap();
        assert_eq!(m.units.len(), 8);
        for (i, u) in m.units.iter().enumerate() {
            assert_eq!(u.unit_id, i);
            assert_eq!((u.height, u.width, u.drain_depth), (16, 128, 16));
            assert_eq!(u.member_slabs, [i as u64]);
        }
    }

    #[test]
    fn fused_64_two_units() {
        let g = ArrayGeometry::default();
        let m = units_for_mode(&g, ModeKind::Fused { group_height: 64 }, &[]).unwrap();
        assert_eq!(m.units.len(), 2);
        assert_eq!(m.units[1].member_slabs, [4, 5, 6, 7]);
        assert!(m.units.iter().all(|u| u.height == 64 && u.drain_depth == 64));
        assert_eq!(m.label(), "fused64×2");
    }

    #[test]
    fn monolithic_with_trailing_gating() {
        let g = ArrayGeometry::default();
        let m = units_for_mode(&g, ModeKind::Monolithic, &[7, 5, 6]).unwrap();
        assert_eq!(m.units.len(), 1);
        let u = &m.units[0];
        assert_eq!(u.height, 128);
        assert_eq!(u.drain_depth, 128);
        assert_eq!(u.gated, [5, 6, 7]);
        assert_eq!(u.active_height(&g), 80);
        assert_eq!(m.gated_slabs, [5, 6, 7]);
    }

    #[test]
    fn gating_errors() {
        let g = ArrayGeometry::default();
        assert_eq!(
            units_for_mode(&g, ModeKind::Monolithic, &[3]),
            Err(GeometryError::GatedSlabNotTrailing { slab: 3, group: 0 })
        );
        assert_eq!(
            units_for_mode(&g, ModeKind::Fused { group_height: 48 }, &[]),
            Err(GeometryError::InvalidFusionHeight(48))
        );
        assert_eq!(
            units_for_mode(&g, ModeKind::Independent, &[9]),
            Err(GeometryError::UnknownSlab(9))
        );
        let all: Vec<u64> = (0..8).collect();
        assert_eq!(
            units_for_mode(&g, ModeKind::Independent, &all),
            Err(GeometryError::AllSlabsGated)
        );
    }

    #[test]
    fn fully_gated_group_is_dropped() {
        let g = ArrayGeometry::default();
        let m = units_for_mode(&g, ModeKind::Fused { group_height: 64 }, &[3, 4, 5, 6, 7]).unwrap();
        assert_eq!(m.units.len(), 1);
        assert_eq!(m.units[0].gated, [3]);
    }

    #[test]
    fn gated_independent_slabs_leave_dense_ids() {
        let g = ArrayGeometry::default();
        let m = units_for_mode(&g, ModeKind::Independent, &[0, 2]).unwrap();
        assert_eq!(m.units.len(), 6);
        assert_eq!(m.units[0].member_slabs, [1]);
        assert_eq!(m.units[1].member_slabs, [3]);
        assert!(m.units.iter().enumerate().all(|(i, u)| u.unit_id == i));
    }
}
