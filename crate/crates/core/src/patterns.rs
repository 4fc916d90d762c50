//! Candidate interference patterns.
//!
//! A pattern is an ON/OFF activity vector over the cells. Rows are stored as
//! bit masks (bit `b` set iff cell `b` is on), so at most 64 cells are
//! representable. Every constructor returns rows in canonical order:
//! lexicographic by activity vector with cell 0 as the most significant entry.

use serde::{Deserialize, Serialize};

use crate::netmodel::{CellKind, NetworkTopology};
use crate::{Error, Result};

/// Largest cell count accepted by [`enumerate_all`].
pub const DEFAULT_ENUMERATION_CAP: usize = 15;

const MAX_CELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    All,
    Reuse1,
    Cluster,
    Feature,
    Custom,
}

/// Distinct, non-empty activity vectors. Invariant: `masks` is sorted in
/// canonical order and every mask is non-zero and below `1 << cells`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PatternSetRepr", into = "PatternSetRepr")]
pub struct PatternSet {
    cells: usize,
    masks: Vec<u64>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternSetRepr {
    rows: Vec<Vec<u8>>,
    #[serde(default = "custom")]
    provenance: Provenance,
}

fn custom() -> Provenance {
    Provenance::Custom
}

impl TryFrom<PatternSetRepr> for PatternSet {
    type Error = Error;
    fn try_from(r: PatternSetRepr) -> Result<Self> {
        PatternSet::from_rows(&r.rows, r.provenance)
    }
}

impl From<PatternSet> for PatternSetRepr {
    fn from(p: PatternSet) -> Self {
        PatternSetRepr { rows: (0..p.len()).map(|i| p.row(i)).collect(), provenance: p.provenance }
    }
}

/// Sort key realizing the canonical order: cell 0 compares first.
fn canonical_key(mask: u64, cells: usize) -> u64 {
    mask.reverse_bits() >> (64 - cells)
}

impl PatternSet {
    /// Build from bit masks; rows are sorted into canonical order.
    pub fn from_masks(cells: usize, mut masks: Vec<u64>, provenance: Provenance) -> Result<Self> {
        if cells == 0 || cells > MAX_CELLS {
            return Err(Error::Config(format!("pattern width must lie in 1..={MAX_CELLS}, got {cells}")));
        }
        if masks.is_empty() {
            return Err(Error::Config("pattern set is empty".into()));
        }
        let full = if cells == 64 { u64::MAX } else { (1u64 << cells) - 1 };
        for &m in &masks {
            if m == 0 {
                return Err(Error::Config("all-off pattern is not allowed".into()));
            }
            if m & !full != 0 {
                return Err(Error::Dimension(format!("pattern {m:#b} wider than {cells} cells")));
            }
        }
        masks.sort_unstable_by_key(|&m| canonical_key(m, cells));
        if masks.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate pattern rows".into()));
        }
        Ok(PatternSet { cells, masks, provenance })
    }

    /// Build from explicit 0/1 rows.
    pub fn from_rows(rows: &[Vec<u8>], provenance: Provenance) -> Result<Self> {
        let cells = rows.first().map_or(0, Vec::len);
        let mut masks = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != cells {
                return Err(Error::Dimension("pattern rows differ in length".into()));
            }
            let mut m = 0u64;
            for (b, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m |= 1 << b,
                    _ => return Err(Error::Domain(format!("pattern entry {v} is not 0 or 1"))),
                }
            }
            masks.push(m);
        }
        PatternSet::from_masks(cells, masks, provenance)
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    #[inline]
    pub fn row_mask(&self, i: usize) -> u64 {
        self.masks[i]
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn row(&self, i: usize) -> Vec<u8> {
        (0..self.cells).map(|b| ((self.masks[i] >> b) & 1) as u8).collect()
    }

    #[inline]
    pub fn is_active(&self, i: usize, b: usize) -> bool {
        self.masks[i] & (1 << b) != 0
    }

    pub fn index_of(&self, row: &[u8]) -> Option<usize> {
        if row.len() != self.cells {
            return None;
        }
        let m = row.iter().enumerate().fold(0u64, |m, (b, &v)| if v != 0 { m | 1 << b } else { m });
        self.index_of_mask(m)
    }

    pub fn index_of_mask(&self, mask: u64) -> Option<usize> {
        let key = canonical_key(mask, self.cells);
        self.masks.binary_search_by_key(&key, |&m| canonical_key(m, self.cells)).ok()
    }

    /// Index of the all-on pattern, if present.
    pub fn all_on_index(&self) -> Option<usize> {
        let full = if self.cells == 64 { u64::MAX } else { (1u64 << self.cells) - 1 };
        self.index_of_mask(full)
    }

    pub fn is_subset_of(&self, other: &PatternSet) -> bool {
        self.cells == other.cells && self.masks.iter().all(|&m| other.index_of_mask(m).is_some())
    }
}

/// Every non-empty activity vector over `cells` cells (`2^cells − 1` rows).
pub fn enumerate_all(cells: usize) -> Result<PatternSet> {
    enumerate_all_with_cap(cells, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_all_with_cap(cells: usize, cap: usize) -> Result<PatternSet> {
    if cells > cap.min(32) {
        return Err(Error::Capacity { what: "cell count for full enumeration", limit: cap.min(32), got: cells });
    }
    if cells == 0 {
        return Err(Error::Config("cell count must be positive".into()));
    }
    PatternSet::from_masks(cells, (1..(1u64 << cells)).collect(), Provenance::All)
}

/// The single all-on pattern.
pub fn reuse1(cells: usize) -> Result<PatternSet> {
    if cells == 0 || cells > MAX_CELLS {
        return Err(Error::Config(format!("cell count must lie in 1..={MAX_CELLS}")));
    }
    let full = if cells == 64 { u64::MAX } else { (1u64 << cells) - 1 };
    PatternSet::from_masks(cells, vec![full], Provenance::Reuse1)
}

/// Assignment of cells to clusters `0..count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ClusterMap {
    assignment: Vec<usize>,
    count: usize,
}

impl ClusterMap {
    /// `assignment[b]` is the cluster of cell `b`; cluster ids must be exactly
    /// `0..C` with every id used.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::Config("cluster map covers no cells".into()));
        }
        let count = assignment.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; count];
        for &c in &assignment {
            used[c] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(Error::Config("cluster ids must be contiguous from 0".into()));
        }
        Ok(ClusterMap { assignment, count })
    }

    pub fn singletons(cells: usize) -> Result<Self> {
        ClusterMap::new((0..cells).collect())
    }

    pub fn cells(&self) -> usize {
        self.assignment.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn cluster_of(&self, b: usize) -> usize {
        self.assignment[b]
    }

    fn members_mask(&self, c: usize) -> u64 {
        self.assignment.iter().enumerate().filter(|(_, &a)| a == c).fold(0, |m, (b, _)| m | 1 << b)
    }
}

impl TryFrom<Vec<usize>> for ClusterMap {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        ClusterMap::new(v)
    }
}

impl From<ClusterMap> for Vec<usize> {
    fn from(c: ClusterMap) -> Self {
        c.assignment
    }
}

/// All `2^C − 1` cluster activity combinations, each cluster switching its
/// member cells together.
pub fn cluster_patterns(cmap: &ClusterMap) -> Result<PatternSet> {
    let c = cmap.count();
    if c > DEFAULT_ENUMERATION_CAP {
        return Err(Error::Capacity { what: "cluster count", limit: DEFAULT_ENUMERATION_CAP, got: c });
    }
    let members: Vec<u64> = (0..c).map(|j| cmap.members_mask(j)).collect();
    let masks = (1..(1u64 << c))
        .map(|sel| (0..c).filter(|j| sel & (1 << j) != 0).fold(0, |m, j| m | members[j]))
        .collect();
    PatternSet::from_masks(cmap.cells(), masks, Provenance::Cluster)
}

/// Macro/pico grouping of the standard layout: macros `0..M` come first,
/// followed by `M` equal blocks of picos, block `m` belonging to macro `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TierLayout {
    pub macros: usize,
    pub picos_per_macro: usize,
}

impl TierLayout {
    pub fn detect(topo: &NetworkTopology) -> Result<Self> {
        let kinds: Vec<CellKind> = topo.cells().iter().map(|c| c.kind).collect();
        let macros = kinds.iter().take_while(|&&k| k == CellKind::Macro).count();
        if macros == 0 || kinds[macros..].iter().any(|&k| k != CellKind::Pico) {
            return Err(Error::Config("layout must list macros first, then picos".into()));
        }
        let picos = kinds.len() - macros;
        if picos == 0 || picos % macros != 0 {
            return Err(Error::Config(format!("{picos} picos cannot be split evenly across {macros} macros")));
        }
        Ok(TierLayout { macros, picos_per_macro: picos / macros })
    }

    pub fn cells(&self) -> usize {
        self.macros * (1 + self.picos_per_macro)
    }

    fn pico_block(&self, m: usize) -> u64 {
        let start = self.macros + m * self.picos_per_macro;
        (start..start + self.picos_per_macro).fold(0, |acc, b| acc | 1 << b)
    }

    /// Each macro alone plus one cluster per pico block (`2M` clusters).
    pub fn cluster_map(&self) -> ClusterMap {
        let mut a: Vec<usize> = (0..self.macros).collect();
        for m in 0..self.macros {
            a.extend(std::iter::repeat_n(self.macros + m, self.picos_per_macro));
        }
        ClusterMap { assignment: a, count: 2 * self.macros }
    }
}

/// Feature pattern set: all pico blocks on; each macro with the pico blocks
/// of the other macros; every single-cell pattern. Duplicate rows (possible
/// with a single macro) are merged.
pub fn feature_patterns(topo: &NetworkTopology) -> Result<PatternSet> {
    let layout = TierLayout::detect(topo)?;
    feature_patterns_for(layout)
}

pub fn feature_patterns_for(layout: TierLayout) -> Result<PatternSet> {
    let b = layout.cells();
    if b > MAX_CELLS {
        return Err(Error::Capacity { what: "cell count", limit: MAX_CELLS, got: b });
    }
    let blocks: Vec<u64> = (0..layout.macros).map(|m| layout.pico_block(m)).collect();
    let all_picos = blocks.iter().fold(0, |a, m| a | m);
    let mut masks = vec![all_picos];
    for m in 0..layout.macros {
        masks.push((1 << m) | (all_picos & !blocks[m]));
    }
    masks.extend((0..b).map(|c| 1u64 << c));
    masks.sort_unstable();
    masks.dedup();
    PatternSet::from_masks(b, masks, Provenance::Feature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Cell, Position};

    fn standard_topology() -> NetworkTopology {
        let mut cells: Vec<Cell> =
            (0..3).map(|m| Cell::macro_cell(m + 1, Position::new(500.0 * m as f64, 0.0))).collect();
        for p in 0..12 {
            cells.push(Cell::pico_cell(p + 4, Position::new(10.0 * p as f64, 100.0)));
        }
        NetworkTopology::new(cells).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_all(3).unwrap().len(), 7);
        let one = enumerate_all(1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.row(0), vec![1]);
        let four = enumerate_all(4).unwrap();
        assert_eq!(four.len(), 15);
        assert!(four.masks().iter().all(|&m| m != 0));
        assert!(matches!(enumerate_all(16), Err(Error::Capacity { .. })));
    }

    #[test]
    fn canonical_order() {
        let p = enumerate_all(2).unwrap();
        assert_eq!(p.row(0), vec![0, 1]);
        assert_eq!(p.row(1), vec![1, 0]);
        assert_eq!(p.row(2), vec![1, 1]);
        let shuffled = PatternSet::from_rows(&[vec![1, 1], vec![0, 1], vec![1, 0]], Provenance::Custom).unwrap();
        assert_eq!(shuffled.masks(), p.masks());
    }

    #[test]
    fn reuse1_rows() {
        assert_eq!(reuse1(3).unwrap().row(0), vec![1, 1, 1]);
        assert_eq!(reuse1(1).unwrap().row(0), vec![1]);
        assert_eq!(reuse1(5).unwrap().len(), 1);
    }

    #[test]
    fn invalid_rows_rejected() {
        assert!(PatternSet::from_rows(&[vec![0, 0]], Provenance::Custom).is_err());
        assert!(PatternSet::from_rows(&[vec![1, 0], vec![1, 0]], Provenance::Custom).is_err());
        assert!(PatternSet::from_rows(&[vec![1, 2]], Provenance::Custom).is_err());
        assert!(PatternSet::from_rows(&[vec![1, 0], vec![1]], Provenance::Custom).is_err());
        assert!(PatternSet::from_rows(&[], Provenance::Custom).is_err());
    }

    #[test]
    fn clusters() {
        let six = ClusterMap::new(vec![0, 1, 2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5]).unwrap();
        assert_eq!(cluster_patterns(&six).unwrap().len(), 63);
        let single = cluster_patterns(&ClusterMap::singletons(4).unwrap()).unwrap();
        assert_eq!(single.masks(), enumerate_all(4).unwrap().masks());
        let one = cluster_patterns(&ClusterMap::new(vec![0; 5]).unwrap()).unwrap();
        assert_eq!(one.masks(), reuse1(5).unwrap().masks());
        assert!(ClusterMap::new(vec![0, 2]).is_err());
    }

    #[test]
    fn tier_clusters_of_standard_layout() {
        let layout = TierLayout::detect(&standard_topology()).unwrap();
        assert_eq!(layout, TierLayout { macros: 3, picos_per_macro: 4 });
        let cmap = layout.cluster_map();
        assert_eq!(cmap.count(), 6);
        assert_eq!(cluster_patterns(&cmap).unwrap().len(), 63);
    }

    #[test]
    fn feature_set_of_standard_layout() {
        let f = feature_patterns(&standard_topology()).unwrap();
        assert_eq!(f.len(), 19);
        // Macro 1 with the pico blocks of macros 2 and 3 (cells 8..15 one-based).
        let mut row = vec![0u8; 15];
        row[0] = 1;
        for b in 7..15 {
            row[b] = 1;
        }
        let i = f.index_of(&row).expect("macro-1 feature pattern present");
        assert_eq!(f.row(i).iter().filter(|&&v| v == 1).count(), 9);
        assert!(f.is_subset_of(&enumerate_all(15).unwrap()));
    }

    #[test]
    fn feature_set_rejects_other_layouts() {
        let bad = NetworkTopology::new(vec![
            Cell::pico_cell(1, Position::default()),
            Cell::macro_cell(2, Position::new(100.0, 0.0)),
        ])
        .unwrap();
        assert!(matches!(feature_patterns(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn feature_set_single_macro_merges_duplicates() {
        let f = feature_patterns_for(TierLayout { macros: 1, picos_per_macro: 4 }).unwrap();
        // All picos, then five singletons; the macro-only row appears once.
        assert_eq!(f.len(), 6);
    }
}
