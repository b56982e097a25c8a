//! Periodic rectangular lattices, occupancy configurations and two-group
//! sub-lattice decompositions.
//!
//! Sites are flat indices `x2 * width + x1`. Neighborhoods use the periodic
//! Manhattan distance, so on narrow lattices wrap-around can make several
//! offsets land on the same site; neighborhoods store distinct sites only and
//! never contain the site itself.

use std::fmt;

use crate::error::{Error, Result};

pub type Site = usize;

/// Group label of a scheduled sub-lattice group.
pub type GroupId = u8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    width: usize,
    height: usize,
    range: usize,
    neighbors: Vec<Vec<Site>>,
}

fn periodic_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

impl Lattice {
    pub fn new(width: usize, height: usize, range: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyLattice { width, height });
        }
        if range == 0 {
            return Err(Error::ZeroRange);
        }
        let n = width * height;
        let mut neighbors = Vec::with_capacity(n);
        for site in 0..n {
            let (x1, x2) = (site % width, site / width);
            let mut hood = Vec::new();
            for other in 0..n {
                if other == site {
                    continue;
                }
                let (y1, y2) = (other % width, other / width);
                let d = periodic_distance(x1, y1, width) + periodic_distance(x2, y2, height);
                if d <= range {
                    hood.push(other);
                }
            }
            neighbors.push(hood);
        }
        Ok(Self {
            width,
            height,
            range,
            neighbors,
        })
    }

    /// Nearest-neighbor lattice.
    pub fn square(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, 1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn interaction_range(&self) -> usize {
        self.range
    }

    pub fn n_sites(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, x1: usize, x2: usize) -> Site {
        (x2 % self.height) * self.width + (x1 % self.width)
    }

    pub fn coords(&self, site: Site) -> (usize, usize) {
        (site % self.width, site / self.width)
    }

    /// The neighborhood of `site` within the interaction range.
    pub fn neighbors(&self, site: Site) -> &[Site] {
        &self.neighbors[site]
    }

    pub fn are_neighbors(&self, a: Site, b: Site) -> bool {
        self.neighbors[a].contains(&b)
    }
}

/// Occupancy values over the lattice sites, each 0 or 1.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfiguration {
    spins: Vec<u8>,
}

impl fmt::Debug for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self
            .spins
            .iter()
            .map(|&v| if v == 1 { '1' } else { '0' })
            .collect();
        write!(f, "σ[{s}]")
    }
}

impl SpinConfiguration {
    pub fn empty(n_sites: usize) -> Self {
        Self {
            spins: vec![0; n_sites],
        }
    }

    pub fn full(n_sites: usize) -> Self {
        Self {
            spins: vec![1; n_sites],
        }
    }

    /// Panics if any value is not 0 or 1.
    pub fn from_spins(spins: Vec<u8>) -> Self {
        assert!(spins.iter().all(|&v| v <= 1), "spins must be 0 or 1");
        Self { spins }
    }

    /// Bit `x` of `code` is the occupancy of site `x`.
    pub fn from_code(code: u64, n_sites: usize) -> Self {
        debug_assert!(n_sites <= 64);
        Self {
            spins: (0..n_sites).map(|x| ((code >> x) & 1) as u8).collect(),
        }
    }

    pub fn code(&self) -> u64 {
        debug_assert!(self.spins.len() <= 64);
        self.spins
            .iter()
            .enumerate()
            .fold(0u64, |acc, (x, &v)| acc | (u64::from(v) << x))
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn get(&self, site: Site) -> u8 {
        self.spins[site]
    }

    pub fn set(&mut self, site: Site, value: u8) {
        debug_assert!(value <= 1);
        self.spins[site] = value;
    }

    pub fn spins(&self) -> &[u8] {
        &self.spins
    }

    pub fn flip(&mut self, site: Site) {
        self.spins[site] ^= 1;
    }

    pub fn flipped(&self, site: Site) -> Self {
        let mut out = self.clone();
        out.flip(site);
        out
    }

    /// Flips every site of `sites` in order (`σ^{x,y,...}`).
    pub fn flipped_all(&self, sites: &[Site]) -> Self {
        let mut out = self.clone();
        for &x in sites {
            out.flip(x);
        }
        out
    }

    pub fn occupancy(&self) -> usize {
        self.spins.iter().map(|&v| v as usize).sum()
    }

    /// Sites where `self` and `other` differ, ascending.
    pub fn difference(&self, other: &Self) -> Vec<Site> {
        self.spins
            .iter()
            .zip(&other.spins)
            .enumerate()
            .filter_map(|(x, (a, b))| (a != b).then_some(x))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecompositionKind {
    /// Checkerboard of `w x w` blocks.
    Blocks,
    /// Vertical bands `w` columns wide.
    Stripes,
    /// A single group covering the whole lattice.
    WholeLattice,
}

impl DecompositionKind {
    pub fn name(self) -> &'static str {
        match self {
            DecompositionKind::Blocks => "blocks",
            DecompositionKind::Stripes => "stripes",
            DecompositionKind::WholeLattice => "whole",
        }
    }
}

impl std::str::FromStr for DecompositionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "blocks" | "checkerboard" => Ok(Self::Blocks),
            "stripes" => Ok(Self::Stripes),
            "whole" | "wholelattice" | "none" => Ok(Self::WholeLattice),
            other => Err(Error::Config(format!("unknown decomposition `{other}`"))),
        }
    }
}

/// Partition of the lattice into groups 1 and 2 with its boundary region.
///
/// Group 1 always contains site (0,0). On the periodic lattice an odd number
/// of blocks or bands along a dimension puts two same-group cells side by side
/// across the seam; that is still a valid split of the generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    lattice: Lattice,
    kind: DecompositionKind,
    width: usize,
    group: Vec<GroupId>,
    boundary: Vec<Site>,
    on_boundary: Vec<bool>,
}

impl Decomposition {
    pub fn build(lattice: &Lattice, kind: DecompositionKind, width: usize) -> Result<Self> {
        let range = lattice.interaction_range();
        let group: Vec<GroupId> = match kind {
            DecompositionKind::WholeLattice => vec![1; lattice.n_sites()],
            DecompositionKind::Blocks | DecompositionKind::Stripes => {
                if width == 0 || !lattice.width().is_multiple_of(width) {
                    return Err(Error::NonDividingWidth {
                        width,
                        dim: lattice.width(),
                    });
                }
                if kind == DecompositionKind::Blocks && !lattice.height().is_multiple_of(width) {
                    return Err(Error::NonDividingWidth {
                        width,
                        dim: lattice.height(),
                    });
                }
                if width < range {
                    return Err(Error::WidthTooSmall { width, range });
                }
                (0..lattice.n_sites())
                    .map(|site| {
                        let (x1, x2) = lattice.coords(site);
                        let cell = match kind {
                            DecompositionKind::Blocks => x1 / width + x2 / width,
                            _ => x1 / width,
                        };
                        if cell % 2 == 0 {
                            1
                        } else {
                            2
                        }
                    })
                    .collect()
            }
        };
        let on_boundary: Vec<bool> = (0..lattice.n_sites())
            .map(|x| lattice.neighbors(x).iter().any(|&y| group[y] != group[x]))
            .collect();
        let boundary = (0..lattice.n_sites()).filter(|&x| on_boundary[x]).collect();
        let width = if kind == DecompositionKind::WholeLattice {
            lattice.width()
        } else {
            width
        };
        Ok(Self {
            lattice: lattice.clone(),
            kind,
            width,
            group,
            boundary,
            on_boundary,
        })
    }

    /// Trivial decomposition: every site in group 1.
    pub fn whole(lattice: &Lattice) -> Self {
        Self::build(lattice, DecompositionKind::WholeLattice, 1).expect("whole lattice is valid")
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn kind(&self) -> DecompositionKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn group_of(&self, site: Site) -> GroupId {
        self.group[site]
    }

    pub fn groups(&self) -> &[GroupId] {
        &self.group
    }

    pub fn sites_in(&self, group: GroupId) -> impl Iterator<Item = Site> + '_ {
        (0..self.group.len()).filter(move |&x| self.group[x] == group)
    }

    pub fn group_size(&self, group: GroupId) -> usize {
        self.group.iter().filter(|&&g| g == group).count()
    }

    /// The boundary region, ascending.
    pub fn boundary_sites(&self) -> &[Site] {
        &self.boundary
    }

    pub fn is_boundary(&self, site: Site) -> bool {
        self.on_boundary[site]
    }

    /// Whether `a` and `b` interact and sit in different groups.
    pub fn straddles(&self, a: Site, b: Site) -> bool {
        self.group[a] != self.group[b] && self.lattice.are_neighbors(a, b)
    }

    /// Same decomposition with the two group labels exchanged.
    pub fn swapped_groups(&self) -> Self {
        let mut out = self.clone();
        for g in &mut out.group {
            *g = 3 - *g;
        }
        if self.kind == DecompositionKind::WholeLattice {
            // keep the invariant that group 2 is empty
            return self.clone();
        }
        out
    }

    /// Ordered `k`-tuples of distinct boundary sites on which a commutator can
    /// be supported; see [`BoundaryTuples`].
    pub fn boundary_pairs(&self, k: usize) -> BoundaryTuples<'_> {
        BoundaryTuples::new(self, k)
    }
}

/// Iterator over ordered tuples of distinct sites of `∂Λ`. For `k >= 2` the
/// tuple must contain at least one pair of interacting sites from different
/// groups; for `k = 1` every boundary site is yielded.
pub struct BoundaryTuples<'a> {
    decomposition: &'a Decomposition,
    k: usize,
    cursor: Vec<usize>,
    done: bool,
}

impl<'a> BoundaryTuples<'a> {
    fn new(decomposition: &'a Decomposition, k: usize) -> Self {
        assert!((1..=4).contains(&k), "tuple order must be in 1..=4");
        let done = decomposition.boundary.is_empty() || decomposition.boundary.len() < k;
        Self {
            decomposition,
            k,
            cursor: vec![0; k],
            done,
        }
    }

    fn advance(&mut self) {
        let n = self.decomposition.boundary.len();
        for slot in (0..self.k).rev() {
            self.cursor[slot] += 1;
            if self.cursor[slot] < n {
                return;
            }
            self.cursor[slot] = 0;
        }
        self.done = true;
    }

    fn accept(&self) -> bool {
        let c = &self.cursor;
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                if c[i] == c[j] {
                    return false;
                }
            }
        }
        if self.k == 1 {
            return true;
        }
        let sites: Vec<Site> = c.iter().map(|&i| self.decomposition.boundary[i]).collect();
        sites.iter().enumerate().any(|(i, &a)| {
            sites[i + 1..]
                .iter()
                .any(|&b| self.decomposition.straddles(a, b))
        })
    }
}

impl Iterator for BoundaryTuples<'_> {
    type Item = Vec<Site>;

    fn next(&mut self) -> Option<Vec<Site>> {
        while !self.done {
            let hit = self.accept();
            let item: Vec<Site> = self
                .cursor
                .iter()
                .map(|&i| self.decomposition.boundary[i])
                .collect();
            self.advance();
            if hit {
                return Some(item);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn neighborhood_sizes() {
        let l = Lattice::square(4, 5).unwrap();
        for x in 0..l.n_sites() {
            assert_eq!(l.neighbors(x).len(), 4);
        }
        let small = Lattice::square(2, 2).unwrap();
        for x in 0..4 {
            assert_eq!(small.neighbors(x).len(), 2);
        }
        let line = Lattice::square(2, 1).unwrap();
        assert_eq!(line.neighbors(0), &[1]);
        let dot = Lattice::square(1, 1).unwrap();
        assert!(dot.neighbors(0).is_empty());
    }

    #[test]
    fn stripes_width_two_everything_is_boundary() {
        let l = Lattice::square(4, 4).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Stripes, 2).unwrap();
        // brute-force the boundary definition
        // stripes only differ horizontally
        let expected: Vec<Site> = (0..16)
            .filter(|&x| {
                let (x1, _) = l.coords(x);
                [1usize, 3].iter().any(|&d| (x1 / 2) % 2 != (((x1 + d) % 4) / 2) % 2)
            })
            .collect();
        assert_eq!(expected.len(), 16);
        assert_eq!(d.boundary_sites(), expected.as_slice());
        assert_eq!(d.group_size(1), 8);
        assert_eq!(d.group_size(2), 8);
        assert_eq!(d.boundary_pairs(1).count(), 16);
    }

    #[test]
    fn whole_lattice_has_no_boundary() {
        let l = Lattice::square(4, 4).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::WholeLattice, 1).unwrap();
        assert!(d.boundary_sites().is_empty());
        assert_eq!(d.group_size(2), 0);
        assert_eq!(d.boundary_pairs(2).count(), 0);
    }

    #[test]
    fn decomposition_errors() {
        let l = Lattice::square(4, 4).unwrap();
        assert_eq!(
            Decomposition::build(&l, DecompositionKind::Blocks, 3),
            Err(Error::NonDividingWidth { width: 3, dim: 4 })
        );
        let wide = Lattice::new(4, 4, 2).unwrap();
        assert_eq!(
            Decomposition::build(&wide, DecompositionKind::Stripes, 1),
            Err(Error::WidthTooSmall { width: 1, range: 2 })
        );
        let tall = Lattice::square(4, 3).unwrap();
        assert!(Decomposition::build(&tall, DecompositionKind::Stripes, 2).is_ok());
        assert_eq!(
            Decomposition::build(&tall, DecompositionKind::Blocks, 2),
            Err(Error::NonDividingWidth { width: 2, dim: 3 })
        );
    }

    #[test]
    fn checkerboard_groups() {
        let l = Lattice::square(4, 4).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Blocks, 2).unwrap();
        assert_eq!(d.group_of(l.index(0, 0)), 1);
        assert_eq!(d.group_of(l.index(2, 0)), 2);
        assert_eq!(d.group_of(l.index(2, 2)), 1);
        assert_eq!(d.group_of(l.index(1, 3)), 2);
    }

    #[test]
    fn two_by_two_straddling_pairs() {
        let l = Lattice::square(2, 2).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Stripes, 1).unwrap();
        let pairs: Vec<Vec<Site>> = d.boundary_pairs(2).collect();
        assert_eq!(pairs, vec![vec![0, 1], vec![1, 0], vec![2, 3], vec![3, 2]]);
    }

    #[test]
    fn tuples_need_a_straddling_pair() {
        let l = Lattice::square(4, 4).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Stripes, 2).unwrap();
        for t in d.boundary_pairs(3) {
            assert_eq!(t.len(), 3);
            assert!(t.iter().all(|&x| d.is_boundary(x)));
            let straddle = (0..3).any(|i| (i + 1..3).any(|j| d.straddles(t[i], t[j])));
            assert!(straddle);
        }
    }

    #[test]
    fn odd_band_counts_are_accepted() {
        let l = Lattice::square(3, 3).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Blocks, 1).unwrap();
        assert_eq!(d.group_size(1), 5);
        assert_eq!(d.group_size(2), 4);
        assert_eq!(d.boundary_sites().len(), 9);
    }

    proptest! {
        #[test]
        fn index_round_trip(w in 1usize..9, h in 1usize..9, x1 in 0usize..9, x2 in 0usize..9) {
            let l = Lattice::square(w, h).unwrap();
            let (x1, x2) = (x1 % w, x2 % h);
            let site = l.index(x1, x2);
            prop_assert!(site < l.n_sites());
            prop_assert_eq!(l.coords(site), (x1, x2));
        }

        #[test]
        fn flip_is_an_involution(code in any::<u16>(), site in 0usize..16) {
            let s = SpinConfiguration::from_code(code as u64, 16);
            prop_assert_eq!(s.flipped(site).flipped(site), s.clone());
            prop_assert_eq!(SpinConfiguration::from_code(s.code(), 16), s);
        }

        #[test]
        fn partition_and_boundary_monotonicity(cells in 1usize..5, w in 1usize..4) {
            let n = cells * w;
            let l = Lattice::square(n, n).unwrap();
            let blocks = Decomposition::build(&l, DecompositionKind::Blocks, w).unwrap();
            let stripes = Decomposition::build(&l, DecompositionKind::Stripes, w).unwrap();
            for d in [&blocks, &stripes] {
                prop_assert_eq!(d.group_size(1) + d.group_size(2), n * n);
                for x in 0..n * n {
                    let expect = l.neighbors(x).iter().any(|&y| d.group_of(y) != d.group_of(x));
                    prop_assert_eq!(d.is_boundary(x), expect);
                }
            }
            prop_assert!(stripes.boundary_sites().len() <= blocks.boundary_sites().len());
        }
    }
}
