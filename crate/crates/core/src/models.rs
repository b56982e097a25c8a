//! Transition-rate families: Arrhenius adsorption/desorption by single spin
//! flips, and exclusion diffusion by nearest-neighbor swaps.
//!
//! Every move has a primary site (the flip site, or the origin of a swap).
//! The split rates `q1`, `q2` keep a move's rate in the group that owns its
//! primary site and zero it in the other, so `q1 + q2 = q` exactly and
//! `q = 0` forces `q1 = q2 = 0`.

use crate::error::{Error, Result};
use crate::lattice::{Decomposition, GroupId, Lattice, Site, SpinConfiguration};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdsorptionDesorptionParams {
    pub c1: f64,
    pub c2: f64,
    pub beta: f64,
    pub j0: f64,
    pub h: f64,
}

impl Default for AdsorptionDesorptionParams {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            beta: 2.0,
            j0: 0.3,
            h: 0.9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionParams {
    /// Nearest-neighbor hop rate `p(x,y)`.
    pub hop: f64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self { hop: 0.25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateModel {
    AdsorptionDesorption(AdsorptionDesorptionParams),
    Diffusion(DiffusionParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    Flip(Site),
    Swap { from: Site, to: Site },
}

impl Move {
    pub fn primary_site(&self) -> Site {
        match *self {
            Move::Flip(x) => x,
            Move::Swap { from, .. } => from,
        }
    }

    /// Sites whose value the move can change.
    pub fn sites(&self) -> MoveSites {
        match *self {
            Move::Flip(x) => MoveSites::One(x),
            Move::Swap { from, to } => MoveSites::Two(from, to),
        }
    }

    pub fn apply(&self, sigma: &mut SpinConfiguration) {
        match *self {
            Move::Flip(x) => sigma.flip(x),
            Move::Swap { from, to } => {
                let (a, b) = (sigma.get(from), sigma.get(to));
                sigma.set(from, b);
                sigma.set(to, a);
            }
        }
    }

    pub fn applied(&self, sigma: &SpinConfiguration) -> SpinConfiguration {
        let mut out = sigma.clone();
        self.apply(&mut out);
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub enum MoveSites {
    One(Site),
    Two(Site, Site),
}

impl MoveSites {
    pub fn iter(&self) -> impl Iterator<Item = Site> {
        let (a, b) = match *self {
            MoveSites::One(x) => (x, None),
            MoveSites::Two(x, y) => (x, Some(y)),
        };
        std::iter::once(a).chain(b)
    }
}

impl RateModel {
    pub fn adsorption(params: AdsorptionDesorptionParams) -> Result<Self> {
        let p = params;
        if !(p.c1 >= 0.0 && p.c2 >= 0.0 && p.beta >= 0.0) {
            return Err(Error::Config("c1, c2 and beta must be nonnegative".into()));
        }
        if ![p.c1, p.c2, p.beta, p.j0, p.h].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("rate parameters must be finite".into()));
        }
        Ok(RateModel::AdsorptionDesorption(params))
    }

    pub fn diffusion(params: DiffusionParams) -> Result<Self> {
        if !(params.hop >= 0.0 && params.hop.is_finite()) {
            return Err(Error::Config("hop rate must be finite and nonnegative".into()));
        }
        Ok(RateModel::Diffusion(params))
    }

    pub fn name(&self) -> &'static str {
        match self {
            RateModel::AdsorptionDesorption(_) => "adsorption",
            RateModel::Diffusion(_) => "diffusion",
        }
    }

    pub fn conserves_particles(&self) -> bool {
        matches!(self, RateModel::Diffusion(_))
    }

    /// Most sites a single move changes.
    pub fn sites_per_move(&self) -> usize {
        match self {
            RateModel::AdsorptionDesorption(_) => 1,
            RateModel::Diffusion(_) => 2,
        }
    }

    fn check_kind(&self, mv: &Move) -> Result<()> {
        match (self, mv) {
            (RateModel::AdsorptionDesorption(_), Move::Flip(_))
            | (RateModel::Diffusion(_), Move::Swap { .. }) => Ok(()),
            _ => Err(Error::WrongMoveKind),
        }
    }

    /// `q(σ, σ')` for the transition `σ -> move(σ)`.
    pub fn rate(&self, lattice: &Lattice, sigma: &SpinConfiguration, mv: &Move) -> Result<f64> {
        self.check_kind(mv)?;
        Ok(self.rate_unchecked(lattice, sigma, mv))
    }

    /// As [`rate`](Self::rate) without the move-kind check.
    #[inline]
    pub fn rate_unchecked(&self, lattice: &Lattice, sigma: &SpinConfiguration, mv: &Move) -> f64 {
        match (self, *mv) {
            (RateModel::AdsorptionDesorption(p), Move::Flip(x)) => {
                if sigma.get(x) == 0 {
                    p.c1
                } else {
                    let occupied: u32 = lattice
                        .neighbors(x)
                        .iter()
                        .map(|&y| u32::from(sigma.get(y)))
                        .sum();
                    let u = p.j0 * f64::from(occupied) + p.h;
                    p.c2 * (-p.beta * u).exp()
                }
            }
            (RateModel::Diffusion(p), Move::Swap { from, to })
                if sigma.get(from) == 1 && sigma.get(to) == 0 => {
                    p.hop
                }
            _ => 0.0,
        }
    }

    /// Split rate `q_g`: the full rate if the move's primary site is in `group`, else 0.
    pub fn group_restricted_rate(
        &self,
        decomposition: &Decomposition,
        group: GroupId,
        sigma: &SpinConfiguration,
        mv: &Move,
    ) -> Result<f64> {
        if group != 1 && group != 2 {
            return Err(Error::InvalidGroup(group));
        }
        let q = self.rate(decomposition.lattice(), sigma, mv)?;
        Ok(if decomposition.group_of(mv.primary_site()) == group {
            q
        } else {
            0.0
        })
    }

    /// All moves with primary site `site`.
    pub fn moves_at(&self, lattice: &Lattice, site: Site) -> Vec<Move> {
        match self {
            RateModel::AdsorptionDesorption(_) => vec![Move::Flip(site)],
            RateModel::Diffusion(_) => lattice
                .neighbors(site)
                .iter()
                .map(|&to| Move::Swap { from: site, to })
                .collect(),
        }
    }

    /// Every flip, or every ordered nearest-neighbor swap, ordered by primary site.
    pub fn enumerate_moves(&self, lattice: &Lattice) -> Vec<Move> {
        (0..lattice.n_sites())
            .flat_map(|x| self.moves_at(lattice, x))
            .collect()
    }

    /// Sites whose values a move's rate reads.
    pub fn read_sites(&self, lattice: &Lattice, mv: &Move) -> Vec<Site> {
        match (self, *mv) {
            (RateModel::AdsorptionDesorption(p), Move::Flip(x)) => {
                let mut out = vec![x];
                if p.j0 != 0.0 && p.beta != 0.0 && p.c2 != 0.0 {
                    out.extend_from_slice(lattice.neighbors(x));
                }
                out
            }
            (_, Move::Swap { from, to }) => vec![from, to],
            (_, Move::Flip(x)) => vec![x],
        }
    }

    /// Sites read or written by any move of the per-site generator at `site`.
    fn footprint(&self, lattice: &Lattice, site: Site) -> (Vec<Site>, Vec<Site>) {
        let mut reads = Vec::new();
        let mut writes = Vec::new();
        for mv in self.moves_at(lattice, site) {
            reads.extend(self.read_sites(lattice, &mv));
            writes.extend(mv.sites().iter());
        }
        reads.sort_unstable();
        reads.dedup();
        writes.sort_unstable();
        writes.dedup();
        (reads, writes)
    }

    /// Whether the per-site generators at `a` and `b` can fail to commute:
    /// one writes a site the other reads or writes.
    pub fn generators_interact(&self, lattice: &Lattice, a: Site, b: Site) -> bool {
        if a == b {
            return true;
        }
        let (ra, wa) = self.footprint(lattice, a);
        let (rb, wb) = self.footprint(lattice, b);
        let meets = |x: &[Site], y: &[Site]| x.iter().any(|s| y.contains(s));
        meets(&wa, &rb) || meets(&wb, &ra) || meets(&wa, &wb)
    }

    /// Primary sites whose generators have a move writing `site`.
    pub fn writers_of(&self, lattice: &Lattice, site: Site) -> Vec<Site> {
        match self {
            RateModel::AdsorptionDesorption(_) => vec![site],
            RateModel::Diffusion(_) => {
                let mut out = vec![site];
                out.extend_from_slice(lattice.neighbors(site));
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DecompositionKind;
    use proptest::prelude::*;

    fn reference_model() -> RateModel {
        RateModel::adsorption(AdsorptionDesorptionParams::default()).unwrap()
    }

    #[test]
    fn adsorption_on_empty_site() {
        let l = Lattice::square(3, 3).unwrap();
        let s = SpinConfiguration::empty(9);
        assert_eq!(reference_model().rate(&l, &s, &Move::Flip(4)).unwrap(), 1.0);
    }

    #[test]
    fn desorption_of_isolated_particle() {
        let l = Lattice::square(3, 3).unwrap();
        let mut s = SpinConfiguration::empty(9);
        s.set(4, 1);
        let q = reference_model().rate(&l, &s, &Move::Flip(4)).unwrap();
        assert!((q - (-1.8f64).exp()).abs() < 1e-15);
        assert!((q - 0.165299).abs() < 1e-6);
    }

    #[test]
    fn desorption_with_neighbors() {
        let l = Lattice::square(3, 3).unwrap();
        let s = SpinConfiguration::full(9);
        let q = reference_model().rate(&l, &s, &Move::Flip(0)).unwrap();
        // U = 0.3 * 4 + 0.9
        assert!((q - (-2.0f64 * 2.1).exp()).abs() < 1e-15);
    }

    #[test]
    fn diffusion_needs_a_particle_to_move() {
        let l = Lattice::square(3, 3).unwrap();
        let m = RateModel::diffusion(DiffusionParams::default()).unwrap();
        let mut s = SpinConfiguration::empty(9);
        for mv in m.moves_at(&l, 0) {
            assert_eq!(m.rate(&l, &s, &mv).unwrap(), 0.0);
        }
        s.set(0, 1);
        let mv = Move::Swap { from: 0, to: 1 };
        assert_eq!(m.rate(&l, &s, &mv).unwrap(), 0.25);
        s.set(1, 1);
        assert_eq!(m.rate(&l, &s, &mv).unwrap(), 0.0);
    }

    #[test]
    fn wrong_move_kind() {
        let l = Lattice::square(2, 2).unwrap();
        let s = SpinConfiguration::empty(4);
        let swap = Move::Swap { from: 0, to: 1 };
        assert_eq!(reference_model().rate(&l, &s, &swap), Err(Error::WrongMoveKind));
        let diff = RateModel::diffusion(DiffusionParams::default()).unwrap();
        assert_eq!(diff.rate(&l, &s, &Move::Flip(0)), Err(Error::WrongMoveKind));
    }

    #[test]
    fn move_counts() {
        let l = Lattice::square(2, 2).unwrap();
        assert_eq!(reference_model().enumerate_moves(&l).len(), 4);
        let diff = RateModel::diffusion(DiffusionParams::default()).unwrap();
        let moves = diff.enumerate_moves(&l);
        assert_eq!(moves.len(), 8);
        let mut dedup = moves.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 8);
        let dot = Lattice::square(1, 1).unwrap();
        assert_eq!(reference_model().enumerate_moves(&dot).len(), 1);
    }

    #[test]
    fn split_rates_on_whole_lattice() {
        let l = Lattice::square(3, 3).unwrap();
        let d = Decomposition::whole(&l);
        let m = reference_model();
        let s = SpinConfiguration::from_code(0b101_100_011, 9);
        for mv in m.enumerate_moves(&l) {
            assert_eq!(
                m.group_restricted_rate(&d, 1, &s, &mv).unwrap(),
                m.rate(&l, &s, &mv).unwrap()
            );
            assert_eq!(m.group_restricted_rate(&d, 2, &s, &mv).unwrap(), 0.0);
        }
        assert_eq!(
            m.group_restricted_rate(&d, 3, &s, &Move::Flip(0)),
            Err(Error::InvalidGroup(3))
        );
    }

    #[test]
    fn split_rates_sum_exhaustively_on_two_by_two() {
        let l = Lattice::square(2, 2).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Blocks, 1).unwrap();
        let models = [
            reference_model(),
            RateModel::diffusion(DiffusionParams::default()).unwrap(),
        ];
        for m in models {
            for code in 0..16 {
                let s = SpinConfiguration::from_code(code, 4);
                for mv in m.enumerate_moves(&l) {
                    let q = m.rate(&l, &s, &mv).unwrap();
                    let q1 = m.group_restricted_rate(&d, 1, &s, &mv).unwrap();
                    let q2 = m.group_restricted_rate(&d, 2, &s, &mv).unwrap();
                    assert_eq!(q1 + q2, q);
                    assert!(q1 == 0.0 || q2 == 0.0);
                    if d.group_of(mv.primary_site()) == 2 {
                        assert_eq!(q1, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn generator_interaction() {
        let l = Lattice::square(4, 4).unwrap();
        let m = reference_model();
        assert!(m.generators_interact(&l, 0, 1));
        assert!(!m.generators_interact(&l, 0, 2));
        assert!(!m.generators_interact(&l, 0, 5));
        let free = RateModel::adsorption(AdsorptionDesorptionParams {
            j0: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(!free.generators_interact(&l, 0, 1));
        let diff = RateModel::diffusion(DiffusionParams::default()).unwrap();
        assert!(diff.generators_interact(&l, 0, 2));
        assert!(diff.generators_interact(&l, 0, 5));
        assert!(!diff.generators_interact(&l, 0, 10));
    }

    proptest! {
        #[test]
        fn rates_are_finite_and_nonnegative(code in any::<u16>(), j0 in -2.0f64..2.0, h in -2.0f64..2.0) {
            let l = Lattice::square(4, 4).unwrap();
            let s = SpinConfiguration::from_code(code as u64, 16);
            let m = RateModel::adsorption(AdsorptionDesorptionParams { j0, h, ..Default::default() }).unwrap();
            for mv in m.enumerate_moves(&l) {
                let q = m.rate(&l, &s, &mv).unwrap();
                prop_assert!(q.is_finite() && q >= 0.0);
                prop_assert_eq!(mv.applied(&mv.applied(&s)), s.clone());
            }
        }

        #[test]
        fn swaps_conserve_particles(code in any::<u16>()) {
            let l = Lattice::square(4, 4).unwrap();
            let s = SpinConfiguration::from_code(code as u64, 16);
            let m = RateModel::diffusion(DiffusionParams::default()).unwrap();
            for mv in m.enumerate_moves(&l) {
                if m.rate(&l, &s, &mv).unwrap() > 0.0 {
                    prop_assert_eq!(mv.applied(&s).occupancy(), s.occupancy());
                }
                prop_assert_eq!(mv.applied(&mv.applied(&s)), s.clone());
            }
        }
    }
}
