//! Rejection-free kinetic Monte Carlo (BKL / n-fold way).
//!
//! The engine keeps a catalog of the current rates of the active moves and
//! their running total. After each event only moves whose rate reads one of
//! the changed sites are re-evaluated. Moves are selected by a linear scan.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::{Decomposition, GroupId, SpinConfiguration};
use crate::models::{Move, RateModel};

/// Recompute the running total from scratch every this many events.
const RESUM_INTERVAL: u64 = 4096;

/// A frozen-exterior run of one scheduled group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubLatticeRun {
    pub group: GroupId,
    pub duration: f64,
}

/// Random stream for stage `stage` of sweep `sweep` under `master_seed`.
///
/// Each (sweep, stage) pair gets its own ChaCha stream, so a schedule
/// reproduces regardless of the order in which stages are executed.
pub fn stage_rng(master_seed: u64, sweep: u64, stage: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(sweep.wrapping_mul(8).wrapping_add(stage));
    rng
}

#[derive(Clone, Debug)]
pub struct KmcEngine<'a> {
    model: &'a RateModel,
    decomposition: &'a Decomposition,
    moves: Vec<Move>,
    /// site -> moves whose rate reads that site
    dependents: Vec<Vec<usize>>,
    active: Vec<usize>,
    is_active: Vec<bool>,
    rates: Vec<f64>,
    total: f64,
    state: SpinConfiguration,
    clock: f64,
    events: u64,
    rng: ChaCha8Rng,
    stamp: Vec<u64>,
    generation: u64,
}

impl<'a> KmcEngine<'a> {
    pub fn new(
        model: &'a RateModel,
        decomposition: &'a Decomposition,
        state: SpinConfiguration,
        seed: u64,
    ) -> Self {
        let lattice = decomposition.lattice();
        assert_eq!(state.len(), lattice.n_sites(), "configuration size mismatch");
        let moves = model.enumerate_moves(lattice);
        let mut dependents = vec![Vec::new(); lattice.n_sites()];
        for (i, mv) in moves.iter().enumerate() {
            for s in model.read_sites(lattice, mv) {
                dependents[s].push(i);
            }
        }
        let n = moves.len();
        Self {
            model,
            decomposition,
            moves,
            dependents,
            active: Vec::new(),
            is_active: vec![false; n],
            rates: vec![0.0; n],
            total: 0.0,
            state,
            clock: 0.0,
            events: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stamp: vec![0; n],
            generation: 0,
        }
    }

    pub fn state(&self) -> &SpinConfiguration {
        &self.state
    }

    pub fn set_state(&mut self, state: SpinConfiguration) {
        assert_eq!(state.len(), self.state.len(), "configuration size mismatch");
        self.state = state;
    }

    pub fn into_state(self) -> SpinConfiguration {
        self.state
    }

    /// Total simulated time over all runs.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn total_rate(&self) -> f64 {
        self.total
    }

    pub fn set_rng(&mut self, rng: ChaCha8Rng) {
        self.rng = rng;
    }

    pub fn decomposition(&self) -> &Decomposition {
        self.decomposition
    }

    pub fn model(&self) -> &RateModel {
        self.model
    }

    fn load_catalog(&mut self, group: Option<GroupId>) {
        let lattice = self.decomposition.lattice();
        self.active.clear();
        self.is_active.iter_mut().for_each(|a| *a = false);
        self.rates.iter_mut().for_each(|r| *r = 0.0);
        for (i, mv) in self.moves.iter().enumerate() {
            let on = group.is_none_or(|g| self.decomposition.group_of(mv.primary_site()) == g);
            if on {
                self.active.push(i);
                self.is_active[i] = true;
                self.rates[i] = self.model.rate_unchecked(lattice, &self.state, mv);
            }
        }
        self.resum();
    }

    fn resum(&mut self) {
        self.total = self.active.iter().map(|&i| self.rates[i]).sum();
    }

    /// Sum of active rates evaluated from scratch.
    pub fn recomputed_total(&self) -> f64 {
        let lattice = self.decomposition.lattice();
        self.active
            .iter()
            .map(|&i| self.model.rate_unchecked(lattice, &self.state, &self.moves[i]))
            .sum()
    }

    fn apply(&mut self, index: usize) {
        let mv = self.moves[index];
        mv.apply(&mut self.state);
        self.events += 1;
        self.generation += 1;
        let lattice = self.decomposition.lattice();
        for site in mv.sites().iter() {
            for &j in &self.dependents[site] {
                if !self.is_active[j] || self.stamp[j] == self.generation {
                    continue;
                }
                self.stamp[j] = self.generation;
                let new = self.model.rate_unchecked(lattice, &self.state, &self.moves[j]);
                self.total += new - self.rates[j];
                self.rates[j] = new;
            }
        }
        if self.events.is_multiple_of(RESUM_INTERVAL) {
            self.resum();
        }
    }

    fn select(&mut self) -> usize {
        let target = self.rng.random::<f64>() * self.total;
        let mut acc = 0.0;
        let mut last = self.active[0];
        for &i in &self.active {
            let r = self.rates[i];
            if r > 0.0 {
                acc += r;
                last = i;
                if acc > target {
                    return i;
                }
            }
        }
        // roundoff at the top of the cumulative sum
        last
    }

    fn simulate<F>(&mut self, duration: f64, group: Option<GroupId>, mut observe: F)
    where
        F: FnMut(&SpinConfiguration, f64),
    {
        assert!(duration >= 0.0, "duration must be nonnegative");
        self.load_catalog(group);
        let mut t = 0.0;
        loop {
            if self.total <= 0.0 {
                observe(&self.state, duration - t);
                break;
            }
            let u: f64 = self.rng.random();
            let wait = -(1.0 - u).ln() / self.total;
            if t + wait > duration {
                observe(&self.state, duration - t);
                break;
            }
            observe(&self.state, wait);
            t += wait;
            let i = self.select();
            self.apply(i);
            if self.total < 0.0 {
                self.resum();
            }
        }
        self.clock += duration;
    }

    /// Simulates the full-lattice chain for `duration` and returns the state
    /// at that time.
    pub fn run_exact(&mut self, duration: f64) -> &SpinConfiguration {
        self.simulate(duration, None, |_, _| {});
        &self.state
    }

    /// As [`run_exact`](Self::run_exact), reporting every holding interval as
    /// `(state, dwell time)`.
    pub fn run_exact_observed<F>(&mut self, duration: f64, observe: F) -> &SpinConfiguration
    where
        F: FnMut(&SpinConfiguration, f64),
    {
        self.simulate(duration, None, observe);
        &self.state
    }

    /// Simulates only the moves whose primary site lies in `run.group`, with
    /// every other site read-only.
    pub fn run_group(&mut self, run: SubLatticeRun) -> &SpinConfiguration {
        self.simulate(run.duration, Some(run.group), |_, _| {});
        &self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{DecompositionKind, Lattice};
    use crate::models::{AdsorptionDesorptionParams, DiffusionParams};

    fn reference_model() -> RateModel {
        RateModel::adsorption(AdsorptionDesorptionParams::default()).unwrap()
    }

    #[test]
    fn zero_duration_is_a_no_op() {
        let l = Lattice::square(3, 3).unwrap();
        let d = Decomposition::whole(&l);
        let m = reference_model();
        let s = SpinConfiguration::from_code(0b1_0110_1001, 9);
        let mut e = KmcEngine::new(&m, &d, s.clone(), 1);
        assert_eq!(e.run_exact(0.0), &s);
        assert_eq!(e.events(), 0);
    }

    #[test]
    fn catalog_total_tracks_full_recompute() {
        let l = Lattice::square(6, 6).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Blocks, 3).unwrap();
        let m = RateModel::adsorption(AdsorptionDesorptionParams {
            beta: 1.0,
            h: 0.0,
            ..AdsorptionDesorptionParams::default()
        })
        .unwrap();
        let mut e = KmcEngine::new(&m, &d, SpinConfiguration::empty(36), 7);
        for step in 0..200u64 {
            e.set_rng(stage_rng(7, step, 0));
            e.run_exact(0.5);
            let full = e.recomputed_total();
            assert!((e.total_rate() - full).abs() <= 1e-10 * full.max(1.0));
            e.run_group(SubLatticeRun {
                group: 1 + (step % 2) as u8,
                duration: 0.3,
            });
            let full = e.recomputed_total();
            assert!((e.total_rate() - full).abs() <= 1e-10 * full.max(1.0));
        }
        assert!(e.events() > 1000);
        assert!((e.clock() - 200.0 * 0.8).abs() < 1e-9);
    }

    #[test]
    fn group_runs_freeze_the_exterior() {
        let l = Lattice::square(6, 6).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Stripes, 2).unwrap();
        let m = reference_model();
        for seed in 0..20 {
            let start = SpinConfiguration::from_code(0x5_A5A5_A5A5 ^ seed, 36);
            let mut e = KmcEngine::new(&m, &d, start.clone(), seed);
            let after = e
                .run_group(SubLatticeRun {
                    group: 2,
                    duration: 3.0,
                })
                .clone();
            for x in 0..36 {
                if d.group_of(x) != 2 {
                    assert_eq!(after.get(x), start.get(x));
                }
            }
            assert_ne!(after, start);
        }
    }

    #[test]
    fn empty_group_leaves_state_alone() {
        let l = Lattice::square(4, 4).unwrap();
        let d = Decomposition::whole(&l);
        let m = reference_model();
        let s = SpinConfiguration::full(16);
        let mut e = KmcEngine::new(&m, &d, s.clone(), 3);
        let out = e.run_group(SubLatticeRun {
            group: 2,
            duration: 10.0,
        });
        assert_eq!(out, &s);
    }

    #[test]
    fn diffusion_conserves_particle_number() {
        let l = Lattice::square(5, 4).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Stripes, 1).unwrap();
        let m = RateModel::diffusion(DiffusionParams::default()).unwrap();
        let s = SpinConfiguration::from_code(0b1011_0010_0111_0001_1010, 20);
        let mut e = KmcEngine::new(&m, &d, s.clone(), 11);
        e.run_exact(25.0);
        assert_eq!(e.state().occupancy(), s.occupancy());
        e.run_group(SubLatticeRun {
            group: 1,
            duration: 25.0,
        });
        assert_eq!(e.state().occupancy(), s.occupancy());
        assert!(e.events() > 10);
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let l = Lattice::square(5, 5).unwrap();
        let d = Decomposition::whole(&l);
        let m = reference_model();
        let run = |seed| {
            let mut e = KmcEngine::new(&m, &d, SpinConfiguration::full(25), seed);
            e.run_exact(20.0).clone()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn single_site_occupancy_fraction() {
        // two-state chain: adsorb at 1, desorb at e^{-1.8}
        let l = Lattice::square(1, 1).unwrap();
        let d = Decomposition::whole(&l);
        let m = reference_model();
        let mut e = KmcEngine::new(&m, &d, SpinConfiguration::full(1), 2024);
        let batches = 50;
        let mut fractions = Vec::new();
        for _ in 0..batches {
            let (mut occ, mut tot) = (0.0, 0.0);
            e.run_exact_observed(8000.0, |s, dt| {
                tot += dt;
                if s.get(0) == 1 {
                    occ += dt;
                }
            });
            fractions.push(occ / tot);
        }
        assert!(e.events() >= 100_000);
        let mean = fractions.iter().sum::<f64>() / batches as f64;
        let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let se = (var / batches as f64).sqrt();
        let expected = 1.0 / (1.0 + (-1.8f64).exp());
        assert!((expected - 0.8581).abs() < 1e-4);
        assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected} (se {se})");
    }
}
