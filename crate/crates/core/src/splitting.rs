//! Lie and Strang splitting schedules over the two decomposition groups, and
//! the Δt-skeleton chains they generate.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kmc::{stage_rng, KmcEngine, SubLatticeRun};
use crate::lattice::{GroupId, SpinConfiguration};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Lie,
    Strang,
    Exact,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Lie => "lie",
            SchemeKind::Strang => "strang",
            SchemeKind::Exact => "exact",
        }
    }

    /// Order of the local error; `None` for the exact skeleton.
    pub fn local_error_order(self) -> Option<usize> {
        match self {
            SchemeKind::Lie => Some(2),
            SchemeKind::Strang => Some(3),
            SchemeKind::Exact => None,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lie" | "trotter" | "lie-trotter" => Ok(SchemeKind::Lie),
            "strang" => Ok(SchemeKind::Strang),
            "exact" => Ok(SchemeKind::Exact),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// One factor `exp(fraction·Δt·L_group)` of a splitting product; `group`
/// `None` stands for the full generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stage {
    pub group: Option<GroupId>,
    pub fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub dt: f64,
    /// Exchange the roles of groups 1 and 2 in the schedule.
    pub swap_groups: bool,
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            kind,
            dt,
            swap_groups: false,
        })
    }

    pub fn lie(dt: f64) -> Result<Self> {
        Self::new(SchemeKind::Lie, dt)
    }

    pub fn strang(dt: f64) -> Result<Self> {
        Self::new(SchemeKind::Strang, dt)
    }

    pub fn exact(dt: f64) -> Result<Self> {
        Self::new(SchemeKind::Exact, dt)
    }

    pub fn with_swapped_groups(mut self) -> Self {
        self.swap_groups = !self.swap_groups;
        self
    }

    pub fn local_error_order(&self) -> Option<usize> {
        self.kind.local_error_order()
    }

    pub fn stages(&self) -> Vec<Stage> {
        schedule(self.kind, self.swap_groups)
    }
}

/// Factors of the splitting product in execution order.
pub fn schedule(kind: SchemeKind, swap_groups: bool) -> Vec<Stage> {
    let (first, second) = if swap_groups { (2, 1) } else { (1, 2) };
    let st = |g, fraction| Stage {
        group: Some(g),
        fraction,
    };
    match kind {
        SchemeKind::Lie => vec![st(first, 1.0), st(second, 1.0)],
        SchemeKind::Strang => vec![st(first, 0.5), st(second, 1.0), st(first, 0.5)],
        SchemeKind::Exact => vec![Stage {
            group: None,
            fraction: 1.0,
        }],
    }
}

/// Coefficient of the word `L_{w1} L_{w2} ... L_{wn}` in the `Δt^n` term of
/// the product of stage exponentials.
///
/// A word contributes once for every way of cutting it into consecutive
/// (possibly empty) blocks, one per stage, with every letter of a block equal
/// to the stage's group; each block of length `k` carries `fraction^k / k!`.
pub fn word_coefficient(stages: &[Stage], word: &[GroupId]) -> f64 {
    let n = word.len();
    // ways[j] = weight of covering word[..j] with the stages seen so far
    let mut ways = vec![0.0; n + 1];
    ways[0] = 1.0;
    for stage in stages {
        let mut next = vec![0.0; n + 1];
        for start in 0..=n {
            if ways[start] == 0.0 {
                continue;
            }
            let mut weight = ways[start];
            next[start] += weight;
            for (k, &letter) in word[start..].iter().enumerate() {
                if stage.group.is_some_and(|g| g != letter) {
                    break;
                }
                weight *= stage.fraction / (k + 1) as f64;
                next[start + k + 1] += weight;
            }
        }
        ways = next;
    }
    ways[n]
}

/// Seeds for the stages of one skeleton step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepSeed {
    pub master: u64,
    pub sweep: u64,
}

/// One Δt step of the scheme from `sigma`. Each stage starts from the
/// previous stage's output and draws from its own random stream.
pub fn step(
    scheme: &SchemeSpec,
    engine: &mut KmcEngine<'_>,
    sigma: SpinConfiguration,
    seed: StepSeed,
) -> SpinConfiguration {
    engine.set_state(sigma);
    for (i, stage) in scheme.stages().iter().enumerate() {
        engine.set_rng(stage_rng(seed.master, seed.sweep, i as u64));
        let duration = stage.fraction * scheme.dt;
        match stage.group {
            Some(group) => {
                engine.run_group(SubLatticeRun { group, duration });
            }
            None => {
                engine.run_exact(duration);
            }
        }
    }
    engine.state().clone()
}

/// States of the scheme's Δt-skeleton after burn-in.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSample {
    pub states: Vec<SpinConfiguration>,
    pub scheme: SchemeSpec,
    pub seed: u64,
    pub burn_in: usize,
}

impl SkeletonSample {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Mean occupancy per site over the first and second halves of the sample.
    pub fn coverage_halves(&self) -> (f64, f64) {
        let cov = |s: &[SpinConfiguration]| {
            if s.is_empty() {
                return f64::NAN;
            }
            let sites = s[0].len().max(1) as f64;
            s.iter().map(|c| c.occupancy() as f64 / sites).sum::<f64>() / s.len() as f64
        };
        let half = self.states.len() / 2;
        (cov(&self.states[..half]), cov(&self.states[half..]))
    }
}

/// Runs the chain `x_0 = sigma0, x_{k+1} = step(x_k)` for `n_steps` states
/// and keeps `x_burn_in .. x_{n_steps-1}`.
pub fn sample_chain(
    scheme: &SchemeSpec,
    engine: &mut KmcEngine<'_>,
    sigma0: SpinConfiguration,
    n_steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<SkeletonSample> {
    if n_steps <= burn_in {
        return Err(Error::Config(format!(
            "n_steps ({n_steps}) must exceed burn_in ({burn_in})"
        )));
    }
    let mut states = Vec::with_capacity(n_steps - burn_in);
    let mut current = sigma0;
    for k in 0..n_steps {
        if k >= burn_in {
            states.push(current.clone());
        }
        if k + 1 < n_steps {
            current = step(
                scheme,
                engine,
                current,
                StepSeed {
                    master: seed,
                    sweep: k as u64,
                },
            );
        }
    }
    Ok(SkeletonSample {
        states,
        scheme: *scheme,
        seed,
        burn_in,
    })
}

/// Default burn-in: 10% of the chain length.
pub fn default_burn_in(n_steps: usize) -> usize {
    n_steps / 10
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Decomposition, DecompositionKind, Lattice};
    use crate::models::{AdsorptionDesorptionParams, RateModel};

    fn words(n: usize) -> Vec<Vec<GroupId>> {
        (0..1usize << n)
            .map(|bits| (0..n).map(|i| 1 + ((bits >> i) & 1) as GroupId).collect())
            .collect()
    }

    #[test]
    fn strang_third_order_word_coefficients() {
        let stages = schedule(SchemeKind::Strang, false);
        let c = |w: &[GroupId]| word_coefficient(&stages, w);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        assert!(close(c(&[1, 1, 1]), 1.0 / 6.0));
        assert!(close(c(&[2, 2, 2]), 1.0 / 6.0));
        assert!(close(c(&[1, 1, 2]), 1.0 / 8.0));
        assert!(close(c(&[2, 1, 1]), 1.0 / 8.0));
        assert!(close(c(&[1, 2, 1]), 1.0 / 4.0));
        assert!(close(c(&[1, 2, 2]), 1.0 / 4.0));
        assert!(close(c(&[2, 2, 1]), 1.0 / 4.0));
        assert_eq!(c(&[2, 1, 2]), 0.0);
    }

    #[test]
    fn word_coefficients_sum_like_the_exponential() {
        // setting L1 = L2 = x collapses every scheme to exp(2x)
        for kind in [SchemeKind::Lie, SchemeKind::Strang, SchemeKind::Exact] {
            let stages = schedule(kind, false);
            for n in 0..=4 {
                let total: f64 = words(n).iter().map(|w| word_coefficient(&stages, w)).sum();
                let expect = 2f64.powi(n as i32) / (1..=n).product::<usize>().max(1) as f64;
                assert!((total - expect).abs() < 1e-13, "{kind:?} n={n}");
            }
        }
        let lie = schedule(SchemeKind::Lie, false);
        assert_eq!(word_coefficient(&lie, &[1, 2]), 1.0);
        assert_eq!(word_coefficient(&lie, &[2, 1]), 0.0);
        assert_eq!(word_coefficient(&lie, &[1, 1]), 0.5);
    }

    #[test]
    fn strang_is_palindromic() {
        let mut st = schedule(SchemeKind::Strang, false);
        let fwd = st.clone();
        st.reverse();
        assert_eq!(st, fwd);
    }

    #[test]
    fn non_positive_dt_rejected() {
        assert!(SchemeSpec::lie(0.0).is_err());
        assert!(SchemeSpec::strang(-1.0).is_err());
        assert!(SchemeSpec::exact(f64::NAN).is_err());
    }

    #[test]
    fn sample_lengths() {
        let l = Lattice::square(2, 2).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Blocks, 1).unwrap();
        let m = RateModel::adsorption(AdsorptionDesorptionParams::default()).unwrap();
        let mut e = KmcEngine::new(&m, &d, SpinConfiguration::full(4), 0);
        let scheme = SchemeSpec::lie(0.1).unwrap();
        let s = sample_chain(&scheme, &mut e, SpinConfiguration::full(4), 6, 5, 1).unwrap();
        assert_eq!(s.len(), 1);
        let s = sample_chain(&scheme, &mut e, SpinConfiguration::full(4), 50, 7, 1).unwrap();
        assert_eq!(s.len(), 43);
        let s0 = sample_chain(&scheme, &mut e, SpinConfiguration::full(4), 3, 0, 1).unwrap();
        assert_eq!(s0.states[0], SpinConfiguration::full(4));
        assert!(sample_chain(&scheme, &mut e, SpinConfiguration::full(4), 5, 5, 1).is_err());
        assert_eq!(default_burn_in(1000), 100);
    }

    #[test]
    fn whole_lattice_lie_step_matches_two_exact_runs() {
        let l = Lattice::square(3, 3).unwrap();
        let d = Decomposition::whole(&l);
        let m = RateModel::adsorption(AdsorptionDesorptionParams::default()).unwrap();
        let start = SpinConfiguration::full(9);
        let seed = StepSeed {
            master: 99,
            sweep: 4,
        };
        let mut e = KmcEngine::new(&m, &d, start.clone(), 0);
        let lie = step(&SchemeSpec::lie(0.7).unwrap(), &mut e, start.clone(), seed);
        // group 2 is empty, so the second stage is a no-op
        let mut e2 = KmcEngine::new(&m, &d, start.clone(), 0);
        e2.set_rng(stage_rng(99, 4, 0));
        let first = e2.run_exact(0.7).clone();
        assert_eq!(lie, first);
    }

    #[test]
    fn zero_length_stages_are_identity() {
        let l = Lattice::square(3, 3).unwrap();
        let d = Decomposition::build(&l, DecompositionKind::Blocks, 1).unwrap();
        let m = RateModel::adsorption(AdsorptionDesorptionParams::default()).unwrap();
        let start = SpinConfiguration::from_code(0b1_0101_0101, 9);
        let mut e = KmcEngine::new(&m, &d, start.clone(), 0);
        for kind in [SchemeKind::Lie, SchemeKind::Strang, SchemeKind::Exact] {
            let mut spec = SchemeSpec::new(kind, 1.0).unwrap();
            spec.dt = 0.0;
            let out = step(&spec, &mut e, start.clone(), StepSeed { master: 1, sweep: 0 });
            assert_eq!(out, start);
        }
    }
}
