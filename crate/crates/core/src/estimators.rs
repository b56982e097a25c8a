//! Sampling estimators for the leading coefficients `A` (relative entropy
//! rate) and `D` (discrepancy) of the splitting's entropy production, the
//! Gallavotti-Cohen functional, and per-site normalization.
//!
//! Matrix entries of `C`, `L_Q^p` and `L^k` are evaluated by summing over
//! jump paths of the split generators, with each path's weight filed under
//! the word of groups it uses. `C` is a combination of nested commutators of
//! per-site generators, so it only reaches targets flipped by a connected
//! cluster of at most `p` interacting generators drawn from both groups, and
//! its entries are exact when the generators are restricted to a window
//! around the target. The targets and their windows depend only on the
//! model, decomposition and order, and are built once.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lattice::{Decomposition, Lattice, Site, SpinConfiguration};
use crate::models::{Move, RateModel};
use crate::splitting::{schedule, word_coefficient, SchemeKind, SchemeSpec, SkeletonSample, Stage};

pub const DEFAULT_BATCHES: usize = 32;
/// States per incrementally evaluated chunk of a sample.
const CHUNK: usize = 512;

/// A value with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            se: self.se * factor.abs(),
        }
    }

    /// Whether `other` lies within `k` standard errors.
    pub fn within(&self, other: f64, k: f64) -> bool {
        (self.value - other).abs() <= k * self.se
    }
}

/// Mean of `values` with a batch-means standard error over `batches`
/// contiguous batches of equal length. Values past the last full batch
/// enter the mean only.
pub fn batch_means(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate::default();
    }
    let value = values.iter().sum::<f64>() / n as f64;
    let batches = batches.min(n);
    if batches < 2 {
        return Estimate { value, se: 0.0 };
    }
    let size = n / batches;
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Estimate {
        value,
        se: (var / batches as f64).sqrt(),
    }
}

#[derive(Clone, Copy, Debug)]
struct WindowMove {
    mv: Move,
    /// 0 for group 1, 1 for group 2
    group: usize,
}

/// Path sums over a fixed set of moves.
struct PathSums<'a> {
    model: &'a RateModel,
    lattice: &'a Lattice,
    moves: &'a [WindowMove],
    span: usize,
}

impl PathSums<'_> {
    /// For every word `w` of length `steps`, the sum over paths from `base`
    /// to `base` flipped at `flips` of the product of `L_{w_i}` entries.
    /// Without `diagonal`, only off-diagonal steps are taken.
    fn sums(&self, base: &SpinConfiguration, flips: &[Site], steps: usize, diagonal: bool) -> Vec<f64> {
        let mut out = vec![0.0; 1 << steps];
        if flips.len() > self.span * steps {
            return out;
        }
        let target = base.flipped_all(flips);
        let mut cur = base.clone();
        let mut scratch = vec![vec![0.0; self.moves.len()]; steps];
        self.walk(
            &mut cur,
            &target,
            flips.len(),
            0,
            steps,
            0,
            1.0,
            diagonal,
            &mut scratch,
            &mut out,
        );
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        cur: &mut SpinConfiguration,
        target: &SpinConfiguration,
        mismatch: usize,
        step: usize,
        steps: usize,
        word: usize,
        weight: f64,
        diagonal: bool,
        scratch: &mut [Vec<f64>],
        out: &mut [f64],
    ) {
        let left = steps - step;
        if left == 0 {
            out[word] += weight;
            return;
        }
        let room = self.span * (left - 1);
        let (rates, rest) = scratch.split_first_mut().expect("one buffer per step");
        let mut diag = [0.0; 2];
        for (r, wm) in rates.iter_mut().zip(self.moves) {
            *r = self.model.rate_unchecked(self.lattice, cur, &wm.mv);
            diag[wm.group] -= *r;
        }
        if diagonal && mismatch <= room {
            for (g, &v) in diag.iter().enumerate() {
                if v != 0.0 {
                    self.walk(cur, target, mismatch, step + 1, steps, word | (g << step), weight * v, diagonal, rest, out);
                }
            }
        }
        for (k, wm) in self.moves.iter().enumerate() {
            let r = rates[k];
            if r == 0.0 {
                continue;
            }
            // every site of a move with positive rate changes value
            let mut next = mismatch;
            for s in wm.mv.sites().iter() {
                if cur.get(s) != target.get(s) {
                    next -= 1;
                } else {
                    next += 1;
                }
            }
            if next > room {
                continue;
            }
            wm.mv.apply(cur);
            self.walk(cur, target, next, step + 1, steps, word | (wm.group << step), weight * r, diagonal, rest, out);
            wm.mv.apply(cur);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Word weights of the scheme and of `C` (exact minus scheme) at order `p`.
fn word_weights(stages: &[Stage], p: usize) -> (Vec<f64>, Vec<f64>) {
    let exact = schedule(SchemeKind::Exact, false);
    let mut scheme = Vec::with_capacity(1 << p);
    let mut comm = Vec::with_capacity(1 << p);
    for w in 0..1usize << p {
        let letters: Vec<u8> = (0..p).map(|i| 1 + ((w >> i) & 1) as u8).collect();
        let s = word_coefficient(stages, &letters);
        scheme.push(s);
        comm.push(word_coefficient(&exact, &letters) - s);
    }
    (scheme, comm)
}

fn order_of(scheme: &SchemeSpec) -> Result<usize> {
    scheme
        .local_error_order()
        .ok_or_else(|| Error::Config("the exact scheme has no local error".into()))
}

fn window_moves(model: &RateModel, decomposition: &Decomposition, sites: impl IntoIterator<Item = Site>) -> Vec<WindowMove> {
    let lattice = decomposition.lattice();
    sites
        .into_iter()
        .flat_map(|x| model.moves_at(lattice, x))
        .map(|mv| WindowMove {
            mv,
            group: usize::from(decomposition.group_of(mv.primary_site()) - 1),
        })
        .collect()
}

/// Matrix entries at `(σ, σ')` for `σ'` = `σ` flipped at a tuple of sites.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalExpansion {
    pub target: SpinConfiguration,
    /// `C(σ,σ')`
    pub c: f64,
    /// `L_Q^p(σ,σ')`
    pub l_q_p: f64,
    /// `L^i(σ,σ')` for `i = 0..p`
    pub l_powers: Vec<f64>,
    /// Shortest jump count from `σ` to `σ'` if at most `p`.
    pub distance: Option<usize>,
}

/// Evaluates `C`, `L_Q^p` and `L^i` at one entry with the full generators.
pub fn local_expansion(
    model: &RateModel,
    decomposition: &Decomposition,
    scheme: &SchemeSpec,
    sigma: &SpinConfiguration,
    sites: &[Site],
) -> Result<LocalExpansion> {
    let p = order_of(scheme)?;
    let lattice = decomposition.lattice();
    let mut flips = sites.to_vec();
    flips.sort_unstable();
    if flips.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("site tuple must have distinct sites".into()));
    }
    if flips.len() > p * model.sites_per_move() {
        return Err(Error::Config(format!(
            "site tuple of length {} exceeds what {p} moves can flip",
            flips.len()
        )));
    }
    let moves = window_moves(model, decomposition, 0..lattice.n_sites());
    let ps = PathSums {
        model,
        lattice,
        moves: &moves,
        span: model.sites_per_move(),
    };
    let (scheme_w, comm_w) = word_weights(&scheme.stages(), p);
    let full = ps.sums(sigma, &flips, p, true);
    let fact: f64 = (1..=p).map(|i| i as f64).product();
    let l_powers: Vec<f64> = (0..p).map(|i| ps.sums(sigma, &flips, i, true).iter().sum()).collect();
    let distance = (0..=p).find(|&k| ps.sums(sigma, &flips, k, false).iter().sum::<f64>() > 0.0);
    Ok(LocalExpansion {
        target: sigma.flipped_all(&flips),
        c: dot(&comm_w, &full),
        l_q_p: fact * dot(&scheme_w, &full),
        l_powers,
        distance,
    })
}

struct Target {
    flips: Vec<Site>,
    moves: Vec<WindowMove>,
}

/// Shortest-path balls in the generator interaction graph.
fn interaction_graph(model: &RateModel, lattice: &Lattice) -> Vec<Vec<Site>> {
    let n = lattice.n_sites();
    (0..n)
        .map(|a| {
            // generators can only interact within a few lattice hops
            let mut seen = BTreeSet::from([a]);
            let mut frontier = vec![a];
            for _ in 0..4 {
                let mut next = Vec::new();
                for &x in &frontier {
                    for &y in lattice.neighbors(x) {
                        if seen.insert(y) {
                            next.push(y);
                        }
                    }
                }
                frontier = next;
            }
            seen.into_iter()
                .filter(|&b| b != a && model.generators_interact(lattice, a, b))
                .collect()
        })
        .collect()
}

fn ball(graph: &[Vec<Site>], sources: &[Site], radius: usize) -> BTreeSet<Site> {
    let mut seen: BTreeSet<Site> = sources.iter().copied().collect();
    let mut frontier: Vec<Site> = seen.iter().copied().collect();
    for _ in 0..radius {
        let mut next = Vec::new();
        for &x in &frontier {
            for &y in &graph[x] {
                if seen.insert(y) {
                    next.push(y);
                }
            }
        }
        frontier = next;
    }
    seen
}

/// Connected generator clusters of at most `p` sites containing both groups.
fn mixed_clusters(graph: &[Vec<Site>], decomposition: &Decomposition, p: usize) -> Vec<Vec<Site>> {
    let mut found: HashSet<Vec<Site>> = HashSet::new();
    let mut layer: Vec<Vec<Site>> = (0..graph.len()).map(|x| vec![x]).collect();
    for _ in 1..p {
        let mut next: HashSet<Vec<Site>> = HashSet::new();
        for cluster in &layer {
            for &x in cluster {
                for &y in &graph[x] {
                    if cluster.contains(&y) {
                        continue;
                    }
                    let mut grown = cluster.clone();
                    grown.push(y);
                    grown.sort_unstable();
                    next.insert(grown);
                }
            }
        }
        layer = next.into_iter().collect();
        layer.sort();
        for c in &layer {
            let g0 = decomposition.group_of(c[0]);
            if c.iter().any(|&x| decomposition.group_of(x) != g0) {
                found.insert(c.clone());
            }
        }
    }
    let mut out: Vec<Vec<Site>> = found.into_iter().collect();
    out.sort();
    out
}

/// Per-state evaluator of the leading coefficients.
pub struct CoefficientEstimator {
    model: RateModel,
    lattice: Lattice,
    p: usize,
    scheme_weights: Vec<f64>,
    comm_weights: Vec<f64>,
    targets: Vec<Target>,
    /// site -> targets whose contribution reads that site
    dependents: Vec<Vec<usize>>,
}

impl CoefficientEstimator {
    pub fn new(model: &RateModel, decomposition: &Decomposition, scheme: &SchemeSpec) -> Result<Self> {
        let p = order_of(scheme)?;
        let lattice = decomposition.lattice();
        let graph = interaction_graph(model, lattice);
        let (scheme_weights, comm_weights) = word_weights(&scheme.stages(), p);

        let mut flip_sets: BTreeSet<Vec<Site>> = BTreeSet::new();
        for cluster in mixed_clusters(&graph, decomposition, p) {
            let moves: Vec<Move> = cluster.iter().flat_map(|&x| model.moves_at(lattice, x)).collect();
            collect_flip_sets(&moves, p, &mut flip_sets);
        }

        let mut targets = Vec::with_capacity(flip_sets.len());
        let mut dependents = vec![Vec::new(); lattice.n_sites()];
        for flips in flip_sets {
            let writers: Vec<Site> = flips.iter().flat_map(|&s| model.writers_of(lattice, s)).collect();
            let window = ball(&graph, &writers, p - 1);
            let moves = window_moves(model, decomposition, window);
            let mut reads = BTreeSet::new();
            for wm in &moves {
                reads.extend(model.read_sites(lattice, &wm.mv));
                reads.extend(wm.mv.sites().iter());
            }
            for s in reads {
                dependents[s].push(targets.len());
            }
            targets.push(Target { flips, moves });
        }
        Ok(Self {
            model: *model,
            lattice: lattice.clone(),
            p,
            scheme_weights,
            comm_weights,
            targets,
            dependents,
        })
    }

    pub fn order(&self) -> usize {
        self.p
    }

    /// Number of flip sets that can carry a nonzero commutator entry.
    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn target_flips(&self) -> impl Iterator<Item = &[Site]> {
        self.targets.iter().map(|t| t.flips.as_slice())
    }

    fn sums<'a>(&'a self, t: &'a Target) -> PathSums<'a> {
        PathSums {
            model: &self.model,
            lattice: &self.lattice,
            moves: &t.moves,
            span: self.model.sites_per_move(),
        }
    }

    /// `C(σ, σ^T)` for target `index`.
    pub fn commutator_entry(&self, index: usize, sigma: &SpinConfiguration) -> f64 {
        let t = &self.targets[index];
        dot(&self.comm_weights, &self.sums(t).sums(sigma, &t.flips, self.p, true))
    }

    fn atanh(&self, m: f64, sigma: &SpinConfiguration, flips: &[Site]) -> Result<f64> {
        if m.is_nan() || m.abs() >= 1.0 {
            return Err(Error::AtanhDomain {
                value: m,
                state: sigma.spins().to_vec(),
                target: flips.to_vec(),
            });
        }
        Ok(m.atanh())
    }

    /// Contributions of one target to `A(σ)` and `D(σ)`.
    fn contribution(&self, index: usize, sigma: &SpinConfiguration) -> Result<(f64, f64)> {
        let t = &self.targets[index];
        let p = self.p;
        let ps = self.sums(t);
        let fwd = ps.sums(sigma, &t.flips, p, true);
        let c_f = dot(&self.comm_weights, &fwd);
        let lower = t.flips.len().div_ceil(ps.span).max(1);
        let Some((d, l_f)) = (lower..=p).find_map(|k| {
            let s: f64 = ps.sums(sigma, &t.flips, k, false).iter().sum();
            (s > 0.0).then_some((k, s))
        }) else {
            return Ok((0.0, -c_f));
        };
        let image = sigma.flipped_all(&t.flips);
        let rev = ps.sums(&image, &t.flips, p, true);
        let c_r = dot(&self.comm_weights, &rev);
        if d < p {
            if c_r == 0.0 {
                return Ok((0.0, -c_f));
            }
            let l_r: f64 = ps.sums(&image, &t.flips, d, false).iter().sum();
            if l_r == 0.0 {
                return Err(Error::ZeroReverseRate {
                    state: sigma.spins().to_vec(),
                    target: t.flips.clone(),
                });
            }
            return Ok((0.0, l_f / l_r * c_r - c_f));
        }
        let a_f = dot(&self.scheme_weights, &fwd);
        if a_f == 0.0 {
            return Ok((c_f, -c_f));
        }
        let a_r = dot(&self.scheme_weights, &rev);
        let m_f = c_f / (c_f + 2.0 * a_f);
        let m_r = c_r / (c_r + 2.0 * a_r);
        let a_term = c_f - 2.0 * a_f * self.atanh(m_f, sigma, &t.flips)?;
        let d_term = 2.0 * a_f * self.atanh(m_r, &image, &t.flips)? - c_f;
        Ok((a_term, d_term))
    }

    /// `A(σ)` and `D(σ)`: the state functions whose stationary means are the
    /// leading coefficients.
    pub fn evaluate(&self, sigma: &SpinConfiguration) -> Result<(f64, f64)> {
        let mut out = (0.0, 0.0);
        for i in 0..self.targets.len() {
            let (a, d) = self.contribution(i, sigma)?;
            out.0 += a;
            out.1 += d;
        }
        Ok(out)
    }

    /// Evaluates consecutive states, recomputing only the targets whose
    /// inputs changed since the previous state.
    fn evaluate_run(&self, states: &[SpinConfiguration]) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(states.len());
        let Some(first) = states.first() else {
            return Ok(out);
        };
        let mut parts = (0..self.targets.len())
            .map(|i| self.contribution(i, first))
            .collect::<Result<Vec<_>>>()?;
        let total = |parts: &[(f64, f64)]| {
            parts
                .iter()
                .fold((0.0, 0.0), |acc, &(a, d)| (acc.0 + a, acc.1 + d))
        };
        let mut current = total(&parts);
        out.push(current);
        let mut stale = vec![false; self.targets.len()];
        for pair in states.windows(2) {
            let changed = pair[0].difference(&pair[1]);
            if !changed.is_empty() {
                let mut todo = Vec::new();
                for s in changed {
                    for &i in &self.dependents[s] {
                        if !stale[i] {
                            stale[i] = true;
                            todo.push(i);
                        }
                    }
                }
                for i in todo {
                    parts[i] = self.contribution(i, &pair[1])?;
                    stale[i] = false;
                }
                current = total(&parts);
            }
            out.push(current);
        }
        Ok(out)
    }

    /// Per-state `(A(σ), D(σ))` for a whole sample. Chunks are fixed-size
    /// and each value is a sum over targets in a fixed order, so the result
    /// does not depend on the execution mode.
    pub fn evaluate_sample(&self, exec: Execution, states: &[SpinConfiguration]) -> Result<Vec<(f64, f64)>> {
        let chunks: Vec<&[SpinConfiguration]> = states.chunks(CHUNK).collect();
        let parts = exec.map(&chunks, |c| self.evaluate_run(c));
        let mut out = Vec::with_capacity(states.len());
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
    }
}

/// Flip sets of all nonempty selections of at most `p` moves; repeated
/// moves cancel, so subsets suffice.
fn collect_flip_sets(moves: &[Move], p: usize, out: &mut BTreeSet<Vec<Site>>) {
    fn rec(moves: &[Move], start: usize, left: usize, current: &mut BTreeSet<Site>, out: &mut BTreeSet<Vec<Site>>) {
        for i in start..moves.len() {
            let sites: Vec<Site> = moves[i].sites().iter().collect();
            for &s in &sites {
                if !current.remove(&s) {
                    current.insert(s);
                }
            }
            if !current.is_empty() {
                out.insert(current.iter().copied().collect());
            }
            if left > 1 {
                rec(moves, i + 1, left - 1, current, out);
            }
            for &s in &sites {
                if !current.remove(&s) {
                    current.insert(s);
                }
            }
        }
    }
    rec(moves, 0, p, &mut BTreeSet::new(), out);
}

/// Estimates of `A`, `D` and `A + D` from one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientEstimates {
    pub a: Estimate,
    pub d: Estimate,
    pub sum: Estimate,
    pub n_samples: usize,
}

pub fn estimate_coefficients(
    exec: Execution,
    sample: &SkeletonSample,
    model: &RateModel,
    decomposition: &Decomposition,
    scheme: &SchemeSpec,
    batches: usize,
) -> Result<CoefficientEstimates> {
    let est = CoefficientEstimator::new(model, decomposition, scheme)?;
    let values = est.evaluate_sample(exec, &sample.states)?;
    let a: Vec<f64> = values.iter().map(|v| v.0).collect();
    let d: Vec<f64> = values.iter().map(|v| v.1).collect();
    let s: Vec<f64> = values.iter().map(|v| v.0 + v.1).collect();
    Ok(CoefficientEstimates {
        a: batch_means(&a, batches),
        d: batch_means(&d, batches),
        sum: batch_means(&s, batches),
        n_samples: values.len(),
    })
}

#[allow(non_snake_case)]
pub fn estimate_A(
    sample: &SkeletonSample,
    model: &RateModel,
    decomposition: &Decomposition,
    scheme: &SchemeSpec,
) -> Result<Estimate> {
    estimate_coefficients(Execution::default(), sample, model, decomposition, scheme, DEFAULT_BATCHES).map(|e| e.a)
}

#[allow(non_snake_case)]
pub fn estimate_D(
    sample: &SkeletonSample,
    model: &RateModel,
    decomposition: &Decomposition,
    scheme: &SchemeSpec,
) -> Result<Estimate> {
    estimate_coefficients(Execution::default(), sample, model, decomposition, scheme, DEFAULT_BATCHES).map(|e| e.d)
}

/// Gallavotti-Cohen functional: the mean of
/// `log(P(σ_i, σ_{i+1}) / P(σ_{i+1}, σ_i))` over consecutive sample pairs.
/// `prob` returns `None` when no transition probability is available.
pub fn gc_functional<F>(sample: &SkeletonSample, prob: F, batches: usize) -> Result<Estimate>
where
    F: Fn(&SpinConfiguration, &SpinConfiguration) -> Option<f64>,
{
    let mut values = Vec::with_capacity(sample.len().saturating_sub(1));
    for (i, pair) in sample.states.windows(2).enumerate() {
        let (x, y) = (&pair[0], &pair[1]);
        if x == y {
            values.push(0.0);
            continue;
        }
        let f = prob(x, y).ok_or(Error::UnavailableTransitionProbability)?;
        let r = prob(y, x).ok_or(Error::UnavailableTransitionProbability)?;
        if r == 0.0 {
            return Err(Error::InfiniteEpr { from: i, to: i + 1 });
        }
        values.push((f / r).ln());
    }
    Ok(batch_means(&values, batches))
}

/// Leading-order entropy production estimate for one scheme and time step.
#[derive(Clone, Debug, PartialEq)]
pub struct EprReport {
    pub scheme: SchemeKind,
    pub model: &'static str,
    pub decomposition: String,
    pub width: usize,
    pub n1: usize,
    pub n2: usize,
    pub dt: f64,
    pub p: usize,
    pub a: Estimate,
    pub d: Estimate,
    /// `A + D`, with its standard error taken from the per-state sums.
    pub sum: Estimate,
    /// Divisor already applied to `a`, `d` and `sum`.
    pub normalization: f64,
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl EprReport {
    pub fn new(sample: &SkeletonSample, decomposition: &Decomposition, model: &RateModel, est: CoefficientEstimates) -> Result<Self> {
        let p = order_of(&sample.scheme)?;
        let lattice = decomposition.lattice();
        Ok(Self {
            scheme: sample.scheme.kind,
            model: model.name(),
            decomposition: decomposition.kind().name().to_string(),
            width: decomposition.width(),
            n1: lattice.width(),
            n2: lattice.height(),
            dt: sample.scheme.dt,
            p,
            a: est.a,
            d: est.d,
            sum: est.sum,
            normalization: 1.0,
            n_samples: est.n_samples,
            burn_in: sample.burn_in,
            seed: sample.seed,
        })
    }

    /// `(Â + D̂)·Δt^{p-1}`.
    pub fn epr_leading(&self) -> Estimate {
        self.sum.scaled(self.dt.powi(self.p as i32 - 1))
    }

    /// The leading-order curve `(Δt', (Â + D̂)·Δt'^{p-1})` over `grid`.
    pub fn epr_curve(&self, grid: &[f64]) -> Vec<(f64, f64)> {
        grid.iter()
            .map(|&h| (h, self.sum.value * h.powi(self.p as i32 - 1)))
            .collect()
    }
}

/// Per-site divisor: the boundary of an `N1 x N2` lattice grows like
/// `sqrt(N1 N2)` for spin flips, and the diffusion sums like `N1 N2`.
pub fn site_divisor(model: &RateModel, lattice: &Lattice) -> f64 {
    let area = (lattice.width() * lattice.height()) as f64;
    if model.conserves_particles() {
        area
    } else {
        area.sqrt()
    }
}

pub fn normalize_per_site(report: &EprReport, model: &RateModel, lattice: &Lattice) -> EprReport {
    let div = site_divisor(model, lattice);
    let mut out = report.clone();
    out.a = report.a.scaled(1.0 / div);
    out.d = report.d.scaled(1.0 / div);
    out.sum = report.sum.scaled(1.0 / div);
    out.normalization = report.normalization * div;
    out
}
