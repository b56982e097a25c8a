//! Exact computations on enumerated state spaces of small lattices.
//!
//! Generators are stored sparse; transition matrices are dense and only
//! formed for state spaces up to [`DENSE_CAP`]. Matrix exponentials use
//! uniformization, applied as repeated sparse right-multiplications so no
//! dense-by-dense product is ever needed.

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lattice::{Decomposition, SpinConfiguration};
use crate::models::RateModel;
use crate::splitting::{schedule, SchemeKind, SchemeSpec, Stage};

pub const DEFAULT_STATE_CAP: usize = 1 << 16;
/// Largest state space for which dense matrices are formed.
pub const DENSE_CAP: usize = 4096;
pub const PATH_LIMIT: u128 = 10_000_000;
const POISSON_TAIL: f64 = 1e-13;
/// Extra uniformization terms beyond the generator's graph depth.
const SUPPORT_MARGIN: usize = 4;

#[derive(Clone, Debug)]
pub struct DenseOptions {
    pub cap: usize,
    /// Particle-number sector for conserving models; `None` picks half filling.
    pub particles: Option<usize>,
}

impl Default for DenseOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_STATE_CAP,
            particles: None,
        }
    }
}

/// Enumerated state space with generators `L`, `L1`, `L2`.
#[derive(Clone, Debug)]
pub struct DenseChain {
    model: RateModel,
    decomposition: Decomposition,
    states: Vec<SpinConfiguration>,
    index: HashMap<SpinConfiguration, usize>,
    generator: CsrMatrix<f64>,
    split: [CsrMatrix<f64>; 2],
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

pub fn build_dense(model: &RateModel, decomposition: &Decomposition) -> Result<DenseChain> {
    build_dense_with(model, decomposition, &DenseOptions::default())
}

pub fn build_dense_with(
    model: &RateModel,
    decomposition: &Decomposition,
    options: &DenseOptions,
) -> Result<DenseChain> {
    let lattice = decomposition.lattice();
    let n = lattice.n_sites();
    let particles = model
        .conserves_particles()
        .then(|| options.particles.unwrap_or(n / 2));
    let size = match particles {
        Some(k) => binomial(n, k),
        None if n >= 127 => u128::MAX,
        None => 1u128 << n,
    };
    if size > options.cap as u128 {
        return Err(Error::StateSpaceTooLarge {
            size,
            cap: options.cap,
        });
    }
    let states: Vec<SpinConfiguration> = (0..1u64 << n)
        .filter(|c| particles.is_none_or(|k| c.count_ones() as usize == k))
        .map(|c| SpinConfiguration::from_code(c, n))
        .collect();
    let index: HashMap<SpinConfiguration, usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();

    let moves = model.enumerate_moves(lattice);
    let s = states.len();
    let mut full = CooMatrix::new(s, s);
    let mut parts = [CooMatrix::new(s, s), CooMatrix::new(s, s)];
    for (i, sigma) in states.iter().enumerate() {
        let mut out = [0.0; 2];
        for mv in &moves {
            let r = model.rate_unchecked(lattice, sigma, mv);
            if r <= 0.0 {
                continue;
            }
            let j = index[&mv.applied(sigma)];
            let g = usize::from(decomposition.group_of(mv.primary_site()) - 1);
            full.push(i, j, r);
            parts[g].push(i, j, r);
            out[g] += r;
        }
        full.push(i, i, -(out[0] + out[1]));
        parts[0].push(i, i, -out[0]);
        parts[1].push(i, i, -out[1]);
    }
    Ok(DenseChain {
        model: *model,
        decomposition: decomposition.clone(),
        states,
        index,
        generator: CsrMatrix::from(&full),
        split: [CsrMatrix::from(&parts[0]), CsrMatrix::from(&parts[1])],
    })
}

impl DenseChain {
    pub fn model(&self) -> &RateModel {
        &self.model
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[SpinConfiguration] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &SpinConfiguration {
        &self.states[i]
    }

    pub fn index_of(&self, sigma: &SpinConfiguration) -> Option<usize> {
        self.index.get(sigma).copied()
    }

    /// Full generator `L`.
    pub fn generator(&self) -> &CsrMatrix<f64> {
        &self.generator
    }

    /// Split generator `L_group`, group 1 or 2.
    pub fn split(&self, group: u8) -> Result<&CsrMatrix<f64>> {
        match group {
            1 | 2 => Ok(&self.split[usize::from(group - 1)]),
            g => Err(Error::InvalidGroup(g)),
        }
    }

    fn stage_generator(&self, stage: &Stage) -> &CsrMatrix<f64> {
        match stage.group {
            Some(g) => &self.split[usize::from(g - 1)],
            None => &self.generator,
        }
    }

    fn check_dense(&self) -> Result<()> {
        if self.len() > DENSE_CAP {
            return Err(Error::StateSpaceTooLarge {
                size: self.len() as u128,
                cap: DENSE_CAP,
            });
        }
        Ok(())
    }

    /// `L^k` as a sparse matrix.
    pub fn generator_power(&self, k: usize) -> CsrMatrix<f64> {
        let mut out = CsrMatrix::identity(self.len());
        for _ in 0..k {
            out = &out * &self.generator;
        }
        out
    }
}

pub fn to_dense(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub dt: f64,
    pub entries: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[(from, to)]
    }

    /// Largest deviation of a row sum from 1.
    pub fn stochasticity_error(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |self - other|` entrywise.
    pub fn max_distance(&self, other: &TransitionMatrix) -> f64 {
        (&self.entries - &other.entries).amax()
    }
}

/// Longest finite shortest-path length in the jump graph of `g`.
fn graph_depth(g: &CsrMatrix<f64>) -> usize {
    let n = g.nrows();
    let mut depth = 0;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[src] = 0;
        queue.push_back(src);
        while let Some(i) = queue.pop_front() {
            let row = g.row(i);
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                if j != i && v > 0.0 && dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    depth = depth.max(dist[j]);
                    queue.push_back(j);
                }
            }
        }
    }
    depth
}

/// `a · p` for dense `a` and sparse `p`, computed column by column.
fn dense_times_sparse(exec: Execution, a: &DMatrix<f64>, p: &CscMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let cols = exec.map_range(p.ncols(), |j| {
        let col = p.col(j);
        let mut out = DVector::<f64>::zeros(n);
        for (&k, &v) in col.row_indices().iter().zip(col.values()) {
            out.axpy(v, &a.column(k), 1.0);
        }
        out
    });
    DMatrix::from_columns(&cols)
}

/// `start · exp(t·g)` by uniformization.
///
/// The Poisson series is cut once its tail drops below 1e-13 and at least
/// as many terms have been summed as the jump graph is deep, so every
/// reachable entry is present.
pub fn apply_exponential(exec: Execution, start: &DMatrix<f64>, g: &CsrMatrix<f64>, t: f64) -> DMatrix<f64> {
    assert!(t >= 0.0, "exponential time must be nonnegative");
    let n = g.nrows();
    let lambda = (0..n)
        .map(|i| g.get_entry(i, i).map_or(0.0, |e| e.into_value().abs()))
        .fold(0.0, f64::max);
    if lambda == 0.0 || t == 0.0 {
        return start.clone();
    }
    let mut coo = CooMatrix::new(n, n);
    for (i, j, &v) in g.triplet_iter() {
        coo.push(i, j, v / lambda);
    }
    for i in 0..n {
        coo.push(i, i, 1.0);
    }
    let p = CscMatrix::from(&coo);
    let min_terms = graph_depth(g) + SUPPORT_MARGIN;

    let x = lambda * t;
    let mut weight = (-x).exp();
    let mut cumulative = weight;
    let mut term = start.clone();
    let mut out = start * weight;
    let mut k = 0usize;
    while k < min_terms || 1.0 - cumulative > POISSON_TAIL {
        k += 1;
        term = dense_times_sparse(exec, &term, &p);
        weight *= x / k as f64;
        cumulative += weight;
        out.zip_apply(&term, |o, t| *o += weight * t);
        if weight == 0.0 && k >= min_terms {
            break;
        }
    }
    out
}

/// `exp(dt·L)`.
pub fn transition_exact(chain: &DenseChain, dt: f64) -> Result<TransitionMatrix> {
    chain.check_dense()?;
    let id = DMatrix::identity(chain.len(), chain.len());
    Ok(TransitionMatrix {
        dt,
        entries: apply_exponential(Execution::default(), &id, chain.generator(), dt),
    })
}

/// Product of the scheme's stage exponentials.
pub fn transition_scheme(chain: &DenseChain, scheme: &SchemeSpec) -> Result<TransitionMatrix> {
    chain.check_dense()?;
    let exec = Execution::default();
    let mut m = DMatrix::identity(chain.len(), chain.len());
    for stage in scheme.stages() {
        m = apply_exponential(exec, &m, chain.stage_generator(&stage), stage.fraction * scheme.dt);
    }
    Ok(TransitionMatrix {
        dt: scheme.dt,
        entries: m,
    })
}

/// Coefficients `[S_0, ..., S_order]` of `Δt^k` in the product of stage
/// exponentials, each a polynomial in the split generators.
fn scheme_series(chain: &DenseChain, stages: &[Stage], order: usize) -> Vec<CsrMatrix<f64>> {
    let n = chain.len();
    let mut prod: Vec<CsrMatrix<f64>> = (0..=order)
        .map(|k| if k == 0 { CsrMatrix::identity(n) } else { CsrMatrix::zeros(n, n) })
        .collect();
    for stage in stages {
        let g = chain.stage_generator(stage);
        let mut series = vec![CsrMatrix::identity(n)];
        for k in 1..=order {
            let next = &(&series[k - 1] * g) * (stage.fraction / k as f64);
            series.push(next);
        }
        let mut next = Vec::with_capacity(order + 1);
        for total in 0..=order {
            let mut acc = CsrMatrix::zeros(n, n);
            for a in 0..=total {
                if prod[a].nnz() == 0 || series[total - a].nnz() == 0 {
                    continue;
                }
                acc = &acc + &(&prod[a] * &series[total - a]);
            }
            next.push(acc);
        }
        prod = next;
    }
    prod
}

fn prune(m: CsrMatrix<f64>, tol: f64) -> CsrMatrix<f64> {
    m.filter(|_, _, v| v.abs() > tol)
}

fn order_of(scheme: &SchemeSpec) -> Result<usize> {
    scheme
        .local_error_order()
        .ok_or_else(|| Error::Config("the exact scheme has no local error".into()))
}

/// Scale below which series entries are treated as cancellation noise.
fn noise_floor(chain: &DenseChain, p: usize) -> f64 {
    let rate = chain
        .generator()
        .values()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    1e-12 * rate.powi(p as i32)
}

/// `L_Q^k`: `k!` times the `Δt^k` coefficient of the scheme product.
pub fn scheme_expansion(chain: &DenseChain, scheme: &SchemeSpec, k: usize) -> CsrMatrix<f64> {
    let series = scheme_series(chain, &scheme.stages(), k);
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    &series[k] * fact
}

/// Coefficient `C` of `Δt^p` in `exp(Δt L) - P̄`, with entries at the level
/// of floating-point cancellation dropped.
pub fn commutator_matrix(chain: &DenseChain, scheme: &SchemeSpec) -> Result<CsrMatrix<f64>> {
    let p = order_of(scheme)?;
    let approx = scheme_series(chain, &scheme.stages(), p);
    let exact = scheme_series(chain, &schedule(SchemeKind::Exact, false), p);
    Ok(prune(&exact[p] - &approx[p], noise_floor(chain, p)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryDistribution {
    pub probs: DVector<f64>,
}

impl StationaryDistribution {
    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `max |μP - μ|`.
    pub fn residual(&self, p: &TransitionMatrix) -> f64 {
        (p.entries.tr_mul(&self.probs) - &self.probs).amax()
    }
}

/// Solves `μ(P - I) = 0`, `Σμ = 1` by LU, falling back to power iteration.
pub fn stationary(p: &TransitionMatrix) -> Result<StationaryDistribution> {
    let n = p.len();
    let mut a = p.entries.transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    if let Some(mut mu) = a.lu().solve(&b) {
        if mu.iter().all(|v| v.is_finite() && *v >= -1e-12) {
            mu.iter_mut().for_each(|v| *v = v.max(0.0));
            let total = mu.sum();
            mu /= total;
            let dist = StationaryDistribution { probs: mu };
            if dist.residual(p) <= 1e-12 {
                return Ok(dist);
            }
        }
    }
    power_iteration(p)
}

fn power_iteration(p: &TransitionMatrix) -> Result<StationaryDistribution> {
    let n = p.len();
    let mut mu = DVector::from_element(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    for _ in 0..1_000_000 {
        let next = p.entries.tr_mul(&mu);
        residual = (&next - &mu).amax();
        mu = next;
        if residual <= 1e-12 {
            let total = mu.sum();
            mu /= total;
            return Ok(StationaryDistribution { probs: mu });
        }
    }
    Err(Error::NotConverged { residual })
}

/// Shortest jump counts between states; `None` when unreachable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceTable {
    n: usize,
    d: Vec<u32>,
    diameter: u32,
}

impl DistanceTable {
    pub fn get(&self, from: usize, to: usize) -> Option<u32> {
        let v = self.d[from * self.n + to];
        (v != u32::MAX).then_some(v)
    }

    /// Largest finite distance.
    pub fn diameter(&self) -> u32 {
        self.diameter
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// States at distance exactly `k` from `from`.
    pub fn shell(&self, from: usize, k: u32) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.d[from * self.n + j] == k)
    }
}

pub fn geodesic_distances(chain: &DenseChain) -> Result<DistanceTable> {
    chain.check_dense()?;
    let n = chain.len();
    let g = chain.generator();
    let rows = Execution::default().map_range(n, |src| {
        let mut dist = vec![u32::MAX; n];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(i) = queue.pop_front() {
            let row = g.row(i);
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                if j != i && v > 0.0 && dist[j] == u32::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        dist
    });
    let d: Vec<u32> = rows.into_iter().flatten().collect();
    let diameter = d.iter().copied().filter(|&v| v != u32::MAX).max().unwrap_or(0);
    Ok(DistanceTable { n, d, diameter })
}

/// Entropy production rate `(1/Δt) Σ μ(σ)P(σ,σ') log(P(σ,σ')/P(σ',σ))`.
pub fn epr_exact(pb: &TransitionMatrix, mu: &StationaryDistribution) -> Result<f64> {
    let n = pb.len();
    let mut total = 0.0;
    for i in 0..n {
        let m = mu.get(i);
        for j in 0..n {
            let f = pb.get(i, j);
            if i == j || f == 0.0 {
                continue;
            }
            let r = pb.get(j, i);
            if r == 0.0 {
                if m > 0.0 {
                    return Err(Error::InfiniteEpr { from: i, to: j });
                }
                continue;
            }
            total += m * f * (f / r).ln();
        }
    }
    Ok(total / pb.dt)
}

/// Relative entropy rate of the scheme's path measure with respect to the
/// exact one.
pub fn rer_exact(pb: &TransitionMatrix, po: &TransitionMatrix, mu: &StationaryDistribution) -> Result<f64> {
    let n = pb.len();
    let mut total = 0.0;
    for i in 0..n {
        let m = mu.get(i);
        for j in 0..n {
            let b = pb.get(i, j);
            if b == 0.0 {
                continue;
            }
            let o = po.get(i, j);
            if o == 0.0 {
                return Err(Error::SupportViolation { from: i, to: j });
            }
            total += m * b * (b / o).ln();
        }
    }
    Ok(total / pb.dt)
}

/// Discrepancy `I = EPR - RER`, computed directly from its own sum.
pub fn discrepancy_exact(
    pb: &TransitionMatrix,
    po: &TransitionMatrix,
    mu: &StationaryDistribution,
) -> Result<f64> {
    let n = pb.len();
    let mut total = 0.0;
    for i in 0..n {
        let m = mu.get(i);
        for j in 0..n {
            let b = pb.get(i, j);
            if b == 0.0 {
                continue;
            }
            let (o_rev, b_rev) = (po.get(j, i), pb.get(j, i));
            if o_rev == 0.0 || b_rev == 0.0 {
                return Err(Error::SupportViolation { from: j, to: i });
            }
            total += m * b * (o_rev / b_rev).ln();
        }
    }
    Ok(total / pb.dt)
}

/// Entropy production of stationary paths of `m` steps, by enumeration.
pub fn ep_paths(pb: &TransitionMatrix, mu: &StationaryDistribution, m: usize) -> Result<f64> {
    let n = pb.len();
    if m == 0 {
        return Ok(0.0);
    }
    let count = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if count > PATH_LIMIT {
        return Err(Error::TooManyPaths(count));
    }

    struct Walk<'a> {
        pb: &'a TransitionMatrix,
        mu: &'a StationaryDistribution,
        n: usize,
        total: f64,
    }

    impl Walk<'_> {
        fn extend(&mut self, start: usize, last: usize, fwd: f64, rev: f64, left: usize) -> Result<()> {
            if left == 0 {
                let rev = rev * self.mu.get(last);
                if rev == 0.0 {
                    return Err(Error::InfiniteEpr { from: start, to: last });
                }
                self.total += fwd * (fwd / rev).ln();
                return Ok(());
            }
            for next in 0..self.n {
                let f = self.pb.get(last, next);
                if f == 0.0 {
                    continue;
                }
                let r = self.pb.get(next, last);
                self.extend(start, next, fwd * f, rev * r, left - 1)?;
            }
            Ok(())
        }
    }

    let mut walk = Walk {
        pb,
        mu,
        n,
        total: 0.0,
    };
    for start in 0..n {
        let p0 = mu.get(start);
        if p0 > 0.0 {
            walk.extend(start, start, p0, 1.0, m)?;
        }
    }
    Ok(walk.total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderFit {
    /// `(Δt, EPR)` per grid point.
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of log EPR against log Δt; `None` when every EPR
    /// is below 1e-10 (commuting split).
    pub slope: Option<f64>,
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    num / den
}

pub fn epr_order_fit(chain: &DenseChain, kind: SchemeKind, dt_grid: &[f64]) -> Result<OrderFit> {
    if dt_grid.len() < 2 {
        return Err(Error::Config("an order fit needs at least two time steps".into()));
    }
    let mut points = Vec::with_capacity(dt_grid.len());
    for &dt in dt_grid {
        let pb = transition_scheme(chain, &SchemeSpec::new(kind, dt)?)?;
        let mu = stationary(&pb)?;
        points.push((dt, epr_exact(&pb, &mu)?));
    }
    let slope = if points.iter().all(|&(_, e)| e.abs() < 1e-10) {
        None
    } else {
        let logs: Vec<(f64, f64)> = points.iter().map(|&(d, e)| (d.ln(), e.ln())).collect();
        Some(least_squares_slope(&logs))
    };
    Ok(OrderFit { points, slope })
}

/// `max |exp(Δt L) - P̄|`.
pub fn local_error(chain: &DenseChain, scheme: &SchemeSpec) -> Result<f64> {
    let po = transition_exact(chain, scheme.dt)?;
    let pb = transition_scheme(chain, scheme)?;
    Ok(po.max_distance(&pb))
}

/// Order estimate `log2(e(Δt)/e(Δt/2))` of the local error.
pub fn richardson_order(chain: &DenseChain, kind: SchemeKind, dt: f64) -> Result<f64> {
    let coarse = local_error(chain, &SchemeSpec::new(kind, dt)?)?;
    let fine = local_error(chain, &SchemeSpec::new(kind, dt / 2.0)?)?;
    Ok((coarse / fine).log2())
}

/// Exact chain, scheme chain and their entropy quantities at one Δt.
#[derive(Clone, Debug)]
pub struct SchemeAnalysis {
    pub po: TransitionMatrix,
    pub pb: TransitionMatrix,
    pub mu: StationaryDistribution,
    pub epr: f64,
    pub rer: f64,
    pub discrepancy: f64,
}

pub fn analyze(chain: &DenseChain, scheme: &SchemeSpec) -> Result<SchemeAnalysis> {
    let po = transition_exact(chain, scheme.dt)?;
    let pb = transition_scheme(chain, scheme)?;
    let mu = stationary(&pb)?;
    let epr = epr_exact(&pb, &mu)?;
    let rer = rer_exact(&pb, &po, &mu)?;
    let discrepancy = discrepancy_exact(&pb, &po, &mu)?;
    Ok(SchemeAnalysis {
        po,
        pb,
        mu,
        epr,
        rer,
        discrepancy,
    })
}

/// Leading coefficients `A` and `D` summed exactly over the state space
/// with weights `mu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactCoefficients {
    pub a: f64,
    pub d: f64,
}

/// Evaluates the leading RER and discrepancy coefficients from dense `C`,
/// `L_Q^p` and `L^k`, with the shells taken from the geodesic distances.
pub fn exact_coefficients(
    chain: &DenseChain,
    scheme: &SchemeSpec,
    mu: &StationaryDistribution,
) -> Result<ExactCoefficients> {
    let p = order_of(scheme)?;
    let c = to_dense(&commutator_matrix(chain, scheme)?);
    let fact: f64 = (1..=p).map(|i| i as f64).product();
    let a_mat = to_dense(&scheme_expansion(chain, scheme, p)) / fact;
    let powers: Vec<DMatrix<f64>> = (0..p).map(|k| to_dense(&chain.generator_power(k))).collect();
    let dist = geodesic_distances(chain)?;
    let ratio = |i: usize, j: usize| c[(i, j)] / (c[(i, j)] + 2.0 * a_mat[(i, j)]);
    let atanh_checked = |m: f64, i: usize, j: usize| {
        if m.abs() >= 1.0 || !m.is_finite() {
            let target = chain.state(i).difference(chain.state(j));
            return Err(Error::AtanhDomain {
                value: m,
                state: chain.state(i).spins().to_vec(),
                target,
            });
        }
        Ok(m.atanh())
    };

    let n = chain.len();
    let (mut a_total, mut d_total) = (0.0, 0.0);
    for i in 0..n {
        let w = mu.get(i);
        if w == 0.0 {
            continue;
        }
        let (mut a_row, mut d_row) = (0.0, 0.0);
        for j in 0..n {
            let Some(k) = dist.get(i, j) else { continue };
            let k = k as usize;
            if k < p {
                let rev = powers[k][(j, i)];
                if c[(j, i)] == 0.0 {
                    continue;
                }
                if rev == 0.0 {
                    return Err(Error::ZeroReverseRate {
                        state: chain.state(i).spins().to_vec(),
                        target: chain.state(i).difference(chain.state(j)),
                    });
                }
                d_row += powers[k][(i, j)] / rev * c[(j, i)];
            } else if k == p {
                let a = a_mat[(i, j)];
                if a == 0.0 {
                    a_row += c[(i, j)];
                } else {
                    let m = ratio(i, j);
                    a_row += c[(i, j)] - 2.0 * a * atanh_checked(m, i, j)?;
                    let m_rev = ratio(j, i);
                    d_row += 2.0 * a * atanh_checked(m_rev, j, i)?;
                }
            }
        }
        a_total += w * a_row;
        d_total += w * d_row;
    }
    Ok(ExactCoefficients {
        a: a_total,
        d: d_total,
    })
}

/// Writes `m` one row per line, entries separated by single spaces.
pub fn write_matrix<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Io(format!("bad matrix entry `{t}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(Error::Io("ragged matrix rows".into()));
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}
