//! Sparse spectrum recovery from non-uniform samples.
//!
//! The measurement operator `A` is the set of rows of the orthonormal inverse
//! DFT selected at the sampled instants, so `A A^H = I_m` and every column has
//! squared norm `m / n`. Columns are never materialized for the solvers: the
//! operator is applied with FFTs and the Gram matrix `A^H A` is read from a
//! single length-`n` kernel because its entries depend only on the difference
//! of the two bin indices.
//!
//! Both solvers select atoms in conjugate-mirror groups (`k` together with
//! `n - k`) so that reconstructions of real signals stay real.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clockgen::AClkTrace;
use crate::error::{Error, Result};
use crate::linalg::{solve_hermitian, GrowingCholesky};
use crate::signals::MeasurementSet;
use crate::transform::{mirror, UnitaryDft};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest ambient dimension for which [`MeasurementOperator::dense`] is
/// offered.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    instants: Vec<usize>,
    n: usize,
    dft: UnitaryDft,
    /// `kernel[d] = (1/n) sum_r exp(2 pi i d t_r / n)`, so that
    /// `(A^H A)[j][l] = kernel[(l - j) mod n]`.
    kernel: Vec<Complex64>,
}

impl MeasurementOperator {
    pub fn new(instants: &[usize], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("ambient dimension must be positive".into()));
        }
        let mut sorted = instants.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&last) = sorted.last() {
            if last >= n {
                return Err(Error::Domain {
                    name: "instant",
                    value: last as f64,
                    expected: "instant < n",
                });
            }
        }
        let dft = UnitaryDft::new(n);
        let mut kernel = vec![ZERO; n];
        for &t in &sorted {
            kernel[t] = Complex64::new(1.0, 0.0);
        }
        dft.inverse_in_place(&mut kernel);
        let scale = 1.0 / (n as f64).sqrt();
        kernel.iter_mut().for_each(|v| *v *= scale);
        Ok(Self {
            instants: sorted,
            n,
            dft,
            kernel,
        })
    }

    pub fn instants(&self) -> &[usize] {
        &self.instants
    }

    /// Number of measurements.
    pub fn m(&self) -> usize {
        self.instants.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `theta -> A theta`.
    pub fn apply(&self, theta: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(theta.len(), self.n);
        let full = self.dft.inverse_vec(theta);
        self.instants.iter().map(|&t| full[t]).collect()
    }

    /// `r -> A^H r`.
    pub fn adjoint(&self, r: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(r.len(), self.m());
        let mut buf = vec![ZERO; self.n];
        for (&t, &v) in self.instants.iter().zip(r) {
            buf[t] = v;
        }
        self.dft.forward_in_place(&mut buf);
        buf
    }

    /// `(A^H A)[j][l]`.
    pub fn gram(&self, j: usize, l: usize) -> Complex64 {
        self.kernel[(l + self.n - j) % self.n]
    }

    /// Column `j` of `A`.
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        let n = self.n as f64;
        self.instants
            .iter()
            .map(|&t| {
                let phase = 2.0 * std::f64::consts::PI * ((j * t) % self.n) as f64 / n;
                Complex64::from_polar(1.0 / n.sqrt(), phase)
            })
            .collect()
    }

    /// Row-major `m x n` matrix. Only available for `n <= DENSE_LIMIT`.
    pub fn dense(&self) -> Option<Vec<Vec<Complex64>>> {
        if self.n > DENSE_LIMIT {
            return None;
        }
        let cols: Vec<Vec<Complex64>> = (0..self.n).map(|j| self.column(j)).collect();
        Some((0..self.m()).map(|r| cols.iter().map(|c| c[r]).collect()).collect())
    }

    /// Real part of the full-frame synthesis `F^H theta`.
    pub fn synthesize(&self, theta: &[Complex64]) -> Vec<f64> {
        self.dft.inverse_vec(theta).into_iter().map(|c| c.re).collect()
    }

    fn check(&self, y: &MeasurementSet) -> Result<Vec<Complex64>> {
        if y.n != self.n || y.instants != self.instants {
            return Err(Error::Dimension {
                expected: self.m(),
                actual: y.len(),
                context: "measurement set does not match operator instants",
            });
        }
        Ok(y.values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Least-squares coefficients on `support` given `A^H y`.
    fn least_squares(&self, support: &[usize], proxy_y: &[Complex64]) -> Vec<Complex64> {
        let b: Vec<Complex64> = support.iter().map(|&j| proxy_y[j]).collect();
        if self.m() == self.n {
            // Full sampling: A is unitary and the Gram matrix is the identity.
            let scale = 1.0 / (1.0 + crate::linalg::RIDGE);
            return b.into_iter().map(|v| v * scale).collect();
        }
        solve_hermitian(support.len(), |a, b| self.gram(support[a], support[b]), &b)
    }
}

pub fn build_measurement_operator(trace: &AClkTrace, n: usize) -> Result<MeasurementOperator> {
    if trace.frame_len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: trace.frame_len(),
            context: "trace frame length vs ambient dimension",
        });
    }
    MeasurementOperator::new(trace.instants(), n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Omp,
    Cosamp,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Omp => "omp",
            Solver::Cosamp => "cosamp",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "omp" => Ok(Solver::Omp),
            "cosamp" => Ok(Solver::Cosamp),
            other => Err(Error::InvalidParams(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub theta_hat: Vec<Complex64>,
    /// Sorted.
    pub support: Vec<usize>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual norm after each accepted update, starting with `||y||`.
    pub residual_history: Vec<f64>,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(y: &[Complex64], a: &MeasurementOperator, theta: &[Complex64]) -> Vec<Complex64> {
    let ay = a.apply(theta);
    y.iter().zip(ay).map(|(y, v)| y - v).collect()
}

const TIE_RESOLUTION: f64 = 1e-9;

fn mirror_group(j: usize, n: usize) -> ([usize; 2], usize) {
    let m = mirror(j, n);
    if m == j {
        ([j, j], 1)
    } else {
        ([j.min(m), j.max(m)], 2)
    }
}

/// Picks mirror groups from `candidates` in decreasing order of `score`
/// until adding another group would exceed `budget` indices. Scores that
/// agree to `TIE_RESOLUTION` relative to the best one are ties, broken by
/// lower index. Groups with zero score are never selected.
fn select_groups(
    candidates: impl IntoIterator<Item = usize>,
    score: impl Fn(usize) -> f64,
    budget: usize,
    n: usize,
) -> Vec<usize> {
    let mut groups: Vec<(f64, [usize; 2], usize)> = Vec::new();
    let mut seen = vec![false; n];
    for j in candidates {
        let (g, len) = mirror_group(j, n);
        if seen[g[0]] {
            continue;
        }
        seen[g[0]] = true;
        let s = g[..len].iter().map(|&i| score(i)).fold(0.0, f64::max);
        if s > 0.0 {
            groups.push((s, g, len));
        }
    }
    let best = groups.iter().map(|g| g.0).fold(0.0, f64::max);
    let rank = |s: f64| (s / best / TIE_RESOLUTION).round() as u64;
    groups.sort_by(|a, b| rank(b.0).cmp(&rank(a.0)).then(a.1[0].cmp(&b.1[0])));
    let mut out = Vec::with_capacity(budget);
    for (_, g, len) in groups {
        if out.len() + len <= budget {
            out.extend_from_slice(&g[..len]);
        }
        if out.len() == budget {
            break;
        }
    }
    out.sort_unstable();
    out
}

fn check_budget(m: usize, k: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::EmptyMeasurements);
    }
    if k == 0 || k > m {
        return Err(Error::SparsityBudget { k, m });
    }
    Ok(())
}

/// Default residual tolerance: `1e-6 ||y||`.
pub fn default_tolerance(y: &MeasurementSet) -> f64 {
    1e-6 * y.norm()
}

/// Orthogonal Matching Pursuit. Stops once `k` atoms are selected, the
/// residual falls to `tol`, or the next mirror group would overflow `k`.
pub fn omp(y: &MeasurementSet, a: &MeasurementOperator, k: usize, tol: f64) -> Result<RecoveryResult> {
    check_budget(a.m(), k)?;
    let yc = a.check(y)?;
    let n = a.n();
    let proxy_y = a.adjoint(&yc);

    let mut support: Vec<usize> = Vec::new();
    let mut in_support = vec![false; n];
    let mut chol = GrowingCholesky::new();
    let mut theta = vec![ZERO; n];
    let mut r = yc.clone();
    let mut r_norm = norm(&r);
    let mut history = vec![r_norm];
    let mut iterations = 0;

    while support.len() < k && r_norm > tol {
        let corr = a.adjoint(&r);
        let best = (0..n).filter(|&j| !in_support[j]).map(|j| (j, corr[j].norm())).fold(
            None,
            |acc: Option<(usize, f64)>, (j, c)| match acc {
                Some((_, bc)) if bc >= c => acc,
                _ => Some((j, c)),
            },
        );
        let Some((j, c)) = best else { break };
        if c <= 0.0 {
            break;
        }
        let (group, len) = mirror_group(j, n);
        if support.len() + len > k {
            break;
        }
        for &idx in &group[..len] {
            let col: Vec<Complex64> = support.iter().map(|&s| a.gram(s, idx)).collect();
            chol.push(&col, a.gram(idx, idx).re);
            support.push(idx);
            in_support[idx] = true;
        }
        let b: Vec<Complex64> = support.iter().map(|&s| proxy_y[s]).collect();
        let coeffs = chol.solve(&b);
        theta.iter_mut().for_each(|v| *v = ZERO);
        for (&s, &c) in support.iter().zip(&coeffs) {
            theta[s] = c;
        }
        r = residual(&yc, a, &theta);
        r_norm = norm(&r);
        history.push(r_norm);
        iterations += 1;
    }

    support.sort_unstable();
    Ok(RecoveryResult {
        theta_hat: theta,
        support,
        residual_norm: r_norm,
        iterations,
        residual_history: history,
    })
}

/// Compressive Sampling Matching Pursuit. Each iteration merges the `2k`
/// strongest proxy groups with the current support, solves least squares on
/// the union and prunes back to `k`. Iteration halts on `tol`, `max_iter`, or
/// when the residual stops decreasing; the final estimate is re-fit by least
/// squares on its own support.
pub fn cosamp(
    y: &MeasurementSet,
    a: &MeasurementOperator,
    k: usize,
    max_iter: usize,
    tol: f64,
) -> Result<RecoveryResult> {
    check_budget(a.m(), k)?;
    let yc = a.check(y)?;
    let n = a.n();
    let proxy_y = a.adjoint(&yc);

    let mut theta = vec![ZERO; n];
    let mut support: Vec<usize> = Vec::new();
    let mut r = yc.clone();
    let mut r_norm = norm(&r);
    let mut history = vec![r_norm];
    let mut iterations = 0;

    for _ in 0..max_iter {
        if r_norm <= tol {
            break;
        }
        let proxy = a.adjoint(&r);
        let omega = select_groups(0..n, |j| proxy[j].norm(), 2 * k, n);
        let mut merged = omega;
        merged.extend_from_slice(&support);
        merged.sort_unstable();
        merged.dedup();

        let b = a.least_squares(&merged, &proxy_y);
        let coeff_of = |bin: usize| -> f64 { merged.binary_search(&bin).map(|i| b[i].norm()).unwrap_or(0.0) };
        let new_support = select_groups(merged.iter().copied(), coeff_of, k, n);
        let mut new_theta = vec![ZERO; n];
        for &bin in &new_support {
            let i = merged.binary_search(&bin).expect("pruned bin comes from merged set");
            new_theta[bin] = b[i];
        }
        let new_r = residual(&yc, a, &new_theta);
        let new_norm = norm(&new_r);
        iterations += 1;
        if new_norm >= r_norm {
            break;
        }
        let stagnated = new_norm > r_norm * (1.0 - 1e-9);
        theta = new_theta;
        support = new_support;
        r = new_r;
        r_norm = new_norm;
        history.push(r_norm);
        if stagnated {
            break;
        }
    }

    if !support.is_empty() {
        let c = a.least_squares(&support, &proxy_y);
        let mut refit = vec![ZERO; n];
        for (&s, &v) in support.iter().zip(&c) {
            refit[s] = v;
        }
        let refit_r = residual(&yc, a, &refit);
        let refit_norm = norm(&refit_r);
        if refit_norm <= r_norm {
            theta = refit;
            r_norm = refit_norm;
            history.push(r_norm);
        }
    }

    Ok(RecoveryResult {
        theta_hat: theta,
        support,
        residual_norm: r_norm,
        iterations,
        residual_history: history,
    })
}

/// `||x - x_hat|| / ||x||`.
pub fn normalized_error(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: x_hat.len(),
            context: "reconstruction length",
        });
    }
    let ref_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ref_norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    let diff = x.iter().zip(x_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(diff / ref_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{generate_sparse_signal, sample_at, SignalOptions};
    use rand::seq::index::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn measure(x: &[f64], instants: &[usize]) -> MeasurementSet {
        MeasurementSet {
            instants: instants.to_vec(),
            values: instants.iter().map(|&t| x[t]).collect(),
            n: x.len(),
        }
    }

    #[test]
    fn full_operator_is_inverse_transform() {
        let sig =
            generate_sparse_signal(64, 0.1, &SignalOptions::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let a = build_measurement_operator(&AClkTrace::full(64, 0), 64).unwrap();
        let ax = a.apply(&sig.theta_true);
        for (v, x) in ax.iter().zip(&sig.x) {
            assert!((v.re - x).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn single_row_operator() {
        // Row 0 of the 4-point inverse transform is all 1/2.
        let a = MeasurementOperator::new(&[0], 4).unwrap();
        let theta = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(-1.0, 0.5),
            Complex64::new(3.0, 0.0),
        ];
        let y = a.apply(&theta);
        assert_eq!(y.len(), 1);
        let expect = Complex64::new(1.5, 1.25);
        assert!((y[0] - expect).norm() < 1e-14);
    }

    #[test]
    fn adjoint_column_norms_and_gram_kernel() {
        let n = 8;
        let inst = [1, 2, 5];
        let a = MeasurementOperator::new(&inst, n).unwrap();
        let dense = a.dense().unwrap();
        for j in 0..n {
            let mut e = vec![ZERO; n];
            e[j] = Complex64::new(1.0, 0.0);
            let back = a.adjoint(&a.apply(&e));
            assert!((back[j].re - 3.0 / 8.0).abs() < 1e-12);
            for l in 0..n {
                let direct: Complex64 = (0..3).map(|r| dense[r][l].conj() * dense[r][j]).sum();
                assert!((back[l] - direct).norm() < 1e-12);
                assert!((a.gram(l, j) - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_empty_and_bad_budgets() {
        let a = MeasurementOperator::new(&[], 8).unwrap();
        let y = MeasurementSet {
            instants: vec![],
            values: vec![],
            n: 8,
        };
        assert!(matches!(omp(&y, &a, 2, 0.0), Err(Error::EmptyMeasurements)));
        assert!(matches!(cosamp(&y, &a, 2, 10, 0.0), Err(Error::EmptyMeasurements)));
        let a = MeasurementOperator::new(&[0, 1], 8).unwrap();
        let y = measure(&[1.0; 8], &[0, 1]);
        assert!(omp(&y, &a, 0, 0.0).is_err());
        assert!(omp(&y, &a, 3, 0.0).is_err());
        let wrong = measure(&[1.0; 8], &[0, 2]);
        assert!(omp(&wrong, &a, 2, 0.0).is_err());
    }

    #[test]
    fn omp_exact_for_single_pair_full_sampling() {
        let sig = generate_sparse_signal(
            32,
            2.0 / 32.0,
            &SignalOptions::default(),
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        let trace = AClkTrace::full(32, 0);
        let a = build_measurement_operator(&trace, 32).unwrap();
        let y = sample_at(&sig, &trace).unwrap();
        let res = omp(&y, &a, 2, 0.0).unwrap();
        assert!(res.residual_norm < 1e-10);
        assert_eq!(res.support, sig.support);
    }

    #[test]
    fn cosamp_zero_iterations_returns_zero() {
        let sig =
            generate_sparse_signal(32, 0.125, &SignalOptions::default(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let trace = AClkTrace::full(32, 0);
        let a = build_measurement_operator(&trace, 32).unwrap();
        let y = sample_at(&sig, &trace).unwrap();
        let res = cosamp(&y, &a, 4, 0, 0.0).unwrap();
        assert!(res.theta_hat.iter().all(|c| *c == ZERO));
        assert!((res.residual_norm - y.norm()).abs() < 1e-12);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn cosamp_full_sampling_exact_in_one_iteration() {
        let sig =
            generate_sparse_signal(64, 0.125, &SignalOptions::default(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let trace = AClkTrace::full(64, 0);
        let a = build_measurement_operator(&trace, 64).unwrap();
        let y = sample_at(&sig, &trace).unwrap();
        let res = cosamp(&y, &a, sig.support.len(), 1, 0.0).unwrap();
        assert_eq!(res.support, sig.support);
        let err = normalized_error(&sig.x, &a.synthesize(&res.theta_hat)).unwrap();
        assert!(err < 1e-9, "err = {err}");
    }

    #[test]
    fn select_groups_respects_mirrors_and_budget() {
        let n = 8;
        let scores = [0.0, 5.0, 1.0, 0.5, 4.0, 0.5, 1.0, 5.0];
        let g = select_groups(0..n, |j| scores[j], 3, n);
        // {1,7} then {4} fits; {2,6} would overflow.
        assert_eq!(g, vec![1, 4, 7]);
        let g = select_groups(0..n, |j| scores[j], 16, n);
        assert_eq!(g, vec![1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn normalized_error_cases() {
        let x = [1.0, -2.0, 3.0];
        assert_eq!(normalized_error(&x, &x).unwrap(), 0.0);
        assert!((normalized_error(&x, &[0.0; 3]).unwrap() - 1.0).abs() < 1e-15);
        assert!(normalized_error(&[0.0; 3], &x).is_err());
        assert!(normalized_error(&x, &[0.0; 2]).is_err());
    }

    /// Brute force over every conjugate pair: the pair whose two columns
    /// best explain `y` in the least-squares sense.
    fn best_pair_oracle(y: &MeasurementSet, a: &MeasurementOperator) -> usize {
        let dense = a.dense().unwrap();
        let yv: Vec<Complex64> = y.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let n = a.n();
        let mut best = (0, f64::INFINITY);
        for k in 1..n / 2 {
            let cols = [k, n - k];
            let g = |i: usize, j: usize| -> Complex64 {
                (0..a.m()).map(|r| dense[r][cols[i]].conj() * dense[r][cols[j]]).sum()
            };
            let b: Vec<Complex64> = (0..2)
                .map(|i| (0..a.m()).map(|r| dense[r][cols[i]].conj() * yv[r]).sum())
                .collect();
            let c = solve_hermitian(2, g, &b);
            let res: f64 = (0..a.m())
                .map(|r| (yv[r] - dense[r][cols[0]] * c[0] - dense[r][cols[1]] * c[1]).norm_sqr())
                .sum();
            if res < best.1 {
                best = (k, res);
            }
        }
        best.0
    }

    #[test]
    fn single_pair_support_found_from_sixteen_samples() {
        let (mut omp_ok, mut cosamp_ok) = (0, 0);
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let sig = generate_sparse_signal(64, 2.0 / 64.0, &SignalOptions::default(), &mut rng).unwrap();
            let inst: Vec<usize> = sample(&mut rng, 64, 16).into_vec();
            let trace = AClkTrace::new(inst, 64, 0).unwrap();
            let a = build_measurement_operator(&trace, 64).unwrap();
            let y = sample_at(&sig, &trace).unwrap();
            let oracle = best_pair_oracle(&y, &a);
            assert_eq!(oracle, sig.support[0]);
            let o = omp(&y, &a, 2, default_tolerance(&y)).unwrap();
            let c = cosamp(&y, &a, 2, 20, default_tolerance(&y)).unwrap();
            omp_ok += (o.support == sig.support) as usize;
            cosamp_ok += (c.support == sig.support) as usize;
        }
        assert!(omp_ok >= 190, "omp {omp_ok}/200");
        assert!(cosamp_ok >= 190, "cosamp {cosamp_ok}/200");
    }
}
