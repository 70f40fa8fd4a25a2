//! Resonant two-mode interferometer: Heisenberg-picture predictions, direct
//! unitary evolution, tomography protocols and finite-sample statistics.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{mode_transform_unitary, FockBasis, QuantumState, StateData};
use crate::spin::{evaluate_frame, SpinFrame, SpinOperators};

/// Coupling pulse of area `θ = 2s` and field phase `φ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub theta: f64,
    pub phi: f64,
}

impl PulseSpec {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidParameter("pulse parameters must be finite".into()));
        }
        Ok(PulseSpec { theta: theta.rem_euclid(2.0 * PI), phi })
    }

    /// Heisenberg-picture mode coefficients: row `e` gives `e_H` in terms of `(a, b)`.
    pub fn mode_matrix(&self) -> [[C64; 2]; 2] {
        let (s, c) = (0.5 * self.theta).sin_cos();
        let minus_i = C64::new(0.0, -1.0);
        [
            [C64::new(c, 0.0), minus_i * C64::from_polar(s, -self.phi)],
            [minus_i * C64::from_polar(s, self.phi), C64::new(c, 0.0)],
        ]
    }
}

/// One element of a pulse sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceElement {
    Pulse(PulseSpec),
    /// Area-π pulse; the measured quantity becomes `−S_z`.
    PhaseChanger,
    /// Evolution under `4χS_z² + δS_z` for time `T`.
    Free {
        #[serde(rename = "T")]
        t: f64,
        chi: f64,
        #[serde(default)]
        delta: f64,
    },
}

/// Coefficients `(c_x, c_y, c_z)` of `M_H = sin θ (sin φ S_x + cos φ S_y) + cos θ S_z`.
pub fn heisenberg_measurable(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * sp, st * cp, ct]
}

pub fn predict_mean(frame: &SpinFrame, theta: f64, phi: f64) -> f64 {
    let c = heisenberg_measurable(theta, phi);
    (0..3).map(|i| c[i] * frame.bloch[i]).sum()
}

pub fn predict_variance(frame: &SpinFrame, theta: f64, phi: f64) -> f64 {
    let c = Vector3::from(heisenberg_measurable(theta, phi));
    (c.transpose() * frame.cov_mat() * c)[(0, 0)].max(0.0)
}

/// Basis with every sector complete, so mode transformations stay inside it.
fn completed(state: &QuantumState) -> Result<QuantumState> {
    if state.basis().is_complete() {
        return Ok(state.clone());
    }
    let b = Arc::new(FockBasis::new(state.basis().num_modes(), state.basis().sectors())?);
    state.rebased(b)
}

/// Dense pulse unitary on a complete basis, built from the mode transformation.
/// Its ladder expansion loses precision as the boson number grows; [`evolve`]
/// uses the per-pair rotation instead.
pub fn pulse_unitary(basis: &FockBasis, pulse: &PulseSpec) -> Result<DMatrix<C64>> {
    let m = basis.num_modes();
    if !m.is_multiple_of(2) {
        return Err(Error::InvalidBasis("interferometer needs mode pairs".into()));
    }
    let h = pulse.mode_matrix();
    let mut u = DMatrix::zeros(m, m);
    for p in 0..m / 2 {
        for i in 0..2 {
            for j in 0..2 {
                u[(2 * p + i, 2 * p + j)] = h[i][j];
            }
        }
    }
    mode_transform_unitary(basis, &u)
}

/// Eigenvectors of `S_x` on the `(n+1)`-dimensional pair sector, indexed by `n_b`.
struct SxEigen {
    vectors: DMatrix<f64>,
    values: Vec<f64>,
}

fn sx_eigen(n: usize) -> Arc<SxEigen> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SxEigen>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(e) = cache.lock().unwrap().get(&n) {
        return e.clone();
    }
    let d = n + 1;
    let mut sx = DMatrix::<f64>::zeros(d, d);
    for k in 0..n {
        let v = 0.5 * (((n - k) * (k + 1)) as f64).sqrt();
        sx[(k + 1, k)] = v;
        sx[(k, k + 1)] = v;
    }
    let eig = SymmetricEigen::new(sx);
    // The spectrum is {−n/2, …, n/2}; snapping removes the eigenvalue rounding error.
    let values = eig.eigenvalues.iter().map(|l| (2.0 * l).round() / 2.0).collect();
    let e = Arc::new(SxEigen { vectors: eig.eigenvectors, values });
    cache.lock().unwrap().insert(n, e.clone());
    e
}

/// `e^{iφS_z} e^{−iθS_x} e^{−iφS_z}` on one pair sector, applied to `x` indexed by `n_b`.
fn rotate_sector(n: usize, pulse: &PulseSpec, x: &[C64]) -> Vec<C64> {
    let e = sx_eigen(n);
    let half = n as f64 / 2.0;
    let phase = |k: usize, sign: f64| C64::from_polar(1.0, sign * pulse.phi * (k as f64 - half));
    let d = n + 1;
    let mut coeff = vec![C64::new(0.0, 0.0); d];
    for (j, c) in coeff.iter_mut().enumerate() {
        let acc: C64 = x.iter().enumerate().map(|(k, xk)| xk * phase(k, -1.0) * e.vectors[(k, j)]).sum();
        *c = acc * C64::from_polar(1.0, -pulse.theta * e.values[j]);
    }
    (0..d)
        .map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            for (j, c) in coeff.iter().enumerate() {
                acc += c * e.vectors[(k, j)];
            }
            acc * phase(k, 1.0)
        })
        .collect()
}

/// Basis indices of pair `p` grouped by the other occupations, each group ordered by `n_b`.
fn pair_groups(basis: &FockBasis, p: usize) -> Vec<(usize, Vec<usize>)> {
    let mut groups: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for (i, occ) in basis.states().iter().enumerate() {
        let mut key = occ.clone();
        key[2 * p] += key[2 * p + 1];
        key[2 * p + 1] = 0;
        groups.entry(key).or_default().push(i);
    }
    let mut out: Vec<(usize, Vec<usize>)> = groups
        .into_iter()
        .map(|(key, mut idx)| {
            let n = key[2 * p] as usize;
            idx.sort_by_key(|&i| basis.occupation(i)[2 * p + 1]);
            (n, idx)
        })
        .filter(|(n, _)| *n > 0)
        .collect();
    out.sort_by(|a, b| a.1[0].cmp(&b.1[0]));
    out
}

fn pulse_columns(groups: &[Vec<(usize, Vec<usize>)>], pulse: &PulseSpec, m: &mut DMatrix<C64>) {
    let cols: Vec<DVector<C64>> = (0..m.ncols())
        .into_par_iter()
        .map(|c| {
            let mut v = m.column(c).into_owned();
            for pair in groups {
                for (n, idx) in pair {
                    let x: Vec<C64> = idx.iter().map(|&i| v[i]).collect();
                    for (&i, y) in idx.iter().zip(rotate_sector(*n, pulse, &x)) {
                        v[i] = y;
                    }
                }
            }
            v
        })
        .collect();
    for (c, v) in cols.into_iter().enumerate() {
        m.set_column(c, &v);
    }
}

/// Applies the pulse to every adjacent mode pair.
fn apply_pulse(state: &QuantumState, pulse: &PulseSpec) -> Result<QuantumState> {
    if !state.basis().num_modes().is_multiple_of(2) {
        return Err(Error::InvalidBasis("interferometer needs mode pairs".into()));
    }
    let st = completed(state)?;
    let basis = st.basis().clone();
    let groups: Vec<_> = (0..basis.num_modes() / 2).map(|p| pair_groups(&basis, p)).collect();
    match st.data() {
        StateData::Pure(v) => {
            let mut m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
            pulse_columns(&groups, pulse, &mut m);
            QuantumState::pure(basis, m.column(0).into_owned())
        }
        StateData::Mixed(r) => {
            let mut m = r.clone();
            pulse_columns(&groups, pulse, &mut m);
            let mut m = m.adjoint();
            pulse_columns(&groups, pulse, &mut m);
            QuantumState::mixed_unchecked_psd(basis, m.adjoint())
        }
    }
}

fn sz_diagonal(basis: &FockBasis) -> Vec<f64> {
    basis.states().iter().map(|o| 0.5 * o.chunks(2).map(|p| p[1] as f64 - p[0] as f64).sum::<f64>()).collect()
}

/// Applies one sequence element.
pub fn evolve(state: &QuantumState, element: &SequenceElement) -> Result<QuantumState> {
    match *element {
        SequenceElement::Pulse(p) => {
            let out = apply_pulse(state, &p)?;
            Ok(out.with_discarded_mass(state.discarded_mass()))
        }
        SequenceElement::PhaseChanger => evolve(state, &SequenceElement::Pulse(PulseSpec { theta: PI, phi: 0.0 })),
        SequenceElement::Free { t, chi, delta } => {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter("free evolution time must be non-negative".into()));
            }
            if !state.basis().num_modes().is_multiple_of(2) {
                return Err(Error::InvalidBasis("interferometer needs mode pairs".into()));
            }
            let phases: Vec<C64> = sz_diagonal(state.basis())
                .iter()
                .map(|&sz| C64::from_polar(1.0, -t * (4.0 * chi * sz * sz + delta * sz)))
                .collect();
            let d = state.basis().dim();
            let data = match state.data() {
                StateData::Pure(v) => StateData::Pure(DVector::from_fn(d, |i, _| v[i] * phases[i])),
                StateData::Mixed(r) => {
                    StateData::Mixed(DMatrix::from_fn(d, d, |i, j| r[(i, j)] * phases[i] * phases[j].conj()))
                }
            };
            let out = match data {
                StateData::Pure(v) => QuantumState::pure(state.basis().clone(), v)?,
                StateData::Mixed(r) => QuantumState::mixed_unchecked_psd(state.basis().clone(), r)?,
            };
            Ok(out.with_discarded_mass(state.discarded_mass()))
        }
    }
}

pub fn evolve_sequence(state: &QuantumState, sequence: &[SequenceElement]) -> Result<QuantumState> {
    let mut st = state.clone();
    for e in sequence {
        st = evolve(&st, e)?;
    }
    Ok(st)
}

/// Probability of each `S_z` eigenvalue, sorted by eigenvalue.
pub fn sz_distribution(state: &QuantumState) -> Vec<(f64, f64)> {
    let sz = sz_diagonal(state.basis());
    let pops = state.populations();
    let mut pairs: Vec<(f64, f64)> = sz.into_iter().zip(pops).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (v, p) in pairs {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += p,
            _ => out.push((v, p)),
        }
    }
    for o in &mut out {
        o.1 = o.1.max(0.0);
    }
    out
}

fn moments(dist: &[(f64, f64)]) -> (f64, f64) {
    let mean: f64 = dist.iter().map(|(v, p)| v * p).sum();
    let var: f64 = dist.iter().map(|(v, p)| p * (v - mean).powi(2)).sum();
    (mean, var)
}

/// Analytic prediction against direct evolution for one `(θ, φ)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Consistency {
    pub theta: f64,
    pub phi: f64,
    pub predicted_mean: f64,
    pub direct_mean: f64,
    pub predicted_variance: f64,
    pub direct_variance: f64,
    pub mean_residual: f64,
    pub variance_residual: f64,
}

fn spin_ops(state: &QuantumState) -> Result<SpinOperators> {
    SpinOperators::adjacent_pairs(state.basis().clone())
}

pub fn consistency_check(state: &QuantumState, theta: f64, phi: f64) -> Result<Consistency> {
    let frame = evaluate_frame(&spin_ops(state)?, state)?;
    consistency_with_frame(state, &frame, theta, phi)
}

fn consistency_with_frame(state: &QuantumState, frame: &SpinFrame, theta: f64, phi: f64) -> Result<Consistency> {
    let out = evolve(state, &SequenceElement::Pulse(PulseSpec::new(theta, phi)?))?;
    let (direct_mean, direct_variance) = moments(&sz_distribution(&out));
    let predicted_mean = predict_mean(frame, theta, phi);
    let predicted_variance = predict_variance(frame, theta, phi);
    Ok(Consistency {
        theta,
        phi,
        predicted_mean,
        direct_mean,
        predicted_variance,
        direct_variance,
        mean_residual: (predicted_mean - direct_mean).abs(),
        variance_residual: (predicted_variance - direct_variance).abs(),
    })
}

/// Consistency over a `θ × φ` grid; the frame is evaluated once.
pub fn consistency_grid(state: &QuantumState, thetas: &[f64], phis: &[f64]) -> Result<Vec<Consistency>> {
    let frame = evaluate_frame(&spin_ops(state)?, state)?;
    let grid: Vec<(f64, f64)> = thetas.iter().flat_map(|&t| phis.iter().map(move |&p| (t, p))).collect();
    grid.par_iter().map(|&(t, p)| consistency_with_frame(state, &frame, t, p)).collect()
}

/// Mean and variance of the measured `S_z` after a single pulse.
fn measured(state: &QuantumState, theta: f64, phi: f64) -> Result<(f64, f64)> {
    let out = evolve(state, &SequenceElement::Pulse(PulseSpec::new(theta, phi)?))?;
    Ok(moments(&sz_distribution(&out)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomographyPlane {
    Xy,
    Yz,
}

/// Spin moments recovered from three interferometer runs.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tomography {
    pub plane: TomographyPlane,
    /// Means of the two in-plane components, in axis order.
    pub means: [f64; 2],
    /// Variances of the two components and their covariance.
    pub variances: [f64; 2],
    pub covariance: f64,
}

/// `xy`: π/2 pulses at `φ = π/2, 0, π/4`; `yz`: `φ = 0` with `θ = π/2, 0, π/4`.
pub fn tomography(state: &QuantumState, plane: TomographyPlane) -> Result<Tomography> {
    let (first, second, mixed) = match plane {
        TomographyPlane::Xy => ((FRAC_PI_2, FRAC_PI_2), (FRAC_PI_2, 0.0), (FRAC_PI_2, FRAC_PI_4)),
        TomographyPlane::Yz => ((FRAC_PI_2, 0.0), (0.0, 0.0), (FRAC_PI_4, 0.0)),
    };
    let (m1, v1) = measured(state, first.0, first.1)?;
    let (m2, v2) = measured(state, second.0, second.1)?;
    let (_, v3) = measured(state, mixed.0, mixed.1)?;
    Ok(Tomography { plane, means: [m1, m2], variances: [v1, v2], covariance: v3 - 0.5 * (v1 + v2) })
}

/// Second moments from the squared population difference after a π/2 pulse.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SecondMoments {
    pub sx2: f64,
    pub sy2: f64,
    pub anticommutator: f64,
    /// `⟨S_x²⟩ ≠ ⟨S_y²⟩` or `⟨S_xS_y + S_yS_x⟩ ≠ 0`, i.e. `⟨a²(b†)²⟩ ≠ 0`.
    pub second_order_correlated: bool,
}

fn mean_square(state: &QuantumState, phi: f64) -> Result<f64> {
    let out = evolve(state, &SequenceElement::Pulse(PulseSpec::new(FRAC_PI_2, phi)?))?;
    Ok(sz_distribution(&out).iter().map(|(v, p)| v * v * p).sum())
}

pub fn m2_protocol(state: &QuantumState, tol: f64) -> Result<SecondMoments> {
    let sy2 = mean_square(state, 0.0)?;
    let sx2 = mean_square(state, FRAC_PI_2)?;
    let anticommutator = mean_square(state, FRAC_PI_4)? - mean_square(state, -FRAC_PI_4)?;
    let scale = sx2.abs().max(sy2.abs()).max(1.0);
    let signal = (sx2 - sy2).abs().max(anticommutator.abs());
    Ok(SecondMoments { sx2, sy2, anticommutator, second_order_correlated: signal > tol * scale })
}

/// Outcomes of repeated `S_z` measurements on copies of an evolved state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub samples: Vec<f64>,
    #[serde(rename = "R")]
    pub r: usize,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub seed: u64,
}

/// Inverse-CDF sampler over an `S_z` distribution.
#[derive(Clone, Debug)]
pub struct SzSampler {
    values: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl SzSampler {
    pub fn new(state: &QuantumState) -> Self {
        let dist = sz_distribution(state);
        let (mean, variance) = moments(&dist);
        let total: f64 = dist.iter().map(|d| d.1).sum();
        let mut acc = 0.0;
        let cdf = dist
            .iter()
            .map(|d| {
                acc += d.1 / total;
                acc
            })
            .collect();
        SzSampler { values: dist.iter().map(|d| d.0).collect(), cdf, mean, variance }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u).min(self.values.len() - 1);
        self.values[k]
    }

    pub fn record(&self, r: usize, seed: u64) -> Result<MeasurementRecord> {
        if r == 0 {
            return Err(Error::InvalidParameter("need at least one repetition".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..r).map(|_| self.draw(&mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / r as f64;
        let var = if r > 1 { samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1) as f64 } else { 0.0 };
        Ok(MeasurementRecord {
            samples,
            r,
            sample_mean: mean,
            sample_variance: var,
            predicted_mean: self.mean,
            predicted_variance: self.variance,
            seed,
        })
    }
}

/// Evolves through `sequence` and draws `r` outcomes of `S_z` with a seeded RNG.
pub fn sample_measurements(
    state: &QuantumState,
    sequence: &[SequenceElement],
    r: usize,
    seed: u64,
) -> Result<MeasurementRecord> {
    let out = evolve_sequence(state, sequence)?;
    SzSampler::new(&out).record(r, seed)
}

/// One record per seed, computed in parallel from a single evolution.
pub fn sample_many(
    state: &QuantumState,
    sequence: &[SequenceElement],
    r: usize,
    seeds: &[u64],
) -> Result<Vec<MeasurementRecord>> {
    let sampler = SzSampler::new(&evolve_sequence(state, sequence)?);
    seeds.par_iter().map(|&s| sampler.record(r, s)).collect()
}

/// `π/2(0) → free(T, χ) → π/2(φ₂)`.
pub fn ramsey_sequence(t: f64, chi: f64, phi2: f64) -> Vec<SequenceElement> {
    vec![
        SequenceElement::Pulse(PulseSpec { theta: FRAC_PI_2, phi: 0.0 }),
        SequenceElement::Free { t, chi, delta: 0.0 },
        SequenceElement::Pulse(PulseSpec { theta: FRAC_PI_2, phi: phi2 }),
    ]
}

/// Spin squeezing of a frame relative to its mean spin direction.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Squeezing {
    /// Smallest variance perpendicular to the mean spin.
    pub min_perp_variance: f64,
    /// `N̄ · min_perp_variance / |⟨S⟩|²`.
    pub xi2: f64,
    /// Whether `min_perp_variance < N̄/4`.
    pub squeezed: bool,
}

pub fn squeezing(frame: &SpinFrame) -> Squeezing {
    let b = frame.bloch_vec();
    let norm = b.norm();
    if norm == 0.0 {
        return Squeezing { min_perp_variance: f64::NAN, xi2: f64::INFINITY, squeezed: false };
    }
    let n = b / norm;
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    let c = frame.cov_mat();
    let block = nalgebra::Matrix2::new(u.dot(&(c * u)), u.dot(&(c * v)), v.dot(&(c * u)), v.dot(&(c * v)));
    let min = SymmetricEigen::new(block).eigenvalues.min().max(0.0);
    Squeezing {
        min_perp_variance: min,
        xi2: frame.n_mean * min / (norm * norm),
        squeezed: min < 0.25 * frame.n_mean * (1.0 - 1e-9),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RamseyResult {
    pub sequence: Vec<SequenceElement>,
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    /// Squeezing of the state just before the second pulse.
    pub intermediate: Squeezing,
}

pub fn ramsey(state: &QuantumState, t: f64, chi: f64, phi2: f64) -> Result<RamseyResult> {
    let sequence = ramsey_sequence(t, chi, phi2);
    let mid = evolve_sequence(state, &sequence[..2])?;
    let ops = spin_ops(&mid)?;
    let frame = evaluate_frame(&ops, &mid)?;
    let out = evolve(&mid, &sequence[2])?;
    let (predicted_mean, predicted_variance) = moments(&sz_distribution(&out));
    Ok(RamseyResult { sequence, predicted_mean, predicted_variance, intermediate: squeezing(&frame) })
}

/// One row of a phase scan after a pulse of area `θ`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FringePoint {
    pub phi: f64,
    pub mean: f64,
    pub variance: f64,
}

pub fn fringe(frame: &SpinFrame, theta: f64, phis: &[f64]) -> Vec<FringePoint> {
    phis.iter()
        .map(|&phi| FringePoint {
            phi,
            mean: predict_mean(frame, theta, phi),
            variance: predict_variance(frame, theta, phi),
        })
        .collect()
}

/// Phases where the predicted mean changes sign between adjacent grid points,
/// refined by bisection.
pub fn fringe_zero_crossings(frame: &SpinFrame, theta: f64, phis: &[f64]) -> Vec<f64> {
    let f = |phi: f64| predict_mean(frame, theta, phi);
    let mut out = Vec::new();
    for w in phis.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            out.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() || fhi == 0.0 {
            continue;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    if let Some(&last) = phis.last() {
        if f(last) == 0.0 {
            out.push(last);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{binomial, noon};

    #[test]
    fn measurable_coefficients() {
        let c = heisenberg_measurable(FRAC_PI_2, 0.0);
        assert!((c[1] - 1.0).abs() < 1e-15 && c[0].abs() < 1e-15 && c[2].abs() < 1e-15);
        let c = heisenberg_measurable(PI, 0.4);
        assert!((c[2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pulse_matches_heisenberg_prediction() {
        let st = noon(4, PI / 3.0).unwrap();
        for &t in &[0.3, FRAC_PI_2, 2.0] {
            for &p in &[0.0, 0.7, -1.9] {
                let c = consistency_check(&st, t, p).unwrap();
                assert!(c.mean_residual < 1e-12 && c.variance_residual < 1e-11, "{c:?}");
            }
        }
    }

    #[test]
    fn sector_rotation_matches_mode_transformation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for basis in [FockBasis::truncated(2, 6).unwrap(), FockBasis::truncated(4, 3).unwrap()] {
            let basis = Arc::new(basis);
            let pure = crate::states::random_pure(basis.clone(), &mut rng).unwrap();
            let mixed = crate::states::random_mixed(basis.clone(), 3, &mut rng).unwrap();
            for (t, p) in [(0.7, -0.3), (FRAC_PI_2, 2.0), (PI, 0.0), (5.0, 1.1)] {
                let spec = PulseSpec::new(t, p).unwrap();
                let u = pulse_unitary(&basis, &spec).unwrap();
                for st in [&pure, &mixed] {
                    let want = st.transformed(&u).density_matrix();
                    let got = apply_pulse(st, &spec).unwrap().density_matrix();
                    assert!((want - got).camax() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn large_sector_rotation_stays_accurate() {
        let st = crate::states::relative_phase(300, 0.0).unwrap();
        let c = consistency_check(&st, FRAC_PI_2, FRAC_PI_4).unwrap();
        assert!(c.mean_residual < 1e-9 && c.variance_residual < 1e-9, "{c:?}");
    }

    #[test]
    fn half_pulse_splits_single_boson() {
        let b = Arc::new(FockBasis::new(2, &[1]).unwrap());
        let st = QuantumState::fock(b, &[1, 0]).unwrap();
        let out = evolve(&st, &SequenceElement::Pulse(PulseSpec::new(FRAC_PI_2, 0.3).unwrap())).unwrap();
        let p = out.populations();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn double_pi_pulse_is_identity_up_to_phase() {
        let st = binomial(5, 0.4, 0.2).unwrap();
        let seq = [SequenceElement::PhaseChanger, SequenceElement::PhaseChanger];
        let out = evolve_sequence(&st, &seq).unwrap();
        let overlap = st.amplitudes().unwrap().dotc(out.amplitudes().unwrap());
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_evolution_keeps_populations() {
        let st = binomial(6, 0.5, 0.0).unwrap();
        let out = evolve(&st, &SequenceElement::Free { t: 0.8, chi: 0.3, delta: 0.0 }).unwrap();
        for (a, b) in st.populations().iter().zip(out.populations()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sequence_json_shape() {
        let seq = vec![
            SequenceElement::Pulse(PulseSpec { theta: 1.0, phi: 0.5 }),
            SequenceElement::Free { t: 2.0, chi: 0.1, delta: 0.0 },
            SequenceElement::PhaseChanger,
        ];
        let s = serde_json::to_string(&seq).unwrap();
        assert_eq!(
            s,
            r#"[{"pulse":{"theta":1.0,"phi":0.5}},{"free":{"T":2.0,"chi":0.1,"delta":0.0}},"phase_changer"]"#
        );
        let parsed: Vec<SequenceElement> = serde_json::from_str(r#"[{"free":{"T":1.0,"chi":0.2}}]"#).unwrap();
        assert_eq!(parsed[0], SequenceElement::Free { t: 1.0, chi: 0.2, delta: 0.0 });
    }

    #[test]
    fn fock_eigenstate_has_no_spread() {
        let b = Arc::new(FockBasis::new(2, &[4]).unwrap());
        let st = QuantumState::fock(b, &[3, 1]).unwrap();
        let rec = sample_measurements(&st, &[], 500, 3).unwrap();
        assert_eq!(rec.sample_variance, 0.0);
        assert_eq!(rec.sample_mean, -1.0);
    }
}
