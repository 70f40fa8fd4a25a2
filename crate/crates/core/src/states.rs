//! Named states and random separable-state generators.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, binomial as binom, FockBasis, QuantumState, ONE, ZERO};
use crate::tol;

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

fn require_positive(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter(format!("{what} needs N >= 1")));
    }
    Ok(())
}

/// `cos θ |N,0⟩ + sin θ |0,N⟩`.
pub fn noon(n: usize, theta: f64) -> Result<QuantumState> {
    require_positive(n, "NOON state")?;
    let basis = FockBasis::two_mode(n);
    let mut v = DVector::zeros(n + 1);
    v[0] += C64::new(theta.cos(), 0.0);
    v[n] += C64::new(theta.sin(), 0.0);
    QuantumState::pure_normalized(basis, v)
}

/// `(−ĉ†)^N |0⟩/√N!` with `ĉ = −cos θ e^{iχ/2} â − sin θ e^{−iχ/2} b̂`.
///
/// Amplitude on `(N−k, k)` is `√C(N,k) (cos θ e^{−iχ/2})^{N−k} (sin θ e^{iχ/2})^k`,
/// evaluated in log space so large `N` neither overflows nor underflows early.
pub fn binomial(n: usize, theta: f64, chi: f64) -> Result<QuantumState> {
    require_positive(n, "binomial state")?;
    let (s, c) = theta.sin_cos();
    let mut v = DVector::zeros(n + 1);
    for k in 0..=n {
        let na = n - k;
        let mag_ln = 0.5 * ln_binomial(n, k)
            + if na > 0 { na as f64 * c.abs().ln() } else { 0.0 }
            + if k > 0 { k as f64 * s.abs().ln() } else { 0.0 };
        if !mag_ln.is_finite() {
            continue;
        }
        let sign = if (c < 0.0 && na % 2 == 1) ^ (s < 0.0 && k % 2 == 1) { -1.0 } else { 1.0 };
        let phase = 0.5 * chi * (k as f64 - na as f64);
        v[k] = C64::from_polar(sign * mag_ln.exp(), phase);
    }
    QuantumState::pure_normalized(FockBasis::two_mode(n), v)
}

/// Relative-phase angle `θ_p = 2πp/(N+1)` after validating the grid point.
pub fn relative_phase_angle(n: usize, p: f64) -> Result<f64> {
    let half = n as f64 / 2.0;
    let shifted = p + half;
    if p.abs() > half + 1e-9 || (shifted - shifted.round()).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("p = {p} is not on the grid {{-N/2, ..., N/2}} for N = {n}")));
    }
    Ok(2.0 * PI * p / (n as f64 + 1.0))
}

/// Uniform-magnitude state `Σ_k e^{ikθ_p} |N/2−k, N/2+k⟩/√(N+1)` at grid point `p`.
///
/// For odd `N` the index `k` runs over half-integers in unit steps.
pub fn relative_phase(n: usize, p: f64) -> Result<QuantumState> {
    require_positive(n, "relative-phase state")?;
    let theta_p = relative_phase_angle(n, p)?;
    relative_phase_at(n, theta_p)
}

/// Relative-phase state for an arbitrary angle `θ_p`.
pub fn relative_phase_at(n: usize, theta_p: f64) -> Result<QuantumState> {
    require_positive(n, "relative-phase state")?;
    let norm = 1.0 / ((n + 1) as f64).sqrt();
    // Index j = n_b = N/2 + k; the common factor e^{−iNθ_p/2} is dropped.
    let v = DVector::from_fn(n + 1, |j, _| C64::from_polar(norm, j as f64 * theta_p));
    QuantumState::pure_normalized(FockBasis::two_mode(n), v)
}

/// Hermitian phase operator `Σ_p θ_p |N,θ_p⟩⟨N,θ_p|` on the `N` sector.
pub fn relative_phase_operator(n: usize) -> Result<DMatrix<C64>> {
    require_positive(n, "phase operator")?;
    let d = n + 1;
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        let p = i as f64 - n as f64 / 2.0;
        let theta = relative_phase_angle(n, p)?;
        let st = relative_phase_at(n, theta)?;
        let v = st.amplitudes().unwrap();
        m += v * v.adjoint() * C64::new(theta, 0.0);
    }
    Ok(m)
}

/// Phase average of the two-mode coherent state `|α⟩|α⟩`:
/// `Σ_N Poisson(2|α|²)(N) |φ_N⟩⟨φ_N|` with `φ_N ∝ Σ_k √C(N,k) |N−k, k⟩`.
///
/// The Poisson tail beyond `n_max` is reported as discarded mass; it must stay
/// below 1e-10 unless `allow_truncation` is set, in which case the kept part is
/// renormalized.
pub fn coherent_mixture(alpha2: f64, n_max: usize, allow_truncation: bool) -> Result<QuantumState> {
    if !(alpha2 >= 0.0) || !alpha2.is_finite() {
        return Err(Error::InvalidParameter("|alpha|^2 must be finite and non-negative".into()));
    }
    let lambda = 2.0 * alpha2;
    let weights: Vec<f64> = (0..=n_max)
        .map(|n| {
            if lambda == 0.0 {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (n as f64 * lambda.ln() - lambda - ln_factorial(n)).exp()
            }
        })
        .collect();
    let kept: f64 = weights.iter().sum();
    let tail = (1.0 - kept).max(0.0);
    if tail > tol::TRUNCATION_MASS && !allow_truncation {
        return Err(Error::Truncation { mass: tail, limit: tol::TRUNCATION_MASS });
    }
    let basis = Arc::new(FockBasis::truncated(2, n_max)?);
    let d = basis.dim();
    let mut rho = DMatrix::zeros(d, d);
    for (n, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let w = w / kept;
        let idx: Vec<usize> = (0..=n).map(|k| basis.index_of(&[(n - k) as u32, k as u32]).unwrap()).collect();
        let amp: Vec<f64> = (0..=n).map(|k| (0.5 * ln_binomial(n, k) - 0.5 * n as f64 * 2f64.ln()).exp()).collect();
        for i in 0..=n {
            for j in 0..=n {
                rho[(idx[i], idx[j])] += C64::new(w * amp[i] * amp[j], 0.0);
            }
        }
    }
    Ok(QuantumState::mixed_unchecked_psd(basis, rho)?.with_discarded_mass(tail))
}

/// Equal mixture over `ω ∈ {1, i, −1, −i}` of `|ψ_ω⟩⟨ψ_ω| ⊗ |ψ_ω⟩⟨ψ_ω|` with
/// `|ψ_ω⟩ = (|0⟩ + ω|1⟩)/√2`, checked against
/// `¼|00⟩⟨00| + ¼|11⟩⟨11| + ½|Ψ+⟩⟨Ψ+|`.
pub fn verstraete() -> Result<QuantumState> {
    let mode = Arc::new(FockBasis::truncated(1, 1)?);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let omegas = [ONE, C64::new(0.0, 1.0), -ONE, C64::new(0.0, -1.0)];
    let mut parts = Vec::new();
    for w in omegas {
        let local = QuantumState::pure(mode.clone(), DVector::from_vec(vec![C64::new(r, 0.0), w * r]))?;
        parts.push(fock::tensor(&local, &local)?);
    }
    let basis = parts[0].basis().clone();
    let comps: Vec<(f64, &QuantumState)> = parts.iter().map(|p| (0.25, p)).collect();
    let mixed = fock::mix(&comps)?;

    let idx = |o: [u32; 2]| basis.index_of(&o).unwrap();
    let mut expected = DMatrix::zeros(basis.dim(), basis.dim());
    expected[(idx([0, 0]), idx([0, 0]))] = C64::new(0.25, 0.0);
    expected[(idx([1, 1]), idx([1, 1]))] = C64::new(0.25, 0.0);
    for a in [idx([1, 0]), idx([0, 1])] {
        for b in [idx([1, 0]), idx([0, 1])] {
            expected[(a, b)] = C64::new(0.25, 0.0);
        }
    }
    let defect = (mixed.density_matrix() - &expected).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if defect > tol::STRUCTURAL {
        return Err(Error::InvalidState(format!("mixture differs from Bell-state form by {defect:e}")));
    }
    QuantumState::mixed(basis, expected)
}

/// Sub-system layout of a multi-mode separable state. Modes are ordered
/// `(a₁, b₁, a₂, b₂, …)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// Two single-mode sub-systems `a` and `b`.
    TwoMode,
    /// Two sub-systems: all `aᵢ` modes and all `bᵢ` modes.
    Case1 { pairs: usize },
    /// Every mode is its own sub-system.
    Case2 { pairs: usize },
    /// Every pair `(aᵢ, bᵢ)` is a sub-system; `one_boson` restricts each pair to one boson.
    Case3 { pairs: usize, one_boson: bool },
}

impl Structure {
    pub fn pairs(&self) -> usize {
        match *self {
            Structure::TwoMode => 1,
            Structure::Case1 { pairs } | Structure::Case2 { pairs } | Structure::Case3 { pairs, .. } => pairs,
        }
    }

    pub fn num_modes(&self) -> usize {
        2 * self.pairs()
    }

    /// Mode lists of each sub-system, in the order components list their states.
    pub fn subsystems(&self) -> Vec<Vec<usize>> {
        let n = self.pairs();
        match self {
            Structure::TwoMode => vec![vec![0], vec![1]],
            Structure::Case1 { .. } => vec![(0..n).map(|i| 2 * i).collect(), (0..n).map(|i| 2 * i + 1).collect()],
            Structure::Case2 { .. } => (0..2 * n).map(|m| vec![m]).collect(),
            Structure::Case3 { .. } => (0..n).map(|i| vec![2 * i, 2 * i + 1]).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Structure::TwoMode => "two_mode",
            Structure::Case1 { .. } => "case1",
            Structure::Case2 { .. } => "case2",
            Structure::Case3 { .. } => "case3",
        }
    }
}

/// `ρ = Σ_R P_R ⊗ᵢ ρ_R⁽ⁱ⁾` over the sub-systems of `structure`.
#[derive(Clone, Debug)]
pub struct SeparableSpec {
    pub structure: Structure,
    pub weights: Vec<f64>,
    /// One entry per component; each lists sub-system states in `structure.subsystems()` order.
    pub components: Vec<Vec<QuantumState>>,
    /// Accept sub-system states with number coherences.
    pub ssr_override: bool,
}

/// Smallest basis on which spin operators act without truncation for this state:
/// product tuples of one-boson pairs, or complete sectors otherwise.
fn separable_basis(spec: &SeparableSpec) -> Result<Arc<FockBasis>> {
    let m = spec.structure.num_modes();
    if let Structure::Case3 { pairs, one_boson: true } = spec.structure {
        let occs = (0..1usize << pairs)
            .map(|bits| {
                let mut o = vec![0u32; m];
                for i in 0..pairs {
                    o[2 * i + ((bits >> i) & 1)] = 1;
                }
                o
            })
            .collect();
        return Ok(Arc::new(FockBasis::from_occupations(m, occs)?));
    }
    let mut sectors: Vec<usize> = Vec::new();
    for comp in &spec.components {
        let mut totals = vec![0usize];
        for st in comp {
            let pops = st.populations();
            let local: Vec<usize> = {
                let mut t: Vec<usize> =
                    (0..pops.len()).filter(|&i| pops[i] > 0.0).map(|i| st.basis().total(i)).collect();
                t.sort_unstable();
                t.dedup();
                t
            };
            let mut next = Vec::new();
            for a in &totals {
                for b in &local {
                    next.push(a + b);
                }
            }
            next.sort_unstable();
            next.dedup();
            totals = next;
        }
        sectors.extend(totals);
    }
    sectors.sort_unstable();
    sectors.dedup();
    Ok(Arc::new(FockBasis::new(m, &sectors)?))
}

pub fn separable_state(spec: &SeparableSpec) -> Result<QuantumState> {
    if spec.components.len() != spec.weights.len() || spec.components.is_empty() {
        return Err(Error::InvalidMixture("weights and components differ in length".into()));
    }
    let subsystems = spec.structure.subsystems();
    for comp in &spec.components {
        if comp.len() != subsystems.len() {
            return Err(Error::InvalidParameter(format!(
                "component has {} sub-system states, structure needs {}",
                comp.len(),
                subsystems.len()
            )));
        }
        for (st, modes) in comp.iter().zip(&subsystems) {
            if st.basis().num_modes() != modes.len() {
                return Err(Error::InvalidParameter("sub-system state has the wrong number of modes".into()));
            }
            if !spec.ssr_override && !st.ssr().global_compliant {
                return Err(Error::InvalidState("sub-system state has number coherences".into()));
            }
        }
    }
    let target = separable_basis(spec)?;
    let products: Vec<QuantumState> = spec
        .components
        .iter()
        .map(|comp| {
            let parts: Vec<(&[usize], &QuantumState)> =
                subsystems.iter().map(|m| m.as_slice()).zip(comp.iter()).collect();
            fock::product_into(target.clone(), &parts)
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(f64, &QuantumState)> = spec.weights.iter().cloned().zip(products.iter()).collect();
    let state = fock::mix(&pairs)?;
    Ok(state.with_local_partition(&subsystems))
}

/// Random separable-state parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Largest total boson number of any component.
    pub n_max: usize,
    /// Number of components is uniform on `1..=max_components`.
    pub max_components: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { n_max: 6, max_components: 5 }
    }
}

fn dirichlet(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = draws.iter().sum();
    draws.iter().map(|d| d / s).collect()
}

/// Uniform random composition of `total` into `k` non-negative parts.
fn split_budget(rng: &mut impl Rng, total: usize, k: usize) -> Vec<usize> {
    let mut cuts: Vec<usize> = (0..k - 1).map(|_| rng.random_range(0..=total)).collect();
    cuts.sort_unstable();
    let mut parts = Vec::with_capacity(k);
    let mut prev = 0;
    for c in cuts {
        parts.push(c - prev);
        prev = c;
    }
    parts.push(total - prev);
    parts
}

/// Number-diagonal state on `modes` modes with occupations summing to at most `budget`.
fn random_fock_mixture(rng: &mut impl Rng, modes: usize, sector: Option<usize>, budget: usize) -> Result<QuantumState> {
    let basis = Arc::new(match sector {
        Some(n) => FockBasis::new(modes, &[n])?,
        None => FockBasis::truncated(modes, budget)?,
    });
    let w = dirichlet(rng, basis.dim());
    let rho = DMatrix::from_diagonal(&DVector::from_iterator(basis.dim(), w.iter().map(|&p| C64::new(p, 0.0))));
    QuantumState::mixed_unchecked_psd(basis, rho)
}

/// Multi-mode block state without coherences between different block totals:
/// a mixture over totals of random fixed-total superpositions or Fock mixtures.
fn random_block_state(rng: &mut impl Rng, modes: usize, budget: usize) -> Result<QuantumState> {
    let basis = Arc::new(FockBasis::truncated(modes, budget)?);
    let q = dirichlet(rng, budget + 1);
    let d = basis.dim();
    let mut rho = DMatrix::zeros(d, d);
    for (n, &qn) in q.iter().enumerate() {
        let idx: Vec<usize> = (0..d).filter(|&i| basis.total(i) == n).collect();
        if rng.random_bool(0.5) {
            let v: Vec<C64> =
                idx.iter().map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    rho[(i, j)] += v[a] * v[b].conj() * (qn / (norm * norm));
                }
            }
        } else {
            let w = dirichlet(rng, idx.len());
            for (a, &i) in idx.iter().enumerate() {
                rho[(i, i)] += C64::new(qn * w[a], 0.0);
            }
        }
    }
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    QuantumState::mixed_unchecked_psd(basis, rho)
}

/// One-boson pair state with `ρ_aa = sin²α`, `ρ_bb = cos²α`,
/// `ρ_ab = |sin α cos α| sin²β e^{iφ}` on the basis `(1,0), (0,1)`.
pub fn one_boson_pair(alpha: f64, beta: f64, phi: f64) -> Result<QuantumState> {
    let basis = Arc::new(FockBasis::new(2, &[1])?);
    let (sa, ca) = alpha.sin_cos();
    let off = C64::from_polar((sa * ca).abs() * beta.sin().powi(2), phi);
    let rho = DMatrix::from_row_slice(2, 2, &[C64::new(sa * sa, 0.0), off, off.conj(), C64::new(ca * ca, 0.0)]);
    QuantumState::mixed(basis, rho)
}

pub fn random_separable_spec(structure: Structure, cfg: &SamplerConfig, rng: &mut impl Rng) -> Result<SeparableSpec> {
    let r = rng.random_range(1..=cfg.max_components.max(1));
    let weights = dirichlet(rng, r);
    let subsystems = structure.subsystems();
    // Two-mode samples are sometimes drawn at fixed total N so fixed-N tests see separable inputs.
    let fixed_total = matches!(structure, Structure::TwoMode) && rng.random_bool(0.25);
    let fixed_n = rng.random_range(1..=cfg.n_max.max(1));
    let mut components = Vec::with_capacity(r);
    for _ in 0..r {
        let comp = match structure {
            Structure::Case3 { one_boson: true, .. } => subsystems
                .iter()
                .map(|_| {
                    one_boson_pair(
                        rng.random_range(0.0..=PI / 2.0),
                        rng.random_range(0.0..=PI / 2.0),
                        rng.random_range(0.0..2.0 * PI),
                    )
                })
                .collect::<Result<Vec<_>>>()?,
            _ if fixed_total => {
                let na = rng.random_range(0..=fixed_n);
                vec![
                    random_fock_mixture(rng, 1, Some(na), na)?,
                    random_fock_mixture(rng, 1, Some(fixed_n - na), fixed_n - na)?,
                ]
            }
            _ => {
                let total = rng.random_range(0..=cfg.n_max);
                let budgets = split_budget(rng, total, subsystems.len());
                subsystems
                    .iter()
                    .zip(budgets)
                    .map(|(modes, b)| {
                        if modes.len() == 1 {
                            random_fock_mixture(rng, 1, None, b)
                        } else {
                            random_block_state(rng, modes.len(), b)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        components.push(comp);
    }
    Ok(SeparableSpec { structure, weights, components, ssr_override: false })
}

/// Seed-deterministic random separable state.
pub fn random_separable(structure: Structure, cfg: &SamplerConfig, seed: u64) -> Result<QuantumState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_separable_spec(structure, cfg, &mut rng)?;
    separable_state(&spec)
}

/// Product of `states[i]` placed on pair `i`, with vacuum on the remaining pairs.
/// Each state must be a two-mode state; the basis holds exactly the product tuples.
pub fn pair_product(states: &[&QuantumState], pairs: usize) -> Result<QuantumState> {
    if states.len() > pairs || pairs == 0 {
        return Err(Error::InvalidParameter("more pair states than pairs".into()));
    }
    let vacuum = QuantumState::vacuum(2);
    let mut all: Vec<&QuantumState> = states.to_vec();
    while all.len() < pairs {
        all.push(&vacuum);
    }
    // Complete sectors per pair keep intra-pair spin operators closed.
    let mut occs: Vec<Vec<u32>> = vec![Vec::new()];
    for st in &all {
        if st.basis().num_modes() != 2 {
            return Err(Error::InvalidParameter("pair states must have two modes".into()));
        }
        let mut local = Vec::new();
        for &n in st.basis().sectors() {
            for k in 0..=n as u32 {
                local.push([n as u32 - k, k]);
            }
        }
        let mut next = Vec::with_capacity(occs.len() * local.len());
        for o in &occs {
            for l in &local {
                let mut t = o.clone();
                t.extend_from_slice(l);
                next.push(t);
            }
        }
        occs = next;
    }
    let target = Arc::new(FockBasis::from_occupations(2 * pairs, occs)?);
    let modes: Vec<[usize; 2]> = (0..pairs).map(|i| [2 * i, 2 * i + 1]).collect();
    let parts: Vec<(&[usize], &QuantumState)> = modes.iter().map(|m| m.as_slice()).zip(all.iter().copied()).collect();
    let partition: Vec<Vec<usize>> = modes.iter().map(|m| m.to_vec()).collect();
    Ok(fock::product_into(target, &parts)?.with_local_partition(&partition))
}

/// Relative-phase state `(N, p = 0)` on the first pair, vacuum on the others.
pub fn case3_counterexample(n: usize, pairs: usize) -> Result<QuantumState> {
    if pairs < 2 {
        return Err(Error::InvalidParameter("needs at least two mode pairs".into()));
    }
    let rp = relative_phase(n, 0.0)?;
    pair_product(&[&rp], pairs)
}

/// Product over pairs of binomial states `(n, π/8, 0)`, each of which satisfies
/// the variance-sum condition `⟨ΔS_x²⟩ + ⟨ΔS_y²⟩ < ½⟨N̂⟩` on its own pair.
pub fn case3_variance_sum_counterexample(n_per_pair: usize, pairs: usize) -> Result<QuantumState> {
    if pairs < 2 {
        return Err(Error::InvalidParameter("needs at least two mode pairs".into()));
    }
    let b = binomial(n_per_pair, PI / 8.0, 0.0)?;
    let refs: Vec<&QuantumState> = (0..pairs).map(|_| &b).collect();
    pair_product(&refs, pairs)
}

/// Haar-like random pure state on a basis (complex Gaussian amplitudes).
pub fn random_pure(basis: Arc<FockBasis>, rng: &mut impl Rng) -> Result<QuantumState> {
    let v = DVector::from_fn(basis.dim(), |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    QuantumState::pure_normalized(basis, v)
}

/// Random globally number-conserving mixed state: a weighted sum of random
/// pure states, each confined to one sector of `basis`.
pub fn random_mixed(basis: Arc<FockBasis>, rank: usize, rng: &mut impl Rng) -> Result<QuantumState> {
    let d = basis.dim();
    let sectors = basis.sectors().to_vec();
    let w = dirichlet(rng, rank.max(1));
    let mut rho = DMatrix::zeros(d, d);
    for &p in &w {
        let n = sectors[rng.random_range(0..sectors.len())];
        let mut v = DVector::from_fn(d, |i, _| {
            if basis.total(i) == n {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            } else {
                ZERO
            }
        });
        v /= C64::new(v.norm(), 0.0);
        rho += &v * v.adjoint() * C64::new(p, 0.0);
    }
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    QuantumState::mixed_unchecked_psd(basis, rho)
}

/// Size of the `N` sector of an `m`-mode system.
pub fn sector_dim(m: usize, n: usize) -> u128 {
    binom(n + m - 1, m - 1)
}
