//! Schwinger spin operators, spin frames, principal-frame rotations, mode
//! rotations and quadrature operators.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{mode_transform_unitary, FockBasis, Ladder, Operator, QuantumState, StateData, I, ZERO};
use crate::tol;

/// Spin triple plus total number operator over a set of mode pairs.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub sx: Operator,
    pub sy: Operator,
    pub sz: Operator,
    pub n: Operator,
    pairs: Vec<(usize, usize)>,
}

impl SpinOperators {
    /// `S = Σᵢ` Schwinger triple of `(aᵢ, bᵢ)`. Every mode of the basis must be
    /// used exactly once.
    pub fn paired(basis: Arc<FockBasis>, pairs: &[(usize, usize)]) -> Result<Self> {
        let m = basis.num_modes();
        let mut used = vec![false; m];
        for &(a, b) in pairs {
            for mode in [a, b] {
                if mode >= m || std::mem::replace(&mut used[mode], true) {
                    return Err(Error::InvalidParameter(format!("mode {mode} repeated or out of range in pairing")));
                }
            }
        }
        if let Some(free) = used.iter().position(|u| !u) {
            return Err(Error::InvalidParameter(format!("mode {free} is unpaired")));
        }
        Ok(Self::over_pairs(basis, pairs))
    }

    /// Pairs `(0,1)`, `(2,3)`, ... for an even number of modes.
    pub fn adjacent_pairs(basis: Arc<FockBasis>) -> Result<Self> {
        let m = basis.num_modes();
        if !m.is_multiple_of(2) {
            return Err(Error::InvalidParameter("odd number of modes cannot be paired".into()));
        }
        let pairs: Vec<(usize, usize)> = (0..m / 2).map(|i| (2 * i, 2 * i + 1)).collect();
        Self::paired(basis, &pairs)
    }

    /// Two-mode operators with `a` = mode 0 and `b` = mode 1.
    pub fn two_mode(basis: Arc<FockBasis>) -> Result<Self> {
        if basis.num_modes() != 2 {
            return Err(Error::InvalidBasis("two-mode operators need exactly two modes".into()));
        }
        Self::paired(basis, &[(0, 1)])
    }

    /// Operators restricted to a subset of pairs; other modes are ignored.
    pub fn over_pairs(basis: Arc<FockBasis>, pairs: &[(usize, usize)]) -> Self {
        let half = C64::new(0.5, 0.0);
        let mut x_terms = Vec::new();
        let mut y_terms = Vec::new();
        for &(a, b) in pairs {
            x_terms.push((half, vec![Ladder::Raise(b), Ladder::Lower(a)]));
            x_terms.push((half, vec![Ladder::Raise(a), Ladder::Lower(b)]));
            y_terms.push((-I * 0.5, vec![Ladder::Raise(b), Ladder::Lower(a)]));
            y_terms.push((I * 0.5, vec![Ladder::Raise(a), Ladder::Lower(b)]));
        }
        let sx = Operator::from_terms(basis.clone(), &x_terms, true);
        let sy = Operator::from_terms(basis.clone(), &y_terms, true);
        let diff = |occ: &[u32]| {
            let s: f64 = pairs.iter().map(|&(a, b)| occ[b] as f64 - occ[a] as f64).sum();
            C64::new(0.5 * s, 0.0)
        };
        let sz = Operator::diagonal(basis.clone(), diff, true);
        let count = |occ: &[u32]| {
            let s: u32 = pairs.iter().map(|&(a, b)| occ[a] + occ[b]).sum();
            C64::new(s as f64, 0.0)
        };
        let n = Operator::diagonal(basis, count, true);
        SpinOperators { sx, sy, sz, n, pairs: pairs.to_vec() }
    }

    /// Per-well operators on modes ordered `(a₁, b₁, a₂, b₂)` and their sum.
    pub fn local_wells(basis: Arc<FockBasis>) -> Result<(Self, Self, Self)> {
        if basis.num_modes() != 4 {
            return Err(Error::InvalidBasis("local well operators need four modes".into()));
        }
        let w1 = Self::over_pairs(basis.clone(), &[(0, 1)]);
        let w2 = Self::over_pairs(basis.clone(), &[(2, 3)]);
        let total = Self::paired(basis, &[(0, 1), (2, 3)])?;
        Ok((w1, w2, total))
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        self.sx.basis()
    }
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn component(&self, i: usize) -> &Operator {
        match i {
            0 => &self.sx,
            1 => &self.sy,
            2 => &self.sz,
            _ => panic!("spin component index {i} out of range"),
        }
    }

    /// `J_ξ = Σ_μ M_ξμ S_μ`.
    pub fn rotated(&self, m: &Matrix3<f64>) -> SpinOperators {
        let row = |r: usize| {
            Operator::lin_comb(&[
                (C64::new(m[(r, 0)], 0.0), &self.sx),
                (C64::new(m[(r, 1)], 0.0), &self.sy),
                (C64::new(m[(r, 2)], 0.0), &self.sz),
            ])
        };
        SpinOperators { sx: row(0), sy: row(1), sz: row(2), n: self.n.clone(), pairs: self.pairs.clone() }
    }

    /// `S_x² + S_y² + S_z²`.
    pub fn casimir(&self) -> Operator {
        let sq = |o: &Operator| o.mul(o);
        sq(&self.sx).add(&sq(&self.sy)).add(&sq(&self.sz)).with_hermitian_hint(true)
    }

    /// Largest deviation of `[S_ξ, S_μ] = iε S_λ` over the three cyclic pairs.
    pub fn algebra_defect(&self) -> f64 {
        let c = |a: &Operator, b: &Operator, target: &Operator| a.commutator(b).max_abs_diff(&target.scale(I));
        c(&self.sx, &self.sy, &self.sz).max(c(&self.sy, &self.sz, &self.sx)).max(c(&self.sz, &self.sx, &self.sy))
    }

    pub fn inplane(&self, phi: f64) -> InPlaneOperators {
        inplane_operators(self, phi)
    }
}

/// Bloch vector and covariance matrix of a spin triple on a state.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpinFrame {
    pub bloch: [f64; 3],
    pub cov: [[f64; 3]; 3],
    pub casimir: f64,
    #[serde(rename = "N_mean")]
    pub n_mean: f64,
    #[serde(default)]
    pub state_ref: String,
}

impl SpinFrame {
    pub fn bloch_vec(&self) -> Vector3<f64> {
        Vector3::from(self.bloch)
    }
    pub fn cov_mat(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.cov[i][j])
    }
    pub fn variance(&self, i: usize) -> f64 {
        self.cov[i][i]
    }
    pub fn x(&self) -> f64 {
        self.bloch[0]
    }
    pub fn y(&self) -> f64 {
        self.bloch[1]
    }
    pub fn z(&self) -> f64 {
        self.bloch[2]
    }

    /// The frame seen through rotated operators `J = M S`.
    pub fn rotated(&self, m: &Matrix3<f64>) -> SpinFrame {
        let b = m * self.bloch_vec();
        let c = m * self.cov_mat() * m.transpose();
        SpinFrame {
            bloch: [b[0], b[1], b[2]],
            cov: sym_array(&c),
            casimir: self.casimir,
            n_mean: self.n_mean,
            state_ref: self.state_ref.clone(),
        }
    }

    /// Scale used for relative checks: the larger of 1 and the typical second moment.
    pub fn scale(&self) -> f64 {
        let trace: f64 = (0..3).map(|i| self.cov[i][i]).sum();
        let b2: f64 = self.bloch.iter().map(|v| v * v).sum();
        (trace + b2).max(1.0)
    }

    /// Covariance symmetric and PSD, Heisenberg relations satisfied.
    pub fn check_invariants(&self) -> Result<()> {
        let scale = self.scale();
        for i in 0..3 {
            for j in 0..3 {
                if (self.cov[i][j] - self.cov[j][i]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidState("covariance matrix not symmetric".into()));
                }
            }
        }
        let eig = SymmetricEigen::new(self.cov_mat());
        let min = eig.eigenvalues.min();
        if min < -1e-9 * scale {
            return Err(Error::InvalidState(format!("covariance eigenvalue {min:e} is negative")));
        }
        for (a, b, g) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let lhs = self.cov[a][a] * self.cov[b][b];
            let rhs = 0.25 * self.bloch[g] * self.bloch[g];
            if lhs < rhs - 1e-9 * scale * scale {
                return Err(Error::InvalidState(format!("uncertainty relation violated ({lhs} < {rhs})")));
            }
        }
        Ok(())
    }
}

fn sym_array(c: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = 0.5 * (c[(i, j)] + c[(j, i)]);
        }
    }
    out
}

/// Evaluates Bloch vector, covariance matrix, Casimir and mean number.
///
/// For pure states the second moments are inner products of `S_μ|ψ⟩`; for mixed
/// states they are traces of `S_μ S_ν ρ`.
pub fn evaluate_frame(ops: &SpinOperators, state: &QuantumState) -> Result<SpinFrame> {
    if !crate::fock::same_basis(ops.basis(), state.basis()) {
        return Err(Error::BasisMismatch);
    }
    let comps = [&ops.sx, &ops.sy, &ops.sz];
    let mut means = [ZERO; 3];
    let mut second = [[ZERO; 3]; 3];
    let n_mean;
    match state.data() {
        StateData::Pure(v) => {
            let w: Vec<DVector<C64>> = comps.iter().map(|o| o.apply(v)).collect();
            for i in 0..3 {
                means[i] = v.dotc(&w[i]);
                for j in i..3 {
                    second[i][j] = w[i].dotc(&w[j]);
                }
            }
            n_mean = v.dotc(&ops.n.apply(v));
        }
        StateData::Mixed(rho) => {
            let x: Vec<DMatrix<C64>> = comps.iter().map(|o| o.apply_mat(rho)).collect();
            for i in 0..3 {
                means[i] = x[i].trace();
                for j in i..3 {
                    second[i][j] = comps[i].trace_with(&x[j]);
                }
            }
            n_mean = ops.n.trace_with(rho);
        }
    }
    let mut bloch = [0.0; 3];
    for i in 0..3 {
        if means[i].im.abs() > tol::IMAG_RESIDUE * means[i].re.abs().max(1.0) {
            return Err(Error::ImaginaryResidue(means[i].im));
        }
        bloch[i] = means[i].re;
    }
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let c = second[i][j].re - bloch[i] * bloch[j];
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    for i in 0..3 {
        let floor = tol::PSD * bloch[i].abs().max(1.0).powi(2);
        if cov[i][i] < 0.0 && cov[i][i] > -floor {
            cov[i][i] = 0.0;
        }
    }
    let casimir = (0..3).map(|i| second[i][i].re).sum();
    let frame = SpinFrame { bloch, cov, casimir, n_mean: n_mean.re, state_ref: String::new() };
    frame.check_invariants()?;
    Ok(frame)
}

/// Active z–y–z Euler angles of `R = exp(iαS_z) exp(iβS_y) exp(iγS_z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn rz(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn ry(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(t: f64) -> f64 {
    let mut r = t.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

impl EulerAngles {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        EulerAngles { alpha, beta, gamma }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Matrix `M` with `R S_ξ R⁻¹ = Σ_μ M_ξμ S_μ`.
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        rz(self.gamma) * ry(self.beta) * rz(self.alpha)
    }

    /// Extracts angles in `α, γ ∈ (−π, π]`, `β ∈ [0, π]`; at `β ∈ {0, π}` sets `γ = 0`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let cb = m[(2, 2)].clamp(-1.0, 1.0);
        let sb = m[(2, 0)].hypot(m[(2, 1)]);
        let beta = sb.atan2(cb);
        if sb < 1e-12 {
            let alpha = if cb > 0.0 { m[(1, 0)].atan2(m[(0, 0)]) } else { m[(1, 0)].atan2(m[(1, 1)]) };
            return EulerAngles { alpha: wrap_angle(alpha), beta: if cb > 0.0 { 0.0 } else { PI }, gamma: 0.0 };
        }
        let alpha = m[(2, 1)].atan2(-m[(2, 0)]);
        let gamma = m[(1, 2)].atan2(m[(0, 2)]);
        EulerAngles { alpha: wrap_angle(alpha), beta, gamma: wrap_angle(gamma) }
    }

    /// Equivalent angles in the normalized ranges.
    pub fn normalized(&self) -> Self {
        Self::from_matrix(&self.rotation_matrix())
    }

    /// Single-particle unitary in the `(a, b)` basis.
    pub fn single_particle(&self) -> Matrix2<C64> {
        let (sb, cb) = (0.5 * self.beta).sin_cos();
        let e = |t: f64| C64::from_polar(1.0, t);
        let (ha, hg) = (0.5 * self.alpha, 0.5 * self.gamma);
        Matrix2::new(e(-ha) * cb * e(-hg), -e(-ha) * sb * e(hg), e(ha) * sb * e(-hg), e(ha) * cb * e(hg))
    }
}

/// Rotated frame whose covariance matrix is diagonal.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PrincipalFrame {
    pub euler: EulerAngles,
    /// Rows are the principal axes: `J_ξ = Σ_μ M_ξμ S_μ`.
    pub rotation: [[f64; 3]; 3],
    pub frame: SpinFrame,
    pub principal_variances: [f64; 3],
}

impl PrincipalFrame {
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rotation[i][j])
    }
}

fn cleaned_cov(frame: &SpinFrame) -> Matrix3<f64> {
    let mut c = frame.cov_mat();
    let scale = (0..3).map(|i| c[(i, i)].abs()).fold(1.0, f64::max);
    for i in 0..3 {
        for j in 0..3 {
            if i != j && c[(i, j)].abs() <= 1e-12 * scale {
                c[(i, j)] = 0.0;
            }
        }
    }
    c
}

/// Diagonalizes the covariance matrix and labels the principal axes.
///
/// Degenerate eigenspaces are spanned by projecting the Bloch direction and then
/// the coordinate axes onto them, so axis-aligned frames stay axis-aligned.
/// When the Bloch vector is non-negligible, `J_z` is the axis most aligned with
/// it, signed so `⟨J_z⟩ ≤ 0`; `J_x` is the remaining axis of larger variance and
/// `J_y = J_z × J_x`. Otherwise axes follow descending variance.
pub fn principal_frame(frame: &SpinFrame) -> PrincipalFrame {
    let cov = cleaned_cov(frame);
    let eig = SymmetricEigen::new(cov);
    let trace = cov.trace().abs().max(1.0);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());

    let bloch = frame.bloch_vec();
    let bnorm = bloch.norm();
    let has_bloch = bnorm > 1e-9 * frame.n_mean.abs().max(1.0);

    let mut candidates: Vec<Vector3<f64>> = Vec::new();
    if has_bloch {
        candidates.push(bloch / bnorm);
    }
    candidates.extend([Vector3::x(), Vector3::y(), Vector3::z()]);

    // Group eigenvalues into clusters and build a clean basis in each.
    let mut axes: Vec<(f64, Vector3<f64>)> = Vec::new();
    let mut k = 0;
    while k < 3 {
        let mut cluster = vec![order[k]];
        while k + cluster.len() < 3
            && (eig.eigenvalues[order[k]] - eig.eigenvalues[order[k + cluster.len()]]).abs() < 1e-10 * trace
        {
            cluster.push(order[k + cluster.len()]);
        }
        let vecs: Vec<Vector3<f64>> = cluster.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        let lam = cluster.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / cluster.len() as f64;
        let mut basis: Vec<Vector3<f64>> = Vec::new();
        for cand in &candidates {
            if basis.len() == cluster.len() {
                break;
            }
            let mut p: Vector3<f64> = vecs.iter().map(|v| v * v.dot(cand)).sum();
            for b in &basis {
                p -= b * b.dot(&p);
            }
            if p.norm() > 1e-6 {
                basis.push(p.normalize());
            }
        }
        // Fall back to the raw eigenvectors when projections were insufficient.
        for v in &vecs {
            if basis.len() == cluster.len() {
                break;
            }
            let mut p = *v;
            for b in &basis {
                p -= b * b.dot(&p);
            }
            if p.norm() > 1e-6 {
                basis.push(p.normalize());
            }
        }
        for b in basis {
            axes.push((lam, b));
        }
        k += cluster.len();
    }

    let fix_sign = |v: Vector3<f64>| -> Vector3<f64> {
        match v.iter().find(|c| c.abs() > 1e-8) {
            Some(c) if *c < 0.0 => -v,
            _ => v,
        }
    };

    let (jx, jy, jz) = if has_bloch {
        let zi = (0..3)
            .max_by(|&i, &j| axes[i].1.dot(&bloch).abs().partial_cmp(&axes[j].1.dot(&bloch).abs()).unwrap())
            .unwrap();
        let mut jz = axes[zi].1;
        if jz.dot(&bloch) > 0.0 {
            jz = -jz;
        }
        let rest: Vec<&(f64, Vector3<f64>)> =
            axes.iter().enumerate().filter(|(i, _)| *i != zi).map(|(_, a)| a).collect();
        let xi = if rest[0].0 >= rest[1].0 { 0 } else { 1 };
        let jx = fix_sign(rest[xi].1);
        let jy = jz.cross(&jx);
        (jx, jy, jz)
    } else {
        let jx = fix_sign(axes[0].1);
        let jy = fix_sign(axes[1].1);
        let jz = jx.cross(&jy);
        (jx, jy, jz)
    };
    let m = Matrix3::from_rows(&[jx.transpose(), jy.transpose(), jz.transpose()]);
    let mut rotated = frame.rotated(&m);
    let scale = (0..3).map(|i| rotated.cov[i][i].abs()).fold(1.0, f64::max);
    for i in 0..3 {
        for j in 0..3 {
            if i != j && rotated.cov[i][j].abs() <= 1e-12 * scale {
                rotated.cov[i][j] = 0.0;
            }
        }
    }
    let mut rotation = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rotation[i][j] = m[(i, j)];
        }
    }
    PrincipalFrame {
        euler: EulerAngles::from_matrix(&m),
        rotation,
        principal_variances: [rotated.cov[0][0], rotated.cov[1][1], rotated.cov[2][2]],
        frame: rotated,
    }
}

/// New mode operators `ĉ, d̂` produced by a rotation, with the inverse map.
#[derive(Clone, Debug)]
pub struct ModeRotation {
    pub angles: EulerAngles,
    /// Rows give `ĉ` and `d̂` as combinations of `(â, b̂)`.
    pub forward: Matrix2<C64>,
    /// Rows give `â` and `b̂` as combinations of `(ĉ, d̂)`.
    pub inverse: Matrix2<C64>,
    pub c: Operator,
    pub d: Operator,
}

impl ModeRotation {
    pub fn c_dag(&self) -> Operator {
        self.c.adjoint()
    }
    pub fn d_dag(&self) -> Operator {
        self.d.adjoint()
    }
    /// Spin triple built from `(ĉ, d̂)` in place of `(â, b̂)`.
    pub fn spin_operators(&self) -> SpinOperators {
        let (c, d) = (&self.c, &self.d);
        let (cd, dd) = (self.c_dag(), self.d_dag());
        let half = C64::new(0.5, 0.0);
        let dc = dd.mul(c);
        let cdd = cd.mul(d);
        let sx = Operator::lin_comb(&[(half, &dc), (half, &cdd)]).with_hermitian_hint(true);
        let sy = Operator::lin_comb(&[(-I * 0.5, &dc), (I * 0.5, &cdd)]).with_hermitian_hint(true);
        let sz = Operator::lin_comb(&[(half, &dd.mul(d)), (-half, &cd.mul(c))]).with_hermitian_hint(true);
        let n = Operator::total_number(c.basis().clone());
        SpinOperators { sx, sy, sz, n, pairs: vec![(0, 1)] }
    }
}

/// `ĉ = e^{iγ/2}(cos(β/2) e^{iα/2} â + sin(β/2) e^{−iα/2} b̂)` and
/// `d̂ = e^{−iγ/2}(−sin(β/2) e^{iα/2} â + cos(β/2) e^{−iα/2} b̂)`.
pub fn rotate_modes(angles: EulerAngles, basis: Arc<FockBasis>) -> Result<ModeRotation> {
    if basis.num_modes() != 2 {
        return Err(Error::InvalidBasis("mode rotation needs a two-mode basis".into()));
    }
    let (sb, cb) = (0.5 * angles.beta).sin_cos();
    let e = |t: f64| C64::from_polar(1.0, t);
    let (ha, hg) = (0.5 * angles.alpha, 0.5 * angles.gamma);
    let forward = Matrix2::new(e(hg) * cb * e(ha), e(hg) * sb * e(-ha), -e(-hg) * sb * e(ha), e(-hg) * cb * e(-ha));
    let inverse = forward.adjoint();
    let lower = |coef: (C64, C64)| {
        Operator::from_terms(
            basis.clone(),
            &[(coef.0, vec![Ladder::Lower(0)]), (coef.1, vec![Ladder::Lower(1)])],
            false,
        )
    };
    let c = lower((forward[(0, 0)], forward[(0, 1)]));
    let d = lower((forward[(1, 0)], forward[(1, 1)]));
    Ok(ModeRotation { angles, forward, inverse, c, d })
}

/// Many-body unitary of the rotation `R(α, β, γ)` on a two-mode basis with complete sectors.
pub fn rotation_unitary(angles: EulerAngles, basis: &FockBasis) -> Result<DMatrix<C64>> {
    if basis.num_modes() != 2 {
        return Err(Error::InvalidBasis("rotation needs a two-mode basis".into()));
    }
    let u = angles.single_particle();
    mode_transform_unitary(basis, &DMatrix::from_fn(2, 2, |i, j| u[(i, j)]))
}

/// Rotated in-plane spin operators.
#[derive(Clone, Debug)]
pub struct InPlaneOperators {
    pub phi: f64,
    /// `cos φ S_x + sin φ S_y`.
    pub perp1: Operator,
    /// `−sin φ S_x + cos φ S_y`.
    pub perp2: Operator,
    /// `sin φ S_x + cos φ S_y`: the interferometer measurable at phase `φ`
    /// after a π/2 pulse, i.e. `S_x` rotated about z by `3π/2 + φ`.
    pub x_sharp: Operator,
    /// `−cos φ S_x + sin φ S_y`.
    pub y_sharp: Operator,
}

pub fn inplane_operators(ops: &SpinOperators, phi: f64) -> InPlaneOperators {
    let (s, c) = phi.sin_cos();
    let comb = |a: f64, b: f64| {
        Operator::lin_comb(&[(C64::new(a, 0.0), &ops.sx), (C64::new(b, 0.0), &ops.sy)]).with_hermitian_hint(true)
    };
    InPlaneOperators { phi, perp1: comb(c, s), perp2: comb(-s, c), x_sharp: comb(s, c), y_sharp: comb(-c, s) }
}

/// Single-mode and two-mode quadrature operators at angle `θ`.
#[derive(Clone, Debug)]
pub struct QuadratureSet {
    pub theta: f64,
    pub xa: Operator,
    pub pa: Operator,
    pub xb: Operator,
    pub pb: Operator,
    pub x_plus: Operator,
    pub p_plus: Operator,
    pub x_minus: Operator,
    pub p_minus: Operator,
}

/// `(e^{−iθ} e + e^{iθ} e†)/√2` for mode `mode`.
pub fn quadrature(basis: Arc<FockBasis>, mode: usize, theta: f64) -> Operator {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Operator::from_terms(
        basis,
        &[
            (C64::from_polar(r, -theta), vec![Ladder::Lower(mode)]),
            (C64::from_polar(r, theta), vec![Ladder::Raise(mode)]),
        ],
        true,
    )
}

/// Builds the quadratures on a two-mode basis. The basis should include sector
/// `N + 1` (and `N − 1`) of every populated sector `N`, else edge elements are dropped.
pub fn quadrature_set(theta: f64, basis: Arc<FockBasis>) -> Result<QuadratureSet> {
    if basis.num_modes() != 2 {
        return Err(Error::InvalidBasis("quadratures need a two-mode basis".into()));
    }
    let xa = quadrature(basis.clone(), 0, theta);
    let pa = quadrature(basis.clone(), 0, theta + PI / 2.0);
    let xb = quadrature(basis.clone(), 1, theta);
    let pb = quadrature(basis, 1, theta + PI / 2.0);
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let comb = |p: &Operator, q: &Operator, sign: f64| Operator::lin_comb(&[(r, p), (r * sign, q)]);
    Ok(QuadratureSet {
        theta,
        x_plus: comb(&xa, &xb, 1.0),
        p_plus: comb(&pa, &pb, 1.0),
        x_minus: comb(&xa, &xb, -1.0),
        p_minus: comb(&pa, &pb, -1.0),
        xa,
        pa,
        xb,
        pb,
    })
}

/// Basis extended by one sector on each side of every sector, so that single
/// ladder operators act without truncation on states of the original sectors.
pub fn padded_basis(basis: &FockBasis) -> Result<Arc<FockBasis>> {
    let mut sectors: Vec<usize> = Vec::new();
    for &n in basis.sectors() {
        for s in [n.saturating_sub(1), n, n + 1] {
            if !sectors.contains(&s) {
                sectors.push(s);
            }
        }
    }
    Ok(Arc::new(FockBasis::new(basis.num_modes(), &sectors)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation_real, variance};

    fn close(a: f64, b: f64, eps: f64) -> bool {
        (a - b).abs() <= eps * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn one_particle_matrices() {
        let b = Arc::new(FockBasis::new(2, &[1]).unwrap());
        let s = SpinOperators::two_mode(b).unwrap();
        let z = s.sz.to_dense();
        assert_eq!(z[(0, 0)].re, -0.5);
        assert_eq!(z[(1, 1)].re, 0.5);
        let y = s.sy.to_dense();
        assert!((y[(0, 1)] - C64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn algebra_closes_on_four_modes() {
        let b = Arc::new(FockBasis::new(4, &[2]).unwrap());
        let s = SpinOperators::adjacent_pairs(b).unwrap();
        assert!(s.algebra_defect() < 1e-12);
    }

    #[test]
    fn casimir_on_three_bosons() {
        let b = Arc::new(FockBasis::new(2, &[3]).unwrap());
        let s = SpinOperators::two_mode(b.clone()).unwrap();
        let target = Operator::identity(b).scale(C64::new(1.5 * 2.5, 0.0));
        assert!(s.casimir().max_abs_diff(&target) < 1e-12);
    }

    #[test]
    fn wells_commute() {
        let b = Arc::new(FockBasis::truncated(4, 3).unwrap());
        let (w1, w2, _) = SpinOperators::local_wells(b.clone()).unwrap();
        assert!(w1.sx.commutator(&w2.sy).max_abs() < 1e-12);
        let st = QuantumState::fock(b, &[1, 0, 0, 1]).unwrap();
        assert_eq!(expectation_real(&w1.sz, &st).unwrap(), -0.5);
    }

    #[test]
    fn unpaired_mode_rejected() {
        let b = Arc::new(FockBasis::new(3, &[1]).unwrap());
        assert!(SpinOperators::paired(b, &[(0, 1)]).is_err());
    }

    #[test]
    fn euler_identity_and_round_trip() {
        let m = EulerAngles::identity().rotation_matrix();
        assert!((m - Matrix3::identity()).amax() < 1e-15);
        for &(a, b, g) in &[(0.3, 1.1, -2.0), (-3.0, 0.2, 3.0), (1.0, 0.0, 0.0), (0.5, PI, 0.0)] {
            let e = EulerAngles::new(a, b, g);
            let back = EulerAngles::from_matrix(&e.rotation_matrix());
            assert!((back.rotation_matrix() - e.rotation_matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn rotation_matrix_matches_conjugated_spins() {
        let b = Arc::new(FockBasis::new(2, &[1]).unwrap());
        let s = SpinOperators::two_mode(b.clone()).unwrap();
        let e = EulerAngles::new(0.7, -1.3, 2.1);
        let u = rotation_unitary(e, &b).unwrap();
        let m = e.rotation_matrix();
        for xi in 0..3 {
            let j = &u * s.component(xi).to_dense() * u.adjoint();
            for mu in 0..3 {
                let el = (j.clone() * s.component(mu).to_dense()).trace() * 2.0;
                assert!((el.re - m[(xi, mu)]).abs() < 1e-12, "{xi}{mu}");
            }
        }
    }

    #[test]
    fn identity_mode_rotation() {
        let b = Arc::new(FockBasis::truncated(2, 3).unwrap());
        let r = rotate_modes(EulerAngles::identity(), b.clone()).unwrap();
        let a = Operator::ladder(b.clone(), Ladder::Lower(0)).unwrap();
        assert!(r.c.max_abs_diff(&a) < 1e-15);
    }

    #[test]
    fn rotated_modes_are_conjugated_ladders() {
        let b = Arc::new(FockBasis::truncated(2, 4).unwrap());
        let e = EulerAngles::new(-0.4, 2.2, 1.3);
        let u = rotation_unitary(e, &b).unwrap();
        let r = rotate_modes(e, b.clone()).unwrap();
        let a = Operator::ladder(b.clone(), Ladder::Lower(0)).unwrap().to_dense();
        let bb = Operator::ladder(b, Ladder::Lower(1)).unwrap().to_dense();
        let c = &u * &a * u.adjoint();
        let d = &u * &bb * u.adjoint();
        assert!((c - r.c.to_dense()).camax() < 1e-12);
        assert!((d - r.d.to_dense()).camax() < 1e-12);
    }

    #[test]
    fn inplane_full_turn() {
        let b = Arc::new(FockBasis::new(2, &[3]).unwrap());
        let s = SpinOperators::two_mode(b).unwrap();
        let p = s.inplane(PI / 2.0);
        assert!(p.x_sharp.max_abs_diff(&s.sx) < 1e-15);
        let p0 = s.inplane(0.0);
        assert!(p0.perp1.max_abs_diff(&s.sx) < 1e-15);
        let comm = p.x_sharp.commutator(&p.y_sharp);
        assert!(comm.max_abs_diff(&s.sz.scale(I)) < 1e-12);
    }

    #[test]
    fn quadrature_commutators() {
        let b = Arc::new(FockBasis::truncated(2, 6).unwrap());
        let q = quadrature_set(0.4, b.clone()).unwrap();
        let interior = |o: &[u32]| o[0] + o[1] < 6;
        let id = Operator::identity(b.clone()).scale(I).restrict_to(interior);
        assert!(q.xa.commutator(&q.pa).restrict_to(interior).max_abs_diff(&id) < 1e-12);
        assert!(q.x_plus.commutator(&q.p_plus).restrict_to(interior).max_abs_diff(&id) < 1e-12);
        let x0 = quadrature_set(0.0, b.clone()).unwrap().xa;
        let pos = Operator::from_terms(
            b,
            &[
                (C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0), vec![Ladder::Lower(0)]),
                (C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0), vec![Ladder::Raise(0)]),
            ],
            true,
        );
        assert!(x0.max_abs_diff(&pos) < 1e-15);
    }

    #[test]
    fn fock_variance_zero() {
        let b = Arc::new(FockBasis::new(2, &[5]).unwrap());
        let s = SpinOperators::two_mode(b.clone()).unwrap();
        let st = QuantumState::fock(b, &[3, 2]).unwrap();
        assert_eq!(variance(&s.sz, &st).unwrap(), 0.0);
        let f = evaluate_frame(&s, &st).unwrap();
        assert!(close(f.casimir, 2.5 * 3.5, 1e-12));
    }
}
