//! Entanglement tests with explicit left and right sides, plus the audits of
//! inequalities that every state satisfies.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Matrix2, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fock::{
    expect_product, expectation, expectation_real, variance, FockBasis, Ladder, Operator, QuantumState, I, ONE,
};
use crate::spin::{evaluate_frame, padded_basis, principal_frame, quadrature_set, SpinFrame, SpinOperators};
use crate::states::Structure;
use crate::tol::Tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Entangled,
    NotDetected,
    Inapplicable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Entangled => "entangled",
            Verdict::NotDetected => "not_detected",
            Verdict::Inapplicable => "inapplicable",
        }
    }
}

/// Outcome of one test. `margin` is positive exactly when the firing
/// inequality holds; the test fires only when it also clears the tolerance.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WitnessReport {
    pub test_id: String,
    /// The inequality that certifies entanglement, written out.
    #[serde(rename = "paper_eq")]
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub frame: String,
    pub params: BTreeMap<String, Value>,
}

impl WitnessReport {
    fn new(test_id: &str, inequality: &str, frame: &str) -> Self {
        WitnessReport {
            test_id: test_id.into(),
            inequality: inequality.into(),
            lhs: 0.0,
            rhs: 0.0,
            margin: 0.0,
            verdict: Verdict::Inapplicable,
            tolerance: 0.0,
            frame: frame.into(),
            params: BTreeMap::new(),
        }
    }

    /// Fires when `lhs < rhs` by more than `tol · max(|lhs|, |rhs|, 1)`.
    fn less(mut self, lhs: f64, rhs: f64, tol: f64) -> Self {
        self.set(lhs, rhs, rhs - lhs, tol);
        self
    }

    /// Fires when `lhs > rhs` by more than `tol · max(|lhs|, |rhs|, 1)`.
    fn greater(mut self, lhs: f64, rhs: f64, tol: f64) -> Self {
        self.set(lhs, rhs, lhs - rhs, tol);
        self
    }

    fn set(&mut self, lhs: f64, rhs: f64, margin: f64, tol: f64) {
        self.lhs = lhs;
        self.rhs = rhs;
        self.margin = margin;
        self.tolerance = tol;
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        self.verdict = if margin > tol * scale { Verdict::Entangled } else { Verdict::NotDetected };
    }

    fn inapplicable(mut self, reason: &str) -> Self {
        self.verdict = Verdict::Inapplicable;
        self.params.insert("reason".into(), json!(reason));
        self
    }

    fn param(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.params.insert(key.into(), v.into());
        self
    }

    /// Audits never fire.
    fn audit(mut self) -> Self {
        if self.verdict == Verdict::Entangled {
            self.verdict = Verdict::NotDetected;
        }
        self
    }

    pub fn fired(&self) -> bool {
        self.verdict == Verdict::Entangled
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn axis_names(frame: &str) -> [&'static str; 3] {
    if frame == "principal" {
        ["J_x", "J_y", "J_z"]
    } else {
        ["S_x", "S_y", "S_z"]
    }
}

/// `⟨ΔS_α²⟩ < ½|⟨S_γ⟩|` for all six ordered pairs of distinct components.
pub fn spin_squeezing_tests(frame: &SpinFrame, frame_name: &str, tol: f64) -> Vec<WitnessReport> {
    let names = axis_names(frame_name);
    let mut out = Vec::with_capacity(6);
    for a in 0..3 {
        for g in 0..3 {
            if a == g {
                continue;
            }
            let ineq = format!("Var({}) < |<{}>|/2", names[a], names[g]);
            out.push(
                WitnessReport::new("spin_squeezing", &ineq, frame_name)
                    .less(frame.variance(a), 0.5 * frame.bloch[g].abs(), tol)
                    .param("component", AXES[a])
                    .param("reference", AXES[g]),
            );
        }
    }
    out
}

/// Smallest variance of an in-plane component `cos φ S_x + sin φ S_y` against `½|⟨S_z⟩|`.
pub fn inplane_squeezing_test(frame: &SpinFrame, frame_name: &str, tol: f64) -> WitnessReport {
    let block = Matrix2::new(frame.cov[0][0], frame.cov[0][1], frame.cov[1][0], frame.cov[1][1]);
    let eig = SymmetricEigen::new(block);
    let (k, min) =
        if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, eig.eigenvalues[0]) } else { (1, eig.eigenvalues[1]) };
    let v = eig.eigenvectors.column(k);
    let phi = v[1].atan2(v[0]);
    let names = axis_names(frame_name);
    let ineq = format!("min_phi Var(cos(phi) {} + sin(phi) {}) < |<{}>|/2", names[0], names[1], names[2]);
    WitnessReport::new("inplane_squeezing", &ineq, frame_name)
        .less(min.max(0.0), 0.5 * frame.z().abs(), tol)
        .param("phi", phi)
}

/// Either in-plane mean non-zero.
pub fn bloch_vector_test(frame: &SpinFrame, frame_name: &str, tol: f64) -> WitnessReport {
    let names = axis_names(frame_name);
    let lhs = frame.x().abs().max(frame.y().abs());
    WitnessReport::new("bloch_vector", &format!("max(|<{}>|, |<{}>|) > 0", names[0], names[1]), frame_name)
        .greater(lhs, 0.0, tol)
        .param("mean_x", frame.x())
        .param("mean_y", frame.y())
}

/// `⟨ΔS_x²⟩ + ⟨ΔS_y²⟩ < ½⟨N̂⟩`.
pub fn hillery_test(frame: &SpinFrame, frame_name: &str, tol: f64) -> WitnessReport {
    let names = axis_names(frame_name);
    WitnessReport::new("hillery", &format!("Var({}) + Var({}) < <N>/2", names[0], names[1]), frame_name)
        .less(frame.variance(0) + frame.variance(1), 0.5 * frame.n_mean, tol)
        .param("N_mean", frame.n_mean)
}

/// `⟨ΔS_α²⟩ + ⟨ΔS_β²⟩ ≥ |⟨S_γ⟩|` holds for every state; a violation is an engine error.
pub fn impossible_sum_audit(frame: &SpinFrame, frame_name: &str) -> Result<Vec<WitnessReport>> {
    let names = axis_names(frame_name);
    let scale = frame.scale();
    let mut out = Vec::new();
    for (a, b, g) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let lhs = frame.variance(a) + frame.variance(b);
        let rhs = frame.bloch[g].abs();
        if lhs < rhs - 1e-9 * scale {
            return Err(Error::InvalidState(format!(
                "variance sum {lhs} below |<{}>| = {rhs}: inconsistent frame",
                names[g]
            )));
        }
        let ineq = format!("Var({}) + Var({}) < |<{}>|", names[a], names[b], names[g]);
        out.push(
            WitnessReport::new("impossible_sum", &ineq, frame_name)
                .less(lhs, rhs, 1e-9)
                .param("reference", AXES[g])
                .audit(),
        );
    }
    Ok(out)
}

/// `ξ² = N̄⟨ΔS_z²⟩/(⟨S_x⟩² + ⟨S_y⟩²) < 1`, with the perpendicular axis given by
/// `axis` (z in the original frame, y in the principal frame).
pub fn sorensen_test(frame: &SpinFrame, frame_name: &str, axis: usize, tol: f64) -> WitnessReport {
    let names = axis_names(frame_name);
    let others: Vec<usize> = (0..3).filter(|&i| i != axis).collect();
    let perp2: f64 = others.iter().map(|&i| frame.bloch[i].powi(2)).sum();
    let n = frame.n_mean;
    let bloch_len = frame.bloch.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ratio = if n > 0.0 { 2.0 * bloch_len / n } else { 0.0 };
    let ineq = format!("N Var({}) / (<{}>^2 + <{}>^2) < 1", names[axis], names[others[0]], names[others[1]]);
    let report =
        WitnessReport::new("sorensen", &ineq, frame_name).param("axis", AXES[axis]).param("bloch_ratio", ratio);
    if perp2.sqrt() <= 1e-9 * n.max(1.0) {
        return report.inapplicable("mean spin perpendicular to the tested axis vanishes");
    }
    let xi2 = n * frame.variance(axis) / perp2;
    report.less(xi2, 1.0, tol).param("xi2", xi2)
}

/// Fixed-`N` tests on an orthogonal triad: `Σ⟨ΔJ²⟩ < N/2` and
/// `(N−1)(⟨ΔJ₁²⟩ + ⟨ΔJ₂²⟩) − ⟨J₃²⟩ < N(N−2)/4`.
pub fn benatti_tests(frame: &SpinFrame, frame_name: &str, n: usize, tol: f64) -> [WitnessReport; 2] {
    let names = axis_names(frame_name);
    let nf = n as f64;
    let sum: f64 = (0..3).map(|i| frame.variance(i)).sum();
    let t1 = WitnessReport::new(
        "benatti_variance_sum",
        &format!("Var({}) + Var({}) + Var({}) < N/2", names[0], names[1], names[2]),
        frame_name,
    )
    .less(sum, 0.5 * nf, tol)
    .param("N", n);
    let j3sq = frame.variance(2) + frame.z().powi(2);
    let lhs = (nf - 1.0) * (frame.variance(0) + frame.variance(1)) - j3sq;
    let t2 = WitnessReport::new(
        "benatti_weighted",
        &format!("(N-1)(Var({}) + Var({})) - <{}^2> < N(N-2)/4", names[0], names[1], names[2]),
        frame_name,
    )
    .less(lhs, nf * (nf - 2.0) / 4.0, tol)
    .param("N", n);
    [t1, t2]
}

/// Total boson number when the state lives in a single sector.
pub fn fixed_total(state: &QuantumState) -> Option<usize> {
    let pops = state.populations();
    let mut by_sector: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, p) in pops.iter().enumerate() {
        *by_sector.entry(state.basis().total(i)).or_default() += p;
    }
    let occupied: Vec<usize> = by_sector.iter().filter(|(_, &p)| p > 1e-12).map(|(&n, _)| n).collect();
    if occupied.len() == 1 {
        Some(occupied[0])
    } else {
        None
    }
}

/// Large total-number spread with small number-difference spread. The firing
/// ratio is opt-in: separable mixtures of `|n⟩|n⟩` over `n` satisfy it.
pub fn number_diff_sum_test(
    state: &QuantumState,
    ops: &SpinOperators,
    ratio: Option<f64>,
    tol: f64,
) -> Result<WitnessReport> {
    let var_sz = variance(&ops.sz, state)?;
    let var_n = variance(&ops.n, state)?;
    let report = WitnessReport::new("number_diff_sum", "Var(S_z) < ratio * Var(N)/4", "original")
        .param("var_sz", var_sz)
        .param("var_n", var_n);
    Ok(match ratio {
        None => report.inapplicable("no separable bound links these variances; enable with an explicit ratio"),
        Some(r) => report.less(var_sz, 0.25 * r * var_n, tol).param("ratio", r),
    })
}

fn correlation_ops(basis: &Arc<FockBasis>, a: usize, b: usize, m: u32, n: u32) -> (Operator, Operator) {
    let mut word = vec![Ladder::Lower(a); m as usize];
    word.extend(std::iter::repeat_n(Ladder::Raise(b), n as usize));
    let corr = Operator::from_terms(basis.clone(), &[(ONE, word)], false);
    let mut norm_word = vec![Ladder::Raise(a); m as usize];
    norm_word.extend(std::iter::repeat_n(Ladder::Lower(a), m as usize));
    norm_word.extend(std::iter::repeat_n(Ladder::Raise(b), n as usize));
    norm_word.extend(std::iter::repeat_n(Ladder::Lower(b), n as usize));
    let bound = Operator::from_terms(basis.clone(), &[(ONE, norm_word)], true);
    (corr, bound)
}

/// Weak test `|⟨a^m (b†)^n⟩|² > 0` and strong test
/// `|⟨a^m (b†)^n⟩|² > ⟨(a†)^m a^m (b†)^n b^n⟩` on modes `(a, b)`.
pub fn correlation_tests(
    state: &QuantumState,
    pair: (usize, usize),
    m: u32,
    n: u32,
    tol: f64,
) -> Result<[WitnessReport; 2]> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("correlation orders must be at least 1".into()));
    }
    let basis = state.basis();
    let (corr, bound) = correlation_ops(basis, pair.0, pair.1, m, n);
    let g = expectation(&corr, state)?;
    let lhs = g.norm_sqr();
    let rhs = expectation_real(&bound, state)?;
    let frame = format!("modes {},{}", pair.0, pair.1);
    let mut params: BTreeMap<String, Value> = BTreeMap::new();
    params.insert("m".into(), json!(m));
    params.insert("n".into(), json!(n));
    params.insert("correlation_re".into(), json!(g.re));
    params.insert("correlation_im".into(), json!(g.im));
    if m != n {
        params.insert("note".into(), json!("vanishes identically on globally number-conserving states"));
    }
    if corr.is_truncated() {
        params.insert("truncated".into(), json!(true));
    }
    if m == n {
        // (b†a)^m = a^m (b†)^m, so the correlation equals ⟨(S_x + iS_y)^m⟩ on this pair.
        let spin = SpinOperators::over_pairs(basis.clone(), &[pair]);
        let raise = Operator::lin_comb(&[(ONE, &spin.sx), (I, &spin.sy)]);
        let chain: Vec<&Operator> = std::iter::repeat_n(&raise, m as usize).collect();
        let via_spin = expect_product(&chain, state)?;
        let resid = (via_spin - g).norm();
        if resid > 1e-9 * g.norm().max(1.0) {
            return Err(Error::InvalidState(format!("spin-operator form of the correlation differs by {resid:e}")));
        }
        params.insert("spin_form_residual".into(), json!(resid));
    }
    let mut weak =
        WitnessReport::new("weak_correlation", &format!("|<a^{m} (b^+)^{n}>|^2 > 0"), &frame).greater(lhs, 0.0, tol);
    let mut strong = WitnessReport::new(
        "strong_correlation",
        &format!("|<a^{m} (b^+)^{n}>|^2 > <(a^+)^{m} a^{m} (b^+)^{n} b^{n}>"),
        &frame,
    )
    .greater(lhs, rhs, tol);
    weak.params = params.clone();
    strong.params = params;
    Ok([weak, strong])
}

/// Quadrature correlation coefficients, two-mode quadrature squeezing and the
/// sum-difference identity audit, all at angle `θ`.
pub fn quadrature_tests(state: &QuantumState, theta: f64, tol: f64) -> Result<Vec<WitnessReport>> {
    if state.basis().num_modes() != 2 {
        return Err(Error::InvalidBasis("quadrature tests need a two-mode state".into()));
    }
    let padded = padded_basis(state.basis())?;
    let st = state.rebased(padded.clone())?;
    let spin = SpinOperators::two_mode(padded.clone())?;
    let n_mean = expectation_real(&spin.n, &st)?;
    let sx = expectation_real(&spin.sx, &st)?;
    let q = quadrature_set(theta, padded.clone())?;
    let mut out = Vec::new();

    for (label, phi) in [("in_phase", theta), ("quadrature", theta + std::f64::consts::FRAC_PI_2)] {
        let qb = crate::spin::quadrature(padded.clone(), 1, phi);
        let xab = expect_product(&[&q.xa, &qb], &st)?;
        let xa2 = expect_product(&[&q.xa, &q.xa], &st)?.re;
        let xb2 = expect_product(&[&qb, &qb], &st)?.re;
        let c = xab.norm_sqr() / (xa2 * xb2);
        out.push(
            WitnessReport::new("quadrature_correlation", "|<X_a^theta X_b^phi>|^2 / (<X_a^2><X_b^2>) > 0", "original")
                .greater(c, 0.0, tol)
                .param("theta", theta)
                .param("phi", phi)
                .param("variant", label),
        );
    }

    let names = ["X_theta(+)", "P_theta(+)", "X_theta(-)", "P_theta(-)"];
    let ops = [&q.x_plus, &q.p_plus, &q.x_minus, &q.p_minus];
    for (name, op) in names.iter().zip(ops) {
        let v = variance(op, &st)?;
        let sign = if name.ends_with("(+)") { 1.0 } else { -1.0 };
        out.push(
            WitnessReport::new("two_mode_quadrature_squeezing", &format!("Var({name}) < 1/2"), "original")
                .less(v, 0.5, tol)
                .param("operator", *name)
                .param("theta", theta)
                .param("spin_form", 0.5 * (n_mean + sign * 2.0 * sx)),
        );
    }

    let x0 = |mode| crate::spin::quadrature(padded.clone(), mode, 0.0);
    let p0 = |mode| crate::spin::quadrature(padded.clone(), mode, std::f64::consts::FRAC_PI_2);
    for (label, s1, s2) in [("x_sum_p_diff", 1.0, -1.0), ("x_diff_p_sum", -1.0, 1.0)] {
        let xs = Operator::lin_comb(&[(ONE, &x0(0)), (C64::new(s1, 0.0), &x0(1))]).with_hermitian_hint(true);
        let ps = Operator::lin_comb(&[(ONE, &p0(0)), (C64::new(s2, 0.0), &p0(1))]).with_hermitian_hint(true);
        let lhs = variance(&xs, &st)? + variance(&ps, &st)?;
        let rhs = 2.0 + 2.0 * n_mean;
        out.push(
            WitnessReport::new("quadrature_sum_audit", "Var(x_A +- x_B) + Var(p_A -+ p_B) < 2 + 2<N>", "original")
                .less(lhs, rhs, tol)
                .param("variant", label)
                .param("residual", lhs - rhs)
                .audit(),
        );
    }
    Ok(out)
}

/// Tests between the wells `(a₁, b₁)` and `(a₂, b₂)` of a four-mode state.
pub fn four_mode_tests(state: &QuantumState, tol: f64) -> Result<Vec<WitnessReport>> {
    let (w1, w2, _) = SpinOperators::local_wells(state.basis().clone())?;
    let plus = |w: &SpinOperators| Operator::lin_comb(&[(ONE, &w.sx), (I, &w.sy)]);
    let minus = |w: &SpinOperators| Operator::lin_comb(&[(ONE, &w.sx), (-I, &w.sy)]);
    let (p1, m1, p2, m2) = (plus(&w1), minus(&w1), plus(&w2), minus(&w2));
    let g = expect_product(&[&p1, &m2], state)?;
    let rhs = expect_product(&[&p1, &m1, &p2, &m2], state)?.re;
    let mut out = vec![WitnessReport::new("he_spin", "|<S+^1 S-^2>|^2 > <S+^1 S-^1 S+^2 S-^2>", "wells").greater(
        g.norm_sqr(),
        rhs,
        tol,
    )];

    let comps = |w: &SpinOperators| [w.sx.clone(), w.sy.clone(), w.sz.clone()];
    let (c1, c2) = (comps(&w1), comps(&w2));
    for (o, l, t) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let theta = expectation_real(&c1[t], state)?.abs() + expectation_real(&c2[t], state)?.abs();
        for s1 in [1.0, -1.0] {
            for s2 in [1.0, -1.0] {
                let omega = Operator::lin_comb(&[(ONE, &c1[o]), (C64::new(s1, 0.0), &c2[o])]).with_hermitian_hint(true);
                let lambda =
                    Operator::lin_comb(&[(ONE, &c1[l]), (C64::new(s2, 0.0), &c2[l])]).with_hermitian_hint(true);
                let lhs = variance(&omega, state)? + variance(&lambda, state)?;
                let sign = |s: f64| if s > 0.0 { "+" } else { "-" };
                let ineq = format!(
                    "Var(S_{0}^1 {1} S_{0}^2) + Var(S_{2}^1 {3} S_{2}^2) < |<S_{4}^1>| + |<S_{4}^2>|",
                    AXES[o],
                    sign(s1),
                    AXES[l],
                    sign(s2),
                    AXES[t]
                );
                out.push(
                    WitnessReport::new("raymer", &ineq, "wells")
                        .less(lhs, theta, tol)
                        .param("components", format!("{}{}{}", AXES[o], AXES[l], AXES[t]))
                        .param("signs", format!("{}{}", sign(s1), sign(s2))),
                );
            }
        }
    }
    Ok(out)
}

/// Bounds on `⟨ΔS_x²⟩` at fixed `|⟨S_z⟩|` from the uncertainty relation with
/// `⟨ΔS_x²⟩⟨ΔS_y²⟩ = ξ⟨S_z⟩²/4` and `⟨S_x²⟩ + ⟨S_y²⟩ + ⟨S_z⟩² ≤ J(J+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HupRegion {
    Allowed { lower: f64, upper: f64 },
    Excluded,
}

pub fn hup_region(j: f64, xi: f64, sz_abs: f64) -> Result<HupRegion> {
    if !(j > 0.0) || !(xi >= 1.0) || !(sz_abs >= 0.0) || sz_abs > j {
        return Err(Error::InvalidParameter(format!(
            "need J > 0, xi >= 1, 0 <= |Sz| <= J; got J={j}, xi={xi}, |Sz|={sz_abs}"
        )));
    }
    let k = j * (j + 1.0) - sz_abs * sz_abs;
    let c = xi * sz_abs * sz_abs;
    let disc = k * k - c;
    if disc < 0.0 {
        return Ok(HupRegion::Excluded);
    }
    let root = disc.sqrt();
    let upper = 0.5 * (k + root);
    // Product of roots is c/4; avoids cancellation in k − √disc.
    let lower = if upper > 0.0 { 0.25 * c / upper } else { 0.0 };
    Ok(HupRegion::Allowed { lower, upper })
}

/// Which tests run and with what parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub structure: Structure,
    pub tolerances: Tolerances,
    /// `(m, n)` exponents for the correlation tests.
    pub correlation_orders: Vec<(u32, u32)>,
    pub quadrature_theta: f64,
    /// Firing ratio for the number-difference test; `None` leaves it inapplicable.
    pub number_diff_ratio: Option<f64>,
}

impl BatteryConfig {
    pub fn new(structure: Structure) -> Self {
        BatteryConfig {
            structure,
            tolerances: Tolerances::default(),
            correlation_orders: vec![(1, 1), (2, 2)],
            quadrature_theta: 0.0,
            number_diff_ratio: None,
        }
    }

    /// Two modes are one pair; more modes default to every mode separate.
    pub fn for_state(state: &QuantumState) -> Result<Self> {
        let m = state.basis().num_modes();
        let structure = match m {
            2 => Structure::TwoMode,
            _ if m.is_multiple_of(2) => Structure::Case2 { pairs: m / 2 },
            _ => return Err(Error::InvalidParameter("odd number of modes".into())),
        };
        Ok(Self::new(structure))
    }
}

/// State properties reported alongside the verdicts.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateProperties {
    pub frame: SpinFrame,
    pub principal: crate::spin::PrincipalFrame,
    /// `2|⟨S⟩|/⟨N̂⟩`.
    pub bloch_ratio: f64,
    pub planar: PlanarSqueezing,
}

/// In-plane fluctuation `⟨ΔS_x²⟩ + ⟨ΔS_y²⟩` against out-of-plane `⟨ΔS_z²⟩`,
/// both compared with half the in-plane mean spin.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PlanarSqueezing {
    pub para: f64,
    pub perp: f64,
    pub half_mean: f64,
    pub squeezed: bool,
}

pub fn planar_squeezing(frame: &SpinFrame) -> PlanarSqueezing {
    let para = frame.variance(0) + frame.variance(1);
    let perp = frame.variance(2);
    let half_mean = 0.5 * (frame.x().powi(2) + frame.y().powi(2)).sqrt();
    PlanarSqueezing { para, perp, half_mean, squeezed: para < half_mean && perp > half_mean }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatteryResult {
    pub structure: Structure,
    pub reports: Vec<WitnessReport>,
    pub properties: StateProperties,
}

impl BatteryResult {
    /// Per test id: entangled if any variant fired, else not detected if any
    /// variant ran, else inapplicable.
    pub fn summary(&self) -> BTreeMap<String, Verdict> {
        summarize(&self.reports)
    }

    pub fn entangled_count(&self) -> usize {
        self.reports.iter().filter(|r| r.fired()).count()
    }
}

pub fn summarize(reports: &[WitnessReport]) -> BTreeMap<String, Verdict> {
    let mut out: BTreeMap<String, Verdict> = BTreeMap::new();
    for r in reports {
        out.entry(r.test_id.clone()).and_modify(|v| *v = (*v).min(r.verdict)).or_insert(r.verdict);
    }
    out
}

fn spin_operators_for(state: &QuantumState, structure: Structure) -> Result<SpinOperators> {
    if state.basis().num_modes() != structure.num_modes() {
        return Err(Error::InvalidParameter(format!(
            "structure {} expects {} modes, state has {}",
            structure.name(),
            structure.num_modes(),
            state.basis().num_modes()
        )));
    }
    SpinOperators::adjacent_pairs(state.basis().clone())
}

/// Runs every test that applies to the sub-system structure, in the original
/// and principal frames. Report order is fixed.
pub fn run_battery(state: &QuantumState, config: &BatteryConfig) -> Result<BatteryResult> {
    let structure = config.structure;
    let tol = config.tolerances.verdict;
    let ops = spin_operators_for(state, structure)?;
    let frame = evaluate_frame(&ops, state)?;
    let principal = principal_frame(&frame);
    let frames = [("original", &frame), ("principal", &principal.frame)];
    let case3 = matches!(structure, Structure::Case3 { .. });
    let one_boson = matches!(structure, Structure::Case3 { one_boson: true, .. });
    let na = |id: &str, ineq: &str, why: &str| WitnessReport::new(id, ineq, "original").inapplicable(why);
    const CASE3: &str = "mode pairs are the sub-systems";

    let mut reports = Vec::new();
    for (name, f) in frames {
        if case3 {
            reports.push(na("spin_squeezing", "Var(S_a) < |<S_c>|/2", CASE3));
            reports.push(na("inplane_squeezing", "Var(S_perp) < |<S_z>|/2", CASE3));
            reports.push(na("bloch_vector", "max(|<S_x>|, |<S_y>|) > 0", CASE3));
            reports.push(na("hillery", "Var(S_x) + Var(S_y) < <N>/2", CASE3));
        } else {
            reports.extend(spin_squeezing_tests(f, name, tol));
            reports.push(inplane_squeezing_test(f, name, tol));
            reports.push(bloch_vector_test(f, name, tol));
            reports.push(hillery_test(f, name, tol));
        }
        let axis = if name == "principal" { 1 } else { 2 };
        if case3 && !one_boson {
            reports.push(na(
                "sorensen",
                "N Var(S_z) / (<S_x>^2 + <S_y>^2) < 1",
                "needs exactly one boson per mode pair",
            ));
        } else {
            reports.push(sorensen_test(f, name, axis, tol));
        }
        match (structure, fixed_total(state)) {
            (Structure::TwoMode, Some(n)) => reports.extend(benatti_tests(f, name, n, tol)),
            (Structure::TwoMode, None) => {
                reports.push(na("benatti_variance_sum", "sum Var(J) < N/2", "state is not at fixed N"));
                reports.push(na(
                    "benatti_weighted",
                    "(N-1)(Var J1 + Var J2) - <J3^2> < N(N-2)/4",
                    "state is not at fixed N",
                ));
            }
            _ => {
                reports.push(na("benatti_variance_sum", "sum Var(J) < N/2", "two-mode systems only"));
                reports.push(na(
                    "benatti_weighted",
                    "(N-1)(Var J1 + Var J2) - <J3^2> < N(N-2)/4",
                    "two-mode systems only",
                ));
            }
        }
    }
    reports.extend(impossible_sum_audit(&frame, "original")?);

    if case3 {
        reports.push(na("weak_correlation", "|<a^m (b^+)^n>|^2 > 0", CASE3));
        reports.push(na("strong_correlation", "|<a^m (b^+)^n>|^2 > <(a^+)^m a^m (b^+)^n b^n>", CASE3));
    } else {
        for &(a, b) in ops.pairs() {
            for &(m, n) in &config.correlation_orders {
                reports.extend(correlation_tests(state, (a, b), m, n, tol)?);
            }
        }
    }

    let number_ops = SpinOperators::adjacent_pairs(state.basis().clone())?;
    if matches!(structure, Structure::TwoMode) {
        reports.push(number_diff_sum_test(state, &number_ops, config.number_diff_ratio, tol)?);
        reports.extend(quadrature_tests(state, config.quadrature_theta, tol)?);
    } else {
        reports.push(na("number_diff_sum", "Var(S_z) < ratio * Var(N)/4", "two-mode systems only"));
        reports.push(na("quadrature_correlation", "|<X_a X_b>|^2 / (<X_a^2><X_b^2>) > 0", "two-mode systems only"));
        reports.push(na("two_mode_quadrature_squeezing", "Var(X(+-)) < 1/2", "two-mode systems only"));
    }

    match structure {
        Structure::Case2 { pairs: 2 } | Structure::Case3 { pairs: 2, .. } => {
            reports.extend(four_mode_tests(state, tol)?)
        }
        _ => {
            let why = "needs two wells that are separate sub-systems";
            reports.push(na("he_spin", "|<S+^1 S-^2>|^2 > <S+^1 S-^1 S+^2 S-^2>", why));
            reports.push(na("raymer", "Var(O_A +- O_B) + Var(L_A +- L_B) < |<T_A>| + |<T_B>|", why));
        }
    }

    let bloch_len = frame.bloch_vec().norm();
    let bloch_ratio = if frame.n_mean > 0.0 { 2.0 * bloch_len / frame.n_mean } else { 0.0 };
    let planar = planar_squeezing(&frame);
    Ok(BatteryResult { structure, reports, properties: StateProperties { frame, principal, bloch_ratio, planar } })
}
