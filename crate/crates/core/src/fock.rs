//! Bosonic Fock spaces: bases, ladder-operator monomials, states and expectation values.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tol;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Indexed enumeration of occupation-number tuples.
///
/// Tuples are ordered by total boson number (ascending) and, within a sector,
/// in descending lexicographic order, so `(2,[2])` yields `(2,0),(1,1),(0,2)`.
#[derive(Clone)]
pub struct FockBasis {
    num_modes: usize,
    sectors: Vec<usize>,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    complete: bool,
}

impl fmt::Debug for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockBasis")
            .field("num_modes", &self.num_modes)
            .field("sectors", &self.sectors)
            .field("dim", &self.states.len())
            .field("complete", &self.complete)
            .finish()
    }
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.num_modes == other.num_modes && self.states == other.states
    }
}

/// All tuples of `m` non-negative entries summing to `n`, descending lexicographic.
fn compositions(m: usize, n: usize) -> Vec<Vec<u32>> {
    fn rec(m: usize, n: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if m == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=n).rev() {
            prefix.push(first);
            rec(m - 1, n - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, n as u32, &mut Vec::with_capacity(m), &mut out);
    out
}

fn descending_lex(a: &[u32], b: &[u32]) -> std::cmp::Ordering {
    b.cmp(a)
}

impl FockBasis {
    /// Union of complete fixed-N sectors.
    pub fn new(num_modes: usize, sectors: &[usize]) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::InvalidBasis("num_modes must be at least 1".into()));
        }
        if sectors.is_empty() {
            return Err(Error::InvalidBasis("sector list is empty".into()));
        }
        let mut sorted = sectors.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidBasis("sectors must be distinct".into()));
        }
        let mut states = Vec::new();
        for &n in &sorted {
            states.extend(compositions(num_modes, n));
        }
        Ok(Self::assemble(num_modes, sorted, states, true))
    }

    /// Two modes, fixed total `n`; index `i` holds `(n - i, i)`.
    pub fn two_mode(n: usize) -> Arc<Self> {
        Arc::new(Self::new(2, &[n]).expect("valid two-mode sector"))
    }

    /// All sectors `0..=n_max`.
    pub fn truncated(num_modes: usize, n_max: usize) -> Result<Self> {
        let sectors: Vec<usize> = (0..=n_max).collect();
        Self::new(num_modes, &sectors)
    }

    /// Arbitrary subset of occupation tuples, canonically ordered and deduplicated.
    pub fn from_occupations(num_modes: usize, occupations: Vec<Vec<u32>>) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::InvalidBasis("num_modes must be at least 1".into()));
        }
        if occupations.is_empty() {
            return Err(Error::InvalidBasis("no occupation tuples".into()));
        }
        if let Some(bad) = occupations.iter().find(|o| o.len() != num_modes) {
            return Err(Error::InvalidBasis(format!("tuple {:?} does not have {} modes", bad, num_modes)));
        }
        let mut states = occupations;
        states.sort_by(|a, b| {
            let (na, nb) = (total(a), total(b));
            na.cmp(&nb).then_with(|| descending_lex(a, b))
        });
        states.dedup();
        let mut sectors: Vec<usize> = states.iter().map(|s| total(s)).collect();
        sectors.dedup();
        let complete = sectors.iter().all(|&n| {
            let expected = binomial(n + num_modes - 1, num_modes - 1);
            states.iter().filter(|s| total(s) == n).count() as u128 == expected
        });
        Ok(Self::assemble(num_modes, sectors, states, complete))
    }

    fn assemble(num_modes: usize, sectors: Vec<usize>, states: Vec<Vec<u32>>, complete: bool) -> Self {
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        FockBasis { num_modes, sectors, states, index, complete }
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }
    pub fn sectors(&self) -> &[usize] {
        &self.sectors
    }
    pub fn dim(&self) -> usize {
        self.states.len()
    }
    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }
    pub fn occupation(&self, i: usize) -> &[u32] {
        &self.states[i]
    }
    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }
    pub fn total(&self, i: usize) -> usize {
        total(&self.states[i])
    }
    /// Every listed sector contains all of its tuples.
    pub fn is_complete(&self) -> bool {
        self.complete
    }
    pub fn max_sector(&self) -> usize {
        *self.sectors.last().expect("non-empty basis")
    }
}

pub fn total(occ: &[u32]) -> usize {
    occ.iter().map(|&n| n as usize).sum()
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// One bosonic ladder operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ladder {
    Lower(usize),
    Raise(usize),
}

impl Ladder {
    pub fn mode(&self) -> usize {
        match *self {
            Ladder::Lower(m) | Ladder::Raise(m) => m,
        }
    }
    pub fn dagger(&self) -> Ladder {
        match *self {
            Ladder::Lower(m) => Ladder::Raise(m),
            Ladder::Raise(m) => Ladder::Lower(m),
        }
    }
}

/// Applies a word of ladder operations (written left to right, acting right to
/// left) to an occupation tuple. Returns the resulting tuple and its amplitude,
/// or `None` when a lowering operator annihilates the state.
pub fn apply_word(word: &[Ladder], occ: &[u32]) -> Option<(Vec<u32>, f64)> {
    let mut out = occ.to_vec();
    let mut amp2 = 1.0;
    for op in word.iter().rev() {
        match *op {
            Ladder::Lower(m) => {
                let n = out[m];
                if n == 0 {
                    return None;
                }
                amp2 *= n as f64;
                out[m] = n - 1;
            }
            Ladder::Raise(m) => {
                let n = out[m];
                amp2 *= n as f64 + 1.0;
                out[m] = n + 1;
            }
        }
    }
    Some((out, amp2.sqrt()))
}

/// A weighted product of ladder operations.
pub type Term = (C64, Vec<Ladder>);

/// Sparse operator on a [`FockBasis`], stored row-compressed.
///
/// Monomials are built directly from occupation tuples, so products written as
/// a single term never suffer intermediate truncation at the basis edge.
#[derive(Clone, Debug)]
pub struct Operator {
    basis: Arc<FockBasis>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian_hint: bool,
    truncated: bool,
}

impl Operator {
    pub fn from_triplets(basis: Arc<FockBasis>, mut triplets: Vec<(usize, usize, C64)>, hermitian_hint: bool) -> Self {
        let dim = basis.dim();
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut op = Operator { basis, row_ptr, cols, vals, hermitian_hint, truncated: false };
        op.prune();
        op
    }

    fn prune(&mut self) {
        if self.vals.iter().all(|v| *v != ZERO) {
            return;
        }
        let dim = self.dim();
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != ZERO {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    /// Σ coefficient · word, evaluated tuple by tuple.
    pub fn from_terms(basis: Arc<FockBasis>, terms: &[Term], hermitian_hint: bool) -> Self {
        let mut triplets = Vec::new();
        let mut truncated = false;
        for (col, occ) in basis.states().iter().enumerate() {
            for (coef, word) in terms {
                if let Some((target, amp)) = apply_word(word, occ) {
                    match basis.index_of(&target) {
                        Some(row) => triplets.push((row, col, coef * amp)),
                        None => truncated = true,
                    }
                }
            }
        }
        let mut op = Self::from_triplets(basis, triplets, hermitian_hint);
        op.truncated = truncated;
        op
    }

    /// Single lowering or raising operator. Matrix elements that would leave
    /// the basis are dropped and flagged through [`Operator::is_truncated`].
    pub fn ladder(basis: Arc<FockBasis>, op: Ladder) -> Result<Self> {
        if op.mode() >= basis.num_modes() {
            return Err(Error::InvalidParameter(format!(
                "mode {} out of range for {} modes",
                op.mode(),
                basis.num_modes()
            )));
        }
        Ok(Self::from_terms(basis, &[(ONE, vec![op])], false))
    }

    pub fn number(basis: Arc<FockBasis>, mode: usize) -> Self {
        let triplets = (0..basis.dim()).map(|i| (i, i, C64::new(basis.occupation(i)[mode] as f64, 0.0))).collect();
        Self::from_triplets(basis, triplets, true)
    }

    pub fn total_number(basis: Arc<FockBasis>) -> Self {
        let triplets = (0..basis.dim()).map(|i| (i, i, C64::new(basis.total(i) as f64, 0.0))).collect();
        Self::from_triplets(basis, triplets, true)
    }

    pub fn diagonal(basis: Arc<FockBasis>, f: impl Fn(&[u32]) -> C64, hermitian_hint: bool) -> Self {
        let triplets = (0..basis.dim()).map(|i| (i, i, f(basis.occupation(i)))).collect();
        Self::from_triplets(basis, triplets, hermitian_hint)
    }

    pub fn identity(basis: Arc<FockBasis>) -> Self {
        Self::diagonal(basis, |_| ONE, true)
    }

    pub fn zero(basis: Arc<FockBasis>) -> Self {
        Self::from_triplets(basis, Vec::new(), true)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }
    pub fn with_hermitian_hint(mut self, hint: bool) -> Self {
        self.hermitian_hint = hint;
        self
    }
    /// Whether some matrix elements fell outside the basis and were dropped.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|(cc, _)| *cc == c).map(|(_, v)| v).unwrap_or(ZERO)
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.dim());
        self.apply_slice(v.as_slice(), out.as_mut_slice());
        out
    }

    fn apply_slice(&self, v: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// `self · m` for a dense matrix.
    pub fn apply_mat(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let (rows, ncols) = m.shape();
        assert_eq!(rows, self.dim(), "dimension mismatch");
        let mut out = DMatrix::zeros(rows, ncols);
        for c in 0..ncols {
            let src = m.column(c);
            let mut dst = out.column_mut(c);
            self.apply_slice(src.as_slice(), dst.as_mut_slice());
        }
        out
    }

    /// `Tr(self · m)`.
    pub fn trace_with(&self, m: &DMatrix<C64>) -> C64 {
        let mut acc = ZERO;
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                acc += v * m[(c, r)];
            }
        }
        acc
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Operator {
        let triplets = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Operator::from_triplets(self.basis.clone(), triplets, self.hermitian_hint)
    }

    pub fn scale(&self, s: C64) -> Operator {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= s;
        }
        out.hermitian_hint = self.hermitian_hint && s.im == 0.0;
        out.prune();
        out
    }

    /// Σ cᵢ Aᵢ; the result keeps a Hermitian hint only when every coefficient is
    /// real and every operand is flagged Hermitian.
    pub fn lin_comb(terms: &[(C64, &Operator)]) -> Operator {
        let basis = terms[0].1.basis.clone();
        let mut triplets = Vec::new();
        let mut herm = true;
        let mut truncated = false;
        for (c, op) in terms {
            assert!(same_basis(&basis, &op.basis), "basis mismatch in linear combination");
            herm &= op.hermitian_hint && c.im == 0.0;
            truncated |= op.truncated;
            triplets.extend(op.triplets().map(|(r, cc, v)| (r, cc, c * v)));
        }
        let mut out = Operator::from_triplets(basis, triplets, herm);
        out.truncated = truncated;
        out
    }

    pub fn add(&self, other: &Operator) -> Operator {
        Operator::lin_comb(&[(ONE, self), (ONE, other)])
    }

    pub fn sub(&self, other: &Operator) -> Operator {
        Operator::lin_comb(&[(ONE, self), (-ONE, other)])
    }

    /// Sparse product `self · other`.
    pub fn mul(&self, other: &Operator) -> Operator {
        assert!(same_basis(&self.basis, &other.basis), "basis mismatch in product");
        let dim = self.dim();
        let mut acc = vec![ZERO; dim];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; dim];
        let mut triplets = Vec::new();
        for r in 0..dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                triplets.push((r, c, acc[c]));
                acc[c] = ZERO;
                mark[c] = false;
            }
            touched.clear();
        }
        let mut out = Operator::from_triplets(self.basis.clone(), triplets, false);
        out.truncated = self.truncated || other.truncated;
        out
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn anticommutator(&self, other: &Operator) -> Operator {
        self.mul(other).add(&other.mul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest |entry| of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// Restricts to rows and columns whose tuples satisfy `keep`.
    pub fn restrict_to(&self, keep: impl Fn(&[u32]) -> bool) -> Operator {
        let triplets = self
            .triplets()
            .filter(|(r, c, _)| keep(self.basis.occupation(*r)) && keep(self.basis.occupation(*c)))
            .collect();
        Operator::from_triplets(self.basis.clone(), triplets, self.hermitian_hint)
    }
}

pub(crate) fn same_basis(a: &Arc<FockBasis>, b: &Arc<FockBasis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Super-selection compliance tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SsrFlags {
    /// No coherences between different total boson numbers.
    pub global_compliant: bool,
    /// No coherences between different boson numbers of any sub-system.
    pub local_compliant: bool,
}

#[derive(Debug, Clone)]
pub enum StateData {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

/// Pure or mixed state over a [`FockBasis`].
#[derive(Debug, Clone)]
pub struct QuantumState {
    basis: Arc<FockBasis>,
    data: StateData,
    ssr: SsrFlags,
    discarded_mass: f64,
}

impl QuantumState {
    /// Pure state; the vector must already be normalized to 1e-12.
    pub fn pure(basis: Arc<FockBasis>, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::InvalidState(format!(
                "amplitude vector has length {}, basis has {}",
                amps.len(),
                basis.dim()
            )));
        }
        let norm = amps.norm_squared();
        if (norm - 1.0).abs() > tol::STRUCTURAL {
            return Err(Error::InvalidState(format!("norm² = {norm} deviates from 1")));
        }
        Ok(Self::from_parts(basis, StateData::Pure(amps)))
    }

    /// Normalizes and fixes the global phase so the first nonzero amplitude is real positive.
    pub fn pure_normalized(basis: Arc<FockBasis>, mut amps: DVector<C64>) -> Result<Self> {
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite amplitude vector".into()));
        }
        amps /= C64::new(norm, 0.0);
        if let Some(first) = amps.iter().find(|a| a.norm() > tol::STRUCTURAL).copied() {
            let phase = first.conj() / first.norm();
            amps *= phase;
        }
        Self::pure(basis, amps)
    }

    /// Density matrix with full validation (Hermitian, unit trace, PSD).
    pub fn mixed(basis: Arc<FockBasis>, rho: DMatrix<C64>) -> Result<Self> {
        let state = Self::mixed_unchecked_psd(basis, rho)?;
        let min = state.min_eigenvalue();
        if min < -tol::PSD {
            return Err(Error::InvalidState(format!("smallest eigenvalue {min:e} is negative")));
        }
        Ok(state)
    }

    /// Density matrix checked for shape, hermiticity and trace only. Used when
    /// positivity follows from construction (mixtures and products of valid states).
    pub fn mixed_unchecked_psd(basis: Arc<FockBasis>, rho: DMatrix<C64>) -> Result<Self> {
        let d = basis.dim();
        if rho.shape() != (d, d) {
            return Err(Error::InvalidState(format!("density matrix shape {:?}, basis dim {d}", rho.shape())));
        }
        let herm = (&rho - rho.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if herm > tol::STRUCTURAL {
            return Err(Error::InvalidState(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > tol::STRUCTURAL || tr.im.abs() > tol::STRUCTURAL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        Ok(Self::from_parts(basis, StateData::Mixed(rho)))
    }

    fn from_parts(basis: Arc<FockBasis>, data: StateData) -> Self {
        let partition: Vec<Vec<usize>> = (0..basis.num_modes()).map(|m| vec![m]).collect();
        let ssr = compute_ssr(&basis, &data, &partition);
        QuantumState { basis, data, ssr, discarded_mass: 0.0 }
    }

    /// Fock basis state `|occ⟩`.
    pub fn fock(basis: Arc<FockBasis>, occ: &[u32]) -> Result<Self> {
        let idx = basis.index_of(occ).ok_or_else(|| Error::InvalidState(format!("{occ:?} not in basis")))?;
        let mut v = DVector::zeros(basis.dim());
        v[idx] = ONE;
        Self::pure(basis, v)
    }

    pub fn vacuum(num_modes: usize) -> Self {
        let basis = Arc::new(FockBasis::new(num_modes, &[0]).expect("vacuum basis"));
        Self::fock(basis, &vec![0; num_modes]).expect("vacuum state")
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }
    pub fn data(&self) -> &StateData {
        &self.data
    }
    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }
    pub fn ssr(&self) -> SsrFlags {
        self.ssr
    }
    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            StateData::Mixed(_) => None,
        }
    }

    /// Probability mass dropped by a truncating constructor.
    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }
    pub(crate) fn with_discarded_mass(mut self, mass: f64) -> Self {
        self.discarded_mass = mass;
        self
    }

    /// Recomputes the local flag for a custom sub-system partition (lists of modes).
    pub fn with_local_partition(mut self, partition: &[Vec<usize>]) -> Self {
        self.ssr = compute_ssr(&self.basis, &self.data, partition);
        self
    }

    pub fn density_matrix(&self) -> DMatrix<C64> {
        match &self.data {
            StateData::Pure(v) => v * v.adjoint(),
            StateData::Mixed(m) => m.clone(),
        }
    }

    pub fn to_mixed(&self) -> QuantumState {
        QuantumState { data: StateData::Mixed(self.density_matrix()), ..self.clone() }
    }

    /// Diagonal of the density matrix.
    pub fn populations(&self) -> Vec<f64> {
        match &self.data {
            StateData::Pure(v) => v.iter().map(|a| a.norm_sqr()).collect(),
            StateData::Mixed(m) => (0..m.nrows()).map(|i| m[(i, i)].re).collect(),
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.data {
            StateData::Pure(_) => 1.0,
            StateData::Mixed(m) => (m * m).trace().re,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match &self.data {
            StateData::Pure(_) => 0.0,
            StateData::Mixed(m) => {
                let eig = nalgebra::SymmetricEigen::new(m.clone());
                eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Applies a dense unitary: `U|ψ⟩` or `UρU†`.
    pub fn transformed(&self, u: &DMatrix<C64>) -> QuantumState {
        let data = match &self.data {
            StateData::Pure(v) => StateData::Pure(u * v),
            StateData::Mixed(m) => StateData::Mixed(u * m * u.adjoint()),
        };
        QuantumState { data, ..self.clone() }
    }

    /// Re-expresses the state on another basis that contains every populated tuple.
    pub fn rebased(&self, target: Arc<FockBasis>) -> Result<QuantumState> {
        if target.num_modes() != self.basis.num_modes() {
            return Err(Error::BasisMismatch);
        }
        let map: Vec<Option<usize>> = self.basis.states().iter().map(|o| target.index_of(o)).collect();
        let d = target.dim();
        let data = match &self.data {
            StateData::Pure(v) => {
                let mut out = DVector::zeros(d);
                for (i, a) in v.iter().enumerate() {
                    match map[i] {
                        Some(j) => out[j] = *a,
                        None if a.norm() > tol::SERIALIZE_FLOOR => {
                            return Err(Error::InvalidState("state leaves target basis".into()))
                        }
                        None => {}
                    }
                }
                StateData::Pure(out)
            }
            StateData::Mixed(m) => {
                let mut out = DMatrix::zeros(d, d);
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        let v = m[(i, j)];
                        match (map[i], map[j]) {
                            (Some(a), Some(b)) => out[(a, b)] = v,
                            _ if v.norm() > tol::SERIALIZE_FLOOR => {
                                return Err(Error::InvalidState("state leaves target basis".into()))
                            }
                            _ => {}
                        }
                    }
                }
                StateData::Mixed(out)
            }
        };
        Ok(QuantumState { basis: target, data, ssr: self.ssr, discarded_mass: self.discarded_mass })
    }

    /// Reorders modes: mode `i` of the result is mode `perm[i]` of `self`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<QuantumState> {
        let m = self.basis.num_modes();
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter("not a permutation of the modes".into()));
        }
        let permuted: Vec<Vec<u32>> =
            self.basis.states().iter().map(|o| perm.iter().map(|&p| o[p]).collect()).collect();
        let target = Arc::new(FockBasis::from_occupations(m, permuted.clone())?);
        let map: Vec<usize> = permuted.iter().map(|o| target.index_of(o).unwrap()).collect();
        let d = target.dim();
        let data = match &self.data {
            StateData::Pure(v) => {
                let mut out = DVector::zeros(d);
                for (i, a) in v.iter().enumerate() {
                    out[map[i]] = *a;
                }
                StateData::Pure(out)
            }
            StateData::Mixed(rho) => {
                let mut out = DMatrix::zeros(d, d);
                for i in 0..rho.nrows() {
                    for j in 0..rho.ncols() {
                        out[(map[i], map[j])] = rho[(i, j)];
                    }
                }
                StateData::Mixed(out)
            }
        };
        Ok(QuantumState::from_parts(target, data))
    }
}

fn compute_ssr(basis: &FockBasis, data: &StateData, partition: &[Vec<usize>]) -> SsrFlags {
    let block_numbers = |i: usize| -> Vec<u32> {
        let occ = basis.occupation(i);
        partition.iter().map(|blk| blk.iter().map(|&m| occ[m]).sum()).collect()
    };
    let blocks: Vec<Vec<u32>> = (0..basis.dim()).map(block_numbers).collect();
    let mut global = true;
    let mut local = true;
    let mut check = |i: usize, j: usize| {
        if basis.total(i) != basis.total(j) {
            global = false;
        }
        if blocks[i] != blocks[j] {
            local = false;
        }
    };
    match data {
        StateData::Pure(v) => {
            let support: Vec<usize> = (0..v.len()).filter(|&i| v[i].norm() > tol::STRUCTURAL).collect();
            for (a, &i) in support.iter().enumerate() {
                for &j in &support[a + 1..] {
                    check(i, j);
                }
            }
        }
        StateData::Mixed(m) => {
            for i in 0..m.nrows() {
                for j in (i + 1)..m.ncols() {
                    if m[(i, j)].norm() > tol::STRUCTURAL {
                        check(i, j);
                    }
                }
            }
        }
    }
    SsrFlags { global_compliant: global, local_compliant: local }
}

fn ensure_same(op: &Operator, state: &QuantumState) -> Result<()> {
    if same_basis(op.basis(), state.basis()) {
        Ok(())
    } else {
        Err(Error::BasisMismatch)
    }
}

/// `Tr(ρ M)`, or `⟨ψ|M|ψ⟩` for pure states.
pub fn expectation(op: &Operator, state: &QuantumState) -> Result<C64> {
    ensure_same(op, state)?;
    Ok(match state.data() {
        StateData::Pure(v) => v.dotc(&op.apply(v)),
        StateData::Mixed(m) => op.trace_with(m),
    })
}

/// Real expectation of a Hermitian-flagged operator, rejecting imaginary residues.
pub fn expectation_real(op: &Operator, state: &QuantumState) -> Result<f64> {
    let z = expectation(op, state)?;
    if op.hermitian_hint() && z.im.abs() > tol::IMAG_RESIDUE * z.re.abs().max(1.0) {
        return Err(Error::ImaginaryResidue(z.im));
    }
    Ok(z.re)
}

/// `Tr(ρ A₁A₂…A_k)`.
pub fn expect_product(ops: &[&Operator], state: &QuantumState) -> Result<C64> {
    for op in ops {
        ensure_same(op, state)?;
    }
    Ok(match state.data() {
        StateData::Pure(v) => {
            let mut w = v.clone();
            for op in ops.iter().rev() {
                w = op.apply(&w);
            }
            v.dotc(&w)
        }
        StateData::Mixed(m) => match ops.split_first() {
            None => m.trace(),
            Some((first, rest)) => {
                let mut y = m.clone();
                for op in rest.iter().rev() {
                    y = op.apply_mat(&y);
                }
                first.trace_with(&y)
            }
        },
    })
}

fn require_hermitian(op: &Operator) -> Result<()> {
    if op.hermitian_hint() {
        return Ok(());
    }
    let defect = op.hermiticity_defect();
    if defect > tol::STRUCTURAL {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// `⟨M₁M₂ + M₂M₁⟩/2 − ⟨M₁⟩⟨M₂⟩` for Hermitian operators.
pub fn covariance(a: &Operator, b: &Operator, state: &QuantumState) -> Result<f64> {
    require_hermitian(a)?;
    require_hermitian(b)?;
    let ma = expectation_real(a, state)?;
    let mb = expectation_real(b, state)?;
    let ab = expect_product(&[a, b], state)?;
    Ok(ab.re - ma * mb)
}

/// `⟨M²⟩ − ⟨M⟩²`, clamped at zero once it is within 1e-10 of it.
pub fn variance(op: &Operator, state: &QuantumState) -> Result<f64> {
    let v = covariance(op, op, state)?;
    if v < 0.0 && v > -tol::PSD * expectation_real(op, state)?.abs().max(1.0).powi(2) {
        return Ok(0.0);
    }
    Ok(v)
}

/// Convex combination `Σ P_R ρ_R` over a common basis.
pub fn mix(components: &[(f64, &QuantumState)]) -> Result<QuantumState> {
    let (_, first) = components.first().ok_or_else(|| Error::InvalidMixture("no components".into()))?;
    let total: f64 = components.iter().map(|(p, _)| p).sum();
    if components.iter().any(|(p, _)| *p < 0.0 || !p.is_finite()) {
        return Err(Error::InvalidMixture("negative or non-finite weight".into()));
    }
    if (total - 1.0).abs() > tol::STRUCTURAL {
        return Err(Error::InvalidMixture(format!("weights sum to {total}")));
    }
    if components.iter().any(|(_, s)| !same_basis(s.basis(), first.basis())) {
        return Err(Error::BasisMismatch);
    }
    if components.len() == 1 {
        return Ok((*first).clone());
    }
    let d = first.basis().dim();
    let mut rho = DMatrix::zeros(d, d);
    for (p, s) in components {
        match s.data() {
            StateData::Pure(v) => rho += v * v.adjoint() * C64::new(*p, 0.0),
            StateData::Mixed(m) => rho += m * C64::new(*p, 0.0),
        }
    }
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let mass = components.iter().map(|(p, s)| p * s.discarded_mass()).sum();
    Ok(QuantumState::mixed_unchecked_psd(first.basis().clone(), rho)?.with_discarded_mass(mass))
}

/// Places sub-system states on disjoint mode sets of `target` and forms their
/// product. `parts[s].0` lists the target modes that sub-system `s` occupies,
/// in the sub-system's own mode order; uncovered target modes must be empty.
pub fn product_into(target: Arc<FockBasis>, parts: &[(&[usize], &QuantumState)]) -> Result<QuantumState> {
    let m = target.num_modes();
    let mut covered = vec![false; m];
    for (modes, s) in parts {
        if modes.len() != s.basis().num_modes() {
            return Err(Error::InvalidParameter("mode map length mismatch".into()));
        }
        for &t in modes.iter() {
            if t >= m || std::mem::replace(&mut covered[t], true) {
                return Err(Error::InvalidParameter("mode maps overlap or exceed target".into()));
            }
        }
    }
    // Enumerate product tuples as (target index, per-part local indices).
    let mut combos: Vec<(Vec<u32>, Vec<usize>)> = vec![(vec![0; m], Vec::new())];
    for (modes, s) in parts {
        let pops = s.populations();
        let mut next = Vec::new();
        for (occ, idx) in &combos {
            for (li, local) in s.basis().states().iter().enumerate() {
                if pops[li] <= 0.0 && s.is_pure() {
                    continue;
                }
                let mut o = occ.clone();
                for (k, &t) in modes.iter().enumerate() {
                    o[t] = local[k];
                }
                let mut ix = idx.clone();
                ix.push(li);
                next.push((o, ix));
            }
        }
        combos = next;
    }
    let mut located = Vec::with_capacity(combos.len());
    for (occ, idx) in combos {
        match target.index_of(&occ) {
            Some(t) => located.push((t, idx)),
            None => {
                let amp: f64 = parts.iter().zip(&idx).map(|((_, s), &li)| s.populations()[li]).product();
                if amp > tol::SERIALIZE_FLOOR {
                    return Err(Error::InvalidState(format!("product tuple {occ:?} leaves target basis")));
                }
            }
        }
    }
    let d = target.dim();
    let all_pure = parts.iter().all(|(_, s)| s.is_pure());
    let data = if all_pure {
        let amps: Vec<&DVector<C64>> = parts.iter().map(|(_, s)| s.amplitudes().unwrap()).collect();
        let mut v = DVector::zeros(d);
        for (t, idx) in &located {
            v[*t] = idx.iter().zip(&amps).map(|(&li, a)| a[li]).product();
        }
        StateData::Pure(v)
    } else {
        let rhos: Vec<DMatrix<C64>> = parts.iter().map(|(_, s)| s.density_matrix()).collect();
        let mut out = DMatrix::zeros(d, d);
        for (ti, ii) in &located {
            for (tj, jj) in &located {
                let mut v = ONE;
                for (s, rho) in rhos.iter().enumerate() {
                    v *= rho[(ii[s], jj[s])];
                    if v == ZERO {
                        break;
                    }
                }
                out[(*ti, *tj)] = v;
            }
        }
        StateData::Mixed(out)
    };
    let state = QuantumState::from_parts(target, data);
    let partition: Vec<Vec<usize>> = parts.iter().map(|(modes, _)| modes.to_vec()).collect();
    let local = parts.iter().all(|(_, s)| s.ssr().global_compliant);
    let mut state = state.with_local_partition(&partition);
    state.ssr.local_compliant &= local;
    let norm = match state.data() {
        StateData::Pure(v) => v.norm_squared(),
        StateData::Mixed(m) => m.trace().re,
    };
    if (norm - 1.0).abs() > tol::STRUCTURAL {
        return Err(Error::InvalidState(format!("product has norm {norm}")));
    }
    Ok(state)
}

/// Tensor product: the modes of `b` follow the modes of `a`.
pub fn tensor(a: &QuantumState, b: &QuantumState) -> Result<QuantumState> {
    let (ma, mb) = (a.basis().num_modes(), b.basis().num_modes());
    let mut occs = Vec::with_capacity(a.basis().dim() * b.basis().dim());
    for oa in a.basis().states() {
        for ob in b.basis().states() {
            let mut o = oa.clone();
            o.extend_from_slice(ob);
            occs.push(o);
        }
    }
    let target = Arc::new(FockBasis::from_occupations(ma + mb, occs)?);
    let modes_a: Vec<usize> = (0..ma).collect();
    let modes_b: Vec<usize> = (ma..ma + mb).collect();
    product_into(target, &[(&modes_a, a), (&modes_b, b)])
}

/// Many-body unitary `Γ(U)` of a single-particle mode transformation, defined by
/// `Γ e_j† Γ† = Σ_i U_ij e_i†`. Each column `Γ|n⟩` is built by applying the
/// transformed creation operators to the vacuum. Requires every sector of the
/// basis to be complete. The expansion sums terms of alternating sign, so
/// precision degrades beyond a few tens of bosons per mode.
pub fn mode_transform_unitary(basis: &FockBasis, u: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let m = basis.num_modes();
    if u.shape() != (m, m) {
        return Err(Error::InvalidParameter(format!("mode matrix must be {m}x{m}")));
    }
    if !basis.is_complete() {
        return Err(Error::InvalidBasis("mode transformation needs complete sectors".into()));
    }
    let d = basis.dim();
    let mut out = DMatrix::zeros(d, d);
    for (col, occ) in basis.states().iter().enumerate() {
        let mut amps: HashMap<Vec<u32>, C64> = HashMap::new();
        amps.insert(vec![0; m], ONE);
        for (j, &nj) in occ.iter().enumerate() {
            for step in 1..=nj {
                let norm = 1.0 / (step as f64).sqrt();
                let mut next: HashMap<Vec<u32>, C64> = HashMap::with_capacity(amps.len() * 2);
                for (o, a) in &amps {
                    for i in 0..m {
                        let uij = u[(i, j)];
                        if uij == ZERO {
                            continue;
                        }
                        let mut t = o.clone();
                        let factor = ((t[i] + 1) as f64).sqrt() * norm;
                        t[i] += 1;
                        *next.entry(t).or_insert(ZERO) += a * uij * factor;
                    }
                }
                amps = next;
            }
        }
        for (o, a) in amps {
            let row = basis.index_of(&o).expect("complete sector contains every tuple");
            out[(row, col)] = a;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_sizes_and_order() {
        let b = FockBasis::new(2, &[2]).unwrap();
        assert_eq!(b.states(), &[vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(FockBasis::new(2, &[0]).unwrap().dim(), 1);
        assert_eq!(FockBasis::new(4, &[2]).unwrap().dim(), 10);
        assert_eq!(FockBasis::new(3, &[4]).unwrap().dim() as u128, binomial(6, 2));
        assert!(FockBasis::new(0, &[1]).is_err());
        assert!(FockBasis::new(2, &[]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let b = FockBasis::truncated(3, 4).unwrap();
        for i in 0..b.dim() {
            assert_eq!(b.index_of(b.occupation(i)), Some(i));
        }
    }

    #[test]
    fn ladder_elements() {
        let b = Arc::new(FockBasis::truncated(1, 3).unwrap());
        let a = Operator::ladder(b.clone(), Ladder::Lower(0)).unwrap();
        let ad = Operator::ladder(b.clone(), Ladder::Raise(0)).unwrap();
        let i1 = b.index_of(&[1]).unwrap();
        let i0 = b.index_of(&[0]).unwrap();
        let i2 = b.index_of(&[2]).unwrap();
        assert_eq!(a.get(i0, i1), ONE);
        assert!((ad.get(i2, i1).re - 2f64.sqrt()).abs() < 1e-15);
        assert!(ad.is_truncated());
        let comm = a.commutator(&ad);
        for i in 0..b.dim() {
            if b.total(i) < 3 {
                assert!((comm.get(i, i) - ONE).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn number_equals_raise_lower() {
        let b = Arc::new(FockBasis::truncated(2, 5).unwrap());
        let n = Operator::number(b.clone(), 1);
        let ada = Operator::from_terms(b.clone(), &[(ONE, vec![Ladder::Raise(1), Ladder::Lower(1)])], true);
        assert_eq!(n.max_abs_diff(&ada), 0.0);
    }

    #[test]
    fn mixture_examples() {
        let b = Arc::new(FockBasis::new(2, &[2]).unwrap());
        let s20 = QuantumState::fock(b.clone(), &[2, 0]).unwrap();
        let s02 = QuantumState::fock(b.clone(), &[0, 2]).unwrap();
        let m = mix(&[(0.5, &s20), (0.5, &s02)]).unwrap();
        let rho = m.density_matrix();
        assert_eq!(rho[(0, 0)].re, 0.5);
        assert_eq!(rho[(1, 1)].re, 0.0);
        assert_eq!(rho[(2, 2)].re, 0.5);
        let single = mix(&[(1.0, &s20)]).unwrap();
        assert!(single.is_pure());
        assert!(mix(&[(0.7, &s20), (0.7, &s02)]).is_err());
    }

    #[test]
    fn mode_transform_is_unitary_and_maps_single_particles() {
        let b = FockBasis::truncated(3, 3).unwrap();
        let theta: f64 = 0.3;
        let mut u = DMatrix::<C64>::identity(3, 3);
        u[(0, 0)] = C64::new(theta.cos(), 0.0);
        u[(0, 1)] = C64::new(0.0, -theta.sin());
        u[(1, 0)] = C64::new(0.0, -theta.sin());
        u[(1, 1)] = C64::new(theta.cos(), 0.0);
        let g = mode_transform_unitary(&b, &u).unwrap();
        let defect = (g.adjoint() * &g - DMatrix::<C64>::identity(b.dim(), b.dim())).camax();
        assert!(defect < 1e-13);
        let col = b.index_of(&[1, 0, 0]).unwrap();
        for i in 0..3 {
            let mut occ = vec![0; 3];
            occ[i] = 1;
            let row = b.index_of(&occ).unwrap();
            assert!((g[(row, col)] - u[(i, 0)]).norm() < 1e-15);
        }
    }

    #[test]
    fn tensor_of_single_modes() {
        let one = QuantumState::fock(Arc::new(FockBasis::new(1, &[1]).unwrap()), &[1]).unwrap();
        let vac = QuantumState::vacuum(1);
        let t = tensor(&one, &vac).unwrap();
        assert_eq!(t.basis().states(), &[vec![1, 0]]);
        assert!(t.is_pure());
        assert!(t.ssr().local_compliant);
    }
}
