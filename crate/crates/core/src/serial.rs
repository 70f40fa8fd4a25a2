//! Portable JSON state files and fixed-precision JSON output.

use std::io;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, QuantumState, StateData};
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Pure,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub occupations: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupations_bra: Option<Vec<u32>>,
    pub re: f64,
    pub im: f64,
}

/// On-disk form of a [`QuantumState`]. Amplitudes (pure) or density-matrix
/// elements (mixed) with modulus below `1e-15` are omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub num_modes: usize,
    pub sectors: Vec<usize>,
    pub kind: StateKind,
    /// Explicit tuple list, present only when the basis is not a union of complete sectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_states: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub discarded_mass: f64,
    pub entries: Vec<Entry>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl StateFile {
    pub fn from_state(state: &QuantumState) -> Self {
        let basis = state.basis();
        let keep = |c: &C64| c.norm() >= tol::SERIALIZE_FLOOR;
        let entries = match state.data() {
            StateData::Pure(v) => v
                .iter()
                .enumerate()
                .filter(|(_, c)| keep(c))
                .map(|(i, c)| Entry {
                    occupations: basis.occupation(i).to_vec(),
                    occupations_bra: None,
                    re: c.re,
                    im: c.im,
                })
                .collect(),
            StateData::Mixed(m) => {
                let d = basis.dim();
                (0..d)
                    .flat_map(|i| (0..d).map(move |j| (i, j)))
                    .filter(|&(i, j)| keep(&m[(i, j)]))
                    .map(|(i, j)| Entry {
                        occupations: basis.occupation(i).to_vec(),
                        occupations_bra: Some(basis.occupation(j).to_vec()),
                        re: m[(i, j)].re,
                        im: m[(i, j)].im,
                    })
                    .collect()
            }
        };
        StateFile {
            num_modes: basis.num_modes(),
            sectors: basis.sectors().to_vec(),
            kind: if state.is_pure() { StateKind::Pure } else { StateKind::Mixed },
            basis_states: (!basis.is_complete()).then(|| basis.states().to_vec()),
            discarded_mass: state.discarded_mass(),
            entries,
        }
    }

    pub fn to_state(&self) -> Result<QuantumState> {
        let basis = Arc::new(match &self.basis_states {
            Some(states) => FockBasis::from_occupations(self.num_modes, states.clone())?,
            None => FockBasis::new(self.num_modes, &self.sectors)?,
        });
        if basis.sectors() != self.sectors.as_slice() {
            return Err(Error::Serialization("sector list does not match basis states".into()));
        }
        let index = |occ: &[u32]| {
            basis.index_of(occ).ok_or_else(|| Error::Serialization(format!("occupation {occ:?} outside the basis")))
        };
        let d = basis.dim();
        let state = match self.kind {
            StateKind::Pure => {
                let mut v = DVector::zeros(d);
                for e in &self.entries {
                    if e.occupations_bra.is_some() {
                        return Err(Error::Serialization("pure state entry carries occupations_bra".into()));
                    }
                    v[index(&e.occupations)?] = C64::new(e.re, e.im);
                }
                QuantumState::pure(basis, v)?
            }
            StateKind::Mixed => {
                let mut m = DMatrix::zeros(d, d);
                for e in &self.entries {
                    let bra = e
                        .occupations_bra
                        .as_ref()
                        .ok_or_else(|| Error::Serialization("mixed state entry lacks occupations_bra".into()))?;
                    m[(index(&e.occupations)?, index(bra)?)] = C64::new(e.re, e.im);
                }
                QuantumState::mixed(basis, m)?
            }
        };
        Ok(state.with_discarded_mass(self.discarded_mass))
    }
}

pub fn state_to_json(state: &QuantumState) -> String {
    to_json_string(&StateFile::from_state(state))
}

pub fn state_from_json(s: &str) -> Result<QuantumState> {
    let file: StateFile = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
    file.to_state()
}

/// Formats a float with 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// JSON formatter in which every float carries 17 significant digits.
struct FixedPrecision<F>(F);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for FixedPrecision<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );
}

fn write_json<T: Serialize + ?Sized, F: Formatter>(value: &T, formatter: F) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedPrecision(formatter));
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    out
}

/// Indented JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = write_json(value, PrettyFormatter::new());
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

/// Single-line JSON.
pub fn to_json_compact<T: Serialize + ?Sized>(value: &T) -> String {
    String::from_utf8(write_json(value, CompactFormatter)).expect("JSON is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{binomial, coherent_mixture, noon};

    fn assert_bit_exact(a: &QuantumState, b: &QuantumState) {
        let (ra, rb) = (a.density_matrix(), b.density_matrix());
        match (a.data(), b.data()) {
            (StateData::Pure(x), StateData::Pure(y)) => {
                for (p, q) in x.iter().zip(y.iter()) {
                    if p.norm() >= tol::SERIALIZE_FLOOR {
                        assert_eq!(p.re.to_bits(), q.re.to_bits());
                        assert_eq!(p.im.to_bits(), q.im.to_bits());
                    }
                }
            }
            (StateData::Mixed(x), StateData::Mixed(y)) => {
                for (p, q) in x.iter().zip(y.iter()) {
                    if p.norm() >= tol::SERIALIZE_FLOOR {
                        assert_eq!(p.re.to_bits(), q.re.to_bits());
                        assert_eq!(p.im.to_bits(), q.im.to_bits());
                    }
                }
            }
            _ => panic!("kind changed"),
        }
        assert_eq!(ra.shape(), rb.shape());
    }

    #[test]
    fn pure_round_trip_is_bit_exact() {
        let st = binomial(9, 0.37, 1.1).unwrap();
        let back = state_from_json(&state_to_json(&st)).unwrap();
        assert_bit_exact(&st, &back);
    }

    #[test]
    fn mixed_round_trip_keeps_tail_mass() {
        let st = coherent_mixture(2.0, 20, true).unwrap();
        let back = state_from_json(&state_to_json(&st)).unwrap();
        assert_bit_exact(&st, &back);
        assert_eq!(st.discarded_mass().to_bits(), back.discarded_mass().to_bits());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn noon_file_has_two_entries() {
        let file = StateFile::from_state(&noon(4, 0.7854).unwrap());
        assert_eq!(file.entries.len(), 2);
        assert_eq!(file.kind, StateKind::Pure);
        assert!(file.basis_states.is_none());
    }

    #[test]
    fn partial_basis_is_listed() {
        let b = Arc::new(FockBasis::from_occupations(2, vec![vec![2, 0], vec![0, 2]]).unwrap());
        let v = DVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let st = QuantumState::pure(b, v).unwrap();
        let back = state_from_json(&state_to_json(&st)).unwrap();
        assert_eq!(back.basis().dim(), 2);
        assert_bit_exact(&st, &back);
    }

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json_string(&[0.1f64, 1.0, -2.5e-300]);
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("1.0000000000000000e0"));
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, 1.0, -2.5e-300]);
    }

    #[test]
    fn rejects_foreign_occupation() {
        let s = r#"{"num_modes":2,"sectors":[1],"kind":"pure","entries":[{"occupations":[2,0],"re":1.0,"im":0.0}]}"#;
        assert!(state_from_json(s).is_err());
    }
}
