//! Named state constructors addressed by descriptor strings such as
//! `noon:N=4,theta=0.7854`.
//!
//! Grammar: `name[:key=value(,key=value)*]`. Angles are in radians; a value may
//! also be written as a multiple or fraction of `pi` (`pi/4`, `3*pi/4`, `-pi`).
//! Occupation lists use `/` as separator (`fock:occ=3/1`).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{FockBasis, QuantumState};
use crate::states::{self, SamplerConfig, Structure};

/// A parsed descriptor; every value remembers its column for error reporting.
#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor {
    pub name: String,
    pub params: BTreeMap<String, (String, usize)>,
    source: String,
}

/// One registered constructor.
#[derive(Clone, Copy, Debug)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub keys: &'static [&'static str],
    pub help: &'static str,
}

pub const REGISTRY: &[RegistryEntry] = &[
    RegistryEntry {
        name: "noon", keys: &["N", "theta"], help: "cos θ|N,0⟩ + sin θ|0,N⟩; theta defaults to pi/4"
    },
    RegistryEntry {
        name: "binomial",
        keys: &["N", "theta", "chi"],
        help: "N bosons in the mode cos θ a + e^{iχ} sin θ b; chi defaults to 0",
    },
    RegistryEntry {
        name: "relphase",
        keys: &["N", "p", "theta_p"],
        help: "relative-phase state at grid point p (default 0) or angle theta_p",
    },
    RegistryEntry {
        name: "cohmix",
        keys: &["alpha2", "nmax", "allow_truncation"],
        help: "phase-averaged |α⟩|α⟩ truncated at nmax (default 40)",
    },
    RegistryEntry {
        name: "verstraete",
        keys: &[],
        help: "equal mixture of (|0⟩+ω|1⟩)⊗(|0⟩+ω|1⟩) over ω ∈ {1, i, −1, −i}",
    },
    RegistryEntry { name: "fock", keys: &["occ"], help: "Fock state, occupations separated by '/'" },
    RegistryEntry {
        name: "case3",
        keys: &["N", "pairs"],
        help: "relative-phase state (N, 0) on the first pair, vacuum elsewhere; pairs defaults to 2",
    },
    RegistryEntry {
        name: "case3sum",
        keys: &["N", "pairs"],
        help: "binomial (N, pi/8, 0) on every pair; pairs defaults to 2",
    },
    RegistryEntry {
        name: "separable",
        keys: &["structure", "pairs", "one_boson", "seed", "nmax", "components"],
        help: "seeded random separable state; structure is two_mode|case1|case2|case3",
    },
];

impl Descriptor {
    pub fn parse(s: &str) -> Result<Self> {
        let err = |pos: usize, msg: String| Error::Descriptor { pos: pos + 1, msg };
        let (name, rest, rest_start) = match s.find(':') {
            Some(i) => (&s[..i], &s[i + 1..], i + 1),
            None => (s, "", s.len()),
        };
        let name = name.trim();
        if name.is_empty() {
            return Err(err(0, "missing state name".into()));
        }
        let entry =
            REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| err(0, format!("unknown state '{name}'")))?;
        let mut params = BTreeMap::new();
        if !rest.trim().is_empty() {
            let mut start = rest_start;
            for item in rest.split(',') {
                let pos = start + (item.len() - item.trim_start().len());
                start += item.len() + 1;
                let item = item.trim();
                let (k, v) =
                    item.split_once('=').ok_or_else(|| err(pos, format!("expected key=value, found '{item}'")))?;
                let (k, v) = (k.trim(), v.trim());
                if !entry.keys.contains(&k) {
                    return Err(err(
                        pos,
                        format!("'{name}' has no parameter '{k}' (expected one of {:?})", entry.keys),
                    ));
                }
                if v.is_empty() {
                    return Err(err(pos, format!("empty value for '{k}'")));
                }
                let vpos = pos + item.find('=').unwrap() + 1;
                if params.insert(k.to_string(), (v.to_string(), vpos)).is_some() {
                    return Err(err(pos, format!("duplicate parameter '{k}'")));
                }
            }
        }
        Ok(Descriptor { name: name.to_string(), params, source: s.to_string() })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.params.get(key)
    }

    fn missing(&self, key: &str) -> Error {
        Error::Descriptor { pos: self.source.len() + 1, msg: format!("'{}' requires parameter '{key}'", self.name) }
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|(v, pos)| {
                parse_real(v).ok_or_else(|| Error::Descriptor { pos: pos + 1, msg: format!("'{v}' is not a number") })
            })
            .transpose()
    }

    fn uint(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|(v, pos)| {
                v.parse::<usize>().map_err(|_| Error::Descriptor {
                    pos: pos + 1,
                    msg: format!("'{v}' is not a non-negative integer"),
                })
            })
            .transpose()
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>> {
        self.raw(key)
            .map(|(v, pos)| match v.as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::Descriptor { pos: pos + 1, msg: format!("'{v}' is not a boolean") }),
            })
            .transpose()
    }

    fn req_uint(&self, key: &str) -> Result<usize> {
        self.uint(key)?.ok_or_else(|| self.missing(key))
    }

    fn req_float(&self, key: &str) -> Result<f64> {
        self.float(key)?.ok_or_else(|| self.missing(key))
    }

    /// Sub-system structure the battery should assume for this state.
    pub fn structure(&self) -> Result<Structure> {
        Ok(match self.name.as_str() {
            "case3" | "case3sum" => Structure::Case3 { pairs: self.uint("pairs")?.unwrap_or(2), one_boson: false },
            "separable" => self.separable_structure()?,
            "fock" => {
                let m = self.occupations()?.len();
                if m == 2 {
                    Structure::TwoMode
                } else {
                    Structure::Case2 { pairs: m / 2 }
                }
            }
            _ => Structure::TwoMode,
        })
    }

    fn separable_structure(&self) -> Result<Structure> {
        let pairs = self.uint("pairs")?.unwrap_or(2);
        let (name, pos) = self.raw("structure").cloned().unwrap_or(("two_mode".into(), 0));
        Ok(match name.as_str() {
            "two_mode" => Structure::TwoMode,
            "case1" => Structure::Case1 { pairs },
            "case2" => Structure::Case2 { pairs },
            "case3" => Structure::Case3 { pairs, one_boson: self.boolean("one_boson")?.unwrap_or(false) },
            other => {
                return Err(Error::Descriptor { pos: pos + 1, msg: format!("unknown structure '{other}'") });
            }
        })
    }

    fn occupations(&self) -> Result<Vec<u32>> {
        let (v, pos) = self.raw("occ").ok_or_else(|| self.missing("occ"))?;
        v.split('/')
            .map(|x| {
                x.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Descriptor { pos: pos + 1, msg: format!("bad occupation list '{v}'") })
            })
            .collect()
    }

    pub fn build(&self) -> Result<QuantumState> {
        match self.name.as_str() {
            "noon" => states::noon(self.req_uint("N")?, self.float("theta")?.unwrap_or(PI / 4.0)),
            "binomial" => {
                states::binomial(self.req_uint("N")?, self.req_float("theta")?, self.float("chi")?.unwrap_or(0.0))
            }
            "relphase" => {
                let n = self.req_uint("N")?;
                match (self.float("p")?, self.float("theta_p")?) {
                    (Some(_), Some(_)) => Err(Error::Descriptor {
                        pos: self.raw("theta_p").unwrap().1 + 1,
                        msg: "give either p or theta_p, not both".into(),
                    }),
                    (_, Some(t)) => states::relative_phase_at(n, t),
                    (p, None) => states::relative_phase(n, p.unwrap_or(0.0)),
                }
            }
            "cohmix" => states::coherent_mixture(
                self.req_float("alpha2")?,
                self.uint("nmax")?.unwrap_or(40),
                self.boolean("allow_truncation")?.unwrap_or(false),
            ),
            "verstraete" => states::verstraete(),
            "fock" => {
                let occ = self.occupations()?;
                let n: u32 = occ.iter().sum();
                let basis = Arc::new(FockBasis::new(occ.len(), &[n as usize])?);
                QuantumState::fock(basis, &occ)
            }
            "case3" => states::case3_counterexample(self.req_uint("N")?, self.uint("pairs")?.unwrap_or(2)),
            "case3sum" => {
                states::case3_variance_sum_counterexample(self.req_uint("N")?, self.uint("pairs")?.unwrap_or(2))
            }
            "separable" => {
                let mut cfg = SamplerConfig::default();
                if let Some(n) = self.uint("nmax")? {
                    cfg.n_max = n;
                }
                if let Some(c) = self.uint("components")? {
                    cfg.max_components = c;
                }
                states::random_separable(self.separable_structure()?, &cfg, self.uint("seed")?.unwrap_or(0) as u64)
            }
            other => unreachable!("registry name {other} accepted by the parser"),
        }
    }
}

/// Parses a real number, accepting `pi` forms such as `pi/4`, `3*pi/4`, `-pi`, `0.5pi`.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(x) = s.parse::<f64>() {
        return x.is_finite().then_some(x);
    }
    let i = s.find("pi")?;
    let (head, tail) = (s[..i].trim().trim_end_matches('*').trim(), s[i + 2..].trim());
    let coef = match head {
        "" => 1.0,
        "-" => -1.0,
        "+" => 1.0,
        h => h.parse::<f64>().ok()?,
    };
    let div = if tail.is_empty() { 1.0 } else { tail.strip_prefix('/')?.trim().parse::<f64>().ok()? };
    let x = coef * PI / div;
    x.is_finite().then_some(x)
}

/// Parses and builds a state from a descriptor string.
pub fn make_state(descriptor: &str) -> Result<QuantumState> {
    Descriptor::parse(descriptor)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_each_entry() {
        for d in [
            "noon:N=4,theta=0.7854",
            "binomial:N=6,theta=pi/8",
            "relphase:N=10,p=2",
            "relphase:N=10,theta_p=0.3",
            "cohmix:alpha2=2,nmax=40",
            "verstraete",
            "fock:occ=3/1/0/2",
            "case3:N=8",
            "case3sum:N=4,pairs=3",
            "separable:structure=case2,pairs=2,seed=5",
            "separable:structure=case3,one_boson=true,pairs=3,seed=1",
        ] {
            make_state(d).unwrap_or_else(|e| panic!("{d}: {e}"));
        }
    }

    #[test]
    fn amplitude_counts() {
        assert_eq!(make_state("relphase:N=100,p=0").unwrap().basis().dim(), 101);
        let noon = make_state("noon:N=4,theta=0.7854").unwrap();
        assert_eq!(noon.populations().iter().filter(|p| **p > 0.0).count(), 2);
    }

    #[test]
    fn errors_carry_columns() {
        match Descriptor::parse("noon:N=4,thta=1") {
            Err(Error::Descriptor { pos, .. }) => assert_eq!(pos, 10),
            other => panic!("{other:?}"),
        }
        match make_state("noon:N=x") {
            Err(Error::Descriptor { pos, .. }) => assert_eq!(pos, 8),
            other => panic!("{other:?}"),
        }
        match Descriptor::parse("squeezed:N=2") {
            Err(Error::Descriptor { pos, .. }) => assert_eq!(pos, 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(make_state("noon:theta=1"), Err(Error::Descriptor { .. })));
        assert!(matches!(Descriptor::parse("noon:N=2,N=3"), Err(Error::Descriptor { .. })));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn pi_forms() {
        assert_eq!(parse_real("pi/4"), Some(PI / 4.0));
        assert_eq!(parse_real("3*pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(parse_real("-pi"), Some(-PI));
        assert_eq!(parse_real("0.7854"), Some(0.7854));
        assert_eq!(parse_real("pie"), None);
    }

    #[test]
    fn structures() {
        assert_eq!(
            Descriptor::parse("case3:N=4,pairs=3").unwrap().structure().unwrap(),
            Structure::Case3 { pairs: 3, one_boson: false }
        );
        assert_eq!(Descriptor::parse("noon:N=4").unwrap().structure().unwrap(), Structure::TwoMode);
        assert_eq!(
            Descriptor::parse("separable:structure=case1,pairs=2").unwrap().structure().unwrap(),
            Structure::Case1 { pairs: 2 }
        );
    }
}
