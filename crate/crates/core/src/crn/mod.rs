//! Chemical reaction networks: multiset reactions with mass-action rate
//! constants, initial concentrations, and dual-rail input/output pairs.

mod species;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use species::{Sign, Species};

#[derive(Debug, Error, PartialEq)]
pub enum CrnError {
    #[error("unknown species name {0:?}")]
    SpeciesName(String),
    #[error("reaction {index}: {detail}")]
    Reaction { index: usize, detail: String },
    #[error("species {species}: initial concentration {value} is not a nonnegative finite number")]
    Concentration { species: String, value: f64 },
    #[error("input/output pair {0}")]
    Pair(String),
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("{0}")]
    Io(String),
}

/// A finite multiset of species. Iteration order is the species order, so
/// equal multisets print identically.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Multiset(BTreeMap<Species, u32>);

impl Multiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, s: Species, n: u32) {
        if n > 0 {
            *self.0.entry(s).or_insert(0) += n;
        }
    }

    /// Removes up to `n` copies; returns how many were removed.
    pub fn remove(&mut self, s: &Species, n: u32) -> u32 {
        let Some(have) = self.0.get_mut(s) else {
            return 0;
        };
        let taken = n.min(*have);
        *have -= taken;
        if *have == 0 {
            self.0.remove(s);
        }
        taken
    }

    /// Removes every copy; returns the multiplicity that was present.
    pub fn take_all(&mut self, s: &Species) -> u32 {
        self.0.remove(s).unwrap_or(0)
    }

    pub fn count(&self, s: &Species) -> u32 {
        self.0.get(s).copied().unwrap_or(0)
    }

    pub fn contains(&self, s: &Species) -> bool {
        self.0.contains_key(s)
    }

    /// Total number of molecules, counting multiplicity.
    pub fn size(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Species, u32)> {
        self.0.iter().map(|(s, &n)| (s, n))
    }

    pub fn species(&self) -> impl Iterator<Item = &Species> {
        self.0.keys()
    }

    pub fn extend_with(&mut self, other: &Multiset, times: u32) {
        for (s, n) in other.iter() {
            self.add(s.clone(), n * times);
        }
    }
}

impl<S: Into<Species>> FromIterator<S> for Multiset {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        let mut m = Multiset::new();
        for s in iter {
            m.add(s.into(), 1);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub reactants: Multiset,
    pub products: Multiset,
    pub rate: f64,
}

impl Reaction {
    pub fn new(reactants: Multiset, products: Multiset, rate: f64) -> Self {
        Reaction {
            reactants,
            products,
            rate,
        }
    }

    /// Total reactant molecularity (1 = unimolecular, 2 = bimolecular).
    pub fn order(&self) -> u32 {
        self.reactants.size()
    }

    /// The same reaction with every signed species replaced by its partner.
    pub fn reverse_signs(&self) -> Reaction {
        let flip = |m: &Multiset| {
            let mut out = Multiset::new();
            for (s, n) in m.iter() {
                out.add(s.flipped(), n);
            }
            out
        };
        Reaction::new(flip(&self.reactants), flip(&self.products), self.rate)
    }

    fn check(&self, index: usize) -> Result<(), CrnError> {
        let err = |detail: &str| CrnError::Reaction {
            index,
            detail: detail.to_string(),
        };
        if self.reactants.is_empty() {
            return Err(err("no reactants"));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(err(&format!("rate constant {} must be positive", self.rate)));
        }
        Ok(())
    }
}

impl fmt::Display for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        text::write_reaction(f, self)
    }
}

/// A dual-rail pair `(S⁺, S⁻)` encoding the signed value `s⁺ − s⁻`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DualRailPair {
    pub plus: Species,
    pub minus: Species,
}

impl DualRailPair {
    /// Pair for a positive-signed species and its partner.
    pub fn of(plus: Species) -> Option<Self> {
        if plus.sign() != Some(Sign::Plus) {
            return None;
        }
        let minus = plus.partner()?;
        Some(DualRailPair { plus, minus })
    }

    fn check(&self) -> Result<(), CrnError> {
        if self.plus.sign() != Some(Sign::Plus) || self.plus.partner().as_ref() != Some(&self.minus)
        {
            return Err(CrnError::Pair(format!(
                "({}, {}) is not a dual-rail pair",
                self.plus, self.minus
            )));
        }
        Ok(())
    }
}

/// A signed value held as two nonnegative concentrations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualRailValue {
    plus: f64,
    minus: f64,
}

impl DualRailValue {
    pub fn new(plus: f64, minus: f64) -> Option<Self> {
        (plus >= 0.0 && minus >= 0.0).then_some(DualRailValue { plus, minus })
    }

    /// Canonical encoding: the rail opposite the sign is zero.
    pub fn encode(x: f64) -> Self {
        if x >= 0.0 {
            DualRailValue { plus: x, minus: 0.0 }
        } else {
            DualRailValue { plus: 0.0, minus: -x }
        }
    }

    pub fn plus(&self) -> f64 {
        self.plus
    }

    pub fn minus(&self) -> f64 {
        self.minus
    }

    pub fn value(&self) -> f64 {
        self.plus - self.minus
    }
}

/// Canonical dual-rail encoding of `x` on the species `X1±, X2±, ...`.
pub fn encode_input(x: &[f64]) -> BTreeMap<Species, f64> {
    let mut out = BTreeMap::new();
    for (i, &v) in x.iter().enumerate() {
        let d = DualRailValue::encode(v);
        out.insert(Species::input(i + 1, Sign::Plus), d.plus());
        out.insert(Species::input(i + 1, Sign::Minus), d.minus());
    }
    out
}

/// `s⁺ − s⁻` read from `state`; absent species count as zero.
pub fn decode_output(state: &BTreeMap<Species, f64>, pair: &DualRailPair) -> f64 {
    let get = |s: &Species| state.get(s).copied().unwrap_or(0.0);
    get(&pair.plus) - get(&pair.minus)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CrnStats {
    pub species: usize,
    pub reactions: usize,
    pub unimolecular: usize,
    pub bimolecular: usize,
    pub max_products: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Crn {
    pub reactions: Vec<Reaction>,
    /// Absent species have concentration zero.
    pub init: BTreeMap<Species, f64>,
    pub inputs: Vec<DualRailPair>,
    pub outputs: Vec<DualRailPair>,
}

impl Crn {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn conc(&self, s: &Species) -> f64 {
        self.init.get(s).copied().unwrap_or(0.0)
    }

    /// Sets a concentration, dropping the entry when it is zero.
    pub fn set_conc(&mut self, s: Species, v: f64) {
        if v == 0.0 {
            self.init.remove(&s);
        } else {
            self.init.insert(s, v);
        }
    }

    pub fn add_conc(&mut self, s: Species, dv: f64) {
        let v = self.conc(&s) + dv;
        self.set_conc(s, v);
    }

    pub fn is_input(&self, s: &Species) -> bool {
        self.inputs.iter().any(|p| &p.plus == s || &p.minus == s)
    }

    /// Every species mentioned by a reaction, the concentration map, or an
    /// input/output declaration.
    pub fn species(&self) -> BTreeSet<Species> {
        let mut out: BTreeSet<Species> = self.init.keys().cloned().collect();
        for r in &self.reactions {
            out.extend(r.reactants.species().cloned());
            out.extend(r.products.species().cloned());
        }
        for p in self.inputs.iter().chain(&self.outputs) {
            out.insert(p.plus.clone());
            out.insert(p.minus.clone());
        }
        out
    }

    /// Dual-rail pairs with at least one half present in the network.
    pub fn dual_rail_pairs(&self) -> Vec<DualRailPair> {
        let mut pairs = BTreeSet::new();
        for s in self.species() {
            let plus = match s.sign() {
                Some(Sign::Plus) => s,
                Some(Sign::Minus) => s.flipped(),
                None => continue,
            };
            pairs.extend(DualRailPair::of(plus));
        }
        pairs.into_iter().collect()
    }

    /// Number of reactions consuming each species.
    pub fn reactant_uses(&self) -> BTreeMap<Species, usize> {
        let mut uses = BTreeMap::new();
        for r in &self.reactions {
            for s in r.reactants.species() {
                *uses.entry(s.clone()).or_insert(0) += 1;
            }
        }
        uses
    }

    pub fn validate(&self) -> Result<(), CrnError> {
        for (i, r) in self.reactions.iter().enumerate() {
            r.check(i)?;
        }
        for (s, &v) in &self.init {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CrnError::Concentration {
                    species: s.to_string(),
                    value: v,
                });
            }
        }
        let mut ins = BTreeSet::new();
        for p in &self.inputs {
            p.check()?;
            ins.insert(&p.plus);
            ins.insert(&p.minus);
        }
        for p in &self.outputs {
            p.check()?;
            if ins.contains(&p.plus) || ins.contains(&p.minus) {
                return Err(CrnError::Pair(format!(
                    "{} is both an input and an output species",
                    p.plus
                )));
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> CrnStats {
        let mut st = CrnStats {
            species: self.species().len(),
            reactions: self.reactions.len(),
            ..CrnStats::default()
        };
        for r in &self.reactions {
            match r.order() {
                1 => st.unimolecular += 1,
                2 => st.bimolecular += 1,
                _ => {}
            }
            st.max_products = st.max_products.max(r.products.size());
        }
        st
    }

    /// The CRN in the line-oriented text format.
    pub fn to_text(&self) -> String {
        text::print(self)
    }

    pub fn from_text(src: &str) -> Result<Self, CrnError> {
        text::parse(src)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), CrnError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text())
            .map_err(|e| CrnError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, CrnError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path)
            .map_err(|e| CrnError::Io(format!("{}: {e}", path.display())))?;
        Self::from_text(&src)
    }
}
