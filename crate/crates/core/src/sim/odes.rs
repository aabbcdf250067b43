use std::collections::BTreeMap;

use crate::crn::{Crn, Species};

use super::integrator::OdeSystem;

#[derive(Debug, Clone)]
struct CompiledReaction {
    rate: f64,
    reactants: Vec<(usize, i32)>,
    /// Net stoichiometric change per species.
    delta: Vec<(usize, f64)>,
}

/// Mass-action rate equations of a CRN over a fixed species ordering.
///
/// A reaction with rate constant `k` fires at `v = k·∏ cₛ^mult(s)` and
/// contributes `(products(s) − reactants(s))·v` to `dcₛ/dt`. Negative
/// concentrations are treated as zero when evaluating `v`.
#[derive(Debug, Clone)]
pub struct MassActionSystem {
    species: Vec<Species>,
    index: BTreeMap<Species, usize>,
    reactions: Vec<CompiledReaction>,
}

pub fn derive_odes(crn: &Crn) -> MassActionSystem {
    let species: Vec<Species> = crn.species().into_iter().collect();
    let index: BTreeMap<Species, usize> =
        species.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let reactions = crn
        .reactions
        .iter()
        .map(|r| {
            let mut net: BTreeMap<usize, i64> = BTreeMap::new();
            let reactants = r
                .reactants
                .iter()
                .map(|(s, n)| {
                    *net.entry(index[s]).or_insert(0) -= i64::from(n);
                    (index[s], n as i32)
                })
                .collect();
            for (s, n) in r.products.iter() {
                *net.entry(index[s]).or_insert(0) += i64::from(n);
            }
            CompiledReaction {
                rate: r.rate,
                reactants,
                delta: net
                    .into_iter()
                    .filter(|&(_, d)| d != 0)
                    .map(|(i, d)| (i, d as f64))
                    .collect(),
            }
        })
        .collect();
    MassActionSystem {
        species,
        index,
        reactions,
    }
}

impl MassActionSystem {
    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn index_of(&self, s: &Species) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// State vector from a sparse concentration map; unknown species are ignored.
    pub fn state_from(&self, conc: &BTreeMap<Species, f64>) -> Vec<f64> {
        let mut y = vec![0.0; self.species.len()];
        for (s, &v) in conc {
            if let Some(i) = self.index_of(s) {
                y[i] = v;
            }
        }
        y
    }

    pub fn derivatives(&self, y: &[f64], dy: &mut [f64]) {
        dy.fill(0.0);
        for r in &self.reactions {
            let mut v = r.rate;
            for &(i, m) in &r.reactants {
                // solver undershoot must not run reactions backwards
                let c = y[i].max(0.0);
                v *= if m == 1 { c } else { c.powi(m) };
            }
            if v == 0.0 {
                continue;
            }
            for &(i, d) in &r.delta {
                dy[i] += d * v;
            }
        }
    }

    /// `dc/dt` for every species, keyed by species.
    pub fn derivative_map(&self, conc: &BTreeMap<Species, f64>) -> BTreeMap<Species, f64> {
        let y = self.state_from(conc);
        let mut dy = vec![0.0; y.len()];
        self.derivatives(&y, &mut dy);
        self.species.iter().cloned().zip(dy).collect()
    }
}

impl OdeSystem for MassActionSystem {
    fn dim(&self) -> usize {
        self.species.len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.derivatives(y, dy);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(s: &str) -> Species {
        Species::named(s)
    }

    fn rates(src: &str, conc: &[(&str, f64)]) -> BTreeMap<Species, f64> {
        let crn = Crn::from_text(src).unwrap();
        let conc = conc.iter().map(|&(s, v)| (sp(s), v)).collect();
        derive_odes(&crn).derivative_map(&conc)
    }

    #[test]
    fn bimolecular() {
        let d = rates("rxn: A + B -> C @ 2.5", &[("A", 3.0), ("B", 0.4)]);
        assert_eq!(d[&sp("C")], 2.5 * 3.0 * 0.4);
        assert_eq!(d[&sp("A")], -2.5 * 3.0 * 0.4);
        assert_eq!(d[&sp("B")], -2.5 * 3.0 * 0.4);
    }

    #[test]
    fn product_stoichiometry() {
        let d = rates("rxn: X -> 2*B + C @ 0.7", &[("X", 2.0)]);
        assert_eq!(d[&sp("B")], 2.0 * 0.7 * 2.0);
        assert_eq!(d[&sp("C")], 0.7 * 2.0);
        assert_eq!(d[&sp("X")], -0.7 * 2.0);
    }

    #[test]
    fn homodimerization() {
        // v = k·a², A loses two per firing: da/dt = −2k·a², db/dt = k·a²
        let (k, a) = (1.5, 0.8);
        let d = rates("rxn: A + A -> B @ 1.5", &[("A", a)]);
        assert!((d[&sp("A")] - (-2.0 * k * a * a)).abs() < 1e-15);
        assert!((d[&sp("B")] - k * a * a).abs() < 1e-15);
    }

    #[test]
    fn catalyst_has_no_net_change() {
        let d = rates("rxn: E + S -> E + P @ 1", &[("E", 1.0), ("S", 2.0)]);
        assert_eq!(d[&sp("E")], 0.0);
        assert_eq!(d[&sp("P")], 2.0);
    }
}
