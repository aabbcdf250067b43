//! Reaction elimination for compiled CRNs.
//!
//! A unimolecular reaction `R → ΣPᵢ` whose reactant is consumed nowhere
//! else can be folded into every reaction producing `R`: each copy of `R`
//! in a product list becomes `ΣPᵢ`, and `R`'s initial concentration moves
//! onto the `Pᵢ`. Repeating until no non-input unimolecular reaction is
//! left, then cancelling balanced `S⁺`/`S⁻` products and concentrations,
//! leaves two reactions per network input and one bimolecular reaction per
//! ReLU unit.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::crn::{Crn, CrnError, DualRailPair, Multiset, Reaction, Species};

#[derive(Debug, Error, PartialEq)]
pub enum ReduceError {
    #[error("species {0} is a reactant in more than one reaction")]
    SharedReactant(String),
    #[error("cancellation pair ({0}) is not a dual-rail pair of this CRN")]
    UnknownPair(String),
    #[error(transparent)]
    Crn(#[from] CrnError),
}

fn eliminable(crn: &Crn, r: &Reaction) -> Option<Species> {
    if r.order() != 1 {
        return None;
    }
    let reactant = r.reactants.species().next()?.clone();
    // R → R + … cannot be substituted into itself
    if crn.is_input(&reactant) || r.products.contains(&reactant) {
        return None;
    }
    Some(reactant)
}

pub fn reduce(crn: &Crn) -> Result<Crn, ReduceError> {
    if let Some((s, _)) = crn.reactant_uses().into_iter().find(|&(_, n)| n > 1) {
        return Err(ReduceError::SharedReactant(s.to_string()));
    }
    let mut crn = crn.clone();

    // Downstream-most first; any order reaches the same fixpoint.
    while let Some((idx, reactant)) = crn
        .reactions
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, r)| eliminable(&crn, r).map(|s| (i, s)))
    {
        let uni = crn.reactions.remove(idx);
        for rxn in &mut crn.reactions {
            let m = rxn.products.take_all(&reactant);
            if m > 0 {
                rxn.products.extend_with(&uni.products, m);
            }
        }
        let r0 = crn.conc(&reactant);
        crn.set_conc(reactant, 0.0);
        if r0 != 0.0 {
            for (p, n) in uni.products.iter() {
                crn.add_conc(p.clone(), r0 * f64::from(n));
            }
        }
    }

    for pair in crn.dual_rail_pairs() {
        for rxn in &mut crn.reactions {
            let both = rxn.products.count(&pair.plus).min(rxn.products.count(&pair.minus));
            rxn.products.remove(&pair.plus, both);
            rxn.products.remove(&pair.minus, both);
        }
        let m = crn.conc(&pair.plus).min(crn.conc(&pair.minus));
        if m > 0.0 {
            crn.add_conc(pair.plus.clone(), -m);
            crn.add_conc(pair.minus.clone(), -m);
        }
    }

    crn.validate()?;
    Ok(crn)
}

/// Which dual-rail pairs receive an `S⁺ + S⁻ → W` cancellation reaction.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum Cancellation {
    #[default]
    None,
    Outputs,
    /// Every dual-rail pair with both halves present.
    All,
    Pairs(Vec<DualRailPair>),
}

impl std::str::FromStr for Cancellation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Cancellation::None),
            "outputs" => Ok(Cancellation::Outputs),
            "all" => Ok(Cancellation::All),
            other => Err(format!("expected outputs|all|none, got {other:?}")),
        }
    }
}

pub fn add_cancellation(crn: &Crn, which: &Cancellation) -> Result<Crn, ReduceError> {
    let present = crn.species();
    let pairs: Vec<DualRailPair> = match which {
        Cancellation::None => Vec::new(),
        Cancellation::Outputs => crn.outputs.clone(),
        Cancellation::All => crn
            .dual_rail_pairs()
            .into_iter()
            .filter(|p| present.contains(&p.plus) && present.contains(&p.minus))
            .collect(),
        Cancellation::Pairs(ps) => {
            let known: BTreeSet<_> = crn.dual_rail_pairs().into_iter().collect();
            for p in ps {
                if !known.contains(p) {
                    return Err(ReduceError::UnknownPair(format!("{}, {}", p.plus, p.minus)));
                }
            }
            ps.clone()
        }
    };
    let mut out = crn.clone();
    for p in pairs {
        let reactants: Multiset = [p.plus, p.minus].into_iter().collect();
        out.reactions.push(Reaction::new(
            reactants,
            [Species::Waste].into_iter().collect(),
            1.0,
        ));
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn crn(src: &str) -> Crn {
        Crn::from_text(src).unwrap()
    }

    #[test]
    fn folds_into_upstream() {
        let c = crn("input 1 X+ X-\ninit A 0.5\nrxn: X+ -> A + B @ 1\nrxn: A -> B + C @ 1\n");
        let r = reduce(&c).unwrap();
        assert_eq!(r.reactions.len(), 1);
        assert_eq!(r.reactions[0].to_string(), "X+ -> 2*B + C @ 1");
        assert_eq!(r.conc(&Species::named("B")), 0.5);
        assert_eq!(r.conc(&Species::named("C")), 0.5);
        assert_eq!(r.conc(&Species::named("A")), 0.0);
    }

    #[test]
    fn multiplicity_substitution() {
        let c = crn("input 1 X+ X-\nrxn: X+ -> 3*A @ 1\nrxn: A -> 2*B + C @ 1\n");
        let r = reduce(&c).unwrap();
        assert_eq!(r.reactions[0].to_string(), "X+ -> 6*B + 3*C @ 1");
    }

    #[test]
    fn input_only_crn_is_a_fixpoint() {
        let c = crn("input 1 X1+ X1-\nrxn: X1+ -> Y+ @ 1\nrxn: X1- -> Y- @ 1\n");
        assert_eq!(reduce(&c).unwrap(), c);
    }

    #[test]
    fn shared_reactant_is_rejected() {
        let c = crn("rxn: A -> B @ 1\nrxn: A + C -> D @ 1\n");
        assert_eq!(reduce(&c), Err(ReduceError::SharedReactant("A".into())));
    }

    #[test]
    fn balanced_products_and_concentrations_cancel() {
        let c = crn("input 1 X+ X-\ninit Y+ 2\ninit Y- 0.5\nrxn: X+ -> 2*Y+ + Y- @ 1\n");
        let r = reduce(&c).unwrap();
        assert_eq!(r.reactions[0].to_string(), "X+ -> Y+ @ 1");
        assert_eq!(r.conc(&Species::named("Y+")), 1.5);
        assert!(!r.init.contains_key(&Species::named("Y-")));
    }

    #[test]
    fn cancellation_selection() {
        let c = crn("input 1 X1+ X1-\noutput 1 Y+ Y-\nrxn: X1+ -> Y+ @ 1\nrxn: X1- -> Y- @ 1\n");
        assert_eq!(add_cancellation(&c, &Cancellation::None).unwrap(), c);
        let out = add_cancellation(&c, &Cancellation::Outputs).unwrap();
        assert_eq!(out.reactions.len(), 3);
        assert_eq!(out.reactions[2].to_string(), "Y+ + Y- -> W @ 1");
        assert_eq!(add_cancellation(&c, &Cancellation::All).unwrap().reactions.len(), 4);
        let bogus = DualRailPair::of(Species::named("Z+")).unwrap();
        assert!(matches!(
            add_cancellation(&c, &Cancellation::Pairs(vec![bogus])),
            Err(ReduceError::UnknownPair(_))
        ));
    }
}
