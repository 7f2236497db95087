//! Sculpting engine: applies a product of single-boson subtraction
//! operators to the paired initial state and reduces the survivor to a
//! logical state on the system sites.
//!
//! Two independent routes produce the final state. The direct route
//! expands every subtraction factor against the full initial state; the
//! combinatorial route sums one monomial per disjoint cycle cover. Their
//! agreement is a structural check on both.

use thiserror::Error;

use crate::coeff::Coeff;
use crate::fock::{
    DickeEncoding, FockError, FockPolynomial, InternalBasis, ModeLabel, Monomial, ProductState,
    SiteId, Spin,
};
use crate::graph::{CycleCover, GraphError, SculptingBigraph, SculptingDigraph};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("sculpting produced the zero state")]
    VanishedState,
}

/// One subtraction factor `sum_t w_t a_{site_t, spin_t}`.
#[derive(Clone, Debug)]
pub struct Factor<C: Coeff> {
    pub terms: Vec<(SiteId, Spin, C)>,
}

/// An ordered product of subtraction factors.
#[derive(Clone, Debug)]
pub struct SculptingOperator<C: Coeff> {
    pub factors: Vec<Factor<C>>,
}

impl<C: Coeff> SculptingOperator<C> {
    /// Reads one factor off each dot of a valid sculpting bigraph.
    pub fn from_bigraph(g: &SculptingBigraph) -> Result<Self, EngineError> {
        if !crate::graph::is_epm_bigraph(g) {
            return Err(EngineError::Graph(GraphError::NotEpm));
        }
        let factors = (0..g.dots.len())
            .map(|d| Factor {
                terms: g
                    .edges
                    .iter()
                    .filter(|e| e.dot == d)
                    .map(|e| (e.circle, e.color.spin(), weight_to_coeff::<C>(&e.weight)))
                    .collect(),
            })
            .collect();
        Ok(SculptingOperator { factors })
    }

    /// Per-factor normalization `sum_t |w_t|^2 = 1`.
    pub fn is_normalized(&self) -> bool {
        self.factors.iter().all(|f| {
            let mut acc = C::zero();
            for (_, _, w) in &f.terms {
                acc = acc.add(&w.conj().mul(w));
            }
            acc == C::one()
        })
    }
}

/// Converts a graph edge weight into the target coefficient ring. Graph
/// weights are real sums of rational multiples of square roots.
pub fn weight_to_coeff<C: Coeff>(w: &crate::coeff::Exact) -> C {
    let mut acc = C::zero();
    for (s, c) in w.terms() {
        let re = C::from_big_ratio(&c.re);
        let im = C::from_big_ratio(&c.im);
        let i = C::root_of_unity(4, 1).expect("i is available in every backend");
        let root = C::sqrt_ratio(s, 1);
        acc = acc.add(&re.add(&im.mul(&i)).mul(&root));
    }
    acc
}

/// The paired initial state for an `n`-system, `m`-ancilla scheme:
/// `prod_j a†_{j,+} a†_{j,-} prod_l a†_{anc_l,+} |vac>`.
pub fn initial_state<C: Coeff>(n: u32, ancillas: &[SiteId]) -> ProductState<C> {
    let mut factors = Vec::new();
    for j in 1..=n as u16 {
        let pair = FockPolynomial::creation(ModeLabel::internal(SiteId::Sys(j), Spin::Plus)).mul(
            &FockPolynomial::creation(ModeLabel::internal(SiteId::Sys(j), Spin::Minus)),
        );
        factors.push(pair);
    }
    for &a in ancillas {
        factors.push(FockPolynomial::creation(ModeLabel::internal(a, Spin::Plus)));
    }
    ProductState {
        scalar: C::one(),
        factors,
    }
}

/// Ancilla sites of the Dicke scheme: `S_1..S_n`, `T_1..T_k`.
pub fn dicke_ancillas(n: u32, k: u32) -> Vec<SiteId> {
    let mut v: Vec<SiteId> = (1..=n as u16).map(SiteId::AncS).collect();
    v.extend((1..=k as u16).map(SiteId::AncT));
    v
}

fn x_basis_form<C: Coeff>(site: SiteId, spin: Spin) -> Vec<(ModeLabel, C)> {
    let h = C::sqrt_ratio(1, 2);
    let plus = ModeLabel::internal(site, Spin::Plus);
    let minus = ModeLabel::internal(site, Spin::Minus);
    match spin {
        Spin::Zero => vec![(plus, h.clone()), (minus, h)],
        Spin::One => vec![(plus, h.clone()), (minus, h.neg())],
        Spin::Plus => vec![(plus, C::one())],
        Spin::Minus => vec![(minus, C::one())],
    }
}

/// Applies the operator to the initial state by expanding each factor as a
/// linear combination of x-basis annihilations against the fully expanded
/// polynomial. `budget` caps intermediate term counts.
pub fn apply_sculpting<C: Coeff>(
    op: &SculptingOperator<C>,
    init: &ProductState<C>,
    budget: usize,
) -> Result<FockPolynomial<C>, EngineError> {
    let mut state = init.expand(budget)?;
    for factor in &op.factors {
        let mut next = FockPolynomial::zero();
        for (site, spin, w) in &factor.terms {
            for (label, amp) in x_basis_form::<C>(*site, *spin) {
                let hit = state.annihilate(label).scale(&w.mul(&amp));
                next = next.add(&hit);
            }
        }
        if next.len() > budget {
            return Err(EngineError::Fock(FockError::BudgetExceeded(next.len())));
        }
        state = next;
        if state.is_zero() {
            return Err(EngineError::VanishedState);
        }
    }
    Ok(state)
}

/// No mode carries more than one boson.
pub fn no_bunching<C: Coeff>(state: &FockPolynomial<C>) -> bool {
    state
        .iter()
        .all(|(m, _)| m.factors().all(|(_, exp)| exp == 1))
}

/// The combinatorial route: one monomial per disjoint cycle cover,
/// `prod_edges w_e` times the creation operators each chosen edge injects
/// into its destination mode.
pub fn dcc_expansion_state<C: Coeff>(
    g: &SculptingDigraph,
    covers: &[CycleCover],
) -> FockPolynomial<C> {
    let mut acc = FockPolynomial::zero();
    for cover in covers {
        let mut weight = C::one();
        let mut labels = Vec::new();
        for &e in &cover.choice {
            let edge = &g.edges[e];
            weight = weight.mul(&weight_to_coeff::<C>(&edge.weight));
            labels.push(ModeLabel::internal(edge.dst, edge.color.spin()));
        }
        let monomial = Monomial::from_labels(&labels);
        acc.add_term(monomial, weight);
    }
    acc
}

/// Converts a z-basis logical state on system sites into occupation
/// bitstrings, dropping ancilla bookkeeping. Every monomial must be a
/// product of distinct single z-basis system modes.
pub fn logical_amplitudes<C: Coeff>(
    state: &FockPolynomial<C>,
    n: u32,
) -> Result<Vec<(Vec<u8>, C)>, EngineError> {
    let mut out = Vec::new();
    for (m, c) in state.sorted_terms() {
        let mut bits = vec![0u8; n as usize];
        let mut seen = 0u32;
        for (label, exp) in m.factors() {
            seen += exp as u32;
            match label {
                ModeLabel::Internal {
                    site: SiteId::Sys(j),
                    spin,
                } if exp == 1 => {
                    bits[(j - 1) as usize] = match spin {
                        Spin::Zero => 0,
                        Spin::One => 1,
                        _ => {
                            return Err(EngineError::Fock(FockError::BasisMismatch(
                                "logical readout requires the z basis".into(),
                            )))
                        }
                    };
                }
                _ => {
                    return Err(EngineError::Fock(FockError::BasisMismatch(format!(
                        "unexpected mode in logical state: {:?}",
                        label
                    ))))
                }
            }
        }
        if seen != n {
            return Err(EngineError::Fock(FockError::BasisMismatch(format!(
                "expected one boson per system site, found {} of {}",
                seen, n
            ))));
        }
        out.push((bits, c));
    }
    Ok(out)
}

/// `|<D_n^k|psi>|^2 / <psi|psi>` for a z-basis state on system sites.
pub fn fidelity_with_dicke<C: Coeff>(
    state: &FockPolynomial<C>,
    n: u32,
    k: u32,
) -> Result<C, EngineError> {
    let dicke = crate::fock::dicke_reference::<C>(n, k, DickeEncoding::InternalTag)?;
    let overlap = dicke.inner_product(state)?;
    let norm = state.inner_product(state)?;
    if norm.is_zero() {
        return Err(EngineError::VanishedState);
    }
    Ok(overlap
        .conj()
        .mul(&overlap)
        .mul(&norm.inv().expect("nonzero norm")))
}

/// Runs the whole scheme for the Dicke digraph and returns the final
/// z-basis state on the system sites.
pub fn sculpt_dicke_state<C: Coeff>(
    n: u32,
    k: u32,
    budget: usize,
) -> Result<FockPolynomial<C>, EngineError> {
    let g = SculptingDigraph::dicke(n, k)?;
    sculpt_graph_state(&g, budget)
}

/// Runs the scheme for any valid sculpting digraph.
pub fn sculpt_graph_state<C: Coeff>(
    g: &SculptingDigraph,
    budget: usize,
) -> Result<FockPolynomial<C>, EngineError> {
    let big = g.to_bigraph()?;
    let op = SculptingOperator::<C>::from_bigraph(&big)?;
    let ancillas: Vec<SiteId> = g
        .vertices
        .iter()
        .copied()
        .filter(|v| !matches!(v, SiteId::Sys(_)))
        .collect();
    let init = initial_state::<C>(g.n, &ancillas);
    let raw = apply_sculpting(&op, &init, budget)?;
    Ok(raw.change_internal_basis(InternalBasis::ZOne)?)
}
