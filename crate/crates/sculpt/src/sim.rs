//! Heralded photonic simulation: evolves the multi-photon input through a
//! compiled circuit, groups the result by detector patterns, fits
//! feed-forward corrections, and totals success probabilities.
//!
//! Two independent amplitude paths exist: polynomial evolution (the
//! workhorse) and matrix permanents over the total circuit unitary (the
//! oracle). Closed-form probability and amplitude expressions are kept in
//! exact rational/radical arithmetic.

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::{BigInt, One};
use thiserror::Error;

use crate::circuit::{apply_element, CircuitError, OpticalCircuit};
use crate::coeff::{big_ratio_f64, Coeff};
use crate::fock::{
    binomial, factorial, DickeEncoding, FockError, FockPolynomial, ModeLabel, Monomial, PathMode,
    ProductState,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("state expansion exceeded the term budget of {0}")]
    Budget(usize),
    #[error("heralded state vanished")]
    EmptyState,
}

/// Occupation vector over `circuit.detectors`, in that order.
pub type DetectorPattern = Vec<u8>;

/// Comparison tolerance on float-backend amplitudes.
pub const FLOAT_AMP_TOL: f64 = 1e-10;

/// Float-backend coefficients at or below this magnitude are cancellation
/// residue, orders below any desk-scale amplitude.
const NOISE_FLOOR: f64 = 1e-13;

fn coeff_eq<C: Coeff>(a: &C, b: &C) -> bool {
    if C::exact() {
        a == b
    } else {
        a.approx_eq(b, FLOAT_AMP_TOL)
    }
}

fn drop_noise<C: Coeff>(p: FockPolynomial<C>) -> FockPolynomial<C> {
    if C::exact() {
        return p;
    }
    let mut out = FockPolynomial::zero();
    for (m, c) in p.iter() {
        if c.to_c64().norm() > NOISE_FLOOR {
            out.add_term(m.clone(), c.clone());
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct FeedForward<C: Coeff> {
    /// Per qubit: exchange the two retained rails before reading.
    pub swaps: Vec<bool>,
    /// Per qubit: phase applied to the photon on the one-rail.
    pub phases: Vec<C>,
}

#[derive(Clone, Debug)]
pub struct HeraldOutcome<C: Coeff> {
    pub pattern: DetectorPattern,
    /// Unnormalized state on the output modes given this pattern.
    pub conditional_state: FockPolynomial<C>,
    /// Probability mass of the pattern restricted to dual-rail-valid terms.
    pub weight: C,
    /// Probability mass of the pattern over all terms.
    pub total_weight: C,
    /// Correction mapping the conditional state to the canonical target,
    /// when the state is fully dual-rail and such a correction exists.
    pub feedforward: Option<FeedForward<C>>,
}

impl<C: Coeff> HeraldOutcome<C> {
    /// A correction exists; the protocol additionally requires membership
    /// in the uniform-branch family before it counts a pattern as accepted.
    pub fn correctable(&self) -> bool {
        self.feedforward.is_some()
    }
}

/// The step-1 product: one photon per ancilla branch input and per rail.
pub fn circuit_input<C: Coeff>(c: &OpticalCircuit<C>) -> ProductState<C> {
    let mut factors = Vec::new();
    for j in 1..=c.n as u16 {
        factors.push(FockPolynomial::creation(ModeLabel::Path(PathMode::SBranch {
            j,
            s: 1,
        })));
    }
    for l in 1..=c.k as u16 {
        factors.push(FockPolynomial::creation(ModeLabel::Path(PathMode::TBranch {
            l,
            t: c.n as u16,
        })));
    }
    for m in 1..=c.n as u16 {
        let pair = FockPolynomial::creation(ModeLabel::Path(PathMode::Rail { m, r: 0, b: 0 }))
            .mul(&FockPolynomial::creation(ModeLabel::Path(PathMode::Rail {
                m,
                r: 1,
                b: 0,
            })));
        factors.push(pair);
    }
    ProductState {
        scalar: C::one(),
        factors,
    }
}

/// Factor-wise evolution through every layer with `step <= upto_step`.
/// Substitution distributes over products, so the factored form is exact.
pub fn evolve_product<C: Coeff>(
    c: &OpticalCircuit<C>,
    upto_step: u8,
    budget: usize,
) -> Result<ProductState<C>, SimError> {
    let mut state = circuit_input(c);
    for e in c.layers.iter().filter(|e| e.step <= upto_step) {
        let mut factors = Vec::with_capacity(state.factors.len());
        for f in &state.factors {
            let nf = apply_element(f, e, c)?;
            if nf.len() > budget {
                return Err(SimError::Budget(budget));
            }
            factors.push(nf);
        }
        state = ProductState {
            scalar: state.scalar,
            factors,
        };
    }
    Ok(state)
}

/// Whole-polynomial evolution through all layers (the flat route).
pub fn evolve<C: Coeff>(
    c: &OpticalCircuit<C>,
    input: &FockPolynomial<C>,
    budget: usize,
) -> Result<FockPolynomial<C>, SimError> {
    let mut state = input.clone();
    for e in &c.layers {
        state = apply_element(&state, e, c)?;
        if state.len() > budget {
            return Err(SimError::Budget(budget));
        }
    }
    Ok(state)
}

fn scalar_inv_2pow_nroot<C: Coeff>(two_exp: u32, n: u32, k: u32) -> C {
    // 1 / (2^two_exp * n^{k/2})
    let mut denom_sq: u64 = 1;
    for _ in 0..k {
        denom_sq *= n as u64;
    }
    C::from_ratio(1, 1 << two_exp).mul(&C::sqrt_ratio(1, denom_sq))
}

/// The state after path division (step 2), in product form: prefactor
/// 1/(2^n n^{k/2}), split ancilla branches, bunched rail pairs.
pub fn after_path_division<C: Coeff>(n: u32, k: u32, alpha: &C, beta: &C) -> ProductState<C> {
    let mut factors = Vec::new();
    for j in 1..=n as u16 {
        let mut f = FockPolynomial::zero();
        for s in 1..=k as u16 {
            f.add_term(
                Monomial::single(ModeLabel::Path(PathMode::SBranch { j, s }), 1),
                alpha.clone(),
            );
        }
        f.add_term(
            Monomial::single(
                ModeLabel::Path(PathMode::SBranch {
                    j,
                    s: (k + 1) as u16,
                }),
                1,
            ),
            beta.clone(),
        );
        factors.push(f);
    }
    for l in 1..=k as u16 {
        let mut f = FockPolynomial::zero();
        for t in 1..=n as u16 {
            f.add_term(
                Monomial::single(ModeLabel::Path(PathMode::TBranch { l, t }), 1),
                C::one(),
            );
        }
        factors.push(f);
    }
    for m in 1..=n as u16 {
        let mut f = FockPolynomial::zero();
        f.add_term(
            Monomial::single(ModeLabel::Path(PathMode::Rail { m, r: 0, b: 0 }), 2),
            C::one(),
        );
        f.add_term(
            Monomial::single(ModeLabel::Path(PathMode::Rail { m, r: 1, b: 0 }), 2),
            C::one().neg(),
        );
        factors.push(f);
    }
    ProductState {
        scalar: scalar_inv_2pow_nroot::<C>(n, n, k),
        factors,
    }
}

fn rail_label(m: u16, r: u8, b: u8) -> ModeLabel {
    ModeLabel::Path(PathMode::Rail { m, r, b })
}

fn split_rail_factor<C: Coeff>(m: u16, first: (ModeLabel, ModeLabel)) -> FockPolynomial<C> {
    // (first.0 + first.1)^2 - (a_{m10} - a_{m11})^2, expanded.
    let mut plus = FockPolynomial::zero();
    plus.add_term(Monomial::single(first.0, 1), C::one());
    plus.add_term(Monomial::single(first.1, 1), C::one());
    let mut minus = FockPolynomial::zero();
    minus.add_term(Monomial::single(rail_label(m, 1, 0), 1), C::one());
    minus.add_term(Monomial::single(rail_label(m, 1, 1), 1), C::one().neg());
    plus.mul(&plus).sub(&minus.mul(&minus))
}

/// The state after the rail beamsplitters (step 3): prefactor
/// 1/(2^{2n} n^{k/2}) and squared rail-branch combinations.
pub fn after_rail_splitting<C: Coeff>(n: u32, k: u32, alpha: &C, beta: &C) -> ProductState<C> {
    let mut ps = after_path_division::<C>(n, k, alpha, beta);
    ps.scalar = scalar_inv_2pow_nroot::<C>(2 * n, n, k);
    for m in 1..=n as u16 {
        let idx = (n + k) as usize + (m - 1) as usize;
        ps.factors[idx] = split_rail_factor::<C>(m, (rail_label(m, 0, 0), rail_label(m, 0, 1)));
    }
    ps
}

/// The state after the wire permutation (step 4): ancilla branches crossed
/// into the opposite groups, beta branches joined to the rail factors.
pub fn after_wire_permutation<C: Coeff>(n: u32, k: u32, alpha: &C, beta: &C) -> ProductState<C> {
    let mut factors = Vec::new();
    for j in 1..=n as u16 {
        let mut f = FockPolynomial::zero();
        for c in 1..=k as u16 {
            f.add_term(
                Monomial::single(ModeLabel::Path(PathMode::TBranch { l: c, t: j }), 1),
                alpha.clone(),
            );
        }
        f.add_term(Monomial::single(rail_label(j, 0, 1), 1), beta.clone());
        factors.push(f);
    }
    for l in 1..=k as u16 {
        let mut f = FockPolynomial::zero();
        for i in 1..=n as u16 {
            f.add_term(
                Monomial::single(ModeLabel::Path(PathMode::SBranch { j: i, s: l }), 1),
                C::one(),
            );
        }
        factors.push(f);
    }
    for m in 1..=n as u16 {
        factors.push(split_rail_factor::<C>(
            m,
            (
                rail_label(m, 0, 0),
                ModeLabel::Path(PathMode::SBranch {
                    j: m,
                    s: (k + 1) as u16,
                }),
            ),
        ));
    }
    ProductState {
        scalar: scalar_inv_2pow_nroot::<C>(2 * n, n, k),
        factors,
    }
}

fn path_of(label: ModeLabel) -> Option<PathMode> {
    match label {
        ModeLabel::Path(p) => Some(p),
        _ => None,
    }
}

fn occupation_split<C: Coeff>(
    c: &OpticalCircuit<C>,
    m: &Monomial,
) -> (DetectorPattern, Monomial) {
    let mut det = vec![0u8; c.detectors.len()];
    let mut rest = Monomial::unit();
    for (label, exp) in m.factors() {
        let p = path_of(label).expect("circuit states carry path labels");
        let id = c.mode_id(p);
        match c.detectors.binary_search(&id) {
            Ok(slot) => det[slot] += exp,
            Err(_) => rest = rest.mul_label(label, exp),
        }
    }
    (det, rest)
}

fn factorial_product(occ: &[u8]) -> u64 {
    occ.iter()
        .map(|&x| factorial(x as u32) as u64)
        .product()
}

fn monomial_factorial(m: &Monomial) -> u64 {
    m.factors()
        .map(|(_, exp)| factorial(exp as u32) as u64)
        .product()
}

/// One photon on exactly one retained rail per qubit; bit = which rail.
fn dual_rail_bits<C: Coeff>(n: u32, m: &Monomial) -> Option<Vec<u8>> {
    let mut bits = vec![u8::MAX; n as usize];
    let mut count = 0u32;
    for (label, exp) in m.factors() {
        if exp != 1 {
            return None;
        }
        let (q, bit) = match path_of(label)? {
            PathMode::Rail { m: q, r: 0, b: 0 } => (q, 0u8),
            PathMode::Rail { m: q, r: 1, b: 1 } => (q, 1u8),
            _ => return None,
        };
        let slot = bits.get_mut(q as usize - 1)?;
        if *slot != u8::MAX {
            return None;
        }
        *slot = bit;
        count += 1;
    }
    if count == n && bits.iter().all(|&b| b != u8::MAX) {
        Some(bits)
    } else {
        None
    }
}

/// Groups a fully evolved state by detector occupation. Every term lands
/// in exactly one pattern, so total weights sum to one by unitarity.
pub fn herald_from_state<C: Coeff>(
    c: &OpticalCircuit<C>,
    state: &FockPolynomial<C>,
) -> Vec<HeraldOutcome<C>> {
    let mut groups: BTreeMap<DetectorPattern, FockPolynomial<C>> = BTreeMap::new();
    for (m, coeff) in state.sorted_terms() {
        let (det, rest) = occupation_split(c, &m);
        groups.entry(det).or_insert_with(FockPolynomial::zero).add_term(rest, coeff);
    }
    groups
        .into_iter()
        .map(|(pattern, conditional)| finish_outcome(c, pattern, conditional))
        .collect()
}

fn finish_outcome<C: Coeff>(
    c: &OpticalCircuit<C>,
    pattern: DetectorPattern,
    conditional: FockPolynomial<C>,
) -> HeraldOutcome<C> {
    let conditional = drop_noise(conditional);
    let det_fact = C::from_int(factorial_product(&pattern) as i64);
    let mut total = C::zero();
    let mut valid = C::zero();
    let mut fully_valid = true;
    for (m, coeff) in conditional.iter() {
        let term = coeff
            .conj()
            .mul(coeff)
            .mul(&C::from_int(monomial_factorial(m) as i64));
        total = total.add(&term);
        if dual_rail_bits::<C>(c.n, m).is_some() {
            valid = valid.add(&term);
        } else {
            fully_valid = false;
        }
    }
    let total_weight = total.mul(&det_fact);
    let weight = valid.mul(&det_fact);
    let feedforward = if fully_valid && !conditional.is_zero() {
        fit_feedforward(&conditional, c.n, c.k)
    } else {
        None
    };
    HeraldOutcome {
        pattern,
        conditional_state: conditional,
        weight,
        total_weight,
        feedforward,
    }
}

/// Full heralding by complete expansion of the evolved product state.
pub fn herald_full<C: Coeff>(
    c: &OpticalCircuit<C>,
    budget: usize,
) -> Result<Vec<HeraldOutcome<C>>, SimError> {
    let product = evolve_product(c, 5, budget)?;
    let state = product.expand(budget).map_err(|e| match e {
        FockError::BudgetExceeded(b) => SimError::Budget(b),
        other => SimError::Fock(other),
    })?;
    Ok(herald_from_state(c, &state))
}

/// The symmetric detector-pattern family: all T photons at one position p,
/// all S photons on one branch q, one rail detection per pair.
pub fn candidate_patterns<C: Coeff>(c: &OpticalCircuit<C>) -> Vec<DetectorPattern> {
    let n = c.n;
    let k = c.k;
    let mut out = Vec::new();
    for p in 1..=n as u16 {
        for q in 1..=(k + 1) as u16 {
            for rails in 0..(1u32 << n) {
                let mut det = vec![0u8; c.detectors.len()];
                let mut mark = |pm: PathMode| {
                    let id = c.mode_id(pm);
                    let slot = c.detectors.binary_search(&id).unwrap();
                    det[slot] = 1;
                };
                for l in 1..=k as u16 {
                    mark(PathMode::TBranch { l, t: p });
                }
                for j in 1..=n as u16 {
                    mark(PathMode::SBranch { j, s: q });
                }
                for m in 1..=n as u16 {
                    let (r, b) = if rails >> (m - 1) & 1 == 0 { (0, 1) } else { (1, 0) };
                    mark(PathMode::Rail { m, r, b });
                }
                out.push(det);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// The phase-free member of the family: T position n, S branch k+1, all
/// rail detections on the (m,0,1) side.
pub fn canonical_pattern<C: Coeff>(c: &OpticalCircuit<C>) -> DetectorPattern {
    let mut det = vec![0u8; c.detectors.len()];
    let mut mark = |pm: PathMode| {
        let id = c.mode_id(pm);
        det[c.detectors.binary_search(&id).unwrap()] = 1;
    };
    for l in 1..=c.k as u16 {
        mark(PathMode::TBranch { l, t: c.n as u16 });
    }
    for j in 1..=c.n as u16 {
        mark(PathMode::SBranch {
            j,
            s: (c.k + 1) as u16,
        });
    }
    for m in 1..=c.n as u16 {
        mark(PathMode::Rail { m, r: 0, b: 1 });
    }
    det
}

/// Conditional state of one pattern by folding the evolved product with
/// early pruning: a partial product whose detector occupation anywhere
/// exceeds the pattern can never recover.
pub fn conditional_state_for_pattern<C: Coeff>(
    c: &OpticalCircuit<C>,
    product: &ProductState<C>,
    pattern: &DetectorPattern,
    budget: usize,
) -> Result<FockPolynomial<C>, SimError> {
    let prune = |poly: FockPolynomial<C>| -> FockPolynomial<C> {
        let mut kept = FockPolynomial::zero();
        'term: for (m, coeff) in poly.iter() {
            for (label, exp) in m.factors() {
                if let Some(p) = path_of(label) {
                    let id = c.mode_id(p);
                    if let Ok(slot) = c.detectors.binary_search(&id) {
                        if exp > pattern[slot] {
                            continue 'term;
                        }
                    }
                }
            }
            kept.add_term(m.clone(), coeff.clone());
        }
        kept
    };
    let mut acc = FockPolynomial::scalar(product.scalar.clone());
    for f in &product.factors {
        acc = prune(acc.mul(f));
        if acc.len() > budget {
            return Err(SimError::Budget(budget));
        }
    }
    let mut conditional = FockPolynomial::zero();
    for (m, coeff) in acc.iter() {
        let (det, rest) = occupation_split(c, m);
        if &det == pattern {
            conditional.add_term(rest, coeff.clone());
        }
    }
    Ok(conditional)
}

/// Heralding restricted to the candidate family, with per-pattern pruned
/// extraction; sound for totals because acceptance is verified per pattern.
pub fn herald_candidates<C: Coeff>(
    c: &OpticalCircuit<C>,
    budget: usize,
) -> Result<Vec<HeraldOutcome<C>>, SimError> {
    let product = evolve_product(c, 5, budget)?;
    let mut out = Vec::new();
    for pattern in candidate_patterns(c) {
        let conditional = conditional_state_for_pattern(c, &product, &pattern, budget)?;
        out.push(finish_outcome(c, pattern, conditional));
    }
    Ok(out)
}

/// Fits per-qubit rail swaps and one-rail phases turning the conditional
/// state into the canonical equal-amplitude target. The fit is exact:
/// candidate phases come from amplitude ratios and are then verified to be
/// unimodular and globally consistent.
pub fn fit_feedforward<C: Coeff>(
    conditional: &FockPolynomial<C>,
    n: u32,
    k: u32,
) -> Option<FeedForward<C>> {
    let mut amps: BTreeMap<Vec<u8>, C> = BTreeMap::new();
    for (m, coeff) in conditional.sorted_terms() {
        let bits = dual_rail_bits::<C>(n, &m)?;
        amps.insert(bits, coeff);
    }
    if amps.len() != binomial(n, k) as usize {
        return None;
    }
    'swaps: for sw in 0u32..(1 << n) {
        let swaps: Vec<bool> = (0..n).map(|i| sw >> i & 1 == 1).collect();
        let mut mapped: BTreeMap<Vec<u8>, C> = BTreeMap::new();
        for (bits, a) in &amps {
            let y: Vec<u8> = bits
                .iter()
                .zip(swaps.iter())
                .map(|(&b, &s)| if s { 1 - b } else { b })
                .collect();
            if y.iter().map(|&b| b as u32).sum::<u32>() != k {
                continue 'swaps;
            }
            mapped.insert(y, a.clone());
        }
        if mapped.len() != amps.len() {
            continue;
        }
        if let Some(phases) = fit_phases(&mapped, n, k) {
            return Some(FeedForward { swaps, phases });
        }
    }
    None
}

fn flip(base: &[u8], i: usize, j: usize) -> Vec<u8> {
    let mut y = base.to_vec();
    y[i] = 0;
    y[j] = 1;
    y
}

fn fit_phases<C: Coeff>(amps: &BTreeMap<Vec<u8>, C>, n: u32, k: u32) -> Option<Vec<C>> {
    let n = n as usize;
    let k = k as usize;
    let mut phases = vec![C::one(); n];
    if k < n && k > 0 {
        let mut base = vec![0u8; n];
        for b in base.iter_mut().take(k) {
            *b = 1;
        }
        let a_base = amps.get(&base)?.clone();
        // Moving the photon at slot 1 to slot j determines phi_j relative
        // to phi_1 = 1; moving slot i to a fixed outside slot ties the
        // remaining in-support phases back.
        for j in k..n {
            let a = amps.get(&flip(&base, 0, j))?;
            phases[j] = a_base.mul(&a.inv()?);
        }
        for i in 1..k {
            let a = amps.get(&flip(&base, i, k))?;
            phases[i] = phases[k].mul(&a.mul(&a_base.inv()?));
        }
    }
    for p in &phases {
        if !coeff_eq(&p.conj().mul(p), &C::one()) {
            return None;
        }
    }
    let mut target: Option<C> = None;
    for (bits, a) in amps {
        let mut corrected = a.clone();
        for (i, &b) in bits.iter().enumerate() {
            if b == 1 {
                corrected = corrected.mul(&phases[i]);
            }
        }
        match &target {
            None => target = Some(corrected),
            Some(t) => {
                if !coeff_eq(&corrected, t) {
                    return None;
                }
            }
        }
    }
    Some(phases)
}

/// Applies a feed-forward correction to a conditional state: rail swaps
/// relabel the two retained modes of a qubit, phases multiply one-rail
/// photons.
pub fn apply_feedforward<C: Coeff>(
    conditional: &FockPolynomial<C>,
    ff: &FeedForward<C>,
) -> FockPolynomial<C> {
    let n = ff.swaps.len();
    let mut out = FockPolynomial::zero();
    for (m, coeff) in conditional.sorted_terms() {
        let mut labels = Vec::new();
        let mut c = coeff.clone();
        for (label, exp) in m.factors() {
            let mut bit_and_qubit = None;
            if let Some(PathMode::Rail { m: q, r, b }) = path_of(label) {
                if r == 0 && b == 0 {
                    bit_and_qubit = Some((q, 0u8));
                } else if r == 1 && b == 1 {
                    bit_and_qubit = Some((q, 1u8));
                }
            }
            let (q, bit) = bit_and_qubit.expect("dual-rail conditional state");
            let idx = (q - 1) as usize;
            debug_assert!(idx < n && exp == 1);
            let bit = if ff.swaps[idx] { 1 - bit } else { bit };
            if bit == 1 {
                c = c.mul(&ff.phases[idx]);
                labels.push(rail_label(q, 1, 1));
            } else {
                labels.push(rail_label(q, 0, 0));
            }
        }
        out.add_term(Monomial::from_labels(&labels), c);
    }
    out
}

/// `|<D|psi>|^2 / <psi|psi>` against the dual-rail Dicke reference.
pub fn dual_rail_dicke_fidelity<C: Coeff>(
    state: &FockPolynomial<C>,
    n: u32,
    k: u32,
) -> Result<C, SimError> {
    let reference = crate::fock::dicke_reference::<C>(n, k, DickeEncoding::DualRail)?;
    let overlap = reference.inner_product(state)?;
    let norm = state.inner_product(state)?;
    let inv = norm.inv().ok_or(SimError::EmptyState)?;
    Ok(overlap.conj().mul(&overlap).mul(&inv))
}

/// Closed-form canonical-pattern amplitude
/// `C(n,k)^{1/2} k!^2 beta^{n-k} alpha^k / (2^{3n/2} n^k (k+1)^{n/2})`.
pub fn canonical_amplitude<C: Coeff>(n: u32, k: u32, alpha: &C, beta: &C) -> C {
    let kf = factorial(k) as i64;
    let mut nk: i64 = 1;
    for _ in 0..k {
        nk *= n as i64;
    }
    let mut eight_n: u64 = 1;
    let mut k1_n: u64 = 1;
    for _ in 0..n {
        eight_n *= 8;
        k1_n *= (k + 1) as u64;
    }
    C::sqrt_ratio(binomial(n, k) as u64, 1)
        .mul(&C::from_int(kf * kf))
        .mul(&beta.pow_u(n - k))
        .mul(&alpha.pow_u(k))
        .mul(&C::sqrt_ratio(1, eight_n))
        .mul(&C::from_ratio(1, nk))
        .mul(&C::sqrt_ratio(1, k1_n))
}

fn big_pow(base: u64, exp: u32) -> BigInt {
    let mut acc = BigInt::one();
    for _ in 0..exp {
        acc *= BigInt::from(base);
    }
    acc
}

/// `P_suc = C(n,k) (k!)^4 (n-k)^{n-k} / (2^{2n} n^{n+2k-1} (k+1)^{n-1})`
/// as an exact rational; `0^0 = 1` covers the k = n end.
pub fn success_probability_closed_form(n: u32, k: u32) -> BigRational {
    let mut numer = BigInt::from(binomial(n, k));
    let kf = BigInt::from(factorial(k));
    numer *= kf.clone() * kf.clone() * kf.clone() * kf;
    numer *= big_pow((n - k) as u64, n - k);
    let mut denom = big_pow(2, 2 * n);
    denom *= big_pow(n as u64, n + 2 * k - 1);
    denom *= big_pow((k + 1) as u64, n - 1);
    BigRational::new(numer, denom)
}

/// The probability-maximizing splitting weights `(1/sqrt(n), sqrt((n-k)/n))`.
pub fn optimal_splitting<C: Coeff>(n: u32, k: u32) -> (C, C) {
    (
        C::sqrt_ratio(1, n as u64),
        C::sqrt_ratio((n - k) as u64, n as u64),
    )
}

/// Grid search plus ternary refinement of `beta^{n-k} alpha^k` under the
/// splitting constraint; the independent check on the closed-form optimum.
pub fn maximize_splitting_numeric(n: u32, k: u32) -> (f64, f64) {
    let kf = k as f64;
    let objective = |alpha: f64| -> f64 {
        let beta_sq = 1.0 - kf * alpha * alpha;
        if beta_sq < 0.0 {
            return -1.0;
        }
        beta_sq.sqrt().powi((n - k) as i32) * alpha.powi(k as i32)
    };
    let hi = 1.0 / kf.sqrt();
    let mut best = (0.0, 0.0);
    let grid = 20_000;
    for i in 1..grid {
        let a = hi * i as f64 / grid as f64;
        let v = objective(a);
        if v > best.1 {
            best = (a, v);
        }
    }
    let (mut lo, mut up) = (best.0 - hi / grid as f64, best.0 + hi / grid as f64);
    for _ in 0..200 {
        let m1 = lo + (up - lo) / 3.0;
        let m2 = up - (up - lo) / 3.0;
        if objective(m1) < objective(m2) {
            lo = m1;
        } else {
            up = m2;
        }
    }
    let alpha = 0.5 * (lo + up);
    (alpha, (1.0 - kf * alpha * alpha).sqrt())
}

/// Permanent by Ryser's inclusion-exclusion with Gray-code subset updates.
pub fn permanent<C: Coeff>(m: &[Vec<C>]) -> C {
    let d = m.len();
    assert!(m.iter().all(|r| r.len() == d), "square matrix required");
    assert!(d <= 20, "permanent guard: dimension too large");
    if d == 0 {
        return C::one();
    }
    let mut row_sums = vec![C::zero(); d];
    let mut total = C::zero();
    let mut prev_gray = 0u32;
    for g in 1u32..(1 << d) {
        let gray = g ^ (g >> 1);
        let changed = gray ^ prev_gray;
        let j = changed.trailing_zeros() as usize;
        if gray & changed != 0 {
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs = rs.add(&m[i][j]);
            }
        } else {
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs = rs.sub(&m[i][j]);
            }
        }
        prev_gray = gray;
        let mut prod = C::one();
        for rs in &row_sums {
            prod = prod.mul(rs);
        }
        let sign_bits = d as u32 - gray.count_ones();
        if sign_bits % 2 == 1 {
            prod = prod.neg();
        }
        total = total.add(&prod);
    }
    total
}

/// Reference permanent by direct permutation expansion.
pub fn permanent_naive<C: Coeff>(m: &[Vec<C>]) -> C {
    let d = m.len();
    assert!(d <= 9, "naive permanent is factorial-time");
    let mut used = vec![false; d];
    fn rec<C: Coeff>(m: &[Vec<C>], row: usize, used: &mut [bool], acc: &C) -> C {
        if row == m.len() {
            return acc.clone();
        }
        let mut sum = C::zero();
        for j in 0..m.len() {
            if !used[j] && !m[row][j].is_zero() {
                used[j] = true;
                let next = acc.mul(&m[row][j]);
                sum = sum.add(&rec(m, row + 1, used, &next));
                used[j] = false;
            }
        }
        sum
    }
    rec(m, 0, &mut used, &C::one())
}

/// Transition amplitude through the total circuit unitary:
/// `per(U[rows=outputs; cols=inputs]) / sqrt(prod in! prod out!)`.
pub fn amplitude_by_permanent<C: Coeff>(
    u: &[Vec<C>],
    input_occ: &[u8],
    output_occ: &[u8],
) -> C {
    let photons_in: u32 = input_occ.iter().map(|&x| x as u32).sum();
    let photons_out: u32 = output_occ.iter().map(|&x| x as u32).sum();
    assert_eq!(photons_in, photons_out, "photon number must match");
    let mut rows = Vec::new();
    for (p, &occ) in output_occ.iter().enumerate() {
        for _ in 0..occ {
            rows.push(p);
        }
    }
    let mut cols = Vec::new();
    for (q, &occ) in input_occ.iter().enumerate() {
        for _ in 0..occ {
            cols.push(q);
        }
    }
    let sub: Vec<Vec<C>> = rows
        .iter()
        .map(|&p| cols.iter().map(|&q| u[p][q].clone()).collect())
        .collect();
    let norm: u64 = input_occ
        .iter()
        .chain(output_occ.iter())
        .map(|&x| factorial(x as u32) as u64)
        .product();
    permanent(&sub).mul(&C::sqrt_ratio(1, norm))
}

#[derive(Clone, Debug)]
pub struct SimulationSummary<C: Coeff> {
    /// Total probability of accepted patterns: uniform-branch family
    /// members whose correction was verified.
    pub p_success: C,
    pub accepted_count: usize,
    pub canonical_amplitude_sq: C,
    pub min_accepted_fidelity: C,
    /// Sum of all pattern weights when the full expansion ran.
    pub completeness: Option<C>,
    /// Correctable patterns outside the uniform-branch family, found only
    /// by full enumeration. The closed form counts the family, so these
    /// are reported rather than folded into the success probability.
    pub extra_correctable_count: Option<usize>,
    pub extra_correctable_weight: Option<C>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeraldStrategy {
    Full,
    Candidates,
    Auto,
}

/// Heralding under the chosen strategy; the flag says whether the pattern
/// list is exhaustive (full expansion) or the candidate family only.
pub fn herald_outcomes<C: Coeff>(
    c: &OpticalCircuit<C>,
    strategy: HeraldStrategy,
    budget: usize,
) -> Result<(Vec<HeraldOutcome<C>>, bool), SimError> {
    let full = match strategy {
        HeraldStrategy::Full => true,
        HeraldStrategy::Candidates => false,
        HeraldStrategy::Auto => c.n as u64 * c.k as u64 <= 3,
    };
    let outcomes = if full {
        herald_full(c, budget)?
    } else {
        herald_candidates(c, budget)?
    };
    Ok((outcomes, full))
}

/// Totals accepted-pattern probabilities over heralding outcomes.
pub fn summarize_outcomes<C: Coeff>(
    c: &OpticalCircuit<C>,
    outcomes: &[HeraldOutcome<C>],
    full: bool,
) -> Result<SimulationSummary<C>, SimError> {
    let completeness = if full {
        let mut acc = C::zero();
        for o in outcomes {
            acc = acc.add(&o.total_weight);
        }
        Some(acc)
    } else {
        None
    };
    let canonical = canonical_pattern(c);
    let family: std::collections::BTreeSet<DetectorPattern> =
        candidate_patterns(c).into_iter().collect();
    let mut p = C::zero();
    let mut accepted = 0usize;
    let mut extra_count = 0usize;
    let mut extra_weight = C::zero();
    let mut canonical_sq = C::zero();
    let mut min_fid = C::one();
    for o in outcomes {
        if o.pattern == canonical {
            canonical_sq = o.total_weight.clone();
        }
        if let Some(ff) = &o.feedforward {
            if family.contains(&o.pattern) {
                accepted += 1;
                p = p.add(&o.weight);
            } else {
                extra_count += 1;
                extra_weight = extra_weight.add(&o.weight);
            }
            let corrected = apply_feedforward(&o.conditional_state, ff);
            let fid = dual_rail_dicke_fidelity(&corrected, c.n, c.k)?;
            if fid.to_c64().re < min_fid.to_c64().re {
                min_fid = fid;
            }
        }
    }
    Ok(SimulationSummary {
        p_success: p,
        accepted_count: accepted,
        canonical_amplitude_sq: canonical_sq,
        min_accepted_fidelity: min_fid,
        completeness,
        extra_correctable_count: if full { Some(extra_count) } else { None },
        extra_correctable_weight: if full { Some(extra_weight) } else { None },
    })
}

/// Runs heralding and totals accepted-pattern probabilities. `Auto` uses
/// the full expansion where it is desk-feasible and the candidate family
/// beyond that.
pub fn simulate_scheme<C: Coeff>(
    c: &OpticalCircuit<C>,
    strategy: HeraldStrategy,
    budget: usize,
) -> Result<SimulationSummary<C>, SimError> {
    let (outcomes, full) = herald_outcomes(c, strategy, budget)?;
    summarize_outcomes(c, &outcomes, full)
}

/// Closed form as f64, for reports at sizes where the rational is huge.
pub fn closed_form_f64(n: u32, k: u32) -> f64 {
    big_ratio_f64(&success_probability_closed_form(n, k))
}
