//! Linear-optical circuit compiler: turns the Dicke scheme parameters into
//! a five-step interferometer over single-rail ancilla branches and
//! dual-rail system qubits, with detector and output assignments.
//!
//! Conventions. Beamsplitters are the real Hadamard `[[1,1],[1,-1]]/sqrt(2)`;
//! symmetric d-ports install the DFT `(U_d)_{pq} = w^{pq}/sqrt(d)` with
//! 1-based p, q; asymmetric ports are Householder completions of the
//! splitting column `(alpha,...,alpha,beta)^T`. A matrix acts on creation
//! operators by columns: `a†_{modes[q]} -> sum_p M[p][q] a†_{modes[p]}`.

use std::fmt::Write as _;

use serde_json::{json, Value};
use thiserror::Error;

use crate::coeff::Coeff;
use crate::fock::{FockPolynomial, ModeLabel, PathMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    BeamSplitter,
    SymmetricMultiport,
    AsymmetricMultiport,
    Permutation,
    PhaseShift,
}

impl ElementKind {
    fn name(self) -> &'static str {
        match self {
            ElementKind::BeamSplitter => "beam_splitter",
            ElementKind::SymmetricMultiport => "symmetric_multiport",
            ElementKind::AsymmetricMultiport => "asymmetric_multiport",
            ElementKind::Permutation => "permutation",
            ElementKind::PhaseShift => "phase_shift",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CircuitMode {
    pub id: usize,
    pub origin: PathMode,
}

#[derive(Clone, Debug)]
pub struct CircuitElement<C: Coeff> {
    pub step: u8,
    pub kind: ElementKind,
    pub modes: Vec<usize>,
    pub matrix: Vec<Vec<C>>,
}

#[derive(Clone, Debug)]
pub struct OpticalCircuit<C: Coeff> {
    pub n: u32,
    pub k: u32,
    pub alpha: C,
    pub beta: C,
    pub modes: Vec<CircuitMode>,
    pub layers: Vec<CircuitElement<C>>,
    pub detectors: Vec<usize>,
    pub outputs: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("invalid parameters n={n}, k={k}: need 1 <= k <= n-1")]
    InvalidParams { n: u32, k: u32 },
    #[error("splitting constraint k*alpha^2 + beta^2 = 1 violated")]
    ConstraintViolated,
    #[error("backend has no exact root of unity of order {order}")]
    ExactPhasesUnavailable { order: u32 },
    #[error("element matrix shape does not match its mode list")]
    DimensionMismatch,
    #[error("state references a mode outside the circuit")]
    UnknownMode,
}

/// Dense mode id for the D_n^k layout: rail pairs first, then S branches,
/// then T branches.
pub fn mode_index(n: u32, k: u32, p: PathMode) -> usize {
    let (n, k) = (n as usize, k as usize);
    match p {
        PathMode::Rail { m, r, b } => 4 * (m as usize - 1) + 2 * r as usize + b as usize,
        PathMode::SBranch { j, s } => 4 * n + (k + 1) * (j as usize - 1) + (s as usize - 1),
        PathMode::TBranch { l, t } => {
            4 * n + n * (k + 1) + n * (l as usize - 1) + (t as usize - 1)
        }
    }
}

pub fn mode_count(n: u32, k: u32) -> usize {
    (5 * n + 2 * n * k) as usize
}

fn rail(m: u32, r: u8, b: u8) -> PathMode {
    PathMode::Rail { m: m as u16, r, b }
}

fn sbr(j: u32, s: u32) -> PathMode {
    PathMode::SBranch {
        j: j as u16,
        s: s as u16,
    }
}

fn tbr(l: u32, t: u32) -> PathMode {
    PathMode::TBranch {
        l: l as u16,
        t: t as u16,
    }
}

pub fn beamsplitter_matrix<C: Coeff>() -> Vec<Vec<C>> {
    let h = C::sqrt_ratio(1, 2);
    vec![vec![h.clone(), h.clone()], vec![h.clone(), h.neg()]]
}

pub fn dft_matrix<C: Coeff>(d: u32) -> Result<Vec<Vec<C>>, CircuitError> {
    let scale = C::sqrt_ratio(1, d as u64);
    let mut m = Vec::with_capacity(d as usize);
    for p in 1..=d {
        let mut row = Vec::with_capacity(d as usize);
        for q in 1..=d {
            let w = C::root_of_unity(d, (p * q) as i64)
                .ok_or(CircuitError::ExactPhasesUnavailable { order: d })?;
            row.push(w.mul(&scale));
        }
        m.push(row);
    }
    Ok(m)
}

/// Unitary completion of the real splitting column `(alpha,..,alpha,beta)`
/// in the first slot: the Householder reflection carrying `e_1` onto the
/// column (identity when they already coincide).
pub fn asymmetric_matrix<C: Coeff>(k: u32, alpha: &C, beta: &C) -> Vec<Vec<C>> {
    let d = (k + 1) as usize;
    let mut col = vec![alpha.clone(); d - 1];
    col.push(beta.clone());
    let mut v = col;
    v[0] = v[0].sub(&C::one());
    let mut s = C::zero();
    for x in &v {
        s = s.add(&x.mul(x));
    }
    let mut m = vec![vec![C::zero(); d]; d];
    if s.is_zero() {
        for (p, row) in m.iter_mut().enumerate() {
            row[p] = C::one();
        }
        return m;
    }
    let two_over_s = C::from_int(2).mul(&s.inv().expect("nonzero reflection norm"));
    for p in 0..d {
        for q in 0..d {
            let outer = v[p].mul(&v[q]).mul(&two_over_s);
            m[p][q] = if p == q { C::one().sub(&outer) } else { outer.neg() };
        }
    }
    m
}

/// The step-4 wire bijection as (from, to) pairs over the moved modes:
/// S branch s<=k crosses to T_s slot j, T branch t crosses to S_t slot l,
/// and each pair's beta branch trades places with rail (m,0,1).
pub fn wire_permutation(n: u32, k: u32) -> Vec<(PathMode, PathMode)> {
    let mut map = Vec::new();
    for j in 1..=n {
        for s in 1..=k {
            map.push((sbr(j, s), tbr(s, j)));
        }
    }
    for l in 1..=k {
        for t in 1..=n {
            map.push((tbr(l, t), sbr(t, l)));
        }
    }
    for m in 1..=n {
        map.push((rail(m, 0, 1), sbr(m, k + 1)));
        map.push((sbr(m, k + 1), rail(m, 0, 1)));
    }
    map
}

pub fn compile<C: Coeff>(
    n: u32,
    k: u32,
    alpha: &C,
    beta: &C,
) -> Result<OpticalCircuit<C>, CircuitError> {
    if n < 2 || k < 1 || k > n - 1 {
        return Err(CircuitError::InvalidParams { n, k });
    }
    let constraint = C::from_int(k as i64)
        .mul(&alpha.mul(alpha))
        .add(&beta.mul(beta));
    let constraint_ok = if C::exact() {
        constraint == C::one()
    } else {
        constraint.approx_eq(&C::one(), 1e-12)
    };
    if !constraint_ok {
        return Err(CircuitError::ConstraintViolated);
    }

    let mut modes = Vec::with_capacity(mode_count(n, k));
    for m in 1..=n {
        for r in 0..=1u8 {
            for b in 0..=1u8 {
                modes.push(rail(m, r, b));
            }
        }
    }
    for j in 1..=n {
        for s in 1..=k + 1 {
            modes.push(sbr(j, s));
        }
    }
    for l in 1..=k {
        for t in 1..=n {
            modes.push(tbr(l, t));
        }
    }
    let modes: Vec<CircuitMode> = modes
        .into_iter()
        .enumerate()
        .map(|(id, origin)| {
            debug_assert_eq!(mode_index(n, k, origin), id);
            CircuitMode { id, origin }
        })
        .collect();
    let id = |p: PathMode| mode_index(n, k, p);

    let mut layers: Vec<CircuitElement<C>> = Vec::new();
    let bs = beamsplitter_matrix::<C>();
    let u_n = dft_matrix::<C>(n)?;
    let u_k1 = dft_matrix::<C>(k + 1)?;
    let asym = asymmetric_matrix::<C>(k, alpha, beta);

    for m in 1..=n {
        layers.push(CircuitElement {
            step: 2,
            kind: ElementKind::BeamSplitter,
            modes: vec![id(rail(m, 0, 0)), id(rail(m, 1, 0))],
            matrix: bs.clone(),
        });
    }
    for j in 1..=n {
        layers.push(CircuitElement {
            step: 2,
            kind: ElementKind::AsymmetricMultiport,
            modes: (1..=k + 1).map(|s| id(sbr(j, s))).collect(),
            matrix: asym.clone(),
        });
    }
    for l in 1..=k {
        layers.push(CircuitElement {
            step: 2,
            kind: ElementKind::SymmetricMultiport,
            modes: (1..=n).map(|t| id(tbr(l, t))).collect(),
            matrix: u_n.clone(),
        });
    }

    for m in 1..=n {
        layers.push(CircuitElement {
            step: 3,
            kind: ElementKind::BeamSplitter,
            modes: vec![id(rail(m, 0, 0)), id(rail(m, 0, 1))],
            matrix: bs.clone(),
        });
        // Listing the sigma'=1 branch first sends the populated rail to
        // the minus combination; the squared pair factor absorbs the
        // overall sign, reproducing the step-3 state exactly.
        layers.push(CircuitElement {
            step: 3,
            kind: ElementKind::BeamSplitter,
            modes: vec![id(rail(m, 1, 1)), id(rail(m, 1, 0))],
            matrix: bs.clone(),
        });
    }

    let moved: Vec<(usize, usize)> = wire_permutation(n, k)
        .into_iter()
        .map(|(from, to)| (id(from), id(to)))
        .collect();
    let mut perm_modes: Vec<usize> = moved.iter().map(|&(f, _)| f).collect();
    perm_modes.sort_unstable();
    let d = perm_modes.len();
    let mut perm_matrix = vec![vec![C::zero(); d]; d];
    for &(from, to) in &moved {
        let q = perm_modes.binary_search(&from).unwrap();
        let p = perm_modes.binary_search(&to).unwrap();
        perm_matrix[p][q] = C::one();
    }
    layers.push(CircuitElement {
        step: 4,
        kind: ElementKind::Permutation,
        modes: perm_modes,
        matrix: perm_matrix,
    });

    for l in 1..=k {
        layers.push(CircuitElement {
            step: 5,
            kind: ElementKind::SymmetricMultiport,
            modes: (1..=n).map(|t| id(tbr(l, t))).collect(),
            matrix: u_n.clone(),
        });
    }
    for j in 1..=n {
        layers.push(CircuitElement {
            step: 5,
            kind: ElementKind::SymmetricMultiport,
            modes: (1..=k + 1).map(|s| id(sbr(j, s))).collect(),
            matrix: u_k1.clone(),
        });
    }
    for m in 1..=n {
        layers.push(CircuitElement {
            step: 5,
            kind: ElementKind::BeamSplitter,
            modes: vec![id(rail(m, 0, 1)), id(rail(m, 1, 0))],
            matrix: bs.clone(),
        });
    }

    let mut detectors: Vec<usize> = Vec::new();
    for j in 1..=n {
        for s in 1..=k + 1 {
            detectors.push(id(sbr(j, s)));
        }
    }
    for l in 1..=k {
        for t in 1..=n {
            detectors.push(id(tbr(l, t)));
        }
    }
    for m in 1..=n {
        detectors.push(id(rail(m, 0, 1)));
        detectors.push(id(rail(m, 1, 0)));
    }
    detectors.sort_unstable();
    let mut outputs: Vec<usize> = (1..=n)
        .flat_map(|m| [id(rail(m, 0, 0)), id(rail(m, 1, 1))])
        .collect();
    outputs.sort_unstable();

    Ok(OpticalCircuit {
        n,
        k,
        alpha: alpha.clone(),
        beta: beta.clone(),
        modes,
        layers,
        detectors,
        outputs,
    })
}

impl<C: Coeff> OpticalCircuit<C> {
    pub fn mode_id(&self, p: PathMode) -> usize {
        mode_index(self.n, self.k, p)
    }

    /// Modes carrying one photon each in the step-1 input assignment.
    pub fn input_modes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (1..=self.n).map(|j| self.mode_id(sbr(j, 1))).collect();
        v.extend((1..=self.k).map(|l| self.mode_id(tbr(l, self.n))));
        for m in 1..=self.n {
            v.push(self.mode_id(rail(m, 0, 0)));
            v.push(self.mode_id(rail(m, 1, 0)));
        }
        v
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "k": self.k,
            "alpha": self.alpha.to_c64().re,
            "beta": self.beta.to_c64().re,
            "modes": self.modes.iter().map(|m| json!({
                "id": m.id,
                "origin": origin_name(m.origin),
            })).collect::<Vec<_>>(),
            "layers": self.layers.iter().map(|e| json!({
                "step": e.step,
                "kind": e.kind.name(),
                "modes": e.modes,
                "matrix": e.matrix.iter().map(|row| row.iter().map(|c| {
                    let z = c.to_c64();
                    json!({"re": z.re, "im": z.im})
                }).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "detectors": self.detectors,
            "outputs": self.outputs,
        })
    }

    /// Schematic: one horizontal line per mode, element boxes per step.
    pub fn to_svg(&self) -> String {
        let row_h = 16;
        let step_w = 150;
        let left = 120;
        let width = left + 4 * step_w + 120;
        let height = (self.modes.len() + 2) * row_h + 40;
        let mode_y = |id: usize| 30 + id * row_h;
        let step_x = |step: u8| left + (step as usize - 2) * step_w + 30;
        let mut s = String::new();
        let _ = write!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" \
             font-family=\"monospace\" font-size=\"10\">\n",
            width, height
        );
        let _ = writeln!(
            s,
            "<text x=\"10\" y=\"16\">D_{}^{} circuit, {} modes</text>",
            self.n,
            self.k,
            self.modes.len()
        );
        for m in &self.modes {
            let y = mode_y(m.id);
            let _ = writeln!(
                s,
                "<text x=\"4\" y=\"{}\">{}</text><line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888\"/>",
                y + 4,
                origin_name(m.origin),
                left,
                y,
                width - 90,
                y
            );
        }
        for e in &self.layers {
            let ys: Vec<usize> = e.modes.iter().map(|&m| mode_y(m)).collect();
            let (top, bot) = (
                *ys.iter().min().unwrap() - 6,
                *ys.iter().max().unwrap() + 6,
            );
            let x = step_x(e.step);
            let tag = match e.kind {
                ElementKind::BeamSplitter => "BS",
                ElementKind::SymmetricMultiport => "DFT",
                ElementKind::AsymmetricMultiport => "ASYM",
                ElementKind::Permutation => "PERM",
                ElementKind::PhaseShift => "PHI",
            };
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"42\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\
                 <text x=\"{}\" y=\"{}\">{}</text>",
                x,
                top,
                bot - top,
                x + 4,
                top + 12,
                tag
            );
        }
        for &d in &self.detectors {
            let y = mode_y(d);
            let _ = writeln!(
                s,
                "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#c33\"/>",
                width - 80,
                y
            );
        }
        for &o in &self.outputs {
            let y = mode_y(o);
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\">out</text>",
                width - 70,
                y + 4
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

pub fn origin_name(p: PathMode) -> String {
    match p {
        PathMode::Rail { m, r, b } => format!("rail_{}_{}_{}", m, r, b),
        PathMode::SBranch { j, s } => format!("s_{}_{}", j, s),
        PathMode::TBranch { l, t } => format!("t_{}_{}", l, t),
    }
}

/// One element applied to a state polynomial by simultaneous substitution
/// `a†_{modes[q]} -> sum_p M[p][q] a†_{modes[p]}`.
pub fn apply_element<C: Coeff>(
    state: &FockPolynomial<C>,
    e: &CircuitElement<C>,
    circuit: &OpticalCircuit<C>,
) -> Result<FockPolynomial<C>, CircuitError> {
    let d = e.modes.len();
    if e.matrix.len() != d || e.matrix.iter().any(|r| r.len() != d) {
        return Err(CircuitError::DimensionMismatch);
    }
    let origin = |id: usize| -> Result<PathMode, CircuitError> {
        circuit
            .modes
            .get(id)
            .map(|m| m.origin)
            .ok_or(CircuitError::UnknownMode)
    };
    let mut subs = Vec::with_capacity(d);
    for q in 0..d {
        let src = ModeLabel::Path(origin(e.modes[q])?);
        let mut form = Vec::with_capacity(d);
        for p in 0..d {
            if !e.matrix[p][q].is_zero() {
                form.push((ModeLabel::Path(origin(e.modes[p])?), e.matrix[p][q].clone()));
            }
        }
        subs.push((src, form));
    }
    Ok(state.substitute_many(&subs))
}

/// Ordered product of the element matrices embedded in the M-mode
/// identity; `column q` is the image of `a†_q`.
pub fn circuit_unitary<C: Coeff>(c: &OpticalCircuit<C>) -> Vec<Vec<C>> {
    let m = c.modes.len();
    let mut u: Vec<Vec<C>> = (0..m)
        .map(|p| {
            (0..m)
                .map(|q| if p == q { C::one() } else { C::zero() })
                .collect()
        })
        .collect();
    for e in &c.layers {
        let d = e.modes.len();
        let old: Vec<Vec<C>> = e.modes.iter().map(|&p| u[p].clone()).collect();
        for p in 0..d {
            let mut row = vec![C::zero(); m];
            for q in 0..d {
                let w = &e.matrix[p][q];
                if w.is_zero() {
                    continue;
                }
                for (slot, val) in row.iter_mut().zip(old[q].iter()) {
                    *slot = slot.add(&w.mul(val));
                }
            }
            u[e.modes[p]] = row;
        }
    }
    u
}

/// Largest |(U†U - I)_{pq}| in double precision.
pub fn unitarity_defect<C: Coeff>(u: &[Vec<C>]) -> f64 {
    let m = u.len();
    let mut worst: f64 = 0.0;
    for p in 0..m {
        for q in 0..m {
            let mut acc = num::complex::Complex::new(0.0, 0.0);
            for row in u {
                acc += row[p].to_c64().conj() * row[q].to_c64();
            }
            let target = if p == q { 1.0 } else { 0.0 };
            worst = worst.max((acc - target).norm());
        }
    }
    worst
}

/// Exact check that U†U is the identity.
pub fn is_unitary_exact<C: Coeff>(u: &[Vec<C>]) -> bool {
    let m = u.len();
    for p in 0..m {
        for q in 0..m {
            let mut acc = C::zero();
            for row in u {
                acc = acc.add(&row[p].conj().mul(&row[q]));
            }
            let target = if p == q { C::one() } else { C::zero() };
            if acc != target {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{Exact, C64};
    use crate::fock::Monomial;

    fn optimal_exact(n: u32, k: u32) -> (Exact, Exact) {
        (
            Exact::sqrt_ratio(1, n as u64),
            Exact::sqrt_ratio((n - k) as u64, n as u64),
        )
    }

    fn creations<C: Coeff>(paths: &[PathMode]) -> FockPolynomial<C> {
        let labels: Vec<ModeLabel> = paths.iter().map(|&p| ModeLabel::Path(p)).collect();
        FockPolynomial::from_term(Monomial::from_labels(&labels), C::one())
    }

    #[test]
    fn mode_layout_and_counts() {
        for (n, k) in [(2u32, 1u32), (3, 1), (3, 2), (4, 2)] {
            let (a, b) = optimal_exact(n, k);
            let c = compile::<Exact>(n, k, &a, &b).unwrap();
            assert_eq!(c.modes.len(), mode_count(n, k));
            assert_eq!(c.input_modes().len(), (3 * n + k) as usize);
            assert_eq!(c.detectors.len(), (2 * n * k + 3 * n) as usize);
            assert_eq!(c.outputs.len(), (2 * n) as usize);
            for (i, m) in c.modes.iter().enumerate() {
                assert_eq!(m.id, i);
            }
            let mut all: Vec<usize> = c
                .detectors
                .iter()
                .chain(c.outputs.iter())
                .copied()
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..c.modes.len()).collect::<Vec<_>>());
        }
        let c42 = {
            let (a, b) = optimal_exact(4, 2);
            compile::<Exact>(4, 2, &a, &b).unwrap()
        };
        assert_eq!(c42.modes.len(), 36);
        assert_eq!(c42.layers.len(), 29);
        let steps: Vec<usize> = (2u8..=5)
            .map(|s| c42.layers.iter().filter(|e| e.step == s).count())
            .collect();
        assert_eq!(steps, vec![10, 8, 1, 10]);
    }

    #[test]
    fn compile_rejects_bad_parameters() {
        let (a, b) = optimal_exact(2, 1);
        assert!(matches!(
            compile::<Exact>(1, 1, &a, &b),
            Err(CircuitError::InvalidParams { .. })
        ));
        assert!(matches!(
            compile::<Exact>(4, 4, &a, &b),
            Err(CircuitError::InvalidParams { .. })
        ));
        assert!(matches!(
            compile::<Exact>(4, 2, &Exact::from_ratio(9, 10), &Exact::from_ratio(9, 10)),
            Err(CircuitError::ConstraintViolated)
        ));
        // Exact fifth roots of unity are outside the coefficient ring.
        let (a5, b5) = optimal_exact(5, 2);
        assert!(matches!(
            compile::<Exact>(5, 2, &a5, &b5),
            Err(CircuitError::ExactPhasesUnavailable { order: 5 })
        ));
        let c5 = compile::<C64>(
            5,
            2,
            &C64::sqrt_ratio(1, 5),
            &C64::sqrt_ratio(3, 5),
        )
        .unwrap();
        assert_eq!(c5.modes.len(), mode_count(5, 2));
    }

    #[test]
    fn element_matrices_are_unitary() {
        let (a, b) = optimal_exact(4, 2);
        let c = compile::<Exact>(4, 2, &a, &b).unwrap();
        for e in &c.layers {
            assert!(is_unitary_exact(&e.matrix), "{:?} step {}", e.kind, e.step);
        }
    }

    #[test]
    fn total_unitary_is_exact() {
        for (n, k) in [(2u32, 1u32), (3, 2)] {
            let (a, b) = optimal_exact(n, k);
            let c = compile::<Exact>(n, k, &a, &b).unwrap();
            let u = circuit_unitary(&c);
            assert!(is_unitary_exact(&u));
            assert!(unitarity_defect(&u) < 1e-12);
        }
    }

    #[test]
    fn beamsplitter_convention() {
        // Two photons meeting a balanced BS bunch: (x^2 - y^2)/2.
        let (a, b) = optimal_exact(2, 1);
        let c = compile::<Exact>(2, 1, &a, &b).unwrap();
        let e = &c.layers[0];
        assert_eq!(e.kind, ElementKind::BeamSplitter);
        let state = creations::<Exact>(&[rail(1, 0, 0), rail(1, 1, 0)]);
        let out = apply_element(&state, e, &c).unwrap();
        let x = ModeLabel::Path(rail(1, 0, 0));
        let y = ModeLabel::Path(rail(1, 1, 0));
        let mut want = FockPolynomial::<Exact>::zero();
        want.add_term(Monomial::single(x, 2), Exact::from_ratio(1, 2));
        want.add_term(Monomial::single(y, 2), Exact::from_ratio(-1, 2));
        assert_eq!(out, want);
    }

    #[test]
    fn splitter_columns_match_inputs() {
        let (a, b) = optimal_exact(4, 2);
        let c = compile::<Exact>(4, 2, &a, &b).unwrap();
        // Ancilla photon into the asymmetric port: branch weights
        // alpha on s=1..k, beta on s=k+1.
        let asym = c
            .layers
            .iter()
            .find(|e| e.kind == ElementKind::AsymmetricMultiport)
            .unwrap();
        let state = creations::<Exact>(&[sbr(1, 1)]);
        let out = apply_element(&state, asym, &c).unwrap();
        let mut want = FockPolynomial::<Exact>::zero();
        for s in 1..=2u32 {
            want.add_term(
                Monomial::single(ModeLabel::Path(sbr(1, s)), 1),
                a.clone(),
            );
        }
        want.add_term(Monomial::single(ModeLabel::Path(sbr(1, 3)), 1), b.clone());
        assert_eq!(out, want);

        // T photon enters slot n of the DFT: the uniform column.
        let sym = c
            .layers
            .iter()
            .find(|e| e.kind == ElementKind::SymmetricMultiport)
            .unwrap();
        let state = creations::<Exact>(&[tbr(1, 4)]);
        let out = apply_element(&state, sym, &c).unwrap();
        let quarter = Exact::sqrt_ratio(1, 4);
        let mut want = FockPolynomial::<Exact>::zero();
        for t in 1..=4u32 {
            want.add_term(
                Monomial::single(ModeLabel::Path(tbr(1, t)), 1),
                quarter.clone(),
            );
        }
        assert_eq!(out, want);
    }

    #[test]
    fn permutation_structure() {
        let n = 4;
        let k = 2;
        let pairs = wire_permutation(n, k);
        assert_eq!(pairs.len(), (2 * n * k + 2 * n) as usize);
        // Fixed-point-free involution on the moved set.
        for &(from, to) in &pairs {
            assert_ne!(from, to);
            assert!(pairs.contains(&(to, from)));
        }
        let froms: std::collections::BTreeSet<_> =
            pairs.iter().map(|&(f, _)| f).collect();
        let tos: std::collections::BTreeSet<_> = pairs.iter().map(|&(_, t)| t).collect();
        assert_eq!(froms, tos);
        assert_eq!(froms.len(), pairs.len());

        // Applying the permutation element twice is the identity.
        let (a, b) = optimal_exact(n, k);
        let c = compile::<Exact>(n, k, &a, &b).unwrap();
        let perm = c
            .layers
            .iter()
            .find(|e| e.kind == ElementKind::Permutation)
            .unwrap();
        let state = creations::<Exact>(&[sbr(2, 1), tbr(1, 3), rail(2, 0, 1), rail(1, 1, 0)]);
        let once = apply_element(&state, perm, &c).unwrap();
        let twice = apply_element(&once, perm, &c).unwrap();
        assert_eq!(twice, state);
        let moved = creations::<Exact>(&[tbr(1, 2), sbr(3, 1), sbr(2, 3), rail(1, 1, 0)]);
        assert_eq!(once, moved);
    }

    #[test]
    fn elementwise_equals_total_matrix() {
        let (a, b) = optimal_exact(2, 1);
        let c = compile::<Exact>(2, 1, &a, &b).unwrap();
        let input_paths: Vec<PathMode> = c
            .input_modes()
            .iter()
            .map(|&id| c.modes[id].origin)
            .collect();
        let state = creations::<Exact>(&input_paths);
        let mut by_elements = state.clone();
        for e in &c.layers {
            by_elements = apply_element(&by_elements, e, &c).unwrap();
            assert!(by_elements.is_homogeneous());
            assert_eq!(by_elements.degree(), state.degree());
        }
        let u = circuit_unitary(&c);
        let all: Vec<usize> = (0..c.modes.len()).collect();
        let total = CircuitElement {
            step: 5,
            kind: ElementKind::SymmetricMultiport,
            modes: all,
            matrix: u,
        };
        let by_matrix = apply_element(&state, &total, &c).unwrap();
        assert_eq!(by_elements, by_matrix);
    }

    #[test]
    fn json_and_svg_exports() {
        let (a, b) = optimal_exact(2, 1);
        let c = compile::<Exact>(2, 1, &a, &b).unwrap();
        let v = c.to_json();
        assert_eq!(v["n"], 2);
        assert_eq!(v["layers"].as_array().unwrap().len(), c.layers.len());
        assert_eq!(v["modes"][0]["origin"], "rail_1_0_0");
        let svg = c.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("BS"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn householder_identity_degenerate() {
        // First column already e_1: completion must be the identity.
        let m = asymmetric_matrix::<Exact>(1, &Exact::one(), &Exact::zero());
        assert_eq!(m[0][0], Exact::one());
        assert_eq!(m[1][1], Exact::one());
        assert_eq!(m[0][1], Exact::zero());
        assert!(is_unitary_exact(&m));
    }
}
