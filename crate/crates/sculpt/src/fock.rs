//! Symbolic algebra of bosonic creation operators on labeled modes.
//!
//! States are creation polynomials acting on an implicit vacuum: a
//! [`FockPolynomial`] maps canonical [`Monomial`]s (sorted mode/exponent
//! lists) to coefficients. Annihilation is the formal derivative, internal
//! basis changes are linear substitutions, and inner products carry the
//! bosonic `r!` normalization per mode.

use std::collections::{HashMap, HashSet};
use std::fmt;

use smallvec::SmallVec;
use thiserror::Error;

use crate::coeff::Coeff;

/// Internal (qubit) state tag carried by sculpting-level modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Spin {
    Plus,
    Minus,
    Zero,
    One,
}

impl Spin {
    pub fn is_x_basis(self) -> bool {
        matches!(self, Spin::Plus | Spin::Minus)
    }
}

/// Spatial site of a sculpting-level mode. Indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SiteId {
    Sys(u16),
    AncS(u16),
    AncT(u16),
    Anc(u16),
}

/// Single-rail circuit mode. Indices `m`, `j`, `l` are 1-based; branch
/// indices follow the five-step layout: rails carry `(m, rail, branch)`,
/// ancilla groups carry their branch number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathMode {
    Rail { m: u16, r: u8, b: u8 },
    SBranch { j: u16, s: u16 },
    TBranch { l: u16, t: u16 },
}

/// A labeled bosonic mode: either a sculpting-level mode with an internal
/// state tag, or a single-rail circuit path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeLabel {
    Internal { site: SiteId, spin: Spin },
    Path(PathMode),
}

impl ModeLabel {
    pub fn internal(site: SiteId, spin: Spin) -> Self {
        ModeLabel::Internal { site, spin }
    }

    /// Injective packing used for monomial storage and canonical ordering.
    pub fn code(self) -> u64 {
        match self {
            ModeLabel::Internal { site, spin } => {
                let (sk, idx) = match site {
                    SiteId::Sys(i) => (0u64, i),
                    SiteId::AncS(i) => (1, i),
                    SiteId::AncT(i) => (2, i),
                    SiteId::Anc(i) => (3, i),
                };
                (sk << 40) | ((idx as u64) << 8) | spin as u64
            }
            ModeLabel::Path(p) => {
                let base = 4u64 << 40;
                match p {
                    PathMode::Rail { m, r, b } => {
                        base | ((m as u64) << 8) | ((r as u64) << 1) | b as u64
                    }
                    PathMode::SBranch { j, s } => {
                        base | (1 << 36) | ((j as u64) << 16) | s as u64
                    }
                    PathMode::TBranch { l, t } => {
                        base | (2 << 36) | ((l as u64) << 16) | t as u64
                    }
                }
            }
        }
    }

    pub fn from_code(code: u64) -> Self {
        let kind = code >> 40;
        match kind {
            0..=3 => {
                let idx = ((code >> 8) & 0xffff_ffff) as u16;
                let spin = match code & 0xff {
                    0 => Spin::Plus,
                    1 => Spin::Minus,
                    2 => Spin::Zero,
                    _ => Spin::One,
                };
                let site = match kind {
                    0 => SiteId::Sys(idx),
                    1 => SiteId::AncS(idx),
                    2 => SiteId::AncT(idx),
                    _ => SiteId::Anc(idx),
                };
                ModeLabel::Internal { site, spin }
            }
            _ => {
                let sub = (code >> 36) & 0xf;
                match sub {
                    0 => PathMode::Rail {
                        m: ((code >> 8) & 0xffff) as u16,
                        r: ((code >> 1) & 1) as u8,
                        b: (code & 1) as u8,
                    },
                    1 => PathMode::SBranch {
                        j: ((code >> 16) & 0xffff) as u16,
                        s: (code & 0xffff) as u16,
                    },
                    _ => PathMode::TBranch {
                        l: ((code >> 16) & 0xffff) as u16,
                        t: (code & 0xffff) as u16,
                    },
                }
                .into()
            }
        }
    }
}

impl From<PathMode> for ModeLabel {
    fn from(p: PathMode) -> Self {
        ModeLabel::Path(p)
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::Internal { site, spin } => {
                let s = match spin {
                    Spin::Plus => "+",
                    Spin::Minus => "-",
                    Spin::Zero => "0",
                    Spin::One => "1",
                };
                match site {
                    SiteId::Sys(i) => write!(f, "({},{})", i, s),
                    SiteId::AncS(i) => write!(f, "(S{},{})", i, s),
                    SiteId::AncT(i) => write!(f, "(T{},{})", i, s),
                    SiteId::Anc(i) => write!(f, "(A{},{})", i, s),
                }
            }
            ModeLabel::Path(PathMode::Rail { m, r, b }) => write!(f, "[{},{},{}]", m, r, b),
            ModeLabel::Path(PathMode::SBranch { j, s }) => write!(f, "[S{},{}]", j, s),
            ModeLabel::Path(PathMode::TBranch { l, t }) => write!(f, "[T{},{}]", l, t),
        }
    }
}

/// Entries pack `(label code << 8) | exponent`; exponents are 1..=255 and
/// entries stay sorted by code, so equal monomials are equal vectors.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(SmallVec<[u64; 12]>);

impl Monomial {
    pub fn unit() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn single(label: ModeLabel, exp: u8) -> Self {
        assert!(exp > 0);
        Monomial(SmallVec::from_slice(&[(label.code() << 8) | exp as u64]))
    }

    pub fn from_labels(labels: &[ModeLabel]) -> Self {
        let mut m = Monomial::unit();
        for &l in labels {
            m = m.mul_label(l, 1);
        }
        m
    }

    pub fn factors(&self) -> impl Iterator<Item = (ModeLabel, u8)> + '_ {
        self.0
            .iter()
            .map(|&e| (ModeLabel::from_code(e >> 8), (e & 0xff) as u8))
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| (e & 0xff) as u32).sum()
    }

    pub fn exponent_of(&self, label: ModeLabel) -> u8 {
        let code = label.code();
        match self.0.binary_search_by(|e| (e >> 8).cmp(&code)) {
            Ok(i) => (self.0[i] & 0xff) as u8,
            Err(_) => 0,
        }
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: SmallVec<[u64; 12]> = SmallVec::new();
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let (ca, cb) = (a[i] >> 8, b[j] >> 8);
            if ca < cb {
                out.push(a[i]);
                i += 1;
            } else if cb < ca {
                out.push(b[j]);
                j += 1;
            } else {
                let e = (a[i] & 0xff) + (b[j] & 0xff);
                assert!(e <= 0xff, "occupation exponent overflow");
                out.push((ca << 8) | e);
                i += 1;
                j += 1;
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    pub fn mul_label(&self, label: ModeLabel, exp: u8) -> Monomial {
        if exp == 0 {
            return self.clone();
        }
        self.mul(&Monomial::single(label, exp))
    }

    /// Divides out one power of `label`, returning the reduced monomial and
    /// the original exponent; `None` if the label is absent.
    fn lower(&self, label: ModeLabel) -> Option<(Monomial, u8)> {
        let code = label.code();
        let i = self.0.binary_search_by(|e| (e >> 8).cmp(&code)).ok()?;
        let exp = (self.0[i] & 0xff) as u8;
        let mut v = self.0.clone();
        if exp == 1 {
            v.remove(i);
        } else {
            v[i] = (code << 8) | (exp as u64 - 1);
        }
        Some((Monomial(v), exp))
    }

}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (label, exp) in self.factors() {
            if exp == 1 {
                write!(f, "a+{}", label)?;
            } else {
                write!(f, "a+{}^{}", label, exp)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FockError {
    #[error("polynomials mix internal bases on site {0}")]
    BasisMismatch(String),
    #[error("dicke state requires 0 <= k <= n with n >= 1, got n={n}, k={k}")]
    InvalidDicke { n: u32, k: u32 },
    #[error("expansion exceeds the term budget of {0} monomials")]
    BudgetExceeded(usize),
    #[error("inner product of a zero state is undefined")]
    ZeroState,
}

/// Target basis for the internal-state substitution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InternalBasis {
    ZOne,
    PlusMinus,
}

/// Qubit encoding used by the Dicke reference state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DickeEncoding {
    /// Qubit `j` is the internal state of one photon on site `Sys(j)`.
    InternalTag,
    /// Qubit `m` is one photon on rail `(m,0,0)` for logical 0 or rail
    /// `(m,1,1)` for logical 1 (the undetected circuit outputs).
    DualRail,
}

/// Formal polynomial in creation operators with coefficients in `C`,
/// understood as applied to the vacuum.
#[derive(Clone, Debug)]
pub struct FockPolynomial<C: Coeff> {
    terms: HashMap<Monomial, C>,
}

impl<C: Coeff> PartialEq for FockPolynomial<C> {
    fn eq(&self, other: &Self) -> bool {
        if self.terms.len() != other.terms.len() {
            return false;
        }
        self.terms
            .iter()
            .all(|(m, c)| other.terms.get(m).map_or(false, |d| c == d))
    }
}

impl<C: Coeff> FockPolynomial<C> {
    pub fn zero() -> Self {
        FockPolynomial {
            terms: HashMap::new(),
        }
    }

    /// The scalar polynomial `c * 1` (vacuum term).
    pub fn scalar(c: C) -> Self {
        let mut p = FockPolynomial::zero();
        p.add_term(Monomial::unit(), c);
        p
    }

    pub fn from_term(m: Monomial, c: C) -> Self {
        let mut p = FockPolynomial::zero();
        p.add_term(m, c);
        p
    }

    /// Single creation operator with unit coefficient.
    pub fn creation(label: ModeLabel) -> Self {
        FockPolynomial::from_term(Monomial::single(label, 1), C::one())
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                *existing = existing.add(&c);
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    /// Terms in canonical (monomial) order, for deterministic output.
    pub fn sorted_terms(&self) -> Vec<(Monomial, C)> {
        let mut v: Vec<_> = self
            .terms
            .iter()
            .map(|(m, c)| (m.clone(), c.clone()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    pub fn coefficient(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.neg());
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return FockPolynomial::zero();
        }
        let mut out = FockPolynomial::zero();
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v.mul(c));
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = FockPolynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.mul(cb));
            }
        }
        out
    }

    /// Total degree (photon number) if all terms agree, else the maximum.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut it = self.terms.keys().map(|m| m.degree());
        match it.next() {
            None => true,
            Some(d) => it.all(|e| e == d),
        }
    }

    /// Formal bosonic derivative: `a_mode (a†_mode)^r -> r (a†_mode)^(r-1)`.
    /// Terms lacking the mode vanish.
    pub fn annihilate(&self, mode: ModeLabel) -> Self {
        let mut out = FockPolynomial::zero();
        for (m, c) in &self.terms {
            if let Some((rest, exp)) = m.lower(mode) {
                out.add_term(rest, c.mul(&C::from_int(exp as i64)));
            }
        }
        out
    }

    /// Replaces every occurrence of `a†_label` by the linear form
    /// `sum_i w_i a†_{m_i}`; exponent `r` expands multinomially.
    pub fn substitute(&self, label: ModeLabel, form: &[(ModeLabel, C)]) -> Self {
        self.substitute_many(&[(label, form.to_vec())])
    }

    /// Simultaneous linear substitution of several labels. All occurrences
    /// are replaced against the original monomial, so forms may reuse the
    /// substituted labels (as unitary mode mixes do).
    pub fn substitute_many(&self, subs: &[(ModeLabel, Vec<(ModeLabel, C)>)]) -> Self {
        let mut form_polys: HashMap<ModeLabel, FockPolynomial<C>> = HashMap::new();
        for (label, form) in subs {
            let mut p = FockPolynomial::zero();
            for (m, w) in form {
                p.add_term(Monomial::single(*m, 1), w.clone());
            }
            form_polys.insert(*label, p);
        }
        let mut power_caches: HashMap<ModeLabel, Vec<FockPolynomial<C>>> = HashMap::new();
        let mut out = FockPolynomial::zero();
        for (m, c) in &self.terms {
            let mut rest = Monomial::unit();
            let mut replaced = FockPolynomial::scalar(c.clone());
            for (label, exp) in m.factors() {
                match form_polys.get(&label) {
                    None => rest = rest.mul_label(label, exp),
                    Some(form_poly) => {
                        let cache = power_caches
                            .entry(label)
                            .or_insert_with(|| vec![FockPolynomial::scalar(C::one())]);
                        while cache.len() <= exp as usize {
                            let next = cache.last().unwrap().mul(form_poly);
                            cache.push(next);
                        }
                        replaced = replaced.mul(&cache[exp as usize]);
                    }
                }
            }
            for (pm, pc) in &replaced.terms {
                out.add_term(rest.mul(pm), pc.clone());
            }
        }
        out
    }

    fn basis_usage(&self) -> HashMap<SiteId, (bool, bool)> {
        let mut usage: HashMap<SiteId, (bool, bool)> = HashMap::new();
        for m in self.terms.keys() {
            for (label, _) in m.factors() {
                if let ModeLabel::Internal { site, spin } = label {
                    let e = usage.entry(site).or_insert((false, false));
                    if spin.is_x_basis() {
                        e.0 = true;
                    } else {
                        e.1 = true;
                    }
                }
            }
        }
        usage
    }

    fn check_single_basis(usages: &[HashMap<SiteId, (bool, bool)>]) -> Result<(), FockError> {
        let mut merged: HashMap<SiteId, (bool, bool)> = HashMap::new();
        for u in usages {
            for (site, (x, z)) in u {
                let e = merged.entry(*site).or_insert((false, false));
                e.0 |= x;
                e.1 |= z;
            }
        }
        for (site, (x, z)) in merged {
            if x && z {
                return Err(FockError::BasisMismatch(format!("{:?}", site)));
            }
        }
        Ok(())
    }

    /// Rewrites all internal-tagged operators into `target`. The input must
    /// not already mix bases.
    pub fn change_internal_basis(&self, target: InternalBasis) -> Result<Self, FockError> {
        Self::check_single_basis(&[self.basis_usage()])?;
        let half = C::sqrt_ratio(1, 2);
        let neg_half = half.neg();
        let mut out = self.clone();
        let sites: HashSet<(SiteId, Spin)> = self
            .terms
            .keys()
            .flat_map(|m| m.factors())
            .filter_map(|(l, _)| match l {
                ModeLabel::Internal { site, spin } => Some((site, spin)),
                _ => None,
            })
            .collect();
        for (site, spin) in sites {
            let needs = match target {
                InternalBasis::ZOne => spin.is_x_basis(),
                InternalBasis::PlusMinus => !spin.is_x_basis(),
            };
            if !needs {
                continue;
            }
            let (m0, m1, w1) = match (target, spin) {
                // a†_± = (a†_0 ± a†_1)/√2
                (InternalBasis::ZOne, Spin::Plus) => (Spin::Zero, Spin::One, half.clone()),
                (InternalBasis::ZOne, Spin::Minus) => (Spin::Zero, Spin::One, neg_half.clone()),
                // a†_0 = (a†_+ + a†_-)/√2, a†_1 = (a†_+ - a†_-)/√2
                (InternalBasis::PlusMinus, Spin::Zero) => {
                    (Spin::Plus, Spin::Minus, half.clone())
                }
                (InternalBasis::PlusMinus, Spin::One) => {
                    (Spin::Plus, Spin::Minus, neg_half.clone())
                }
                _ => unreachable!(),
            };
            out = out.substitute(
                ModeLabel::internal(site, spin),
                &[
                    (ModeLabel::internal(site, m0), half.clone()),
                    (ModeLabel::internal(site, m1), w1),
                ],
            );
        }
        Ok(out)
    }

    /// `<vac| P† Q |vac>` with `<(a†)^r (a†)^r> = r!` per mode. Both
    /// arguments must use one internal basis per site.
    pub fn inner_product(&self, other: &Self) -> Result<C, FockError> {
        Self::check_single_basis(&[self.basis_usage(), other.basis_usage()])?;
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            if let Some(d) = other.terms.get(m) {
                let mut norm = C::one();
                for (_, exp) in m.factors() {
                    let mut f = 1i64;
                    for r in 2..=exp as i64 {
                        f *= r;
                    }
                    if f != 1 {
                        norm = norm.mul(&C::from_int(f));
                    }
                }
                acc = acc.add(&c.conj().mul(d).mul(&norm));
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> Result<C, FockError> {
        self.inner_product(self)
    }
}

/// Binomial coefficient as u128; panics on overflow (desk-scale use only).
pub fn binomial(n: u32, k: u32) -> u128 {
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

pub fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}

/// Normalized Dicke state `|D_n^k>`: the equal superposition of all
/// weight-`k` bitstrings over `n` qubits, in the chosen encoding.
pub fn dicke_reference<C: Coeff>(
    n: u32,
    k: u32,
    encoding: DickeEncoding,
) -> Result<FockPolynomial<C>, FockError> {
    if n < 1 || k > n {
        return Err(FockError::InvalidDicke { n, k });
    }
    let count = binomial(n, k);
    let coeff = C::sqrt_ratio(1, count as u64);
    let mut out = FockPolynomial::zero();
    // Iterate bitstrings of weight k via subsets.
    for bits in 0u64..(1 << n) {
        if bits.count_ones() != k {
            continue;
        }
        let mut labels = Vec::with_capacity(n as usize);
        for q in 0..n {
            let one = (bits >> q) & 1 == 1;
            let label = match encoding {
                DickeEncoding::InternalTag => ModeLabel::internal(
                    SiteId::Sys((q + 1) as u16),
                    if one { Spin::One } else { Spin::Zero },
                ),
                DickeEncoding::DualRail => ModeLabel::Path(PathMode::Rail {
                    m: (q + 1) as u16,
                    r: if one { 1 } else { 0 },
                    b: if one { 1 } else { 0 },
                }),
            };
            labels.push(label);
        }
        out.add_term(Monomial::from_labels(&labels), coeff.clone());
    }
    Ok(out)
}

/// A state kept as `scalar * product(factors)`, each factor a creation
/// polynomial. Substitutions distribute over the product, so circuit
/// evolution can run without expanding until the very end.
#[derive(Clone, Debug)]
pub struct ProductState<C: Coeff> {
    pub scalar: C,
    pub factors: Vec<FockPolynomial<C>>,
}

impl<C: Coeff> ProductState<C> {
    pub fn new(scalar: C, factors: Vec<FockPolynomial<C>>) -> Self {
        ProductState { scalar, factors }
    }

    pub fn substitute(&self, label: ModeLabel, form: &[(ModeLabel, C)]) -> Self {
        ProductState {
            scalar: self.scalar.clone(),
            factors: self
                .factors
                .iter()
                .map(|f| f.substitute(label, form))
                .collect(),
        }
    }

    pub fn expand(&self, budget: usize) -> Result<FockPolynomial<C>, FockError> {
        let mut acc = FockPolynomial::scalar(self.scalar.clone());
        for f in &self.factors {
            acc = acc.mul(f);
            if acc.len() > budget {
                return Err(FockError::BudgetExceeded(budget));
            }
        }
        Ok(acc)
    }

    /// Rescales each factor so its canonically-first monomial has unit
    /// coefficient, folding the scales into the scalar. Two products that
    /// expand to the same polynomial factor-by-factor compare equal in this
    /// form even when normalization is distributed differently.
    pub fn canonicalized(&self) -> Option<ProductState<C>> {
        let mut scalar = self.scalar.clone();
        let mut factors = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let lead = f.sorted_terms().into_iter().next()?;
            let inv = lead.1.inv()?;
            scalar = scalar.mul(&lead.1);
            factors.push(f.scale(&inv));
        }
        Some(ProductState { scalar, factors })
    }

    pub fn total_degree(&self) -> u32 {
        self.factors.iter().map(|f| f.degree()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Exact;

    fn sys(j: u16, spin: Spin) -> ModeLabel {
        ModeLabel::internal(SiteId::Sys(j), spin)
    }

    fn x_pair(j: u16) -> FockPolynomial<Exact> {
        FockPolynomial::creation(sys(j, Spin::Plus)).mul(&FockPolynomial::creation(sys(
            j,
            Spin::Minus,
        )))
    }

    #[test]
    fn label_codes_round_trip() {
        let labels = [
            sys(1, Spin::Plus),
            sys(7, Spin::One),
            ModeLabel::internal(SiteId::AncS(3), Spin::Zero),
            ModeLabel::internal(SiteId::AncT(2), Spin::Minus),
            ModeLabel::internal(SiteId::Anc(9), Spin::Plus),
            ModeLabel::Path(PathMode::Rail { m: 4, r: 1, b: 0 }),
            ModeLabel::Path(PathMode::SBranch { j: 2, s: 3 }),
            ModeLabel::Path(PathMode::TBranch { l: 1, t: 4 }),
        ];
        for l in labels {
            assert_eq!(ModeLabel::from_code(l.code()), l);
        }
        let mut codes: Vec<u64> = labels.iter().map(|l| l.code()).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), labels.len());
    }

    #[test]
    fn product_and_difference_of_squares() {
        let a1 = FockPolynomial::<Exact>::creation(sys(1, Spin::Zero));
        let a2 = FockPolynomial::<Exact>::creation(sys(2, Spin::Zero));
        let prod = a1.mul(&a2);
        assert_eq!(prod.len(), 1);
        assert_eq!(prod.degree(), 2);

        let sum = a1.add(&a2);
        let diff = a1.sub(&a2);
        let result = sum.mul(&diff);
        let expected = a1.mul(&a1).sub(&a2.mul(&a2));
        assert_eq!(result, expected);
        assert_eq!(result.len(), 2);
    }

    #[test]
    fn annihilation_rules() {
        let m1 = sys(1, Spin::Zero);
        let m2 = sys(2, Spin::Zero);
        let p = FockPolynomial::<Exact>::creation(m1).mul(&FockPolynomial::creation(m2));
        assert_eq!(p.annihilate(m1), FockPolynomial::creation(m2));
        let sq = FockPolynomial::<Exact>::creation(m1).mul(&FockPolynomial::creation(m1));
        assert_eq!(
            sq.annihilate(m1),
            FockPolynomial::creation(m1).scale(&Exact::from_int(2))
        );
        assert!(p.annihilate(sys(3, Spin::Zero)).is_zero());
    }

    #[test]
    fn qubit_identities_from_pair_state() {
        // a_{j,0} a†_{j,+} a†_{j,-} |vac> = +a†_{j,0}|vac>
        // a_{j,1} a†_{j,+} a†_{j,-} |vac> = -a†_{j,1}|vac>
        let pair_z = x_pair(1).change_internal_basis(InternalBasis::ZOne).unwrap();
        let hit0 = pair_z.annihilate(sys(1, Spin::Zero));
        assert_eq!(hit0, FockPolynomial::creation(sys(1, Spin::Zero)));
        let hit1 = pair_z.annihilate(sys(1, Spin::One));
        assert_eq!(
            hit1,
            FockPolynomial::creation(sys(1, Spin::One)).scale(&Exact::from_int(-1))
        );
        // Double hits: {0,1} vanishes, {0,0} -> +1, {1,1} -> -1 on vacuum.
        assert!(hit1.annihilate(sys(1, Spin::Zero)).is_zero());
        assert_eq!(
            hit0.annihilate(sys(1, Spin::Zero)),
            FockPolynomial::scalar(Exact::one())
        );
        assert_eq!(
            hit1.annihilate(sys(1, Spin::One)),
            FockPolynomial::scalar(Exact::from_int(-1))
        );
    }

    #[test]
    fn basis_change_pair_and_round_trip() {
        // a†_{j,+} a†_{j,-} = (a†²_{j,0} - a†²_{j,1})/2
        let pair_z = x_pair(1).change_internal_basis(InternalBasis::ZOne).unwrap();
        let z0 = FockPolynomial::<Exact>::creation(sys(1, Spin::Zero));
        let z1 = FockPolynomial::<Exact>::creation(sys(1, Spin::One));
        let expected = z0
            .mul(&z0)
            .sub(&z1.mul(&z1))
            .scale(&Exact::from_ratio(1, 2));
        assert_eq!(pair_z, expected);

        let round = pair_z
            .change_internal_basis(InternalBasis::PlusMinus)
            .unwrap();
        assert_eq!(round, x_pair(1));
    }

    #[test]
    fn mixed_basis_rejected() {
        let mixed = FockPolynomial::<Exact>::creation(sys(1, Spin::Plus))
            .mul(&FockPolynomial::creation(sys(1, Spin::Zero)));
        assert!(matches!(
            mixed.change_internal_basis(InternalBasis::ZOne),
            Err(FockError::BasisMismatch(_))
        ));
        let p = FockPolynomial::<Exact>::creation(sys(1, Spin::Plus));
        let q = FockPolynomial::<Exact>::creation(sys(1, Spin::Zero));
        assert!(p.inner_product(&q).is_err());
        // Different sites in different bases are fine.
        let r = FockPolynomial::<Exact>::creation(sys(1, Spin::Plus))
            .mul(&FockPolynomial::creation(sys(2, Spin::Zero)));
        assert!(r.inner_product(&r).is_ok());
    }

    #[test]
    fn inner_product_normalization() {
        let a = FockPolynomial::<Exact>::creation(sys(1, Spin::Zero));
        assert_eq!(a.inner_product(&a).unwrap(), Exact::one());
        let sq = a.mul(&a);
        assert_eq!(sq.inner_product(&sq).unwrap(), Exact::from_int(2));
        let cube = sq.mul(&a);
        assert_eq!(cube.inner_product(&cube).unwrap(), Exact::from_int(6));
    }

    #[test]
    fn basis_change_preserves_inner_products() {
        let p = x_pair(1).add(&FockPolynomial::creation(sys(1, Spin::Plus)).mul(
            &FockPolynomial::creation(sys(1, Spin::Plus)),
        ));
        let q = x_pair(1);
        let ip_x = p.inner_product(&q).unwrap();
        let pz = p.change_internal_basis(InternalBasis::ZOne).unwrap();
        let qz = q.change_internal_basis(InternalBasis::ZOne).unwrap();
        assert_eq!(pz.inner_product(&qz).unwrap(), ip_x);
    }

    #[test]
    fn dicke_reference_structure() {
        let d10: FockPolynomial<Exact> =
            dicke_reference(1, 0, DickeEncoding::InternalTag).unwrap();
        assert_eq!(d10, FockPolynomial::creation(sys(1, Spin::Zero)));

        let d42: FockPolynomial<Exact> =
            dicke_reference(4, 2, DickeEncoding::InternalTag).unwrap();
        assert_eq!(d42.len(), 6);
        let c = Exact::sqrt_ratio(1, 6);
        for (_, coeff) in d42.iter() {
            assert_eq!(coeff, &c);
        }
        assert_eq!(d42.norm_sqr().unwrap(), Exact::one());

        let d33: FockPolynomial<Exact> =
            dicke_reference(3, 3, DickeEncoding::InternalTag).unwrap();
        assert_eq!(d33.len(), 1);
        assert_eq!(
            d33.coefficient(&Monomial::from_labels(&[
                sys(1, Spin::One),
                sys(2, Spin::One),
                sys(3, Spin::One)
            ])),
            Exact::one()
        );

        assert!(dicke_reference::<Exact>(3, 4, DickeEncoding::InternalTag).is_err());

        let dual: FockPolynomial<Exact> = dicke_reference(2, 1, DickeEncoding::DualRail).unwrap();
        assert_eq!(dual.len(), 2);
        assert_eq!(dual.norm_sqr().unwrap(), Exact::one());
    }

    #[test]
    fn substitution_is_linear_and_expands_powers() {
        let m = sys(1, Spin::Plus);
        let target0 = sys(1, Spin::Zero);
        let target1 = sys(1, Spin::One);
        let p = FockPolynomial::<Exact>::creation(m).mul(&FockPolynomial::creation(m));
        let form = [
            (target0, Exact::sqrt_ratio(1, 2)),
            (target1, Exact::sqrt_ratio(1, 2)),
        ];
        let sub = p.substitute(m, &form);
        // ((x+y)/√2)^2 = (x² + 2xy + y²)/2
        assert_eq!(sub.len(), 3);
        assert_eq!(
            sub.coefficient(&Monomial::single(target0, 2)),
            Exact::from_ratio(1, 2)
        );
        assert_eq!(
            sub.coefficient(&Monomial::from_labels(&[target0, target1])),
            Exact::one()
        );
    }

    #[test]
    fn product_state_expansion_and_budget() {
        let f1 = FockPolynomial::<Exact>::creation(sys(1, Spin::Zero))
            .add(&FockPolynomial::creation(sys(2, Spin::Zero)));
        let f2 = FockPolynomial::<Exact>::creation(sys(3, Spin::Zero))
            .add(&FockPolynomial::creation(sys(4, Spin::Zero)));
        let ps = ProductState::new(Exact::from_ratio(1, 2), vec![f1, f2]);
        let expanded = ps.expand(100).unwrap();
        assert_eq!(expanded.len(), 4);
        assert!(matches!(ps.expand(3), Err(FockError::BudgetExceeded(3))));
        assert_eq!(ps.total_degree(), 2);
    }

    #[test]
    fn canonicalized_product_matches_rescaled_form() {
        let f = FockPolynomial::<Exact>::creation(sys(1, Spin::Zero))
            .add(&FockPolynomial::creation(sys(2, Spin::Zero)));
        let half = Exact::from_ratio(1, 2);
        let a = ProductState::new(Exact::one(), vec![f.scale(&half)]);
        let b = ProductState::new(half.clone(), vec![f.clone()]);
        let ca = a.canonicalized().unwrap();
        let cb = b.canonicalized().unwrap();
        assert_eq!(ca.scalar, cb.scalar);
        assert_eq!(ca.factors, cb.factors);
    }
}
