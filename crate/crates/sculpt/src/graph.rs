//! Sculpting graphs: directed (vertex-per-operator) and bipartite
//! (circle/dot) representations, their validity rules, and the cover and
//! matching enumerations whose superpositions define the generated state.
//!
//! Edge colors encode internal states: solid black `|+>`, dashed black
//! `|->`, red `|0>`, blue `|1>`. In the digraph every vertex doubles as a
//! spatial mode (its in-edges) and an operator factor (its out-edges);
//! the bigraph splits those roles into circles and dots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use num::complex::Complex;
use num::rational::BigRational;
use num::Zero;
use serde_json::{json, Value};
use thiserror::Error;

use crate::coeff::{Coeff, Exact};
use crate::fock::{SiteId, Spin};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeColor {
    SolidBlack,
    DashedBlack,
    Red,
    Blue,
}

impl EdgeColor {
    pub fn spin(self) -> Spin {
        match self {
            EdgeColor::SolidBlack => Spin::Plus,
            EdgeColor::DashedBlack => Spin::Minus,
            EdgeColor::Red => Spin::Zero,
            EdgeColor::Blue => Spin::One,
        }
    }

    fn name(self) -> &'static str {
        match self {
            EdgeColor::SolidBlack => "solid_black",
            EdgeColor::DashedBlack => "dashed_black",
            EdgeColor::Red => "red",
            EdgeColor::Blue => "blue",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "solid_black" => EdgeColor::SolidBlack,
            "dashed_black" => EdgeColor::DashedBlack,
            "red" => EdgeColor::Red,
            "blue" => EdgeColor::Blue,
            _ => return None,
        })
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid parameters n={n}, k={k}: need n >= 1 and 0 <= k <= n")]
    InvalidParams { n: u32, k: u32 },
    #[error("vertex {0} does not match any local element pattern")]
    UnrecognizedLocalPattern(String),
    #[error("graph is not an effective-perfect-matching graph")]
    NotEpm,
    #[error("malformed graph document: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectedEdge {
    pub src: SiteId,
    pub dst: SiteId,
    pub color: EdgeColor,
    pub weight: Exact,
}

/// Directed sculpting graph. Vertex `v`'s out-edges spell its operator
/// factor `sum_e w_e a_{dst(e), spin(color_e)}`; its in-edges say which
/// factors can remove a photon from mode `v`.
#[derive(Clone, Debug)]
pub struct SculptingDigraph {
    pub n: u32,
    pub k: u32,
    pub vertices: Vec<SiteId>,
    pub edges: Vec<DirectedEdge>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BigraphEdge {
    pub circle: SiteId,
    /// Index into `dots`.
    pub dot: usize,
    pub color: EdgeColor,
    pub weight: Exact,
}

/// Bipartite view: circles are spatial modes, dots are operator factors.
/// Dots keep the digraph vertex they came from as provenance.
#[derive(Clone, Debug)]
pub struct SculptingBigraph {
    pub n: u32,
    pub k: u32,
    pub circles: Vec<SiteId>,
    pub dots: Vec<SiteId>,
    pub edges: Vec<BigraphEdge>,
}

/// A disjoint cycle cover: one chosen out-edge per vertex such that every
/// vertex is also entered exactly once.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleCover {
    /// `choice[i]` is the edge index chosen for `vertices[i]`.
    pub choice: Vec<usize>,
}

/// A perfect matching of a bigraph: one edge index per dot, covering every
/// circle exactly once.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub edges: Vec<usize>,
}

fn site_name(s: SiteId) -> String {
    match s {
        SiteId::Sys(i) => format!("{}", i),
        SiteId::AncS(i) => format!("S{}", i),
        SiteId::AncT(i) => format!("T{}", i),
        SiteId::Anc(i) => format!("A{}", i),
    }
}

fn site_from_name(s: &str) -> Option<SiteId> {
    let (kind, rest) = match s.chars().next()? {
        'S' => ('S', &s[1..]),
        'T' => ('T', &s[1..]),
        'A' => ('A', &s[1..]),
        _ => ('#', s),
    };
    let idx: u16 = rest.parse().ok()?;
    Some(match kind {
        'S' => SiteId::AncS(idx),
        'T' => SiteId::AncT(idx),
        'A' => SiteId::Anc(idx),
        _ => SiteId::Sys(idx),
    })
}

/// Whether a two-boson `a†_+ a†_-` mode annihilated by this color pair
/// gives zero. Surviving pairs would let non-matching terms through.
fn pair_vanishes(a: EdgeColor, b: EdgeColor) -> bool {
    use EdgeColor::*;
    matches!(
        (a.min(b), a.max(b)),
        (SolidBlack, SolidBlack) | (DashedBlack, DashedBlack) | (Red, Blue)
    )
}

/// Local attachment rule for a mode initialized with the pair `a†_+ a†_-`:
/// every two distinct incident edges must annihilate the pair to zero.
fn pair_mode_pattern_ok(colors: &[EdgeColor]) -> bool {
    for (i, &a) in colors.iter().enumerate() {
        for &b in &colors[i + 1..] {
            if !pair_vanishes(a, b) {
                return false;
            }
        }
    }
    !colors.is_empty()
}

/// Local attachment rule for a single-boson `a†_+` ancilla mode: double
/// hits die on their own (one boson), but each edge must couple to `|+>`.
fn single_mode_pattern_ok(colors: &[EdgeColor]) -> bool {
    !colors.is_empty() && colors.iter().all(|&c| c == EdgeColor::SolidBlack)
}

fn is_system(site: SiteId) -> bool {
    matches!(site, SiteId::Sys(_))
}

impl SculptingDigraph {
    /// The Dicke digraph `D_n^k` with uniform out-weights per vertex.
    pub fn dicke(n: u32, k: u32) -> Result<Self, GraphError> {
        let alpha = Exact::sqrt_ratio(1, (k + 1) as u64);
        Self::dicke_weighted(n, k, &alpha, &alpha)
    }

    /// The Dicke digraph with ancilla splitting weights `alpha` on each
    /// `S -> T` edge and `beta` on the `S -> system` edge; the uniform
    /// graph is the `alpha = beta` special case. Requires
    /// `k alpha^2 + beta^2 = 1`.
    pub fn dicke_weighted(n: u32, k: u32, alpha: &Exact, beta: &Exact) -> Result<Self, GraphError> {
        if n < 1 || k > n {
            return Err(GraphError::InvalidParams { n, k });
        }
        let norm = Exact::from_int(k as i64)
            .mul(&alpha.mul(alpha))
            .add(&beta.mul(beta));
        if norm != Exact::one() {
            return Err(GraphError::InvalidParams { n, k });
        }
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        if k == 0 {
            // Degenerate target |0...0>: red self-loops alone cover the
            // graph, no ancillas are needed.
            for j in 1..=n as u16 {
                vertices.push(SiteId::Sys(j));
                edges.push(DirectedEdge {
                    src: SiteId::Sys(j),
                    dst: SiteId::Sys(j),
                    color: EdgeColor::Red,
                    weight: Exact::one(),
                });
            }
            return Ok(SculptingDigraph {
                n,
                k,
                vertices,
                edges,
            });
        }
        for j in 1..=n as u16 {
            vertices.push(SiteId::Sys(j));
        }
        for j in 1..=n as u16 {
            vertices.push(SiteId::AncS(j));
        }
        for l in 1..=k as u16 {
            vertices.push(SiteId::AncT(l));
        }
        let half = Exact::sqrt_ratio(1, 2);
        let tw = Exact::sqrt_ratio(1, n as u64);
        for j in 1..=n as u16 {
            edges.push(DirectedEdge {
                src: SiteId::Sys(j),
                dst: SiteId::Sys(j),
                color: EdgeColor::Blue,
                weight: half.clone(),
            });
            edges.push(DirectedEdge {
                src: SiteId::Sys(j),
                dst: SiteId::AncS(j),
                color: EdgeColor::SolidBlack,
                weight: half.clone(),
            });
            edges.push(DirectedEdge {
                src: SiteId::AncS(j),
                dst: SiteId::Sys(j),
                color: EdgeColor::Red,
                weight: beta.clone(),
            });
            for l in 1..=k as u16 {
                edges.push(DirectedEdge {
                    src: SiteId::AncS(j),
                    dst: SiteId::AncT(l),
                    color: EdgeColor::SolidBlack,
                    weight: alpha.clone(),
                });
            }
        }
        for l in 1..=k as u16 {
            for j in 1..=n as u16 {
                edges.push(DirectedEdge {
                    src: SiteId::AncT(l),
                    dst: SiteId::AncS(j),
                    color: EdgeColor::SolidBlack,
                    weight: tw.clone(),
                });
            }
        }
        Ok(SculptingDigraph {
            n,
            k,
            vertices,
            edges,
        })
    }

    fn vertex_index(&self, v: SiteId) -> Option<usize> {
        self.vertices.iter().position(|&u| u == v)
    }

    pub fn out_edges(&self, v: SiteId) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&i| self.edges[i].src == v)
            .collect()
    }

    pub fn in_edges(&self, v: SiteId) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&i| self.edges[i].dst == v)
            .collect()
    }

    /// Every vertex's squared out-weights sum to one (operator factors are
    /// normalized superpositions).
    pub fn out_weights_normalized(&self) -> bool {
        self.vertices.iter().all(|&v| {
            let mut acc = Exact::zero();
            for &e in &self.out_edges(v) {
                acc = acc.add(&self.edges[e].weight.norm_sqr());
            }
            acc == Exact::one()
        })
    }

    /// Exhaustive disjoint cycle covers, by backtracking over each vertex's
    /// out-edge choice with an entered-vertex bitmask.
    pub fn enumerate_dccs(&self) -> Vec<CycleCover> {
        let nv = self.vertices.len();
        assert!(nv <= 64, "cover enumeration supports at most 64 vertices");
        let out: Vec<Vec<(usize, usize)>> = self
            .vertices
            .iter()
            .map(|&v| {
                self.out_edges(v)
                    .into_iter()
                    .map(|e| (self.vertex_index(self.edges[e].dst).unwrap(), e))
                    .collect()
            })
            .collect();
        let mut covers = Vec::new();
        let mut choice = vec![0usize; nv];
        fn rec(
            i: usize,
            used: u64,
            out: &[Vec<(usize, usize)>],
            choice: &mut Vec<usize>,
            covers: &mut Vec<CycleCover>,
        ) {
            if i == out.len() {
                covers.push(CycleCover {
                    choice: choice.clone(),
                });
                return;
            }
            for &(dst, e) in &out[i] {
                if used & (1 << dst) == 0 {
                    choice[i] = e;
                    rec(i + 1, used | (1 << dst), out, choice, covers);
                }
            }
        }
        if nv == 0 {
            return vec![CycleCover { choice: vec![] }];
        }
        rec(0, 0, &out, &mut choice, &mut covers);
        covers
    }

    /// Splits the circle and dot roles of every vertex, preserving indices,
    /// colors and weights. The digraph must be assembled from the three
    /// Dicke local elements (system, S-ancilla, T-ancilla patterns).
    pub fn to_bigraph(&self) -> Result<SculptingBigraph, GraphError> {
        for &v in &self.vertices {
            self.classify_local_pattern(v)?;
        }
        let dots = self.vertices.clone();
        let circles = self.vertices.clone();
        let edges = self
            .edges
            .iter()
            .map(|e| BigraphEdge {
                circle: e.dst,
                dot: self.vertex_index(e.src).unwrap(),
                color: e.color,
                weight: e.weight.clone(),
            })
            .collect();
        Ok(SculptingBigraph {
            n: self.n,
            k: self.k,
            circles,
            dots,
            edges,
        })
    }

    /// Matches a vertex's out-edge shape against the three local elements:
    /// system (blue self-loop plus solid edge to its S partner, or a lone
    /// red self-loop in the k=0 degenerate), S-ancilla (red edge to its
    /// system plus solid edges to T vertices), T-ancilla (solid edges to S
    /// vertices).
    fn classify_local_pattern(&self, v: SiteId) -> Result<(), GraphError> {
        let out: Vec<&DirectedEdge> = self.out_edges(v).into_iter().map(|e| &self.edges[e]).collect();
        let ok = match v {
            SiteId::Sys(j) => {
                (out.len() == 2
                    && out.iter().any(|e| {
                        e.color == EdgeColor::Blue && e.dst == v
                    })
                    && out.iter().any(|e| {
                        e.color == EdgeColor::SolidBlack && e.dst == SiteId::AncS(j)
                    }))
                    || (out.len() == 1 && out[0].color == EdgeColor::Red && out[0].dst == v)
            }
            SiteId::AncS(j) => {
                out.iter().all(|e| {
                    (e.color == EdgeColor::Red && e.dst == SiteId::Sys(j))
                        || (e.color == EdgeColor::SolidBlack
                            && matches!(e.dst, SiteId::AncT(_)))
                }) && out
                    .iter()
                    .filter(|e| e.color == EdgeColor::Red)
                    .count()
                    == 1
            }
            SiteId::AncT(_) => {
                !out.is_empty()
                    && out.iter().all(|e| {
                        e.color == EdgeColor::SolidBlack && matches!(e.dst, SiteId::AncS(_))
                    })
            }
            SiteId::Anc(_) => false,
        };
        if ok {
            Ok(())
        } else {
            Err(GraphError::UnrecognizedLocalPattern(site_name(v)))
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "type": "digraph",
            "n": self.n,
            "k": self.k,
            "vertices": self.vertices.iter().map(|&v| json!({
                "id": site_name(v),
                "role": match v {
                    SiteId::Sys(_) => "system",
                    SiteId::AncS(_) => "ancilla_s",
                    SiteId::AncT(_) => "ancilla_t",
                    SiteId::Anc(_) => "ancilla",
                },
            })).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| json!({
                "source": site_name(e.src),
                "target": site_name(e.dst),
                "color": e.color.name(),
                "weight": weight_to_json(&e.weight),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, GraphError> {
        let obj = v.as_object().ok_or_else(|| err("root must be an object"))?;
        if obj.get("type").and_then(Value::as_str) != Some("digraph") {
            return Err(err("type must be \"digraph\""));
        }
        let n = obj.get("n").and_then(Value::as_u64).ok_or_else(|| err("missing n"))? as u32;
        let k = obj.get("k").and_then(Value::as_u64).ok_or_else(|| err("missing k"))? as u32;
        let vertices = obj
            .get("vertices")
            .and_then(Value::as_array)
            .ok_or_else(|| err("missing vertices"))?
            .iter()
            .map(|vv| {
                vv.get("id")
                    .and_then(Value::as_str)
                    .and_then(site_from_name)
                    .ok_or_else(|| err("bad vertex id"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let edges = obj
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| err("missing edges"))?
            .iter()
            .map(parse_directed_edge)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SculptingDigraph {
            n,
            k,
            vertices,
            edges,
        })
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph sculpting {\n  rankdir=LR;\n");
        for &v in &self.vertices {
            let _ = writeln!(s, "  \"{}\" [shape=circle];", site_name(v));
        }
        for e in &self.edges {
            let (color, style) = dot_attrs(e.color);
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [color={}, style={}, label=\"{:.4}\"];",
                site_name(e.src),
                site_name(e.dst),
                color,
                style,
                e.weight.to_c64().re
            );
        }
        s.push_str("}\n");
        s
    }

    /// Relabels the graph by a permutation of `(j, S_j)` pairs and a
    /// permutation of T vertices. Both are 1-based images:
    /// `sys_perm[j-1]` is the new index of pair `j`.
    pub fn relabel(&self, sys_perm: &[u16], t_perm: &[u16]) -> SculptingDigraph {
        let map = |s: SiteId| match s {
            SiteId::Sys(j) => SiteId::Sys(sys_perm[(j - 1) as usize]),
            SiteId::AncS(j) => SiteId::AncS(sys_perm[(j - 1) as usize]),
            SiteId::AncT(l) => SiteId::AncT(t_perm[(l - 1) as usize]),
            other => other,
        };
        SculptingDigraph {
            n: self.n,
            k: self.k,
            vertices: self.vertices.iter().map(|&v| map(v)).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| DirectedEdge {
                    src: map(e.src),
                    dst: map(e.dst),
                    color: e.color,
                    weight: e.weight.clone(),
                })
                .collect(),
        }
    }

    /// Order-independent fingerprint: sorted (src, dst, color, weight) keys.
    pub fn canonical_edges(&self) -> Vec<(String, String, &'static str, String)> {
        let mut v: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                (
                    site_name(e.src),
                    site_name(e.dst),
                    e.color.name(),
                    format!("{}", e.weight),
                )
            })
            .collect();
        v.sort();
        v
    }
}

/// Structural validity: every mode's incident-edge pattern guarantees that
/// multiple hits annihilate its initial bosons, so only perfect matchings
/// survive. System modes hold the two-boson pair, ancillas one `|+>` boson.
pub fn is_epm_digraph(g: &SculptingDigraph) -> bool {
    if g.vertices.is_empty() {
        return false;
    }
    g.vertices.iter().all(|&v| {
        let in_colors: Vec<EdgeColor> = g
            .in_edges(v)
            .into_iter()
            .map(|e| g.edges[e].color)
            .collect();
        let out_ok = !g.out_edges(v).is_empty();
        let in_ok = if is_system(v) {
            pair_mode_pattern_ok(&in_colors)
        } else {
            single_mode_pattern_ok(&in_colors)
        };
        out_ok && in_ok
    })
}

pub fn is_epm_bigraph(g: &SculptingBigraph) -> bool {
    if g.circles.is_empty() || g.circles.len() != g.dots.len() {
        return false;
    }
    let circles_ok = g.circles.iter().all(|&c| {
        let colors: Vec<EdgeColor> = g
            .edges
            .iter()
            .filter(|e| e.circle == c)
            .map(|e| e.color)
            .collect();
        if is_system(c) {
            pair_mode_pattern_ok(&colors)
        } else {
            single_mode_pattern_ok(&colors)
        }
    });
    let dots_ok = (0..g.dots.len()).all(|d| g.edges.iter().any(|e| e.dot == d));
    circles_ok && dots_ok
}

/// `C(n,k) (k!)^2`: self-loop placements times independent `S->T` and
/// `T->S` matchings. Degenerate ends are covered by the same formula.
pub fn dcc_count_formula(n: u32, k: u32) -> u128 {
    let f = crate::fock::factorial(k);
    crate::fock::binomial(n, k) * f * f
}

impl CycleCover {
    /// Vertex-disjoint cycles as lists of sites, each cycle starting at its
    /// smallest vertex position.
    pub fn cycles(&self, g: &SculptingDigraph) -> Vec<Vec<SiteId>> {
        let nv = g.vertices.len();
        let succ: Vec<usize> = (0..nv)
            .map(|i| {
                g.vertices
                    .iter()
                    .position(|&v| v == g.edges[self.choice[i]].dst)
                    .unwrap()
            })
            .collect();
        let mut seen = vec![false; nv];
        let mut cycles = Vec::new();
        for start in 0..nv {
            if seen[start] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                cyc.push(g.vertices[cur]);
                cur = succ[cur];
            }
            cycles.push(cyc);
        }
        cycles
    }

    pub fn self_loop_count(&self, g: &SculptingDigraph) -> usize {
        self.choice
            .iter()
            .enumerate()
            .filter(|&(i, &e)| g.edges[e].src == g.vertices[i] && g.edges[e].dst == g.vertices[i])
            .count()
    }

    /// System vertices paired with their ancilla in a 2-cycle.
    pub fn system_two_cycle_count(&self, g: &SculptingDigraph) -> usize {
        self.cycles(g)
            .iter()
            .filter(|c| {
                c.len() == 2
                    && c.iter().any(|v| is_system(*v))
                    && c.iter().any(|v| matches!(v, SiteId::AncS(_)))
            })
            .count()
    }

    /// System vertices whose chosen cycle is a self-loop (these come out as
    /// logical `|1>` in the Dicke scheme, via the blue edge).
    pub fn self_loop_systems(&self, g: &SculptingDigraph) -> Vec<u16> {
        let mut v: Vec<u16> = self
            .choice
            .iter()
            .enumerate()
            .filter_map(|(i, &e)| match (g.vertices[i], &g.edges[e]) {
                (SiteId::Sys(j), edge) if edge.src == edge.dst => Some(j),
                _ => None,
            })
            .collect();
        v.sort();
        v
    }
}

impl SculptingBigraph {
    pub fn circle_index(&self, c: SiteId) -> Option<usize> {
        self.circles.iter().position(|&x| x == c)
    }

    /// Exhaustive perfect matchings by backtracking over dots with a
    /// used-circle bitmask.
    pub fn enumerate_perfect_matchings(&self) -> Vec<Matching> {
        let nd = self.dots.len();
        let nc = self.circles.len();
        assert!(nc <= 64, "matching enumeration supports at most 64 circles");
        if nd != nc {
            return Vec::new();
        }
        let per_dot: Vec<Vec<(usize, usize)>> = (0..nd)
            .map(|d| {
                self.edges
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.dot == d)
                    .map(|(i, e)| (self.circle_index(e.circle).unwrap(), i))
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        let mut pick = vec![0usize; nd];
        fn rec(
            d: usize,
            used: u64,
            per_dot: &[Vec<(usize, usize)>],
            pick: &mut Vec<usize>,
            out: &mut Vec<Matching>,
        ) {
            if d == per_dot.len() {
                out.push(Matching {
                    edges: pick.clone(),
                });
                return;
            }
            for &(c, e) in &per_dot[d] {
                if used & (1 << c) == 0 {
                    pick[d] = e;
                    rec(d + 1, used | (1 << c), per_dot, pick, out);
                }
            }
        }
        if nd == 0 {
            return vec![Matching { edges: vec![] }];
        }
        rec(0, 0, &per_dot, &mut pick, &mut out);
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "type": "bigraph",
            "n": self.n,
            "k": self.k,
            "circles": self.circles.iter().map(|&c| site_name(c)).collect::<Vec<_>>(),
            "dots": self.dots.iter().map(|&d| site_name(d)).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| json!({
                "circle": site_name(e.circle),
                "dot": e.dot,
                "color": e.color.name(),
                "weight": weight_to_json(&e.weight),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, GraphError> {
        let obj = v.as_object().ok_or_else(|| err("root must be an object"))?;
        if obj.get("type").and_then(Value::as_str) != Some("bigraph") {
            return Err(err("type must be \"bigraph\""));
        }
        let n = obj.get("n").and_then(Value::as_u64).ok_or_else(|| err("missing n"))? as u32;
        let k = obj.get("k").and_then(Value::as_u64).ok_or_else(|| err("missing k"))? as u32;
        let names = |key: &str| -> Result<Vec<SiteId>, GraphError> {
            obj.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| err("missing vertex list"))?
                .iter()
                .map(|x| {
                    x.as_str()
                        .and_then(site_from_name)
                        .ok_or_else(|| err("bad vertex name"))
                })
                .collect()
        };
        let circles = names("circles")?;
        let dots = names("dots")?;
        let edges = obj
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| err("missing edges"))?
            .iter()
            .map(|e| {
                Ok(BigraphEdge {
                    circle: e
                        .get("circle")
                        .and_then(Value::as_str)
                        .and_then(site_from_name)
                        .ok_or_else(|| err("bad edge circle"))?,
                    dot: e
                        .get("dot")
                        .and_then(Value::as_u64)
                        .ok_or_else(|| err("bad edge dot"))? as usize,
                    color: e
                        .get("color")
                        .and_then(Value::as_str)
                        .and_then(EdgeColor::from_name)
                        .ok_or_else(|| err("bad edge color"))?,
                    weight: weight_from_json(
                        e.get("weight").ok_or_else(|| err("missing weight"))?,
                    )?,
                })
            })
            .collect::<Result<Vec<_>, GraphError>>()?;
        Ok(SculptingBigraph {
            n,
            k,
            circles,
            dots,
            edges,
        })
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph sculpting {\n  rankdir=LR;\n");
        for &c in &self.circles {
            let _ = writeln!(s, "  \"c_{}\" [shape=circle];", site_name(c));
        }
        for (i, &d) in self.dots.iter().enumerate() {
            let _ = writeln!(
                s,
                "  \"d_{}\" [shape=point, xlabel=\"{}\"];",
                i,
                site_name(d)
            );
        }
        for e in &self.edges {
            let (color, style) = dot_attrs(e.color);
            let _ = writeln!(
                s,
                "  \"c_{}\" -- \"d_{}\" [color={}, style={}];",
                site_name(e.circle),
                e.dot,
                color,
                style
            );
        }
        s.push_str("}\n");
        s
    }
}

fn dot_attrs(c: EdgeColor) -> (&'static str, &'static str) {
    match c {
        EdgeColor::SolidBlack => ("black", "solid"),
        EdgeColor::DashedBlack => ("black", "dashed"),
        EdgeColor::Red => ("red", "solid"),
        EdgeColor::Blue => ("blue", "solid"),
    }
}

fn err(msg: &str) -> GraphError {
    GraphError::Parse(msg.to_string())
}

fn ratio_string(r: &BigRational) -> String {
    format!("{}", r)
}

/// Weight as a sum of `(rational complex) * sqrt(radicand)` components.
pub fn weight_to_json(w: &Exact) -> Value {
    let comps: Vec<Value> = w
        .terms()
        .map(|(s, c)| {
            json!({
                "re": ratio_string(&c.re),
                "im": ratio_string(&c.im),
                "radicand": s,
            })
        })
        .collect();
    Value::Array(comps)
}

pub fn weight_from_json(v: &Value) -> Result<Exact, GraphError> {
    let arr = v.as_array().ok_or_else(|| err("weight must be an array"))?;
    let mut acc = Exact::zero();
    for comp in arr {
        let re = comp
            .get("re")
            .and_then(Value::as_str)
            .ok_or_else(|| err("weight component missing re"))?;
        let im = comp
            .get("im")
            .and_then(Value::as_str)
            .ok_or_else(|| err("weight component missing im"))?;
        let s = comp
            .get("radicand")
            .and_then(Value::as_u64)
            .ok_or_else(|| err("weight component missing radicand"))?;
        let re = BigRational::from_str(re).map_err(|_| err("bad rational"))?;
        let im = BigRational::from_str(im).map_err(|_| err("bad rational"))?;
        let part = complex_ratio_to_exact(&Complex::new(re, im)).mul(&Exact::sqrt_ratio(s, 1));
        acc = acc.add(&part);
    }
    Ok(acc)
}

fn complex_ratio_to_exact(c: &Complex<BigRational>) -> Exact {
    let re = Exact::from_big_ratio(&c.re);
    if c.im.is_zero() {
        return re;
    }
    let i = Exact::root_of_unity(4, 1).unwrap();
    re.add(&Exact::from_big_ratio(&c.im).mul(&i))
}

fn parse_directed_edge(e: &Value) -> Result<DirectedEdge, GraphError> {
    Ok(DirectedEdge {
        src: e
            .get("source")
            .and_then(Value::as_str)
            .and_then(site_from_name)
            .ok_or_else(|| err("bad edge source"))?,
        dst: e
            .get("target")
            .and_then(Value::as_str)
            .and_then(site_from_name)
            .ok_or_else(|| err("bad edge target"))?,
        color: e
            .get("color")
            .and_then(Value::as_str)
            .and_then(EdgeColor::from_name)
            .ok_or_else(|| err("bad edge color"))?,
        weight: weight_from_json(e.get("weight").ok_or_else(|| err("missing weight"))?)?,
    })
}

/// Groups covers by their self-loop system set; used to confirm that all
/// covers sharing a placement carry one operator monomial.
pub fn covers_by_self_loops(
    g: &SculptingDigraph,
    covers: &[CycleCover],
) -> BTreeMap<Vec<u16>, Vec<usize>> {
    let mut map: BTreeMap<Vec<u16>, Vec<usize>> = BTreeMap::new();
    for (i, c) in covers.iter().enumerate() {
        map.entry(c.self_loop_systems(g)).or_default().push(i);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dicke_digraph_shape() {
        let g = SculptingDigraph::dicke(4, 2).unwrap();
        assert_eq!(g.vertices.len(), 10);
        // S<->T complete bipartite in both directions: 4*2 + 2*4 edges.
        let st = g
            .edges
            .iter()
            .filter(|e| matches!(e.src, SiteId::AncS(_)) && matches!(e.dst, SiteId::AncT(_)))
            .count();
        let ts = g
            .edges
            .iter()
            .filter(|e| matches!(e.src, SiteId::AncT(_)) && matches!(e.dst, SiteId::AncS(_)))
            .count();
        assert_eq!((st, ts), (8, 8));
        assert!(g.out_weights_normalized());

        let small = SculptingDigraph::dicke(2, 1).unwrap();
        assert_eq!(small.vertices.len(), 5);
        assert!(SculptingDigraph::dicke(0, 0).is_err());
        assert!(SculptingDigraph::dicke(3, 4).is_err());
    }

    #[test]
    fn dicke_digraph_is_epm() {
        for (n, k) in [(2, 1), (3, 1), (3, 2), (4, 2), (5, 3), (4, 0), (3, 3)] {
            let g = SculptingDigraph::dicke(n, k).unwrap();
            assert!(is_epm_digraph(&g), "D_{}^{} must be EPM", n, k);
        }
        let lonely = SculptingDigraph {
            n: 1,
            k: 0,
            vertices: vec![SiteId::Sys(1)],
            edges: vec![],
        };
        assert!(!is_epm_digraph(&lonely));
    }

    #[test]
    fn epm_rejects_surviving_double_hits() {
        // Two red in-edges on a system vertex survive a double hit ({0,0}
        // leaves +1), so the pattern is invalid.
        let mut g = SculptingDigraph::dicke(2, 1).unwrap();
        for e in g.edges.iter_mut() {
            if e.src == SiteId::Sys(1) && e.dst == SiteId::Sys(1) {
                e.color = EdgeColor::Red;
            }
        }
        assert!(!is_epm_digraph(&g));
    }

    #[test]
    fn deleted_edge_fixture_stays_epm() {
        // Removing one S->T edge keeps every local attachment pattern
        // valid; the graph just has fewer covers. Pinned as a regression
        // fixture for the checker's by-definition behavior.
        let mut g = SculptingDigraph::dicke(4, 2).unwrap();
        let pos = g
            .edges
            .iter()
            .position(|e| e.src == SiteId::AncS(1) && e.dst == SiteId::AncT(1))
            .unwrap();
        g.edges.remove(pos);
        assert!(is_epm_digraph(&g));
        let full = dcc_count_formula(4, 2) as usize;
        assert!(g.enumerate_dccs().len() < full);
    }

    #[test]
    fn dcc_counts_match_formula() {
        for (n, k, expect) in [(2u32, 1u32, 2u128), (4, 2, 24), (6, 3, 720), (5, 4, 2880)] {
            assert_eq!(dcc_count_formula(n, k), expect);
            let g = SculptingDigraph::dicke(n, k).unwrap();
            assert_eq!(g.enumerate_dccs().len() as u128, expect, "D_{}^{}", n, k);
        }
        assert_eq!(dcc_count_formula(6, 5), 86400);
    }

    #[test]
    fn covers_have_k_self_loops_and_strict_alternation() {
        for (n, k) in [(2u32, 1u32), (3, 1), (3, 2), (4, 2), (5, 3)] {
            let g = SculptingDigraph::dicke(n, k).unwrap();
            for cover in g.enumerate_dccs() {
                assert_eq!(cover.self_loop_count(&g), k as usize);
                assert_eq!(cover.system_two_cycle_count(&g), (n - k) as usize);
                for cyc in cover.cycles(&g) {
                    if cyc.iter().any(|v| matches!(v, SiteId::AncT(_))) {
                        // S<->T cycles alternate strictly.
                        assert!(cyc.len() % 2 == 0);
                        for (i, v) in cyc.iter().enumerate() {
                            let s_side = matches!(v, SiteId::AncS(_));
                            let first_s = matches!(cyc[0], SiteId::AncS(_));
                            assert_eq!(s_side, (i % 2 == 0) == first_s);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn single_cycle_digraph_has_one_cover() {
        let vs = [SiteId::Sys(1), SiteId::Sys(2), SiteId::Sys(3)];
        let g = SculptingDigraph {
            n: 3,
            k: 0,
            vertices: vs.to_vec(),
            edges: (0..3)
                .map(|i| DirectedEdge {
                    src: vs[i],
                    dst: vs[(i + 1) % 3],
                    color: EdgeColor::SolidBlack,
                    weight: Exact::one(),
                })
                .collect(),
        };
        assert_eq!(g.enumerate_dccs().len(), 1);
    }

    #[test]
    fn degenerate_ends() {
        let g0 = SculptingDigraph::dicke(3, 0).unwrap();
        assert_eq!(g0.vertices.len(), 3);
        let covers = g0.enumerate_dccs();
        assert_eq!(covers.len(), 1);
        assert_eq!(covers[0].self_loop_count(&g0), 3);

        let gn = SculptingDigraph::dicke(3, 3).unwrap();
        assert_eq!(gn.enumerate_dccs().len() as u128, dcc_count_formula(3, 3));
    }

    #[test]
    fn bigraph_conversion_preserves_structure() {
        let g = SculptingDigraph::dicke(4, 2).unwrap();
        let b = g.to_bigraph().unwrap();
        assert_eq!(b.circles.len(), b.dots.len());
        assert_eq!(b.edges.len(), g.edges.len());
        assert!(is_epm_bigraph(&b));
        // Count duality between representations.
        assert_eq!(
            b.enumerate_perfect_matchings().len(),
            g.enumerate_dccs().len()
        );

        let bad = SculptingDigraph {
            n: 1,
            k: 0,
            vertices: vec![SiteId::Sys(1), SiteId::Sys(2)],
            edges: vec![DirectedEdge {
                src: SiteId::Sys(1),
                dst: SiteId::Sys(2),
                color: EdgeColor::SolidBlack,
                weight: Exact::one(),
            }],
        };
        assert!(matches!(
            bad.to_bigraph(),
            Err(GraphError::UnrecognizedLocalPattern(_))
        ));
    }

    #[test]
    fn matching_enumeration_small_cases() {
        // 2x2 complete bipartite graph: two matchings.
        let complete = SculptingBigraph {
            n: 2,
            k: 0,
            circles: vec![SiteId::Sys(1), SiteId::Sys(2)],
            dots: vec![SiteId::Sys(1), SiteId::Sys(2)],
            edges: (0..2)
                .flat_map(|d| {
                    (1..=2u16).map(move |c| BigraphEdge {
                        circle: SiteId::Sys(c),
                        dot: d,
                        color: EdgeColor::SolidBlack,
                        weight: Exact::one(),
                    })
                })
                .collect(),
        };
        assert_eq!(complete.enumerate_perfect_matchings().len(), 2);

        // Path c1-d1-c2-d2: a single perfect matching.
        let path = SculptingBigraph {
            n: 2,
            k: 0,
            circles: vec![SiteId::Sys(1), SiteId::Sys(2)],
            dots: vec![SiteId::Sys(1), SiteId::Sys(2)],
            edges: vec![
                BigraphEdge {
                    circle: SiteId::Sys(1),
                    dot: 0,
                    color: EdgeColor::SolidBlack,
                    weight: Exact::one(),
                },
                BigraphEdge {
                    circle: SiteId::Sys(2),
                    dot: 0,
                    color: EdgeColor::SolidBlack,
                    weight: Exact::one(),
                },
                BigraphEdge {
                    circle: SiteId::Sys(2),
                    dot: 1,
                    color: EdgeColor::SolidBlack,
                    weight: Exact::one(),
                },
            ],
        };
        assert_eq!(path.enumerate_perfect_matchings().len(), 1);
    }

    #[test]
    fn relabeling_preserves_graph_and_covers() {
        let g = SculptingDigraph::dicke(4, 2).unwrap();
        let relabeled = g.relabel(&[3, 1, 4, 2], &[2, 1]);
        assert_eq!(g.canonical_edges(), relabeled.canonical_edges());
        assert_eq!(
            g.enumerate_dccs().len(),
            relabeled.enumerate_dccs().len()
        );
    }

    #[test]
    fn json_round_trips() {
        let g = SculptingDigraph::dicke(3, 2).unwrap();
        let back = SculptingDigraph::from_json(&g.to_json()).unwrap();
        assert_eq!(g.canonical_edges(), back.canonical_edges());
        assert_eq!(g.vertices, back.vertices);

        let b = g.to_bigraph().unwrap();
        let back = SculptingBigraph::from_json(&b.to_json()).unwrap();
        assert_eq!(b.circles, back.circles);
        assert_eq!(b.edges.len(), back.edges.len());
        for (x, y) in b.edges.iter().zip(back.edges.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn dot_exports_are_well_formed() {
        let g = SculptingDigraph::dicke(2, 1).unwrap();
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("->"));
        assert!(dot.contains("style=dashed") || dot.contains("style=solid"));
        let b = g.to_bigraph().unwrap().to_dot();
        assert!(b.starts_with("graph"));
        assert!(b.contains("--"));
    }

    #[test]
    fn cover_grouping_by_self_loops() {
        let g = SculptingDigraph::dicke(4, 2).unwrap();
        let covers = g.enumerate_dccs();
        let groups = covers_by_self_loops(&g, &covers);
        assert_eq!(groups.len(), 6);
        for (_, members) in groups {
            assert_eq!(members.len(), 4);
        }
    }
}
