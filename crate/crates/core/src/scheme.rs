//! Group schemes (which tree automorphisms belong to G) and exactly
//! represented elements.
//!
//! An element is a cocycle: the image of the base vertex plus a local action
//! `sigma(v)` at every vertex, stored explicitly up to a depth D with the
//! constant-tail rule `sigma(v) = sigma(ancestor of v at depth D)` below.
//! Constant tails are closed under composition and inversion and are legal in
//! every scheme (the deep coupling differences are the identity).
//!
//! Legality of an assignment has three parts:
//!   - membership: sigma(v) lies in the scheme's local group;
//!   - edge compatibility: for every edge (v, w) of color c,
//!     sigma(v)(c) = sigma(w)(c) (the image edge has a single color);
//!   - coupling (coupled-wreath only): sigma(v)^{-1} sigma(w) lies in the
//!     block S_j of the edge color's column j.

use crate::error::{Error, Result};
use crate::perm::{wreath_sym_cyclic, Perm, PermGroup};
use crate::tree::{Color, End, TreeParams, Vertex};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemeKind {
    /// All automorphisms of the colored tree: U(Sym(d)).
    Full,
    /// Burger-Mozes universal group U(F).
    Universal,
    /// The coupled-wreath subgroup of U(Sym(n) wr C) on d = n^2 colors,
    /// where adjacent local actions differ by an element of the edge block.
    CoupledWreath { n: usize },
}

/// The local constraint system defining the group G.
pub struct GroupScheme {
    params: TreeParams,
    kind: SchemeKind,
    local: PermGroup,
    /// Coupled-wreath blocks S_j, indexed by column j; the block of an edge
    /// of color c = (i, j) encoded as i*n + j is `blocks[c % n]`.
    blocks: Option<Vec<PermGroup>>,
    degenerate: bool,
}

impl fmt::Debug for GroupScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupScheme({:?}, d={})", self.kind, self.degree())
    }
}

impl PartialEq for GroupScheme {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.params == other.params && self.local == other.local
    }
}
impl Eq for GroupScheme {}

impl GroupScheme {
    pub fn full(degree: u8) -> Result<Arc<GroupScheme>> {
        let params = TreeParams::new(degree)?;
        Ok(Arc::new(GroupScheme {
            params,
            kind: SchemeKind::Full,
            local: PermGroup::symmetric(degree as usize),
            blocks: None,
            degenerate: false,
        }))
    }

    pub fn universal(f: PermGroup) -> Result<Arc<GroupScheme>> {
        let params = TreeParams::new(f.domain() as u8)?;
        let degenerate = !f.is_transitive();
        Ok(Arc::new(GroupScheme {
            params,
            kind: SchemeKind::Universal,
            local: f,
            blocks: None,
            degenerate,
        }))
    }

    pub fn coupled_wreath(n: usize) -> Result<Arc<GroupScheme>> {
        let w = wreath_sym_cyclic(n)?;
        let params = TreeParams::new((n * n) as u8)?;
        Ok(Arc::new(GroupScheme {
            params,
            kind: SchemeKind::CoupledWreath { n },
            local: w.group,
            blocks: Some(w.blocks),
            degenerate: false,
        }))
    }

    pub fn params(&self) -> TreeParams {
        self.params
    }

    pub fn degree(&self) -> u8 {
        self.params.degree()
    }

    pub fn kind(&self) -> &SchemeKind {
        &self.kind
    }

    /// The permitted local actions F (Sym(d) for the full scheme, the wreath
    /// product A for coupled schemes).
    pub fn local_group(&self) -> &PermGroup {
        &self.local
    }

    /// Flagged when the scale theory degenerates (non-transitive local
    /// action); such schemes are still accepted.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Column block index of an edge color, for coupled schemes.
    pub fn block_of_color(&self, c: Color) -> Option<usize> {
        match self.kind {
            SchemeKind::CoupledWreath { n } => Some(c as usize % n),
            _ => None,
        }
    }

    pub fn block(&self, j: usize) -> Option<&PermGroup> {
        self.blocks.as_ref().map(|b| &b[j])
    }

    /// Check the constraint on one edge of color `c` between local actions
    /// `sv` (at v) and `sw` (at w): compatibility plus coupling.
    pub fn edge_ok(&self, c: Color, sv: &Perm, sw: &Perm) -> bool {
        if sv.apply(c) != sw.apply(c) {
            return false;
        }
        match self.block_of_color(c) {
            None => true,
            Some(j) => self.blocks.as_ref().unwrap()[j].contains(&sv.inverse().compose(sw)),
        }
    }

    pub fn identity_perm(&self) -> Perm {
        self.local.identity()
    }
}

/// An exactly represented element of G: image of the base vertex plus local
/// actions on the ball of radius `depth`, with constant tails below.
#[derive(Clone)]
pub struct CocycleElement {
    scheme: Arc<GroupScheme>,
    base: Vertex,
    depth: usize,
    sigma: BTreeMap<Vertex, Perm>,
}

impl PartialEq for CocycleElement {
    fn eq(&self, other: &Self) -> bool {
        self.scheme == other.scheme
            && self.base == other.base
            && self.depth == other.depth
            && self.sigma == other.sigma
    }
}
impl Eq for CocycleElement {}

impl fmt::Debug for CocycleElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CocycleElement(base={}, depth={}, |sigma|={})",
            self.base,
            self.depth,
            self.sigma.len()
        )
    }
}

fn ball_vertices(params: TreeParams, depth: usize) -> Vec<Vertex> {
    let mut out = vec![Vertex::base()];
    let mut frontier = vec![Vertex::base()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for v in &frontier {
            for c in params.colors() {
                if let Some(w) = v.child(c) {
                    out.push(w.clone());
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    out
}

impl CocycleElement {
    /// Build an element from explicit data and validate legality. The sigma
    /// map must cover every vertex of depth <= depth.
    pub fn new(
        scheme: Arc<GroupScheme>,
        base: Vertex,
        depth: usize,
        sigma: BTreeMap<Vertex, Perm>,
    ) -> Result<CocycleElement> {
        let el = CocycleElement { scheme, base, depth, sigma };
        el.check_legal()?;
        Ok(el.normalized())
    }

    pub fn identity(scheme: Arc<GroupScheme>) -> CocycleElement {
        let id = scheme.identity_perm();
        let mut sigma = BTreeMap::new();
        sigma.insert(Vertex::base(), id);
        CocycleElement {
            scheme,
            base: Vertex::base(),
            depth: 0,
            sigma,
        }
    }

    pub fn scheme(&self) -> &Arc<GroupScheme> {
        &self.scheme
    }

    pub fn base_image(&self) -> &Vertex {
        &self.base
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn sigma_map(&self) -> &BTreeMap<Vertex, Perm> {
        &self.sigma
    }

    /// The local action at any vertex (explicit or via the constant tail).
    pub fn local_action(&self, v: &Vertex) -> &Perm {
        let key = v.ancestor(self.depth);
        self.sigma
            .get(&key)
            .unwrap_or_else(|| panic!("incomplete sigma map at {key}"))
    }

    fn check_legal(&self) -> Result<()> {
        let verts = ball_vertices(self.scheme.params(), self.depth);
        for v in &verts {
            let sv = self
                .sigma
                .get(v)
                .ok_or_else(|| Error::MissingSigma(v.to_string(), self.depth))?;
            if sv.degree() != self.scheme.degree() as usize {
                return Err(Error::IllegalElement(format!(
                    "sigma({v}) has degree {}",
                    sv.degree()
                )));
            }
            if !self.scheme.local_group().contains(sv) {
                return Err(Error::IllegalElement(format!(
                    "sigma({v}) not in the local group"
                )));
            }
        }
        // Edge constraints within the explicit ball. Edges across the tail
        // boundary compare a vertex against its own tail copy and hold
        // automatically.
        for v in &verts {
            let sv = &self.sigma[v];
            for c in self.scheme.params().colors() {
                if let Some(w) = v.child(c) {
                    if w.depth() <= self.depth {
                        let sw = &self.sigma[&w];
                        if !self.scheme.edge_ok(c, sv, sw) {
                            return Err(Error::IllegalElement(format!(
                                "edge ({v},{w}) violates the scheme constraints"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Trim the depth while every deepest-level sigma equals its parent's.
    fn normalized(mut self) -> CocycleElement {
        while self.depth > 0 {
            let d = self.depth;
            let all_tail = self
                .sigma
                .iter()
                .filter(|(v, _)| v.depth() == d)
                .all(|(v, s)| self.sigma[&v.parent().unwrap()] == *s);
            if !all_tail {
                break;
            }
            self.sigma.retain(|v, _| v.depth() < d);
            self.depth = d - 1;
        }
        self
    }

    /// Image of a vertex: walk the address from the base vertex, transporting
    /// each step through the local action at the current preimage vertex.
    pub fn apply(&self, v: &Vertex) -> Vertex {
        let mut pre = Vertex::base();
        let mut img = self.base.clone();
        for &c in v.word() {
            img = img.neighbor(self.local_action(&pre).apply(c));
            pre = pre.neighbor(c);
        }
        img
    }

    /// Preimage of a vertex (the image of v under the inverse element).
    pub fn apply_inverse(&self, x: &Vertex) -> Vertex {
        let mut pre = Vertex::base();
        let mut img = self.base.clone();
        let path = crate::tree::geodesic(&self.base, x);
        for pair in path.vertices().windows(2) {
            let c_img = pair[0].edge_color_to(&pair[1]).unwrap();
            let c_pre = self.local_action(&pre).inverse().apply(c_img);
            pre = pre.neighbor(c_pre);
            img = img.neighbor(c_img);
        }
        debug_assert_eq!(img, *x);
        pre
    }

    pub fn is_identity(&self) -> bool {
        self.base.is_base() && self.depth == 0 && self.sigma[&Vertex::base()].is_identity()
    }

    /// Exact cocycle of the composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &CocycleElement) -> CocycleElement {
        assert!(self.scheme == other.scheme, "elements of different schemes");
        let depth = self.depth + other.depth + other.base.depth();
        let base = self.apply(&other.base);
        let mut sigma = BTreeMap::new();
        for v in ball_vertices(self.scheme.params(), depth) {
            let hv = other.apply(&v);
            let s = self.local_action(&hv).compose(other.local_action(&v));
            sigma.insert(v, s);
        }
        CocycleElement {
            scheme: self.scheme.clone(),
            base,
            depth,
            sigma,
        }
        .normalized()
    }

    /// Exact cocycle of the inverse.
    pub fn invert(&self) -> CocycleElement {
        let depth = self.depth + self.base.depth();
        let base = self.apply_inverse(&Vertex::base());
        let mut sigma = BTreeMap::new();
        for v in ball_vertices(self.scheme.params(), depth) {
            let pre = self.apply_inverse(&v);
            sigma.insert(v, self.local_action(&pre).inverse());
        }
        CocycleElement {
            scheme: self.scheme.clone(),
            base,
            depth,
            sigma,
        }
        .normalized()
    }

    pub fn pow(&self, k: i64) -> CocycleElement {
        let mut acc = CocycleElement::identity(self.scheme.clone());
        let g = if k >= 0 { self.clone() } else { self.invert() };
        for _ in 0..k.unsigned_abs() {
            acc = acc.compose(&g);
        }
        acc
    }

    /// Image of an eventually periodic end, by period detection on the
    /// images of deep ray vertices.
    pub fn apply_end(&self, xi: &End) -> Result<End> {
        let p = xi.period().len();
        let ord = order_bound(self.scheme.local_group().order());
        let need = xi.prefix().depth() + self.depth + self.base.depth() + 2 * p * ord + 4;
        let img = self.apply(&xi.word_vertex(need));
        End::detect(img.word(), p * ord).ok_or(Error::PeriodNotDetected(need))
    }
}

/// A small bound on element orders in a group of the given order.
fn order_bound(group_order: usize) -> usize {
    group_order.min(30)
}

/// Named element constructions.
pub mod builtin {
    use super::*;

    /// A translation of length 1 with constant local action. For universal
    /// schemes the local action is the full cycle when available (otherwise
    /// the first generator moving a color); for coupled schemes it is the
    /// wreath top, with the axis edge (x_j, x_{j+1}) colored (0, j mod n).
    pub fn standard_translation(scheme: &Arc<GroupScheme>) -> Result<CocycleElement> {
        let (perm, c0) = match scheme.kind() {
            SchemeKind::CoupledWreath { n } => {
                let w = wreath_sym_cyclic(*n)?;
                (w.top, 0u8)
            }
            _ => {
                let f = scheme.local_group();
                let d = scheme.degree();
                let cycle = Perm::from_images((0..d).map(|i| (i + 1) % d).collect())?;
                if f.contains(&cycle) {
                    (cycle, 0u8)
                } else {
                    let mut found = None;
                    'search: for g in f.elements() {
                        for c in 0..d {
                            if g.apply(c) != c {
                                found = Some((g.clone(), c));
                                break 'search;
                            }
                        }
                    }
                    found.ok_or_else(|| {
                        Error::IllegalElement(
                            "scheme admits no hyperbolic translation (trivial local action)"
                                .into(),
                        )
                    })?
                }
            }
        };
        let base = Vertex::base().neighbor(c0);
        let mut sigma = BTreeMap::new();
        sigma.insert(Vertex::base(), perm);
        CocycleElement::new(scheme.clone(), base, 0, sigma)
    }

    /// An element fixing everything outside the subtree under `at`, acting
    /// by `perm` on the local actions of the whole subtree (the canonical
    /// constant tail). For a non-base vertex the incoming edge color must be
    /// fixed by `perm`, and in coupled schemes `perm` must lie in the block
    /// of the incoming edge; otherwise the element is not legal.
    pub fn local_perturbation(
        scheme: &Arc<GroupScheme>,
        at: &Vertex,
        perm: Perm,
    ) -> Result<CocycleElement> {
        if !scheme.local_group().contains(&perm) {
            return Err(Error::IllegalElement(
                "perturbation permutation not in the local group".into(),
            ));
        }
        let id = scheme.identity_perm();
        if let Some(c_in) = at.last() {
            if !scheme.edge_ok(c_in, &id, &perm) {
                return Err(Error::IllegalElement(format!(
                    "perturbation at {at} violates the scheme constraints on its incoming edge"
                )));
            }
        }
        let depth = at.depth();
        let mut sigma = BTreeMap::new();
        for v in ball_vertices(scheme.params(), depth) {
            let s = if v == *at { perm.clone() } else { id.clone() };
            sigma.insert(v, s);
        }
        CocycleElement::new(scheme.clone(), Vertex::base(), depth, sigma)
    }
}

/// JSON description of a scheme, per the group-spec file format.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum SchemeSpec {
    Full { degree: u8 },
    Universal { degree: u8, f: GroupSpecJson },
    CoupledWreath { n: usize },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GroupSpecJson {
    pub domain: usize,
    pub generators: Vec<Vec<u8>>,
}

impl SchemeSpec {
    pub fn build(&self) -> Result<Arc<GroupScheme>> {
        match self {
            SchemeSpec::Full { degree } => GroupScheme::full(*degree),
            SchemeSpec::Universal { degree, f } => {
                if f.domain != *degree as usize {
                    return Err(Error::Parse(format!(
                        "F domain {} != degree {degree}",
                        f.domain
                    )));
                }
                let gens = f
                    .generators
                    .iter()
                    .map(|g| Perm::from_images(g.clone()))
                    .collect::<Result<Vec<_>>>()?;
                GroupScheme::universal(PermGroup::new(f.domain, gens)?)
            }
            SchemeSpec::CoupledWreath { n } => GroupScheme::coupled_wreath(*n),
        }
    }
}

/// JSON description of an element.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementSpec {
    Builtin {
        builtin: String,
        #[serde(default)]
        vertex: Option<Vertex>,
        #[serde(default)]
        perm: Option<Vec<u8>>,
        #[serde(default)]
        power: Option<i64>,
    },
    Explicit {
        base_image: Vertex,
        depth: usize,
        sigma: BTreeMap<String, Vec<u8>>,
    },
}

impl ElementSpec {
    pub fn build(&self, scheme: &Arc<GroupScheme>) -> Result<CocycleElement> {
        match self {
            ElementSpec::Builtin { builtin, vertex, perm, power } => {
                let g = match builtin.as_str() {
                    "identity" => CocycleElement::identity(scheme.clone()),
                    "standard_translation" => builtin::standard_translation(scheme)?,
                    "local_perturbation" => {
                        let v = vertex.clone().ok_or_else(|| {
                            Error::Parse("local_perturbation requires \"vertex\"".into())
                        })?;
                        let p = perm
                            .clone()
                            .ok_or_else(|| Error::Parse("local_perturbation requires \"perm\"".into()))?;
                        builtin::local_perturbation(scheme, &v, Perm::from_images(p)?)?
                    }
                    other => return Err(Error::Parse(format!("unknown builtin element {other:?}"))),
                };
                Ok(match power {
                    Some(k) => g.pow(*k),
                    None => g,
                })
            }
            ElementSpec::Explicit { base_image, depth, sigma } => {
                let mut map = BTreeMap::new();
                for (k, v) in sigma {
                    map.insert(Vertex::parse(k)?, Perm::from_images(v.clone())?);
                }
                CocycleElement::new(scheme.clone(), base_image.clone(), *depth, map)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Vertex {
        Vertex::parse(s).unwrap()
    }

    #[test]
    fn identity_is_legal_everywhere() {
        for scheme in [
            GroupScheme::full(3).unwrap(),
            GroupScheme::universal(PermGroup::cyclic(3)).unwrap(),
            GroupScheme::coupled_wreath(2).unwrap(),
        ] {
            let id = CocycleElement::identity(scheme);
            assert!(id.is_identity());
            assert_eq!(id.apply(&v("0.1")), v("0.1"));
        }
    }

    #[test]
    fn coupled_edge_constraint_rejects() {
        // sigma(eps) = top cycle, sigma at a depth-1 vertex = identity:
        // c^{-1} * id = c^{-1} is not in any block, so the element is illegal.
        let scheme = GroupScheme::coupled_wreath(2).unwrap();
        let w = wreath_sym_cyclic(2).unwrap();
        let id = scheme.identity_perm();
        let mut sigma = BTreeMap::new();
        sigma.insert(Vertex::base(), w.top.clone());
        for c in 0..4u8 {
            sigma.insert(v(&c.to_string()), id.clone());
        }
        let r = CocycleElement::new(scheme, Vertex::base(), 1, sigma);
        assert!(matches!(r, Err(Error::IllegalElement(_))));
    }

    #[test]
    fn standard_translation_is_legal_and_translates() {
        let scheme = GroupScheme::coupled_wreath(2).unwrap();
        let g = builtin::standard_translation(&scheme).unwrap();
        // Axis vertices x_0 = eps, x_1 = "0", x_2 = "0.1" (colors (0,0),(0,1)).
        assert_eq!(g.apply(&Vertex::base()), v("0"));
        assert_eq!(g.apply(&v("0")), v("0.1"));
        assert_eq!(g.apply(&v("0.1")), v("0.1.0"));
        // Backwards: x_{-1} = "1" (edge color (0,1) = 1).
        assert_eq!(g.apply(&v("1")), Vertex::base());
    }

    #[test]
    fn compose_invert_axioms() {
        let scheme = GroupScheme::full(3).unwrap();
        let g = builtin::standard_translation(&scheme).unwrap();
        let h = builtin::local_perturbation(&scheme, &v("0"), Perm::transposition(3, 1, 2)).unwrap();
        let gi = g.invert();
        assert!(g.compose(&gi).is_identity());
        assert!(gi.compose(&g).is_identity());
        // Associativity on a triple, as exact cocycle equality.
        let a = g.compose(&h).compose(&gi);
        let b = g.compose(&h.compose(&gi));
        assert_eq!(a, b);
        // apply agrees with composition pointwise.
        for x in ball_vertices(scheme.params(), 4) {
            assert_eq!(g.compose(&h).apply(&x), g.apply(&h.apply(&x)));
        }
    }

    #[test]
    fn perturbation_fixes_base_and_is_local() {
        let scheme = GroupScheme::coupled_wreath(2).unwrap();
        // A swap inside S_0 fixing the incoming color: at eps anything in A
        // is allowed; column-0 swap (0,0)<->(1,0) is points 0<->2.
        let p = Perm::transposition(4, 0, 2);
        let h = builtin::local_perturbation(&scheme, &Vertex::base(), p).unwrap();
        assert_eq!(h.apply(&Vertex::base()), Vertex::base());
        // Moves the (0,0)-neighbor "0" to the (1,0)-neighbor "2".
        assert_eq!(h.apply(&v("0")), v("2"));
        assert_eq!(h.apply(&v("1")), v("1"));
    }

    #[test]
    fn perturbation_must_fix_incoming_edge() {
        let scheme = GroupScheme::full(3).unwrap();
        // At vertex "0" the incoming color is 0; a perm moving 0 is illegal.
        let r = builtin::local_perturbation(&scheme, &v("0"), Perm::transposition(3, 0, 1));
        assert!(r.is_err());
        let ok = builtin::local_perturbation(&scheme, &v("0"), Perm::transposition(3, 1, 2));
        assert!(ok.is_ok());
    }

    #[test]
    fn depth_bound_of_composition() {
        let scheme = GroupScheme::full(3).unwrap();
        let g = builtin::local_perturbation(&scheme, &v("0.1"), Perm::transposition(3, 0, 2)).unwrap();
        let h = builtin::standard_translation(&scheme).unwrap();
        let gh = g.compose(&h);
        assert!(gh.depth() <= g.depth() + h.depth() + h.base_image().depth());
    }

    #[test]
    fn apply_end_translates_axis_end() {
        let scheme = GroupScheme::full(3).unwrap();
        let g = builtin::standard_translation(&scheme).unwrap();
        // The local action is the 3-cycle, so the axis colors run 0,1,2,...
        let xi = End::new(Vertex::base(), vec![0, 1, 2]).unwrap();
        assert_eq!(g.apply_end(&xi).unwrap(), xi);
        let xi_back = End::new(Vertex::base(), vec![2, 1, 0]).unwrap();
        assert_eq!(g.apply_end(&xi_back).unwrap(), xi_back);
        // An end the translation moves.
        let other = End::new(Vertex::parse("1").unwrap(), vec![0, 1]).unwrap();
        let moved = g.apply_end(&other).unwrap();
        assert_ne!(moved, other);
    }

    #[test]
    fn element_spec_roundtrip() {
        let scheme = GroupScheme::coupled_wreath(2).unwrap();
        let spec: ElementSpec =
            serde_json::from_str(r#"{"builtin":"standard_translation"}"#).unwrap();
        let g = spec.build(&scheme).unwrap();
        assert_eq!(g, builtin::standard_translation(&scheme).unwrap());
        let spec: SchemeSpec = serde_json::from_str(r#"{"scheme":"full","degree":3}"#).unwrap();
        assert_eq!(spec.build().unwrap().degree(), 3);
    }
}
