//! Finite permutation groups on small domains, by full enumeration.
//!
//! Every group used here has order at most a few thousand (Sym(d) for d <= 4,
//! the wreath products of the coupled schemes), so closure under generators
//! with a hard bound beats any stabilizer-chain machinery on simplicity, and
//! the bound fails loudly if an input is out of range.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// A permutation of `{0..m-1}` stored as its image array.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm(Vec<u8>);

impl Perm {
    pub fn identity(m: usize) -> Perm {
        Perm((0..m as u8).collect())
    }

    pub fn from_images(img: Vec<u8>) -> Result<Perm> {
        let m = img.len();
        let mut seen = vec![false; m];
        for &x in &img {
            if (x as usize) >= m || seen[x as usize] {
                return Err(Error::InvalidPerm(format!("{img:?}")));
            }
            seen[x as usize] = true;
        }
        Ok(Perm(img))
    }

    /// Transposition (a b) on m points.
    pub fn transposition(m: usize, a: u8, b: u8) -> Perm {
        let mut img: Vec<u8> = (0..m as u8).collect();
        img.swap(a as usize, b as usize);
        Perm(img)
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn apply(&self, x: u8) -> u8 {
        self.0[x as usize]
    }

    pub fn images(&self) -> &[u8] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &x)| i as u8 == x)
    }

    /// Composition acting left-after-right: `(f.compose(g))(x) = f(g(x))`.
    pub fn compose(&self, g: &Perm) -> Perm {
        debug_assert_eq!(self.degree(), g.degree());
        Perm(g.0.iter().map(|&x| self.0[x as usize]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut img = vec![0u8; self.0.len()];
        for (i, &x) in self.0.iter().enumerate() {
            img[x as usize] = i as u8;
        }
        Perm(img)
    }

    pub fn fixes(&self, x: u8) -> bool {
        self.apply(x) == x
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Serialize for Perm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Perm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let img = Vec::<u8>::deserialize(d)?;
        Perm::from_images(img).map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_ENUMERATION_BOUND: usize = 1_000_000;

/// A permutation group with its full element set cached at construction.
/// Groups compare equal iff their sorted element sets are equal.
#[derive(Clone, PartialEq, Eq)]
pub struct PermGroup {
    domain: usize,
    generators: Vec<Perm>,
    elements: Vec<Perm>, // sorted, so binary search doubles as membership
}

impl PermGroup {
    pub fn new(domain: usize, generators: Vec<Perm>) -> Result<PermGroup> {
        Self::with_bound(domain, generators, DEFAULT_ENUMERATION_BOUND)
    }

    pub fn with_bound(domain: usize, generators: Vec<Perm>, bound: usize) -> Result<PermGroup> {
        for g in &generators {
            if g.degree() != domain {
                return Err(Error::InvalidPerm(format!(
                    "generator degree {} != domain {domain}",
                    g.degree()
                )));
            }
        }
        let mut elements: BTreeSet<Perm> = BTreeSet::new();
        elements.insert(Perm::identity(domain));
        let mut frontier: Vec<Perm> = elements.iter().cloned().collect();
        while let Some(g) = frontier.pop() {
            for s in &generators {
                let h = s.compose(&g);
                if !elements.contains(&h) {
                    if elements.len() >= bound {
                        return Err(Error::EnumerationBound(bound));
                    }
                    elements.insert(h.clone());
                    frontier.push(h);
                }
            }
        }
        Ok(PermGroup {
            domain,
            generators,
            elements: elements.into_iter().collect(),
        })
    }

    pub fn trivial(domain: usize) -> PermGroup {
        PermGroup::new(domain, vec![]).unwrap()
    }

    pub fn symmetric(domain: usize) -> PermGroup {
        let mut gens = vec![];
        if domain >= 2 {
            gens.push(Perm::transposition(domain, 0, 1));
            // Full cycle.
            let img: Vec<u8> = (0..domain as u8).map(|i| (i + 1) % domain as u8).collect();
            gens.push(Perm(img));
        }
        PermGroup::new(domain, gens).unwrap()
    }

    /// Cyclic group generated by the full cycle (0 1 ... m-1).
    pub fn cyclic(domain: usize) -> PermGroup {
        let img: Vec<u8> = (0..domain as u8).map(|i| (i + 1) % domain as u8).collect();
        PermGroup::new(domain, vec![Perm(img)]).unwrap()
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn generators(&self) -> &[Perm] {
        &self.generators
    }

    pub fn elements(&self) -> &[Perm] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, g: &Perm) -> bool {
        self.elements.binary_search(g).is_ok()
    }

    /// Index of an element in the sorted element list.
    pub fn element_index(&self, g: &Perm) -> Option<usize> {
        self.elements.binary_search(g).ok()
    }

    pub fn identity(&self) -> Perm {
        Perm::identity(self.domain)
    }

    pub fn orbit(&self, x: u8) -> Vec<u8> {
        let mut orb: BTreeSet<u8> = BTreeSet::new();
        for g in &self.elements {
            orb.insert(g.apply(x));
        }
        orb.into_iter().collect()
    }

    pub fn point_stabilizer(&self, x: u8) -> PermGroup {
        let elements: Vec<Perm> = self.elements.iter().filter(|g| g.fixes(x)).cloned().collect();
        PermGroup {
            domain: self.domain,
            generators: elements.clone(),
            elements,
        }
    }

    /// True iff the natural action on the domain is transitive.
    pub fn is_transitive(&self) -> bool {
        self.domain > 0 && self.orbit(0).len() == self.domain
    }
}

impl fmt::Debug for PermGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PermGroup(domain={}, order={})", self.domain, self.order())
    }
}

/// True iff g lies in the coset h·B.
pub fn in_coset(g: &Perm, h: &Perm, b: &PermGroup) -> bool {
    b.contains(&h.inverse().compose(g))
}

/// The wreath product Sym(n) wr C of the coupled schemes, acting on
/// `Z/n x Z/n` with the point (i, j) encoded as `i*n + j`. The j-th copy of
/// Sym(n) permutes `{(i, j) : i}` and fixes the other columns; the cyclic top
/// sends (i, j) to (i, j+1). Order (n!)^n * n.
pub fn wreath_sym_cyclic(n: usize) -> Result<WreathGroup> {
    if n < 2 {
        return Err(Error::Precondition(format!("wreath requires n >= 2, got {n}")));
    }
    let m = n * n;
    let point = |i: usize, j: usize| (i * n + j) as u8;
    let mut gens: Vec<Perm> = Vec::new();
    let mut block_gens: Vec<Vec<Perm>> = vec![Vec::new(); n];
    for j in 0..n {
        // Sym(n) on column j: a transposition and an n-cycle.
        let t = Perm::transposition(m, point(0, j), point(1, j));
        block_gens[j].push(t.clone());
        gens.push(t);
        if n > 2 {
            let mut img: Vec<u8> = (0..m as u8).collect();
            for i in 0..n {
                img[point(i, j) as usize] = point((i + 1) % n, j);
            }
            let c = Perm(img);
            block_gens[j].push(c.clone());
            gens.push(c);
        }
    }
    // Top cycle: (i, j) -> (i, j+1).
    let mut img: Vec<u8> = vec![0; m];
    for i in 0..n {
        for j in 0..n {
            img[point(i, j) as usize] = point(i, (j + 1) % n);
        }
    }
    let top = Perm(img);
    gens.push(top.clone());
    let group = PermGroup::new(m, gens)?;
    let blocks = block_gens
        .into_iter()
        .map(|g| PermGroup::new(m, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(WreathGroup { n, group, blocks, top })
}

/// Sym(n) wr C together with its block subgroups S_j and the top generator.
#[derive(Debug, Clone)]
pub struct WreathGroup {
    pub n: usize,
    pub group: PermGroup,
    /// blocks[j] = S_j, the copy of Sym(n) acting on column j.
    pub blocks: Vec<PermGroup>,
    pub top: Perm,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerate_examples() {
        let g = PermGroup::new(2, vec![Perm::transposition(2, 0, 1)]).unwrap();
        assert_eq!(g.order(), 2);
        assert_eq!(PermGroup::symmetric(3).order(), 6);
        assert_eq!(wreath_sym_cyclic(2).unwrap().group.order(), 8);
    }

    #[test]
    fn enumeration_bound_fails_loudly() {
        let r = PermGroup::with_bound(5, PermGroup::symmetric(5).generators().to_vec(), 50);
        assert!(matches!(r, Err(Error::EnumerationBound(50))));
    }

    #[test]
    fn stabilizer_examples() {
        let s3 = PermGroup::symmetric(3);
        assert_eq!(s3.point_stabilizer(0).order(), 2);
        let w = wreath_sym_cyclic(2).unwrap();
        // Stab of (0,0) = point 0: order 8 / orbit 4 = 2.
        assert_eq!(w.group.point_stabilizer(0).order(), 2);
        let t = PermGroup::trivial(4);
        assert_eq!(t.point_stabilizer(2).order(), 1);
    }

    #[test]
    fn orbit_stabilizer() {
        for g in [
            PermGroup::symmetric(4),
            PermGroup::cyclic(5),
            wreath_sym_cyclic(2).unwrap().group,
            wreath_sym_cyclic(3).unwrap().group,
        ] {
            for x in 0..g.domain() as u8 {
                assert_eq!(g.order(), g.orbit(x).len() * g.point_stabilizer(x).order());
            }
        }
    }

    #[test]
    fn wreath_examples() {
        let w2 = wreath_sym_cyclic(2).unwrap();
        assert_eq!(w2.group.domain(), 4);
        assert_eq!(w2.group.order(), 8);
        let w3 = wreath_sym_cyclic(3).unwrap();
        assert_eq!(w3.group.order(), 6 * 6 * 6 * 3);
        // Top generator maps (0,0) to (0,1): point 0 -> point 1 for n=2.
        assert_eq!(w2.top.apply(0), 1);
        let w3top = &w3.top;
        assert_eq!(w3top.apply(0), 1); // (0,0) -> (0,1) with n=3: 0 -> 1
    }

    #[test]
    fn wreath_preserves_columns_up_to_shift() {
        let w = wreath_sym_cyclic(3).unwrap();
        let n = 3u8;
        for g in w.group.elements() {
            // Column of the image of (i, j) must not depend on i.
            for j in 0..n {
                let col0 = g.apply(j) % n;
                for i in 1..n {
                    assert_eq!(g.apply(i * n + j) % n, col0);
                }
            }
        }
    }

    #[test]
    fn in_coset_examples() {
        let w = wreath_sym_cyclic(2).unwrap();
        let s0 = &w.blocks[0];
        let id = w.group.identity();
        let g = w.group.elements()[3].clone();
        assert!(in_coset(&g, &g, s0));
        assert!(!in_coset(&w.top, &id, s0));
        let pi0 = Perm::transposition(4, 0, 2); // column-0 swap: (0,0)<->(1,0)
        assert!(s0.contains(&pi0));
        assert!(in_coset(&pi0, &id, s0));
    }

    #[test]
    fn coset_relation_partitions() {
        let w = wreath_sym_cyclic(2).unwrap();
        let b = &w.blocks[1];
        let mut cells: std::collections::BTreeMap<Vec<Perm>, usize> = Default::default();
        for g in w.group.elements() {
            let mut cell: Vec<Perm> = b.elements().iter().map(|x| g.compose(x)).collect();
            cell.sort();
            *cells.entry(cell).or_default() += 1;
        }
        assert_eq!(cells.len(), w.group.order() / b.order());
        assert!(cells.values().all(|&c| c == b.order()));
    }
}
