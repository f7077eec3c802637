//! Geometry of the d-regular edge-colored tree.
//!
//! Vertices are addressed by non-backtracking color words over `{0..d-1}`
//! starting from the base vertex (the empty word). Moving along color `c`
//! from `v` pops the last letter if it equals `c` and appends `c` otherwise,
//! so each operation is an involution and the coordinate system is total:
//! no adjacency structure is ever materialized.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

pub type Color = u8;

/// Parameters of the tree: the degree d >= 3. Trees are 0-hyperbolic; the
/// thinness constant is fixed at zero and exposed only for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    degree: u8,
}

impl TreeParams {
    pub fn new(degree: u8) -> Result<Self> {
        if degree < 3 {
            return Err(Error::DegreeTooSmall(degree));
        }
        Ok(TreeParams { degree })
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    /// Hyperbolicity constant of the tree.
    pub fn delta(&self) -> u32 {
        0
    }

    pub fn colors(&self) -> impl Iterator<Item = Color> {
        0..self.degree
    }
}

/// A vertex address: a non-backtracking color word from the base vertex.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Vertex(Vec<Color>);

impl Vertex {
    pub fn base() -> Self {
        Vertex(Vec::new())
    }

    pub fn from_word(word: Vec<Color>) -> Result<Self> {
        for i in 1..word.len() {
            if word[i] == word[i - 1] {
                return Err(Error::Backtracking(i));
            }
        }
        Ok(Vertex(word))
    }

    pub fn word(&self) -> &[Color] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_base(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<Color> {
        self.0.last().copied()
    }

    pub fn parent(&self) -> Option<Vertex> {
        if self.0.is_empty() {
            None
        } else {
            Vertex(self.0[..self.0.len() - 1].to_vec()).into()
        }
    }

    /// The ancestor (address prefix) at the given depth; `self` if shallower.
    pub fn ancestor(&self, depth: usize) -> Vertex {
        if self.0.len() <= depth {
            self.clone()
        } else {
            Vertex(self.0[..depth].to_vec())
        }
    }

    pub fn child(&self, c: Color) -> Option<Vertex> {
        if self.last() == Some(c) {
            None
        } else {
            let mut w = self.0.clone();
            w.push(c);
            Some(Vertex(w))
        }
    }

    /// Step along color `c`: parent if `c` is the last letter, else append.
    /// Involutive: `neighbor(neighbor(v, c), c) == v`.
    pub fn neighbor(&self, c: Color) -> Vertex {
        let mut w = self.0.clone();
        if w.last() == Some(&c) {
            w.pop();
        } else {
            w.push(c);
        }
        Vertex(w)
    }

    /// All neighbors in color order.
    pub fn neighbors(&self, params: TreeParams) -> Vec<Vertex> {
        params.colors().map(|c| self.neighbor(c)).collect()
    }

    /// Color of the edge between two adjacent vertices. The color is a
    /// property of the edge: it is the same seen from both endpoints.
    pub fn edge_color_to(&self, other: &Vertex) -> Option<Color> {
        if self.0.len() + 1 == other.0.len() && other.0[..self.0.len()] == self.0[..] {
            Some(other.0[self.0.len()])
        } else if other.0.len() + 1 == self.0.len() && self.0[..other.0.len()] == other.0[..] {
            Some(self.0[other.0.len()])
        } else {
            None
        }
    }

    pub fn common_prefix_len(&self, other: &Vertex) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .take_while(|(a, b)| a == b)
            .count()
    }

    pub fn distance(&self, other: &Vertex) -> usize {
        let l = self.common_prefix_len(other);
        self.0.len() + other.0.len() - 2 * l
    }

    pub fn parse(s: &str) -> Result<Vertex> {
        if s.is_empty() {
            return Ok(Vertex::base());
        }
        let mut word = Vec::new();
        for part in s.split('.') {
            let c: u8 = part
                .parse()
                .map_err(|_| Error::Parse(format!("bad color {part:?} in address {s:?}")))?;
            word.push(c);
        }
        Vertex::from_word(word)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in &self.0 {
            if !first {
                write!(f, ".")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl Serialize for Vertex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Vertex::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// An ordered vertex list along a geodesic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment(Vec<Vertex>);

impl Segment {
    pub fn vertices(&self) -> &[Vertex] {
        &self.0
    }

    pub fn len_edges(&self) -> usize {
        self.0.len() - 1
    }

    pub fn first(&self) -> &Vertex {
        &self.0[0]
    }

    pub fn last(&self) -> &Vertex {
        self.0.last().unwrap()
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        self.0.contains(v)
    }

    pub fn into_vec(self) -> Vec<Vertex> {
        self.0
    }
}

/// The unique tree path from `u` to `v`: down to the common prefix, then up.
pub fn geodesic(u: &Vertex, v: &Vertex) -> Segment {
    let l = u.common_prefix_len(v);
    let mut verts = Vec::with_capacity(u.depth() + v.depth() - 2 * l + 1);
    let mut cur = u.clone();
    while cur.depth() > l {
        verts.push(cur.clone());
        cur = cur.parent().unwrap();
    }
    verts.push(cur); // the meet
    for i in l..v.depth() {
        verts.push(Vertex(v.0[..=i].to_vec()));
    }
    Segment(verts)
}

/// Union of pairwise geodesics of a finite nonempty set; idempotent.
pub fn convex_hull(set: &[Vertex]) -> Vec<Vertex> {
    let mut out: Vec<Vertex> = Vec::new();
    for i in 0..set.len() {
        for j in i..set.len() {
            for w in geodesic(&set[i], &set[j]).into_vec() {
                out.push(w);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Gromov product (y|z)_e = (d(e,y)+d(e,z)-d(y,z))/2; on a tree this equals
/// the distance from `e` to the geodesic [y, z].
pub fn gromov_product(y: &Vertex, z: &Vertex, e: &Vertex) -> crate::rational::Rational {
    let n = e.distance(y) + e.distance(z) - y.distance(z);
    crate::rational::Rational::new(n as i64, 2)
}

/// A point of the geometric realization: a vertex or the midpoint of an edge
/// (kept symbolic as the ordered endpoint pair).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Midpoint {
    Vertex(Vertex),
    Edge(Vertex, Vertex),
}

impl Midpoint {
    fn edge(a: Vertex, b: Vertex) -> Midpoint {
        if a <= b {
            Midpoint::Edge(a, b)
        } else {
            Midpoint::Edge(b, a)
        }
    }
}

impl fmt::Display for Midpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Midpoint::Vertex(v) => write!(f, "{v}"),
            Midpoint::Edge(a, b) => write!(f, "mid({a},{b})"),
        }
    }
}

impl Serialize for Midpoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Centre of a finite nonempty set: the midpoint of a diametral pair, which
/// is unique on a tree and invariant under any automorphism fixing the set
/// setwise.
pub fn center(set: &[Vertex]) -> Midpoint {
    assert!(!set.is_empty(), "center of empty set");
    // Double sweep: farthest from an arbitrary point, then farthest from that.
    let a = set
        .iter()
        .max_by_key(|v| (set[0].distance(v), (*v).clone()))
        .unwrap();
    let b = set
        .iter()
        .max_by_key(|v| (a.distance(v), (*v).clone()))
        .unwrap();
    let path = geodesic(a, b);
    let d = path.len_edges();
    if d % 2 == 0 {
        Midpoint::Vertex(path.vertices()[d / 2].clone())
    } else {
        Midpoint::edge(path.vertices()[d / 2].clone(), path.vertices()[d / 2 + 1].clone())
    }
}

/// An eventually periodic end: the ray that starts at `prefix` and then
/// repeats `period` forever. Canonical form: shortest possible prefix and
/// primitive period, which makes equality of ends structural equality.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct End {
    prefix: Vertex,
    period: Vec<Color>,
}

impl End {
    pub fn new(prefix: Vertex, period: Vec<Color>) -> Result<End> {
        if period.is_empty() {
            return Err(Error::EmptyPeriod);
        }
        // Junction checks: prefix.period and period.period non-backtracking.
        for i in 1..period.len() {
            if period[i] == period[i - 1] {
                return Err(Error::Backtracking(i));
            }
        }
        if period.len() > 1 && period[0] == period[period.len() - 1] {
            return Err(Error::Backtracking(0));
        }
        if prefix.last() == Some(period[0]) {
            return Err(Error::Backtracking(prefix.depth()));
        }
        let mut e = End { prefix, period };
        e.canonicalize();
        Ok(e)
    }

    fn canonicalize(&mut self) {
        // Primitive root of the period.
        'outer: for p in 1..self.period.len() {
            if self.period.len() % p == 0 {
                for i in p..self.period.len() {
                    if self.period[i] != self.period[i - p] {
                        continue 'outer;
                    }
                }
                self.period.truncate(p);
                break;
            }
        }
        // Shortest prefix: while the prefix's last letter equals the period's
        // last letter, absorb it (rotate the period right).
        while let Some(c) = self.prefix.last() {
            if c == *self.period.last().unwrap() {
                let last = self.period.pop().unwrap();
                self.period.insert(0, last);
                self.prefix = self.prefix.parent().unwrap();
            } else {
                break;
            }
        }
    }

    pub fn prefix(&self) -> &Vertex {
        &self.prefix
    }

    pub fn period(&self) -> &[Color] {
        &self.period
    }

    /// The t-th letter of the infinite address word of this end.
    pub fn letter(&self, t: usize) -> Color {
        if t < self.prefix.depth() {
            self.prefix.word()[t]
        } else {
            self.period[(t - self.prefix.depth()) % self.period.len()]
        }
    }

    /// Vertex at depth `n` on the canonical ray from the base vertex.
    pub fn word_vertex(&self, n: usize) -> Vertex {
        let mut w = Vec::with_capacity(n);
        for t in 0..n {
            w.push(self.letter(t));
        }
        Vertex(w)
    }

    /// The n-th vertex of the canonical ray (which starts at the prefix).
    pub fn ray_vertex(&self, n: usize) -> Vertex {
        self.word_vertex(self.prefix.depth() + n)
    }

    /// First n+1 vertices of the canonical ray.
    pub fn ray(&self, n: usize) -> Segment {
        Segment((0..=n).map(|k| self.ray_vertex(k)).collect())
    }

    pub fn parse(s: &str) -> Result<End> {
        let (p, q) = s
            .split_once('|')
            .ok_or_else(|| Error::Parse(format!("end must be \"prefix|period\", got {s:?}")))?;
        let prefix = Vertex::parse(p)?;
        let period = Vertex::parse(q)?.0;
        End::new(prefix, period)
    }

    /// Detect the eventually periodic structure of a deep address word and
    /// return the corresponding end. The word must exhibit at least two full
    /// periods after the preperiodic part.
    pub fn detect(word: &[Color], max_period: usize) -> Option<End> {
        for p in 1..=max_period.min(word.len() / 2) {
            // Longest suffix that is p-periodic.
            let mut start = word.len() - p;
            while start > 0 && word[start - 1] == word[start - 1 + p] {
                start -= 1;
            }
            let tail = word.len() - start;
            if tail >= 2 * p + 1 {
                let prefix = Vertex(word[..start].to_vec());
                let period = word[start..start + p].to_vec();
                return End::new(prefix, period).ok();
            }
        }
        None
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|", self.prefix)?;
        let mut first = true;
        for c in &self.period {
            if !first {
                write!(f, ".")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl Serialize for End {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for End {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        End::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// The ray from an arbitrary vertex `v` toward the end `xi`: first descend to
/// the junction with the canonical ray of `xi`, then follow it. Colors along
/// the ray are eventually periodic.
pub fn ray_from(v: &Vertex, xi: &End) -> RayFrom {
    // Longest common prefix of v's word with the infinite word of xi.
    let mut l = 0;
    while l < v.depth() && v.word()[l] == xi.letter(l) {
        l += 1;
    }
    RayFrom {
        start: v.clone(),
        junction_depth: l,
        xi: xi.clone(),
    }
}

/// Lazy ray toward an end; `vertex(t)` and `color(t)` are O(depth).
#[derive(Debug, Clone)]
pub struct RayFrom {
    start: Vertex,
    junction_depth: usize,
    xi: End,
}

impl RayFrom {
    /// Number of descending steps before the ray joins the canonical ray.
    pub fn descent_len(&self) -> usize {
        self.start.depth() - self.junction_depth
    }

    pub fn vertex(&self, t: usize) -> Vertex {
        let down = self.descent_len();
        if t <= down {
            self.start.ancestor(self.start.depth() - t)
        } else {
            self.xi.word_vertex(self.junction_depth + (t - down))
        }
    }

    /// Color of the edge from `vertex(t)` to `vertex(t+1)`.
    pub fn color(&self, t: usize) -> Color {
        let down = self.descent_len();
        if t < down {
            self.start.word()[self.start.depth() - 1 - t]
        } else {
            self.xi.letter(self.junction_depth + (t - down))
        }
    }

    /// Position from which the color sequence is periodic, and the period.
    pub fn periodic_from(&self) -> (usize, usize) {
        let down = self.descent_len();
        let pre = self.xi.prefix().depth().saturating_sub(self.junction_depth);
        (down + pre, self.xi.period().len())
    }

    pub fn end(&self) -> &End {
        &self.xi
    }
}
