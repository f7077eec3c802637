//! The enumeration engine behind every subgroup index: restriction sets of
//! fixators of convex sets (optionally augmented by rays to an end).
//!
//! A fixator U = Fix(S) is described by a finite core plus ray markers. Its
//! restriction to a finite target set B is enumerated by a depth-first search
//! over legality-consistent local-action assignments on the convex hull of
//! S and B, fixing S. Every consistent assignment on a convex region extends
//! to a legal element of the scheme (a new vertex meets a convex region in
//! exactly one edge, and copying the neighbor's local action is always
//! legal), so for finite S the enumeration is exact.
//!
//! For ray-augmented fixators the truncation is closed off by a tail
//! automaton: the constraint pattern along the ray is eventually periodic,
//! so the set of local actions at the truncation point that extend to the
//! infinite ray is a greatest fixed point over one period. With this cap the
//! enumeration is exact and certified `Exact`; with it disabled the engine
//! falls back to sweeping horizons until the restriction set is unchanged
//! over a stabilization window, certified `StabilizedAt`.

use crate::error::{Error, Result};
use crate::perm::Perm;
use crate::scheme::{CocycleElement, GroupScheme};
use crate::tree::{convex_hull, geodesic, ray_from, Color, End, Vertex};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Bit set over local-group element indices.
#[derive(Clone, PartialEq, Eq)]
pub(crate) struct ElemSet {
    words: Vec<u64>,
    n: usize,
}

impl ElemSet {
    pub fn empty(n: usize) -> ElemSet {
        ElemSet { words: vec![0; n.div_ceil(64)], n }
    }

    pub fn full(n: usize) -> ElemSet {
        let mut s = ElemSet::empty(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn intersect(&mut self, other: &ElemSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn union(&mut self, other: &ElemSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&i| self.contains(i))
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words_clone(&self) -> Vec<u64> {
        self.words.clone()
    }
}

impl fmt::Debug for ElemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ElemSet{:?}", self.iter().collect::<Vec<_>>())
    }
}

/// Precomputed local-group tables for the constraint search.
pub(crate) struct LocalData {
    pub order: usize,
    pub degree: usize,
    /// apply[s * degree + c] = image of color c under element s.
    apply: Vec<u8>,
    /// point_image[c * degree + c'] = set of s with s(c) = c'.
    point_image: Vec<ElemSet>,
    /// Coupled schemes: coset[j][s] = the coset s * S_j (as a set).
    coset: Option<Vec<Vec<ElemSet>>>,
    perms: Vec<Perm>,
}

impl LocalData {
    pub fn new(scheme: &GroupScheme) -> LocalData {
        let lg = scheme.local_group();
        let order = lg.order();
        let degree = scheme.degree() as usize;
        let perms: Vec<Perm> = lg.elements().to_vec();
        let mut apply = vec![0u8; order * degree];
        for (s, p) in perms.iter().enumerate() {
            for c in 0..degree {
                apply[s * degree + c] = p.apply(c as u8);
            }
        }
        let mut point_image = vec![ElemSet::empty(order); degree * degree];
        for (s, p) in perms.iter().enumerate() {
            for c in 0..degree {
                point_image[c * degree + p.apply(c as u8) as usize].insert(s);
            }
        }
        let coset = match scheme.kind() {
            crate::scheme::SchemeKind::CoupledWreath { n } => Some(
                (0..*n)
                    .map(|j| {
                        let block = scheme.block(j).unwrap();
                        (0..order)
                            .map(|s| {
                                let mut set = ElemSet::empty(order);
                                for b in block.elements() {
                                    let prod = perms[s].compose(b);
                                    set.insert(lg.element_index(&prod).unwrap());
                                }
                                set
                            })
                            .collect()
                    })
                    .collect(),
            ),
            _ => None,
        };
        LocalData { order, degree, apply, point_image, coset, perms }
    }

    pub fn apply(&self, s: usize, c: Color) -> Color {
        self.apply[s * self.degree + c as usize]
    }

    pub fn point_image(&self, c: Color, image: Color) -> &ElemSet {
        &self.point_image[c as usize * self.degree + image as usize]
    }

    pub fn stab(&self, c: Color) -> &ElemSet {
        self.point_image(c, c)
    }

    /// Transition set for one ray step across an edge of color c: the coset
    /// s * S_{block(c)}, or everything if the scheme has no coupling.
    /// The relation is symmetric because blocks are subgroups.
    pub fn step_set(&self, scheme: &GroupScheme, s: usize, c: Color) -> ElemSet {
        match (&self.coset, scheme.block_of_color(c)) {
            (Some(cosets), Some(j)) => cosets[j][s].clone(),
            _ => ElemSet::full(self.order),
        }
    }

    pub fn perm(&self, s: usize) -> &Perm {
        &self.perms[s]
    }
}

/// A ray to be fixed pointwise: the geodesic from `start` toward `end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RayMarker {
    pub start: Vertex,
    pub end: End,
}

/// A compact open subgroup given as the fixator of a convex vertex set,
/// possibly augmented by rays to ends. The fixed set is the convex hull of
/// everything listed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixatorSpec {
    core: Vec<Vertex>,
    rays: Vec<RayMarker>,
}

impl FixatorSpec {
    pub fn fix(core: Vec<Vertex>) -> FixatorSpec {
        assert!(!core.is_empty(), "fixator of the empty set is not compact");
        FixatorSpec { core: convex_hull(&core), rays: vec![] }
    }

    pub fn fix_with_rays(core: Vec<Vertex>, rays: Vec<RayMarker>) -> FixatorSpec {
        assert!(
            !core.is_empty() || !rays.is_empty(),
            "fixator of the empty set is not compact"
        );
        let mut core = core;
        if core.is_empty() {
            core.push(rays[0].start.clone());
        }
        FixatorSpec { core: convex_hull(&core), rays }
    }

    pub fn core(&self) -> &[Vertex] {
        &self.core
    }

    pub fn rays(&self) -> &[RayMarker] {
        &self.rays
    }

    /// Ball of radius r around a vertex (as a fixator of the whole ball).
    pub fn ball(scheme: &GroupScheme, center: &Vertex, r: usize) -> FixatorSpec {
        FixatorSpec::fix(ball_around(scheme, center, r))
    }

    /// Image of this fixator's fixed set under an element: the fixator of
    /// the image set, i.e. the conjugate subgroup g Fix(S) g^{-1}.
    pub fn conjugate(&self, g: &CocycleElement) -> Result<FixatorSpec> {
        let core = self.core.iter().map(|v| g.apply(v)).collect::<Vec<_>>();
        let rays = self
            .rays
            .iter()
            .map(|r| {
                Ok(RayMarker {
                    start: g.apply(&r.start),
                    end: g.apply_end(&r.end)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FixatorSpec { core: convex_hull(&core), rays })
    }

    /// Fixator of the union of both fixed sets (the intersection subgroup).
    pub fn intersect(&self, other: &FixatorSpec) -> FixatorSpec {
        let mut core = self.core.clone();
        core.extend(other.core.iter().cloned());
        let mut rays = self.rays.clone();
        for r in &other.rays {
            if !rays.contains(r) {
                rays.push(r.clone());
            }
        }
        FixatorSpec { core: convex_hull(&core), rays }
    }

    /// Per-end normalized tails: for each distinct end, the canonical-word
    /// depth from which the tail is fixed, plus the descent vertices of each
    /// ray (returned to be added to the core).
    fn normalized_tails(&self) -> (Vec<Vertex>, Vec<(End, usize)>) {
        let mut extra_core = Vec::new();
        let mut tails: BTreeMap<End, usize> = BTreeMap::new();
        for r in &self.rays {
            let rf = ray_from(&r.start, &r.end);
            for t in 0..=rf.descent_len() {
                extra_core.push(rf.vertex(t));
            }
            let j = rf.vertex(rf.descent_len()).depth();
            let cur = tails.entry(r.end.clone()).or_insert(j);
            *cur = (*cur).min(j);
        }
        (extra_core, tails.into_iter().collect())
    }
}

/// All vertices within distance r of a center.
pub fn ball_around(scheme: &GroupScheme, center: &Vertex, r: usize) -> Vec<Vertex> {
    let mut verts = vec![center.clone()];
    let mut frontier = vec![center.clone()];
    for _ in 0..r {
        let mut next = Vec::new();
        for v in &frontier {
            for c in scheme.params().colors() {
                let w = v.neighbor(c);
                if !verts.contains(&w) {
                    verts.push(w.clone());
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    verts.sort();
    verts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Certification {
    /// The truncation is provably lossless.
    Exact,
    /// Unchanged over the stabilization window up to this horizon.
    StabilizedAt(usize),
    /// Checked up to this horizon only.
    UpToHorizon(usize),
}

impl Certification {
    pub fn is_exact(&self) -> bool {
        matches!(self, Certification::Exact)
    }

    pub fn merge(self, other: Certification) -> Certification {
        use Certification::*;
        match (self, other) {
            (Exact, o) => o,
            (s, Exact) => s,
            (StabilizedAt(a), StabilizedAt(b)) => StabilizedAt(a.max(b)),
            (UpToHorizon(a), StabilizedAt(b)) | (StabilizedAt(b), UpToHorizon(a)) => {
                UpToHorizon(a.max(b))
            }
            (UpToHorizon(a), UpToHorizon(b)) => UpToHorizon(a.max(b)),
        }
    }
}

/// The set of restrictions of a fixator to a finite target set. Each map is
/// the image tuple of the targets, in target order. The size of the set is
/// the subgroup index it witnesses.
#[derive(Debug, Clone)]
pub struct RestrictionSet {
    pub targets: Vec<Vertex>,
    pub maps: BTreeSet<Vec<Vertex>>,
    pub certification: Certification,
    /// One realizing element per restriction, when witness collection is on.
    pub witnesses: Vec<(Vec<Vertex>, CocycleElement)>,
}

impl RestrictionSet {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.maps.len() == 1 && self.maps.iter().next().unwrap() == &self.targets
    }

    /// True iff every map fixes the target at the given position.
    pub fn fixes_position(&self, i: usize) -> bool {
        self.maps.iter().all(|m| m[i] == self.targets[i])
    }
}

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub node_budget: u64,
    pub stabilization_window: usize,
    /// Close ray truncations with the exact tail automaton. When false the
    /// engine sweeps horizons and certifies `StabilizedAt` instead.
    pub exact_rays: bool,
    pub collect_witnesses: bool,
    pub witness_limit: usize,
    /// In witness mode, require local actions at ray truncation points to
    /// fix the whole tail, so collected witnesses genuinely fix the ray.
    pub close_witness_tails: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            node_budget: 50_000_000,
            stabilization_window: 3,
            exact_rays: true,
            collect_witnesses: false,
            witness_limit: 4096,
            close_witness_tails: true,
        }
    }
}

pub struct Engine {
    scheme: Arc<GroupScheme>,
    data: LocalData,
    pub opts: EngineOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TriState {
    True,
    False,
    Undetermined,
}

struct Node {
    vertex: Vertex,
    parent: Option<usize>,
    pcolor: Color,
    children: Vec<usize>,
    fixed: bool,
    base_allowed: ElemSet,
    assign: bool,
}

struct Region {
    nodes: Vec<Node>,
    order: Vec<usize>, // assigned nodes in BFS order
    root: usize,
}

struct DfsOutput {
    maps: BTreeSet<Vec<Vertex>>,
    witnesses: Vec<(Vec<Vertex>, CocycleElement)>,
    collected_sigma: ElemSet,
}

impl Engine {
    pub fn new(scheme: Arc<GroupScheme>) -> Engine {
        let data = LocalData::new(&scheme);
        Engine { scheme, data, opts: EngineOptions::default() }
    }

    pub fn with_options(scheme: Arc<GroupScheme>, opts: EngineOptions) -> Engine {
        let data = LocalData::new(&scheme);
        Engine { scheme, data, opts }
    }

    pub fn scheme(&self) -> &Arc<GroupScheme> {
        &self.scheme
    }

    /// Viable local actions at canonical-word depth `from_k` of the tail of
    /// `xi`: the greatest fixed point of the one-step extension relation over
    /// the periodic constraint pattern. A local action is viable iff some
    /// legal element fixing the whole tail realizes it at that tail vertex.
    fn ray_tail_viable(&self, xi: &End, from_k: usize) -> ElemSet {
        let n = self.data.order;
        let pre = xi.prefix().depth();
        let p = xi.period().len();
        let allowed_at = |k: usize| -> ElemSet {
            let mut a = ElemSet::full(n);
            if k > 0 {
                a.intersect(self.data.stab(xi.letter(k - 1)));
            }
            a.intersect(self.data.stab(xi.letter(k)));
            a
        };
        let pred = |set: &ElemSet, c: Color| -> ElemSet {
            let mut out = ElemSet::empty(n);
            for s in set.iter() {
                out.union(&self.data.step_set(&self.scheme, s, c));
            }
            out
        };
        // Greatest fixed point on the periodic part (word depths > pre).
        let cycle_base = (pre + 1).max(from_k + 1);
        let mut v: Vec<ElemSet> = (0..p).map(|i| allowed_at(pre + 1 + i)).collect();
        loop {
            let mut changed = false;
            for i in (0..p).rev() {
                let k = pre + 1 + i;
                let next = v[(i + 1) % p].clone();
                let mut nv = allowed_at(k);
                nv.intersect(&pred(&next, xi.letter(k)));
                if nv != v[i] {
                    v[i] = nv;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut cur = v[(cycle_base - (pre + 1)) % p].clone();
        let mut k = cycle_base;
        while k > from_k {
            k -= 1;
            let mut nv = allowed_at(k);
            nv.intersect(&pred(&cur, xi.letter(k)));
            cur = nv;
        }
        cur
    }

    /// Local actions fixing every color on the tail of `xi` from word depth
    /// `from_k` on (including the incoming edge). Constant continuation by
    /// such an action fixes the whole tail.
    fn ray_tail_constant_fixing(&self, xi: &End, from_k: usize) -> ElemSet {
        let n = self.data.order;
        let mut colors: BTreeSet<Color> = xi.period().iter().copied().collect();
        for k in from_k.saturating_sub(1)..xi.prefix().depth() {
            colors.insert(xi.letter(k));
        }
        if from_k > 0 {
            colors.insert(xi.letter(from_k - 1));
        }
        let mut a = ElemSet::full(n);
        for c in colors {
            a.intersect(self.data.stab(c));
        }
        a
    }

    fn build_region(
        &self,
        fixator: &FixatorSpec,
        targets: &[Vertex],
        horizon: usize,
        collect_sigma_at: Option<&Vertex>,
        witness_mode: bool,
    ) -> Result<(Region, Vec<usize>, Option<usize>)> {
        let (descents, tails) = fixator.normalized_tails();
        let mut fixed_pts: Vec<Vertex> = fixator.core.to_vec();
        fixed_pts.extend(descents);
        let mut caps: Vec<(Vertex, ElemSet)> = Vec::new();
        for (xi, j) in &tails {
            let top = j + horizon;
            for k in *j..=top {
                fixed_pts.push(xi.word_vertex(k));
            }
            let cap = if witness_mode && self.opts.close_witness_tails {
                self.ray_tail_constant_fixing(xi, top)
            } else if self.opts.exact_rays {
                self.ray_tail_viable(xi, top)
            } else {
                ElemSet::full(self.data.order)
            };
            caps.push((xi.word_vertex(top), cap));
        }
        let fixed_hull = convex_hull(&fixed_pts);
        let mut all: Vec<Vertex> = fixed_hull.clone();
        all.extend(targets.iter().cloned());
        let all = convex_hull(&all);
        // Reject targets whose hull swallows un-fixed continuations of a
        // fixed tail: those vertices are really fixed, so the horizon is too
        // small to see them.
        let fixed_set: BTreeSet<&Vertex> = fixed_hull.iter().collect();
        for v in &all {
            if fixed_set.contains(v) {
                continue;
            }
            for (xi, j) in &tails {
                if v.depth() > j + horizon
                    && v.word().iter().enumerate().all(|(i, &c)| xi.letter(i) == c)
                {
                    return Err(Error::HorizonTooSmall {
                        horizon,
                        need: format!("target hull reaches fixed tail vertex {v}"),
                    });
                }
            }
        }

        let root_vertex = fixed_hull
            .iter()
            .min()
            .expect("fixator fixed set is nonempty")
            .clone();
        let index: BTreeMap<Vertex, usize> =
            all.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let n = all.len();
        let mut nodes: Vec<Node> = all
            .iter()
            .map(|v| Node {
                vertex: v.clone(),
                parent: None,
                pcolor: 0,
                children: Vec::new(),
                fixed: fixed_set.contains(v),
                base_allowed: ElemSet::full(self.data.order),
                assign: false,
            })
            .collect();
        let root = index[&root_vertex];
        let mut bfs_order = vec![root];
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut qi = 0;
        while qi < bfs_order.len() {
            let v = bfs_order[qi];
            qi += 1;
            let vert = nodes[v].vertex.clone();
            for c in self.scheme.params().colors() {
                let w = vert.neighbor(c);
                if let Some(&wi) = index.get(&w) {
                    if !seen[wi] {
                        seen[wi] = true;
                        nodes[wi].parent = Some(v);
                        nodes[wi].pcolor = c;
                        nodes[v].children.push(wi);
                        bfs_order.push(wi);
                    }
                }
            }
        }
        debug_assert!(seen.iter().all(|&s| s), "hull must be connected");

        // Pins: a fixed vertex fixes the colors of fixed-hull edges at it.
        for i in 0..n {
            if !nodes[i].fixed {
                continue;
            }
            let vert = nodes[i].vertex.clone();
            for c in self.scheme.params().colors() {
                if fixed_set.contains(&vert.neighbor(c)) {
                    let stab = self.data.stab(c).clone();
                    nodes[i].base_allowed.intersect(&stab);
                }
            }
        }
        for (v, cap) in &caps {
            let i = index[v];
            nodes[i].base_allowed.intersect(cap);
        }

        // Assignment set: internal nodes always; leaves only when they carry
        // a collected sigma or in witness mode (feasibility checks suffice
        // otherwise, including for capped leaves).
        for i in 0..n {
            let internal = !nodes[i].children.is_empty();
            let collected = collect_sigma_at.map(|v| index[v] == i).unwrap_or(false);
            nodes[i].assign = internal || collected || witness_mode;
        }
        let order: Vec<usize> = bfs_order.iter().copied().filter(|&i| nodes[i].assign).collect();

        let target_idx = targets
            .iter()
            .map(|t| {
                index
                    .get(t)
                    .copied()
                    .ok_or_else(|| Error::Precondition(format!("target {t} not in region")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let collect_idx = collect_sigma_at.map(|v| index[v]);
        Ok((Region { nodes, order, root }, target_idx, collect_idx))
    }

    fn dfs(
        &self,
        region: &Region,
        target_idx: &[usize],
        collect_idx: Option<usize>,
        witness_mode: bool,
    ) -> Result<DfsOutput> {
        let n = region.nodes.len();
        let mut sigma: Vec<usize> = vec![usize::MAX; n];
        let mut img: Vec<Vertex> = vec![Vertex::base(); n];
        img[region.root] = region.nodes[region.root].vertex.clone();
        let mut out = DfsOutput {
            maps: BTreeSet::new(),
            witnesses: Vec::new(),
            collected_sigma: ElemSet::empty(self.data.order),
        };
        let mut budget = self.opts.node_budget;
        self.dfs_rec(
            region,
            target_idx,
            collect_idx,
            witness_mode,
            0,
            &mut sigma,
            &mut img,
            &mut budget,
            &mut out,
        )?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs_rec(
        &self,
        region: &Region,
        target_idx: &[usize],
        collect_idx: Option<usize>,
        witness_mode: bool,
        pos: usize,
        sigma: &mut Vec<usize>,
        img: &mut Vec<Vertex>,
        budget: &mut u64,
        out: &mut DfsOutput,
    ) -> Result<()> {
        if pos == region.order.len() {
            let map: Vec<Vertex> = target_idx.iter().map(|&t| img[t].clone()).collect();
            if let Some(ci) = collect_idx {
                if region.nodes[ci].assign {
                    out.collected_sigma.insert(sigma[ci]);
                } else {
                    let set = self.feasible_set(region, ci, sigma);
                    out.collected_sigma.union(&set);
                }
            }
            if witness_mode
                && self.opts.collect_witnesses
                && out.witnesses.len() < self.opts.witness_limit
                && !out.maps.contains(&map)
            {
                let w = self.build_witness(region, sigma)?;
                out.witnesses.push((map.clone(), w));
            }
            out.maps.insert(map);
            return Ok(());
        }
        let vi = region.order[pos];
        let allowed = self.feasible_set(region, vi, sigma);
        let choices: Vec<usize> = allowed.iter().collect();
        'choice: for s in choices {
            if *budget == 0 {
                return Err(Error::BudgetExceeded(self.opts.node_budget));
            }
            *budget -= 1;
            sigma[vi] = s;
            for &w in &region.nodes[vi].children {
                let cw = region.nodes[w].pcolor;
                img[w] = img[vi].neighbor(self.data.apply(s, cw));
                if region.nodes[w].fixed && img[w] != region.nodes[w].vertex {
                    continue 'choice;
                }
                if !region.nodes[w].assign
                    && Some(w) != collect_idx
                    && self.feasible_set(region, w, sigma).is_empty()
                {
                    continue 'choice;
                }
            }
            self.dfs_rec(
                region,
                target_idx,
                collect_idx,
                witness_mode,
                pos + 1,
                sigma,
                img,
                budget,
                out,
            )?;
        }
        sigma[vi] = usize::MAX;
        Ok(())
    }

    fn feasible_set(&self, region: &Region, w: usize, sigma: &[usize]) -> ElemSet {
        let node = &region.nodes[w];
        let mut allowed = node.base_allowed.clone();
        if let Some(p) = node.parent {
            let sp = sigma[p];
            if sp != usize::MAX {
                allowed.intersect(&self.data.step_set(&self.scheme, sp, node.pcolor));
                let need = self.data.apply(sp, node.pcolor);
                allowed.intersect(self.data.point_image(node.pcolor, need));
            }
        }
        allowed
    }

    /// Materialize a complete assignment as a legal element: local actions on
    /// the region as assigned, and the nearest region vertex's action
    /// everywhere else (convexity makes the gate unique and the copy legal).
    fn build_witness(&self, region: &Region, sigma: &[usize]) -> Result<CocycleElement> {
        let depth = region.nodes.iter().map(|n| n.vertex.depth()).max().unwrap();
        let index: BTreeMap<&Vertex, usize> = region
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (&n.vertex, i))
            .collect();
        let root_vertex = &region.nodes[region.root].vertex;
        let gate_sigma = |v: &Vertex| -> Perm {
            if let Some(&i) = index.get(v) {
                return self.data.perm(sigma[i]).clone();
            }
            for w in geodesic(v, root_vertex).vertices() {
                if let Some(&i) = index.get(w) {
                    return self.data.perm(sigma[i]).clone();
                }
            }
            unreachable!("geodesic to the root meets the region")
        };
        let mut map = BTreeMap::new();
        let mut stack = vec![Vertex::base()];
        while let Some(v) = stack.pop() {
            if v.depth() < depth {
                for c in self.scheme.params().colors() {
                    if let Some(w) = v.child(c) {
                        stack.push(w);
                    }
                }
            }
            map.insert(v.clone(), gate_sigma(&v));
        }
        // The image of the base vertex: walk from the root (whose image is
        // itself) back to the base, transporting through the local actions.
        let mut pre = root_vertex.clone();
        let mut im = root_vertex.clone();
        while let Some(parent) = pre.parent() {
            let c = pre.last().unwrap();
            let s = map
                .get(&pre.ancestor(depth))
                .expect("sigma defined on the ball");
            im = im.neighbor(s.apply(c));
            pre = parent;
        }
        CocycleElement::new(self.scheme.clone(), im, depth, map)
    }

    fn diameter_ok(&self, fixator: &FixatorSpec, targets: &[Vertex], horizon: usize) -> Result<()> {
        let mut pts = fixator.core.to_vec();
        for r in &fixator.rays {
            pts.push(r.start.clone());
        }
        pts.extend(targets.iter().cloned());
        let mut diam = 0;
        for a in &pts {
            for b in &pts {
                diam = diam.max(a.distance(b));
            }
        }
        if horizon < diam {
            return Err(Error::HorizonTooSmall {
                horizon,
                need: format!("horizon must cover the hull diameter {diam}"),
            });
        }
        Ok(())
    }

    /// The set of restrictions of the fixator to the targets.
    pub fn restrictions(
        &self,
        fixator: &FixatorSpec,
        targets: &[Vertex],
        horizon: usize,
    ) -> Result<RestrictionSet> {
        self.diameter_ok(fixator, targets, horizon)?;
        let witness_mode = self.opts.collect_witnesses;
        if fixator.rays.is_empty() || self.opts.exact_rays {
            let (region, tidx, _) =
                self.build_region(fixator, targets, horizon, None, witness_mode)?;
            let out = self.dfs(&region, &tidx, None, witness_mode)?;
            return Ok(RestrictionSet {
                targets: targets.to_vec(),
                maps: out.maps,
                certification: Certification::Exact,
                witnesses: out.witnesses,
            });
        }
        // Horizon sweep with a stabilization window.
        let w = self.opts.stabilization_window;
        let mut history: Vec<BTreeSet<Vec<Vertex>>> = Vec::new();
        let mut last: Option<DfsOutput> = None;
        let mut last_h = horizon;
        for h in 1..=horizon {
            let (region, tidx, _) = match self.build_region(fixator, targets, h, None, witness_mode)
            {
                Ok(r) => r,
                Err(Error::HorizonTooSmall { .. }) => continue,
                Err(e) => return Err(e),
            };
            let out = self.dfs(&region, &tidx, None, witness_mode)?;
            history.push(out.maps.clone());
            last = Some(out);
            last_h = h;
            let stable = history.len() >= w
                && history[history.len() - w..].windows(2).all(|p| p[0] == p[1]);
            if stable {
                return Ok(RestrictionSet {
                    targets: targets.to_vec(),
                    maps: last.unwrap().maps,
                    certification: Certification::StabilizedAt(h),
                    witnesses: Vec::new(),
                });
            }
        }
        match last {
            Some(out) => Ok(RestrictionSet {
                targets: targets.to_vec(),
                maps: out.maps,
                certification: Certification::UpToHorizon(last_h),
                witnesses: Vec::new(),
            }),
            None => Err(Error::HorizonTooSmall {
                horizon,
                need: "no feasible horizon for the sweep".into(),
            }),
        }
    }

    /// |Fix(S) : Fix(S ∪ extra)|: the number of restrictions of Fix(S) to
    /// `extra` (the smaller fixator is exactly the kernel of restriction).
    pub fn index(
        &self,
        fixator: &FixatorSpec,
        extra: &[Vertex],
        horizon: usize,
    ) -> Result<(u64, Certification)> {
        let rs = self.restrictions(fixator, extra, horizon)?;
        Ok((rs.len() as u64, rs.certification))
    }

    /// Decide whether every element of the fixator also fixes the whole ray
    /// toward `probe_end` starting at `probe_start`, by exact forward
    /// propagation of the reachable local actions along the ray (cycle
    /// detection over the periodic constraint pattern).
    pub fn all_fix_ray(
        &self,
        fixator: &FixatorSpec,
        probe_start: &Vertex,
        probe_end: &End,
        horizon: usize,
    ) -> Result<(TriState, Certification)> {
        let probe = ray_from(probe_start, probe_end);
        let (descents, tails) = fixator.normalized_tails();
        let mut fixed_pts: Vec<Vertex> = fixator.core.to_vec();
        fixed_pts.extend(descents);
        for (xi, j) in &tails {
            for k in *j..=(j + horizon) {
                fixed_pts.push(xi.word_vertex(k));
            }
        }
        let fixed_hull: BTreeSet<Vertex> = convex_hull(&fixed_pts).into_iter().collect();
        let mut t_exit = None;
        for t in 0..=(horizon + probe.descent_len() + fixed_hull.len() + 2) {
            if fixed_hull.contains(&probe.vertex(t)) {
                t_exit = Some(t);
            } else if t_exit.is_some() {
                break;
            }
        }
        let Some(t_exit) = t_exit else {
            return Err(Error::Precondition(
                "probe ray does not meet the fixator's fixed set".into(),
            ));
        };
        let junction = probe.vertex(t_exit);
        let (region, _, collect_idx) =
            self.build_region(fixator, &[], horizon, Some(&junction), false)?;
        let out = self.dfs(&region, &[], collect_idx, false)?;
        let mut reach = out.collected_sigma;
        if reach.is_empty() {
            return Err(Error::Precondition(
                "no realizable local action at the junction".into(),
            ));
        }
        let (pstart, p) = probe.periodic_from();
        let mut memo: BTreeSet<(usize, Vec<u64>)> = BTreeSet::new();
        let mut t = t_exit;
        loop {
            let c = probe.color(t);
            for s in reach.iter() {
                if self.data.apply(s, c) != c {
                    // Some element moves the next ray vertex; by the
                    // extension property it is realized by a legal element.
                    return Ok((TriState::False, Certification::Exact));
                }
            }
            let mut next = ElemSet::empty(self.data.order);
            for s in reach.iter() {
                next.union(&self.data.step_set(&self.scheme, s, c));
            }
            next.intersect(self.data.stab(c));
            reach = next;
            t += 1;
            if t >= pstart {
                let key = ((t - pstart) % p, reach.words_clone());
                if !memo.insert(key) {
                    return Ok((TriState::True, Certification::Exact));
                }
            }
            if t > t_exit + (4 * p + 8).max(horizon) + 64 {
                return Ok((TriState::Undetermined, Certification::UpToHorizon(horizon)));
            }
        }
    }

    /// Vertices of `window` fixed by every element of the fixator.
    pub fn fixed_vertices_in(
        &self,
        fixator: &FixatorSpec,
        window: &[Vertex],
        horizon: usize,
    ) -> Result<(Vec<Vertex>, Certification)> {
        let rs = self.restrictions(fixator, window, horizon)?;
        let mut out = Vec::new();
        for (i, v) in window.iter().enumerate() {
            if rs.fixes_position(i) {
                out.push(v.clone());
            }
        }
        Ok((out, rs.certification))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::builtin;

    fn v(s: &str) -> Vertex {
        Vertex::parse(s).unwrap()
    }

    fn full3() -> Arc<GroupScheme> {
        GroupScheme::full(3).unwrap()
    }

    #[test]
    fn fixator_fixes_its_own_set() {
        let e = Engine::new(full3());
        let u = FixatorSpec::fix(vec![Vertex::base(), v("0")]);
        let rs = e.restrictions(&u, &[v("0")], 4).unwrap();
        assert!(rs.is_trivial());
        assert!(rs.certification.is_exact());
    }

    #[test]
    fn full3_orbit_of_neighbor() {
        let e = Engine::new(full3());
        let u = FixatorSpec::fix(vec![Vertex::base()]);
        let rs = e.restrictions(&u, &[v("0")], 4).unwrap();
        assert_eq!(rs.len(), 3);
        let images: BTreeSet<Vertex> = rs.maps.iter().map(|m| m[0].clone()).collect();
        assert_eq!(images, [v("0"), v("1"), v("2")].into_iter().collect());
    }

    #[test]
    fn full3_two_point_fixator() {
        let e = Engine::new(full3());
        let u = FixatorSpec::fix(vec![Vertex::base(), v("0")]);
        let rs = e.restrictions(&u, &[v("1")], 4).unwrap();
        assert_eq!(rs.len(), 2);
        let images: BTreeSet<Vertex> = rs.maps.iter().map(|m| m[0].clone()).collect();
        assert_eq!(images, [v("1"), v("2")].into_iter().collect());
    }

    #[test]
    fn universal_c3_is_rigid() {
        let e = Engine::new(GroupScheme::universal(crate::perm::PermGroup::cyclic(3)).unwrap());
        let u = FixatorSpec::fix(vec![Vertex::base(), v("0")]);
        let rs = e.restrictions(&u, &[v("1"), v("0.1"), v("2.0")], 6).unwrap();
        assert!(rs.is_trivial());
    }

    #[test]
    fn coupled2_forward_ray_forces_backward_fix() {
        let scheme = GroupScheme::coupled_wreath(2).unwrap();
        let e = Engine::new(scheme);
        let xi = End::new(Vertex::base(), vec![0, 1]).unwrap();
        let u = FixatorSpec::fix_with_rays(
            vec![Vertex::base()],
            vec![RayMarker { start: Vertex::base(), end: xi }],
        );
        let rs = e.restrictions(&u, &[v("1")], 8).unwrap();
        assert_eq!(rs.len(), 1);
        assert!(rs.certification.is_exact());
    }

    #[test]
    fn coupled2_pair_fixator_diagonal() {
        let scheme = GroupScheme::coupled_wreath(2).unwrap();
        let e = Engine::new(scheme);
        let x1 = v("0");
        let x2 = v("0.1");
        let x3 = v("0.1.0");
        let u = FixatorSpec::fix(vec![x1.clone(), x2.clone()]);
        let both = e.restrictions(&u, &[Vertex::base(), x3.clone()], 6).unwrap();
        assert_eq!(both.len(), 2, "diagonal pair orbit");
        assert_eq!(e.restrictions(&u, &[Vertex::base()], 6).unwrap().len(), 2);
        assert_eq!(e.restrictions(&u, &[x3.clone()], 6).unwrap().len(), 2);
        let u_pinned = FixatorSpec::fix(vec![Vertex::base(), x1, x2]);
        let pinned = e.restrictions(&u_pinned, &[x3], 6).unwrap();
        assert_eq!(pinned.len(), 1, "coupling forces the forward side");
    }

    #[test]
    fn coupled2_length_two_segment_is_rigid() {
        let scheme = GroupScheme::coupled_wreath(2).unwrap();
        let e = Engine::new(scheme);
        let u = FixatorSpec::fix(vec![Vertex::base(), v("0"), v("0.1")]);
        let probe: Vec<Vertex> = vec![v("1"), v("2"), v("3"), v("0.1.0"), v("0.2"), v("1.0.2")];
        let rs = e.restrictions(&u, &probe, 8).unwrap();
        assert!(rs.is_trivial(), "fixing a 2-segment is rigid in CW(2)");
    }

    #[test]
    fn monotonicity_of_fixators() {
        let e = Engine::new(full3());
        let small = FixatorSpec::fix(vec![Vertex::base()]);
        let big = FixatorSpec::fix(vec![Vertex::base(), v("0"), v("1")]);
        let t = [v("0.1"), v("2.0")];
        let rs_small = e.restrictions(&small, &t, 5).unwrap();
        let rs_big = e.restrictions(&big, &t, 5).unwrap();
        assert!(rs_big.maps.is_subset(&rs_small.maps));
    }

    #[test]
    fn ray_fixator_stabilization_matches_exact() {
        let scheme = GroupScheme::coupled_wreath(2).unwrap();
        let xi = End::new(Vertex::base(), vec![0, 1]).unwrap();
        let u = FixatorSpec::fix_with_rays(
            vec![Vertex::base()],
            vec![RayMarker { start: Vertex::base(), end: xi }],
        );
        let targets = [v("1"), v("2")];
        let exact = Engine::new(scheme.clone());
        let rs1 = exact.restrictions(&u, &targets, 8).unwrap();
        let opts = EngineOptions { exact_rays: false, ..Default::default() };
        let swept = Engine::with_options(scheme, opts);
        let rs2 = swept.restrictions(&u, &targets, 12).unwrap();
        assert_eq!(rs1.maps, rs2.maps);
        assert!(matches!(rs2.certification, Certification::StabilizedAt(_)));
    }

    #[test]
    fn all_fix_ray_full_vs_coupled() {
        let e3 = Engine::new(full3());
        let ball = FixatorSpec::ball(e3.scheme(), &Vertex::base(), 2);
        let xi = End::new(Vertex::base(), vec![0, 1]).unwrap();
        let (r, cert) = e3.all_fix_ray(&ball, &Vertex::base(), &xi, 8).unwrap();
        assert_eq!(r, TriState::False);
        assert!(cert.is_exact());

        let cw = Engine::new(GroupScheme::coupled_wreath(2).unwrap());
        let ball = FixatorSpec::ball(cw.scheme(), &Vertex::base(), 2);
        let (r, cert) = cw.all_fix_ray(&ball, &Vertex::base(), &xi, 8).unwrap();
        assert_eq!(r, TriState::True);
        assert!(cert.is_exact());
    }

    #[test]
    fn witnesses_realize_restrictions() {
        let scheme = full3();
        let opts = EngineOptions { collect_witnesses: true, ..Default::default() };
        let e = Engine::with_options(scheme, opts);
        let u = FixatorSpec::fix(vec![Vertex::base(), v("0")]);
        let targets = [v("1"), v("2.0")];
        let rs = e.restrictions(&u, &targets, 5).unwrap();
        assert_eq!(rs.witnesses.len(), rs.maps.len());
        for (map, w) in &rs.witnesses {
            assert_eq!(w.apply(&Vertex::base()), Vertex::base());
            assert_eq!(w.apply(&v("0")), v("0"));
            for (t, im) in targets.iter().zip(map) {
                assert_eq!(w.apply(t), *im);
            }
        }
    }

    #[test]
    fn ray_witnesses_fix_the_whole_tail() {
        let scheme = full3();
        let opts = EngineOptions { collect_witnesses: true, ..Default::default() };
        let e = Engine::with_options(scheme, opts);
        let xi = End::new(Vertex::base(), vec![0, 1]).unwrap();
        let u = FixatorSpec::fix_with_rays(
            vec![Vertex::base()],
            vec![RayMarker { start: Vertex::base(), end: xi.clone() }],
        );
        let rs = e.restrictions(&u, &[v("1")], 6).unwrap();
        assert!(!rs.witnesses.is_empty());
        for (_, w) in &rs.witnesses {
            // Deep tail vertices beyond the truncation stay fixed.
            for k in 0..20 {
                let x = xi.ray_vertex(k);
                assert_eq!(w.apply(&x), x);
            }
        }
    }

    #[test]
    fn conjugate_fixator_transports_restrictions() {
        let scheme = full3();
        let e = Engine::new(scheme.clone());
        let g = builtin::standard_translation(&scheme).unwrap();
        let u = FixatorSpec::fix(vec![Vertex::base(), g.apply(&Vertex::base())]);
        let gu = u.conjugate(&g).unwrap();
        let rs = e.restrictions(&gu, &[Vertex::base()], 5).unwrap();
        assert_eq!(rs.len(), 2);
    }
}
