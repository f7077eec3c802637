//! Isometry classification, ends, parabolic membership, contraction
//! membership and absorbing sets.
//!
//! Every tree automorphism is bounded (fixes a vertex or inverts an edge) or
//! hyperbolic (translates along an axis); parabolic isometries do not exist
//! on simplicial trees. For hyperbolic elements the attracting and repelling
//! ends are recovered by period detection on forward and backward orbits:
//! deep along the axis the local action is tail-constant, so the axis color
//! sequence is eventually periodic with period dividing |g| times the order
//! of that constant action.

use crate::engine::{ball_around, Certification, Engine, FixatorSpec, RestrictionSet};
use crate::error::{Error, Result};
use crate::scheme::CocycleElement;
use crate::tree::{geodesic, ray_from, End, Midpoint, Segment, Vertex};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IsometryKind {
    Bounded,
    Hyperbolic,
}

/// Axis data of a hyperbolic element: a base vertex on the axis and the two
/// ends. `vertex(t)` walks the axis, positive toward the attracting end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AxisInfo {
    pub base: Vertex,
    pub xi_plus: End,
    pub xi_minus: End,
}

impl AxisInfo {
    pub fn vertex(&self, t: i64) -> Vertex {
        if t >= 0 {
            ray_from(&self.base, &self.xi_plus).vertex(t as usize)
        } else {
            ray_from(&self.base, &self.xi_minus).vertex((-t) as usize)
        }
    }

    pub fn window(&self, half_width: usize) -> Segment {
        geodesic(
            &self.vertex(-(half_width as i64)),
            &self.vertex(half_width as i64),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IsometryReport {
    pub kind: IsometryKind,
    pub translation_length: usize,
    /// Fixed vertex or inverted-edge midpoint, for bounded isometries.
    pub fixed: Option<Midpoint>,
    pub axis: Option<AxisInfo>,
}

impl IsometryReport {
    pub fn is_hyperbolic(&self) -> bool {
        self.kind == IsometryKind::Hyperbolic
    }

    pub fn axis(&self) -> Result<&AxisInfo> {
        self.axis
            .as_ref()
            .ok_or_else(|| Error::Precondition("element is not hyperbolic".into()))
    }
}

/// Largest multiplicative order of an element of the local group; bounds the
/// period growth of axis color sequences.
pub(crate) fn max_order(engine: &Engine) -> usize {
    let lg = engine.scheme().local_group();
    let id = lg.identity();
    lg.elements()
        .iter()
        .map(|g| {
            let mut k = 1;
            let mut x = g.clone();
            while x != id {
                x = x.compose(g);
                k += 1;
            }
            k
        })
        .max()
        .unwrap_or(1)
}

/// Classify an element by scanning the geodesic from the base vertex to its
/// image for the minimal displacement.
pub fn classify(engine: &Engine, g: &CocycleElement) -> Result<IsometryReport> {
    let base = Vertex::base();
    let path = geodesic(&base, &g.apply(&base));
    let mut best: Option<(usize, Vertex)> = None;
    for v in path.vertices() {
        let d = g.apply(v).distance(v);
        if best.as_ref().map(|(bd, _)| d < *bd).unwrap_or(true) {
            best = Some((d, v.clone()));
        }
    }
    let (ell, vstar) = best.unwrap();
    if ell == 0 {
        return Ok(IsometryReport {
            kind: IsometryKind::Bounded,
            translation_length: 0,
            fixed: Some(Midpoint::Vertex(vstar)),
            axis: None,
        });
    }
    if ell == 1 {
        let w = g.apply(&vstar);
        if g.apply(&w) == vstar {
            // Edge inversion: bounded on the geometric realization.
            let fixed = if vstar <= w {
                Midpoint::Edge(vstar, w)
            } else {
                Midpoint::Edge(w, vstar)
            };
            return Ok(IsometryReport {
                kind: IsometryKind::Bounded,
                translation_length: 0,
                fixed: Some(fixed),
                axis: None,
            });
        }
    }
    // Hyperbolic: detect the two ends from deep orbit vertices.
    let period_bound = ell * max_order(engine);
    let need = vstar.depth() + g.depth() + g.base_image().depth() + 2 * period_bound + 6;
    let steps = need.div_ceil(ell) + 1;
    let gi = g.invert();
    let detect = |h: &CocycleElement| -> Result<End> {
        let mut x = vstar.clone();
        for _ in 0..steps {
            x = h.apply(&x);
        }
        let xi = End::detect(x.word(), period_bound)
            .ok_or(Error::PeriodNotDetected(steps * ell))?;
        // The constructed end must be stabilized by the element.
        if h.apply_end(&xi)? != xi {
            return Err(Error::PeriodNotDetected(steps * ell));
        }
        Ok(xi)
    };
    let xi_plus = detect(g)?;
    let xi_minus = detect(&gi)?;
    let axis = AxisInfo { base: vstar, xi_plus, xi_minus };
    // Coherence: the axis translates by ell.
    for t in -2i64..=2 {
        let v = axis.vertex(t * ell as i64);
        if g.apply(&v) != axis.vertex((t + 1) * ell as i64) {
            return Err(Error::RouteDisagreement(format!(
                "axis vertex {v} does not translate by {ell}"
            )));
        }
    }
    Ok(IsometryReport {
        kind: IsometryKind::Hyperbolic,
        translation_length: ell,
        fixed: None,
        axis: Some(axis),
    })
}

/// A sufficient horizon for an exact stabilizes_end check.
pub fn stabilizes_end_horizon(h: &CocycleElement, xi: &End) -> usize {
    let disp = h.apply(&xi.ray_vertex(0)).distance(&xi.ray_vertex(0));
    disp + xi.period().len() + h.depth() + h.base_image().depth() + xi.prefix().depth() + 2
}

/// Decide whether `h` stabilizes the end `xi`: there must be a shift b with
/// h(rho(t)) = rho(t-b) for all t past the displacement bound. Exact for
/// cocycle elements once the verified window covers the element depth, the
/// shift and one full period.
pub fn stabilizes_end(h: &CocycleElement, xi: &End, horizon: usize) -> Result<bool> {
    let rho = |t: usize| xi.ray_vertex(t);
    let disp = h.apply(&rho(0)).distance(&rho(0));
    let p = xi.period().len();
    let need = disp + p + h.depth() + h.base_image().depth() + xi.prefix().depth() + 2;
    if horizon < need {
        return Err(Error::HorizonTooSmall {
            horizon,
            need: format!("stabilizes_end requires horizon >= {need}"),
        });
    }
    let deep = h.apply(&rho(horizon));
    let on_ray = deep
        .word()
        .iter()
        .enumerate()
        .all(|(i, &c)| xi.letter(i) == c);
    if !on_ray || deep.depth() < xi.prefix().depth() {
        return Ok(false);
    }
    let s = deep.depth() - xi.prefix().depth();
    let b = horizon as i64 - s as i64;
    if b.unsigned_abs() as usize > disp {
        return Ok(false);
    }
    for t in 0.max(b)..=horizon as i64 {
        if h.apply(&rho(t as usize)) != rho((t - b) as usize) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The Busemann shift of an end-stabilizing element: the b with
/// h(rho(t)) = rho(t-b) for deep t; negative shifts move toward the end.
pub fn end_shift(h: &CocycleElement, xi: &End, horizon: usize) -> Result<i64> {
    let deep = h.apply(&xi.ray_vertex(horizon));
    let on_ray = deep
        .word()
        .iter()
        .enumerate()
        .all(|(i, &c)| xi.letter(i) == c);
    if !on_ray || deep.depth() < xi.prefix().depth() {
        return Err(Error::Precondition(
            "element does not stabilize the end".into(),
        ));
    }
    let s = deep.depth() - xi.prefix().depth();
    Ok(horizon as i64 - s as i64)
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicReport {
    pub member: bool,
    pub definitional: bool,
    pub geometric: bool,
    pub displacements: Vec<usize>,
}

/// Membership of h in par_G(g^{-1}) = G_{xi_+(g)} by two routes:
/// (a) definitional, boundedness of d(h g^n y, g^n y) over n >= 0 certified
/// by eventual constancy; (b) geometric, stabilization of the attracting
/// end. Route disagreement is a hard error, never silently resolved.
pub fn in_parabolic(
    engine: &Engine,
    h: &CocycleElement,
    g: &CocycleElement,
    g_report: &IsometryReport,
    n_max: usize,
) -> Result<ParabolicReport> {
    let axis = g_report.axis()?;
    let ell = g_report.translation_length;
    let mut displacements = Vec::with_capacity(n_max + 1);
    let mut y = axis.base.clone();
    for _ in 0..=n_max {
        displacements.push(h.apply(&y).distance(&y));
        y = g.apply(&y);
    }
    // Eventual-behavior window: long enough to cover a full period of the
    // deep tail pattern.
    let w = (max_order(engine) * axis.xi_plus.period().len())
        .div_ceil(ell)
        .max(3)
        + 1;
    if n_max + 1 < 2 * w {
        return Err(Error::HorizonTooSmall {
            horizon: n_max,
            need: format!("parabolic route (a) needs at least {} steps", 2 * w),
        });
    }
    let tail = &displacements[displacements.len() - w..];
    let constant = tail.windows(2).all(|p| p[0] == p[1]);
    let growing = tail.windows(2).all(|p| p[0] < p[1]);
    let definitional = if constant {
        true
    } else if growing {
        false
    } else {
        return Err(Error::Undetermined(
            n_max,
            "displacement sequence neither stabilized nor strictly growing".into(),
        ));
    };
    let hor = stabilizes_end_horizon(h, &axis.xi_plus);
    let geometric = stabilizes_end(h, &axis.xi_plus, hor)?;
    if definitional != geometric {
        return Err(Error::RouteDisagreement(format!(
            "par membership: definitional={definitional} geometric={geometric}"
        )));
    }
    Ok(ParabolicReport { member: geometric, definitional, geometric, displacements })
}

/// Membership of h in con_G(g/K), where `region` is the K-fixed region
/// within the working ball: h must fix g^{-n}(y) for all n in a terminal
/// segment, for every y in the region. Exact for locally discrete actions
/// once the terminal segment stabilizes over the period window.
pub fn in_contraction_region(
    engine: &Engine,
    h: &CocycleElement,
    g: &CocycleElement,
    g_report: &IsometryReport,
    region: &[Vertex],
    n_max: usize,
) -> Result<bool> {
    let axis = g_report.axis()?;
    let ell = g_report.translation_length;
    let w = (max_order(engine) * axis.xi_minus.period().len())
        .div_ceil(ell)
        .max(3)
        + 1;
    if n_max < 2 * w {
        return Err(Error::HorizonTooSmall {
            horizon: n_max,
            need: format!("contraction check needs at least {} steps", 2 * w),
        });
    }
    let gi = g.invert();
    for y in region {
        let mut z = y.clone();
        let mut pattern = Vec::with_capacity(n_max + 1);
        for _ in 0..=n_max {
            pattern.push(h.apply(&z) == z);
            z = gi.apply(&z);
        }
        let tail = &pattern[pattern.len() - w..];
        if tail.iter().all(|&f| f) {
            continue;
        }
        if tail.iter().all(|&f| !f) {
            return Ok(false);
        }
        return Err(Error::Undetermined(
            n_max,
            format!("fixing pattern of {y} did not stabilize"),
        ));
    }
    Ok(true)
}

/// Membership of h in con_G(g/K) for K a fixator (or the trivial subgroup);
/// the fixed region of K is computed within the working ball, and K is
/// checked to be invariant under conjugation by g.
pub fn in_contraction(
    engine: &Engine,
    h: &CocycleElement,
    g: &CocycleElement,
    g_report: &IsometryReport,
    k: Option<&FixatorSpec>,
    ball_radius: usize,
    n_max: usize,
    horizon: usize,
) -> Result<bool> {
    let ball = ball_around(engine.scheme(), &Vertex::base(), ball_radius);
    let region = match k {
        None => ball,
        Some(spec) => {
            let conj = spec.conjugate(g)?;
            let fixed_g = engine.fixed_vertices_in(&conj, &ball, horizon)?.0;
            let fixed_k = engine.fixed_vertices_in(spec, &ball, horizon)?.0;
            if fixed_g != fixed_k {
                return Err(Error::Precondition(
                    "K is not invariant under conjugation by g".into(),
                ));
            }
            fixed_k
        }
    };
    in_contraction_region(engine, h, g, g_report, &region, n_max)
}

/// The convex <g>-invariant subspaces the contraction theory is checked on:
/// the whole working ball, the axis Min(g), or the fixed-point set of a
/// supplied element set.
#[derive(Debug, Clone)]
pub enum YSpace {
    WholeBall,
    Axis,
    FixedSetOf(Vec<CocycleElement>),
}

impl YSpace {
    pub fn contains(&self, v: &Vertex, g: &CocycleElement, g_report: &IsometryReport) -> bool {
        match self {
            YSpace::WholeBall => true,
            YSpace::Axis => g.apply(v).distance(v) == g_report.translation_length,
            YSpace::FixedSetOf(els) => els.iter().all(|e| e.apply(v) == *v),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsorbingWitness {
    pub end: End,
    /// (t, radius, saturated): largest radius r such that the Y-ball of
    /// radius r around rho(t) lies in Z, capped by the window slack.
    pub radii: Vec<(usize, usize, bool)>,
    pub stretch: usize,
    pub accepted: bool,
}

/// Decide whether Z (the common fixed set of `elements`) is an absorbing set
/// for `xi` within Y: the monotonized radius sequence must saturate the
/// window or strictly increase at least once per `stretch`.
pub fn is_absorbing(
    engine: &Engine,
    elements: &[CocycleElement],
    xi: &End,
    y: &YSpace,
    g: &CocycleElement,
    g_report: &IsometryReport,
    ball_radius: usize,
    stretch: usize,
) -> Result<AbsorbingWitness> {
    let ball = ball_around(engine.scheme(), &Vertex::base(), ball_radius);
    let in_z = |v: &Vertex| elements.iter().all(|e| e.apply(v) == *v);
    let in_y = |v: &Vertex| y.contains(v, g, g_report);
    let t_top = ball_radius.saturating_sub(xi.prefix().depth());
    if t_top < 2 * stretch {
        return Err(Error::HorizonTooSmall {
            horizon: ball_radius,
            need: "absorbing window shorter than two stretches".into(),
        });
    }
    let mut radii = Vec::new();
    for t in 0..=t_top {
        let center = xi.ray_vertex(t);
        let slack = ball_radius - center.depth();
        let mut radius = slack;
        let mut saturated = true;
        'rloop: for r in 0..=slack {
            for v in &ball {
                if center.distance(v) <= r && in_y(v) && !in_z(v) {
                    radius = r.saturating_sub(1);
                    saturated = false;
                    break 'rloop;
                }
            }
        }
        radii.push((t, radius, saturated));
    }
    // Monotonize from the far end; saturated entries count as unbounded.
    const INF: usize = usize::MAX;
    let mut mono: Vec<usize> = radii
        .iter()
        .map(|&(_, r, sat)| if sat { INF } else { r })
        .collect();
    for i in (0..mono.len().saturating_sub(1)).rev() {
        mono[i] = mono[i].min(mono[i + 1]);
    }
    let mut accepted = true;
    for t in 0..mono.len().saturating_sub(stretch) {
        if mono[t] == INF {
            break;
        }
        if mono[t + stretch] <= mono[t] {
            accepted = false;
            break;
        }
    }
    Ok(AbsorbingWitness { end: xi.clone(), radii, stretch, accepted })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionGeometricReport {
    pub geometric: bool,
    pub per_element: Vec<bool>,
    pub witness: AbsorbingWitness,
}

/// Theorem-under-test: C lies in con_G(g/Fix(Y)) iff the fixed set of `<C>`
/// is absorbing for the repelling end within Y. Both routes are computed;
/// disagreement is a hard error.
pub fn contraction_geometric(
    engine: &Engine,
    elements: &[CocycleElement],
    g: &CocycleElement,
    g_report: &IsometryReport,
    y: &YSpace,
    ball_radius: usize,
    n_max: usize,
    stretch: usize,
) -> Result<ContractionGeometricReport> {
    let axis = g_report.axis()?;
    let witness = is_absorbing(
        engine, elements, &axis.xi_minus, y, g, g_report, ball_radius, stretch,
    )?;
    let ball = ball_around(engine.scheme(), &Vertex::base(), ball_radius);
    let region: Vec<Vertex> = ball
        .iter()
        .filter(|v| y.contains(v, g, g_report))
        .cloned()
        .collect();
    let per_element = elements
        .iter()
        .map(|c| in_contraction_region(engine, c, g, g_report, &region, n_max))
        .collect::<Result<Vec<bool>>>()?;
    let all_in = per_element.iter().all(|&b| b);
    if all_in != witness.accepted {
        return Err(Error::RouteDisagreement(format!(
            "contraction: per-element membership {all_in} vs absorbing {}",
            witness.accepted
        )));
    }
    Ok(ContractionGeometricReport { geometric: witness.accepted, per_element, witness })
}

/// Restriction set of the nub approximation: the intersection of the
/// g-conjugates of a certified minimizing subgroup over shifts |k| <= max,
/// restricted to the working ball, with a stabilization certificate in the
/// number of shifts.
pub fn nub_approx(
    engine: &Engine,
    g: &CocycleElement,
    minimizing: &FixatorSpec,
    max_shifts: usize,
    ball_radius: usize,
    horizon: usize,
) -> Result<(RestrictionSet, Certification)> {
    let window = ball_around(engine.scheme(), &Vertex::base(), ball_radius);
    let gi = g.invert();
    let mut inter = minimizing.clone();
    let mut fwd = minimizing.clone();
    let mut bwd = minimizing.clone();
    let mut last: Option<RestrictionSet> = None;
    let mut stable_for = 0usize;
    let mut cert = Certification::UpToHorizon(max_shifts);
    for k in 0..=max_shifts {
        if k > 0 {
            fwd = fwd.conjugate(g)?;
            bwd = bwd.conjugate(&gi)?;
            inter = inter.intersect(&fwd).intersect(&bwd);
        }
        let rs = engine.restrictions(&inter, &window, horizon)?;
        if let Some(prev) = &last {
            if prev.maps == rs.maps {
                stable_for += 1;
            } else {
                stable_for = 0;
            }
        }
        let done = stable_for + 1 >= engine.opts.stabilization_window;
        last = Some(rs);
        if done {
            cert = Certification::StabilizedAt(k);
            break;
        }
    }
    Ok((last.unwrap(), cert))
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionSpaceReport {
    pub z_size: usize,
    pub nested: bool,
    pub covers: bool,
    pub shrinking_empty: bool,
}

/// How W is described for the contraction-space checks.
pub enum WSpec<'a> {
    Trivial,
    Fixator(&'a FixatorSpec),
    /// V ∩ con(g / Fix(Y)) for a minimizing V, realized by filtering the
    /// witnesses of V through the per-element contraction test.
    MinimizingCapCon(&'a FixatorSpec),
}

/// Contraction-space checks: with Z = X^W ∩ Y, verify Z ⊆ gZ, that forward
/// translates of Z cover Y within the window, and that backward translates
/// have empty intersection with the window.
pub fn contraction_space_check(
    engine: &Engine,
    g: &CocycleElement,
    g_report: &IsometryReport,
    y: &YSpace,
    w: WSpec<'_>,
    ball_radius: usize,
    n_max: usize,
    horizon: usize,
) -> Result<ContractionSpaceReport> {
    let ball = ball_around(engine.scheme(), &Vertex::base(), ball_radius);
    let y_window: Vec<Vertex> = ball
        .iter()
        .filter(|v| y.contains(v, g, g_report))
        .cloned()
        .collect();
    let filtered: Option<Vec<CocycleElement>> = match &w {
        WSpec::MinimizingCapCon(v) => {
            let mut opts = engine.opts.clone();
            opts.collect_witnesses = true;
            let e2 = Engine::with_options(engine.scheme().clone(), opts);
            let rs = e2.restrictions(v, &ball, horizon)?;
            let mut kept = Vec::new();
            for (_, el) in rs.witnesses {
                if in_contraction_region(engine, &el, g, g_report, &y_window, n_max)? {
                    kept.push(el);
                }
            }
            Some(kept)
        }
        _ => None,
    };
    let mut cache: BTreeMap<Vertex, bool> = BTreeMap::new();
    let mut in_z = |v: &Vertex| -> Result<bool> {
        if !y.contains(v, g, g_report) {
            return Ok(false);
        }
        if let Some(b) = cache.get(v) {
            return Ok(*b);
        }
        let b = match &w {
            WSpec::Trivial => true,
            WSpec::Fixator(f) => engine.index(f, &[v.clone()], horizon)?.0 == 1,
            WSpec::MinimizingCapCon(_) => {
                filtered.as_ref().unwrap().iter().all(|e| e.apply(v) == *v)
            }
        };
        cache.insert(v.clone(), b);
        Ok(b)
    };
    let gi = g.invert();
    let mut z_window: Vec<Vertex> = Vec::new();
    for v in &y_window {
        if in_z(v)? {
            z_window.push(v.clone());
        }
    }
    // Z ⊆ gZ, i.e. g^{-1} Z ⊆ Z.
    let mut nested = true;
    for v in &z_window {
        if !in_z(&gi.apply(v))? {
            nested = false;
            break;
        }
    }
    // Forward translates cover Y in the window.
    let mut covers = true;
    'cover: for v in &y_window {
        let mut x = v.clone();
        for _ in 0..=n_max {
            if in_z(&x)? {
                continue 'cover;
            }
            x = gi.apply(&x);
        }
        covers = false;
        break;
    }
    // Backward translates shrink to nothing in the window.
    let mut shrinking_empty = true;
    'empty: for v in &ball {
        let mut x = v.clone();
        for _ in 0..=n_max {
            if !in_z(&x)? {
                continue 'empty;
            }
            x = g.apply(&x);
        }
        shrinking_empty = false;
        break;
    }
    Ok(ContractionSpaceReport {
        z_size: z_window.len(),
        nested,
        covers,
        shrinking_empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Perm;
    use crate::scheme::{builtin, GroupScheme};
    use std::sync::Arc;

    fn v(s: &str) -> Vertex {
        Vertex::parse(s).unwrap()
    }

    fn full3() -> (Arc<GroupScheme>, Engine) {
        let s = GroupScheme::full(3).unwrap();
        (s.clone(), Engine::new(s))
    }

    /// A perturbation hanging off the given vertex that moves some subtree
    /// but leaves the two given colors at that vertex alone.
    fn offside_perturbation(
        s: &Arc<GroupScheme>,
        at: &Vertex,
        keep1: u8,
        keep2: u8,
    ) -> CocycleElement {
        let c_off = (0..s.degree()).find(|&c| c != keep1 && c != keep2).unwrap();
        let off = at.neighbor(c_off);
        let c_in = off.last().unwrap();
        let free: Vec<u8> = (0..s.degree()).filter(|&c| c != c_in).collect();
        builtin::local_perturbation(s, &off, Perm::transposition(s.degree() as usize, free[0], free[1]))
            .unwrap()
    }

    #[test]
    fn classify_identity() {
        let (s, e) = full3();
        let id = CocycleElement::identity(s);
        let r = classify(&e, &id).unwrap();
        assert_eq!(r.kind, IsometryKind::Bounded);
        assert_eq!(r.fixed, Some(Midpoint::Vertex(Vertex::base())));
    }

    #[test]
    fn classify_standard_translation() {
        let (s, e) = full3();
        let g = builtin::standard_translation(&s).unwrap();
        let r = classify(&e, &g).unwrap();
        assert!(r.is_hyperbolic());
        assert_eq!(r.translation_length, 1);
        let axis = r.axis().unwrap();
        assert_ne!(axis.xi_plus, axis.xi_minus);
        for t in -3..=3 {
            let x = axis.vertex(t);
            assert_eq!(g.apply(&x).distance(&x), 1);
            assert_eq!(g.apply(&x), axis.vertex(t + 1));
        }
    }

    #[test]
    fn classify_square_doubles_length() {
        let scheme = GroupScheme::coupled_wreath(2).unwrap();
        let e = Engine::new(scheme.clone());
        let g = builtin::standard_translation(&scheme).unwrap();
        let g2 = g.compose(&g);
        let r = classify(&e, &g).unwrap();
        let r2 = classify(&e, &g2).unwrap();
        assert_eq!(r.translation_length, 1);
        assert_eq!(r2.translation_length, 2);
        assert_eq!(r.axis().unwrap().xi_plus, r2.axis().unwrap().xi_plus);
        assert_eq!(r.axis().unwrap().xi_minus, r2.axis().unwrap().xi_minus);
    }

    #[test]
    fn classify_edge_inversion() {
        // The generator of the free product: swaps eps and "0".
        let (s, e) = full3();
        let mut sigma = std::collections::BTreeMap::new();
        sigma.insert(Vertex::base(), Perm::identity(3));
        let g = CocycleElement::new(s, v("0"), 0, sigma).unwrap();
        assert_eq!(g.apply(&Vertex::base()), v("0"));
        assert_eq!(g.apply(&v("0")), Vertex::base());
        let r = classify(&e, &g).unwrap();
        assert_eq!(r.kind, IsometryKind::Bounded);
        assert_eq!(r.fixed, Some(Midpoint::Edge(Vertex::base(), v("0"))));
    }

    #[test]
    fn stabilizes_end_of_own_axis() {
        let (s, e) = full3();
        let g = builtin::standard_translation(&s).unwrap();
        let r = classify(&e, &g).unwrap();
        let axis = r.axis().unwrap();
        for xi in [&axis.xi_plus, &axis.xi_minus] {
            let hor = stabilizes_end_horizon(&g, xi);
            assert!(stabilizes_end(&g, xi, hor).unwrap());
        }
    }

    #[test]
    fn perturbation_moving_ray_does_not_stabilize() {
        let (s, e) = full3();
        let g = builtin::standard_translation(&s).unwrap();
        let r = classify(&e, &g).unwrap();
        let axis = r.axis().unwrap();
        // Swap the forward continuation at an on-ray vertex.
        let x2 = axis.vertex(2);
        let c_in = x2.edge_color_to(&axis.vertex(1)).unwrap();
        let c_out = x2.edge_color_to(&axis.vertex(3)).unwrap();
        let c_other = (0..3u8).find(|&c| c != c_in && c != c_out).unwrap();
        let h = builtin::local_perturbation(&s, &x2, Perm::transposition(3, c_out, c_other))
            .unwrap();
        let hor = stabilizes_end_horizon(&h, &axis.xi_plus);
        assert!(!stabilizes_end(&h, &axis.xi_plus, hor).unwrap());
        let _ = e;
    }

    #[test]
    fn parabolic_routes_agree() {
        let (s, e) = full3();
        let g = builtin::standard_translation(&s).unwrap();
        let rep = classify(&e, &g).unwrap();
        let r = in_parabolic(&e, &g, &g, &rep, 24).unwrap();
        assert!(r.member, "g stabilizes its own attracting end");
        let axis = rep.axis().unwrap();
        // Moving the forward ray at x1: not in par(g^{-1}).
        let x1 = axis.vertex(1);
        let c_in = x1.edge_color_to(&axis.vertex(0)).unwrap();
        let c_out = x1.edge_color_to(&axis.vertex(2)).unwrap();
        let c_other = (0..3u8).find(|&c| c != c_in && c != c_out).unwrap();
        let h = builtin::local_perturbation(&s, &x1, Perm::transposition(3, c_out, c_other))
            .unwrap();
        let r = in_parabolic(&e, &h, &g, &rep, 24).unwrap();
        assert!(!r.member);
        // A perturbation hanging off the backward axis stabilizes xi_plus.
        let xm1 = axis.vertex(-1);
        let k1 = xm1.edge_color_to(&axis.vertex(0)).unwrap();
        let k2 = xm1.edge_color_to(&axis.vertex(-2)).unwrap();
        let h2 = offside_perturbation(&s, &xm1, k1, k2);
        let r = in_parabolic(&e, &h2, &g, &rep, 24).unwrap();
        assert!(r.member);
    }

    #[test]
    fn contraction_membership_examples() {
        let (s, e) = full3();
        let g = builtin::standard_translation(&s).unwrap();
        let rep = classify(&e, &g).unwrap();
        let id = CocycleElement::identity(s.clone());
        assert!(in_contraction(&e, &id, &g, &rep, None, 3, 24, 8).unwrap());
        assert!(!in_contraction(&e, &g, &g, &rep, None, 3, 24, 8).unwrap());
        // A perturbation whose moved subtree avoids the backward ray is
        // contracted, wherever it hangs.
        let axis = rep.axis().unwrap();
        let xm2 = axis.vertex(-2);
        let k1 = xm2.edge_color_to(&axis.vertex(-1)).unwrap();
        let k2 = xm2.edge_color_to(&axis.vertex(-3)).unwrap();
        let h = offside_perturbation(&s, &xm2, k1, k2);
        assert!(in_contraction(&e, &h, &g, &rep, None, 3, 24, 8).unwrap());
        let x2 = axis.vertex(2);
        let k1 = x2.edge_color_to(&axis.vertex(1)).unwrap();
        let k2 = x2.edge_color_to(&axis.vertex(3)).unwrap();
        let h = offside_perturbation(&s, &x2, k1, k2);
        assert!(in_contraction(&e, &h, &g, &rep, None, 3, 24, 8).unwrap());
        // A perturbation moving the backward ray itself is not contracted:
        // deep backward orbit vertices stay moved forever.
        let c_in = xm2.edge_color_to(&axis.vertex(-1)).unwrap();
        let c_bwd = xm2.edge_color_to(&axis.vertex(-3)).unwrap();
        let c_off = (0..3u8).find(|&c| c != c_in && c != c_bwd).unwrap();
        let h = builtin::local_perturbation(&s, &xm2, Perm::transposition(3, c_bwd, c_off))
            .unwrap();
        assert!(!in_contraction(&e, &h, &g, &rep, None, 3, 24, 8).unwrap());
    }

    #[test]
    fn absorbing_examples() {
        let (s, e) = full3();
        let g = builtin::standard_translation(&s).unwrap();
        let rep = classify(&e, &g).unwrap();
        let xi = rep.axis().unwrap().xi_minus.clone();
        let w = is_absorbing(&e, &[], &xi, &YSpace::WholeBall, &g, &rep, 6, 2).unwrap();
        assert!(w.accepted, "whole space absorbs");
        assert!(w.radii.iter().all(|&(_, _, sat)| sat));
        let w = is_absorbing(&e, &[g.clone()], &xi, &YSpace::WholeBall, &g, &rep, 6, 2).unwrap();
        assert!(!w.accepted, "empty fixed set does not absorb");
        let _ = s;
    }

    #[test]
    fn contraction_geometric_routes() {
        let (s, e) = full3();
        let g = builtin::standard_translation(&s).unwrap();
        let rep = classify(&e, &g).unwrap();
        let id = CocycleElement::identity(s.clone());
        let r = contraction_geometric(&e, &[id], &g, &rep, &YSpace::WholeBall, 6, 30, 2).unwrap();
        assert!(r.geometric);
        let r = contraction_geometric(&e, &[g.clone()], &g, &rep, &YSpace::WholeBall, 6, 30, 2)
            .unwrap();
        assert!(!r.geometric);
    }
}
