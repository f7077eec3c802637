//! Ground-truth oracle: unpruned exhaustive enumeration of ball
//! automorphisms.
//!
//! Enumerates every assignment of local actions to the interior vertices of
//! the radius-r ball around the base vertex (for elements fixing the base
//! vertex), filtering by the scheme's constraints as assignments complete,
//! with no constraint propagation, no convexity reasoning and no tail
//! analysis. Deliberately independent of the engine's search: the only
//! shared vocabulary is the definition of legality itself.

use crate::error::{Error, Result};
use crate::scheme::GroupScheme;
use crate::tree::Vertex;
use std::collections::BTreeSet;

/// Interior vertices (depth < r) of the ball of radius r, in BFS order.
fn interior(scheme: &GroupScheme, r: usize) -> Vec<Vertex> {
    let mut out = vec![Vertex::base()];
    let mut i = 0;
    while i < out.len() {
        let v = out[i].clone();
        i += 1;
        if v.depth() + 1 < r {
            for c in scheme.params().colors() {
                if let Some(w) = v.child(c) {
                    out.push(w);
                }
            }
        }
    }
    out
}

/// Search-node budget guard for the odometer.
pub const DEFAULT_ORACLE_BUDGET: u64 = 50_000_000;

struct Odometer<'a> {
    scheme: &'a GroupScheme,
    verts: Vec<Vertex>,
    /// parent index and edge color within the interior list (root has none).
    parents: Vec<Option<(usize, u8)>>,
    budget: u64,
}

impl<'a> Odometer<'a> {
    fn new(scheme: &'a GroupScheme, r: usize, budget: u64) -> Odometer<'a> {
        let verts = interior(scheme, r);
        let parents = verts
            .iter()
            .map(|v| {
                v.parent().map(|p| {
                    let pi = verts.iter().position(|w| *w == p).unwrap();
                    (pi, v.last().unwrap())
                })
            })
            .collect();
        Odometer { scheme, verts, parents, budget }
    }

    /// Visit every legal complete assignment. `sigma` holds element indices
    /// into the local group's element list.
    fn run(
        &mut self,
        pos: usize,
        sigma: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[Vertex], &[usize]),
    ) -> Result<()> {
        if pos == self.verts.len() {
            visit(&self.verts, sigma);
            return Ok(());
        }
        let lg = self.scheme.local_group();
        for s in 0..lg.order() {
            if self.budget == 0 {
                return Err(Error::BudgetExceeded(DEFAULT_ORACLE_BUDGET));
            }
            self.budget -= 1;
            sigma[pos] = s;
            // Check the one constraint that becomes decidable now: the edge
            // to the parent.
            if let Some((pi, c)) = self.parents[pos] {
                let sv = &lg.elements()[sigma[pi]];
                let sw = &lg.elements()[s];
                if !self.scheme.edge_ok(c, sv, sw) {
                    continue;
                }
            }
            self.run(pos + 1, sigma, visit)?;
        }
        sigma[pos] = usize::MAX;
        Ok(())
    }
}

/// Number of automorphisms of the radius-r ball fixing the base vertex that
/// arise as restrictions of legal elements: with the extension property this
/// is exactly the number of legal local-action assignments on the interior.
pub fn ball_group_order(scheme: &GroupScheme, r: usize) -> Result<u64> {
    let mut od = Odometer::new(scheme, r, DEFAULT_ORACLE_BUDGET);
    let mut count = 0u64;
    let mut sigma = vec![usize::MAX; od.verts.len()];
    let n = od.verts.len();
    let mut visit = |_: &[Vertex], _: &[usize]| count += 1;
    od.run(0, &mut sigma, &mut visit)?;
    debug_assert_eq!(sigma.len(), n);
    Ok(count)
}

/// Restrictions to `targets` of legal elements that fix the base vertex and
/// every vertex of `fixed`, all within the radius-r ball.
pub fn restrictions(
    scheme: &GroupScheme,
    r: usize,
    fixed: &[Vertex],
    targets: &[Vertex],
) -> Result<BTreeSet<Vec<Vertex>>> {
    for x in fixed.iter().chain(targets) {
        if x.depth() > r {
            return Err(Error::Precondition(format!(
                "oracle vertex {x} outside the radius-{r} ball"
            )));
        }
    }
    let mut od = Odometer::new(scheme, r, DEFAULT_ORACLE_BUDGET);
    let lg = scheme.local_group();
    let image_of = |x: &Vertex, verts: &[Vertex], sigma: &[usize]| -> Vertex {
        // Walk from the base vertex; every proper ancestor of a ball vertex
        // is interior, so each local action along the way is assigned.
        let mut img = Vertex::base();
        let mut pre = Vertex::base();
        for &c in x.word() {
            let pi = verts.iter().position(|w| *w == pre).unwrap();
            img = img.neighbor(lg.elements()[sigma[pi]].apply(c));
            pre = pre.neighbor(c);
        }
        img
    };
    let mut out: BTreeSet<Vec<Vertex>> = BTreeSet::new();
    let mut sigma = vec![usize::MAX; od.verts.len()];
    let mut visit = |verts: &[Vertex], sigma: &[usize]| {
        for f in fixed {
            if image_of(f, verts, sigma) != *f {
                return;
            }
        }
        let map: Vec<Vertex> = targets.iter().map(|t| image_of(t, verts, sigma)).collect();
        out.insert(map);
    };
    od.run(0, &mut sigma, &mut visit)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::PermGroup;

    fn v(s: &str) -> Vertex {
        Vertex::parse(s).unwrap()
    }

    #[test]
    fn full3_ball1_is_sym3() {
        let scheme = GroupScheme::full(3).unwrap();
        assert_eq!(ball_group_order(&scheme, 1).unwrap(), 6);
    }

    #[test]
    fn universal_c3_ball1() {
        let scheme = GroupScheme::universal(PermGroup::cyclic(3)).unwrap();
        assert_eq!(ball_group_order(&scheme, 1).unwrap(), 3);
    }

    #[test]
    fn full3_ball2_counts() {
        // sigma(eps) free (6); each depth-1 vertex pinned on the parent edge
        // color: 2 extensions each.
        let scheme = GroupScheme::full(3).unwrap();
        assert_eq!(ball_group_order(&scheme, 2).unwrap(), 6 * 2 * 2 * 2);
    }

    #[test]
    fn coupled2_ball2_counts() {
        // sigma(eps) in A (8); at each depth-1 vertex the block coset meets
        // the parent-edge compatibility only in sigma(eps) itself (the block
        // element would have to fix a point of its own column), so the whole
        // vertex stabilizer is the constant-cocycle copy of A.
        let scheme = GroupScheme::coupled_wreath(2).unwrap();
        assert_eq!(ball_group_order(&scheme, 2).unwrap(), 8);
        assert_eq!(ball_group_order(&scheme, 3).unwrap(), 8);
    }

    #[test]
    fn oracle_restriction_examples() {
        let scheme = GroupScheme::full(3).unwrap();
        let rs = restrictions(&scheme, 2, &[], &[v("0")]).unwrap();
        assert_eq!(rs.len(), 3);
        let rs = restrictions(&scheme, 2, &[v("0")], &[v("1")]).unwrap();
        assert_eq!(rs.len(), 2);
    }
}
