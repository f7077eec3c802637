//! Exact computations with closed groups acting on edge-colored regular trees:
//! scale functions, tidy subgroups, axis trees, parabolic and contraction groups.
//!
//! The tree is the d-regular tree with a proper edge coloring by `{0..d-1}`
//! (every vertex sees each color exactly once), so vertices are addressed by
//! non-backtracking color words from a base vertex. Group elements are carried as
//! finitely-described cocycles (a base image plus local actions with constant
//! tails), and every index of compact open subgroups is computed by exact
//! enumeration of fixator restriction sets.

pub mod tree;
pub mod perm;
pub mod rational;
pub mod scheme;
pub mod engine;
pub mod oracle;
pub mod dynamics;
pub mod scale;
pub mod axis_tree;
pub mod error;

pub use error::{Error, Result};
pub use tree::{Color, End, Midpoint, Segment, TreeParams, Vertex};
pub use perm::{Perm, PermGroup};
pub use rational::Rational;
pub use scheme::{CocycleElement, GroupScheme};

pub use engine::{Certification, Engine, EngineOptions, FixatorSpec, RayMarker, RestrictionSet, TriState};
