//! Back-door trails, the back-door criterion and minimal adjustment sets.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::separation::{reachable, sorted_set};
use super::trail::{blocked, enumerate_trails, sort_paths, Trail, TrailPath};
use super::{CausalDag, GraphError};

/// Largest candidate pool `minimal_adjustment_sets` will enumerate.
pub const MAX_ADJUSTMENT_CANDIDATES: usize = 24;

/// A sorted set of variable names used to adjust for confounding.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct AdjustmentSet(Vec<String>);

impl AdjustmentSet {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Self {
        let names: Vec<S> = names.into_iter().collect();
        AdjustmentSet(sorted_set(names.iter().map(AsRef::as_ref)))
    }

    pub fn empty() -> Self {
        AdjustmentSet(Vec::new())
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.iter().any(|n| n == name)
    }

    pub fn is_subset_of(&self, other: &AdjustmentSet) -> bool {
        self.0.iter().all(|n| other.contains(n))
    }
}

impl PartialOrd for AdjustmentSet {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Size first, then lexicographic.
impl Ord for AdjustmentSet {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for AdjustmentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("∅")
        } else {
            write!(f, "{{{}}}", self.0.join(", "))
        }
    }
}

/// Why a set fails the back-door criterion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackdoorViolation {
    /// A member of the set is a descendant of the treatment (a mediator or a
    /// consequence of one).
    DescendantOfTreatment { variable: String },
    /// A back-door trail stays open. `opened_colliders` lists the colliders
    /// on it that conditioning opened.
    OpenTrail {
        trail: TrailPath,
        opened_colliders: Vec<String>,
    },
}

impl fmt::Display for BackdoorViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackdoorViolation::DescendantOfTreatment { variable } => {
                write!(f, "`{variable}` is a descendant of the treatment")
            }
            BackdoorViolation::OpenTrail {
                trail,
                opened_colliders,
            } => {
                write!(f, "back-door trail {trail} is open")?;
                if !opened_colliders.is_empty() {
                    write!(f, " (conditioning opens collider {})", opened_colliders.join(", "))?;
                }
                Ok(())
            }
        }
    }
}

fn pair(g: &CausalDag, treatment: &str, outcome: &str) -> Result<(usize, usize), GraphError> {
    let (x, y) = (g.require(treatment)?, g.require(outcome)?);
    if x == y {
        return Err(GraphError::InvalidQuery("treatment and outcome must differ".into()));
    }
    Ok((x, y))
}

fn resolve_set(g: &CausalDag, x: usize, y: usize, z: &AdjustmentSet) -> Result<Vec<usize>, GraphError> {
    let ids = z.names().iter().map(|n| g.require(n)).collect::<Result<Vec<_>, _>>()?;
    if ids.contains(&x) || ids.contains(&y) {
        return Err(GraphError::InvalidQuery(
            "adjustment set contains the treatment or the outcome".into(),
        ));
    }
    Ok(ids)
}

fn backdoor_internal(g: &CausalDag, x: usize, y: usize) -> Vec<Trail> {
    enumerate_trails(g, x, y)
        .into_iter()
        .filter(|t| t.directions[0] == super::Orientation::AgainstEdge)
        .collect()
}

/// Trails from `treatment` to `outcome` whose first edge points into the
/// treatment.
pub fn backdoor_trails(g: &CausalDag, treatment: &str, outcome: &str) -> Result<Vec<TrailPath>, GraphError> {
    let (x, y) = pair(g, treatment, outcome)?;
    Ok(sort_paths(g, backdoor_internal(g, x, y)))
}

/// Core test on indices: no descendant of `x` in `z`, and `x`, `y`
/// d-separated by `z` once the edges out of `x` are cut.
fn backdoor_holds(g: &CausalDag, x: usize, y: usize, z: &[usize], x_desc: &[bool]) -> bool {
    if z.iter().any(|&v| x_desc[v]) {
        return false;
    }
    !reachable(g, x, z, Some(x))[y]
}

/// The back-door criterion: `z` holds no descendant of the treatment and
/// blocks every back-door trail.
pub fn satisfies_backdoor(
    g: &CausalDag,
    treatment: &str,
    outcome: &str,
    z: &AdjustmentSet,
) -> Result<bool, GraphError> {
    let (x, y) = pair(g, treatment, outcome)?;
    let ids = resolve_set(g, x, y, z)?;
    Ok(backdoor_holds(g, x, y, &ids, &g.descendant_mask(&[x])))
}

/// Explains why `z` fails the back-door criterion, or `None` when it
/// satisfies it. Open trails are found by enumeration, so the first one in
/// trail order is reported.
pub fn backdoor_violation(
    g: &CausalDag,
    treatment: &str,
    outcome: &str,
    z: &AdjustmentSet,
) -> Result<Option<BackdoorViolation>, GraphError> {
    let (x, y) = pair(g, treatment, outcome)?;
    let ids = resolve_set(g, x, y, z)?;
    let x_desc = g.descendant_mask(&[x]);
    if let Some(&d) = ids.iter().find(|&&v| x_desc[v]) {
        return Ok(Some(BackdoorViolation::DescendantOfTreatment {
            variable: g.name(d).into(),
        }));
    }
    let mut zmask = vec![false; g.len()];
    for &v in &ids {
        zmask[v] = true;
    }
    let z_anc = g.ancestor_mask(&ids);
    let mut open: Vec<TrailPath> = backdoor_internal(g, x, y)
        .into_iter()
        .filter(|t| !blocked(t, &zmask, &z_anc))
        .map(|t| t.to_path(g))
        .collect();
    open.sort();
    Ok(open.into_iter().next().map(|trail| {
        let opened_colliders = trail.colliders().into_iter().map(String::from).collect();
        BackdoorViolation::OpenTrail {
            trail,
            opened_colliders,
        }
    }))
}

/// All inclusion-minimal sets satisfying the back-door criterion, sorted by
/// size then lexicographically.
///
/// Minimal sets only contain ancestors of the treatment or outcome, so the
/// search is restricted to those (minus descendants of the treatment).
pub fn minimal_adjustment_sets(
    g: &CausalDag,
    treatment: &str,
    outcome: &str,
) -> Result<Vec<AdjustmentSet>, GraphError> {
    let (x, y) = pair(g, treatment, outcome)?;
    let x_desc = g.descendant_mask(&[x]);
    let anc = g.ancestor_mask(&[x, y]);
    let candidates: Vec<usize> = (0..g.len())
        .filter(|&v| v != x && v != y && anc[v] && !x_desc[v])
        .collect();
    let k = candidates.len();
    if k > MAX_ADJUSTMENT_CANDIDATES {
        return Err(GraphError::SearchTooLarge(k));
    }

    // Masks in order of increasing size: a valid set is minimal iff it
    // contains no smaller minimal set.
    let mut masks: Vec<u32> = (0..(1u32 << k)).collect();
    masks.sort_by_key(|m| m.count_ones());
    let mut minimal: Vec<u32> = Vec::new();
    let mut z = Vec::with_capacity(k);
    for m in masks {
        if minimal.iter().any(|&s| s & !m == 0) {
            continue;
        }
        z.clear();
        z.extend((0..k).filter(|b| m >> b & 1 == 1).map(|b| candidates[b]));
        if backdoor_holds(g, x, y, &z, &x_desc) {
            minimal.push(m);
        }
    }

    let mut sets: Vec<AdjustmentSet> = minimal
        .into_iter()
        .map(|m| AdjustmentSet::new((0..k).filter(|b| m >> b & 1 == 1).map(|b| g.name(candidates[b]))))
        .collect();
    sets.sort();
    Ok(sets)
}
