//! Bundled structural models used as ground truth.
//!
//! CPT values are fixture data chosen to give clear, detectable effects;
//! they are not estimates from any real study.

use alloc::vec;
use alloc::vec::Vec;

use super::{Cpt, ScmSpec};
use crate::graph::{CausalDag, Variable};
use crate::reference::{self, *};

pub const CONFOUNDED_TRIANGLE: &str = "confounded-triangle";
pub const COLLIDER_TRAP: &str = "collider-trap";
pub const REFERENCE_STUDY: &str = "reference-study";

pub const NAMES: &[&str] = &[CONFOUNDED_TRIANGLE, COLLIDER_TRAP, REFERENCE_STUDY];

pub fn by_name(name: &str) -> Option<ScmSpec> {
    match name {
        CONFOUNDED_TRIANGLE => Some(confounded_triangle()),
        COLLIDER_TRAP => Some(collider_trap()),
        REFERENCE_STUDY => Some(reference_study()),
        _ => None,
    }
}

fn yes_no(name: &str) -> Variable {
    Variable::with_levels(name, ["No", "Yes"]).expect("static definition")
}

/// Parent levels by name, for writing CPTs readably.
struct Parents<'a> {
    names: &'a [&'a str],
    combo: &'a [usize],
}

impl Parents<'_> {
    fn get(&self, name: &str) -> usize {
        let k = self.names.iter().position(|n| *n == name).expect("declared parent");
        self.combo[k]
    }

    fn is(&self, name: &str, level: usize) -> f64 {
        if self.get(name) == level {
            1.0
        } else {
            0.0
        }
    }
}

fn logit_cpt(g: &CausalDag, child: &str, parents: &[&str], logits: impl Fn(&Parents) -> Vec<f64>) -> Cpt {
    let child_var = g.variable(child).expect("declared child");
    let parent_vars: Vec<&Variable> = parents
        .iter()
        .map(|p| g.variable(p).expect("declared parent"))
        .collect();
    Cpt::from_logits(child_var, &parent_vars, |combo| {
        logits(&Parents { names: parents, combo })
    })
    .expect("softmax rows are normalized")
}

/// `Z -> X`, `Z -> Y`, `X -> Y` with all variables binary and positive
/// confounding: the naive contrast overstates the causal risk ratio
/// (exact value 1.6, naive value 3.25).
pub fn confounded_triangle() -> ScmSpec {
    let (z, x, y) = (yes_no("Z"), yes_no("X"), yes_no("Y"));
    let g = CausalDag::new(
        vec![z.clone(), x.clone(), y.clone()],
        [("Z", "X"), ("Z", "Y"), ("X", "Y")],
    )
    .expect("static definition");
    let cpts = vec![
        Cpt::marginal(&z, vec![0.5, 0.5]).unwrap(),
        Cpt::new(&x, &[&z], vec![vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap(),
        // rows: (X, Z) = (No, No), (No, Yes), (Yes, No), (Yes, Yes)
        Cpt::new(
            &y,
            &[&x, &z],
            vec![vec![0.9, 0.1], vec![0.6, 0.4], vec![0.8, 0.2], vec![0.4, 0.6]],
        )
        .unwrap(),
    ];
    ScmSpec::new(g, cpts).expect("static definition")
}

/// M-structure `X <- A -> C <- B -> Y` plus `X -> Y`. No adjustment is
/// needed; adjusting for the collider `C` opens a biasing path.
pub fn collider_trap() -> ScmSpec {
    let vars: Vec<Variable> = ["A", "B", "C", "X", "Y"].iter().map(|n| yes_no(n)).collect();
    let g =
        CausalDag::new(vars, [("A", "X"), ("A", "C"), ("B", "C"), ("B", "Y"), ("X", "Y")]).expect("static definition");
    let cpts = vec![
        logit_cpt(&g, "A", &[], |_| vec![0.0, 0.0]),
        logit_cpt(&g, "B", &[], |_| vec![0.0, 0.0]),
        logit_cpt(&g, "C", &["A", "B"], |p| {
            vec![0.0, -2.5 + 2.5 * p.is("A", 1) + 2.5 * p.is("B", 1)]
        }),
        logit_cpt(&g, "X", &["A"], |p| vec![0.0, -1.0 + 2.0 * p.is("A", 1)]),
        logit_cpt(&g, "Y", &["B", "X"], |p| {
            vec![0.0, -1.5 + 0.7 * p.is("X", 1) + 2.0 * p.is("B", 1)]
        }),
    ];
    ScmSpec::new(g, cpts).expect("static definition")
}

/// Structural model on the final reference graph.
pub fn reference_study() -> ScmSpec {
    let g = reference::final_graph();
    let cpts = vec![
        logit_cpt(&g, SOCIAL_IMPACT, &[], |_| vec![0.0, -0.4]),
        logit_cpt(&g, GENDER, &[], |_| vec![0.0, 0.0]),
        logit_cpt(&g, AGE, &[], |_| vec![0.0, 0.3, -0.6]),
        logit_cpt(&g, RACE, &[], |_| vec![0.8, 0.0, -0.2]),
        logit_cpt(&g, FAMILIARITY, &[], |_| vec![0.4, 0.0, -0.3]),
        logit_cpt(&g, EDUCATION, &[GENDER, RACE, AGE], |p| {
            let male = p.is(GENDER, 1);
            vec![
                0.0,
                -0.2 + 0.9 * male + 1.0 * p.is(RACE, 2) - 0.8 * p.is(AGE, 2),
                0.6 - 0.7 * male + 1.1 * p.is(RACE, 1) - 1.2 * p.is(AGE, 0),
            ]
        }),
        logit_cpt(&g, EMPLOYMENT, &[EDUCATION, AGE, RACE, GENDER], |p| {
            let young = p.is(AGE, 0);
            let old = p.is(AGE, 2);
            let highschool = p.is(EDUCATION, 1);
            vec![
                0.0,
                0.3 + 0.8 * highschool + 0.6 * p.is(RACE, 1),
                1.0 - 1.2 * highschool + 1.0 * p.is(GENDER, 1) - 1.4 * old + 0.5 * p.is(RACE, 2),
                -0.5 + 2.2 * young - 1.5 * old + 0.9 * p.is(EDUCATION, 2),
            ]
        }),
        logit_cpt(&g, URGENCY, &[EMPLOYMENT, AGE], |p| {
            vec![
                0.0,
                -0.8 + 1.6 * p.is(EMPLOYMENT, 2) + 0.8 * p.is(EMPLOYMENT, 1) + 0.9 * p.is(AGE, 1),
            ]
        }),
        logit_cpt(&g, TRAFFIC, &[SOCIAL_IMPACT, URGENCY], |p| {
            let social = p.is(SOCIAL_IMPACT, 1);
            let urgent = p.is(URGENCY, 1);
            vec![
                0.0,
                0.2 + 0.8 * social + 0.6 * urgent,
                -0.2 + 1.5 * social + 1.0 * urgent,
            ]
        }),
        logit_cpt(&g, FINANCIAL_CONCERN, &[EMPLOYMENT, AGE, EDUCATION], |p| {
            vec![
                0.0,
                -0.3 + 1.6 * p.is(EMPLOYMENT, 0) + 0.9 * p.is(EMPLOYMENT, 3) - 0.8 * p.is(AGE, 2)
                    + 0.9 * p.is(EDUCATION, 1),
            ]
        }),
        logit_cpt(&g, FIRST_CONCERN, &[SOCIAL_IMPACT, RACE, GENDER, FAMILIARITY], |p| {
            let social = p.is(SOCIAL_IMPACT, 1);
            vec![
                0.0,
                -0.3 + 1.3 * social + 0.9 * p.is(RACE, 1) + 0.8 * p.is(GENDER, 1),
                -0.6 - 0.8 * social + 1.2 * p.is(RACE, 2) + 1.0 * p.is(FAMILIARITY, 2) + 0.6 * p.is(FAMILIARITY, 1),
            ]
        }),
        logit_cpt(
            &g,
            ROUTE_CHOICE,
            &[TRAFFIC, SOCIAL_IMPACT, GENDER, AGE, URGENCY, FAMILIARITY],
            |p| {
                // common propensity to leave the freeway
                let leave = 1.0 * p.is(TRAFFIC, 1) + 1.9 * p.is(TRAFFIC, 2) + 1.5 * p.is(SOCIAL_IMPACT, 1)
                    - 1.0 * p.is(GENDER, 1)
                    + 0.6 * p.is(AGE, 1)
                    - 0.7 * p.is(AGE, 2)
                    + 1.1 * p.is(URGENCY, 1)
                    + 0.9 * p.is(FAMILIARITY, 1)
                    + 1.4 * p.is(FAMILIARITY, 2);
                vec![
                    0.0,
                    -1.6 + leave,
                    -2.4 + 0.6 * leave,
                    -2.9 + 0.5 * leave,
                    -3.4 + 0.4 * leave,
                    -3.0 + 0.3 * leave,
                ]
            },
        ),
    ];
    ScmSpec::new(g, cpts).expect("static definition")
}

/// The ten experimental scenarios: (Traffic, Urgency, SocialImpact).
pub const STUDY_SCENARIOS: [[&str; 3]; 10] = [
    ["Normal", "Urgent", "No"],
    ["Medium", "Urgent", "No"],
    ["Heavy", "Urgent", "No"],
    ["Medium", "Urgent", "Yes"],
    ["Heavy", "Urgent", "Yes"],
    ["Normal", "NonUrgent", "No"],
    ["Medium", "NonUrgent", "No"],
    ["Heavy", "NonUrgent", "No"],
    ["Medium", "NonUrgent", "Yes"],
    ["Heavy", "NonUrgent", "Yes"],
];

/// Default number of participants in the synthetic study layout.
pub const STUDY_PARTICIPANTS: usize = 41;

/// [`STUDY_SCENARIOS`] as design rows for [`super::sample_study`].
pub fn study_design() -> Vec<Vec<(&'static str, &'static str)>> {
    STUDY_SCENARIOS
        .iter()
        .map(|[t, u, s]| vec![(TRAFFIC, *t), (URGENCY, *u), (SOCIAL_IMPACT, *s)])
        .collect()
}
