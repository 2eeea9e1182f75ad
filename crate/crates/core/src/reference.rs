//! The route-choice reference graph: twelve variables describing drivers,
//! their trip and the traffic situation, in a pilot and a final version.
//!
//! Edges come in three kinds. `Described` edges are the ones the study's
//! narrative names explicitly. `Completion` edges are assumptions added so
//! the final graph has the study's reported edge count (24) while keeping
//! every adjustment and blocking argument of the narrative intact. The two
//! `PilotOnly` edges were dropped when the pilot graph was refined.

use alloc::vec::Vec;

use crate::graph::{CausalDag, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSource {
    Described,
    Completion,
    PilotOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceEdge {
    pub src: &'static str,
    pub dst: &'static str,
    pub source: EdgeSource,
    pub note: &'static str,
}

pub const TRAFFIC: &str = "Traffic";
pub const URGENCY: &str = "Urgency";
pub const SOCIAL_IMPACT: &str = "SocialImpact";
pub const AGE: &str = "Age";
pub const GENDER: &str = "Gender";
pub const RACE: &str = "Race";
pub const EDUCATION: &str = "Education";
pub const EMPLOYMENT: &str = "EmploymentStatus";
pub const FAMILIARITY: &str = "FamiliarityWithEnvironment";
pub const FINANCIAL_CONCERN: &str = "FinancialConcern";
pub const FIRST_CONCERN: &str = "1stConcernWhileStuckInTraffic";
pub const ROUTE_CHOICE: &str = "RouteChoice";

/// Level of `RouteChoice` counted as "diverted to the nearest exit".
pub const NEAREST_EXIT: &str = "ExitA";

use EdgeSource::{Completion, Described, PilotOnly};

pub const REFERENCE_EDGES: &[ReferenceEdge] = &[
    ReferenceEdge {
        src: TRAFFIC,
        dst: ROUTE_CHOICE,
        source: Described,
        note: "direct path from traffic to route choice",
    },
    ReferenceEdge {
        src: SOCIAL_IMPACT,
        dst: TRAFFIC,
        source: Described,
        note: "back-door path traffic <- social impact -> route choice",
    },
    ReferenceEdge {
        src: SOCIAL_IMPACT,
        dst: ROUTE_CHOICE,
        source: Described,
        note: "back-door path traffic <- social impact -> route choice",
    },
    ReferenceEdge {
        src: SOCIAL_IMPACT,
        dst: FIRST_CONCERN,
        source: Described,
        note: "collider path through first concern",
    },
    ReferenceEdge {
        src: GENDER,
        dst: EDUCATION,
        source: Described,
        note: "back-door path employment <- education <- gender -> route choice",
    },
    ReferenceEdge {
        src: GENDER,
        dst: ROUTE_CHOICE,
        source: Described,
        note: "gender confounds employment status",
    },
    ReferenceEdge {
        src: EDUCATION,
        dst: EMPLOYMENT,
        source: Described,
        note: "back-door path employment <- education <- gender",
    },
    ReferenceEdge {
        src: AGE,
        dst: EMPLOYMENT,
        source: Described,
        note: "back-door path employment <- age -> route choice",
    },
    ReferenceEdge {
        src: AGE,
        dst: ROUTE_CHOICE,
        source: Described,
        note: "age confounds employment status",
    },
    ReferenceEdge {
        src: RACE,
        dst: EMPLOYMENT,
        source: Described,
        note: "collider path employment <- race -> first concern <- social impact",
    },
    ReferenceEdge {
        src: RACE,
        dst: FIRST_CONCERN,
        source: Described,
        note: "first concern is a collider between race and social impact",
    },
    ReferenceEdge {
        src: EMPLOYMENT,
        dst: URGENCY,
        source: Described,
        note: "urgency mediates employment status",
    },
    ReferenceEdge {
        src: URGENCY,
        dst: ROUTE_CHOICE,
        source: Described,
        note: "mediator path employment -> urgency -> route choice",
    },
    ReferenceEdge {
        src: RACE,
        dst: EDUCATION,
        source: Completion,
        note: "makes race a confounder of education",
    },
    ReferenceEdge {
        src: AGE,
        dst: EDUCATION,
        source: Completion,
        note: "makes age a confounder of education",
    },
    ReferenceEdge {
        src: URGENCY,
        dst: TRAFFIC,
        source: Completion,
        note: "makes urgency a confounder of traffic",
    },
    ReferenceEdge {
        src: FAMILIARITY,
        dst: ROUTE_CHOICE,
        source: Completion,
        note: "familiarity affects route choice with no back-door path",
    },
    ReferenceEdge {
        src: FAMILIARITY,
        dst: FIRST_CONCERN,
        source: Completion,
        note: "assumed",
    },
    ReferenceEdge {
        src: GENDER,
        dst: EMPLOYMENT,
        source: Completion,
        note: "assumed; blocked by gender",
    },
    ReferenceEdge {
        src: GENDER,
        dst: FIRST_CONCERN,
        source: Completion,
        note: "assumed",
    },
    ReferenceEdge {
        src: AGE,
        dst: URGENCY,
        source: Completion,
        note: "assumed; blocked by age",
    },
    ReferenceEdge {
        src: EMPLOYMENT,
        dst: FINANCIAL_CONCERN,
        source: Completion,
        note: "financial concern has no path to route choice",
    },
    ReferenceEdge {
        src: AGE,
        dst: FINANCIAL_CONCERN,
        source: Completion,
        note: "assumed",
    },
    ReferenceEdge {
        src: EDUCATION,
        dst: FINANCIAL_CONCERN,
        source: Completion,
        note: "assumed",
    },
    ReferenceEdge {
        src: TRAFFIC,
        dst: FIRST_CONCERN,
        source: PilotOnly,
        note: "removed after testing against data",
    },
    ReferenceEdge {
        src: FIRST_CONCERN,
        dst: ROUTE_CHOICE,
        source: PilotOnly,
        note: "removed after testing against data",
    },
];

/// The twelve study variables, in declaration order.
pub fn reference_variables() -> Vec<Variable> {
    let v =
        |name: &str, levels: &[&str]| Variable::with_levels(name, levels.iter().copied()).expect("static definition");
    alloc::vec![
        v(TRAFFIC, &["Normal", "Medium", "Heavy"]),
        v(URGENCY, &["NonUrgent", "Urgent"]),
        v(SOCIAL_IMPACT, &["No", "Yes"]),
        v(AGE, &["Young", "Middle", "Old"]),
        v(GENDER, &["Female", "Male"]),
        v(RACE, &["White", "MiddleEastern", "Other"]),
        v(EDUCATION, &["PostGraduate", "HighSchool", "College"]),
        v(EMPLOYMENT, &["Unemployed", "PartTime", "FullTime", "Student"]),
        v(FAMILIARITY, &["OnceAWeek", "OnceAMonth", "OnceAYear"]),
        v(FINANCIAL_CONCERN, &["No", "Yes"]),
        v(FIRST_CONCERN, &["ExtraTravelTime", "SpeedReduction", "DelayCost"]),
        v(ROUTE_CHOICE, &["Stay", "ExitA", "ExitB", "ExitC", "ExitD", "ExitE"]),
    ]
}

fn build(include_pilot: bool) -> CausalDag {
    let edges = REFERENCE_EDGES
        .iter()
        .filter(|e| include_pilot || e.source != PilotOnly)
        .map(|e| (e.src, e.dst));
    CausalDag::new(reference_variables(), edges).expect("reference graph is a DAG")
}

/// Final graph: 12 variables, 24 edges.
pub fn final_graph() -> CausalDag {
    build(false)
}

/// Pilot graph: the final graph plus the two edges removed during refinement.
pub fn pilot_graph() -> CausalDag {
    build(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_counts() {
        let fin = final_graph();
        let pilot = pilot_graph();
        assert_eq!((fin.len(), fin.n_edges()), (12, 24));
        assert_eq!((pilot.len(), pilot.n_edges()), (12, 26));
        assert_eq!(REFERENCE_EDGES.iter().filter(|e| e.source == Described).count(), 13);
    }

    #[test]
    fn first_concern_and_financial_concern_do_not_reach_route_choice() {
        let g = final_graph();
        assert!(!g.descendants(FIRST_CONCERN).unwrap().contains(&ROUTE_CHOICE));
        assert!(!g.descendants(FINANCIAL_CONCERN).unwrap().contains(&ROUTE_CHOICE));
    }
}
