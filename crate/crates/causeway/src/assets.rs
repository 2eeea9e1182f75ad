//! Bundled graphs, models and the reference study descriptor.
//!
//! Command-line arguments of the form `@name` refer to these.

use causeway_core::reference::{self, EdgeSource, REFERENCE_EDGES};
use causeway_core::synth::{scenarios, ScmSpec};
use causeway_core::CausalDag;

use crate::dagfile::{parse_dag, parse_scm, render_dag_annotated, render_scm};

pub struct Asset {
    pub name: &'static str,
    pub file: &'static str,
    pub text: &'static str,
}

pub const ASSETS: &[Asset] = &[
    Asset {
        name: "reference-final",
        file: "reference_final.dag",
        text: include_str!("../assets/reference_final.dag"),
    },
    Asset {
        name: "reference-pilot",
        file: "reference_pilot.dag",
        text: include_str!("../assets/reference_pilot.dag"),
    },
    Asset {
        name: scenarios::REFERENCE_STUDY,
        file: "reference_study.scm",
        text: include_str!("../assets/reference_study.scm"),
    },
    Asset {
        name: scenarios::CONFOUNDED_TRIANGLE,
        file: "confounded_triangle.scm",
        text: include_str!("../assets/confounded_triangle.scm"),
    },
    Asset {
        name: scenarios::COLLIDER_TRAP,
        file: "collider_trap.scm",
        text: include_str!("../assets/collider_trap.scm"),
    },
    Asset {
        name: "reference-study-descriptor",
        file: "reference_study.toml",
        text: include_str!("../assets/reference_study.toml"),
    },
];

pub fn asset(name: &str) -> Option<&'static Asset> {
    ASSETS.iter().find(|a| a.name == name)
}

pub fn final_graph() -> CausalDag {
    parse_dag(asset("reference-final").expect("bundled").text).expect("bundled graph parses")
}

pub fn pilot_graph() -> CausalDag {
    parse_dag(asset("reference-pilot").expect("bundled").text).expect("bundled graph parses")
}

/// A bundled model by scenario name.
pub fn scenario(name: &str) -> Option<ScmSpec> {
    asset(name)
        .filter(|a| a.file.ends_with(".scm"))
        .map(|a| parse_scm(a.text).expect("bundled model parses"))
}

fn edge_note(src: &str, dst: &str) -> Option<String> {
    REFERENCE_EDGES.iter().find(|e| e.src == src && e.dst == dst).map(|e| {
        let kind = match e.source {
            EdgeSource::Described => "described",
            EdgeSource::Completion => "completion",
            EdgeSource::PilotOnly => "pilot-only",
        };
        format!("{kind}: {}", e.note)
    })
}

/// Text the bundled file `file` should contain.
pub fn expected_text(file: &str) -> Option<String> {
    let legend = "edge kinds: described (named in the study narrative), completion (assumed), pilot-only (removed after testing)";
    let graph = |g: &CausalDag, title: &str| {
        let notes: Vec<((String, String), String)> = g
            .edges()
            .filter_map(|(s, d)| Some(((s.to_string(), d.to_string()), edge_note(s, d)?)))
            .collect();
        render_dag_annotated(g, &[title, legend], |s, d| {
            notes
                .iter()
                .find(|((a, b), _)| a == s && b == d)
                .map(|(_, n)| n.as_str())
        })
    };
    Some(match file {
        "reference_final.dag" => graph(
            &reference::final_graph(),
            "route-choice reference graph, final version (12 variables, 24 edges)",
        ),
        "reference_pilot.dag" => graph(
            &reference::pilot_graph(),
            "route-choice reference graph, pilot version (12 variables, 26 edges)",
        ),
        "reference_study.scm" => render_scm(
            &scenarios::reference_study(),
            &["structural model on the final reference graph; probabilities are fixture values, not estimates"],
        ),
        "confounded_triangle.scm" => render_scm(
            &scenarios::confounded_triangle(),
            &["Z confounds X -> Y; Pr(Y | do(X=Yes)) = 0.4, Pr(Y | do(X=No)) = 0.25"],
        ),
        "collider_trap.scm" => render_scm(
            &scenarios::collider_trap(),
            &["X and Y share the child C; adjusting for C opens a non-causal trail"],
        ),
        _ => return None,
    })
}
