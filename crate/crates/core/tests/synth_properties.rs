use std::collections::BTreeMap;

use causeway_core::reference::{self, *};
use causeway_core::special::chi2_sf;
use causeway_core::synth::{scenarios, Cpt, ScmSpec};
use causeway_core::{CausalDag, Variable};
use proptest::prelude::*;

/// Random binary/ternary SCM on up to 5 nodes with random CPT rows.
fn scm_strategy() -> impl Strategy<Value = ScmSpec> {
    (2usize..=5).prop_flat_map(|n| {
        (
            proptest::collection::vec(2usize..=3, n),
            proptest::collection::vec(proptest::bool::weighted(0.5), n * (n - 1) / 2),
            proptest::collection::vec(0.05f64..1.0, 400),
        )
            .prop_map(move |(levels, bits, pool)| {
                let vars: Vec<Variable> = (0..n)
                    .map(|i| Variable::with_levels(format!("N{i}"), (0..levels[i]).map(|l| format!("v{l}"))).unwrap())
                    .collect();
                let mut edges = Vec::new();
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if bits[k] {
                            edges.push((format!("N{i}"), format!("N{j}")));
                        }
                        k += 1;
                    }
                }
                let g = CausalDag::new(vars.clone(), edges).unwrap();
                let mut next = 0usize;
                let cpts = vars
                    .iter()
                    .map(|v| {
                        let parents: Vec<&Variable> = g
                            .parents(v.name())
                            .unwrap()
                            .iter()
                            .map(|p| g.variable(p).unwrap())
                            .collect();
                        Cpt::from_weights(v, &parents, |_| {
                            (0..v.n_levels())
                                .map(|_| {
                                    next += 1;
                                    pool[next % pool.len()]
                                })
                                .collect()
                        })
                        .unwrap()
                    })
                    .collect();
                ScmSpec::new(g, cpts).unwrap()
            })
    })
}

fn distribution(m: &ScmSpec) -> BTreeMap<Vec<usize>, f64> {
    let mut d = BTreeMap::new();
    m.for_each_assignment(|l, p| *d.entry(l.to_vec()).or_insert(0.0) += p);
    d
}

fn same_distribution(a: &ScmSpec, b: &ScmSpec) -> bool {
    let (da, db) = (distribution(a), distribution(b));
    da.len() == db.len()
        && da
            .iter()
            .all(|(k, p)| (db.get(k).copied().unwrap_or(0.0) - p).abs() < 1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn joint_sums_to_one_and_marginals_agree(m in scm_strategy()) {
        let d = distribution(&m);
        prop_assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-12);
        for (i, v) in m.graph().variables().iter().enumerate() {
            let mut from_joint = vec![0.0; v.n_levels()];
            for (k, p) in &d {
                from_joint[k[i]] += p;
            }
            for (a, b) in from_joint.iter().zip(m.marginal(v.name()).unwrap()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interventions_are_idempotent_and_commute(m in scm_strategy(), a in 0usize..5, b in 0usize..5) {
        let vars = m.graph().variables();
        let (va, vb) = (&vars[a % vars.len()], &vars[b % vars.len()]);
        prop_assume!(va.name() != vb.name());
        let once = m.intervene(va.name(), va.level(1)).unwrap();
        let twice = once.intervene(va.name(), va.level(1)).unwrap();
        prop_assert!(same_distribution(&once, &twice));
        let ab = once.intervene(vb.name(), vb.level(0)).unwrap();
        let ba = m.intervene(vb.name(), vb.level(0)).unwrap().intervene(va.name(), va.level(1)).unwrap();
        prop_assert!(same_distribution(&ab, &ba));
        prop_assert_eq!(ab.graph(), ba.graph());
    }
}

/// `Σ_z Pr(y | x, z) Pr(z)` from the observational joint.
fn adjustment_formula(m: &ScmSpec, x: (&str, usize), y: (&str, usize), z: &[&str]) -> f64 {
    let g = m.graph();
    let xi = g.variables().iter().position(|v| v.name() == x.0).unwrap();
    let yi = g.variables().iter().position(|v| v.name() == y.0).unwrap();
    let zi: Vec<usize> = z
        .iter()
        .map(|n| g.variables().iter().position(|v| v.name() == *n).unwrap())
        .collect();
    // per z pattern: (Pr(z), Pr(x, z), Pr(x, y, z))
    let mut acc: BTreeMap<Vec<usize>, (f64, f64, f64)> = BTreeMap::new();
    m.for_each_assignment(|l, p| {
        let e = acc.entry(zi.iter().map(|&i| l[i]).collect()).or_insert((0.0, 0.0, 0.0));
        e.0 += p;
        if l[xi] == x.1 {
            e.1 += p;
            if l[yi] == y.1 {
                e.2 += p;
            }
        }
    });
    acc.values().map(|(pz, pxz, pxyz)| pz * pxyz / pxz).sum()
}

#[test]
fn adjustment_formula_equals_truncated_factorization() {
    let m = scenarios::confounded_triangle();
    for x in 0..2 {
        let direct = m.interventional_probability("X", ["No", "Yes"][x], "Y", "Yes").unwrap();
        assert!((adjustment_formula(&m, ("X", x), ("Y", 1), &["Z"]) - direct).abs() < 1e-12);
    }
    let m = scenarios::reference_study();
    let exit = m
        .graph()
        .variable(ROUTE_CHOICE)
        .unwrap()
        .level_index(NEAREST_EXIT)
        .unwrap();
    for (level, name) in ["Normal", "Medium", "Heavy"].iter().enumerate() {
        let direct = m
            .interventional_probability(TRAFFIC, name, ROUTE_CHOICE, NEAREST_EXIT)
            .unwrap();
        let adjusted = adjustment_formula(&m, (TRAFFIC, level), (ROUTE_CHOICE, exit), &[SOCIAL_IMPACT, URGENCY]);
        assert!((adjusted - direct).abs() < 1e-12, "{name}: {adjusted} vs {direct}");
    }
}

fn replace_cpt(m: &ScmSpec, cpt: Cpt) -> ScmSpec {
    let cpts = m
        .cpts()
        .iter()
        .map(|c| {
            if c.child() == cpt.child() {
                cpt.clone()
            } else {
                c.clone()
            }
        })
        .collect();
    ScmSpec::new(m.graph().clone(), cpts).unwrap()
}

#[test]
fn oracle_ignores_cpts_outside_the_causal_question() {
    let m = scenarios::reference_study();
    let base = m
        .oracle_effect(TRAFFIC, ROUTE_CHOICE, NEAREST_EXIT, "Heavy", "Normal")
        .unwrap();
    let g = m.graph();
    let v = |n: &str| g.variable(n).unwrap();
    // not an ancestor of the outcome
    let fc = Cpt::from_weights(v(FINANCIAL_CONCERN), &[v(EMPLOYMENT), v(AGE), v(EDUCATION)], |_| {
        vec![0.1, 0.9]
    })
    .unwrap();
    // the treatment's own mechanism is replaced by the intervention
    let tr = Cpt::from_weights(v(TRAFFIC), &[v(SOCIAL_IMPACT), v(URGENCY)], |_| vec![0.6, 0.3, 0.1]).unwrap();
    for changed in [replace_cpt(&m, fc), replace_cpt(&m, tr)] {
        let o = changed
            .oracle_effect(TRAFFIC, ROUTE_CHOICE, NEAREST_EXIT, "Heavy", "Normal")
            .unwrap();
        assert_eq!(o.risk_ratio.to_bits(), base.risk_ratio.to_bits());
    }
}

#[test]
fn sampler_matches_exact_marginals() {
    let m = scenarios::reference_study();
    let n = 100_000;
    let t = m.sample(n, 2024).unwrap();
    for v in reference::reference_variables() {
        let exact = m.marginal(v.name()).unwrap();
        let observed = t.frequencies(v.name()).unwrap();
        let stat: f64 = exact
            .iter()
            .zip(&observed)
            .map(|(p, f)| {
                let e = p * n as f64;
                (f * n as f64 - e).powi(2) / e
            })
            .sum();
        let p = chi2_sf(stat, v.n_levels() - 1);
        assert!(p > 0.001, "{}: X²={stat:.2} p={p:.2e}", v.name());
    }
}

#[test]
fn sampling_is_deterministic_and_row_local() {
    let m = scenarios::reference_study();
    let a = m.sample(500, 9).unwrap();
    let b = m.sample(500, 9).unwrap();
    assert_eq!(a, b);
    let longer = m.sample(800, 9).unwrap();
    let prefix: Vec<usize> = (0..500).collect();
    assert_eq!(longer.select_rows(&prefix), a);
    assert_ne!(m.sample(500, 10).unwrap(), a);
}
