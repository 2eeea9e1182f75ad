use causeway_core::citest::{ci_test, suggest_edits, test_implications, CiConfig, FitVerdict, TestStatistic, Verdict};
use causeway_core::data::stratified_counts;
use causeway_core::graph::implied_independencies;
use causeway_core::synth::{Cpt, ScmSpec};
use causeway_core::{CausalDag, DataTable, Schema, Variable};
use proptest::prelude::*;

fn var(name: &str, k: usize) -> Variable {
    Variable::with_levels(name, (0..k).map(|i| format!("l{i}"))).unwrap()
}

/// Random table over X, Y, Z, W with the given level counts.
fn table_strategy() -> impl Strategy<Value = DataTable> {
    (proptest::collection::vec(2usize..=4, 4), 10usize..150).prop_flat_map(|(levels, n)| {
        let cols: Vec<_> = levels
            .iter()
            .map(|&k| proptest::collection::vec(0..k as u16, n))
            .collect();
        (Just(levels), cols).prop_map(|(levels, cols)| {
            let schema = Schema::new(
                ["X", "Y", "Z", "W"]
                    .iter()
                    .zip(&levels)
                    .map(|(n, &k)| var(n, k))
                    .collect(),
            )
            .unwrap();
            DataTable::from_columns(schema, cols).unwrap()
        })
    })
}

fn observed_levels(t: &DataTable, name: &str) -> usize {
    t.frequencies(name).unwrap().iter().filter(|&&f| f > 0.0).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn symmetric_in_x_and_y(t in table_strategy(), kind in 0usize..3) {
        prop_assume!(observed_levels(&t, "X") > 1 && observed_levels(&t, "Y") > 1);
        let cfg = CiConfig { statistic: TestStatistic::ALL[kind], ..CiConfig::default() };
        let a = ci_test(&t, "X", "Y", &["Z", "W"], &cfg).unwrap();
        let b = ci_test(&t, "Y", "X", &["W", "Z"], &cfg).unwrap();
        prop_assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
        prop_assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
        prop_assert_eq!((a.dof, a.verdict), (b.dof, b.verdict));
        prop_assert!(a.statistic >= 0.0 && (0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn invariant_under_row_permutation(t in table_strategy(), seed in any::<u64>()) {
        prop_assume!(observed_levels(&t, "X") > 1 && observed_levels(&t, "Y") > 1);
        let n = t.n_rows();
        let mut rows: Vec<usize> = (0..n).collect();
        let mut s = seed | 1;
        for i in (1..n).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            rows.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let p = t.select_rows(&rows);
        let cfg = CiConfig::default();
        prop_assert_eq!(ci_test(&t, "X", "Y", &["Z"], &cfg).unwrap(), ci_test(&p, "X", "Y", &["Z"], &cfg).unwrap());
    }

    #[test]
    fn strata_sum_to_the_marginal_table(t in table_strategy()) {
        let marginal = stratified_counts::<&str>(&t, "X", "Y", &[]).unwrap();
        prop_assert_eq!(marginal.len(), 1);
        let strata = stratified_counts(&t, "X", "Y", &["Z", "W"]).unwrap();
        for i in 0..marginal[0].n_x {
            for j in 0..marginal[0].n_y {
                let sum: u64 = strata.iter().map(|s| s.get(i, j)).sum();
                prop_assert_eq!(sum, marginal[0].get(i, j));
            }
        }
        prop_assert!(strata.iter().all(|s| s.total() > 0));
    }
}

fn yes_no(name: &str) -> Variable {
    Variable::with_levels(name, ["No", "Yes"]).unwrap()
}

#[test]
fn fair_coins_are_independent_in_most_replications() {
    let (x, y) = (yes_no("X"), yes_no("Y"));
    let g = CausalDag::new(vec![x.clone(), y.clone()], Vec::<(&str, &str)>::new()).unwrap();
    let m = ScmSpec::new(
        g,
        vec![
            Cpt::marginal(&x, vec![0.5, 0.5]).unwrap(),
            Cpt::marginal(&y, vec![0.5, 0.5]).unwrap(),
        ],
    )
    .unwrap();
    let reps = 300;
    let independent = (0..reps)
        .filter(|&s| {
            let t = m.sample(10_000, s).unwrap();
            ci_test::<&str>(&t, "X", "Y", &[], &CiConfig::default())
                .unwrap()
                .verdict
                == Verdict::Independent
        })
        .count();
    assert!(independent as f64 >= 0.97 * reps as f64, "{independent}/{reps}");
}

/// Chain A -> B -> C; the generating model may add a direct A -> C edge.
fn chain_model(direct: bool) -> ScmSpec {
    let (a, b, c) = (yes_no("A"), yes_no("B"), yes_no("C"));
    let mut edges = vec![("A", "B"), ("B", "C")];
    if direct {
        edges.push(("A", "C"));
    }
    let g = CausalDag::new(vec![a.clone(), b.clone(), c.clone()], edges).unwrap();
    let c_cpt = if direct {
        Cpt::new(
            &c,
            &[&b, &a],
            vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.6, 0.4], vec![0.05, 0.95]],
        )
        .unwrap()
    } else {
        Cpt::new(&c, &[&b], vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap()
    };
    ScmSpec::new(
        g,
        vec![
            Cpt::marginal(&a, vec![0.5, 0.5]).unwrap(),
            Cpt::new(&b, &[&a], vec![vec![0.7, 0.3], vec![0.25, 0.75]]).unwrap(),
            c_cpt,
        ],
    )
    .unwrap()
}

#[test]
fn planted_edge_shows_up_as_violation() {
    let graph = chain_model(false).graph().clone();
    let t = chain_model(true).sample(5000, 3).unwrap();
    let r = test_implications(&graph, &t, &CiConfig::default()).unwrap();
    assert_eq!(r.verdict, FitVerdict::Inconsistent);
    let violated: Vec<String> = r.violated_claims().map(|c| c.claim.to_string()).collect();
    assert!(
        violated.contains(&"A ⊥ C | B".to_string()) || violated.contains(&"C ⊥ A | B".to_string()),
        "{violated:?}"
    );
}

#[test]
fn own_model_data_is_consistent() {
    let m = chain_model(false);
    let t = m.sample(5000, 3).unwrap();
    let r = test_implications(m.graph(), &t, &CiConfig::default()).unwrap();
    assert_eq!(r.verdict, FitVerdict::Consistent);
    assert!(suggest_edits(&r).is_empty());
}

#[test]
fn complete_graph_is_vacuously_consistent() {
    let m = chain_model(true);
    assert!(implied_independencies(m.graph()).is_empty());
    let t = m.sample(5000, 8).unwrap();
    let r = test_implications(m.graph(), &t, &CiConfig::default()).unwrap();
    assert!(r.claims.is_empty());
    assert_eq!(r.verdict, FitVerdict::Consistent);
}

#[test]
fn superfluous_edge_is_suggested_for_removal() {
    let m = chain_model(false);
    let supergraph = m.graph().with_edge("A", "C").unwrap();
    let t = m.sample(5000, 5).unwrap();
    let r = test_implications(&supergraph, &t, &CiConfig::default()).unwrap();
    assert_eq!(r.verdict, FitVerdict::Inconsistent);
    let edits = suggest_edits(&r);
    assert_eq!(edits.len(), 1);
    assert!(edits[0].to_string().starts_with("remove A→C"), "{}", edits[0]);
}
