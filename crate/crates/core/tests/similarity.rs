use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use clonescope::classifier::{train, GbdtModel, HyperPoint};
use clonescope::corpus::{
    apply_transform, generate_templates, group_corpus, rename_identifiers, statement_pairs, synthesize, Transform,
};
use clonescope::frontend::FunctionAst;
use clonescope::rng::substream;
use clonescope::similarity::{aggregate_with, compare_functions, AggregationMode, CompareOptions};
use clonescope::statement_tree::decompose;

fn model() -> &'static GbdtModel {
    static MODEL: OnceLock<GbdtModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let base = generate_templates(20, 900).unwrap();
        let corpus = synthesize(&base, &Transform::ALL, 901).unwrap();
        train(&statement_pairs(&corpus, 902), &HyperPoint::default(), 903).unwrap()
    })
}

fn pool() -> &'static Vec<FunctionAst> {
    static POOL: OnceLock<Vec<FunctionAst>> = OnceLock::new();
    POOL.get_or_init(|| generate_templates(16, 77).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn aggregation_ignores_row_and_column_order(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..7), 1..7),
        seed in any::<u64>(),
    ) {
        let n = rows[0].len();
        let r: Vec<Vec<f64>> = rows.iter().map(|row| row.iter().cycle().take(n).copied().collect()).collect();
        let mut rng = substream(seed, "perm");
        let mut ri: Vec<usize> = (0..r.len()).collect();
        let mut ci: Vec<usize> = (0..n).collect();
        ri.shuffle(&mut rng);
        ci.shuffle(&mut rng);
        let p: Vec<Vec<f64>> = ri.iter().map(|&i| ci.iter().map(|&j| r[i][j]).collect()).collect();
        for mode in [AggregationMode::Proportion, AggregationMode::Literal] {
            prop_assert_eq!(aggregate_with(&r, mode, 0.5), aggregate_with(&p, mode, 0.5));
        }
        let (sa, sb) = aggregate_with(&r, AggregationMode::Proportion, 0.5);
        prop_assert!((0.0..=1.0).contains(&sa) && (0.0..=1.0).contains(&sb));
        let (la, lb) = aggregate_with(&r, AggregationMode::Literal, 0.5);
        prop_assert!(la >= 0.0 && la <= n as f64 && lb >= 0.0 && lb <= r.len() as f64);
    }

    #[test]
    fn swapping_functions_transposes(i in 0usize..16, j in 0usize..16) {
        let (a, b) = (&pool()[i], &pool()[j]);
        let ab = compare_functions(a, b, model()).unwrap();
        let ba = compare_functions(b, a, model()).unwrap();
        prop_assert_eq!(&ab.transpose().r, &ba.r);
        let (sa, sb) = aggregate_with(&ab.r, AggregationMode::Proportion, 0.5);
        prop_assert_eq!(aggregate_with(&ba.r, AggregationMode::Proportion, 0.5), (sb, sa));
    }

    #[test]
    fn renaming_and_reordering_leave_scores_unchanged(i in 0usize..16, j in 0usize..16, seed in any::<u64>()) {
        let (a, b) = (&pool()[i], &pool()[j]);
        let mut rng = substream(seed, "robust");
        let reference = compare_functions(a, b, model()).unwrap();
        let renamed = rename_identifiers(a);
        let mut shuffled = a.clone();
        shuffled.body.children.shuffle(&mut rng);
        for variant in [&renamed, &shuffled] {
            let r = compare_functions(variant, b, model()).unwrap();
            for mode in [AggregationMode::Proportion, AggregationMode::Literal] {
                prop_assert_eq!(aggregate_with(&r.r, mode, 0.5), aggregate_with(&reference.r, mode, 0.5));
            }
        }
    }

    #[test]
    fn renaming_keeps_the_kind_sequence(i in 0usize..16) {
        let a = &pool()[i];
        let renamed = rename_identifiers(a);
        let kinds = |f: &FunctionAst| decompose(f).iter().map(|t| t.kind).collect::<Vec<_>>();
        prop_assert_eq!(kinds(a), kinds(&renamed));
    }
}

#[test]
fn three_templates_with_clones_form_three_groups() {
    let base = generate_templates(3, 4242).unwrap();
    let mut rng = substream(4243, "grouping");
    let mut functions = Vec::new();
    let mut truth = Vec::new();
    for (t, f) in base.iter().enumerate() {
        functions.push(f.clone());
        truth.push(t);
        for tr in Transform::ALL {
            functions.push(apply_transform(f, tr, &mut rng).unwrap().function);
            truth.push(t);
        }
    }
    let groups = group_corpus(&functions, model(), &CompareOptions::default()).unwrap();
    let mut seen: Vec<usize> = groups.iter().flat_map(|g| g.members.clone()).collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..functions.len()).collect::<Vec<_>>());
    for g in &groups {
        assert!(g.members.contains(&g.template));
    }
    // each member counts as misassigned when its group's template has another origin
    let misassigned: usize = groups
        .iter()
        .map(|g| g.members.iter().filter(|&&m| truth[m] != truth[g.template]).count())
        .sum();
    let big: Vec<usize> = groups.iter().map(|g| g.members.len()).filter(|&n| n >= 4).collect();
    assert!(misassigned <= 1, "{groups:?}");
    assert_eq!(big.len(), 3, "{groups:?}");
    assert_eq!(groups.len(), if big.iter().all(|&n| n == 5) { 3 } else { 4 });
}

#[test]
fn grouping_is_deterministic() {
    let opts = CompareOptions::default();
    let a = group_corpus(pool(), model(), &opts).unwrap();
    let b = group_corpus(pool(), model(), &opts).unwrap();
    assert_eq!(a, b);
    let copies = vec![pool()[0].clone(); 4];
    let one = group_corpus(&copies, model(), &opts).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].members, vec![0, 1, 2, 3]);
}
