use std::collections::BTreeMap;

use proptest::prelude::*;
use repofix_core::diagnostics::{Diagnostic, ErrorCategory};
use repofix_core::eval::{
    build_report, edit_similarity, error_distribution, exact_match, identifier_exact_match, identifier_f1,
    identifiers, levenshtein, pass_at_k, CandidateResult, TaskResult,
};
use repofix_core::refine::{CandidateStatus, IterationTrace};

/// Full-table Wagner-Fischer distance.
fn dp_lev(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        t[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
        }
    }
    t[a.len()][b.len()]
}

fn nc() -> impl Strategy<Value = (u64, u64)> {
    (1u64..=40).prop_flat_map(|n| (Just(n), 0..=n))
}

proptest! {
    #[test]
    fn pass_at_k_is_monotone_and_bounded((n, c) in nc(), k in 1u64..=40) {
        prop_assume!(k <= n);
        let p = pass_at_k(n, c, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        if c < n {
            prop_assert!(pass_at_k(n, c + 1, k).unwrap() >= p);
        }
        if k < n {
            prop_assert!(pass_at_k(n, c, k + 1).unwrap() >= p);
        }
        prop_assert_eq!(pass_at_k(n, 0, k).unwrap(), 0.0);
    }

    #[test]
    fn levenshtein_matches_table_and_is_a_metric(a in "[ab λ]{0,24}", b in "[abc]{0,24}", c in "[bc λ]{0,24}") {
        prop_assert_eq!(levenshtein(&a, &b), dp_lev(&a, &b));
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert_eq!(edit_similarity(&a, &b), edit_similarity(&b, &a));
        prop_assert_eq!(edit_similarity(&a, &a), 1.0);
        prop_assert!((0.0..=1.0).contains(&edit_similarity(&a, &b)));
    }

    #[test]
    fn identifier_f1_ignores_statement_order(
        names in prop::collection::vec("[a-z]{1,6}_?[a-z0-9]{0,3}", 1..8),
        gold in prop::collection::vec("[a-z]{1,6}", 1..8),
        seed in any::<u64>(),
    ) {
        let keyword = |w: &String| identifiers(w).is_empty();
        prop_assume!(!names.iter().any(keyword) && !gold.iter().any(keyword));
        let lines: Vec<String> = names.iter().map(|n| format!("{n} = 1")).collect();
        let mut shuffled = lines.clone();
        let len = shuffled.len();
        shuffled.rotate_left((seed as usize) % len);
        shuffled.reverse();
        let g = gold.iter().map(|n| format!("print({n})")).collect::<Vec<_>>().join("\n");
        let a = identifier_f1(&lines.join("\n"), &g);
        let b = identifier_f1(&shuffled.join("\n"), &g);
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a.f1));
    }
}

#[test]
fn pass_at_k_examples() {
    assert!((pass_at_k(20, 5, 10).unwrap() - 0.98375).abs() < 1e-5);
    assert_eq!(pass_at_k(10, 10, 1).unwrap(), 1.0);
    assert!((pass_at_k(10, 1, 1).unwrap() - 0.1).abs() < 1e-15);
    assert!(pass_at_k(5, 6, 1).is_err());
    assert!(pass_at_k(5, 1, 0).is_err());
}

#[test]
fn text_metric_examples() {
    assert_eq!(levenshtein("kitten", "sitting"), 3);
    assert_eq!(edit_similarity("", ""), 1.0);
    assert_eq!(exact_match("x = 1   \ny = 2\n\n", "x = 1\ny = 2"), 1);
    assert_eq!(exact_match("x = 1", "x  = 1"), 0);
    let s = identifier_f1("a = b + c", "a = b + d");
    assert!((s.precision - 2.0 / 3.0).abs() < 1e-12 && (s.f1 - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(identifier_f1("x = 'name in string'  # comment", "x = 0").f1, 1.0);
    assert_eq!(identifier_exact_match("f(a, b)", "f(a,b)"), 1);
    assert_eq!(identifier_exact_match("f(a, b)", "f(b, a)"), 0);
}

fn trace(iteration: u32, codes: &[&str]) -> IterationTrace {
    IterationTrace {
        task_id: "t".into(),
        candidate: 0,
        iteration,
        prompt_digest: String::new(),
        structural: vec![],
        semantic: vec![],
        diagnostics_before: vec![],
        diagnostics_after: codes
            .iter()
            .map(|&c| {
                if c == "FUNC" {
                    Diagnostic::functional("failed", "f.py", 1)
                } else {
                    Diagnostic::new(c, "m", "f.py", 1, 0)
                }
            })
            .collect(),
        code_digest: String::new(),
    }
}

#[test]
fn distribution_examples() {
    let d = error_distribution(&[trace(0, &["E0602", "E0611", "E0401"]), trace(1, &["E0602"])]);
    assert_eq!(d.count(ErrorCategory::Undef, 0), 3);
    assert_eq!(d.count(ErrorCategory::Undef, 1), 1);
    assert_eq!(d.fixed_per_iteration(), vec![(1, 2)]);

    let clean = error_distribution(&[trace(0, &[]), trace(1, &[])]);
    assert!(clean.rows().iter().all(|&(_, _, n)| n == 0));

    let with_func = error_distribution(&[trace(0, &["E1121", "FUNC"])]);
    assert_eq!(with_func.count(ErrorCategory::Func, 0), 1);
    assert_eq!(with_func.remaining(0), 1);
    assert!(with_func.to_csv().contains("FUNC,0,1"));
}

fn candidate(index: usize, passed: bool) -> CandidateResult {
    CandidateResult {
        index,
        iterations: 1,
        status: if passed {
            CandidateStatus::Clean
        } else {
            CandidateStatus::Exhausted
        },
        final_category: (!passed).then_some(ErrorCategory::Undef),
        tests_passed: Some(passed),
        code: format!("x = {index}"),
    }
}

#[test]
fn report_averages_over_eligible_tasks() {
    let big = TaskResult::from_candidates("big", (0..20).map(|i| candidate(i, i < 5)).collect());
    assert_eq!((big.n, big.c), (20, 5));
    let small = TaskResult::from_candidates("small", (0..3).map(|i| candidate(i, i == 0)).collect());
    let refs = BTreeMap::from([("big".to_string(), "x = 0".to_string())]);
    let report = build_report(&[big, small], &[], &[1, 5, 10], &refs).unwrap();
    let k10 = report.pass_at_k.iter().find(|p| p.k == 10).unwrap();
    assert_eq!(k10.tasks, 1);
    assert!((k10.value - 0.98375).abs() < 1e-5);
    let k1 = report.pass_at_k.iter().find(|p| p.k == 1).unwrap();
    assert_eq!(k1.tasks, 2);
    assert!((k1.value - (0.25 + 1.0 / 3.0) / 2.0).abs() < 1e-12);
    let m = report.match_metrics.unwrap();
    assert_eq!((m.tasks, m.c_em), (1, 1.0));
    assert!(report.to_text().contains("pass@10"));
}
