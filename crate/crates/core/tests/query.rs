mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use repofix_core::diagnostics::Diagnostic;
use repofix_core::index::{build_database, EntryKind, ProjectDatabase, SourceUnit};
use repofix_core::llm::{GenerationConfig, MockBackend};
use repofix_core::query::{
    execute_query, hardcoded_query_for, parse_query, synthesize_query, FromVar, ParseErrorKind, Predicate,
    SelectItem, StructuralQuery, SynthesisError, DEMONSTRATIONS,
};
use repofix_core::semantic::LocalEncoder;

use common::{gen_module, random_units};

const BOLT_QUERY: &str = "FROM Module m, Class c WHERE m.contains(c) and m.getName() = 'async._bolt3' SELECT m, c";

fn db_of(units: &[SourceUnit]) -> ProjectDatabase {
    build_database("proj", units, &LocalEncoder::new(16, 1))
}

fn bolt_db() -> ProjectDatabase {
    db_of(&[
        SourceUnit::python("async/__init__.py", ""),
        SourceUnit::python(
            "async/_bolt3.py",
            "class AsyncBolt3:\n    def hello(self):\n        pass\n\n\nclass Helper:\n    pass\n\n\ndef make():\n    pass\n",
        ),
        SourceUnit::python("async/_bolt4.py", "class AsyncBolt4:\n    pass\n"),
    ])
}

#[test]
fn bolt_query_shape() {
    let q = parse_query(BOLT_QUERY).unwrap();
    assert_eq!(q.from.len(), 2);
    assert_eq!(
        q.predicates,
        vec![
            Predicate::Contains("m".into(), "c".into()),
            Predicate::NameEquals("m".into(), "async._bolt3".into())
        ]
    );
    assert_eq!(q.select.len(), 2);
}

#[test]
fn bolt_query_finds_both_classes() {
    let db = bolt_db();
    let result = execute_query(&parse_query(BOLT_QUERY).unwrap(), &db);
    assert_eq!(result.len(), 2);
    assert_eq!(result.rendered.len(), 2);
    let names: Vec<&str> = result
        .tuples
        .iter()
        .map(|t| db.entry(t[1]).unwrap().name.as_str())
        .collect();
    assert_eq!(names, ["AsyncBolt3", "Helper"]);
    assert!(result.rendered[0].contains("class AsyncBolt3"));
}

#[test]
fn minimal_and_invalid_queries() {
    let q = parse_query("FROM Module m SELECT m").unwrap();
    assert!(q.predicates.is_empty());
    let err = parse_query("SELECT x").unwrap_err();
    assert_eq!((err.position, err.kind), (7, ParseErrorKind::UndeclaredVariable("x".into())));
    assert_eq!(
        parse_query("from Module m where m.frobnicate() select m").unwrap_err().kind,
        ParseErrorKind::UnknownPredicate("frobnicate".into())
    );
    assert_eq!(
        parse_query("from Table t select t").unwrap_err().kind,
        ParseErrorKind::UnknownKind("Table".into())
    );
    assert!(parse_query("from Module m select").is_err());
}

#[test]
fn empty_and_unmatched_results() {
    let empty = db_of(&[]);
    for (_, text) in DEMONSTRATIONS {
        assert!(execute_query(&parse_query(text).unwrap(), &empty).is_empty());
    }
    let q = parse_query("FROM Class c WHERE c.getName() = 'Absent' SELECT c").unwrap();
    assert!(execute_query(&q, &bolt_db()).is_empty());
}

#[test]
fn hardcoded_member_lookup() {
    let db = db_of(&[SourceUnit::python(
        "log.py",
        "class RootLogger:\n    level = 0\n\n    def __init__(self):\n        self.handlers = []\n\n    def emit(self):\n        pass\n",
    )]);
    let diag = Diagnostic::new("E1101", "Instance of 'RootLogger' has no 'loggerDict' member", "app.py", 3, 0);
    let result = hardcoded_query_for(&diag, &db).expect("hardcoded code");
    let members: BTreeSet<&str> = result
        .tuples
        .iter()
        .map(|t| db.entry(*t.last().unwrap()).unwrap().name.as_str())
        .collect();
    assert_eq!(members, BTreeSet::from(["level", "__init__", "handlers", "emit"]));
}

#[test]
fn hardcoded_codes_only() {
    let db = bolt_db();
    let missing = Diagnostic::new("E0602", "Undefined variable 'nowhere'", "x.py", 1, 0);
    assert_eq!(hardcoded_query_for(&missing, &db).map(|r| r.len()), Some(0));
    let found = Diagnostic::new("E0602", "Undefined variable 'Helper'", "x.py", 1, 0);
    assert_eq!(hardcoded_query_for(&found, &db).map(|r| r.len()), Some(1));
    let arity = Diagnostic::new("E1121", "Too many positional arguments for function call", "x.py", 1, 0);
    assert!(hardcoded_query_for(&arity, &db).is_none());
}

fn mock(responses: &str) -> MockBackend {
    let entry = serde_json::json!([{ "ordinal": 0, "responses": [responses] }]);
    MockBackend::from_json(&entry.to_string()).unwrap()
}

#[test]
fn synthesis_parses_or_rejects() {
    let diag = Diagnostic::new("E0611", "No name 'SyncBolt3' in module 'async._bolt3'", "a.py", 1, 0);
    let config = GenerationConfig::default();
    let q = synthesize_query(&diag, &mock(&format!("```\n{BOLT_QUERY}\n```")), "t", &config).unwrap();
    assert_eq!(q, parse_query(BOLT_QUERY).unwrap());

    let err = synthesize_query(&diag, &mock("I am not sure which module that is."), "t", &config).unwrap_err();
    assert!(matches!(err, SynthesisError::QueryRejected { .. }));
}

const VARS: [&str; 5] = ["m", "c", "f", "v", "x1"];
const KINDS: [EntryKind; 4] = [EntryKind::Module, EntryKind::Class, EntryKind::Function, EntryKind::Variable];

fn predicate(vars: Vec<String>) -> impl Strategy<Value = Predicate> {
    let pick = prop::sample::select(vars);
    let leaf = prop_oneof![
        (pick.clone(), pick.clone()).prop_map(|(a, b)| Predicate::Contains(a, b)),
        (pick.clone(), "[ -~]{0,12}").prop_map(|(v, lit)| Predicate::NameEquals(v, lit)),
        (pick.clone(), pick.clone()).prop_map(|(a, b)| Predicate::ScopeEquals(a, b)),
        pick.clone().prop_map(Predicate::InSource),
        pick.prop_map(Predicate::IsInitMethod),
    ];
    (leaf, any::<bool>()).prop_map(|(p, neg)| if neg { Predicate::Not(Box::new(p)) } else { p })
}

fn query_ast() -> impl Strategy<Value = StructuralQuery> {
    prop::collection::vec(prop::sample::select(KINDS.to_vec()), 1..=VARS.len()).prop_flat_map(|kinds| {
        let from: Vec<FromVar> = kinds
            .iter()
            .zip(VARS)
            .map(|(k, n)| FromVar {
                name: n.to_string(),
                kind: *k,
            })
            .collect();
        let names: Vec<String> = from.iter().map(|v| v.name.clone()).collect();
        let select = prop::collection::vec((prop::sample::select(names.clone()), any::<bool>()), 1..4)
            .prop_map(|items| {
                items
                    .into_iter()
                    .map(|(var, definition)| SelectItem { var, definition })
                    .collect::<Vec<_>>()
            });
        (Just(from), prop::collection::vec(predicate(names), 0..5), select).prop_map(|(from, predicates, select)| {
            StructuralQuery {
                from,
                predicates,
                select,
            }
        })
    })
}

fn keyed(db: &ProjectDatabase, tuples: &[Vec<repofix_core::EntryId>]) -> BTreeSet<Vec<(String, String, u32)>> {
    tuples
        .iter()
        .map(|t| {
            t.iter()
                .map(|id| {
                    let e = db.entry(*id).unwrap();
                    (e.file.clone(), e.qualified_name.clone(), e.span.start)
                })
                .collect()
        })
        .collect()
}

proptest! {
    #[test]
    fn render_then_parse_is_identity(q in query_ast()) {
        let text = q.to_string();
        prop_assert_eq!(parse_query(&text).unwrap(), q);
    }

    #[test]
    fn lowercase_keywords_parse_the_same(q in query_ast()) {
        let text = q.to_string().replacen("FROM ", "from ", 1).replacen(" SELECT ", " select ", 1);
        let text = text.replacen(" WHERE ", " where ", 1);
        prop_assert_eq!(parse_query(&text).unwrap(), q);
    }

    #[test]
    fn extra_entries_never_remove_tuples(seed in any::<u64>(), extra in any::<u64>(), which in 0..5usize) {
        let text = if which < 4 {
            DEMONSTRATIONS[which].1
        } else {
            BOLT_QUERY
        };
        let q = parse_query(text).unwrap();
        let units = random_units(seed);
        let base = db_of(&units);
        let mut more = units.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(extra);
        more.push(SourceUnit::python("zz_extra.py", gen_module(&mut rng)));
        let bigger = db_of(&more);
        let before = keyed(&base, &execute_query(&q, &base).tuples);
        let after = keyed(&bigger, &execute_query(&q, &bigger).tuples);
        prop_assert!(before.is_subset(&after));
    }

    #[test]
    fn results_are_sorted_and_distinct(seed in any::<u64>(), q in query_ast()) {
        prop_assume!(q.from.len() <= 3);
        let db = db_of(&random_units(seed));
        let r = execute_query(&q, &db);
        prop_assert!(r.tuples.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(r.rendered.len(), r.tuples.len());
        prop_assert!(r.tuples.iter().all(|t| t.len() == q.select.len()));
    }
}
