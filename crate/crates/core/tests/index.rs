mod common;

use std::fs;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use repofix_core::index::{
    build_database, derive_tables, entry_schema_text, scan_source_files, EntryId, EntryKind, ProjectDatabase,
    SourceFilter, SourceUnit,
};
use repofix_core::semantic::{Encoder, LocalEncoder};

use common::{load_db, random_units};

fn db_of(units: &[SourceUnit]) -> ProjectDatabase {
    build_database("proj", units, &LocalEncoder::default())
}

#[test]
fn scan_filters_and_orders_paths() {
    let dir = tempfile::tempdir().unwrap();
    assert!(scan_source_files(dir.path(), &SourceFilter::default()).unwrap().units.is_empty());

    fs::write(dir.path().join("readme.md"), "# x\n").unwrap();
    assert!(scan_source_files(dir.path(), &SourceFilter::default()).unwrap().units.is_empty());

    fs::create_dir(dir.path().join("sub")).unwrap();
    fs::write(dir.path().join("sub/b.py"), "B = 1\n").unwrap();
    fs::write(dir.path().join("a.py"), "A = 1\n").unwrap();
    let scan = scan_source_files(dir.path(), &SourceFilter::default()).unwrap();
    let paths: Vec<&str> = scan.units.iter().map(|u| u.path.as_str()).collect();
    assert_eq!(paths, ["a.py", "sub/b.py"]);
    assert_eq!(scan.units[1].text, "B = 1\n");
}

#[test]
fn missing_root_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(scan_source_files(&dir.path().join("nope"), &SourceFilter::default()).is_err());
}

#[cfg(unix)]
#[test]
fn symlinked_directories_are_not_followed() {
    let dir = tempfile::tempdir().unwrap();
    let outside = tempfile::tempdir().unwrap();
    fs::write(outside.path().join("hidden.py"), "X = 1\n").unwrap();
    std::os::unix::fs::symlink(outside.path(), dir.path().join("link")).unwrap();
    fs::write(dir.path().join("main.py"), "Y = 1\n").unwrap();
    let scan = scan_source_files(dir.path(), &SourceFilter::default()).unwrap();
    let paths: Vec<&str> = scan.units.iter().map(|u| u.path.as_str()).collect();
    assert_eq!(paths, ["main.py"]);
}

#[test]
fn method_gets_a_dotted_qualified_name() {
    let src = "class AsyncBolt:\n    def get_handler(self):\n        \"\"\"Return Bolt protocol handlers\"\"\"\n        return {}\n";
    let db = db_of(&[SourceUnit::python("bolt.py", src)]);
    let m = db
        .entries()
        .iter()
        .find(|e| e.qualified_name == "bolt.AsyncBolt.get_handler")
        .expect("method entry");
    assert_eq!(m.kind, EntryKind::Function);
    let class = db.entry(m.parent.unwrap()).unwrap();
    assert_eq!((class.kind, class.name.as_str()), (EntryKind::Class, "AsyncBolt"));
    assert!(entry_schema_text(m).contains("Return Bolt protocol handlers"));
}

#[test]
fn empty_source_set() {
    let db = db_of(&[]);
    assert!(db.is_empty());
    assert!(db.tables().is_empty());
    assert!(derive_tables(&[]).is_empty());
}

#[test]
fn unparsable_files_are_skipped_with_a_warning() {
    let db = db_of(&[
        SourceUnit::python("bad.py", "def broken(:\n"),
        SourceUnit::python("good.py", "X = 1\n"),
    ]);
    assert_eq!(db.module_names().collect::<Vec<_>>(), ["good"]);
    assert!(db.warnings().iter().any(|w| w.path == "bad.py"));
}

#[test]
fn redefinitions_are_kept() {
    let db = db_of(&[SourceUnit::python("m.py", "def f():\n    pass\n\n\ndef f():\n    return 1\n")]);
    let fs: Vec<_> = db.entries().iter().filter(|e| e.qualified_name == "m.f").collect();
    assert_eq!(fs.len(), 2);
    assert_ne!(fs[0].span, fs[1].span);
}

#[test]
fn small_table_examples() {
    let db = db_of(&[SourceUnit::python("m.py", "class C:\n    def f(self):\n        pass\n")]);
    let t = db.tables();
    assert_eq!((t.m.len(), t.m_c.len(), t.m_c_cf.len()), (1, 1, 1));
    assert!(t.m_c_v.is_empty() && t.m_gf.is_empty() && t.m_gv.is_empty());

    let db = db_of(&[SourceUnit::python("m.py", "def f():\n    pass\n")]);
    assert_eq!(db.tables().m_gf, vec![(EntryId(0), EntryId(1))]);
    assert!(db.tables().m_c_cf.is_empty());
}

#[test]
fn schema_text_examples() {
    let db = load_db("mini");
    let no_doc = db.entries().iter().find(|e| e.qualified_name == "main.COUNT").unwrap();
    assert!(no_doc.docstring.is_none());
    let text = entry_schema_text(no_doc);
    assert!(text.contains("main.COUNT"));

    let db = db_of(&[
        SourceUnit::python("a.py", "class A:\n    def run(self):\n        pass\n"),
        SourceUnit::python("b.py", "class B:\n    def run(self):\n        pass\n"),
    ]);
    let runs: Vec<String> = db
        .entries()
        .iter()
        .filter(|e| e.name == "run")
        .map(entry_schema_text)
        .collect();
    assert_eq!(runs.len(), 2);
    assert_ne!(runs[0], runs[1]);
}

#[test]
fn mini_fixture_round_trips_through_a_file() {
    let db = load_db("mini");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.json");
    db.save(&path).unwrap();
    let back = ProjectDatabase::load(&path).unwrap();
    assert_eq!(back.to_json(), db.to_json());
    let v: serde_json::Value = serde_json::from_str(&db.to_json()).unwrap();
    for key in ["format_version", "project_root", "entries", "tables", "embeddings"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

fn check_invariants(db: &ProjectDatabase) -> Result<(), TestCaseError> {
    for (i, e) in db.entries().iter().enumerate() {
        prop_assert_eq!(e.id, EntryId(i as u32));
        let mut chain = vec![e.name.clone()];
        let mut cur = e;
        while let Some(p) = cur.parent {
            let parent = db.entry(p).expect("parent exists");
            if parent.file == cur.file {
                prop_assert!(parent.span.contains(&cur.span), "{} outside {}", cur.qualified_name, parent.qualified_name);
            }
            cur = parent;
            chain.push(cur.name.clone());
        }
        prop_assert_eq!(cur.kind, EntryKind::Module);
        prop_assert_eq!(e.kind == EntryKind::Module, e.parent.is_none());
        chain.reverse();
        let module_prefix: Vec<&str> = cur.qualified_name.split('.').collect();
        let mut expected: Vec<&str> = module_prefix[..module_prefix.len() - 1].to_vec();
        expected.extend(chain.iter().map(String::as_str));
        prop_assert_eq!(e.qualified_name.split('.').collect::<Vec<_>>(), expected);
    }
    prop_assert_eq!(&derive_tables(db.entries()), db.tables());
    let encoder = LocalEncoder::default();
    for e in db.entries() {
        let fresh = encoder.encode(&entry_schema_text(e)).unwrap().to_f32();
        prop_assert_eq!(db.embedding(e.id), Some(fresh.as_slice()));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_projects_satisfy_entry_invariants(seed in any::<u64>()) {
        check_invariants(&db_of(&random_units(seed)))?;
    }

    #[test]
    fn input_order_does_not_matter(seed in any::<u64>()) {
        let units = random_units(seed);
        let mut shuffled = units.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(db_of(&units).to_json(), db_of(&shuffled).to_json());
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>()) {
        let json = db_of(&random_units(seed)).to_json();
        let again = ProjectDatabase::from_json(&json).unwrap().to_json();
        prop_assert_eq!(json, again);
    }
}
