//! Fixture loading and random project generation shared by the test suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repofix_core::index::{build_database, scan_source_files, ProjectDatabase, SourceFilter, SourceUnit};
use repofix_core::semantic::LocalEncoder;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn load_db(rel: &str) -> ProjectDatabase {
    let root = fixture(rel);
    let scan = scan_source_files(&root, &SourceFilter::default()).expect("fixture scan");
    build_database(root.display().to_string(), &scan.units, &LocalEncoder::default())
}

const MODULE_PATHS: [&str; 8] = [
    "keys.py",
    "async/__init__.py",
    "async/_bolt3.py",
    "neo4j/_sync/io/_bolt5.py",
    "util.py",
    "pkg/__init__.py",
    "pkg/log.py",
    "logging_ext.py",
];
const CLASS_NAMES: [&str; 6] = ["RootLogger", "AsyncBolt3", "AsyncBolt5x0", "Helper", "Manager", "Bolt"];
const FUNCTION_NAMES: [&str; 6] = ["dumpXML", "getLogger", "open_connection", "load", "helper", "hello"];
const METHOD_NAMES: [&str; 6] = ["__init__", "dumpXML", "hello", "close", "getLogger", "run"];
const VARIABLE_NAMES: [&str; 6] = ["v", "loggerDict", "VERSION", "xmls", "timeout", "DEFAULT"];
const ATTRIBUTE_NAMES: [&str; 3] = ["address", "manager", "handlers"];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], max: usize) -> Vec<&'a str> {
    let n = rng.gen_range(0..=max.min(pool.len()));
    pool.choose_multiple(rng, n).copied().collect()
}

fn gen_class(rng: &mut ChaCha8Rng, out: &mut String, indent: &str, name: &str, depth: u32) {
    out.push_str(&format!("{indent}class {name}:\n"));
    let inner = format!("{indent}    ");
    out.push_str(&format!("{inner}\"\"\"{name} docs.\"\"\"\n"));
    for v in pick(rng, &VARIABLE_NAMES, 2) {
        out.push_str(&format!("{inner}{v} = 1\n"));
    }
    for m in pick(rng, &METHOD_NAMES, 3) {
        out.push_str(&format!("{inner}def {m}(self, xmls=None):\n"));
        if m == "__init__" {
            for a in pick(rng, &ATTRIBUTE_NAMES, 2) {
                out.push_str(&format!("{inner}    self.{a} = xmls\n"));
            }
        }
        if rng.gen_bool(0.2) {
            out.push_str(&format!("{inner}    def inner():\n{inner}        return 0\n"));
        }
        out.push_str(&format!("{inner}    return xmls\n"));
    }
    if depth == 0 && rng.gen_bool(0.3) {
        let nested = *CLASS_NAMES.choose(rng).unwrap();
        gen_class(rng, out, &inner, &format!("{nested}Meta"), depth + 1);
    }
}

pub fn gen_module(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::from("\"\"\"Generated module.\"\"\"\n");
    for v in pick(rng, &VARIABLE_NAMES, 3) {
        out.push_str(&format!("{v} = 0\n"));
    }
    for f in pick(rng, &FUNCTION_NAMES, 3) {
        out.push_str(&format!("def {f}(xmls, *args):\n"));
        if rng.gen_bool(0.3) {
            out.push_str("    def parse(x):\n        return x\n");
        }
        if rng.gen_bool(0.2) {
            out.push_str("    class Local:\n        pass\n");
        }
        out.push_str("    return xmls\n");
    }
    for c in pick(rng, &CLASS_NAMES, 3) {
        gen_class(rng, &mut out, "", c, 0);
    }
    out
}

pub fn random_units(seed: u64) -> Vec<SourceUnit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b9);
    let mut units = Vec::new();
    for path in MODULE_PATHS {
        if units.is_empty() || rng.gen_bool(0.75) {
            units.push(SourceUnit::python(path, gen_module(&mut rng)));
        }
    }
    units
}

pub fn random_project(seed: u64) -> ProjectDatabase {
    build_database(format!("random-{seed}"), &random_units(seed), &LocalEncoder::new(16, seed))
}
