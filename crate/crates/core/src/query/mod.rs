//! Structural queries over the project database.

mod ast;
mod exec;
mod hardcoded;
mod parser;
mod synth;

pub use ast::{FromVar, Predicate, SelectItem, StructuralQuery};
pub use exec::{
    contains, execute_query, execute_query_with, name_matches, render_entry, QueryResult, DEFAULT_SNIPPET_LINES,
};
pub use hardcoded::{hardcoded_query_for, HARDCODED_CODES};
pub use parser::{parse_query, ParseErrorKind, QueryParseError};
pub use synth::{query_text, synthesize_query, SynthesisError};

/// Error message and query pairs shown to the model when it writes a query.
pub const DEMONSTRATIONS: [(&str, &str); 4] = [
    (
        "Unable to import 'keys'",
        "from Module m, Variable v where m.inSource() and v.getScope() = m select m",
    ),
    (
        "Instance of 'RootLogger' has no 'loggerDict' member",
        "from Module m, Class c, Function cf where m.inSource() and m.contains(c) and c.contains(cf) \
         and cf.getScope() = c and c.getName = 'RootLogger' and not cf.isInitMethod() select m, c, cf",
    ),
    (
        "No name 'AsyncBolt5x0' in module 'neo4j._sync.io._bolt5'",
        "from Module m, Variable v where m.inSource() and v.getScope() = m \
         and m.getName() = 'neo4j._sync.io._bolt5' select m, v.getDefinition()",
    ),
    (
        "No value for argument 'xmls' in function call 'dumpXML'",
        "from Module m, Function f where m.inSource() and m.contains(f) and f.getName() = 'dumpXML' select m, f",
    ),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demonstrations_parse_and_round_trip() {
        for (_, text) in DEMONSTRATIONS {
            let q = parse_query(text).unwrap();
            assert_eq!(parse_query(&q.to_string()).unwrap(), q);
        }
    }

    #[test]
    fn completion_cleanup() {
        let c = "Sure.\n```\nQuery: FROM Module m\n  WHERE m.getName() = 'a'\nSELECT m\n```\nDone.";
        assert_eq!(query_text(c), "FROM Module m WHERE m.getName() = 'a' SELECT m");
        assert!(parse_query(&query_text("I could not find a query for this.")).is_err());
    }
}
